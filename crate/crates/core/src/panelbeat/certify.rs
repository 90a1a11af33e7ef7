use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::growth::sphere_directions;
use super::{PanelBeatError, TubeChart};
use crate::algebra::SmoothMap;

/// Offsets toward the stratum, tolerance and probe counts.
#[derive(Clone, Debug, Serialize)]
pub struct CertifyOptions {
    /// Strictly decreasing distances from the stratum.
    pub offsets: Vec<f64>,
    pub tol: f64,
    /// Base points per stratum axis (a point stratum always uses one).
    pub base_points: usize,
    /// Normal directions per base point when the codimension exceeds one.
    pub directions: usize,
    /// Seed for random normal directions (codimension three and above).
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            offsets: (2..=6).map(|k| 10f64.powi(-k)).collect(),
            tol: 1e-3,
            base_points: 8,
            directions: 8,
            seed: 0,
        }
    }
}

/// How the Jacobian on the stratum was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumJacobian {
    ClosedForm,
    FiniteDifference,
    /// A closed form exists but is not finite there.
    NonFinite,
}

/// Derivative traces along one ray `b + h ν` into the stratum.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeTrace {
    /// Stratum parameter of the base point.
    pub param: Vec<f64>,
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
    /// `|(F(b + hν) − F(b))/h − J₀ν|` per offset (without `J₀` when it is
    /// not finite).
    pub radial: Vec<f64>,
    /// `max_j |J(b + hν) τ_j − J₀ τ_j|` per offset.
    pub tangential: Vec<f64>,
    /// `max |J(b + hν) − J₀|` per offset.
    pub jump: Vec<f64>,
    pub radial_limit: f64,
    pub tangential_limit: f64,
    pub jump_limit: f64,
    pub radial_pass: bool,
    pub tangential_pass: bool,
    pub jump_pass: bool,
    /// `|J(b + hν) ν| < 2h` at every offset.
    pub radial_bound: bool,
}

impl ProbeTrace {
    pub fn pass(&self) -> bool {
        self.radial_pass && self.tangential_pass && self.jump_pass
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct C1Report {
    pub tol: f64,
    pub offsets: Vec<f64>,
    pub stratum_jacobian: StratumJacobian,
    pub probes: Vec<ProbeTrace>,
    /// Probes abandoned because a point left the map's domain.
    pub skipped: usize,
    /// Base points whose tangential derivatives do not converge: the
    /// sampled estimate of the bad set.
    pub bad_set: Vec<Vec<f64>>,
    pub max_radial: f64,
    pub max_jump: f64,
    /// Worst tangential deviation at the finest offset, off the bad set.
    pub max_tangential_off_bad_set: f64,
    /// Median log-log slope of the radial trace over the offsets.
    pub radial_rate: Option<f64>,
    pub pass: bool,
    pub pass_excluding_bad_set: bool,
}

/// Decides whether a trace tends to zero: either its final value is
/// negligible, or its last three values decrease strictly and their
/// Aitken extrapolation is below `tol`. Returns the verdict and the limit
/// estimate.
pub fn trace_converges(values: &[f64], tol: f64) -> (bool, f64) {
    let Some(&last) = values.last() else {
        return (false, f64::NAN);
    };
    if values.iter().any(|v| !v.is_finite()) {
        return (false, f64::INFINITY);
    }
    if last <= (1e-3 * tol).max(1e-12) {
        return (true, last);
    }
    let n = values.len();
    if n < 3 {
        return (last < tol, last);
    }
    let (x0, x1, x2) = (values[n - 3], values[n - 2], values[n - 1]);
    if !(x2 < x1 && x1 < x0) {
        return (false, x2);
    }
    let d1 = x2 - x1;
    let denom = d1 - (x1 - x0);
    let limit = if denom.abs() > 0.0 { x2 - d1 * d1 / denom } else { x2 };
    let limit = limit.max(0.0);
    (limit < tol, limit)
}

/// Numerical C¹ check of `f` at the stratum of `tube`: radial difference
/// quotients, tangential derivatives and Jacobian jumps along rays toward
/// sampled base points.
pub fn certify_c1(f: &SmoothMap, tube: &TubeChart, opts: &CertifyOptions) -> Result<C1Report, PanelBeatError> {
    if opts.offsets.is_empty() || opts.offsets.windows(2).any(|w| !(w[0] > w[1])) || !(opts.offsets[opts.offsets.len() - 1] > 0.0) {
        return Err(PanelBeatError::Schedule("certification offsets must be strictly decreasing and positive".into()));
    }
    if f.domain_dim() != tube.ambient_dim() {
        return Err(PanelBeatError::Dimension(format!(
            "map takes {} coordinates but the tube lives in R^{}",
            f.domain_dim(),
            tube.ambient_dim()
        )));
    }
    let m = tube.ambient_dim();
    let d = tube.stratum_dim();
    let params = tube.sample_params(if d == 0 { 1 } else { opts.base_points });
    let dirs = sphere_directions(m - d, opts.directions, opts.seed);
    let h_min = opts.offsets[opts.offsets.len() - 1];

    let mut jobs = Vec::new();
    for x in &params {
        for u in &dirs {
            jobs.push((x.clone(), u.clone()));
        }
    }
    let results: Vec<Result<Option<(ProbeTrace, StratumJacobian)>, PanelBeatError>> = jobs
        .par_iter()
        .map(|(x, u)| probe(f, tube, x, u, opts, h_min))
        .collect();

    let mut probes = Vec::new();
    let mut skipped = 0;
    let mut stratum = StratumJacobian::ClosedForm;
    for r in results {
        match r? {
            Some((t, s)) => {
                if s == StratumJacobian::NonFinite || (s == StratumJacobian::FiniteDifference && stratum == StratumJacobian::ClosedForm) {
                    stratum = s;
                }
                probes.push(t);
            }
            None => skipped += 1,
        }
    }
    let mut bad_set: Vec<Vec<f64>> = Vec::new();
    for p in probes.iter().filter(|p| !p.tangential_pass) {
        if !bad_set.contains(&p.param) {
            bad_set.push(p.param.clone());
        }
    }
    let off_bad: Vec<&ProbeTrace> = probes.iter().filter(|p| !bad_set.contains(&p.param)).collect();
    let stratum_ok = stratum != StratumJacobian::NonFinite;
    let finest = |v: &Vec<f64>| v.last().copied().unwrap_or(0.0);
    let max_of = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let mut rates: Vec<f64> = probes.iter().filter_map(|p| log_slope(&opts.offsets, &p.radial)).collect();
    rates.sort_by(f64::total_cmp);
    Ok(C1Report {
        tol: opts.tol,
        offsets: opts.offsets.clone(),
        stratum_jacobian: stratum,
        max_radial: max_of(&mut probes.iter().map(|p| finest(&p.radial))),
        max_jump: max_of(&mut probes.iter().map(|p| finest(&p.jump))),
        max_tangential_off_bad_set: max_of(&mut off_bad.iter().map(|p| finest(&p.tangential))),
        radial_rate: (!rates.is_empty()).then(|| rates[rates.len() / 2]),
        pass: stratum_ok && !probes.is_empty() && probes.iter().all(|p| p.pass()),
        pass_excluding_bad_set: stratum_ok && !off_bad.is_empty() && off_bad.iter().all(|p| p.radial_pass && p.jump_pass),
        probes,
        skipped,
        bad_set,
    })
}

fn log_slope(hs: &[f64], vs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(vs)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(h, v)| (h.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn probe(
    f: &SmoothMap,
    tube: &TubeChart,
    x: &[f64],
    u: &[f64],
    opts: &CertifyOptions,
    h_min: f64,
) -> Result<Option<(ProbeTrace, StratumJacobian)>, PanelBeatError> {
    let zero = vec![0.0; u.len()];
    let b = tube.g(x, &zero)?;
    let nu = DVector::from_vec(tube.g(x, u)?) - DVector::from_column_slice(&b);
    let tangents = tube.tangents(x)?;
    let taus: Vec<DVector<f64>> = tangents
        .column_iter()
        .map(|c| {
            let n = c.norm();
            c / n
        })
        .collect();
    if !f.in_domain(&b) {
        return Ok(None);
    }
    let points: Vec<Vec<f64>> = opts
        .offsets
        .iter()
        .map(|&h| (DVector::from_column_slice(&b) + &nu * h).as_slice().to_vec())
        .collect();
    if points.iter().any(|p| !f.in_domain(p)) {
        return Ok(None);
    }
    let (j0, source) = if f.has_closed_jacobian() {
        match f.closed_jacobian(&b) {
            Some(j) => (j, StratumJacobian::ClosedForm),
            None => (f.fd_jacobian(&b, h_min * 1e-2), StratumJacobian::NonFinite),
        }
    } else {
        (f.fd_jacobian(&b, h_min * 1e-2), StratumJacobian::FiniteDifference)
    };
    let fb = DVector::from_vec(f.eval(&b)?);
    let j0nu = &j0 * &nu;
    let mut radial = Vec::new();
    let mut tangential = Vec::new();
    let mut jump = Vec::new();
    let mut radial_bound = true;
    for (p, &h) in points.iter().zip(&opts.offsets) {
        let fp = DVector::from_vec(f.eval(p)?);
        let q = (fp - &fb) / h;
        radial.push(if source == StratumJacobian::NonFinite {
            q.norm()
        } else {
            (q - &j0nu).norm()
        });
        let jp = match f.closed_jacobian(p) {
            Some(j) => j,
            None => f.fd_jacobian(p, h / 4.0),
        };
        let tdev = taus
            .iter()
            .map(|t| (&jp * t - &j0 * t).norm())
            .fold(0.0, f64::max);
        tangential.push(tdev);
        jump.push(amax(&(&jp - &j0)));
        if !((&jp * &nu).norm() < 2.0 * h) {
            radial_bound = false;
        }
    }
    let (radial_pass, radial_limit) = trace_converges(&radial, opts.tol);
    let (tangential_pass, tangential_limit) = trace_converges(&tangential, opts.tol);
    let (jump_pass, jump_limit) = trace_converges(&jump, opts.tol);
    Ok(Some((
        ProbeTrace {
            param: x.to_vec(),
            base: b,
            direction: nu.as_slice().to_vec(),
            radial,
            tangential,
            jump,
            radial_limit,
            tangential_limit,
            jump_limit,
            radial_pass,
            tangential_pass,
            jump_pass,
            radial_bound,
        },
        source,
    )))
}

fn amax(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}
