//! Panel beating: tubes around a stratum, growth exponents of a map across
//! the tube, the radial flattening `χ`, and numerical C¹ certification of
//! `f ∘ χ`.

mod certify;
mod chi;
pub mod demos;
mod eta;
mod growth;
mod tube;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

pub use certify::{certify_c1, trace_converges, C1Report, CertifyOptions, ProbeTrace, StratumJacobian};
pub use chi::{apply_chi, chi_inverse, chi_jacobian, chi_map};
pub use eta::{EtaProfile, DEFAULT_T0};
pub use growth::{default_schedule, estimate_growth_exponent, estimate_growth_exponent_seeded, GrowthEstimate, FLAT_THRESHOLD};
pub use tube::{TubeChart, TubeCoords};

use crate::algebra::{AlgebraError, SmoothMap, FD_STEP};

/// Upper bound on repeated beat-and-certify rounds.
pub const MAX_BEAT_ITERATIONS: usize = 8;

#[derive(Debug, Error)]
pub enum PanelBeatError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("tube radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("stratum patch is rank deficient at {0:?}")]
    RankDeficient(Vec<f64>),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("margin must be positive, got {0}")]
    Margin(f64),
    #[error("growth exponent lower bound {0} is not positive")]
    NonPositiveExponent(f64),
}

/// `r = max(1/α_lower, 1) + margin` with the default cutoff.
pub fn select_eta(est: &GrowthEstimate, margin: f64) -> Result<EtaProfile, PanelBeatError> {
    if !(margin > 0.0) {
        return Err(PanelBeatError::Margin(margin));
    }
    let lower = est.alpha_lower();
    if !(lower > 0.0) {
        return Err(PanelBeatError::NonPositiveExponent(lower));
    }
    EtaProfile::new((1.0 / lower).max(1.0) + margin, DEFAULT_T0)
}

/// `f ∘ χ`. Off the stratum the Jacobian follows the chain rule; on it,
/// derivatives across the stratum are zero and derivatives along it are
/// those of `f` restricted to the stratum.
pub fn panel_beat(f: &SmoothMap, tube: &TubeChart, eta: &EtaProfile) -> Result<SmoothMap, PanelBeatError> {
    let m = tube.ambient_dim();
    if f.domain_dim() != m {
        return Err(PanelBeatError::Dimension(format!(
            "map takes {} coordinates but the tube lives in R^{m}",
            f.domain_dim()
        )));
    }
    let k = f.codomain_dim();
    let chi = chi_map(tube, eta);
    let shared = Arc::new((f.clone(), tube.clone(), eta.clone(), chi));
    let (s1, s2, s3) = (Arc::clone(&shared), Arc::clone(&shared), shared);
    Ok(SmoothMap::new(m, k, move |y| {
        let (f, _, _, chi) = &*s1;
        f.eval_unchecked(&chi.eval_unchecked(y))
    })
    .with_domain(move |y| {
        let (f, _, _, chi) = &*s2;
        f.in_domain(&chi.eval_unchecked(y))
    })
    .with_jacobian(move |y| {
        let (f, tube, eta, _) = &*s3;
        beaten_jacobian(f, tube, eta, y)
    }))
}

fn beaten_jacobian(f: &SmoothMap, tube: &TubeChart, eta: &EtaProfile, y: &[f64]) -> Option<DMatrix<f64>> {
    let m = tube.ambient_dim();
    let d = tube.stratum_dim();
    let k = f.codomain_dim();
    match tube.coords(y) {
        Some(c) if c.rho() == 0.0 => {
            if d == 0 {
                return Some(DMatrix::zeros(k, m));
            }
            // derivative of x ↦ f(V(x)) pulled back through the tangent frame
            let t = tube.tangents(&c.x).ok()?;
            let mut along = DMatrix::zeros(k, d);
            let step = FD_STEP * f.fd_scale();
            for j in 0..d {
                let (lo, hi) = tube.domain()[j];
                let mut xp = c.x.clone();
                let mut xm = c.x.clone();
                xp[j] = (xp[j] + step).min(hi);
                xm[j] = (xm[j] - step).max(lo);
                let yp = tube.g(&xp, &vec![0.0; m - d]).ok()?;
                let ym = tube.g(&xm, &vec![0.0; m - d]).ok()?;
                if !(f.in_domain(&yp) && f.in_domain(&ym)) {
                    return None;
                }
                let fp = f.eval_unchecked(&yp);
                let fm = f.eval_unchecked(&ym);
                for i in 0..k {
                    along[(i, j)] = (fp[i] - fm[i]) / (xp[j] - xm[j]);
                }
            }
            let pinv = (t.transpose() * &t).try_inverse()? * t.transpose();
            let j = along * pinv;
            j.iter().all(|v| v.is_finite()).then_some(j)
        }
        _ => {
            let jc = chi_jacobian(tube, eta, y)?;
            let z = apply_chi(tube, eta, y);
            let jf = f.jacobian(&z).ok()?.matrix;
            let j = jf * jc;
            j.iter().all(|v| v.is_finite()).then_some(j)
        }
    }
}

/// Outcome of one panel beating of a map.
#[derive(Clone, Debug)]
pub struct Beaten {
    pub map: SmoothMap,
    pub estimate: GrowthEstimate,
    pub eta: EtaProfile,
    pub report: C1Report,
}

/// Estimates the growth exponent, selects `η`, beats and certifies.
pub fn beat_and_certify(
    f: &SmoothMap,
    tube: &TubeChart,
    margin: f64,
    schedule: &[f64],
    opts: &CertifyOptions,
) -> Result<Beaten, PanelBeatError> {
    let estimate = estimate_growth_exponent_seeded(f, tube, schedule, opts.seed)?;
    let eta = select_eta(&estimate, margin)?;
    let map = panel_beat(f, tube, &eta)?;
    let report = certify_c1(&map, tube, opts)?;
    Ok(Beaten {
        map,
        estimate,
        eta,
        report,
    })
}

/// Repeats [`beat_and_certify`] on its own output until certification
/// passes or [`MAX_BEAT_ITERATIONS`] rounds have run.
pub fn beat_until_certified(
    f: &SmoothMap,
    tube: &TubeChart,
    margin: f64,
    schedule: &[f64],
    opts: &CertifyOptions,
) -> Result<(Vec<Beaten>, bool), PanelBeatError> {
    let mut rounds: Vec<Beaten> = Vec::new();
    let mut current = f.clone();
    for _ in 0..MAX_BEAT_ITERATIONS {
        let b = beat_and_certify(&current, tube, margin, schedule, opts)?;
        let pass = b.report.pass;
        current = b.map.clone();
        rounds.push(b);
        if pass {
            return Ok((rounds, true));
        }
    }
    Ok((rounds, false))
}

/// One shared `η` for several maps on the same tube.
#[derive(Clone, Debug)]
pub struct MultiBeat {
    /// Growth of the product map `y ↦ (f_1(y), …, f_k(y))`.
    pub estimate: GrowthEstimate,
    pub eta: EtaProfile,
    pub maps: Vec<SmoothMap>,
    pub reports: Vec<C1Report>,
}

impl MultiBeat {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// The product of the given maps.
pub fn product_map(maps: &[SmoothMap]) -> Result<SmoothMap, PanelBeatError> {
    let Some(first) = maps.first() else {
        return Err(PanelBeatError::Dimension("no maps given".into()));
    };
    let m = first.domain_dim();
    if maps.iter().any(|f| f.domain_dim() != m) {
        return Err(PanelBeatError::Dimension("maps have different domains".into()));
    }
    let k: usize = maps.iter().map(|f| f.codomain_dim()).sum();
    let a: Arc<Vec<SmoothMap>> = Arc::new(maps.to_vec());
    let (a1, a2, a3) = (Arc::clone(&a), Arc::clone(&a), a);
    let closed = maps.iter().all(|f| f.has_closed_jacobian());
    let mut p = SmoothMap::new(m, k, move |y| a1.iter().flat_map(|f| f.eval_unchecked(y)).collect())
        .with_domain(move |y| a2.iter().all(|f| f.in_domain(y)));
    if closed {
        p = p.with_jacobian(move |y| {
            let blocks = a3.iter().map(|f| f.closed_jacobian(y)).collect::<Option<Vec<_>>>()?;
            let mut j = DMatrix::zeros(k, m);
            let mut row = 0;
            for b in blocks {
                j.view_mut((row, 0), (b.nrows(), m)).copy_from(&b);
                row += b.nrows();
            }
            Some(j)
        });
    }
    Ok(p)
}

/// Common panel beating: `η` chosen from the growth of the product map and
/// applied to every map, each then certified.
pub fn panel_beat_multi(
    maps: &[SmoothMap],
    tube: &TubeChart,
    margin: f64,
    schedule: &[f64],
    opts: &CertifyOptions,
) -> Result<MultiBeat, PanelBeatError> {
    let product = product_map(maps)?;
    let estimate = estimate_growth_exponent_seeded(&product, tube, schedule, opts.seed)?;
    let eta = select_eta(&estimate, margin)?;
    let mut beaten = Vec::with_capacity(maps.len());
    let mut reports = Vec::with_capacity(maps.len());
    for f in maps {
        let g = panel_beat(f, tube, &eta)?;
        reports.push(certify_c1(&g, tube, opts)?);
        beaten.push(g);
    }
    Ok(MultiBeat {
        estimate,
        eta,
        maps: beaten,
        reports,
    })
}

/// Serializable summary of a multi-map beating.
#[derive(Clone, Debug, Serialize)]
pub struct MultiSummary<'a> {
    pub estimate: &'a GrowthEstimate,
    pub eta: &'a EtaProfile,
    pub reports: &'a [C1Report],
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(alpha: f64) -> GrowthEstimate {
        GrowthEstimate {
            samples: Vec::new(),
            alpha,
            half_width: 0.0,
            residual: 0.0,
            window: (0, 0),
            monotone_fallback: false,
        }
    }

    #[test]
    fn exponent_rule() {
        assert_eq!(select_eta(&est(0.5), 0.5).unwrap().r, 2.5);
        assert_eq!(select_eta(&est(2.0), 0.5).unwrap().r, 1.5);
        assert_eq!(select_eta(&est(1.0), 0.25).unwrap().r, 1.25);
        assert!(matches!(select_eta(&est(1.0), 0.0), Err(PanelBeatError::Margin(_))));
        assert_eq!(select_eta(&est(f64::INFINITY), 0.5).unwrap().r, 1.5);
    }

    fn sqrt_map() -> SmoothMap {
        SmoothMap::new(1, 1, |t| vec![t[0].sqrt()])
            .with_domain(|t| t[0] >= 0.0)
            .with_jacobian(|t| Some(DMatrix::from_element(1, 1, 0.5 / t[0].sqrt())))
    }

    #[test]
    fn beaten_sqrt_is_power_law() {
        let tube = TubeChart::point(vec![0.0], 1.0).unwrap();
        let eta = EtaProfile::new(3.0, 0.25).unwrap();
        let g = panel_beat(&sqrt_map(), &tube, &eta).unwrap();
        for t in [1e-3, 0.01, 0.2] {
            assert!((g.eval(&[t]).unwrap()[0] - t.powf(1.5)).abs() < 1e-15);
        }
        let r = certify_c1(&g, &tube, &CertifyOptions::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.max_radial <= 2.0 * 1e-3);
        let raw = certify_c1(&sqrt_map(), &tube, &CertifyOptions::default()).unwrap();
        assert!(!raw.pass);
        assert_eq!(raw.stratum_jacobian, StratumJacobian::NonFinite);
    }

    #[test]
    fn affine_maps_keep_tangential_derivatives() {
        let tube = TubeChart::affine(vec![0.0, 0.0], vec![vec![1.0, 0.0]], vec![(-1.0, 1.0)], 1.0).unwrap();
        let eta = EtaProfile::new(2.0, 0.25).unwrap();
        let f = SmoothMap::affine(
            DMatrix::from_row_slice(1, 2, &[3.0, 1.0]),
            nalgebra::DVector::from_vec(vec![0.0]),
        );
        let g = panel_beat(&f, &tube, &eta).unwrap();
        let j = g.closed_jacobian(&[0.2, 0.0]).unwrap();
        assert!((j[(0, 0)] - 3.0).abs() < 1e-8 && j[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn multi_uses_worst_growth() {
        let tube = TubeChart::point(vec![0.0], 1.0).unwrap();
        let id = SmoothMap::new(1, 1, |t| vec![t[0]])
            .with_domain(|t| t[0] >= 0.0)
            .with_jacobian(|_| Some(DMatrix::from_element(1, 1, 1.0)));
        let mb = panel_beat_multi(&[sqrt_map(), id], &tube, 0.5, &default_schedule(), &CertifyOptions::default()).unwrap();
        assert!((mb.estimate.alpha - 0.5).abs() < 0.05);
        assert!((mb.eta.r - 2.5).abs() < 0.1);
        assert!(mb.all_pass(), "{:?}", mb.reports.iter().map(|r| r.pass).collect::<Vec<_>>());
    }

    #[test]
    fn iteration_stops_when_certified() {
        let tube = TubeChart::point(vec![0.0], 1.0).unwrap();
        let (rounds, ok) = beat_until_certified(&sqrt_map(), &tube, 0.5, &default_schedule(), &CertifyOptions::default()).unwrap();
        assert!(ok);
        assert_eq!(rounds.len(), 1);
    }
}
