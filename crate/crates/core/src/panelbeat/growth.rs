use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{PanelBeatError, TubeChart};
use crate::algebra::SmoothMap;

/// Values below this count as zero deviation.
pub const FLAT_THRESHOLD: f64 = 1e-14;
/// Base points sampled on a stratum of positive dimension.
pub const MIN_BASE_POINTS: usize = 32;
/// Unit normal directions sampled when the codimension exceeds one.
pub const SPHERE_DIRECTIONS: usize = 32;

/// `10^{-1 - i/4}` for `i = 0..=20`: radii from 1e-1 down to 1e-6.
pub fn default_schedule() -> Vec<f64> {
    (0..=20).map(|i| 10f64.powf(-1.0 - i as f64 / 4.0)).collect()
}

/// Power-law fit `g(t) ≈ C t^α` of the sup-deviation of a map across a tube.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthEstimate {
    /// `(t, g(t))` for every radius of the schedule.
    pub samples: Vec<(f64, f64)>,
    /// Fitted exponent; `+∞` when the map is flat at every radius.
    pub alpha: f64,
    /// Two standard errors of the fitted slope.
    pub half_width: f64,
    /// Least-squares residual (root mean square, in log space).
    pub residual: f64,
    /// Index range `[start, end)` of the samples used in the fit.
    pub window: (usize, usize),
    /// The final decade was not monotone and a shorter suffix was fitted.
    pub monotone_fallback: bool,
}

impl GrowthEstimate {
    pub fn alpha_lower(&self) -> f64 {
        self.alpha - self.half_width
    }

    pub fn is_flat(&self) -> bool {
        self.alpha.is_infinite()
    }
}

/// Deterministic unit directions in `R^c`; `seed` only matters for `c >= 3`.
pub(crate) fn sphere_directions(c: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match c {
        0 => vec![Vec::new()],
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out: Vec<Vec<f64>> = (0..c)
                .flat_map(|i| {
                    let mut e = vec![0.0; c];
                    e[i] = 1.0;
                    let mut f = e.clone();
                    f[i] = -1.0;
                    [e, f]
                })
                .collect();
            while out.len() < count.max(2 * c) {
                let v: Vec<f64> = (0..c)
                    .map(|_| {
                        // Box-Muller
                        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                        let u2: f64 = rng.gen();
                        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                    })
                    .collect();
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if n > 1e-3 {
                    out.push(v.into_iter().map(|a| a / n).collect());
                }
            }
            out.truncate(count.max(2 * c));
            out
        }
    }
}

pub(crate) fn base_points(tube: &TubeChart) -> Vec<Vec<f64>> {
    let d = tube.stratum_dim();
    if d == 0 {
        return tube.sample_params(1);
    }
    let k = (MIN_BASE_POINTS as f64).powf(1.0 / d as f64).ceil() as usize;
    tube.sample_params(k)
}

/// `g(t) = sup_{x, ū} |f(g(x, t ū)) − f(g(x, 0))|` over a deterministic sample
/// of base points and unit normal directions, with the exponent fitted on
/// the final decade of the schedule.
pub fn estimate_growth_exponent(
    f: &SmoothMap,
    tube: &TubeChart,
    schedule: &[f64],
) -> Result<GrowthEstimate, PanelBeatError> {
    estimate_growth_exponent_seeded(f, tube, schedule, 0)
}

/// [`estimate_growth_exponent`] with an explicit seed for the random normal
/// directions used in codimension three and above.
pub fn estimate_growth_exponent_seeded(
    f: &SmoothMap,
    tube: &TubeChart,
    schedule: &[f64],
    seed: u64,
) -> Result<GrowthEstimate, PanelBeatError> {
    if schedule.len() < 2 || schedule.windows(2).any(|w| !(w[0] > w[1])) || !(schedule[schedule.len() - 1] > 0.0) {
        return Err(PanelBeatError::Schedule(
            "growth schedule must be strictly decreasing and positive".into(),
        ));
    }
    if f.domain_dim() != tube.ambient_dim() {
        return Err(PanelBeatError::Dimension(format!(
            "map takes {} coordinates but the tube lives in R^{}",
            f.domain_dim(),
            tube.ambient_dim()
        )));
    }
    let c = tube.ambient_dim() - tube.stratum_dim();
    let dirs = sphere_directions(c, SPHERE_DIRECTIONS, seed);
    let bases = base_points(tube);
    let zero = vec![0.0; c];
    let mut anchors = Vec::with_capacity(bases.len());
    for x in &bases {
        let y = tube.g(x, &zero)?;
        if f.in_domain(&y) {
            anchors.push((x.clone(), f.eval(&y)?));
        }
    }
    let samples: Vec<(f64, f64)> = schedule
        .par_iter()
        .map(|&t| {
            let mut worst: f64 = 0.0;
            for (x, f0) in &anchors {
                for u in &dirs {
                    let tu: Vec<f64> = u.iter().map(|a| a * t).collect();
                    let Ok(y) = tube.g(x, &tu) else { continue };
                    if !f.in_domain(&y) {
                        continue;
                    }
                    let Ok(v) = f.eval(&y) else { continue };
                    let dev = v.iter().zip(f0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if dev.is_finite() {
                        worst = worst.max(dev);
                    }
                }
            }
            (t, worst)
        })
        .collect();
    Ok(fit(samples))
}

fn fit(samples: Vec<(f64, f64)>) -> GrowthEstimate {
    let n = samples.len();
    if samples.iter().all(|s| s.1 < FLAT_THRESHOLD) {
        return GrowthEstimate {
            samples,
            alpha: f64::INFINITY,
            half_width: 0.0,
            residual: 0.0,
            window: (n, n),
            monotone_fallback: false,
        };
    }
    let t_min = samples[n - 1].0;
    let decade_start = samples.iter().position(|s| s.0 <= 10.0 * t_min * (1.0 + 1e-12)).unwrap_or(0);
    let monotone = |a: usize| {
        (a + 1..n).all(|i| samples[i].1 < samples[i - 1].1 && samples[i].1 >= FLAT_THRESHOLD)
            && samples[a].1 >= FLAT_THRESHOLD
    };
    let (start, fallback) = if n - decade_start >= 3 && monotone(decade_start) {
        (decade_start, false)
    } else {
        let mut a = n - 1;
        while a > 0 && monotone(a - 1) {
            a -= 1;
        }
        (a, true)
    };
    let pts: Vec<(f64, f64)> = samples[start..]
        .iter()
        .filter(|s| s.1 >= FLAT_THRESHOLD)
        .map(|s| (s.0.ln(), s.1.ln()))
        .collect();
    let (alpha, half_width, residual) = if pts.len() < 2 {
        (0.0, f64::INFINITY, f64::INFINITY)
    } else {
        least_squares(&pts)
    };
    GrowthEstimate {
        samples,
        alpha,
        half_width,
        residual,
        window: (start, n),
        monotone_fallback: fallback,
    }
}

/// Slope, two standard errors and RMS residual of a line fit.
fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    let se = if pts.len() > 2 {
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, 2.0 * se, (ssr / k).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis_tube() -> TubeChart {
        TubeChart::affine(vec![0.0, 0.0], vec![vec![1.0, 0.0]], vec![(-1.0, 1.0)], 1.0).unwrap()
    }

    #[test]
    fn square_root_linear_quadratic() {
        let tube = axis_tube();
        let cases: [(fn(f64) -> f64, f64, f64); 3] = [
            (|u: f64| u.abs().sqrt(), 0.5, 0.05),
            (|u: f64| u, 1.0, 0.05),
            (|u: f64| u * u, 2.0, 0.1),
        ];
        for (h, expect, tol) in cases {
            let f = SmoothMap::new(2, 2, move |x| vec![x[0], h(x[1])]);
            let g = estimate_growth_exponent(&f, &tube, &default_schedule()).unwrap();
            assert!((g.alpha - expect).abs() < tol, "{g:?}");
            assert!(g.half_width < 1e-6);
            assert!(!g.monotone_fallback);
        }
    }

    #[test]
    fn flat_map_has_infinite_exponent() {
        let f = SmoothMap::new(2, 1, |x| vec![x[0]]);
        let g = estimate_growth_exponent(&f, &axis_tube(), &default_schedule()).unwrap();
        assert!(g.is_flat());
    }

    #[test]
    fn codimension_two_directions() {
        let tube = TubeChart::point(vec![0.0, 0.0], 1.0).unwrap();
        let f = SmoothMap::new(2, 1, |x| vec![(x[0] * x[0] + x[1] * x[1]).powf(0.75)]);
        let g = estimate_growth_exponent(&f, &tube, &default_schedule()).unwrap();
        assert!((g.alpha - 1.5).abs() < 1e-6);
        assert_eq!(sphere_directions(3, 32, 0).len(), 32);
    }

    #[test]
    fn schedule_must_decrease() {
        let f = SmoothMap::new(2, 1, |x| vec![x[1]]);
        assert!(estimate_growth_exponent(&f, &axis_tube(), &[1e-3, 1e-2]).is_err());
    }
}
