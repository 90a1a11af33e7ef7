use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{EtaProfile, TubeChart};
use crate::algebra::SmoothMap;

/// Radial reparametrization `χ(g(x, u)) = g(x, R η(|u|/R) ū)`; the identity
/// on the stratum, outside the tube, and where `|u| ≥ R/2`.
pub fn apply_chi(tube: &TubeChart, eta: &EtaProfile, y: &[f64]) -> Vec<f64> {
    let r = tube.radius();
    let Some(c) = tube.coords(y) else {
        return y.to_vec();
    };
    let rho = c.rho();
    if rho == 0.0 || rho >= 0.5 * r {
        return y.to_vec();
    }
    let s = r * eta.eval(rho / r);
    let u: Vec<f64> = c.u.iter().map(|a| a * s / rho).collect();
    tube.g(&c.x, &u).unwrap_or_else(|_| y.to_vec())
}

/// Inverse of [`apply_chi`], with `η` inverted by bisection.
pub fn chi_inverse(tube: &TubeChart, eta: &EtaProfile, y: &[f64]) -> Vec<f64> {
    let r = tube.radius();
    let Some(c) = tube.coords(y) else {
        return y.to_vec();
    };
    let rho = c.rho();
    if rho == 0.0 || rho >= 0.5 * r {
        return y.to_vec();
    }
    let s = r * eta.inverse(rho / r);
    let u: Vec<f64> = c.u.iter().map(|a| a * s / rho).collect();
    tube.g(&c.x, &u).unwrap_or_else(|_| y.to_vec())
}

/// Jacobian of `χ` at `y`: `J_g(x, u') · diag(I, D) · J_g(x, u)⁻¹` with
/// `D = s'(ρ) ūūᵀ + (s/ρ)(I − ūūᵀ)`. On the stratum `D = 0`, which leaves
/// the projection onto the tangent space.
pub fn chi_jacobian(tube: &TubeChart, eta: &EtaProfile, y: &[f64]) -> Option<DMatrix<f64>> {
    let m = tube.ambient_dim();
    let d = tube.stratum_dim();
    let r = tube.radius();
    let Some(c) = tube.coords(y) else {
        return Some(DMatrix::identity(m, m));
    };
    let rho = c.rho();
    if rho >= 0.5 * r {
        return Some(DMatrix::identity(m, m));
    }
    let k = m - d;
    let (dmat, u_new) = if rho == 0.0 {
        (DMatrix::zeros(k, k), c.u.clone())
    } else {
        let t = rho / r;
        let s = r * eta.eval(t);
        let sp = eta.deriv(t);
        let ubar = DVector::from_iterator(k, c.u.iter().map(|a| a / rho));
        let outer = &ubar * ubar.transpose();
        let dm = &outer * sp + (DMatrix::identity(k, k) - &outer) * (s / rho);
        (dm, ubar.iter().map(|a| a * s).collect())
    };
    let mut mid = DMatrix::zeros(m, m);
    for i in 0..d {
        mid[(i, i)] = 1.0;
    }
    mid.view_mut((d, d), (k, k)).copy_from(&dmat);
    let jg_in = tube.g_jacobian(&c.x, &c.u).ok()?;
    let jg_out = tube.g_jacobian(&c.x, &u_new).ok()?;
    let inv = jg_in.try_inverse()?;
    Some(jg_out * mid * inv)
}

/// `χ` as a differentiable map with its closed-form Jacobian.
pub fn chi_map(tube: &TubeChart, eta: &EtaProfile) -> SmoothMap {
    let m = tube.ambient_dim();
    let shared = Arc::new((tube.clone(), eta.clone()));
    let s2 = Arc::clone(&shared);
    SmoothMap::new(m, m, move |y| apply_chi(&shared.0, &shared.1, y))
        .with_jacobian(move |y| chi_jacobian(&s2.0, &s2.1, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis() -> TubeChart {
        TubeChart::affine(vec![0.0, 0.0], vec![vec![1.0, 0.0]], vec![(-2.0, 2.0)], 1.0).unwrap()
    }

    #[test]
    fn fixed_points() {
        let e = EtaProfile::new(2.0, 0.25).unwrap();
        let t = axis();
        assert_eq!(apply_chi(&t, &e, &[0.3, 0.0]), vec![0.3, 0.0]);
        assert_eq!(apply_chi(&t, &e, &[0.3, 0.6]), vec![0.3, 0.6]);
        assert_eq!(apply_chi(&t, &e, &[0.3, 5.0]), vec![0.3, 5.0]);
    }

    #[test]
    fn power_law_inside() {
        let e = EtaProfile::new(2.0, 0.25).unwrap();
        let t = TubeChart::point(vec![0.0, 0.0], 2.0).unwrap();
        let y = apply_chi(&t, &e, &[0.5, 0.0]);
        assert!((y[0] - 0.0625 * 2.0).abs() < 1e-15 && y[1] == 0.0);
    }

    #[test]
    fn round_trip() {
        let e = EtaProfile::new(2.5, 0.25).unwrap();
        let t = axis();
        for y in [[0.1, 0.01], [-0.5, -0.2], [1.0, 0.45], [0.0, 1e-7]] {
            let z = chi_inverse(&t, &e, &apply_chi(&t, &e, &y));
            assert!((z[0] - y[0]).abs() < 1e-9 && (z[1] - y[1]).abs() < 1e-9, "{y:?} {z:?}");
        }
    }

    #[test]
    fn jacobian_matches_differences() {
        let e = EtaProfile::new(2.5, 0.25).unwrap();
        let patch = SmoothMap::new(1, 2, |x| vec![x[0].cos(), x[0].sin()])
            .with_jacobian(|x| Some(DMatrix::from_row_slice(2, 1, &[-x[0].sin(), x[0].cos()])));
        let t = TubeChart::new(patch, vec![(0.0, 1.5)], 0.4).unwrap();
        let chi = chi_map(&t, &e);
        for y in [[0.93 * 0.8f64.cos(), 0.93 * 0.8f64.sin()], [1.15 * 0.3f64.cos(), 1.15 * 0.3f64.sin()]] {
            let j = chi.closed_jacobian(&y).unwrap();
            let fd = chi.fd_jacobian(&y, 1e-6);
            assert!((&j - &fd).amax() < 1e-7, "{j} {fd}");
        }
        // tangential projection on the stratum
        let j = chi.closed_jacobian(&[1.0, 0.0]).unwrap();
        assert!((j[(0, 0)]).abs() < 1e-9 && (j[(1, 1)] - 1.0).abs() < 1e-9);
    }
}
