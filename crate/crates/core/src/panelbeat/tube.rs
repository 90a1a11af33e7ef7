use nalgebra::{DMatrix, DVector};

use super::PanelBeatError;
use crate::algebra::SmoothMap;

const PROJECT_MAX_ITER: usize = 60;
const PROJECT_TOL: f64 = 1e-14;
/// Step for differentiating the normal frame along the stratum.
const FRAME_FD_STEP: f64 = 1e-6;

/// Tubular coordinates `y = g(x, u) = V(x) + Σ u_k n_k(x)` around a stratum
/// patch `V: R^d → R^m`, valid for `|u| < radius`.
#[derive(Clone, Debug)]
pub struct TubeChart {
    patch: SmoothMap,
    /// Parameter box of the patch, one `(lo, hi)` per stratum coordinate.
    domain: Vec<(f64, f64)>,
    radius: f64,
    /// Standard basis vectors Gram-Schmidt'ed into normals when the
    /// codimension exceeds one (chosen once, so the frame stays smooth).
    seeds: Vec<usize>,
    /// Start points for the closest-point search.
    starts: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Tube coordinates of a point.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeCoords {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl TubeCoords {
    pub fn rho(&self) -> f64 {
        self.u.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

impl TubeChart {
    /// Tube of the given radius around `patch` restricted to `domain`.
    /// The patch Jacobian must have full rank at sampled parameters.
    pub fn new(patch: SmoothMap, domain: Vec<(f64, f64)>, radius: f64) -> Result<Self, PanelBeatError> {
        let d = patch.domain_dim();
        let m = patch.codomain_dim();
        if domain.len() != d {
            return Err(PanelBeatError::Dimension(format!(
                "patch has {d} parameters but the domain box has {}",
                domain.len()
            )));
        }
        if d >= m {
            return Err(PanelBeatError::Dimension(format!(
                "stratum of dimension {d} has no normal directions in R^{m}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PanelBeatError::InvalidRadius(radius));
        }
        let mut tube = Self {
            patch,
            domain,
            radius,
            seeds: Vec::new(),
            starts: Vec::new(),
        };
        let params = tube.sample_params(if d == 0 { 1 } else { (256f64).powf(1.0 / d as f64).ceil() as usize });
        for x in &params {
            let t = tube.tangents(x)?;
            if d > 0 && t.clone().svd(false, false).singular_values.min() < 1e-10 {
                return Err(PanelBeatError::RankDeficient(x.clone()));
            }
        }
        if m - d > 1 && d > 0 {
            tube.seeds = choose_seeds(&tube.tangents(&tube.center())?, m - d);
        }
        tube.starts = params
            .into_iter()
            .map(|x| {
                let y = tube.patch.eval_unchecked(&x);
                (x, y)
            })
            .collect();
        Ok(tube)
    }

    /// Tube around a single point: `g(u) = x0 + u`.
    pub fn point(x0: Vec<f64>, radius: f64) -> Result<Self, PanelBeatError> {
        let m = x0.len();
        let patch = SmoothMap::new(0, m, move |_| x0.clone()).with_jacobian(move |_| Some(DMatrix::zeros(m, 0)));
        Self::new(patch, Vec::new(), radius)
    }

    /// Tube around the affine stratum `x ↦ origin + Σ x_j dirs_j`.
    pub fn affine(origin: Vec<f64>, dirs: Vec<Vec<f64>>, domain: Vec<(f64, f64)>, radius: f64) -> Result<Self, PanelBeatError> {
        let m = origin.len();
        let a = DMatrix::from_fn(m, dirs.len(), |r, c| dirs[c][r]);
        Self::new(SmoothMap::affine(a, DVector::from_vec(origin)), domain, radius)
    }

    pub fn stratum_dim(&self) -> usize {
        self.patch.domain_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.patch.codomain_dim()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn patch(&self) -> &SmoothMap {
        &self.patch
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    fn center(&self) -> Vec<f64> {
        self.domain.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Regular grid of `k` points per axis over the parameter box
    /// (a single point when the stratum is a point).
    pub fn sample_params(&self, k: usize) -> Vec<Vec<f64>> {
        let d = self.stratum_dim();
        if d == 0 {
            return vec![Vec::new()];
        }
        let k = k.max(1);
        let total = k.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                self.domain
                    .iter()
                    .map(|&(lo, hi)| {
                        let i = idx % k;
                        idx /= k;
                        if k == 1 {
                            0.5 * (lo + hi)
                        } else {
                            lo + (hi - lo) * i as f64 / (k - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Tangent vectors of the stratum (columns), `m × d`.
    pub fn tangents(&self, x: &[f64]) -> Result<DMatrix<f64>, PanelBeatError> {
        Ok(self.patch.jacobian(x)?.matrix)
    }

    /// Orthonormal normal frame `n_1(x) … n_{m-d}(x)` as the columns of an
    /// `m × (m-d)` matrix.
    pub fn frame(&self, x: &[f64]) -> Result<DMatrix<f64>, PanelBeatError> {
        let m = self.ambient_dim();
        let d = self.stratum_dim();
        if d == 0 {
            return Ok(DMatrix::identity(m, m));
        }
        let t = self.tangents(x)?;
        if m - d == 1 {
            // generalized cross product: n · v = det[t | v]
            let mut n = DVector::zeros(m);
            for i in 0..m {
                let mut a = DMatrix::zeros(m, m);
                a.view_mut((0, 0), (m, d)).copy_from(&t);
                a[(i, d)] = 1.0;
                n[i] = a.determinant();
            }
            let len = n.norm();
            if !(len > 1e-300) {
                return Err(PanelBeatError::RankDeficient(x.to_vec()));
            }
            return Ok(DMatrix::from_column_slice(m, 1, (n / len).as_slice()));
        }
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
        for c in 0..d {
            push_orthonormal(&mut basis, t.column(c).into_owned()).ok_or_else(|| PanelBeatError::RankDeficient(x.to_vec()))?;
        }
        let mut normals = Vec::with_capacity(m - d);
        for &s in &self.seeds {
            let e = DVector::from_fn(m, |r, _| f64::from(u8::from(r == s)));
            let n = push_orthonormal(&mut basis, e).ok_or_else(|| PanelBeatError::RankDeficient(x.to_vec()))?;
            normals.push(n);
        }
        Ok(DMatrix::from_columns(&normals))
    }

    /// `g(x, u)`.
    pub fn g(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, PanelBeatError> {
        let mut y = DVector::from_vec(self.patch.eval(x)?);
        let n = self.frame(x)?;
        y += n * DVector::from_column_slice(u);
        Ok(y.as_slice().to_vec())
    }

    /// Jacobian of `g` with respect to `(x, u)`, an `m × m` matrix.
    pub fn g_jacobian(&self, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>, PanelBeatError> {
        let m = self.ambient_dim();
        let d = self.stratum_dim();
        let mut j = DMatrix::zeros(m, m);
        let t = self.tangents(x)?;
        let uv = DVector::from_column_slice(u);
        for c in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[c] += FRAME_FD_STEP;
            xm[c] -= FRAME_FD_STEP;
            let dn = (self.frame(&xp)? - self.frame(&xm)?) / (2.0 * FRAME_FD_STEP);
            let col = t.column(c) + dn * &uv;
            j.set_column(c, &col);
        }
        j.view_mut((0, d), (m, m - d)).copy_from(&self.frame(x)?);
        Ok(j)
    }

    /// Closest-point coordinates `(π(y), u)`, or `None` when `y` is not in
    /// the tube (no convergence, foot outside the parameter box, or
    /// `|u| ≥ radius`).
    pub fn coords(&self, y: &[f64]) -> Option<TubeCoords> {
        let d = self.stratum_dim();
        let yv = DVector::from_column_slice(y);
        let x = if d == 0 {
            Vec::new()
        } else {
            let (x0, _) = self.starts.iter().min_by(|a, b| {
                let da: f64 = a.1.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                let db: f64 = b.1.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                da.total_cmp(&db)
            })?;
            self.closest_point(x0.clone(), &yv)?
        };
        let foot = DVector::from_vec(self.patch.eval(&x).ok()?);
        let n = self.frame(&x).ok()?;
        let w = &yv - &foot;
        let u = n.transpose() * &w;
        let rho = u.norm();
        if !(rho < self.radius) {
            return None;
        }
        // the offset must be normal to the stratum
        if (w.norm() - rho).abs() > 1e-8 * (1.0 + w.norm()) {
            return None;
        }
        Some(TubeCoords {
            x,
            u: u.as_slice().to_vec(),
        })
    }

    fn closest_point(&self, mut x: Vec<f64>, y: &DVector<f64>) -> Option<Vec<f64>> {
        for _ in 0..PROJECT_MAX_ITER {
            let p = DVector::from_vec(self.patch.eval(&x).ok()?);
            let t = self.tangents(&x).ok()?;
            let r = y - p;
            let step = (t.transpose() * &t).lu().solve(&(t.transpose() * r))?;
            for (xi, s) in x.iter_mut().zip(step.iter()) {
                *xi += s;
            }
            if !x.iter().all(|v| v.is_finite()) {
                return None;
            }
            if step.norm() <= PROJECT_TOL * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                break;
            }
        }
        let slack = 1e-12;
        self.domain
            .iter()
            .zip(&x)
            .all(|(&(lo, hi), &v)| v >= lo - slack && v <= hi + slack)
            .then_some(x)
    }

    /// `π(y)`: the stratum parameter of the foot point.
    pub fn pi(&self, y: &[f64]) -> Option<Vec<f64>> {
        self.coords(y).map(|c| c.x)
    }

    /// `ρ(y) = |u|`.
    pub fn rho(&self, y: &[f64]) -> Option<f64> {
        self.coords(y).map(|c| c.rho())
    }
}

fn push_orthonormal(basis: &mut Vec<DVector<f64>>, mut v: DVector<f64>) -> Option<DVector<f64>> {
    for _ in 0..2 {
        for b in basis.iter() {
            let c = b.dot(&v);
            v -= b * c;
        }
    }
    let len = v.norm();
    if !(len > 1e-8) {
        return None;
    }
    v /= len;
    basis.push(v.clone());
    Some(v)
}

/// Standard basis directions that best complement the tangent space.
fn choose_seeds(t: &DMatrix<f64>, count: usize) -> Vec<usize> {
    let m = t.nrows();
    let mut basis = Vec::new();
    for c in 0..t.ncols() {
        push_orthonormal(&mut basis, t.column(c).into_owned());
    }
    let mut seeds = Vec::new();
    for _ in 0..count {
        let best = (0..m)
            .filter(|i| !seeds.contains(i))
            .map(|i| {
                let mut v = DVector::from_fn(m, |r, _| f64::from(u8::from(r == i)));
                for b in &basis {
                    let c = b.dot(&v);
                    v -= b * c;
                }
                (i, v.norm())
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("enough directions");
        let mut v = DVector::from_fn(m, |r, _| f64::from(u8::from(r == best.0)));
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        basis.push(v / best.1);
        seeds.push(best.0);
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_axis_tube() {
        let t = TubeChart::affine(vec![0.0, 0.0], vec![vec![1.0, 0.0]], vec![(-2.0, 2.0)], 1.0).unwrap();
        let c = t.coords(&[0.3, -0.4]).unwrap();
        assert!((c.x[0] - 0.3).abs() < 1e-14);
        assert!((c.rho() - 0.4).abs() < 1e-14);
        let y = t.g(&c.x, &c.u).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-14 && (y[1] + 0.4).abs() < 1e-14);
        assert!(t.coords(&[0.0, 1.5]).is_none());
    }

    #[test]
    fn circle_arc_tube() {
        let patch = SmoothMap::new(1, 2, |x| vec![x[0].cos(), x[0].sin()])
            .with_jacobian(|x| Some(DMatrix::from_row_slice(2, 1, &[-x[0].sin(), x[0].cos()])));
        let t = TubeChart::new(patch, vec![(0.0, 1.5)], 0.3).unwrap();
        for &(th, s) in &[(0.2, 0.1), (1.0, -0.25), (0.7, 0.0)] {
            let y = [(1.0 + s) * f64::cos(th), (1.0 + s) * f64::sin(th)];
            let c = t.coords(&y).unwrap();
            assert!((c.rho() - f64::abs(s)).abs() < 1e-8);
            assert!((c.x[0] - th).abs() < 1e-8);
        }
    }

    #[test]
    fn point_tube() {
        let t = TubeChart::point(vec![1.0, 2.0, 3.0], 0.5).unwrap();
        let c = t.coords(&[1.1, 2.0, 2.8]).unwrap();
        assert_eq!(c.u.len(), 3);
        assert!((c.rho() - (0.05f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn frames_are_orthonormal() {
        // a curve in R^3 needs two normals
        let patch = SmoothMap::new(1, 3, |x| vec![x[0], x[0] * x[0], 0.5 * x[0]]);
        let t = TubeChart::new(patch, vec![(-1.0, 1.0)], 0.1).unwrap();
        for x in [-0.8, 0.0, 0.6] {
            let n = t.frame(&[x]).unwrap();
            let g = n.transpose() * &n;
            assert!((g - DMatrix::identity(2, 2)).amax() < 1e-10);
            let tan = t.tangents(&[x]).unwrap();
            assert!((n.transpose() * tan).amax() < 1e-8);
        }
        let y = t.g(&[0.3], &[0.02, -0.03]).unwrap();
        let c = t.coords(&y).unwrap();
        assert!((c.x[0] - 0.3).abs() < 1e-8);
        assert!((c.u[0] - 0.02).abs() < 1e-8 && (c.u[1] + 0.03).abs() < 1e-8);
    }
}
