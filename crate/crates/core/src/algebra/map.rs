use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::poly::Polynomial;
use super::AlgebraError;

type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JacobianFn = dyn Fn(&[f64]) -> Option<DMatrix<f64>> + Send + Sync;
type DomainFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Base step for the central-difference Jacobian fallback, before scaling.
pub const FD_STEP: f64 = 1e-6;

/// Where a Jacobian value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianSource {
    ClosedForm,
    FiniteDifference,
}

#[derive(Clone, Debug)]
pub struct Jacobian {
    /// codomain_dim x domain_dim
    pub matrix: DMatrix<f64>,
    pub source: JacobianSource,
}

/// A differentiable map between Euclidean spaces.
///
/// The evaluator is mandatory. A closed-form Jacobian may be supplied; where
/// it returns `None` (or is absent) the Jacobian falls back to central
/// differences with step `FD_STEP * fd_scale`, and the result is flagged.
#[derive(Clone)]
pub struct SmoothMap {
    domain_dim: usize,
    codomain_dim: usize,
    eval: Arc<EvalFn>,
    jacobian: Option<Arc<JacobianFn>>,
    domain: Option<Arc<DomainFn>>,
    fd_scale: f64,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("domain_dim", &self.domain_dim)
            .field("codomain_dim", &self.codomain_dim)
            .field("closed_jacobian", &self.jacobian.is_some())
            .field("restricted_domain", &self.domain.is_some())
            .finish()
    }
}

impl SmoothMap {
    pub fn new<F>(domain_dim: usize, codomain_dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            domain_dim,
            codomain_dim,
            eval: Arc::new(f),
            jacobian: None,
            domain: None,
            fd_scale: 1.0,
        }
    }

    /// Attaches a closed-form Jacobian; returning `None` at a point defers to finite differences.
    pub fn with_jacobian<J>(mut self, j: J) -> Self
    where
        J: Fn(&[f64]) -> Option<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(j));
        self
    }

    /// Restricts the map to the points accepted by `pred`.
    pub fn with_domain<D>(mut self, pred: D) -> Self
    where
        D: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.domain = Some(Arc::new(pred));
        self
    }

    pub fn with_fd_scale(mut self, scale: f64) -> Self {
        self.fd_scale = scale;
        self
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, n, |x| x.to_vec()).with_jacobian(move |_| Some(DMatrix::identity(n, n)))
    }

    /// `x -> a x + b`.
    pub fn affine(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        let (m, n) = (a.nrows(), a.ncols());
        let a2 = a.clone();
        Self::new(n, m, move |x| {
            let v = &a * DVector::from_column_slice(x) + &b;
            v.iter().copied().collect()
        })
        .with_jacobian(move |_| Some(a2.clone()))
    }

    /// Polynomial map with exact partial derivatives as its Jacobian.
    pub fn polynomial(components: Vec<Polynomial>) -> Result<Self, AlgebraError> {
        let n = components.first().map(|p| p.num_vars()).unwrap_or(0);
        if let Some(bad) = components.iter().find(|p| p.num_vars() != n) {
            return Err(AlgebraError::DimensionMismatch {
                expected: n,
                found: bad.num_vars(),
            });
        }
        let m = components.len();
        let partials: Vec<Vec<Polynomial>> = components.iter().map(|p| p.gradient()).collect();
        let comps = Arc::new(components);
        let c2 = comps.clone();
        Ok(Self::new(n, m, move |x| {
            c2.iter().map(|p| p.eval_unchecked(x)).collect()
        })
        .with_jacobian(move |x| {
            Some(DMatrix::from_fn(m, n, |i, j| partials[i][j].eval_unchecked(x)))
        }))
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn has_closed_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn fd_scale(&self) -> f64 {
        self.fd_scale
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.domain.as_ref().map(|d| d(x)).unwrap_or(true)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, AlgebraError> {
        if x.len() != self.domain_dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.domain_dim,
                found: x.len(),
            });
        }
        Ok((self.eval)(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    /// Closed-form Jacobian at `x`, if one is available and finite there.
    pub fn closed_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let j = self.jacobian.as_ref()?(x)?;
        j.iter().all(|v| v.is_finite()).then_some(j)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Jacobian, AlgebraError> {
        self.jacobian_with_step(x, FD_STEP * self.fd_scale)
    }

    /// Jacobian with an explicit finite-difference step for the fallback path.
    pub fn jacobian_with_step(&self, x: &[f64], step: f64) -> Result<Jacobian, AlgebraError> {
        if x.len() != self.domain_dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.domain_dim,
                found: x.len(),
            });
        }
        if let Some(j) = self.closed_jacobian(x) {
            return Ok(Jacobian {
                matrix: j,
                source: JacobianSource::ClosedForm,
            });
        }
        let matrix = self.fd_jacobian(x, step);
        if matrix.iter().all(|v| v.is_finite()) {
            Ok(Jacobian {
                matrix,
                source: JacobianSource::FiniteDifference,
            })
        } else {
            Err(AlgebraError::JacobianUnavailable { point: x.to_vec() })
        }
    }

    /// Central differences, switching to one-sided differences where a
    /// central stencil would leave the domain.
    pub fn fd_jacobian(&self, x: &[f64], step: f64) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.codomain_dim, self.domain_dim);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        let f0 = if self.domain.is_some() {
            Some(self.eval_unchecked(x))
        } else {
            None
        };
        for k in 0..self.domain_dim {
            xp[k] = x[k] + step;
            xm[k] = x[k] - step;
            let plus_ok = self.in_domain(&xp);
            let minus_ok = self.in_domain(&xm);
            let col: Vec<f64> = match (plus_ok, minus_ok) {
                (true, true) => {
                    let a = self.eval_unchecked(&xp);
                    let b = self.eval_unchecked(&xm);
                    a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * step)).collect()
                }
                (true, false) => {
                    let a = self.eval_unchecked(&xp);
                    let b = f0.clone().unwrap_or_else(|| self.eval_unchecked(x));
                    a.iter().zip(&b).map(|(a, b)| (a - b) / step).collect()
                }
                (false, true) => {
                    let b = self.eval_unchecked(&xm);
                    let a = f0.clone().unwrap_or_else(|| self.eval_unchecked(x));
                    a.iter().zip(&b).map(|(a, b)| (a - b) / step).collect()
                }
                (false, false) => vec![f64::NAN; self.codomain_dim],
            };
            for (i, v) in col.into_iter().enumerate() {
                j[(i, k)] = v;
            }
            xp[k] = x[k];
            xm[k] = x[k];
        }
        j
    }

    /// `outer ∘ inner`, differentiated by the chain rule.
    pub fn compose(outer: &SmoothMap, inner: &SmoothMap) -> Result<SmoothMap, AlgebraError> {
        if inner.codomain_dim != outer.domain_dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: outer.domain_dim,
                found: inner.codomain_dim,
            });
        }
        let (o1, i1) = (outer.clone(), inner.clone());
        let (o2, i2) = (outer.clone(), inner.clone());
        let (o3, i3) = (outer.clone(), inner.clone());
        let both_closed = outer.jacobian.is_some() && inner.jacobian.is_some();
        let mut map = SmoothMap::new(inner.domain_dim, outer.codomain_dim, move |x| {
            o1.eval_unchecked(&i1.eval_unchecked(x))
        })
        .with_fd_scale(inner.fd_scale);
        if both_closed {
            map = map.with_jacobian(move |x| {
                let ji = i2.closed_jacobian(x)?;
                let y = i2.eval_unchecked(x);
                let jo = o2.closed_jacobian(&y)?;
                Some(jo * ji)
            });
        }
        if inner.domain.is_some() || outer.domain.is_some() {
            map = map.with_domain(move |x| {
                i3.in_domain(x) && o3.in_domain(&i3.eval_unchecked(x))
            });
        }
        Ok(map)
    }

    /// Largest discrepancy between the Jacobian and central differences of
    /// the evaluator over the given sample points.
    pub fn jacobian_consistency(&self, samples: &[Vec<f64>], step: f64) -> Result<f64, AlgebraError> {
        let mut worst: f64 = 0.0;
        for x in samples {
            let j = self.jacobian(x)?.matrix;
            let fd = self.fd_jacobian(x, step);
            worst = worst.max((j - fd).amax());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_map_jacobian_matches_fd() {
        let f = SmoothMap::polynomial(vec![
            Polynomial::parse("x^2 y + 1", 2).unwrap(),
            Polynomial::parse("x - y^3", 2).unwrap(),
        ])
        .unwrap();
        let samples = vec![vec![0.3, -0.7], vec![1.1, 0.4], vec![-0.5, 0.5]];
        assert!(f.jacobian_consistency(&samples, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn fallback_is_flagged_and_one_sided_at_domain_edge() {
        let f = SmoothMap::new(1, 1, |x| vec![x[0] * x[0]]).with_domain(|x| x[0] >= 0.0);
        let j = f.jacobian(&[0.0]).unwrap();
        assert_eq!(j.source, JacobianSource::FiniteDifference);
        assert!(j.matrix[(0, 0)].abs() < 1e-5);
    }

    #[test]
    fn unavailable_jacobian_is_an_error() {
        let f = SmoothMap::new(1, 1, |x| vec![x[0].sqrt()]);
        assert!(matches!(
            f.jacobian(&[0.0]),
            Err(AlgebraError::JacobianUnavailable { .. })
        ));
    }

    #[test]
    fn compose_chain_rule() {
        let g = SmoothMap::polynomial(vec![Polynomial::parse("x1 x2", 2).unwrap()]).unwrap();
        let h = SmoothMap::polynomial(vec![
            Polynomial::parse("x1 + 1", 1).unwrap(),
            Polynomial::parse("x1^2", 1).unwrap(),
        ])
        .unwrap();
        let gh = SmoothMap::compose(&g, &h).unwrap();
        // (t+1) t^2, derivative 3t^2 + 2t
        let j = gh.jacobian(&[2.0]).unwrap();
        assert_eq!(j.source, JacobianSource::ClosedForm);
        assert!((j.matrix[(0, 0)] - 16.0).abs() < 1e-12);
        assert!(SmoothMap::compose(&g, &g).is_err());
    }
}
