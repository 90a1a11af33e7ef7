use crate::algebra::Polynomial;

/// Tolerance on |p(x)| for a converged projection.
pub const SNAP_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
pub const CORNER_MAX_ITER: usize = 200;

/// A boundary polynomial with its gradient precomputed.
#[derive(Clone, Debug)]
pub struct BoundaryFn {
    pub poly: Polynomial,
    grad: Vec<Polynomial>,
}

impl BoundaryFn {
    pub fn new(poly: Polynomial) -> Self {
        let grad = poly.gradient();
        Self { poly, grad }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.poly.eval_unchecked(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|g| g.eval_unchecked(x)).collect()
    }

    /// First-order distance estimate `|p| / |∇p|`.
    pub fn distance_estimate(&self, x: &[f64]) -> f64 {
        let g = self.gradient(x);
        let n = norm(&g);
        if n == 0.0 {
            f64::INFINITY
        } else {
            self.value(x).abs() / n
        }
    }

    /// Damped Newton along the gradient onto `p = 0`, each step capped at
    /// `max_step`. Returns the point and the iteration count.
    pub fn project(&self, x0: &[f64], max_step: f64) -> Option<(Vec<f64>, usize)> {
        let mut x = x0.to_vec();
        for it in 0..=NEWTON_MAX_ITER {
            let v = self.value(&x);
            if v.abs() <= SNAP_TOL {
                return Some((x, it));
            }
            if it == NEWTON_MAX_ITER {
                break;
            }
            let g = self.gradient(&x);
            let g2: f64 = g.iter().map(|a| a * a).sum();
            if !(g2 > 1e-300) {
                return None;
            }
            let mut scale = v / g2;
            let len = scale.abs() * g2.sqrt();
            if len > max_step {
                scale *= max_step / len;
            }
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= scale * gi;
            }
            if !x.iter().all(|v| v.is_finite()) {
                return None;
            }
        }
        None
    }
}

/// Alternating projection onto the common zero set of several boundary
/// polynomials.
pub fn project_corner(fs: &[&BoundaryFn], x0: &[f64], max_step: f64) -> Option<(Vec<f64>, usize)> {
    let mut x = x0.to_vec();
    let mut iters = 0;
    for _ in 0..CORNER_MAX_ITER {
        if fs.iter().all(|f| f.value(&x).abs() <= SNAP_TOL) {
            return Some((x, iters));
        }
        for f in fs {
            let (y, k) = f.project(&x, max_step)?;
            x = y;
            iters += k;
        }
        iters += 1;
    }
    fs.iter()
        .all(|f| f.value(&x).abs() <= SNAP_TOL)
        .then_some((x, iters))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projects_onto_circle() {
        let f = BoundaryFn::new(Polynomial::parse("x^2 + y^2 - 1", 2).unwrap());
        let (x, _) = f.project(&[1.2, 0.1], 0.5).unwrap();
        assert!(f.value(&x).abs() <= SNAP_TOL);
        assert!((norm(&x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corner_of_square() {
        let a = BoundaryFn::new(Polynomial::parse("1 - x", 2).unwrap());
        let b = BoundaryFn::new(Polynomial::parse("1 - y", 2).unwrap());
        let (x, _) = project_corner(&[&a, &b], &[1.1, 1.05], 1.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn critical_point_fails() {
        let f = BoundaryFn::new(Polynomial::parse("x^2 + y^2 + 1", 2).unwrap());
        assert!(f.project(&[0.0, 0.0], 1.0).is_none());
    }
}
