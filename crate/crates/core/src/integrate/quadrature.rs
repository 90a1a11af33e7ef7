use serde::Serialize;

use super::IntegrateError;

/// Quadrature on the standard p-simplex, with nodes in barycentric
/// coordinates and weights summing to its volume `1/p!`.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureRule {
    pub dim: usize,
    /// Each node has `dim + 1` barycentric weights.
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Highest total degree integrated exactly.
    pub degree: u32,
}

// Symmetric triangle rules: (orbit generator, weight relative to area 1).
const TRI_DEG4_A: (f64, f64) = (0.445948490915965, 0.223381589678011);
const TRI_DEG4_B: (f64, f64) = (0.091576213509771, 0.109951743655322);
const TRI_DEG5_A: (f64, f64) = (0.101286507323456, 0.125939180544827);
const TRI_DEG5_B: (f64, f64) = (0.470142064105115, 0.132394152788506);
const TET_DEG2: f64 = 0.1381966011250105;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl QuadratureRule {
    /// A rule on the p-simplex exact to at least the requested degree.
    /// Every rule is checked against exact monomial integrals before it is
    /// returned.
    pub fn new(dim: usize, degree: u32) -> Result<Self, IntegrateError> {
        let rule = match (dim, degree) {
            (0, _) => Self::from_parts(0, vec![vec![1.0]], vec![1.0], degree),
            (_, 0 | 1) => Self::centroid(dim),
            (1, d) => Self::gauss_legendre(d.div_ceil(2) as usize + usize::from(d % 2 == 0)),
            (2, 2) => {
                let a = 1.0 / 6.0;
                let b = 2.0 / 3.0;
                Self::from_parts(
                    2,
                    vec![vec![b, a, a], vec![a, b, a], vec![a, a, b]],
                    vec![1.0 / 6.0; 3],
                    2,
                )
            }
            (2, 4) => Self::triangle_orbits(&[TRI_DEG4_A, TRI_DEG4_B], None, 4),
            (2, 5) => Self::triangle_orbits(&[TRI_DEG5_A, TRI_DEG5_B], Some(0.225), 5),
            (3, 2) => {
                let a = TET_DEG2;
                let b = 1.0 - 3.0 * a;
                let nodes = (0..4)
                    .map(|k| {
                        let mut w = vec![a; 4];
                        w[k] = b;
                        w
                    })
                    .collect();
                Self::from_parts(3, nodes, vec![1.0 / 24.0; 4], 2)
            }
            (p, d) => Self::grundmann_moller(p, ((d as usize).saturating_sub(1)).div_ceil(2)),
        };
        rule.verify()?;
        Ok(rule)
    }

    fn from_parts(dim: usize, nodes: Vec<Vec<f64>>, weights: Vec<f64>, degree: u32) -> Self {
        Self {
            dim,
            nodes,
            weights,
            degree,
        }
    }

    fn centroid(p: usize) -> Self {
        Self::from_parts(p, vec![vec![1.0 / (p + 1) as f64; p + 1]], vec![1.0 / factorial(p)], 1)
    }

    /// n-point Gauss-Legendre on [0, 1], exact to degree 2n - 1.
    fn gauss_legendre(n: usize) -> Self {
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                if n == 1 {
                    p0 = 1.0;
                    p1 = x;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            let t = 0.5 * (1.0 - x);
            nodes.push(vec![1.0 - t, t]);
            weights.push(0.5 * w);
        }
        Self::from_parts(1, nodes, weights, (2 * n - 1) as u32)
    }

    fn triangle_orbits(orbits: &[(f64, f64)], center: Option<f64>, degree: u32) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if let Some(w) = center {
            nodes.push(vec![1.0 / 3.0; 3]);
            weights.push(0.5 * w);
        }
        for &(a, w) in orbits {
            let b = 1.0 - 2.0 * a;
            for k in 0..3 {
                let mut node = vec![a; 3];
                node[k] = b;
                nodes.push(node);
                weights.push(0.5 * w);
            }
        }
        Self::from_parts(2, nodes, weights, degree)
    }

    /// Grundmann-Moller rule of index s on the p-simplex, exact to degree 2s + 1.
    fn grundmann_moller(p: usize, s: usize) -> Self {
        let d = 2 * s + 1;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for i in 0..=s {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let denom = (d + p - 2 * i) as f64;
            let w = sign * 2f64.powi(-(2 * s as i32)) * denom.powi(d as i32)
                / (factorial(i) * factorial(d + p - i));
            for beta in compositions(s - i, p + 1) {
                nodes.push(beta.iter().map(|&b| (2 * b + 1) as f64 / denom).collect());
                weights.push(w);
            }
        }
        Self::from_parts(p, nodes, weights, d as u32)
    }

    /// Checks exactness on every monomial `λ_1^a_1 ⋯ λ_p^a_p` up to the declared degree.
    pub fn verify(&self) -> Result<(), IntegrateError> {
        let p = self.dim;
        let scale: f64 = self.weights.iter().map(|w| w.abs()).sum::<f64>().max(1.0);
        for total in 0..=self.degree as usize {
            for a in compositions(total, p.max(1)) {
                let a = if p == 0 { vec![] } else { a };
                if p == 0 && total > 0 {
                    continue;
                }
                let exact = a.iter().map(|&k| factorial(k)).product::<f64>() / factorial(p + total);
                let approx: f64 = self
                    .nodes
                    .iter()
                    .zip(&self.weights)
                    .map(|(x, w)| w * a.iter().enumerate().map(|(i, &k)| x[i + 1].powi(k as i32)).product::<f64>())
                    .sum();
                if (approx - exact).abs() > 1e-12 * scale {
                    return Err(IntegrateError::RuleNotExact {
                        dim: p,
                        degree: self.degree,
                        exponents: a,
                        error: (approx - exact).abs(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// All ways to write `total` as an ordered sum of `parts` nonnegative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_exist_and_are_exact() {
        for dim in 0..=3 {
            for degree in 0..=8 {
                let r = QuadratureRule::new(dim, degree).unwrap();
                assert!(r.degree >= degree || dim == 0, "dim {dim} degree {degree}");
                let vol: f64 = r.weights.iter().sum();
                assert!((vol - 1.0 / factorial(dim)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn default_triangle_rule_has_six_points() {
        let r = QuadratureRule::new(2, 4).unwrap();
        assert_eq!(r.nodes.len(), 6);
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn gauss_legendre_matches_known_nodes() {
        let r = QuadratureRule::new(1, 3).unwrap();
        assert_eq!(r.nodes.len(), 2);
        let t = 0.5 - 0.5 / 3f64.sqrt();
        assert!(r.nodes.iter().any(|n| (n[1] - t).abs() < 1e-15));
    }
}
