//! Quadrature of pulled-back forms over realized simplices, chain
//! integrals, Stokes residuals and comparisons between triangulations.

mod quadrature;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use quadrature::QuadratureRule;

use crate::algebra::{pullback_with_jacobian, AlgebraError, DifferentialForm, SmoothMap};
use crate::mesh::{boundary_chain, orient_fundamental, Chain, MeshError};
use crate::triangulate::{common_refinement, RealizationChart, TriangulateError, TriangulationBundle};

/// Exactness degree used when none is requested.
pub const DEFAULT_DEGREE: u32 = 4;
/// How far quadrature nodes are moved toward the centroid when the chart has
/// no closed-form Jacobian there.
pub const INWARD_PULL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Triangulate(#[from] TriangulateError),
    #[error("a {form}-form cannot be integrated over a {simplex}-simplex")]
    DegreeMismatch { form: usize, simplex: usize },
    #[error("form lives in R^{form} but the mesh is realized in R^{mesh}")]
    AmbientMismatch { form: usize, mesh: usize },
    #[error("chart Jacobian unavailable on {dim}-simplex {simplex}")]
    JacobianUnavailable { dim: usize, simplex: usize },
    #[error("quadrature rule (dim {dim}, degree {degree}) fails on monomial {exponents:?} by {error:e}")]
    RuleNotExact {
        dim: usize,
        degree: u32,
        exponents: Vec<usize>,
        error: f64,
    },
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = Neumaier::default();
    xs.into_iter().for_each(|x| acc.add(x));
    acc.sum()
}

/// Result of integrating a form over a chain.
#[derive(Clone, Debug, Serialize)]
pub struct IntegralReport {
    pub value: f64,
    /// `(simplex id, signed contribution)` in ascending id order.
    pub contributions: Vec<(usize, f64)>,
    pub degree: u32,
    /// Difference from the same integral with the next exactness degree.
    pub error_estimate: f64,
    /// Simplices on which some node needed a finite-difference Jacobian.
    pub finite_difference_simplices: usize,
}

/// Both sides of Stokes' formula on a chain.
#[derive(Clone, Debug, Serialize)]
pub struct StokesReport {
    /// `∫_μ dω`
    pub interior: IntegralReport,
    /// `∫_{∂μ} ω`
    pub boundary: IntegralReport,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub first: IntegralReport,
    pub second: IntegralReport,
    pub delta: f64,
    /// Integral over the common refinement, when requested and available.
    pub refined: Option<IntegralReport>,
    /// Largest pairwise difference among the available values.
    pub spread: f64,
}

/// Integral of `form` through `map` over the standard simplex; returns the
/// value and whether a finite-difference Jacobian was used.
fn integrate_map(
    form: &DifferentialForm,
    map: &SmoothMap,
    rule: &QuadratureRule,
) -> Result<(f64, bool), AlgebraError> {
    let p = rule.dim;
    if p == 0 {
        let y = map.eval(&[])?;
        let v = form.terms().next().map(|(_, c)| c.eval_unchecked(&y)).unwrap_or(0.0);
        return Ok((v, false));
    }
    let mut acc = Neumaier::default();
    let mut used_fd = false;
    let centroid = 1.0 / (p + 1) as f64;
    for (node, w) in rule.nodes.iter().zip(&rule.weights) {
        let mut x: Vec<f64> = node[1..].to_vec();
        let jac = match map.closed_jacobian(&x) {
            Some(j) => j,
            None => {
                for xi in x.iter_mut() {
                    *xi += INWARD_PULL * (centroid - *xi);
                }
                let j = map.jacobian(&x)?;
                used_fd |= j.source == crate::algebra::JacobianSource::FiniteDifference;
                j.matrix
            }
        };
        let y = map.eval(&x)?;
        let c = pullback_with_jacobian(form, &y, &jac);
        acc.add(w * c.top());
    }
    let v = acc.sum();
    if !v.is_finite() {
        return Err(AlgebraError::NonFinite);
    }
    Ok((v, used_fd))
}

/// `∫_σ c^*ω` for one realized top simplex, oriented by ascending vertex order.
pub fn integrate_simplex(
    form: &DifferentialForm,
    chart: &RealizationChart,
    rule: &QuadratureRule,
) -> Result<f64, IntegrateError> {
    if form.degree() != chart.dim() || rule.dim != chart.dim() {
        return Err(IntegrateError::DegreeMismatch {
            form: form.degree(),
            simplex: chart.dim(),
        });
    }
    integrate_map(form, &chart.map, rule)
        .map(|r| r.0)
        .map_err(|e| match e {
            AlgebraError::JacobianUnavailable { .. } | AlgebraError::NonFinite => {
                IntegrateError::JacobianUnavailable {
                    dim: chart.dim(),
                    simplex: chart.simplex,
                }
            }
            e => e.into(),
        })
}

/// The realization of a k-simplex of the bundle: for a top simplex its
/// chart, for a lower face the chart of its lowest-id top coface restricted
/// to the face.
pub fn simplex_map(b: &TriangulationBundle, k: usize, id: usize) -> Result<SmoothMap, IntegrateError> {
    let cx = &b.complex;
    let p = cx.dim();
    let (mut d, mut top) = (k, id);
    while d < p {
        top = *cx
            .cofaces(d, top)
            .iter()
            .min()
            .ok_or(MeshError::UnknownSimplex { dim: d, id: top })?;
        d += 1;
    }
    let chart = chart_for(b, top)?;
    if k == p {
        return Ok(chart.map.clone());
    }
    let s = cx.simplex(p, top);
    let face = cx.simplex(k, id);
    let pos: Vec<usize> = face
        .iter()
        .map(|v| s.iter().position(|u| u == v).expect("face of coface"))
        .collect();
    // face barycentric μ ↦ coface local coordinates (weights of vertices 1..p)
    let unit = |i: usize| DVector::from_fn(p, |r, _| f64::from(u8::from(r + 1 == i)));
    let base = unit(pos[0]);
    let a = DMatrix::from_fn(p, k, |r, c| unit(pos[c + 1])[r] - base[r]);
    let embed = SmoothMap::affine(a, base);
    Ok(SmoothMap::compose(&chart.map, &embed)?)
}

fn chart_for(b: &TriangulationBundle, top: usize) -> Result<&RealizationChart, IntegrateError> {
    b.charts
        .get(top)
        .filter(|c| c.simplex == top)
        .or_else(|| b.charts.iter().find(|c| c.simplex == top))
        .ok_or_else(|| MeshError::UnknownSimplex { dim: b.dim(), id: top }.into())
}

fn chain_integral(
    form: &DifferentialForm,
    b: &TriangulationBundle,
    chain: &Chain,
    degree: u32,
) -> Result<(f64, Vec<(usize, f64)>, usize), IntegrateError> {
    let k = chain.dim;
    if form.degree() != k {
        return Err(IntegrateError::DegreeMismatch {
            form: form.degree(),
            simplex: k,
        });
    }
    if form.ambient() != b.complex.ambient_dim() {
        return Err(IntegrateError::AmbientMismatch {
            form: form.ambient(),
            mesh: b.complex.ambient_dim(),
        });
    }
    let rule = QuadratureRule::new(k, degree)?;
    let items: Vec<(usize, i64)> = chain.iter().collect();
    let results: Vec<Result<(usize, f64, bool), IntegrateError>> = items
        .par_iter()
        .map(|&(id, coeff)| {
            let map = simplex_map(b, k, id)?;
            let (v, fd) = integrate_map(form, &map, &rule).map_err(|e| match e {
                AlgebraError::JacobianUnavailable { .. } | AlgebraError::NonFinite => {
                    IntegrateError::JacobianUnavailable { dim: k, simplex: id }
                }
                e => e.into(),
            })?;
            Ok((id, coeff as f64 * v, fd))
        })
        .collect();
    let mut contributions = Vec::with_capacity(results.len());
    let mut fd = 0;
    for r in results {
        let (id, v, used) = r?;
        contributions.push((id, v));
        fd += usize::from(used);
    }
    let value = neumaier_sum(contributions.iter().map(|c| c.1));
    Ok((value, contributions, fd))
}

/// `Σ_σ μ(σ) ∫_σ ω` over the chain, with an error estimate from the next
/// exactness degree.
pub fn integrate_chain(
    form: &DifferentialForm,
    b: &TriangulationBundle,
    chain: &Chain,
    degree: u32,
) -> Result<IntegralReport, IntegrateError> {
    let (value, contributions, fd) = chain_integral(form, b, chain, degree)?;
    let (finer, _, _) = chain_integral(form, b, chain, degree + 1)?;
    Ok(IntegralReport {
        value,
        contributions,
        degree,
        error_estimate: (finer - value).abs(),
        finite_difference_simplices: fd,
    })
}

/// The orientation chain of the bundle's top simplices.
pub fn fundamental_chain(b: &TriangulationBundle) -> Result<Chain, IntegrateError> {
    Ok(orient_fundamental(&b.complex, b.dim())?)
}

/// `∫_X ω` over the fundamental chain.
pub fn integrate(form: &DifferentialForm, b: &TriangulationBundle, degree: u32) -> Result<IntegralReport, IntegrateError> {
    let mu = fundamental_chain(b)?;
    integrate_chain(form, b, &mu, degree)
}

/// Compares `∫_μ dω` with `∫_{∂μ} ω` for a (p-1)-form ω.
pub fn stokes_residual(
    form: &DifferentialForm,
    b: &TriangulationBundle,
    chain: &Chain,
    degree: u32,
) -> Result<StokesReport, IntegrateError> {
    if form.degree() + 1 != chain.dim {
        return Err(IntegrateError::DegreeMismatch {
            form: form.degree() + 1,
            simplex: chain.dim,
        });
    }
    let d_form = form.exterior_derivative();
    let interior = integrate_chain(&d_form, b, chain, degree)?;
    let bd = boundary_chain(&b.complex, chain);
    let boundary = integrate_chain(form, b, &bd, degree)?;
    Ok(StokesReport {
        residual: (interior.value - boundary.value).abs(),
        interior,
        boundary,
    })
}

/// Integrates the same top-degree form over two triangulations of one set,
/// and optionally over their common refinement.
pub fn compare_triangulations(
    form: &DifferentialForm,
    b1: &TriangulationBundle,
    b2: &TriangulationBundle,
    degree: u32,
    refine_seed: Option<u64>,
) -> Result<CompareReport, IntegrateError> {
    let first = integrate(form, b1, degree)?;
    let second = integrate(form, b2, degree)?;
    let refined = match refine_seed {
        Some(seed) => Some(integrate(form, &common_refinement(b1, b2, seed)?, degree)?),
        None => None,
    };
    let mut values = vec![first.value, second.value];
    if let Some(r) = &refined {
        values.push(r.value);
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CompareReport {
        delta: (first.value - second.value).abs(),
        spread: max - min,
        first,
        second,
        refined,
    })
}
