use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::map::SmoothMap;
use super::poly::Polynomial;
use super::AlgebraError;

/// A differential form with polynomial coefficients on `R^ambient`.
///
/// Terms are stored as `coefficient · dx_{i1} ∧ … ∧ dx_{ip}` with strictly
/// increasing, zero-based index tuples; constructors sort indices and absorb
/// the permutation sign, so two equal forms have equal representations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferentialForm {
    degree: usize,
    ambient: usize,
    terms: BTreeMap<Vec<usize>, Polynomial>,
}

/// Sorts `indices` in place and returns the permutation sign, or `None` if an index repeats.
pub fn sort_with_sign(indices: &mut [usize]) -> Option<i32> {
    let mut sign = 1;
    for i in 1..indices.len() {
        let mut j = i;
        while j > 0 && indices[j - 1] > indices[j] {
            indices.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if indices.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// All strictly increasing `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

impl DifferentialForm {
    pub fn zero(degree: usize, ambient: usize) -> Self {
        Self {
            degree,
            ambient,
            terms: BTreeMap::new(),
        }
    }

    /// Builds a form from (coefficient, index list) pairs; indices are
    /// zero-based and may come in any order.
    pub fn from_terms<I>(degree: usize, ambient: usize, terms: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = (Polynomial, Vec<usize>)>,
    {
        if degree > ambient {
            return Err(AlgebraError::InvalidForm(format!(
                "degree {degree} exceeds ambient dimension {ambient}"
            )));
        }
        let mut form = Self::zero(degree, ambient);
        for (coeff, mut idx) in terms {
            if idx.len() != degree {
                return Err(AlgebraError::InvalidForm(format!(
                    "index set {idx:?} does not have {degree} entries"
                )));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= ambient) {
                return Err(AlgebraError::InvalidForm(format!(
                    "index {} outside ambient dimension {ambient}",
                    bad + 1
                )));
            }
            if coeff.num_vars() != ambient {
                return Err(AlgebraError::DimensionMismatch {
                    expected: ambient,
                    found: coeff.num_vars(),
                });
            }
            let Some(sign) = sort_with_sign(&mut idx) else {
                continue;
            };
            let c = if sign < 0 { -&coeff } else { coeff };
            form.add_term(idx, c);
        }
        Ok(form)
    }

    /// The 0-form given by a single polynomial.
    pub fn function(p: Polynomial) -> Self {
        let ambient = p.num_vars();
        let mut f = Self::zero(0, ambient);
        f.add_term(Vec::new(), p);
        f
    }

    fn add_term(&mut self, idx: Vec<usize>, c: Polynomial) {
        let entry = self
            .terms
            .entry(idx.clone())
            .or_insert_with(|| Polynomial::zero(c.num_vars()));
        *entry = &*entry + &c;
        if entry.is_zero() {
            self.terms.remove(&idx);
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Polynomial)> {
        self.terms.iter()
    }

    /// Highest polynomial degree among the coefficients.
    pub fn coefficient_degree(&self) -> u32 {
        self.terms.values().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        if self.degree != other.degree || self.ambient != other.ambient {
            return Err(AlgebraError::InvalidForm(
                "cannot add forms of different degree or ambient dimension".into(),
            ));
        }
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(idx.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, c: &num_rational::BigRational) -> Self {
        let mut out = Self::zero(self.degree, self.ambient);
        for (idx, p) in &self.terms {
            out.add_term(idx.clone(), p.scale(c));
        }
        out
    }

    /// Exterior derivative. A top-degree form maps to the (empty) zero form
    /// of degree `ambient + 1`.
    pub fn exterior_derivative(&self) -> Self {
        let mut out = Self::zero(self.degree + 1, self.ambient);
        if self.degree >= self.ambient {
            return out;
        }
        for (idx, coeff) in &self.terms {
            for j in 0..self.ambient {
                if idx.contains(&j) {
                    continue;
                }
                let partial = coeff.derivative(j);
                if partial.is_zero() {
                    continue;
                }
                // dx_j ∧ dx_I: move dx_j past the indices smaller than j
                let before = idx.iter().filter(|&&i| i < j).count();
                let mut new_idx = idx.clone();
                new_idx.insert(before, j);
                let c = if before % 2 == 1 { -&partial } else { partial };
                out.add_term(new_idx, c);
            }
        }
        out
    }

    /// Coefficients evaluated at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<(Vec<usize>, f64)>, AlgebraError> {
        if x.len() != self.ambient {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.ambient,
                found: x.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(i, p)| (i.clone(), p.eval_unchecked(x)))
            .collect())
    }
}

/// An alternating p-covector at a point of `R^dim`, with coefficients on the
/// lexicographically ordered basis `dx_I`, `|I| = p`.
#[derive(Clone, Debug, PartialEq)]
pub struct Covector {
    pub degree: usize,
    pub dim: usize,
    pub coefficients: BTreeMap<Vec<usize>, f64>,
}

impl Covector {
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.coefficients.get(idx).copied().unwrap_or(0.0)
    }

    /// Coefficient of `dx_0 ∧ … ∧ dx_{dim-1}` for a top-degree covector.
    pub fn top(&self) -> f64 {
        let idx: Vec<usize> = (0..self.dim).collect();
        self.get(&idx)
    }

    pub fn max_abs_diff(&self, other: &Covector) -> f64 {
        let keys: std::collections::BTreeSet<_> = self
            .coefficients
            .keys()
            .chain(other.coefficients.keys())
            .collect();
        keys.into_iter()
            .map(|k| (self.get(k) - other.get(k)).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn minor(j: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    match rows.len() {
        0 => 1.0,
        1 => j[(rows[0], cols[0])],
        2 => {
            j[(rows[0], cols[0])] * j[(rows[1], cols[1])]
                - j[(rows[0], cols[1])] * j[(rows[1], cols[0])]
        }
        n => DMatrix::from_fn(n, n, |a, b| j[(rows[a], cols[b])]).determinant(),
    }
}

/// Pullback of `form` through `map`, evaluated at `x`, from the Jacobian minors.
pub fn pullback_with_jacobian(
    form: &DifferentialForm,
    values_at: &[f64],
    jac: &DMatrix<f64>,
) -> Covector {
    let dim = jac.ncols();
    let p = form.degree;
    let mut coefficients = BTreeMap::new();
    let omega: Vec<(Vec<usize>, f64)> = form
        .terms
        .iter()
        .map(|(i, c)| (i.clone(), c.eval_unchecked(values_at)))
        .collect();
    for cols in subsets(dim, p) {
        let v: f64 = omega
            .iter()
            .map(|(rows, w)| w * minor(jac, rows, &cols))
            .sum();
        if v != 0.0 {
            coefficients.insert(cols, v);
        }
    }
    Covector {
        degree: p,
        dim,
        coefficients,
    }
}

/// `(F^* ω)(x)`.
pub fn pullback(form: &DifferentialForm, map: &SmoothMap, x: &[f64]) -> Result<Covector, AlgebraError> {
    if map.codomain_dim() != form.ambient {
        return Err(AlgebraError::DimensionMismatch {
            expected: form.ambient,
            found: map.codomain_dim(),
        });
    }
    if form.degree > map.domain_dim() {
        return Err(AlgebraError::InvalidForm(format!(
            "cannot pull a {}-form back to a {}-dimensional domain",
            form.degree,
            map.domain_dim()
        )));
    }
    let y = map.eval(x)?;
    if form.degree == 0 {
        let v = form
            .terms
            .get(&Vec::new())
            .map(|c| c.eval_unchecked(&y))
            .unwrap_or(0.0);
        let mut coefficients = BTreeMap::new();
        if v != 0.0 {
            coefficients.insert(Vec::new(), v);
        }
        return Ok(Covector {
            degree: 0,
            dim: map.domain_dim(),
            coefficients,
        });
    }
    let j = map.jacobian(x)?;
    Ok(pullback_with_jacobian(form, &y, &j.matrix))
}

/// JSON document describing a form. Indices in `dx` are one-based to match
/// the `x1 .. xN` variable names.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormDocument {
    #[serde(default)]
    pub schema: Option<u32>,
    pub ambient: usize,
    pub degree: usize,
    pub terms: Vec<FormTermDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormTermDocument {
    pub coeff: String,
    pub dx: Vec<usize>,
}

impl FormDocument {
    pub fn to_form(&self) -> Result<DifferentialForm, AlgebraError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (n, t) in self.terms.iter().enumerate() {
            let p = Polynomial::parse(&t.coeff, self.ambient).map_err(|e| {
                AlgebraError::InvalidForm(format!("terms[{n}].coeff: {e}"))
            })?;
            if t.dx.contains(&0) {
                return Err(AlgebraError::InvalidForm(format!(
                    "terms[{n}].dx: indices are one-based"
                )));
            }
            terms.push((p, t.dx.iter().map(|i| i - 1).collect()));
        }
        DifferentialForm::from_terms(self.degree, self.ambient, terms)
    }

    pub fn from_form(form: &DifferentialForm) -> Self {
        Self {
            schema: Some(1),
            ambient: form.ambient,
            degree: form.degree,
            terms: form
                .terms
                .iter()
                .map(|(idx, c)| FormTermDocument {
                    coeff: c.to_string(),
                    dx: idx.iter().map(|i| i + 1).collect(),
                })
                .collect(),
        }
    }
}
