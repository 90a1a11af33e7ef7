//! Semialgebraic sets described by Boolean formulas over polynomial sign
//! conditions, with exact point classification and conservative box
//! classification by interval arithmetic.

mod json;

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::algebra::{AlgebraError, Interval, Polynomial};

pub use json::{FormulaDocument, SetDocument};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SetError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("dimension mismatch: set lives in R^{expected}, got {found} coordinates")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sign condition on the zero polynomial")]
    ZeroPolynomial,
    #[error("member point {point:?} lies outside the declared box")]
    BoxViolated { point: Vec<f64> },
    #[error("set has no declared bounding box")]
    MissingBox,
    #[error("invalid set document: {0}")]
    Document(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Relation {
    #[serde(rename = "=0")]
    Eq,
    #[serde(rename = ">0")]
    Gt,
    #[serde(rename = ">=0")]
    Ge,
    #[serde(rename = "<0")]
    Lt,
    #[serde(rename = "<=0")]
    Le,
}

impl Relation {
    pub fn holds(self, sign: Ordering) -> bool {
        match self {
            Relation::Eq => sign == Ordering::Equal,
            Relation::Gt => sign == Ordering::Greater,
            Relation::Ge => sign != Ordering::Less,
            Relation::Lt => sign == Ordering::Less,
            Relation::Le => sign != Ordering::Greater,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Eq => "=0",
            Relation::Gt => ">0",
            Relation::Ge => ">=0",
            Relation::Lt => "<0",
            Relation::Le => "<=0",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.trim() {
            "=0" | "==0" => Relation::Eq,
            ">0" => Relation::Gt,
            ">=0" => Relation::Ge,
            "<0" => Relation::Lt,
            "<=0" => Relation::Le,
            _ => return None,
        })
    }

    /// Truth value over a range of polynomial values, if it is decided.
    fn decide(self, range: Interval) -> Option<bool> {
        let (lo, hi) = (range.lo, range.hi);
        match self {
            Relation::Eq => {
                if lo > 0.0 || hi < 0.0 {
                    Some(false)
                } else if lo == 0.0 && hi == 0.0 {
                    Some(true)
                } else {
                    None
                }
            }
            Relation::Gt => decide_strict(lo > 0.0, hi <= 0.0),
            Relation::Ge => decide_strict(lo >= 0.0, hi < 0.0),
            Relation::Lt => decide_strict(hi < 0.0, lo >= 0.0),
            Relation::Le => decide_strict(hi <= 0.0, lo > 0.0),
        }
    }
}

fn decide_strict(yes: bool, no: bool) -> Option<bool> {
    if yes {
        Some(true)
    } else if no {
        Some(false)
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignCondition {
    pub poly: Polynomial,
    pub rel: Relation,
}

impl SignCondition {
    pub fn new(poly: Polynomial, rel: Relation) -> Result<Self, SetError> {
        if poly.is_zero() {
            return Err(SetError::ZeroPolynomial);
        }
        Ok(Self { poly, rel })
    }

    pub fn holds_at(&self, x: &[f64]) -> Result<bool, SetError> {
        Ok(self.rel.holds(self.poly.sign_at(x)?))
    }
}

impl fmt::Display for SignCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.poly, self.rel.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Leaf(SignCondition),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

/// Three-valued truth used for box classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Unknown,
}

impl Formula {
    pub fn leaf(poly: Polynomial, rel: Relation) -> Result<Self, SetError> {
        Ok(Formula::Leaf(SignCondition::new(poly, rel)?))
    }

    pub fn and(parts: Vec<Formula>) -> Self {
        Formula::And(parts)
    }

    pub fn or(parts: Vec<Formula>) -> Self {
        Formula::Or(parts)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Formula) -> Self {
        Formula::Not(Box::new(inner))
    }

    /// Leaves in depth-first order; a leaf's position here is its id.
    pub fn leaves(&self) -> Vec<&SignCondition> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a SignCondition>) {
        match self {
            Formula::Leaf(c) => out.push(c),
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|f| f.collect_leaves(out)),
            Formula::Not(f) => f.collect_leaves(out),
        }
    }

    fn dim(&self) -> Option<usize> {
        self.leaves().first().map(|c| c.poly.num_vars())
    }

    pub fn eval_point(&self, x: &[f64]) -> Result<bool, SetError> {
        Ok(match self {
            Formula::Leaf(c) => c.holds_at(x)?,
            Formula::And(v) => {
                for f in v {
                    if !f.eval_point(x)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(v) => {
                for f in v {
                    if f.eval_point(x)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Not(f) => !f.eval_point(x)?,
        })
    }

    fn eval_box(&self, b: &[Interval]) -> Result<Tri, SetError> {
        Ok(match self {
            Formula::Leaf(c) => match c.rel.decide(c.poly.eval_interval(b)?) {
                Some(true) => Tri::True,
                Some(false) => Tri::False,
                None => Tri::Unknown,
            },
            Formula::And(v) => {
                let mut acc = Tri::True;
                for f in v {
                    match f.eval_box(b)? {
                        Tri::False => return Ok(Tri::False),
                        Tri::Unknown => acc = Tri::Unknown,
                        Tri::True => {}
                    }
                }
                acc
            }
            Formula::Or(v) => {
                let mut acc = Tri::False;
                for f in v {
                    match f.eval_box(b)? {
                        Tri::True => return Ok(Tri::True),
                        Tri::Unknown => acc = Tri::Unknown,
                        Tri::False => {}
                    }
                }
                acc
            }
            Formula::Not(f) => match f.eval_box(b)? {
                Tri::True => Tri::False,
                Tri::False => Tri::True,
                Tri::Unknown => Tri::Unknown,
            },
        })
    }

    /// Negation normal form: NOT pushed onto the leaves, where it flips the
    /// relation with strict/non-strict dualization (`NOT(p >= 0)` is `p < 0`,
    /// `NOT(p = 0)` is `p < 0 OR p > 0`).
    pub fn to_nnf(&self) -> Formula {
        self.nnf(false)
    }

    fn nnf(&self, negate: bool) -> Formula {
        match (self, negate) {
            (Formula::Leaf(c), false) => Formula::Leaf(c.clone()),
            (Formula::Leaf(c), true) => {
                let flip = |rel| {
                    Formula::Leaf(SignCondition {
                        poly: c.poly.clone(),
                        rel,
                    })
                };
                match c.rel {
                    Relation::Eq => Formula::Or(vec![flip(Relation::Lt), flip(Relation::Gt)]),
                    Relation::Gt => flip(Relation::Le),
                    Relation::Ge => flip(Relation::Lt),
                    Relation::Lt => flip(Relation::Ge),
                    Relation::Le => flip(Relation::Gt),
                }
            }
            (Formula::And(v), false) => Formula::And(v.iter().map(|f| f.nnf(false)).collect()),
            (Formula::And(v), true) => Formula::Or(v.iter().map(|f| f.nnf(true)).collect()),
            (Formula::Or(v), false) => Formula::Or(v.iter().map(|f| f.nnf(false)).collect()),
            (Formula::Or(v), true) => Formula::And(v.iter().map(|f| f.nnf(true)).collect()),
            (Formula::Not(f), n) => f.nnf(!n),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    Nonmember,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxClass {
    AllIn,
    AllOut,
    Mixed,
}

/// Axis-aligned box `[lo_1, hi_1] × … × [lo_m, hi_m]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, SetError> {
        if lo.len() != hi.len() {
            return Err(SetError::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(SetError::Document("box bounds must satisfy lo < hi".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| Interval::new(a, b))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| a <= v && v <= b)
    }
}

/// A semialgebraic subset of `R^dim`, optionally declared inside a box.
///
/// Locally semialgebraic (unbounded) sets are handled by restricting them to
/// the declared box; everything downstream of triangulation requires one.
#[derive(Clone, Debug, PartialEq)]
pub struct SaSet {
    dim: usize,
    formula: Formula,
    bbox: Option<BoundingBox>,
}

impl SaSet {
    pub fn new(dim: usize, formula: Formula) -> Result<Self, SetError> {
        for leaf in formula.leaves() {
            if leaf.poly.num_vars() != dim {
                return Err(SetError::DimensionMismatch {
                    expected: dim,
                    found: leaf.poly.num_vars(),
                });
            }
        }
        if formula.dim().is_none() {
            return Err(SetError::Document("formula has no sign conditions".into()));
        }
        Ok(Self {
            dim,
            formula,
            bbox: None,
        })
    }

    pub fn with_box(mut self, bbox: BoundingBox) -> Result<Self, SetError> {
        if bbox.dim() != self.dim {
            return Err(SetError::DimensionMismatch {
                expected: self.dim,
                found: bbox.dim(),
            });
        }
        self.bbox = Some(bbox);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn bbox(&self) -> Option<&BoundingBox> {
        self.bbox.as_ref()
    }

    pub fn require_box(&self) -> Result<&BoundingBox, SetError> {
        self.bbox.as_ref().ok_or(SetError::MissingBox)
    }

    pub fn leaves(&self) -> Vec<&SignCondition> {
        self.formula.leaves()
    }

    fn check_dim(&self, n: usize) -> Result<(), SetError> {
        if n != self.dim {
            return Err(SetError::DimensionMismatch {
                expected: self.dim,
                found: n,
            });
        }
        Ok(())
    }

    /// Exact membership test; float coordinates are read as the rationals they represent.
    pub fn classify_point(&self, x: &[f64]) -> Result<Membership, SetError> {
        self.check_dim(x.len())?;
        Ok(if self.formula.eval_point(x)? {
            Membership::Member
        } else {
            Membership::Nonmember
        })
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool, SetError> {
        Ok(self.classify_point(x)? == Membership::Member)
    }

    /// Conservative classification of a box: `AllIn` and `AllOut` are
    /// guaranteed, anything undecided is `Mixed`.
    pub fn classify_box(&self, b: &[Interval]) -> Result<BoxClass, SetError> {
        self.check_dim(b.len())?;
        Ok(match self.formula.eval_box(b)? {
            Tri::True => BoxClass::AllIn,
            Tri::False => BoxClass::AllOut,
            Tri::Unknown => BoxClass::Mixed,
        })
    }

    /// Samples a grid over the box enlarged by half its size on each side
    /// and fails on the first member point found outside the declared box.
    pub fn check_box(&self, per_axis: usize) -> Result<(), SetError> {
        let bbox = self.require_box()?;
        let per_axis = per_axis.max(2);
        let m = self.dim;
        let total = per_axis.pow(m as u32);
        let mut x = vec![0.0; m];
        for flat in 0..total {
            let mut r = flat;
            for k in 0..m {
                let i = r % per_axis;
                r /= per_axis;
                let w = bbox.hi[k] - bbox.lo[k];
                let t = i as f64 / (per_axis - 1) as f64;
                x[k] = bbox.lo[k] - 0.5 * w + 2.0 * w * t;
            }
            if !bbox.contains(&x) && self.contains(&x)? {
                return Err(SetError::BoxViolated { point: x.clone() });
            }
        }
        Ok(())
    }

    /// The same formula restricted to the given box.
    pub fn restricted_to(&self, bbox: BoundingBox) -> Result<SaSet, SetError> {
        let mut parts = vec![self.formula.clone()];
        for k in 0..self.dim {
            let xk = Polynomial::var(self.dim, k);
            let lo = Polynomial::constant(self.dim, crate::algebra::f64_to_rational(bbox.lo[k]));
            let hi = Polynomial::constant(self.dim, crate::algebra::f64_to_rational(bbox.hi[k]));
            parts.push(Formula::leaf(&xk - &lo, Relation::Ge)?);
            parts.push(Formula::leaf(&hi - &xk, Relation::Ge)?);
        }
        SaSet::new(self.dim, Formula::And(parts))?.with_box(bbox)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> SaSet {
        let p = Polynomial::parse("x^2 + y^2 - 1", 2).unwrap();
        SaSet::new(2, Formula::leaf(p, Relation::Le).unwrap()).unwrap()
    }

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn point_examples() {
        let d = disk();
        assert_eq!(d.classify_point(&[0.0, 0.0]).unwrap(), Membership::Member);
        assert_eq!(d.classify_point(&[2.0, 0.0]).unwrap(), Membership::Nonmember);
        let circle = SaSet::new(
            2,
            Formula::leaf(Polynomial::parse("x^2 + y^2 - 1", 2).unwrap(), Relation::Eq).unwrap(),
        )
        .unwrap();
        assert_eq!(circle.classify_point(&[1.0, 0.0]).unwrap(), Membership::Member);
        assert!(d.classify_point(&[0.0]).is_err());
    }

    #[test]
    fn box_examples() {
        let d = disk();
        assert_eq!(d.classify_box(&[iv(-0.1, 0.1), iv(-0.1, 0.1)]).unwrap(), BoxClass::AllIn);
        assert_eq!(d.classify_box(&[iv(2.0, 3.0), iv(0.0, 1.0)]).unwrap(), BoxClass::AllOut);
        assert_eq!(d.classify_box(&[iv(0.9, 1.1), iv(-0.1, 0.1)]).unwrap(), BoxClass::Mixed);
    }

    #[test]
    fn zero_polynomial_rejected() {
        assert!(matches!(
            Formula::leaf(Polynomial::zero(2), Relation::Ge),
            Err(SetError::ZeroPolynomial)
        ));
    }

    #[test]
    fn nnf_dualizes_relations() {
        let p = Polynomial::parse("x", 1).unwrap();
        let f = Formula::not(Formula::leaf(p.clone(), Relation::Ge).unwrap());
        assert_eq!(f.to_nnf(), Formula::leaf(p, Relation::Lt).unwrap());
    }

    #[test]
    fn box_check_detects_escape() {
        let d = disk()
            .with_box(BoundingBox::new(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap())
            .unwrap();
        assert!(matches!(d.check_box(21), Err(SetError::BoxViolated { .. })));
        let ok = disk()
            .with_box(BoundingBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap())
            .unwrap();
        ok.check_box(41).unwrap();
    }

    #[test]
    fn restriction_clips_unbounded_set() {
        let half_plane = SaSet::new(
            2,
            Formula::leaf(Polynomial::parse("y", 2).unwrap(), Relation::Ge).unwrap(),
        )
        .unwrap();
        let clipped = half_plane
            .restricted_to(BoundingBox::new(vec![-1.0, 0.0], vec![1.0, 1.0]).unwrap())
            .unwrap();
        assert!(clipped.contains(&[0.5, 0.5]).unwrap());
        assert!(!clipped.contains(&[5.0, 0.5]).unwrap());
        clipped.check_box(11).unwrap();
    }
}
