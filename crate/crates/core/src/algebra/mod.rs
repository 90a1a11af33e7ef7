//! Exact polynomial arithmetic, differentiable maps and the exterior
//! calculus of polynomial-coefficient forms.

mod form;
mod interval;
mod map;
mod parse;
mod poly;

pub use form::{
    pullback, pullback_with_jacobian, sort_with_sign, subsets, Covector, DifferentialForm,
    FormDocument, FormTermDocument,
};
pub use interval::Interval;
pub use map::{Jacobian, JacobianSource, SmoothMap, FD_STEP};
pub use poly::{f64_to_rational, Exponents, Polynomial};



#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgebraError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("invalid form: {0}")]
    InvalidForm(String),
    #[error("jacobian unavailable at {point:?}")]
    JacobianUnavailable { point: Vec<f64> },
    #[error("non-finite coordinate")]
    NonFinite,
}
