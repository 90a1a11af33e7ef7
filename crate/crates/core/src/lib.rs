//! Triangulation of compact semialgebraic sets, C¹ reparametrization of
//! realization maps by radial flattening ("panel beating"), and integration
//! of polynomial differential forms over the resulting simplicial chains.
//!
//! The modules build on each other bottom-up:
//!
//! - [`algebra`]: exact polynomials, differentiable maps, forms and pullbacks
//! - [`saset`]: semialgebraic sets as Boolean formulas over sign conditions
//! - [`mesh`]: simplicial complexes, chains, boundary and orientation
//! - [`triangulate`]: grid-and-snap triangulation, refinement, common refinement
//! - [`panelbeat`]: tube charts, growth exponents, the flattening map and C¹ certification
//! - [`integrate`]: simplex quadrature, chain integrals, Stokes residuals
//! - [`measure`]: grid (box-counting) measure estimates

pub mod algebra;
pub mod integrate;
pub mod measure;
pub mod mesh;
pub mod panelbeat;
pub mod report;
pub mod saset;
pub mod triangulate;

pub use algebra::{Covector, DifferentialForm, Polynomial, SmoothMap};
pub use integrate::{IntegralReport, QuadratureRule};
pub use measure::GridReport;
pub use mesh::{Chain, SimplicialComplex};
pub use panelbeat::{C1Report, EtaProfile, GrowthEstimate, TubeChart};
pub use saset::{Membership, SaSet};
pub use triangulate::{RealizationChart, TriangulationBundle};

