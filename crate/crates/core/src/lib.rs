//! Focal values and small-amplitude limit cycles of planar vector fields whose
//! leading part is `p:q` quasi-homogeneous.

pub mod case_study;
pub mod cycles;
pub mod error;
pub mod field;
pub mod flow;
pub mod focal;
pub mod integrate;
pub mod jet;
pub mod polar;
pub mod quadrature;
pub mod real;
pub mod report;

pub use error::{Error, Result};
pub use field::{Monomial, PolynomialField, ValidationReport, WeightedField};
pub use jet::Jet;
pub use polar::PolarRhs;
pub use real::{DoubleDouble, Precision, Real};
