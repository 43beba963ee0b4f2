//! Dyadic-grid machinery for comparing continuous function classes with
//! their dyadic counterparts on two translated grids: shifted grids and the
//! covering lemma, Muckenhoupt and reverse Holder constant estimators, Haar
//! and Carleson BMO norms, maximal functions, and their two-parameter
//! (product) versions, all verified at desk scale on discretized inputs.

pub mod covering;
pub mod error;
pub mod exact;
pub mod grids;
pub mod haar;
pub mod maximal;
pub mod mesh;
pub mod product;
pub mod report;
pub mod suite;
pub mod weights;

pub use error::{Error, Result};
pub use exact::{covering_constant, relative_distance, Rational};
