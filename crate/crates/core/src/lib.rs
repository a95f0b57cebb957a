//! Pointwise geometry of gradient Ricci solitons: curvature and conformal
//! tensors in arbitrary coordinate charts, soliton identities, level-set
//! diagnostics, warped-product reductions and the Bryant steady soliton.

pub mod bryant;
pub mod catalog;
pub mod chart;
pub mod classifier;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod level_set;
pub mod ode;
pub mod soliton;
pub mod tensor;
pub mod warped;

pub use chart::{CoordinateChart, DerivativeMode, Domain, FdSteps, FieldFn};
pub use error::{Error, Result};
pub use geometry::{
    adapted_frame, conformal_bundle, curvature_bundle, weyl_divergence_check, ConformalBundle,
    CurvatureBundle, LocalGeometry,
};
pub use jet::Jet;
pub use tensor::Tensor;
