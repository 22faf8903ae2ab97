//! Doubly-nonnegative SDP relaxation of the quadratic assignment problem,
//! with exactness certificates and dual-side constructions.

pub mod assignment;
pub mod certify;
pub mod duality;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod matrix;
pub mod oracle;
pub mod qap;
pub mod sdp;

pub use error::{QapError, Result};
pub use matrix::Matrix;
pub use qap::{LiftedPoint, Permutation, QapInstance};
