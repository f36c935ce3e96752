//! C^s-smooth isogeometric spline spaces over planar bilinear multi-patch
//! domains: construction, verification and L2 approximation.
pub mod bspline;
pub mod cli;
pub mod error;
pub mod fitting;
pub mod gluing;
pub mod linalg;
pub mod multipatch;
pub mod spacebuilder;
pub mod verify;

pub use error::{Error, Result};
