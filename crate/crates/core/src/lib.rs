//! Numerical laboratory for Zvonkin-type transformations of SDEs with
//! Dini-continuous or `L^p`-singular drift, and empirical checks of the
//! transportation cost inequalities they imply.

pub mod error;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod simulate;
pub mod tci;
pub mod transport;
pub mod zvonkin;

pub use error::{Error, Result};
