pub mod error;
pub mod functionals;
pub mod grid;
pub mod heat_kernel;
pub mod lab;
pub mod ode_blowup;
pub mod regression;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{RadialGrid, RadialProfile};
