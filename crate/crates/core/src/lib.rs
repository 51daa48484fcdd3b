pub mod boundary;
pub mod energy;
pub mod error;
pub mod field;
pub mod geometry;
pub mod halfspace;
pub mod ode;
pub mod ops;
pub mod quad;
pub mod scattering;
pub mod series;
pub mod sobolev;
pub mod specfun;

pub use error::{Error, Result};
pub use series::Ser;
pub use specfun::FracParams;
