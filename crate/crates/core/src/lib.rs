pub mod bessel;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod fft;
pub mod greens;
pub mod grid;
pub mod io;
pub mod linearized;
pub mod operators;
pub mod par;
pub mod quadrature;
pub mod solver;

pub use error::{HartreeError, Result};
pub use grid::{make_grid, mass, normalize, Field, GridSpec};
