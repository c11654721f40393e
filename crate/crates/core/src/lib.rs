pub mod calculus;
pub mod cli;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod io;
pub mod path;
pub mod phantom;
pub mod recon;
pub mod sample;
pub mod smooth;
pub mod stability;

pub use error::{QpatError, Result};
pub use field::{Field, Mask, VectorField2};
pub use grid::{BoundaryData, DiscGrid};
