pub mod bracket;
pub mod cbnorm;
pub mod config;
pub mod error;
pub mod haagerup;
pub mod interp;
pub mod io;
pub mod matrix;
pub mod opspace;
pub mod psumming;
pub mod report;
pub mod schatten;
pub mod suites;
pub(crate) mod optim;

pub use bracket::{NormBracket, Witness};
pub use error::{Error, Result};
pub use matrix::{ComplexMatrix, C64};
