pub mod bootstrap;
pub mod c4;
pub mod chem_io;
pub mod eigen;
pub mod error;
pub mod pauli;
pub mod pipeline;
pub mod shadow;
pub mod sim;

pub use error::{Error, Result};
