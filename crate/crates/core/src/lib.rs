pub mod adaptive;
pub mod bench;
pub mod cli;
pub mod conv;
pub mod error;
pub mod filter;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod report;
pub mod suite;
pub mod symmetry;
pub mod transforms;

pub use error::{Error, Result};
