pub mod bumps;
pub mod config;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod mesh;
pub mod numeric;
pub mod orlicz;
pub mod report;
pub mod shifts;
pub mod stopping;
pub mod suites;
pub mod weights;
pub mod young;

pub use error::{Error, Result};
