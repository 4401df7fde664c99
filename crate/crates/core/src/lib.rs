pub mod error;
pub mod linalg;
pub mod model;
pub mod sdp;

pub use error::{Error, Result};
pub mod radius;
pub mod worstcase;
pub mod dynamic_iqc;
pub mod verify;
pub mod io;
pub mod cli;
