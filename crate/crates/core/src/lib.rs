pub mod dense;
pub mod elastic;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod fundsol;
pub mod inequality;
pub mod kirchhoff;
pub mod layer;
pub mod poly;
pub mod reduction;
pub mod scalar;

pub use error::{Error, Result};
