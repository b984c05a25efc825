pub mod applications;
pub mod codec;
pub mod error;
pub mod hist;
mod linalg;
pub mod pca;
pub mod pipeline;
pub mod resample;
pub mod seed;
pub mod sliced_ot;
pub mod tensor;

pub use error::{Error, Result};
