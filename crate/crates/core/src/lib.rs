pub mod error;
pub mod haar;
pub mod imaging;
pub mod nn;
pub mod pipeline;
pub mod tensor;
pub mod weights;

pub use error::{Error, Result};
pub use tensor::Tensor;
pub use weights::TensorArchive;
