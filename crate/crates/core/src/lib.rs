//! Hybrid semantic-complementary image transmission.

pub mod adaptation;
pub mod chain;
pub mod channel;
pub mod codec;
pub mod cr;
pub mod data;
pub mod error;
pub mod image;
pub mod linalg;
pub mod pipeline;
pub mod recompose;

pub use error::{HscError, Result};
pub use image::{Image, RgbImage};
