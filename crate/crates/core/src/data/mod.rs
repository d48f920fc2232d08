//! Dataset ingestion and image files.

pub mod idx;
pub mod pnm;
pub mod synth;

pub use idx::{load_mnist, load_mnist_split, MnistSplit};
pub use synth::synthetic_digits;
