//! IDX files (the MNIST container): big-endian header, then raw bytes.

use std::path::{Path, PathBuf};

use crate::error::{HscError, Result};
use crate::image::Image;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TRAIN_SIZE: usize = 50_000;
pub const EVAL_SIZE: usize = 10_000;

/// Environment variable holding the directory with the IDX files.
pub const DATA_ENV: &str = "HSC_DATA_DIR";

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| HscError::format("idx", format!("{what}: truncated header")))
}

/// Square images scaled to `[0, 1]`.
pub fn parse_images(bytes: &[u8]) -> Result<Vec<Image>> {
    if bytes.is_empty() {
        return Err(HscError::format("idx", "empty file"));
    }
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IMAGES_MAGIC {
        return Err(HscError::format("idx", format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4, "count")? as usize;
    let rows = be_u32(bytes, 8, "rows")? as usize;
    let cols = be_u32(bytes, 12, "cols")? as usize;
    if rows != cols || rows == 0 {
        return Err(HscError::format("idx", format!("non-square or empty images {rows}x{cols}")));
    }
    let need = n
        .checked_mul(rows * cols)
        .and_then(|v| v.checked_add(16))
        .ok_or_else(|| HscError::format("idx", "size overflow"))?;
    if bytes.len() != need {
        return Err(HscError::format("idx", format!("expected {need} bytes, found {}", bytes.len())));
    }
    bytes[16..]
        .chunks_exact(rows * cols)
        .map(|c| Image::from_flat(rows, &c.iter().map(|&b| b as f64 / 255.0).collect::<Vec<_>>()))
        .collect()
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != LABELS_MAGIC {
        return Err(HscError::format("idx", format!("bad label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4, "count")? as usize;
    if bytes.len() != 8 + n {
        return Err(HscError::format("idx", format!("expected {} label bytes, found {}", 8 + n, bytes.len())));
    }
    Ok(bytes[8..].to_vec())
}

/// Pixels are rounded to the nearest of 256 levels.
pub fn images_to_idx(images: &[Image]) -> Result<Vec<u8>> {
    let side = images.first().map_or(0, Image::side);
    let mut out = Vec::with_capacity(16 + images.len() * side * side);
    for v in [IMAGES_MAGIC, images.len() as u32, side as u32, side as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        if img.side() != side {
            return Err(HscError::dims("image side", side, img.side()));
        }
        out.extend(img.to_flat().iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    Ok(out)
}

pub fn load_mnist(path: &Path) -> Result<Vec<Image>> {
    parse_images(&std::fs::read(path)?)
}

#[derive(Debug, Clone)]
pub struct MnistSplit {
    pub train: Vec<Image>,
    pub eval: Vec<Image>,
}

/// First 50 000 training images and the separate 10 000-image test file.
pub fn load_mnist_split(dir: &Path) -> Result<MnistSplit> {
    let mut train = load_mnist(&dir.join(TRAIN_IMAGES))?;
    train.truncate(TRAIN_SIZE);
    let mut eval = load_mnist(&dir.join(TEST_IMAGES))?;
    eval.truncate(EVAL_SIZE);
    Ok(MnistSplit { train, eval })
}

pub fn data_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_ENV).map(PathBuf::from)
}
