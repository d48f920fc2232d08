//! Square pixel matrices.

use ndarray::{Array2, ArrayView2};

use crate::error::{HscError, Result};

/// An `L x L` matrix of real intensities. Sources live in `[0, 1]`;
/// reconstructions may leave that range slightly, so only finiteness is
/// enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array2<f64>,
}

impl Image {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        let (rows, cols) = pixels.dim();
        if rows == 0 || rows != cols {
            return Err(HscError::dims("image", "non-empty square matrix", format!("{rows}x{cols}")));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(HscError::InvalidParameter("image contains non-finite pixels".into()));
        }
        Ok(Image { pixels })
    }

    pub fn zeros(side: usize) -> Self {
        Image {
            pixels: Array2::zeros((side.max(1), side.max(1))),
        }
    }

    /// Builds an image from a row-major slice of `side * side` values.
    pub fn from_flat(side: usize, values: &[f64]) -> Result<Self> {
        if values.len() != side * side {
            return Err(HscError::dims("image from flat", side * side, values.len()));
        }
        let pixels = Array2::from_shape_vec((side, side), values.to_vec()).map_err(|e| HscError::InvalidParameter(e.to_string()))?;
        Image::new(pixels)
    }

    pub fn side(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn pixels(&self) -> ArrayView2<'_, f64> {
        self.pixels.view()
    }

    pub fn into_pixels(self) -> Array2<f64> {
        self.pixels
    }

    /// Row-major flattening, the order the codec consumes.
    pub fn to_flat(&self) -> Vec<f64> {
        self.pixels.iter().copied().collect()
    }

    pub fn clamp_unit(&self) -> Image {
        Image {
            pixels: self.pixels.mapv(|v| v.clamp(0.0, 1.0)),
        }
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image, context: &'static str) -> Result<()> {
        if self.side() != other.side() {
            return Err(HscError::dims(context, self.side(), other.side()));
        }
        Ok(())
    }
}

/// Three equally sized colour planes.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    channels: Vec<Image>,
}

impl RgbImage {
    pub fn new(channels: Vec<Image>) -> Result<Self> {
        if channels.len() != 3 {
            return Err(HscError::dims("rgb image channels", 3, channels.len()));
        }
        let side = channels[0].side();
        if channels.iter().any(|c| c.side() != side) {
            return Err(HscError::dims("rgb image planes", side, "mixed sizes"));
        }
        Ok(RgbImage { channels })
    }

    pub fn from_gray(gray: &Image) -> Self {
        RgbImage {
            channels: vec![gray.clone(), gray.clone(), gray.clone()],
        }
    }

    pub fn side(&self) -> usize {
        self.channels[0].side()
    }

    pub fn channels(&self) -> &[Image] {
        &self.channels
    }
}
