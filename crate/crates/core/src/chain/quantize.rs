//! Uniform mid-rise quantizer with a per-block range.

use crate::error::{HscError, Result};

use super::Bitstream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub bits_per_coeff: u8,
    /// Fixed `(min, max)` range; the block's own extremes when `None`.
    pub clip: Option<(f64, f64)>,
}

impl Default for QuantizerSpec {
    fn default() -> Self {
        QuantizerSpec {
            bits_per_coeff: 8,
            clip: None,
        }
    }
}

impl QuantizerSpec {
    pub fn with_bits(bits_per_coeff: u8) -> Self {
        QuantizerSpec { bits_per_coeff, clip: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.bits_per_coeff) {
            return Err(HscError::InvalidParameter(format!(
                "bits_per_coeff must be in 1..=16, got {}",
                self.bits_per_coeff
            )));
        }
        if let Some((lo, hi)) = self.clip {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(HscError::InvalidParameter(format!("clip range [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> u32 {
        1u32 << self.bits_per_coeff
    }
}

/// Range of one quantizer block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRange {
    pub min: f64,
    pub max: f64,
}

impl BlockRange {
    pub fn step(&self, bits: u8) -> f64 {
        (self.max - self.min) / (1u64 << bits) as f64
    }
}

pub fn block_range(values: &[f64], spec: &QuantizerSpec) -> BlockRange {
    match spec.clip {
        Some((min, max)) => BlockRange { min, max },
        None => {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            BlockRange { min, max }
        }
    }
}

/// Integer codes for one block.
pub fn quantize_codes(values: &[f64], range: BlockRange, bits: u8) -> Vec<u32> {
    let levels = 1u32 << bits;
    let step = range.step(bits);
    values
        .iter()
        .map(|&v| {
            if step == 0.0 {
                0
            } else {
                let c = ((v - range.min) / step).floor();
                c.clamp(0.0, (levels - 1) as f64) as u32
            }
        })
        .collect()
}

/// Bin centres.
pub fn dequantize_codes(codes: &[u32], range: BlockRange, bits: u8) -> Vec<f64> {
    let step = range.step(bits);
    codes.iter().map(|&c| range.min + (c as f64 + 0.5) * step).collect()
}

pub fn push_code(bits: &mut Bitstream, code: u32, width: u8) {
    for b in (0..width).rev() {
        bits.push(((code >> b) & 1) as u8);
    }
}

pub fn read_code(bits: &[u8], width: u8) -> u32 {
    bits.iter().take(width as usize).fold(0u32, |acc, &b| (acc << 1) | b as u32)
}

/// Quantizes one block to an MSB-first bitstream of `bits_per_coeff` bits per
/// value.
pub fn quantize(values: &[f64], spec: &QuantizerSpec) -> Result<(Bitstream, BlockRange)> {
    spec.validate()?;
    if values.is_empty() {
        return Err(HscError::Empty("quantizer block"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HscError::InvalidParameter("quantizer input is not finite".into()));
    }
    let range = block_range(values, spec);
    let codes = quantize_codes(values, range, spec.bits_per_coeff);
    let mut bits = Vec::with_capacity(values.len() * spec.bits_per_coeff as usize);
    for c in codes {
        push_code(&mut bits, c, spec.bits_per_coeff);
    }
    Ok((bits, range))
}

pub fn dequantize(bits: &[u8], range: BlockRange, spec: &QuantizerSpec) -> Result<Vec<f64>> {
    let w = spec.bits_per_coeff as usize;
    if bits.len() % w != 0 {
        return Err(HscError::dims("dequantize bitstream", format!("multiple of {w}"), bits.len()));
    }
    let codes: Vec<u32> = bits.chunks(w).map(|c| read_code(c, spec.bits_per_coeff)).collect();
    Ok(dequantize_codes(&codes, range, spec.bits_per_coeff))
}
