//! Fixed-ratio source stage.
//!
//! Stands in for an image codec: it keeps `⌈ratio·n⌉` of the `n` quantizer
//! bits by spreading the budget evenly over the coefficients and keeping the
//! most significant bits of each code. Dropped low bits are restored to the
//! middle of their interval on decode. Ratio 1 is the identity.

use crate::error::{HscError, Result};

use super::quantize::{push_code, read_code};
use super::Bitstream;

/// `⌈ratio·n⌉`, robust to the binary representation of `ratio`.
pub fn compressed_len(n_bits: usize, ratio: f64) -> usize {
    let scaled = ratio * n_bits as f64;
    let rounded = scaled.round();
    if (scaled - rounded).abs() < 1e-9 * scaled.max(1.0) {
        rounded as usize
    } else {
        scaled.ceil() as usize
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(HscError::InvalidParameter(format!("source ratio must be in (0, 1], got {ratio}")));
    }
    Ok(())
}

/// Bits kept for each of `n_coeffs` coefficients under a total budget.
pub fn bit_allocation(n_coeffs: usize, width: u8, budget: usize) -> Vec<u8> {
    if n_coeffs == 0 {
        return Vec::new();
    }
    (0..n_coeffs)
        .map(|i| {
            let hi = (i + 1) * budget / n_coeffs;
            let lo = i * budget / n_coeffs;
            ((hi - lo) as u8).min(width)
        })
        .collect()
}

pub fn source_code(bits: &[u8], width: u8, ratio: f64) -> Result<Bitstream> {
    check_ratio(ratio)?;
    let w = width as usize;
    if w == 0 || bits.len() % w != 0 {
        return Err(HscError::dims("source stage input", format!("multiple of {w}"), bits.len()));
    }
    if ratio == 1.0 {
        return Ok(bits.to_vec());
    }
    let n = bits.len() / w;
    let budget = compressed_len(bits.len(), ratio);
    let alloc = bit_allocation(n, width, budget);
    let mut out = Vec::with_capacity(budget);
    for (chunk, &keep) in bits.chunks(w).zip(&alloc) {
        out.extend_from_slice(&chunk[..keep as usize]);
    }
    Ok(out)
}

/// Inverse of [`source_code`] for `n_coeffs` codes of `width` bits.
pub fn source_decode(bits: &[u8], n_coeffs: usize, width: u8, ratio: f64) -> Result<Bitstream> {
    check_ratio(ratio)?;
    if ratio == 1.0 {
        if bits.len() != n_coeffs * width as usize {
            return Err(HscError::dims("source stage output", n_coeffs * width as usize, bits.len()));
        }
        return Ok(bits.to_vec());
    }
    let budget = compressed_len(n_coeffs * width as usize, ratio);
    if bits.len() != budget {
        return Err(HscError::dims("source stage output", budget, bits.len()));
    }
    let alloc = bit_allocation(n_coeffs, width, budget);
    let mut out = Vec::with_capacity(n_coeffs * width as usize);
    let mut pos = 0;
    for &keep in &alloc {
        let kept = read_code(&bits[pos..pos + keep as usize], keep);
        pos += keep as usize;
        let dropped = width - keep;
        let code = if keep == 0 {
            1u32 << (width - 1)
        } else if dropped == 0 {
            kept
        } else {
            (kept << dropped) | (1u32 << (dropped - 1))
        };
        push_code(&mut out, code, width);
    }
    Ok(out)
}

/// Worst-case reconstruction error after quantizer and source stage, in
/// units of the block range. With `b_min` the fewest bits kept, the coarse
/// half-step `1 / 2^(b_min + 1)`, plus half a fine step when bits were dropped
/// (the restored code sits half a fine step off the coarse centre).
pub fn coarse_step_fraction(n_coeffs: usize, width: u8, ratio: f64) -> f64 {
    let budget = compressed_len(n_coeffs * width as usize, ratio.min(1.0));
    let min_keep = bit_allocation(n_coeffs, width, budget).into_iter().min().unwrap_or(width);
    let coarse = 1.0 / (1u64 << (min_keep as u32 + 1)) as f64;
    if min_keep < width {
        coarse + 1.0 / (1u64 << (width as u32 + 1)) as f64
    } else {
        coarse
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ratio_is_identity() {
        let bits = vec![1, 0, 1, 1, 0, 0, 0, 1];
        assert_eq!(source_code(&bits, 8, 1.0).unwrap(), bits);
        assert_eq!(source_decode(&bits, 1, 8, 1.0).unwrap(), bits);
    }

    #[test]
    fn fifth_ratio_length() {
        let n = 50;
        let bits = vec![1u8; n * 8];
        let out = source_code(&bits, 8, 0.2).unwrap();
        assert_eq!(out.len(), 80);
        let alloc = bit_allocation(n, 8, 80);
        assert_eq!(alloc.iter().map(|&b| b as usize).sum::<usize>(), 80);
        assert!(alloc.iter().all(|&b| b == 1 || b == 2));
        // 616 reals at 8 bits
        assert_eq!(compressed_len(616 * 8, 0.2), 986);
        assert_eq!(compressed_len(5000, 0.2), 1000);
    }

    #[test]
    fn msbs_survive_the_round_trip() {
        let bits = vec![1, 0, 1, 1, 0, 1, 1, 0];
        let coded = source_code(&bits, 8, 0.25).unwrap();
        assert_eq!(coded, vec![1, 0]);
        let back = source_decode(&coded, 1, 8, 0.25).unwrap();
        assert_eq!(back, vec![1, 0, 1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn bad_ratio() {
        assert!(source_code(&[0; 8], 8, 0.0).is_err());
        assert!(source_code(&[0; 8], 8, 1.5).is_err());
        assert!(source_decode(&[0; 3], 1, 8, 0.2).is_err());
    }
}
