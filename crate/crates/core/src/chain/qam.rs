//! Gray-mapped 16-QAM with unit average symbol energy.
//!
//! Bits `b3 b2 b1 b0` map to `I` from `b3 b2` and `Q` from `b1 b0`, each
//! axis using `00 → −3, 01 → −1, 11 → +1, 10 → +3`, scaled by `1/√10`.

use num_complex::Complex64;

use crate::channel::Symbols;

pub const BITS_PER_SYMBOL: usize = 4;

fn scale() -> f64 {
    1.0 / 10f64.sqrt()
}

fn axis_level(hi: u8, lo: u8) -> f64 {
    match (hi, lo) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

fn axis_bits(v: f64) -> (u8, u8) {
    let v = v / scale();
    if v < -2.0 {
        (0, 0)
    } else if v < 0.0 {
        (0, 1)
    } else if v < 2.0 {
        (1, 1)
    } else {
        (1, 0)
    }
}

/// Zero bits needed to reach a multiple of four.
pub fn padding_for(n_bits: usize) -> usize {
    (BITS_PER_SYMBOL - n_bits % BITS_PER_SYMBOL) % BITS_PER_SYMBOL
}

/// Modulates, zero-padding the tail. The pad length is returned so the
/// receiver can strip it.
pub fn qam16_modulate(bits: &[u8]) -> (Symbols, usize) {
    let pad = padding_for(bits.len());
    let s = scale();
    let symbols = bits
        .iter()
        .copied()
        .chain(std::iter::repeat_n(0u8, pad))
        .collect::<Vec<u8>>()
        .chunks(BITS_PER_SYMBOL)
        .map(|c| Complex64::new(axis_level(c[0], c[1]) * s, axis_level(c[2], c[3]) * s))
        .collect();
    (symbols, pad)
}

/// Minimum-distance per axis; drops `pad` trailing bits.
pub fn qam16_demodulate(symbols: &[Complex64], pad: usize) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * BITS_PER_SYMBOL);
    for sym in symbols {
        let (b3, b2) = axis_bits(sym.re);
        let (b1, b0) = axis_bits(sym.im);
        bits.extend_from_slice(&[b3, b2, b1, b0]);
    }
    bits.truncate(bits.len().saturating_sub(pad));
    bits
}

pub fn constellation() -> Vec<Complex64> {
    (0..16u8)
        .map(|v| {
            let bits = [(v >> 3) & 1, (v >> 2) & 1, (v >> 1) & 1, v & 1];
            qam16_modulate(&bits).0[0]
        })
        .collect()
}
