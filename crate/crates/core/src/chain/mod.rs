//! Conventional digital transmission of real-valued blocks:
//! quantize → fixed-ratio source stage → rate-1/2 convolutional code →
//! Gray 16-QAM, and the inverse at the receiver.
//!
//! With the defaults (8-bit quantizer, ratio 1/5, rate 1/2, 16-QAM) one real
//! costs `8 · 0.2 / 0.5 / 4 = 0.8` channel symbols.

pub mod conv;
pub mod frame;
pub mod qam;
pub mod quantize;
pub mod source;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{self, ChannelRealization, Symbols};
use crate::error::{HscError, Result};

pub use frame::{Frame, FrameHeader};
pub use quantize::{BlockRange, QuantizerSpec};

/// One bit per element, values 0 or 1, most significant bit first.
pub type Bitstream = Vec<u8>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub quantizer: QuantizerSpec,
    pub source_ratio: f64,
    pub code_rate: f64,
    pub modulation_order: u32,
    /// Values per quantizer range block; `0` treats the input as one block.
    pub block_len: usize,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec {
            quantizer: QuantizerSpec::default(),
            source_ratio: 0.2,
            code_rate: 0.5,
            modulation_order: 16,
            block_len: 0,
        }
    }
}

/// Payload symbols plus the symbols spent on code termination and padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolCount {
    pub payload: usize,
    pub padding: usize,
}

impl SymbolCount {
    pub fn total(&self) -> usize {
        self.payload + self.padding
    }
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        self.quantizer.validate()?;
        if !(self.source_ratio > 0.0 && self.source_ratio <= 1.0) {
            return Err(HscError::InvalidParameter(format!(
                "source ratio must be in (0, 1], got {}",
                self.source_ratio
            )));
        }
        if self.code_rate != 0.5 {
            return Err(HscError::InvalidParameter(format!(
                "only the rate-1/2 convolutional code is available, got rate {}",
                self.code_rate
            )));
        }
        if self.modulation_order != 16 {
            return Err(HscError::InvalidParameter(format!(
                "only 16-QAM is available, got order {}",
                self.modulation_order
            )));
        }
        Ok(())
    }

    /// Channel symbols per input real, `R`.
    pub fn rate(&self) -> f64 {
        let bits_per_symbol = (self.modulation_order as f64).log2();
        self.quantizer.bits_per_coeff as f64 * self.source_ratio / self.code_rate / bits_per_symbol
    }

    fn blocks(&self, n: usize) -> usize {
        if n == 0 {
            0
        } else if self.block_len == 0 {
            1
        } else {
            n.div_ceil(self.block_len)
        }
    }

    fn block_size(&self, n: usize) -> usize {
        if self.block_len == 0 {
            n.max(1)
        } else {
            self.block_len
        }
    }

    /// Symbols needed for `n` reals.
    pub fn symbol_count(&self, n: usize) -> SymbolCount {
        if n == 0 {
            return SymbolCount { payload: 0, padding: 0 };
        }
        let source_bits = source::compressed_len(n * self.quantizer.bits_per_coeff as usize, self.source_ratio);
        let coded_payload = 2 * source_bits;
        let payload = coded_payload.div_ceil(qam::BITS_PER_SYMBOL);
        let coded_total = 2 * (source_bits + conv::TAIL_BITS);
        let total = coded_total.div_ceil(qam::BITS_PER_SYMBOL);
        SymbolCount {
            payload,
            padding: total - payload,
        }
    }

    /// Worst-case absolute error per value for a block of range `range`
    /// after the quantizer and source stage over an error-free link.
    pub fn error_bound(&self, n: usize, range: BlockRange) -> f64 {
        let frac = source::coarse_step_fraction(n, self.quantizer.bits_per_coeff, self.source_ratio);
        (range.max - range.min) * frac + 1e-12
    }
}

/// Source side: quantize each block, source-code the concatenated codes,
/// then channel-encode.
pub fn encode_frame(values: &[f64], spec: &ChainSpec) -> Result<Frame> {
    spec.validate()?;
    let n = values.len();
    let bits_per = spec.quantizer.bits_per_coeff;
    let mut ranges = Vec::with_capacity(spec.blocks(n));
    let mut quantized = Vec::with_capacity(n * bits_per as usize);
    if n > 0 {
        for block in values.chunks(spec.block_size(n)) {
            let (bits, range) = quantize::quantize(block, &spec.quantizer)?;
            ranges.push(range);
            quantized.extend(bits);
        }
    }
    let source_bits = if n == 0 {
        Vec::new()
    } else {
        source::source_code(&quantized, bits_per, spec.source_ratio)?
    };
    let coded = if n == 0 { Vec::new() } else { conv::channel_encode(&source_bits) };
    let qam_pad = qam::padding_for(coded.len());
    let header = FrameHeader {
        d: 0,
        side: 0,
        bits_per_coeff: bits_per,
        source_ratio: spec.source_ratio,
        n_values: n as u32,
        block_len: spec.block_len as u32,
        source_bits: source_bits.len() as u32,
        tail_bits: if n == 0 { 0 } else { conv::TAIL_BITS as u8 },
        qam_pad: qam_pad as u8,
        ranges,
    };
    Ok(Frame { header, coded })
}

/// Receiver side inverse of [`encode_frame`].
pub fn decode_frame(frame: &Frame) -> Result<Vec<f64>> {
    let h = &frame.header;
    let n = h.n_values as usize;
    if n == 0 {
        return Ok(Vec::new());
    }
    let spec = ChainSpec {
        quantizer: QuantizerSpec::with_bits(h.bits_per_coeff),
        source_ratio: h.source_ratio,
        block_len: h.block_len as usize,
        ..ChainSpec::default()
    };
    spec.quantizer.validate()?;
    let source_bits = conv::channel_decode(&frame.coded)?;
    if source_bits.len() != h.source_bits as usize {
        return Err(HscError::dims("decoded source bits", h.source_bits, source_bits.len()));
    }
    let quantized = source::source_decode(&source_bits, n, h.bits_per_coeff, h.source_ratio)?;
    let block = spec.block_size(n);
    if h.ranges.len() != spec.blocks(n) {
        return Err(HscError::dims("frame block ranges", spec.blocks(n), h.ranges.len()));
    }
    let w = h.bits_per_coeff as usize;
    let mut out = Vec::with_capacity(n);
    for (i, range) in h.ranges.iter().enumerate() {
        let start = i * block;
        let end = (start + block).min(n);
        let vals = quantize::dequantize(&quantized[start * w..end * w], *range, &spec.quantizer)?;
        out.extend(vals);
    }
    Ok(out)
}

/// `g`: reals to channel symbols. The header travels as side information.
pub fn chain_transmit(values: &[f64], spec: &ChainSpec) -> Result<(FrameHeader, Symbols)> {
    let frame = encode_frame(values, spec)?;
    let (symbols, pad) = qam::qam16_modulate(&frame.coded);
    debug_assert_eq!(pad, frame.header.qam_pad as usize);
    Ok((frame.header, symbols))
}

/// `g⁻¹`: demodulate → channel decode → source decode → dequantize.
pub fn chain_receive(symbols: &[Complex64], header: &FrameHeader) -> Result<Vec<f64>> {
    let coded = qam::qam16_demodulate(symbols, header.qam_pad as usize);
    decode_frame(&Frame {
        header: header.clone(),
        coded,
    })
}

/// Full digital link: `g`, the channel with coherent equalization, `g⁻¹`.
pub fn chain_over_channel<R: Rng + ?Sized>(values: &[f64], spec: &ChainSpec, ch: &ChannelRealization, rng: &mut R) -> Result<Vec<f64>> {
    let (header, symbols) = chain_transmit(values, spec)?;
    let received = channel::transmit(&symbols, ch, rng);
    let equalized = channel::equalize(&received, ch)?;
    chain_receive(&equalized, &header)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rate_is_point_eight() {
        assert!((ChainSpec::default().rate() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn symbol_count_examples() {
        let spec = ChainSpec::default();
        let c = spec.symbol_count(616);
        assert_eq!(c.payload, 493);
        assert_eq!(c.total(), 496);
        assert_eq!(spec.symbol_count(0).total(), 0);
    }

    #[test]
    fn empty_block_gives_no_symbols() {
        let (h, s) = chain_transmit(&[], &ChainSpec::default()).unwrap();
        assert!(s.is_empty());
        assert!(chain_receive(&s, &h).unwrap().is_empty());
    }

    #[test]
    fn transmitted_length_matches_count() {
        let spec = ChainSpec::default();
        let vals: Vec<f64> = (0..616).map(|i| (i as f64).sin()).collect();
        let (_, s) = chain_transmit(&vals, &spec).unwrap();
        assert_eq!(s.len(), spec.symbol_count(616).total());
    }

    #[test]
    fn noiseless_round_trip_within_bound() {
        let spec = ChainSpec {
            block_len: 28,
            ..ChainSpec::default()
        };
        let vals: Vec<f64> = (0..280).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
        let (h, s) = chain_transmit(&vals, &spec).unwrap();
        let back = chain_receive(&s, &h).unwrap();
        for (blk, (orig, got)) in vals.chunks(28).zip(back.chunks(28)).enumerate() {
            let bound = spec.error_bound(vals.len(), h.ranges[blk]);
            for (a, b) in orig.iter().zip(got) {
                assert!((a - b).abs() <= bound);
            }
        }
    }

    #[test]
    fn rejects_unsupported_code_and_modulation() {
        let spec = ChainSpec {
            code_rate: 1.0 / 3.0,
            ..ChainSpec::default()
        };
        assert!(chain_transmit(&[1.0], &spec).is_err());
        let spec = ChainSpec {
            modulation_order: 4,
            ..ChainSpec::default()
        };
        assert!(chain_transmit(&[1.0], &spec).is_err());
    }
}
