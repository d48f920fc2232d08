//! Serialized CR frame. All integers and floats are big-endian; the coded
//! bitstream is packed most significant bit first, zero-filled in the last
//! byte. See `docs/frame-format.md` for the byte table.

use crate::error::{HscError, Result};

use super::quantize::BlockRange;
use super::Bitstream;

pub const FRAME_MAGIC: &[u8; 4] = b"HSCF";
pub const FRAME_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameHeader {
    /// CR rank; 0 outside the CR pipeline.
    pub d: u16,
    /// Image side `L`; 0 outside the CR pipeline.
    pub side: u16,
    pub bits_per_coeff: u8,
    pub source_ratio: f64,
    pub n_values: u32,
    pub block_len: u32,
    /// Bits leaving the source stage (before channel coding).
    pub source_bits: u32,
    /// Termination bits appended by the channel code.
    pub tail_bits: u8,
    /// Zero bits appended to fill the last 16-QAM symbol.
    pub qam_pad: u8,
    pub ranges: Vec<BlockRange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub header: FrameHeader,
    pub coded: Bitstream,
}

pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i))))
        .collect()
}

pub fn unpack_bits(bytes: &[u8], n_bits: usize) -> Bitstream {
    (0..n_bits).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect()
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(HscError::format("frame", format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Frame {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(40 + 16 * h.ranges.len() + self.coded.len() / 8);
        out.extend_from_slice(FRAME_MAGIC);
        out.push(FRAME_VERSION);
        out.extend_from_slice(&h.d.to_be_bytes());
        out.extend_from_slice(&h.side.to_be_bytes());
        out.push(h.bits_per_coeff);
        out.extend_from_slice(&h.source_ratio.to_be_bytes());
        out.extend_from_slice(&h.n_values.to_be_bytes());
        out.extend_from_slice(&h.block_len.to_be_bytes());
        out.extend_from_slice(&h.source_bits.to_be_bytes());
        out.push(h.tail_bits);
        out.push(h.qam_pad);
        out.extend_from_slice(&(h.ranges.len() as u32).to_be_bytes());
        for r in &h.ranges {
            out.extend_from_slice(&r.min.to_be_bytes());
            out.extend_from_slice(&r.max.to_be_bytes());
        }
        out.extend_from_slice(&(self.coded.len() as u32).to_be_bytes());
        out.extend(pack_bits(&self.coded));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Frame> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != FRAME_MAGIC {
            return Err(HscError::format("frame", "bad magic"));
        }
        let version = r.u8()?;
        if version != FRAME_VERSION {
            return Err(HscError::format("frame", format!("unsupported version {version}")));
        }
        let d = r.u16()?;
        let side = r.u16()?;
        let bits_per_coeff = r.u8()?;
        let source_ratio = r.f64()?;
        let n_values = r.u32()?;
        let block_len = r.u32()?;
        let source_bits = r.u32()?;
        let tail_bits = r.u8()?;
        let qam_pad = r.u8()?;
        let n_ranges = r.u32()? as usize;
        let mut ranges = Vec::with_capacity(n_ranges.min(1 << 16));
        for _ in 0..n_ranges {
            let min = r.f64()?;
            let max = r.f64()?;
            ranges.push(BlockRange { min, max });
        }
        let n_bits = r.u32()? as usize;
        let payload = r.take(n_bits.div_ceil(8))?;
        if r.pos != bytes.len() {
            return Err(HscError::format("frame", "trailing bytes"));
        }
        Ok(Frame {
            header: FrameHeader {
                d,
                side,
                bits_per_coeff,
                source_ratio,
                n_values,
                block_len,
                source_bits,
                tail_bits,
                qam_pad,
                ranges,
            },
            coded: unpack_bits(payload, n_bits),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Frame {
        Frame {
            header: FrameHeader {
                d: 2,
                side: 3,
                bits_per_coeff: 8,
                source_ratio: 0.2,
                n_values: 12,
                block_len: 3,
                source_bits: 20,
                tail_bits: 6,
                qam_pad: 0,
                ranges: vec![BlockRange { min: -1.0, max: 0.5 }; 4],
            },
            coded: (0..52).map(|i| (i % 3 == 1) as u8).collect(),
        }
    }

    #[test]
    fn byte_layout_prefix() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"HSCF");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..7], &[0, 2]);
        assert_eq!(&bytes[7..9], &[0, 3]);
        assert_eq!(bytes[9], 8);
        assert_eq!(&bytes[10..18], &0.2f64.to_be_bytes());
        // 36-byte fixed header + 4 ranges + bit count + 7 payload bytes
        assert_eq!(bytes.len(), 36 + 64 + 4 + 7);
    }

    #[test]
    fn round_trip() {
        let f = sample();
        assert_eq!(Frame::from_bytes(&f.to_bytes()).unwrap(), f);
    }

    #[test]
    fn detects_corruption() {
        let mut b = sample().to_bytes();
        b[0] = b'X';
        assert!(Frame::from_bytes(&b).is_err());
        let b = sample().to_bytes();
        assert!(Frame::from_bytes(&b[..b.len() - 1]).is_err());
    }

    #[test]
    fn msb_first_packing() {
        assert_eq!(pack_bits(&[1, 0, 0, 0, 0, 0, 0, 1, 1]), vec![0x81, 0x80]);
        assert_eq!(unpack_bits(&[0x81, 0x80], 9), vec![1, 0, 0, 0, 0, 0, 0, 1, 1]);
    }
}
