//! Binary portable graymap / pixmap (P5 / P6), 8-bit.

use std::path::Path;

use ndarray::Array2;

use crate::error::{HscError, Result};
use crate::image::{Image, RgbImage};

fn level(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_pgm(image: &Image) -> Vec<u8> {
    let l = image.side();
    let mut out = format!("P5\n{l} {l}\n255\n").into_bytes();
    out.extend(image.pixels().iter().map(|&p| level(p)));
    out
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let l = image.side();
    let mut out = format!("P6\n{l} {l}\n255\n").into_bytes();
    let ch = image.channels();
    for r in 0..l {
        for c in 0..l {
            out.extend(ch.iter().map(|im| level(im.pixels()[[r, c]])));
        }
    }
    out
}

fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < count {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(HscError::format("pnm", "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    Ok((tokens, pos + 1))
}

/// Square P5 only.
pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let (t, start) = header_tokens(bytes, 4)?;
    if t[0] != "P5" {
        return Err(HscError::format("pnm", format!("expected P5, found {}", t[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| HscError::format("pnm", format!("bad number {s}")));
    let (w, h, max) = (parse(&t[1])?, parse(&t[2])?, parse(&t[3])?);
    if w != h || max != 255 {
        return Err(HscError::format("pnm", format!("unsupported {w}x{h} max {max}")));
    }
    let raster = bytes.get(start..).unwrap_or(&[]);
    if raster.len() != w * h {
        return Err(HscError::format("pnm", format!("expected {} pixels, found {}", w * h, raster.len())));
    }
    Image::new(Array2::from_shape_vec((h, w), raster.iter().map(|&b| b as f64 / 255.0).collect()).unwrap())
}

pub fn write_pgm(path: &Path, image: &Image) -> Result<()> {
    std::fs::write(path, encode_pgm(image))?;
    Ok(())
}

pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<()> {
    std::fs::write(path, encode_ppm(image))?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    decode_pgm(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_eight_bits() {
        let img = Image::from_flat(2, &[0.0, 0.5, 1.0, 0.2]).unwrap();
        let bytes = encode_pgm(&img);
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        let back = decode_pgm(&bytes).unwrap();
        assert_eq!(back.to_flat(), vec![0.0, 128.0 / 255.0, 1.0, 51.0 / 255.0]);
        assert_eq!(encode_pgm(&back), bytes);
    }

    #[test]
    fn comments_and_errors() {
        let mut b = b"P5\n# note\n1 1\n255\n".to_vec();
        b.push(255);
        assert_eq!(decode_pgm(&b).unwrap().to_flat(), vec![1.0]);
        assert!(decode_pgm(b"P6\n1 1\n255\n\x00\x00\x00").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
    }

    #[test]
    fn pixmap_layout() {
        let g = Image::from_flat(1, &[1.0]).unwrap();
        let z = Image::zeros(1);
        let rgb = RgbImage::new(vec![g, z.clone(), z]).unwrap();
        assert_eq!(encode_ppm(&rgb), b"P6\n1 1\n255\n\xff\x00\x00".to_vec());
    }
}
