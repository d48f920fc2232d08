//! Binary checkpoints, little-endian throughout.
//!
//! ```text
//! "HSCM" | version u16 | kind u8 (0 codec, 1 adapter pair)
//! codec:   side u32 | k u32 | variant u8 | codebook size u32 | power f64
//!          | n_hidden u32 | hidden widths u32…
//!          | layer list | codebook flag u8 [rows u32 | cols u32 | f64…]
//! adapter: d u32 | encoder layer list | decoder layer list
//! layer list: count u32, then per layer
//!          inputs u32 | outputs u32 | activation u8 | weight f64… | bias f64…
//! ```
//! Weights are stored row-major, `inputs x outputs`.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{HscError, Result};

use super::model::{ArchSpec, SemanticCodec, Variant};
use super::nn::{Activation, Dense, Mlp};
use super::vq::Codebook;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HSCM";
pub const CHECKPOINT_VERSION: u16 = 1;
pub const KIND_CODEC: u8 = 0;
pub const KIND_ADAPTER: u8 = 1;

#[derive(Default)]
pub struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn header(kind: u8) -> Self {
        let mut w = Writer::default();
        w.buf.extend_from_slice(CHECKPOINT_MAGIC);
        w.u16(CHECKPOINT_VERSION);
        w.u8(kind);
        w
    }
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.f64(*v);
        }
    }
    pub fn layers<'a>(&mut self, layers: impl ExactSizeIterator<Item = &'a Dense>) {
        self.u32(layers.len());
        for l in layers {
            self.u32(l.inputs());
            self.u32(l.outputs());
            self.u8(l.activation.code());
            self.f64s(l.weight.iter());
            self.f64s(l.bias.iter());
        }
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic, version and kind.
    pub fn open(buf: &'a [u8], kind: u8) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(HscError::format("checkpoint", "bad magic"));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(HscError::format("checkpoint", format!("unsupported version {version}")));
        }
        let got = r.u8()?;
        if got != kind {
            return Err(HscError::format("checkpoint", format!("expected kind {kind}, found {got}")));
        }
        Ok(r)
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(HscError::format("checkpoint", format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| HscError::format("checkpoint", "size overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    pub fn layers(&mut self) -> Result<Vec<Dense>> {
        let n = self.u32()?;
        let mut out = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let inputs = self.u32()?;
            let outputs = self.u32()?;
            let code = self.u8()?;
            let activation = Activation::from_code(code).ok_or_else(|| HscError::format("checkpoint", format!("unknown activation {code}")))?;
            let weight = Array2::from_shape_vec((inputs, outputs), self.f64s(inputs * outputs)?).unwrap();
            let bias = Array1::from(self.f64s(outputs)?);
            out.push(Dense { weight, bias, activation });
        }
        Ok(out)
    }
    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(HscError::format("checkpoint", "trailing bytes"));
        }
        Ok(())
    }
}

/// Fails unless consecutive layers chain and the ends match `sizes`.
pub fn check_chain(layers: &[Dense], sizes: &[usize], what: &str) -> Result<()> {
    let got: Vec<usize> = Mlp { layers: layers.to_vec() }.sizes();
    let chained = layers.windows(2).all(|w| w[0].outputs() == w[1].inputs());
    if !chained || got != sizes {
        return Err(HscError::format("checkpoint", format!("{what}: layer sizes {got:?}, expected {sizes:?}")));
    }
    Ok(())
}

pub fn codec_to_bytes(codec: &SemanticCodec) -> Vec<u8> {
    let mut w = Writer::header(KIND_CODEC);
    let a = &codec.arch;
    w.u32(a.side);
    w.u32(a.k);
    match a.variant {
        Variant::Vae => {
            w.u8(0);
            w.u32(0);
        }
        Variant::VqVae { codebook_size } => {
            w.u8(1);
            w.u32(codebook_size);
        }
    }
    w.f64(codec.power);
    w.u32(a.hidden.len());
    for &h in &a.hidden {
        w.u32(h);
    }
    let layers = codec
        .trunk
        .layers
        .iter()
        .chain(std::iter::once(&codec.mean_head))
        .chain(codec.log_var_head.iter())
        .chain(codec.decoder.layers.iter())
        .collect::<Vec<_>>();
    w.layers(layers.into_iter());
    match &codec.codebook {
        None => w.u8(0),
        Some(book) => {
            w.u8(1);
            w.u32(book.entries.nrows());
            w.u32(book.entries.ncols());
            w.f64s(book.entries.iter());
        }
    }
    w.buf
}

pub fn codec_from_bytes(bytes: &[u8]) -> Result<SemanticCodec> {
    let mut r = Reader::open(bytes, KIND_CODEC)?;
    let side = r.u32()?;
    let k = r.u32()?;
    let variant = match (r.u8()?, r.u32()?) {
        (0, _) => Variant::Vae,
        (1, n) => Variant::VqVae { codebook_size: n },
        (v, _) => return Err(HscError::format("checkpoint", format!("unknown variant {v}"))),
    };
    let power = r.f64()?;
    let n_hidden = r.u32()?;
    let hidden = (0..n_hidden).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let arch = ArchSpec { side, hidden, k, variant };
    arch.validate().map_err(|e| HscError::format("checkpoint", e.to_string()))?;
    let mut layers = r.layers()?;
    let n_trunk = arch.hidden.len();
    let n_heads = if variant == Variant::Vae { 2 } else { 1 };
    let expected = n_trunk + n_heads + arch.hidden.len() + 1;
    if layers.len() != expected {
        return Err(HscError::format("checkpoint", format!("{} layers, expected {expected}", layers.len())));
    }
    let decoder: Vec<Dense> = layers.split_off(n_trunk + n_heads);
    let log_var_head = (n_heads == 2).then(|| layers.pop().unwrap());
    let mean_head = layers.pop().unwrap();
    check_chain(&layers, &arch.encoder_sizes(), "encoder trunk")?;
    let head_sizes = [*arch.hidden.last().unwrap(), arch.latent_len()];
    check_chain(std::slice::from_ref(&mean_head), &head_sizes, "mean head")?;
    if let Some(h) = &log_var_head {
        check_chain(std::slice::from_ref(h), &head_sizes, "log-variance head")?;
    }
    check_chain(&decoder, &arch.decoder_sizes(), "decoder")?;
    let codebook = match r.u8()? {
        0 => None,
        1 => {
            let rows = r.u32()?;
            let cols = r.u32()?;
            let entries = Array2::from_shape_vec((rows, cols), r.f64s(rows * cols)?).unwrap();
            Some(Codebook::new(entries)?)
        }
        f => return Err(HscError::format("checkpoint", format!("bad codebook flag {f}"))),
    };
    match (variant, &codebook) {
        (Variant::Vae, None) => {}
        (Variant::VqVae { codebook_size }, Some(b)) if b.len() == codebook_size && b.entries.ncols() == arch.latent_len() => {}
        _ => return Err(HscError::format("checkpoint", "codebook does not match the architecture")),
    }
    r.finish()?;
    let codec = SemanticCodec {
        arch,
        power,
        trunk: Mlp { layers },
        mean_head,
        log_var_head,
        decoder: Mlp { layers: decoder },
        codebook,
    };
    if !codec.is_finite() {
        return Err(HscError::format("checkpoint", "non-finite weights"));
    }
    Ok(codec)
}

pub fn save_codec(codec: &SemanticCodec, path: &Path) -> Result<()> {
    std::fs::write(path, codec_to_bytes(codec))?;
    Ok(())
}

pub fn load_codec(path: &Path) -> Result<SemanticCodec> {
    codec_from_bytes(&std::fs::read(path)?)
}
