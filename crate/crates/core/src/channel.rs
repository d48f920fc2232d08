//! Block-fading AWGN channel.
//!
//! `y = h·g·x + n` with `h ~ CN(0, μ)` drawn once per transmitted block,
//! `n ~ CN(0, σ²I)` and `g = 1` by default (the power constraint is applied
//! once, at power normalization) or `g = √P` in literal mode. Noise power
//! follows from the target SNR as `σ² = |h|²P / 10^(SNR/10)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{HscError, Result};

pub type Symbols = Vec<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelMode {
    /// `σ² → 0`, `h → 1`: the block arrives unchanged.
    ErrorFree,
    /// `h = 1`, noise at the given SNR.
    Awgn { snr_db: f64 },
    /// `h ~ CN(0, μ)` per block plus noise at the given SNR.
    SlowFading { snr_db: f64, mu: f64 },
}

impl ChannelMode {
    pub fn snr_db(&self) -> Option<f64> {
        match *self {
            ChannelMode::ErrorFree => None,
            ChannelMode::Awgn { snr_db } | ChannelMode::SlowFading { snr_db, .. } => Some(snr_db),
        }
    }

    pub fn with_snr(&self, snr_db: f64) -> ChannelMode {
        match *self {
            ChannelMode::ErrorFree => ChannelMode::ErrorFree,
            ChannelMode::Awgn { .. } => ChannelMode::Awgn { snr_db },
            ChannelMode::SlowFading { mu, .. } => ChannelMode::SlowFading { snr_db, mu },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelMode::ErrorFree => "error_free",
            ChannelMode::Awgn { .. } => "awgn",
            ChannelMode::SlowFading { .. } => "fading",
        }
    }
}

/// One block's channel state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub h: Complex64,
    pub sigma2: f64,
    pub power: f64,
    pub mu: f64,
    /// Multiply by `√P` on the channel, as written in the literal system model.
    pub apply_power: bool,
    pub error_free: bool,
}

impl ChannelRealization {
    pub fn error_free(power: f64) -> Self {
        ChannelRealization {
            h: Complex64::new(1.0, 0.0),
            sigma2: 0.0,
            power,
            mu: 1.0,
            apply_power: false,
            error_free: true,
        }
    }

    /// Draws `h` (for fading) and derives `σ²` from the target SNR.
    pub fn draw<R: Rng + ?Sized>(mode: ChannelMode, power: f64, rng: &mut R) -> Result<Self> {
        if !(power > 0.0) {
            return Err(HscError::InvalidParameter(format!("transmit power must be positive, got {power}")));
        }
        let (h, mu, snr_db) = match mode {
            ChannelMode::ErrorFree => return Ok(Self::error_free(power)),
            ChannelMode::Awgn { snr_db } => (Complex64::new(1.0, 0.0), 1.0, snr_db),
            ChannelMode::SlowFading { snr_db, mu } => {
                if !(mu > 0.0) {
                    return Err(HscError::InvalidParameter(format!("average gain must be positive, got {mu}")));
                }
                (sample_fading(mu, rng), mu, snr_db)
            }
        };
        let sigma2 = snr_to_noise_power(snr_db, h, power)?;
        Ok(ChannelRealization {
            h,
            sigma2,
            power,
            mu,
            apply_power: false,
            error_free: false,
        })
    }

    pub fn literal_power(mut self, on: bool) -> Self {
        self.apply_power = on;
        self
    }

    fn tx_gain(&self) -> f64 {
        if self.apply_power {
            self.power.sqrt()
        } else {
            1.0
        }
    }

    /// Total complex multiplier applied to the input, `h·g`.
    pub fn gain(&self) -> Complex64 {
        self.h * self.tx_gain()
    }
}

/// `h ~ CN(0, μ)`: real and imaginary parts each `N(0, μ/2)`.
pub fn sample_fading<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Complex64 {
    let s = (mu / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `n ~ CN(0, σ²)`.
pub fn sample_noise<R: Rng + ?Sized>(sigma2: f64, rng: &mut R) -> Complex64 {
    sample_fading(sigma2, rng)
}

/// `σ² = |h|²P / 10^(SNR/10)`.
pub fn snr_to_noise_power(snr_db: f64, h: Complex64, power: f64) -> Result<f64> {
    let gain = h.norm_sqr();
    if gain == 0.0 {
        return Err(HscError::ZeroFading);
    }
    if !(power > 0.0) {
        return Err(HscError::InvalidParameter(format!("transmit power must be positive, got {power}")));
    }
    Ok(gain * power / 10f64.powf(snr_db / 10.0))
}

/// `10·log10(|h|²P/σ²)`.
pub fn noise_power_to_snr(sigma2: f64, h: Complex64, power: f64) -> f64 {
    10.0 * (h.norm_sqr() * power / sigma2).log10()
}

pub fn transmit<R: Rng + ?Sized>(x: &[Complex64], ch: &ChannelRealization, rng: &mut R) -> Symbols {
    if ch.error_free {
        return x.to_vec();
    }
    let gain = ch.gain();
    x.iter().map(|&s| gain * s + sample_noise(ch.sigma2, rng)).collect()
}

/// Coherent equalization with perfect CSI: `y / (h·g)`.
pub fn equalize(y: &[Complex64], ch: &ChannelRealization) -> Result<Symbols> {
    if ch.error_free {
        return Ok(y.to_vec());
    }
    let gain = ch.gain();
    if gain.norm_sqr() == 0.0 {
        return Err(HscError::ZeroFading);
    }
    Ok(y.iter().map(|&s| s / gain).collect())
}

/// Affine view of what the receiver hands to its decoder: `gain·x + offset`.
/// Training uses this to differentiate through the channel.
#[derive(Debug, Clone)]
pub struct LinkEffect {
    pub gain: Complex64,
    pub offset: Symbols,
}

impl LinkEffect {
    pub fn identity(len: usize) -> Self {
        LinkEffect {
            gain: Complex64::new(1.0, 0.0),
            offset: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Symbols {
        x.iter().zip(&self.offset).map(|(&s, &o)| self.gain * s + o).collect()
    }
}

/// Draws the noise for a `len`-symbol block and folds equalization in.
pub fn link_effect<R: Rng + ?Sized>(ch: &ChannelRealization, len: usize, equalized: bool, rng: &mut R) -> Result<LinkEffect> {
    if ch.error_free {
        return Ok(LinkEffect::identity(len));
    }
    let gain = ch.gain();
    let noise: Symbols = (0..len).map(|_| sample_noise(ch.sigma2, rng)).collect();
    if equalized {
        if gain.norm_sqr() == 0.0 {
            return Err(HscError::ZeroFading);
        }
        Ok(LinkEffect {
            gain: Complex64::new(1.0, 0.0),
            offset: noise.into_iter().map(|n| n / gain).collect(),
        })
    } else {
        Ok(LinkEffect { gain, offset: noise })
    }
}

/// Independent generators for the SR and CR paths: fading and noise draws
/// for each link come from separate ChaCha streams of one seed.
#[derive(Debug, Clone)]
pub struct ChannelStreams {
    pub sr_fading: ChaCha8Rng,
    pub sr_noise: ChaCha8Rng,
    pub cr_fading: ChaCha8Rng,
    pub cr_noise: ChaCha8Rng,
}

impl ChannelStreams {
    pub fn new(seed: u64) -> Self {
        Self::for_item(seed, 0)
    }

    /// Streams for the `item`-th transmission under one seed, so that every
    /// condition evaluated with the same seed sees the same draws.
    pub fn for_item(seed: u64, item: u64) -> Self {
        let stream = |id: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(4 * item + id);
            r
        };
        ChannelStreams {
            sr_fading: stream(1),
            sr_noise: stream(2),
            cr_fading: stream(3),
            cr_noise: stream(4),
        }
    }
}
