//! Browser bindings: recomposition at a chosen rank, the load curve, and the
//! digital chain's error rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use hsc::chain::conv::{channel_decode, channel_encode};
use hsc::chain::qam::{qam16_demodulate, qam16_modulate};
use hsc::channel::{equalize, transmit, ChannelMode, ChannelRealization};
use hsc::cr::{max_feasible_d, payload_ratio};
use hsc::data::synth::render_digit;
use hsc::recompose::{achieved_mse, closed_form_mse, eig_psd, error_matrix, optimal_projection, recompose};
use hsc::Image;

fn js_err(e: hsc::HscError) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Stand-in for a decoder output: two box blurs plus faint noise.
fn degrade(x: &Image, rng: &mut ChaCha8Rng) -> Image {
    let n = x.side();
    let mut p = x.pixels().to_owned();
    for _ in 0..2 {
        let src = p.clone();
        for r in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                let mut cnt = 0.0;
                for rr in r.saturating_sub(1)..(r + 2).min(n) {
                    for cc in c.saturating_sub(1)..(c + 2).min(n) {
                        acc += src[[rr, cc]];
                        cnt += 1.0;
                    }
                }
                p[[r, c]] = acc / cnt;
            }
        }
    }
    p.mapv_inplace(|v| (v + rng.random_range(-0.03..0.03)).clamp(0.0, 1.0));
    Image::new(p).expect("finite")
}

#[wasm_bindgen]
pub struct Recomposition {
    original: Vec<f64>,
    generated: Vec<f64>,
    recomposed: Vec<f64>,
    mse_generated: f64,
    mse_recomposed: f64,
    mse_closed_form: f64,
}

#[wasm_bindgen]
impl Recomposition {
    pub fn original(&self) -> Vec<f64> {
        self.original.clone()
    }
    pub fn generated(&self) -> Vec<f64> {
        self.generated.clone()
    }
    pub fn recomposed(&self) -> Vec<f64> {
        self.recomposed.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn mse_generated(&self) -> f64 {
        self.mse_generated
    }
    #[wasm_bindgen(getter)]
    pub fn mse_recomposed(&self) -> f64 {
        self.mse_recomposed
    }
    #[wasm_bindgen(getter)]
    pub fn mse_closed_form(&self) -> f64 {
        self.mse_closed_form
    }
}

/// A digit, its degraded copy, and the rank-`d` recomposition with exact CR.
#[wasm_bindgen]
pub fn recompose_digit(digit: u8, seed: u64, d: usize) -> Result<Recomposition, JsValue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = render_digit(digit % 10, &mut rng);
    let xh = degrade(&x, &mut rng);
    let spec = eig_psd(&error_matrix(&x, &xh).map_err(js_err)?).map_err(js_err)?;
    let a = optimal_projection(&spec, d).map_err(js_err)?;
    let xt = recompose(&a, a.project(&x).map_err(js_err)?.view(), &xh).map_err(js_err)?;
    Ok(Recomposition {
        mse_generated: achieved_mse(&x, &xh).map_err(js_err)?.per_pixel,
        mse_recomposed: achieved_mse(&x, &xt).map_err(js_err)?.per_pixel,
        mse_closed_form: closed_form_mse(&spec, d).map_err(js_err)?.per_pixel,
        original: x.to_flat(),
        generated: xh.to_flat(),
        recomposed: xt.to_flat(),
    })
}

/// Compression ratio for `d = 0..=side`.
#[wasm_bindgen]
pub fn eta_curve(k: usize, rate: f64, side: usize) -> Result<Vec<f64>, JsValue> {
    (0..=side)
        .map(|d| payload_ratio(k, rate, side, d).map(|r| r.eta).map_err(js_err))
        .collect()
}

#[wasm_bindgen]
pub fn feasible_rank(k: usize, rate: f64, side: usize) -> usize {
    max_feasible_d(k, rate, side)
}

/// Coded and uncoded bit error rates of the convolutional code over 16-QAM
/// on AWGN, `[uncoded, coded]`.
#[wasm_bindgen]
pub fn chain_ber(snr_db: f64, n_bits: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = ChannelRealization::draw(ChannelMode::Awgn { snr_db }, 1.0, &mut rng).map_err(js_err)?;
    let bits: Vec<u8> = (0..n_bits.max(1)).map(|_| rng.random_range(0..2u8)).collect();
    let coded = channel_encode(&bits);
    let (sym, pad) = qam16_modulate(&coded);
    let y = equalize(&transmit(&sym, &ch, &mut rng), &ch).map_err(js_err)?;
    let hard = qam16_demodulate(&y, pad);
    let raw = hard.iter().zip(&coded).filter(|(a, b)| a != b).count() as f64 / coded.len() as f64;
    let decoded = channel_decode(&hard).map_err(js_err)?;
    let post = bits.iter().zip(&decoded).filter(|(a, b)| a != b).count() as f64 / bits.len() as f64;
    Ok(vec![raw, post])
}
