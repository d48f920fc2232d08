//! Fast self-checks of the analytical core, run by `hsc verify`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hsc::chain::conv::{channel_decode, channel_encode};
use hsc::chain::qam::{qam16_demodulate, qam16_modulate};
use hsc::chain::quantize::block_range;
use hsc::chain::{chain_over_channel, ChainSpec};
use hsc::channel::{equalize, transmit, ChannelMode, ChannelRealization};
use hsc::codec::gradcheck::grad_check_mlp;
use hsc::codec::nn::{Activation, Mlp};
use hsc::codec::power_normalize;
use hsc::cr::{max_feasible_d, payload_ratio};
use hsc::recompose::{achieved_mse, closed_form_mse, eig_psd, error_matrix, optimal_projection, recompose};
use hsc::{Image, Result};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_image(rng: &mut ChaCha8Rng, side: usize) -> Image {
    Image::new(Array2::from_shape_fn((side, side), |_| rng.random::<f64>())).unwrap()
}

fn closed_form(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut full = 0.0f64;
    for _ in 0..10 {
        let (x, xh) = (random_image(rng, 28), random_image(rng, 28));
        let spec = eig_psd(&error_matrix(&x, &xh)?)?;
        for d in 0..=28 {
            let a = optimal_projection(&spec, d)?;
            let xt = recompose(&a, a.project(&x)?.view(), &xh)?;
            let got = achieved_mse(&x, &xt)?.raw;
            let want = closed_form_mse(&spec, d)?.raw;
            if d == 28 {
                full = full.max(got);
            } else {
                worst = worst.max((got - want).abs() / want.abs().max(1e-300));
            }
        }
    }
    Ok(Check {
        name: "closed-form MSE",
        passed: worst < 1e-8 && full < 1e-10,
        detail: format!("max rel err {worst:.2e}, full-rank MSE {full:.2e}"),
    })
}

fn eta() -> Result<Check> {
    let mut ok = true;
    for d in 0..=28 {
        let e = payload_ratio(128, 0.8, 28, d)?.eta;
        ok &= e == (160.0 + 56.0 * d as f64) / 784.0;
    }
    let dmax = max_feasible_d(128, 0.8, 28);
    Ok(Check {
        name: "payload ratio",
        passed: ok && dmax == 11,
        detail: format!("d_max {dmax}"),
    })
}

fn chain(rng: &mut ChaCha8Rng) -> Result<Check> {
    let spec = ChainSpec::default();
    let clean = ChannelRealization::error_free(1.0);
    let mut within = true;
    for _ in 0..100 {
        let v: Vec<f64> = (0..56).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = chain_over_channel(&v, &spec, &clean, rng)?;
        let bound = spec.error_bound(v.len(), block_range(&v, &spec.quantizer));
        within &= v.iter().zip(&out).all(|(a, b)| (a - b).abs() <= bound);
    }
    let ch = ChannelRealization::draw(ChannelMode::Awgn { snr_db: 20.0 }, 1.0, rng)?;
    let bits: Vec<u8> = (0..100_000).map(|_| rng.random_range(0..2u8)).collect();
    let (sym, pad) = qam16_modulate(&channel_encode(&bits));
    let back = channel_decode(&qam16_demodulate(&equalize(&transmit(&sym, &ch, rng), &ch)?, pad))?;
    let ber = bits.iter().zip(&back).filter(|(a, b)| a != b).count() as f64 / bits.len() as f64;
    Ok(Check {
        name: "digital chain",
        passed: within && ber < 1e-4,
        detail: format!("noiseless bound {}, BER at 20 dB {ber:.1e}", if within { "held" } else { "violated" }),
    })
}

fn gradients(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mlp = Mlp::init(&[6, 8, 4], Activation::Relu, Activation::Sigmoid, rng);
        let x = Array2::from_shape_fn((4, 6), |_| rng.random_range(-1.0..1.0));
        let t = Array2::from_shape_fn((4, 4), |_| rng.random::<f64>());
        worst = worst.max(grad_check_mlp(&mlp, x.view(), t.view())?.max_rel_error);
    }
    Ok(Check {
        name: "gradient check",
        passed: worst < 1e-4,
        detail: format!("max rel err {worst:.2e}"),
    })
}

fn power(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(1..256);
        let p = rng.random_range(0.1..4.0);
        let raw: Vec<Complex64> = (0..k)
            .map(|_| Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
            .collect();
        let z = power_normalize(&raw, p)?;
        worst = worst.max((z.energy() / k as f64 / p - 1.0).abs());
    }
    Ok(Check {
        name: "power constraint",
        passed: worst < 1e-9,
        detail: format!("max rel err {worst:.2e}"),
    })
}

pub fn run_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        closed_form(&mut rng)?,
        eta()?,
        chain(&mut rng)?,
        gradients(&mut rng)?,
        power(&mut rng)?,
    ])
}
