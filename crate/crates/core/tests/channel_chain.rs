use hsc::chain::conv::{channel_decode, channel_encode};
use hsc::chain::qam::{qam16_demodulate, qam16_modulate};
use hsc::chain::quantize::{block_range, dequantize, quantize, QuantizerSpec};
use hsc::chain::source::{source_code, source_decode};
use hsc::chain::{chain_over_channel, ChainSpec};
use hsc::channel::{equalize, sample_fading, transmit, ChannelMode, ChannelRealization, ChannelStreams};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fading_gain_has_unit_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;
    let mean = (0..n).map(|_| sample_fading(1.0, &mut rng).norm_sqr()).sum::<f64>() / n as f64;
    assert!((0.97..=1.03).contains(&mean), "E|h|² = {mean}");
}

#[test]
fn noise_power_tracks_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for snr_db in [0.0, 5.0, 10.0, 20.0] {
        for mode in [ChannelMode::Awgn { snr_db }, ChannelMode::SlowFading { snr_db, mu: 1.0 }] {
            let ch = ChannelRealization::draw(mode, 2.0, &mut rng).unwrap();
            let expected = ch.h.norm_sqr() * 2.0 / 10f64.powf(snr_db / 10.0);
            assert!((ch.sigma2 - expected).abs() <= 1e-12 * expected);
            let zeros = vec![Complex64::new(0.0, 0.0); 50_000];
            let y = transmit(&zeros, &ch, &mut rng);
            let measured = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
            assert!((measured / expected - 1.0).abs() < 0.03, "{mode:?}: {measured} vs {expected}");
        }
    }
}

#[test]
fn equalized_noise_is_independent_of_gain() {
    // |h|² cancels: after y/h the noise power is P / snr
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut acc = 0.0;
    let mut count = 0;
    for _ in 0..200 {
        let ch = ChannelRealization::draw(ChannelMode::SlowFading { snr_db: 10.0, mu: 1.0 }, 1.0, &mut rng).unwrap();
        let x = vec![Complex64::new(0.0, 0.0); 500];
        let y = equalize(&transmit(&x, &ch, &mut rng), &ch).unwrap();
        acc += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
        count += y.len();
    }
    let measured = acc / count as f64;
    assert!((measured / 0.1 - 1.0).abs() < 0.03, "{measured}");
}

#[test]
fn error_free_channel_is_identity() {
    let ch = ChannelRealization::draw(ChannelMode::ErrorFree, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let x: Vec<Complex64> = (0..10).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
    assert_eq!(transmit(&x, &ch, &mut ChaCha8Rng::seed_from_u64(1)), x);
}

#[test]
fn streams_are_repeatable_and_distinct() {
    let mut a = ChannelStreams::for_item(3, 5);
    let mut b = ChannelStreams::for_item(3, 5);
    let mut c = ChannelStreams::for_item(3, 6);
    let va: u64 = a.sr_noise.random();
    assert_eq!(va, b.sr_noise.random::<u64>());
    assert_ne!(va, c.sr_noise.random::<u64>());
    assert_ne!(a.sr_fading.random::<u64>(), a.cr_fading.random::<u64>());
}

#[test]
fn coded_ber_at_20_db() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let ch = ChannelRealization::draw(ChannelMode::Awgn { snr_db: 20.0 }, 1.0, &mut rng).unwrap();
    let mut bits_sent = 0usize;
    let mut errors = 0usize;
    while bits_sent < 100_000 {
        let bits: Vec<u8> = (0..5000).map(|_| rng.random_range(0..2u8)).collect();
        let (sym, pad) = qam16_modulate(&channel_encode(&bits));
        let y = equalize(&transmit(&sym, &ch, &mut rng), &ch).unwrap();
        let decoded = channel_decode(&qam16_demodulate(&y, pad)).unwrap();
        errors += bits.iter().zip(&decoded).filter(|(a, b)| a != b).count();
        bits_sent += bits.len();
    }
    let ber = errors as f64 / bits_sent as f64;
    assert!(ber < 1e-4, "BER {ber}");
}

#[test]
fn noiseless_chain_respects_step_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = ChainSpec::default();
    let ch = ChannelRealization::error_free(1.0);
    for _ in 0..1000 {
        let n = rng.random_range(1..80);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let out = chain_over_channel(&v, &spec, &ch, &mut rng).unwrap();
        let bound = spec.error_bound(n, block_range(&v, &spec.quantizer));
        let worst = v.iter().zip(&out).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= bound, "n {n}: {worst} > {bound}");
    }
}

proptest! {
    #[test]
    fn quantizer_within_half_step(v in prop::collection::vec(-100.0f64..100.0, 1..64), bits in 1u8..=12) {
        let q = QuantizerSpec::with_bits(bits);
        let (stream, range) = quantize(&v, &q).unwrap();
        prop_assert_eq!(stream.len(), v.len() * bits as usize);
        let back = dequantize(&stream, range, &q).unwrap();
        let half = range.step(bits) / 2.0;
        for (a, b) in v.iter().zip(&back) {
            prop_assert!((a - b).abs() <= half * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn source_stage_keeps_ratio(codes in prop::collection::vec(0u32..256, 1..200), ratio in 0.05f64..=1.0) {
        let mut bits = Vec::new();
        for c in &codes {
            hsc::chain::quantize::push_code(&mut bits, *c, 8);
        }
        let packed = source_code(&bits, 8, ratio).unwrap();
        prop_assert!(packed.len() as f64 <= (ratio * bits.len() as f64).ceil() + 1e-9);
        let back = source_decode(&packed, codes.len(), 8, ratio).unwrap();
        prop_assert_eq!(back.len(), bits.len());
        let frac = hsc::chain::source::coarse_step_fraction(codes.len(), 8, ratio);
        for (i, c) in codes.iter().enumerate() {
            let r = hsc::chain::quantize::read_code(&back[8 * i..8 * i + 8], 8);
            // error in code units, over a 256-level range
            prop_assert!((r as f64 - *c as f64).abs() <= frac * 256.0 + 1e-9);
        }
    }
}
