//! Independent checks of the recomposition core: an inertia-bisection
//! eigenvalue oracle, random-basis brute force for optimality, and the
//! end-to-end error law.

use hsc::recompose::{achieved_mse, closed_form_mse, eig_psd, error_matrix, optimal_projection, recompose, ErrorMatrix, ProjectionBasis};
use hsc::Image;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_image(rng: &mut ChaCha8Rng, side: usize) -> Image {
    Image::new(Array2::from_shape_fn((side, side), |_| rng.random::<f64>())).unwrap()
}

fn random_pair(seed: u64, side: usize) -> (Image, Image) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_image(&mut rng, side), random_image(&mut rng, side))
}

/// Number of eigenvalues of symmetric `a` strictly below `sigma`, from the
/// signs of the LDLᵀ pivots of `a − σI` (Sylvester's law of inertia).
fn count_below(a: &Array2<f64>, sigma: f64) -> usize {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[[i, i]] -= sigma;
    }
    let mut negatives = 0;
    for k in 0..n {
        let mut pivot = m[[k, k]];
        if pivot == 0.0 {
            pivot = -1e-300;
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let f = m[[i, k]] / pivot;
            for j in k + 1..n {
                m[[i, j]] -= f * m[[k, j]];
            }
        }
    }
    negatives
}

/// Eigenvalues (descending) by bisection on the inertia count.
fn bisection_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let bound = (0..n).map(|i| (0..n).map(|j| a[[i, j]].abs()).sum::<f64>()).fold(0.0_f64, f64::max) + 1.0;
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        // idx-th smallest: smallest sigma with count_below(sigma) > idx
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(a, mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out.reverse();
    out
}

fn random_psd(seed: u64, n: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal));
    g.dot(&g.t())
}

/// Classical Gram-Schmidt on Gaussian rows.
fn random_orthonormal_rows(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Array2<f64> {
    let mut rows = Array2::from_shape_fn((d, n), |_| rng.sample::<f64, _>(StandardNormal));
    for i in 0..d {
        for j in 0..i {
            let dot = rows.row(i).dot(&rows.row(j));
            let rj = rows.row(j).to_owned();
            rows.row_mut(i).scaled_add(-dot, &rj);
        }
        let norm = rows.row(i).dot(&rows.row(i)).sqrt();
        rows.row_mut(i).mapv_inplace(|x| x / norm);
    }
    rows
}

fn null_trace(rows: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = b.nrows();
    let p = Array2::<f64>::eye(n) - rows.t().dot(rows);
    p.dot(b).diag().sum()
}

#[test]
fn trace_equals_frobenius_on_random_pair() {
    let (x, xhat) = random_pair(11, 6);
    let b = error_matrix(&x, &xhat).unwrap();
    let mut direct = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            let d = x.pixels()[[i, j]] - xhat.pixels()[[i, j]];
            direct += d * d;
        }
    }
    assert!((b.trace() - direct).abs() < 1e-12);
    let e = b.entries();
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(e[[i, j]], e[[j, i]]);
        }
    }
    let spec = eig_psd(&b).unwrap();
    assert!(spec.eigenvalues().iter().all(|&l| l >= -1e-10));
}

#[test]
fn eigenvalues_match_bisection_oracle() {
    for seed in 0..10 {
        let a = random_psd(seed, 8);
        let oracle = bisection_eigenvalues(&a);
        let spec = eig_psd(&ErrorMatrix::from_symmetric(a.clone()).unwrap()).unwrap();
        for (got, want) in spec.eigenvalues().iter().zip(&oracle) {
            let rel = (got - want).abs() / want.abs().max(1e-12);
            assert!(rel < 1e-6, "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn spectrum_invariants() {
    for seed in 0..5 {
        let a = random_psd(100 + seed, 20);
        let spec = eig_psd(&ErrorMatrix::from_symmetric(a.clone()).unwrap()).unwrap();
        let v = spec.eigenvectors();
        let gram = v.t().dot(&v);
        for i in 0..20 {
            for j in 0..20 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-8);
            }
        }
        let diff = &spec.reconstruct() - &a;
        let rel = diff.iter().map(|x| x * x).sum::<f64>().sqrt() / a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(rel < 1e-8);
        let vals = spec.eigenvalues();
        assert!(vals.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }
}

#[test]
fn eigenbasis_beats_random_bases() {
    let b = random_psd(7, 6);
    let spec = eig_psd(&ErrorMatrix::from_symmetric(b.clone()).unwrap()).unwrap();
    let a = optimal_projection(&spec, 2).unwrap();
    let best = null_trace(&a.rows().to_owned(), &b);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let r = random_orthonormal_rows(&mut rng, 2, 6);
        assert!(best <= null_trace(&r, &b) + 1e-12);
    }
}

#[test]
fn closed_form_matches_recomposition_for_every_rank() {
    let (x, xhat) = random_pair(5, 8);
    let spec = eig_psd(&error_matrix(&x, &xhat).unwrap()).unwrap();
    for d in 0..=8 {
        let a = optimal_projection(&spec, d).unwrap();
        let p = a.project(&x).unwrap();
        let xt = recompose(&a, p.view(), &xhat).unwrap();
        let got = achieved_mse(&x, &xt).unwrap().raw;
        let want = closed_form_mse(&spec, d).unwrap().raw;
        let tol = 1e-8 * want.max(1e-12) + 1e-14;
        assert!((got - want).abs() <= tol.max(1e-12), "d {d}: {got} vs {want}");
    }
}

#[test]
fn full_rank_exact_delivery_is_lossless() {
    let (x, xhat) = random_pair(21, 28);
    let spec = eig_psd(&error_matrix(&x, &xhat).unwrap()).unwrap();
    let a = optimal_projection(&spec, 28).unwrap();
    let p = a.project(&x).unwrap();
    let xt = recompose(&a, p.view(), &xhat).unwrap();
    let max_abs = (&x.pixels() - &xt.pixels()).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(max_abs < 1e-10);
}

#[test]
fn tied_eigenvalues_do_not_change_the_error_law() {
    // B has a doubly degenerate top eigenvalue; any basis of that subspace
    // gives the same tail sum.
    let b = ndarray::array![[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.5]];
    let spec = eig_psd(&ErrorMatrix::from_symmetric(b.clone()).unwrap()).unwrap();
    let chosen = optimal_projection(&spec, 1).unwrap();
    let rotated = ProjectionBasis::new(ndarray::array![[0.6, 0.8, 0.0]]).unwrap();
    let t1 = null_trace(&chosen.rows().to_owned(), &b);
    let t2 = null_trace(&rotated.rows().to_owned(), &b);
    assert!((t1 - t2).abs() < 1e-12);
    assert!((t1 - closed_form_mse(&spec, 1).unwrap().raw).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mse_law_and_projector_identities(seed in 0u64..10_000, side in 1usize..=32, frac in 0.0f64..=1.0) {
        let (x, xhat) = random_pair(seed, side);
        let spec = eig_psd(&error_matrix(&x, &xhat).unwrap()).unwrap();
        let d = ((side as f64) * frac).round() as usize;
        let a = optimal_projection(&spec, d).unwrap();

        let null = a.null_projector();
        let idem = &null.dot(&null) - &null;
        prop_assert!(idem.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8);

        let split = a.projector().dot(&x.pixels()) + null.dot(&x.pixels());
        let max_abs = (&split - &x.pixels()).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        prop_assert!(max_abs < 1e-10);

        let p = a.project(&x).unwrap();
        let xt = recompose(&a, p.view(), &xhat).unwrap();
        let got = achieved_mse(&x, &xt).unwrap().raw;
        let want = closed_form_mse(&spec, d).unwrap().raw;
        prop_assert!((got - want).abs() <= 1e-8 * want + 1e-12, "{} vs {}", got, want);
    }

    #[test]
    fn closed_form_monotone(seed in 0u64..10_000, side in 1usize..=16) {
        let (x, xhat) = random_pair(seed, side);
        let b = error_matrix(&x, &xhat).unwrap();
        let spec = eig_psd(&b).unwrap();
        let values: Vec<f64> = (0..=side).map(|d| closed_form_mse(&spec, d).unwrap().raw).collect();
        prop_assert!(values.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(values[side], 0.0);
        prop_assert!((values[0] - b.trace()).abs() <= 1e-10 * b.trace().max(1.0));
    }
}
