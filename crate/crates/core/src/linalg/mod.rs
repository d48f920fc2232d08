pub mod eigen;

use ndarray::{Array2, ArrayView2};

pub use eigen::{jacobi, symmetric_eig, tridiagonal_ql};

pub fn frobenius_sq(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// Orthonormalizes the rows of `rows` in place order (modified Gram-Schmidt,
/// two passes). A row that collapses numerically is replaced by the standard
/// basis vector that keeps the most energy after projection, so the output
/// always has orthonormal rows.
pub fn orthonormalize_rows(rows: ArrayView2<'_, f64>) -> Array2<f64> {
    let (d, n) = rows.dim();
    let mut out = rows.to_owned();
    for i in 0..d {
        let mut norm = 0.0;
        for _pass in 0..2 {
            for j in 0..i {
                let dot: f64 = (0..n).map(|c| out[[i, c]] * out[[j, c]]).sum();
                for c in 0..n {
                    out[[i, c]] -= dot * out[[j, c]];
                }
            }
            norm = (0..n).map(|c| out[[i, c]] * out[[i, c]]).sum::<f64>().sqrt();
            if norm < 1e-12 {
                break;
            }
            for c in 0..n {
                out[[i, c]] /= norm;
            }
        }
        if norm < 1e-12 {
            let replacement = fallback_direction(&out, i, n);
            for c in 0..n {
                out[[i, c]] = replacement[c];
            }
        }
    }
    out
}

fn fallback_direction(out: &Array2<f64>, i: usize, n: usize) -> Vec<f64> {
    let mut best = vec![0.0; n];
    let mut best_norm = -1.0;
    for axis in 0..n {
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        for _pass in 0..2 {
            for j in 0..i {
                let dot: f64 = (0..n).map(|c| v[c] * out[[j, c]]).sum();
                for c in 0..n {
                    v[c] -= dot * out[[j, c]];
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > best_norm {
            best_norm = norm;
            best = v.iter().map(|x| x / norm).collect();
        }
    }
    best
}
