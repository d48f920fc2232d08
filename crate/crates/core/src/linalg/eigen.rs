//! Dense symmetric eigensolvers.
//!
//! Two independent routes are provided: cyclic Jacobi rotations, used for
//! small matrices, and Householder tridiagonalization followed by implicit
//! QL, used above [`JACOBI_MAX_SIDE`]. Both return eigenvalues in descending
//! order with eigenvectors as the columns of the returned matrix, each
//! normalized so its first non-negligible component is positive.

use ndarray::{Array1, Array2};

use crate::error::{HscError, Result};

pub const JACOBI_MAX_SIDE: usize = 64;
pub const CONVERGENCE_TOL: f64 = 1e-10;

/// Eigenvalues (descending) and column eigenvectors.
pub type Decomposition = (Array1<f64>, Array2<f64>);

/// Picks the solver by size.
pub fn symmetric_eig(a: &Array2<f64>) -> Result<Decomposition> {
    if a.nrows() <= JACOBI_MAX_SIDE {
        jacobi(a)
    } else {
        tridiagonal_ql(a)
    }
}

/// Cyclic Jacobi. The sweep cap is `100 * n`.
pub fn jacobi(a: &Array2<f64>) -> Result<Decomposition> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if n <= 1 || scale == 0.0 {
        return Ok(finish(m.diag().to_owned(), v));
    }
    let cap = 100 * n;
    let mut converged = false;
    for _sweep in 0..cap {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= CONVERGENCE_TOL * scale * 1e-3 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(HscError::NoConvergence { iterations: cap });
    }
    Ok(finish(m.diag().to_owned(), v))
}

/// Householder reduction to tridiagonal form and implicit QL with shifts
/// (the EISPACK tred2/tql2 pair). Total QL iterations are capped at `100 * n`.
pub fn tridiagonal_ql(a: &Array2<f64>) -> Result<Decomposition> {
    let n = a.nrows();
    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e, 100 * n)?;
    Ok(finish(Array1::from(d), v))
}

fn tred2(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
                v[[j, i]] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[[j, i]] = f;
                g = e[j] + v[[j, j]] * f;
                for k in j + 1..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[[k, j]] -= f * e[k] + g * d[k];
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    v[[k, j]] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = 0.0;
    }
    v[[n - 1, n - 1]] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64], cap: usize) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    let mut total_iter = 0usize;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            loop {
                total_iter += 1;
                if total_iter > cap {
                    return Err(HscError::NoConvergence { iterations: cap });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[[k, i + 1]];
                        v[[k, i + 1]] = s * v[[k, i]] + c * h;
                        v[[k, i]] = c * v[[k, i]] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Sorts descending (stable on ties, so ordering is deterministic) and fixes
/// the sign of every eigenvector.
fn finish(values: Array1<f64>, vectors: Array2<f64>) -> Decomposition {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut sorted_vals = Array1::zeros(n);
    let mut sorted_vecs = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        sorted_vals[dst] = values[src];
        let col = vectors.column(src);
        let sign = col.iter().find(|x| x.abs() > 1e-12).map(|x| x.signum()).unwrap_or(1.0);
        for r in 0..n {
            sorted_vecs[[r, dst]] = sign * col[r];
        }
    }
    (sorted_vals, sorted_vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn reconstruction_error(a: &Array2<f64>, (vals, vecs): &Decomposition) -> f64 {
        let lambda = Array2::from_diag(vals);
        let r = vecs.dot(&lambda).dot(&vecs.t());
        let diff = &r - a;
        diff.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn sample_symmetric(n: usize, seed: u64) -> Array2<f64> {
        // small LCG keeps this test self-contained
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let x = next();
                a[[i, j]] = x;
                a[[j, i]] = x;
            }
        }
        a
    }

    #[test]
    fn diagonal_input() {
        let a = array![[1.0, 0.0], [0.0, 3.0]];
        for dec in [jacobi(&a).unwrap(), tridiagonal_ql(&a).unwrap()] {
            assert_eq!(dec.0.to_vec(), vec![3.0, 1.0]);
            assert!((dec.1[[1, 0]] - 1.0).abs() < 1e-14);
            assert!((dec.1[[0, 1]] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn one_by_one() {
        let a = array![[2.5]];
        assert_eq!(jacobi(&a).unwrap().0[0], 2.5);
        assert_eq!(tridiagonal_ql(&a).unwrap().0[0], 2.5);
    }

    #[test]
    fn solvers_agree() {
        for seed in 0..5 {
            let a = sample_symmetric(17, seed);
            let j = jacobi(&a).unwrap();
            let q = tridiagonal_ql(&a).unwrap();
            for (x, y) in j.0.iter().zip(q.0.iter()) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
            assert!(reconstruction_error(&a, &j) < 1e-10);
            assert!(reconstruction_error(&a, &q) < 1e-10);
        }
    }

    #[test]
    fn large_matrix_uses_ql_and_is_orthonormal() {
        let a = sample_symmetric(80, 9);
        let (vals, vecs) = symmetric_eig(&a).unwrap();
        let gram = vecs.t().dot(&vecs);
        let eye = Array2::<f64>::eye(80);
        let err = (&gram - &eye).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(err < 1e-10);
        assert!(vals.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sign_convention_first_component_positive() {
        let a = sample_symmetric(6, 3);
        let (_, vecs) = jacobi(&a).unwrap();
        for col in vecs.columns() {
            let first = col.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }
}
