//! Codebook quantization of the whole latent vector.

use ndarray::{Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::{HscError, Result};

use super::{from_interleaved, to_interleaved};

/// `entries` rows are codewords, each `2k` interleaved reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub entries: Array2<f64>,
}

impl Codebook {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() == 0 {
            return Err(HscError::Empty("codebook"));
        }
        if entries.ncols() % 2 != 0 {
            return Err(HscError::dims("codeword length", "even", entries.ncols()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(HscError::InvalidParameter("codebook has non-finite entries".into()));
        }
        Ok(Codebook { entries })
    }

    pub fn from_complex(words: &[Vec<Complex64>]) -> Result<Self> {
        let k = words.first().map(Vec::len).ok_or(HscError::Empty("codebook"))?;
        let mut entries = Array2::zeros((words.len(), 2 * k));
        for (i, w) in words.iter().enumerate() {
            if w.len() != k {
                return Err(HscError::dims("codeword", k, w.len()));
            }
            entries.row_mut(i).assign(&ArrayView1::from(&to_interleaved(w)[..]));
        }
        Codebook::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    /// Symbols per codeword.
    pub fn k(&self) -> usize {
        self.entries.ncols() / 2
    }

    pub fn word(&self, index: usize) -> Vec<Complex64> {
        from_interleaved(self.entries.row(index).as_slice().expect("standard layout"))
    }

    /// Index of the nearest codeword to an interleaved vector; ties go to the
    /// lowest index.
    pub fn nearest(&self, v: ArrayView1<'_, f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, row) in self.entries.rows().into_iter().enumerate() {
            let dist: f64 = row.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best.1 {
                best = (i, dist);
            }
        }
        best
    }

    pub fn nearest_batch(&self, rows: ArrayView2<'_, f64>) -> Vec<usize> {
        rows.rows().into_iter().map(|r| self.nearest(r).0).collect()
    }
}

/// Nearest codeword to `raw` and its index.
pub fn vq_quantize(raw: &[Complex64], book: &Codebook) -> Result<(usize, Vec<Complex64>)> {
    if book.is_empty() {
        return Err(HscError::Empty("codebook"));
    }
    if raw.len() != book.k() {
        return Err(HscError::dims("latent for quantization", book.k(), raw.len()));
    }
    let v = to_interleaved(raw);
    let (i, _) = book.nearest(ArrayView1::from(&v[..]));
    Ok((i, book.word(i)))
}

/// Fraction of codewords not selected by any row of `assignments`.
pub fn dead_fraction(assignments: &[usize], size: usize) -> f64 {
    if size == 0 {
        return 0.0;
    }
    let mut used = vec![false; size];
    for &a in assignments {
        used[a] = true;
    }
    used.iter().filter(|u| !**u).count() as f64 / size as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn exact_match_and_nearest() {
        let words: Vec<Vec<Complex64>> = (0..8).map(|i| vec![c(i as f64), Complex64::new(0.0, -(i as f64))]).collect();
        let book = Codebook::from_complex(&words).unwrap();
        let (i, w) = vq_quantize(&words[5], &book).unwrap();
        assert_eq!(i, 5);
        assert_eq!(w, words[5]);

        let two = Codebook::from_complex(&[vec![c(0.0)], vec![c(10.0)]]).unwrap();
        assert_eq!(vq_quantize(&[c(4.0)], &two).unwrap().0, 0);
    }

    #[test]
    fn ties_go_low() {
        let two = Codebook::from_complex(&[vec![c(0.0)], vec![c(10.0)]]).unwrap();
        assert_eq!(vq_quantize(&[c(5.0)], &two).unwrap().0, 0);
    }

    #[test]
    fn single_entry() {
        let one = Codebook::from_complex(&[vec![c(1.0), c(2.0)]]).unwrap();
        for x in [-5.0, 0.0, 100.0] {
            assert_eq!(vq_quantize(&[c(x), c(-x)], &one).unwrap().0, 0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Codebook::new(Array2::zeros((0, 4))).is_err());
        let one = Codebook::from_complex(&[vec![c(1.0)]]).unwrap();
        assert!(vq_quantize(&[c(1.0), c(2.0)], &one).is_err());
    }

    #[test]
    fn dead_codes() {
        assert_eq!(dead_fraction(&[0, 0, 2], 4), 0.5);
    }
}
