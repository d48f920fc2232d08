//! Range-null space recomposition.
//!
//! Given a source `X`, a generated estimate `X̂` and a projection basis `A`
//! with orthonormal rows, the receiver forms
//!
//! ```text
//! X̃ = Aᵀ(AX) + (I − AᵀA) X̂
//! ```
//!
//! The squared error of `X̃` is `Tr((I − AᵀA) B)` with `B = (X − X̂)(X − X̂)ᵀ`,
//! minimized by taking the rows of `A` to be the top-`d` eigenvectors of `B`,
//! in which case it equals the sum of the `L − d` smallest eigenvalues.

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::error::{HscError, Result};
use crate::image::Image;
use crate::linalg::{self, frobenius_sq};

const SYMMETRY_TOL: f64 = 1e-12;
const ORTHONORMAL_TOL: f64 = 1e-8;

/// `(X − X̂)(X − X̂)ᵀ`, symmetric positive semi-definite.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    entries: Array2<f64>,
}

impl ErrorMatrix {
    /// Wraps an arbitrary symmetric matrix. Asymmetry is measured relative to
    /// `max(1, max|b_ij|)`.
    pub fn from_symmetric(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(HscError::dims("error matrix", "non-empty square", format!("{r}x{c}")));
        }
        let asym = max_asymmetry(entries.view());
        let scale = entries.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        if asym > SYMMETRY_TOL * scale {
            return Err(HscError::NotSymmetric { max_asymmetry: asym });
        }
        Ok(ErrorMatrix { entries })
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn side(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().sum()
    }
}

fn max_asymmetry(m: ArrayView2<'_, f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

pub fn error_matrix(original: &Image, generated: &Image) -> Result<ErrorMatrix> {
    original.ensure_same_shape(generated, "error matrix")?;
    let diff = &original.pixels() - &generated.pixels();
    let b = diff.dot(&diff.t());
    // exact symmetry regardless of the gemm kernel's summation order
    let sym = (&b + &b.t()) * 0.5;
    Ok(ErrorMatrix { entries: sym })
}

/// Element-wise mean of per-channel error matrices.
pub fn average_error_matrix(channels: &[ErrorMatrix]) -> Result<ErrorMatrix> {
    let first = channels.first().ok_or(HscError::Empty("error matrix list"))?;
    let n = first.side();
    let mut acc = Array2::<f64>::zeros((n, n));
    for ch in channels {
        if ch.side() != n {
            return Err(HscError::dims("average error matrix", n, ch.side()));
        }
        acc += &ch.entries;
    }
    acc /= channels.len() as f64;
    Ok(ErrorMatrix { entries: acc })
}

/// Descending eigenvalues with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSpectrum {
    eigenvalues: Array1<f64>,
    /// Column `l` is the eigenvector of `eigenvalues[l]`.
    eigenvectors: Array2<f64>,
}

impl EigenSpectrum {
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> ArrayView2<'_, f64> {
        self.eigenvectors.view()
    }

    pub fn side(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ λ_l e_l e_lᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let lambda = Array2::from_diag(&self.eigenvalues);
        self.eigenvectors.dot(&lambda).dot(&self.eigenvectors.t())
    }
}

/// Eigendecomposition of an error matrix. Jacobi below 65x65, tridiagonal QL
/// above.
pub fn eig_psd(b: &ErrorMatrix) -> Result<EigenSpectrum> {
    let (eigenvalues, eigenvectors) = linalg::symmetric_eig(&b.entries)?;
    Ok(EigenSpectrum { eigenvalues, eigenvectors })
}

/// `d x L` matrix with orthonormal rows. Its pseudoinverse is its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBasis {
    rows: Array2<f64>,
}

impl ProjectionBasis {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        let d = rows.nrows();
        if d > rows.ncols() {
            return Err(HscError::RankOutOfRange { d, max: rows.ncols() });
        }
        let gram = rows.dot(&rows.t());
        let err = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| (gram[[i, j]] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0_f64, f64::max);
        if err > ORTHONORMAL_TOL {
            return Err(HscError::InvalidParameter(format!(
                "projection rows are not orthonormal (max |AAᵀ − I| = {err:e})"
            )));
        }
        Ok(ProjectionBasis { rows })
    }

    /// Zero-rank basis on an `L`-dimensional space.
    pub fn empty(side: usize) -> Self {
        ProjectionBasis {
            rows: Array2::zeros((0, side)),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.nrows()
    }

    pub fn side(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    /// Range-space projector `AᵀA`.
    pub fn projector(&self) -> Array2<f64> {
        self.rows.t().dot(&self.rows)
    }

    /// Null-space projector `I − AᵀA`.
    pub fn null_projector(&self) -> Array2<f64> {
        Array2::<f64>::eye(self.side()) - self.projector()
    }

    /// `A X`.
    pub fn project(&self, image: &Image) -> Result<Array2<f64>> {
        if image.side() != self.side() {
            return Err(HscError::dims("projection", self.side(), image.side()));
        }
        Ok(self.rows.dot(&image.pixels()))
    }
}

/// Rows are the eigenvectors of the `d` largest eigenvalues.
pub fn optimal_projection(spectrum: &EigenSpectrum, d: usize) -> Result<ProjectionBasis> {
    let side = spectrum.side();
    if d > side {
        return Err(HscError::RankOutOfRange { d, max: side });
    }
    let rows = spectrum.eigenvectors.slice(s![.., ..d]).t().to_owned();
    Ok(ProjectionBasis { rows })
}

/// `X̃ = Aᵀ·projected + (I − AᵀA)·X̂`.
pub fn recompose(basis: &ProjectionBasis, projected: ArrayView2<'_, f64>, generated: &Image) -> Result<Image> {
    let (d, l) = (basis.rank(), basis.side());
    if projected.dim() != (d, l) {
        return Err(HscError::dims(
            "recompose projected block",
            format!("{d}x{l}"),
            format!("{}x{}", projected.nrows(), projected.ncols()),
        ));
    }
    if generated.side() != l {
        return Err(HscError::dims("recompose generated image", l, generated.side()));
    }
    let a = basis.rows.view();
    let xhat = generated.pixels();
    // Aᵀ(P − A X̂) + X̂, equal to the textbook form without building I − AᵀA
    let correction = &projected - &a.dot(&xhat);
    let out = &xhat + &a.t().dot(&correction);
    Image::new(out)
}

/// Squared error reported both as the raw Frobenius sum and per pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseReport {
    pub raw: f64,
    pub per_pixel: f64,
}

impl MseReport {
    pub fn from_raw(raw: f64, side: usize) -> Self {
        MseReport {
            raw,
            per_pixel: raw / (side * side) as f64,
        }
    }
}

/// `Σ_{l > d} max(λ_l, 0)`.
pub fn closed_form_mse(spectrum: &EigenSpectrum, d: usize) -> Result<MseReport> {
    let side = spectrum.side();
    if d > side {
        return Err(HscError::RankOutOfRange { d, max: side });
    }
    let tail: f64 = spectrum.eigenvalues.iter().skip(d).map(|&l| l.max(0.0)).sum();
    Ok(MseReport::from_raw(tail, side))
}

pub fn achieved_mse(original: &Image, recomposed: &Image) -> Result<MseReport> {
    original.ensure_same_shape(recomposed, "achieved mse")?;
    let diff = &original.pixels() - &recomposed.pixels();
    Ok(MseReport::from_raw(frobenius_sq(diff.view()), original.side()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn img(m: Array2<f64>) -> Image {
        Image::new(m).unwrap()
    }

    #[test]
    fn identical_images_give_zero_error_matrix() {
        let x = img(array![[0.1, 0.2], [0.3, 0.4]]);
        let b = error_matrix(&x, &x).unwrap();
        assert!(b.entries().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_difference() {
        let x = img(array![[3f64.sqrt(), 0.0], [0.0, 1.0]]);
        let xhat = Image::zeros(2);
        let b = error_matrix(&x, &xhat).unwrap();
        assert!((b.entries()[[0, 0]] - 3.0).abs() < 1e-15);
        assert!((b.entries()[[1, 1]] - 1.0).abs() < 1e-15);
        assert_eq!(b.entries()[[0, 1]], 0.0);
    }

    #[test]
    fn error_matrix_dimension_mismatch() {
        assert!(error_matrix(&Image::zeros(2), &Image::zeros(3)).is_err());
    }

    #[test]
    fn non_symmetric_rejected() {
        let r = ErrorMatrix::from_symmetric(array![[1.0, 0.5], [0.0, 1.0]]);
        assert!(matches!(r, Err(HscError::NotSymmetric { .. })));
    }

    #[test]
    fn identity_spectrum() {
        let b = ErrorMatrix::from_symmetric(Array2::eye(3)).unwrap();
        let spec = eig_psd(&b).unwrap();
        assert_eq!(spec.eigenvalues().to_vec(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn dominant_axis_projection() {
        let b = ErrorMatrix::from_symmetric(array![[3.0, 0.0], [0.0, 1.0]]).unwrap();
        let spec = eig_psd(&b).unwrap();
        let a = optimal_projection(&spec, 1).unwrap();
        assert!((a.rows()[[0, 0]].abs() - 1.0).abs() < 1e-15);
        assert!(a.rows()[[0, 1]].abs() < 1e-15);
        assert_eq!(closed_form_mse(&spec, 1).unwrap().raw, 1.0);
        assert_eq!(closed_form_mse(&spec, 0).unwrap().raw, 4.0);
        assert_eq!(closed_form_mse(&spec, 2).unwrap().raw, 0.0);
        assert!(closed_form_mse(&spec, 3).is_err());
        assert!(optimal_projection(&spec, 3).is_err());
    }

    #[test]
    fn zero_rank_is_generated_image() {
        let x = img(array![[1.0, 0.0], [0.0, 1.0]]);
        let xhat = img(array![[0.5, 0.5], [0.5, 0.5]]);
        let a = ProjectionBasis::empty(2);
        assert!(a.projector().iter().all(|&v| v == 0.0));
        let p = a.project(&x).unwrap();
        let out = recompose(&a, p.view(), &xhat).unwrap();
        assert_eq!(out, xhat);
    }

    #[test]
    fn recompose_from_exact_base() {
        let x = img(array![[0.2, 0.7, 0.1], [0.9, 0.3, 0.4], [0.0, 0.5, 0.6]]);
        let a = ProjectionBasis::new(array![[0.6, 0.8, 0.0]]).unwrap();
        let p = a.project(&x).unwrap();
        let out = recompose(&a, p.view(), &x).unwrap();
        let err = achieved_mse(&x, &out).unwrap().raw;
        assert!(err < 1e-28);
    }

    #[test]
    fn recompose_shape_errors() {
        let a = ProjectionBasis::new(array![[1.0, 0.0]]).unwrap();
        let wrong = Array2::<f64>::zeros((2, 2));
        assert!(recompose(&a, wrong.view(), &Image::zeros(2)).is_err());
        let p = Array2::<f64>::zeros((1, 2));
        assert!(recompose(&a, p.view(), &Image::zeros(3)).is_err());
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        assert!(ProjectionBasis::new(array![[1.0, 1.0]]).is_err());
        assert!(ProjectionBasis::new(Array2::eye(3)).is_ok());
    }

    #[test]
    fn mse_units() {
        let x = img(array![[1.0, 1.0], [1.0, 1.0]]);
        let y = Image::zeros(2);
        let m = achieved_mse(&x, &y).unwrap();
        assert_eq!(m.raw, 4.0);
        assert_eq!(m.per_pixel, 1.0);
        assert_eq!(achieved_mse(&x, &x).unwrap().raw, 0.0);
    }

    #[test]
    fn averaging_error_matrices() {
        let m = |a: f64, b: f64| ErrorMatrix::from_symmetric(array![[a, 0.0], [0.0, b]]).unwrap();
        let avg = average_error_matrix(&[m(2.0, 0.0), m(0.0, 2.0), m(1.0, 1.0)]).unwrap();
        assert_eq!(avg, m(1.0, 1.0));
        assert_eq!(average_error_matrix(&[m(2.0, 3.0)]).unwrap(), m(2.0, 3.0));
        assert_eq!(average_error_matrix(&[m(2.0, 3.0), m(2.0, 3.0), m(2.0, 3.0)]).unwrap(), m(2.0, 3.0));
        assert!(average_error_matrix(&[]).is_err());
        let big = ErrorMatrix::from_symmetric(Array2::eye(3)).unwrap();
        assert!(average_error_matrix(&[m(1.0, 1.0), big]).is_err());
    }

    #[test]
    fn zero_error_matrix_yields_standard_basis() {
        let b = ErrorMatrix::from_symmetric(Array2::zeros((4, 4))).unwrap();
        let spec = eig_psd(&b).unwrap();
        let a = optimal_projection(&spec, 2).unwrap();
        assert_eq!(a.rows().to_owned(), array![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]);
    }
}
