//! Dense linear algebra helpers on top of `nalgebra`.
//!
//! Rank decisions go through [`Cutoff`]: a singular value counts as zero when
//! it is at most `max(rel * sigma_max, abs)`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// Default relative singular-value cutoff for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub rel: f64,
    pub abs: f64,
}

impl Cutoff {
    pub const fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }

    pub fn threshold(&self, sigma_max: f64) -> f64 {
        (self.rel * sigma_max).max(self.abs)
    }
}

impl Default for Cutoff {
    fn default() -> Self {
        Self::new(RANK_CUTOFF, 1e-12)
    }
}

fn pad_square(m: &Mat) -> Mat {
    let (r, c) = m.shape();
    if r >= c {
        return m.clone();
    }
    let mut padded = Mat::zeros(c, c);
    padded.view_mut((0, 0), (r, c)).copy_from(m);
    padded
}

fn pad_square_c(m: &CMat) -> CMat {
    let (r, c) = m.shape();
    if r >= c {
        return m.clone();
    }
    let mut padded = CMat::zeros(c, c);
    padded.view_mut((0, 0), (r, c)).copy_from(m);
    padded
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_span(m: &Mat, cutoff: Cutoff) -> Mat {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return Mat::zeros(n, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = cutoff.threshold(sigma_max);
    let u = svd.u.expect("u requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    Mat::from_fn(n, keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn null_space(m: &Mat, cutoff: Cutoff) -> Mat {
    let n = m.ncols();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return Mat::identity(n, n);
    }
    let sq = pad_square(m);
    let svd = SVD::new(sq, false, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = cutoff.threshold(sigma_max);
    let v_t = svd.v_t.expect("v_t requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol)
        .collect();
    Mat::from_fn(n, keep.len(), |r, c| v_t[(keep[c], r)])
}

/// Numerical rank of `m`.
pub fn rank(m: &Mat, cutoff: Cutoff) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let tol = cutoff.threshold(sigma_max);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis (as columns) of the complex kernel of `m`, using an
/// absolute singular-value tolerance.
pub fn complex_null_space(m: &CMat, abs_tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let sq = pad_square_c(m);
    let svd = SVD::new(sq, false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= abs_tol)
        .collect();
    CMat::from_fn(n, keep.len(), |r, c| v_t[(keep[c], r)].conj())
}

/// Orthonormal basis of the complex column space of `m`.
pub fn complex_column_span(m: &CMat, cutoff: Cutoff) -> CMat {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return CMat::zeros(n, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = cutoff.threshold(sigma_max);
    let u = svd.u.expect("u requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    CMat::from_fn(n, keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis of the orthogonal complement of the column span of an
/// orthonormal `basis` in `R^n`.
pub fn orthogonal_complement(basis: &Mat, n: usize) -> Mat {
    if basis.ncols() == 0 {
        return Mat::identity(n, n);
    }
    null_space(&basis.transpose(), Cutoff::new(1e-10, 1e-12))
}

pub fn spectral_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Symmetric square root and inverse square root of a symmetric positive
/// definite matrix. Returns the smallest eigenvalue alongside; the roots are
/// `None` when that eigenvalue is not positive.
pub fn spd_roots(g: &Mat) -> (Option<(Mat, Mat)>, f64) {
    let n = g.nrows();
    if n == 0 {
        return (Some((Mat::zeros(0, 0), Mat::zeros(0, 0))), f64::INFINITY);
    }
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !(min > 1e-12 * max.max(1e-300)) {
        return (None, min);
    }
    let q = &eig.eigenvectors;
    let sqrt = q * Mat::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose();
    let inv_sqrt = q * Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * q.transpose();
    (Some((sqrt, inv_sqrt)), min)
}

pub fn expm(a: &Mat) -> Mat {
    if a.nrows() == 0 {
        return a.clone();
    }
    a.exp()
}

/// Denman–Beavers iteration for the principal square root.
fn sqrtm(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = Mat::identity(n, n);
    for _ in 0..60 {
        let y_inv = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("singular matrix in square-root iteration".into()))?;
        let z_inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("singular matrix in square-root iteration".into()))?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let delta = (&y_next - &y).norm() / y_next.norm().max(1e-300);
        y = y_next;
        z = z_next;
        if delta < 1e-15 {
            break;
        }
    }
    Ok(y)
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Square roots are taken until `||A - I||_F <= 0.25`, then the Gregory
/// series `log A = 2 atanh((A - I)(A + I)^-1)` is summed.
pub fn logm(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let eye = Mat::identity(n, n);
    let mut x = a.clone();
    let mut squarings = 0u32;
    while (&x - &eye).norm() > 0.25 {
        x = sqrtm(&x)?;
        squarings += 1;
        if squarings > 60 || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid(
                "matrix has no principal real logarithm".into(),
            ));
        }
    }
    let denom = (&x + &eye)
        .try_inverse()
        .ok_or_else(|| Error::Invalid("matrix has an eigenvalue -1".into()))?;
    let z = (&x - &eye) * denom;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut sum = z.clone();
    let mut k = 1.0;
    for _ in 0..60 {
        term = &term * &z2;
        k += 2.0;
        let contribution = &term / k;
        sum += &contribution;
        if contribution.norm() < 1e-18 * sum.norm().max(1e-300) {
            break;
        }
    }
    Ok(sum * (2.0 * f64::from(2u32).powi(squarings as i32)))
}

/// Frobenius-norm leakage `||P_perp M Q||` of the columns of `q` out of
/// their own span under `m`.
pub fn leakage(m: &Mat, q: &Mat) -> f64 {
    if q.ncols() == 0 {
        return 0.0;
    }
    let image = m * q;
    let back = q * (q.transpose() * &image);
    (image - back).norm()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn null_space_of_wide_matrix_is_complete() {
        let m = Mat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m, Cutoff::default());
        assert_eq!(ns.ncols(), 2);
        assert!((m * ns).norm() < 1e-12);
    }

    #[test]
    fn column_span_drops_dependent_columns() {
        let m = Mat::from_column_slice(3, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let span = column_span(&m, Cutoff::default());
        assert_eq!(span.ncols(), 2);
        assert_abs_diff_eq!((span.transpose() * &span - Mat::identity(2, 2)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn logm_inverts_expm() {
        let a = Mat::from_row_slice(3, 3, &[0.1, 0.7, -0.2, -0.4, 0.0, 0.3, 0.2, -0.1, -0.3]);
        let back = logm(&expm(&a)).unwrap();
        assert!((back - a).norm() < 1e-12);
    }

    #[test]
    fn logm_of_large_rotation_is_principal() {
        let t = 2.5_f64;
        let r = Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let l = logm(&r).unwrap();
        assert_abs_diff_eq!(l[(1, 0)], t, epsilon = 1e-10);
        assert_abs_diff_eq!(l[(0, 0)], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn logm_rejects_negative_eigenvalues() {
        let m = Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        assert!(logm(&m).is_err());
    }

    #[test]
    fn spd_roots_reject_indefinite() {
        let g = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(spd_roots(&g).0.is_none());
        let g = Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]);
        let (roots, _) = spd_roots(&g);
        let (s, si) = roots.unwrap();
        assert_abs_diff_eq!(s[(1, 1)], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(si[(0, 0)], 0.5, epsilon = 1e-12);
    }
}
