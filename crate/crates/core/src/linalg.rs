//! Small dense linear algebra for the d-dimensional ridge-regression state.
//!
//! Dimensions here are tiny (d is 10 in the default experiment), so plain
//! row-major `Vec<f64>` storage is enough. The inverse of the design matrix is
//! maintained incrementally with the Sherman–Morrison identity.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance for symmetry checks on `A` and `A⁻¹`.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        other.check_dim(self.dim())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: f64, other: &Vector) -> Result<()> {
        other.check_dim(self.dim())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Dense row-major `d × d` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    /// `λ·I` of size `d × d`.
    pub fn identity_scaled(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!(
                "ridge coefficient must be > 0, got {lambda}"
            )));
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = lambda;
        }
        Ok(m)
    }

    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row_major(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn mul_vec(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim)?;
        let xs = x.as_slice();
        let out = self
            .entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(xs).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Vector(out))
    }

    /// `self += x xᵀ`
    pub fn add_outer(&mut self, x: &Vector) -> Result<()> {
        x.check_dim(self.dim)?;
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.entries[i * d + j] += x[i] * x[j];
            }
        }
        Ok(())
    }

    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    /// Replace the matrix with `(M + Mᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (self.get(i, j) + self.get(j, i));
                self.entries[i * d + j] = avg;
                self.entries[j * d + i] = avg;
            }
        }
    }

    /// Lower-triangular Cholesky factor, or `None` if the matrix is not
    /// (numerically) positive definite.
    pub fn cholesky(&self) -> Option<SquareMatrix> {
        let d = self.dim;
        let mut l = SquareMatrix::zeros(d);
        for i in 0..d {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if !(sum > 0.0) {
                        return None;
                    }
                    l.entries[i * d + i] = sum.sqrt();
                } else {
                    l.entries[i * d + j] = sum / l.get(j, j);
                }
            }
        }
        Some(l)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_some()
    }

    /// Inverse of a symmetric positive definite matrix via its Cholesky factor.
    pub fn spd_inverse(&self) -> Result<SquareMatrix> {
        let l = self
            .cholesky()
            .ok_or(Error::NotPositiveDefinite(f64::NAN))?;
        let d = self.dim;
        let mut inv = SquareMatrix::zeros(d);
        let mut col = vec![0.0; d];
        for c in 0..d {
            // forward: L y = e_c
            for i in 0..d {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for (k, ck) in col.iter().enumerate().take(i) {
                    s -= l.get(i, k) * ck;
                }
                col[i] = s / l.get(i, i);
            }
            // backward: Lᵀ z = y
            for i in (0..d).rev() {
                let mut s = col[i];
                for (k, ck) in col.iter().enumerate().skip(i + 1) {
                    s -= l.get(k, i) * ck;
                }
                col[i] = s / l.get(i, i);
            }
            for (r, v) in col.iter().enumerate() {
                inv.entries[r * d + c] = *v;
            }
        }
        Ok(inv)
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// In-place Sherman–Morrison: turns `(A)⁻¹` into `(A + x xᵀ)⁻¹`.
pub(crate) fn rank_one_inverse_update_in_place(a_inv: &mut SquareMatrix, x: &Vector) -> Result<()> {
    x.check_dim(a_inv.dim)?;
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("update vector"));
    }
    let u = a_inv.mul_vec(x)?;
    let denom = 1.0 + x.dot(&u)?;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::NotPositiveDefinite(denom));
    }
    let d = a_inv.dim;
    for i in 0..d {
        let ui = u[i] / denom;
        for j in 0..d {
            a_inv.entries[i * d + j] -= ui * u[j];
        }
    }
    Ok(())
}

/// Returns `(A + x xᵀ)⁻¹` given `A⁻¹`.
pub fn rank_one_inverse_update(a_inv: &SquareMatrix, x: &Vector) -> Result<SquareMatrix> {
    if a_inv.entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("inverse matrix"));
    }
    let mut out = a_inv.clone();
    rank_one_inverse_update_in_place(&mut out, x)?;
    Ok(out)
}

/// `sqrt(xᵀ A⁻¹ x)`.
pub fn mahalanobis_norm(a_inv: &SquareMatrix, x: &Vector) -> Result<f64> {
    let ax = a_inv.mul_vec(x)?;
    // round-off can push a zero quadratic form slightly negative
    Ok(x.dot(&ax)?.max(0.0).sqrt())
}

/// `A⁻¹ b`.
pub fn solve_estimate(a_inv: &SquareMatrix, b: &Vector) -> Result<Vector> {
    a_inv.mul_vec(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn identity_scaled_cases() {
        let m = SquareMatrix::identity_scaled(2, 0.1).unwrap();
        assert_eq!(m.row_major(), &[0.1, 0.0, 0.0, 0.1]);
        let m = SquareMatrix::identity_scaled(1, 1.0).unwrap();
        assert_eq!(m.row_major(), &[1.0]);
        let m = SquareMatrix::identity_scaled(3, 0.5).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), if i == j { 0.5 } else { 0.0 });
            }
        }
    }

    #[test]
    fn identity_scaled_rejects_bad_inputs() {
        assert!(SquareMatrix::identity_scaled(0, 1.0).is_err());
        assert!(SquareMatrix::identity_scaled(2, 0.0).is_err());
        assert!(SquareMatrix::identity_scaled(2, -1.0).is_err());
    }

    #[test]
    fn sherman_morrison_unit_cases() {
        let id = SquareMatrix::identity_scaled(2, 1.0).unwrap();
        let up = rank_one_inverse_update(&id, &v(&[1.0, 0.0])).unwrap();
        assert_eq!(up.row_major(), &[0.5, 0.0, 0.0, 1.0]);
        let up = rank_one_inverse_update(&id, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(up, id);
    }

    #[test]
    fn sherman_morrison_rejects_corrupt_state() {
        // -I is not SPD: 1 + xᵀ(-I)x = 0 for a unit x
        let neg = SquareMatrix::from_row_major(2, vec![-1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(
            rank_one_inverse_update(&neg, &v(&[1.0, 0.0])),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(Vector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn mahalanobis_cases() {
        let half = SquareMatrix::identity_scaled(2, 0.5).unwrap();
        let n = mahalanobis_norm(&half, &v(&[1.0, 0.0])).unwrap();
        assert!((n - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mahalanobis_norm(&half, &Vector::zeros(2)).unwrap(), 0.0);
        assert!(matches!(
            mahalanobis_norm(&half, &Vector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn solve_cases() {
        let m = SquareMatrix::from_row_major(2, vec![0.5, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(solve_estimate(&m, &v(&[1.0, 0.0])).unwrap(), v(&[0.5, 0.0]));
        assert_eq!(
            solve_estimate(&m, &Vector::zeros(2)).unwrap(),
            Vector::zeros(2)
        );
        assert!(solve_estimate(&m, &Vector::zeros(1)).is_err());
    }

    #[test]
    fn spd_inverse_roundtrip() {
        let a = SquareMatrix::from_row_major(2, vec![4.0, 1.0, 1.0, 3.0]).unwrap();
        let inv = a.spd_inverse().unwrap();
        // 1/11 * [[3,-1],[-1,4]]
        let expect = [3.0 / 11.0, -1.0 / 11.0, -1.0 / 11.0, 4.0 / 11.0];
        for (got, want) in inv.row_major().iter().zip(expect) {
            assert!((got - want).abs() < 1e-14);
        }
        let not_pd = SquareMatrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(!not_pd.is_positive_definite());
    }

    #[test]
    fn symmetrize_averages() {
        let mut m = SquareMatrix::from_row_major(2, vec![1.0, 2.0, 4.0, 1.0]).unwrap();
        assert!(!m.is_symmetric(SYMMETRY_TOL));
        m.symmetrize();
        assert_eq!(m.row_major(), &[1.0, 3.0, 3.0, 1.0]);
    }
}
