//! Dense symmetric eigendecomposition (cyclic Jacobi) and projection onto the
//! PSD cone.

use crate::error::{arg_err, QapError, Result};
use crate::matrix::Matrix;

/// Input asymmetry accepted by [`sym_eig`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Off-diagonal Frobenius mass, relative to `‖S‖_F`, at which sweeps stop.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;
/// Eigenvalues at or below this are dropped by [`psd_project`].
pub const ZERO_CLAMP: f64 = 1e-12;

/// `S = Q diag(values) Q^T` with `values` ascending and `Q` orthogonal.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        weighted_gram(&self.vectors, &self.values, |v| v)
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Full eigendecomposition of a symmetric matrix.
pub fn sym_eig(s: &Matrix) -> Result<EigenDecomposition> {
    check_symmetric(s)?;
    let m = s.rows();
    jacobi(s.clone(), Matrix::identity(m))
}

/// Eigendecomposition starting from a guess `basis` for the eigenvectors
/// (columns, orthogonal). When the guess is close, `basis^T S basis` is nearly
/// diagonal and only a couple of sweeps are needed.
pub fn sym_eig_warm(s: &Matrix, basis: &Matrix) -> Result<EigenDecomposition> {
    check_symmetric(s)?;
    if basis.rows() != s.rows() || !basis.is_square() {
        return arg_err("warm-start basis has the wrong shape");
    }
    let rotated = basis.t_matmul(&s.matmul(basis)).symmetrized();
    jacobi(rotated, basis.clone())
}

pub fn min_eigenvalue(s: &Matrix) -> Result<f64> {
    Ok(sym_eig(s)?.min_value())
}

/// Frobenius-nearest PSD matrix `Q diag(max(λ, 0)) Q^T`.
pub fn psd_project(s: &Matrix) -> Result<Matrix> {
    Ok(psd_project_from(&sym_eig(s)?))
}

pub fn psd_project_from(eig: &EigenDecomposition) -> Matrix {
    weighted_gram(&eig.vectors, &eig.values, clamp_nonneg)
}

#[inline]
fn clamp_nonneg(v: f64) -> f64 {
    if v > ZERO_CLAMP {
        v
    } else {
        0.0
    }
}

/// `Q diag(f(λ)) Q^T`, skipping zero weights.
fn weighted_gram(q: &Matrix, values: &[f64], f: impl Fn(f64) -> f64) -> Matrix {
    let m = q.rows();
    let kept: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .map(|(j, &v)| (j, f(v)))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let mut out = Matrix::zeros(m, m);
    if kept.is_empty() {
        return out;
    }
    // rows of `scaled` are Q's rows restricted to the kept columns
    let r = kept.len();
    let mut cols = vec![0.0; m * r];
    let mut scaled = vec![0.0; m * r];
    for i in 0..m {
        for (c, &(j, w)) in kept.iter().enumerate() {
            cols[i * r + c] = q[(i, j)];
            scaled[i * r + c] = q[(i, j)] * w;
        }
    }
    for i in 0..m {
        let si = &scaled[i * r..(i + 1) * r];
        for j in i..m {
            let cj = &cols[j * r..(j + 1) * r];
            let v: f64 = si.iter().zip(cj).map(|(a, b)| a * b).sum();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    if !s.is_square() {
        return arg_err("eigendecomposition needs a square matrix");
    }
    if !s.is_finite() {
        return Err(QapError::NonFinite);
    }
    let tolerance = SYMMETRY_TOLERANCE * s.max_abs().max(1.0);
    let asymmetry = s.max_asymmetry();
    if asymmetry > tolerance {
        return Err(QapError::NotSymmetric { asymmetry, tolerance });
    }
    Ok(())
}

fn off_diagonal_norm(a: &[f64], m: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                total += a[i * m + j] * a[i * m + j];
            }
        }
    }
    total.sqrt()
}

/// Cyclic Jacobi on `work`, accumulating rotations into `vectors`.
fn jacobi(work: Matrix, mut vectors: Matrix) -> Result<EigenDecomposition> {
    let m = work.rows();
    let mut a = work.as_slice().to_vec();
    let norm = work.frobenius_norm();
    let target = OFF_DIAGONAL_TOLERANCE * norm;
    // entries below this are skipped; their total mass stays under `target`
    let skip = target / (m.max(1) as f64);
    let v = vectors.as_mut_slice();

    let mut converged = norm == 0.0 || off_diagonal_norm(&a, m) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(QapError::NonConvergence {
                what: "Jacobi eigensolver",
                iterations: MAX_SWEEPS,
            });
        }
        sweeps += 1;
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq.abs() <= skip {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // columns p and q
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                // rows p and q
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
                a[p * m + q] = 0.0;
                a[q * m + p] = 0.0;
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - s * vkq;
                    v[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_diagonal_norm(&a, m) <= target;
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[i * m + i].total_cmp(&a[j * m + j]));
    let values = order.iter().map(|&i| a[i * m + i]).collect();
    let sorted = Matrix::from_fn(m, m, |i, j| vectors[(i, order[j])]);
    Ok(EigenDecomposition {
        values,
        vectors: sorted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn diagonal_input_sorted() {
        let e = sym_eig(&Matrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_close(&e.values, &[1.0, 2.0, 3.0], 1e-15);
    }

    #[test]
    fn all_ones_spectrum() {
        let e = sym_eig(&Matrix::ones(3, 3)).unwrap();
        assert_close(&e.values, &[0.0, 0.0, 3.0], 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let e = sym_eig(&Matrix::zeros(4, 4)).unwrap();
        assert_close(&e.values, &[0.0; 4], 0.0);
    }

    #[test]
    fn rejects_asymmetric() {
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(sym_eig(&s).is_err());
    }

    #[test]
    fn psd_projection_examples() {
        let p = psd_project(&Matrix::diag(&[1.0, -2.0])).unwrap();
        assert_close(p.as_slice(), &[1.0, 0.0, 0.0, 0.0], 1e-15);
        let psd = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let p = psd_project(&psd).unwrap();
        assert_close(p.as_slice(), psd.as_slice(), 1e-12);
    }

    #[test]
    fn identity_min_eigenvalue() {
        assert!((min_eigenvalue(&Matrix::identity(5)).unwrap() - 1.0).abs() < 1e-15);
    }
}
