//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here is single threaded with a fixed evaluation order, so
//! results are bitwise reproducible regardless of the caller's thread pool.

use nalgebra::{DMatrix, DVector};

/// Columns whose unit-normalised component orthogonal to the preceding
/// columns is shorter than this are treated as collinear.
pub const COLLINEARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum LsError {
    /// Column indices that lie (numerically) in the span of earlier columns.
    RankDeficient { columns: Vec<usize> },
    Insufficient { n: usize, k: usize },
}

#[derive(Debug, Clone)]
pub struct LsFit {
    pub beta: DVector<f64>,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
    pub resid: DVector<f64>,
    pub rss: f64,
}

/// Ordinary least squares through a Householder QR of the column-scaled
/// design.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LsFit, LsError> {
    let (n, k) = x.shape();
    if n < k || k == 0 {
        return Err(LsError::Insufficient { n, k });
    }
    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    let zero_cols: Vec<usize> = (0..k).filter(|&j| norms[j] == 0.0).collect();
    if !zero_cols.is_empty() {
        return Err(LsError::RankDeficient { columns: zero_cols });
    }
    let mut xs = x.clone();
    for (j, d) in norms.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*d);
    }
    let qr = xs.qr();
    let r = qr.r();
    let collinear: Vec<usize> = (0..k).filter(|&j| r[(j, j)].abs() < COLLINEARITY_TOL).collect();
    if !collinear.is_empty() {
        return Err(LsError::RankDeficient { columns: collinear });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, k).into_owned();
    let beta_s = r.solve_upper_triangular(&rhs).ok_or(LsError::RankDeficient { columns: vec![] })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(LsError::RankDeficient { columns: vec![] })?;
    let cov_s = &r_inv * r_inv.transpose();

    let beta = DVector::from_iterator(k, (0..k).map(|j| beta_s[j] / norms[j]));
    let xtx_inv = DMatrix::from_fn(k, k, |i, j| cov_s[(i, j)] / (norms[i] * norms[j]));
    let resid = y - x * &beta;
    let rss = resid.dot(&resid);
    Ok(LsFit { beta, xtx_inv, resid, rss })
}

/// Whether every root of `1 + a_1 z + ... + a_p z^p` lies strictly outside
/// the unit circle, by the Schur–Cohn step-down recursion.
fn roots_outside_unit_circle(a: &[f64]) -> bool {
    let mut a = a.to_vec();
    while let Some(&k) = a.last() {
        if k.abs() >= 1.0 {
            return false;
        }
        let p = a.len();
        let d = 1.0 - k * k;
        let next: Vec<f64> = (0..p - 1).map(|j| (a[j] - k * a[p - 2 - j]) / d).collect();
        a = next;
    }
    true
}

/// Largest modulus among the inverse roots of `1 - sum_l c_l z^l`, i.e. the
/// spectral radius of the companion matrix. The lag polynomial is
/// stationary/invertible iff this is strictly below one.
///
/// Found by bisection on `r`: the inverse roots all lie inside radius `r`
/// iff `1 - sum_l (c_l / r^l) z^l` passes the step-down test.
pub fn inverse_root_modulus(lags: &[(usize, f64)]) -> f64 {
    let p = lags.iter().filter(|(_, c)| *c != 0.0).map(|(l, _)| *l).max().unwrap_or(0);
    if p == 0 {
        return 0.0;
    }
    let mut c = vec![0.0; p];
    for &(lag, v) in lags {
        if lag >= 1 {
            c[lag - 1] += v;
        }
    }
    let inside = |r: f64| {
        let scaled: Vec<f64> = c.iter().enumerate().map(|(i, v)| -v / r.powi(i as i32 + 1)).collect();
        roots_outside_unit_circle(&scaled)
    };
    let mut lo = 0.0;
    let mut hi = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1e-9;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// A square root `A` with `A A' = sigma` for a symmetric positive
/// semi-definite matrix; tiny negative eigenvalues are clipped to zero.
pub fn psd_sqrt(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sigma.clone().symmetric_eigen();
    let mut a = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        a.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
    }
    a
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix, with its numerical
/// rank. Eigenvalues below `rel_tol * max|eigenvalue|` are treated as zero.
pub fn pinv_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = rel_tol * max_abs;
    let mut out = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cut && lambda != 0.0 {
            rank += 1;
            let v = eig.eigenvectors.column(j);
            out += (v * v.transpose()) / lambda;
        }
    }
    (out, rank)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &v| a.min(v))
}

/// `(1/T) sum_t e_{j,t} e_{m,t}` over equal-length per-country series.
pub fn cross_covariance(series: &[Vec<f64>]) -> DMatrix<f64> {
    let j = series.len();
    let t = series.first().map_or(0, Vec::len);
    let mut out = DMatrix::zeros(j, j);
    if t == 0 {
        return out;
    }
    for a in 0..j {
        for b in a..j {
            let s: f64 = series[a].iter().zip(&series[b]).map(|(x, y)| x * y).sum();
            out[(a, b)] = s / t as f64;
            out[(b, a)] = s / t as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(5, |i, _| 2.0 + 3.0 * i as f64);
        let fit = least_squares(&x, &y).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12);
        assert!((fit.beta[1] - 3.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn names_collinear_column() {
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let y = DVector::from_element(6, 1.0);
        assert_eq!(least_squares(&x, &y).unwrap_err(), LsError::RankDeficient { columns: vec![2] });
    }

    #[test]
    fn xtx_inverse_matches_direct_inverse() {
        let x = DMatrix::from_fn(8, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 + if j == 0 { 1.0 } else { 0.3 * i as f64 });
        let y = DVector::from_fn(8, |i, _| i as f64);
        let fit = least_squares(&x, &y).unwrap();
        let direct = (x.transpose() * &x).try_inverse().unwrap();
        assert!((fit.xtx_inv - direct).abs().max() < 1e-10);
    }

    #[test]
    fn companion_radius() {
        assert!((inverse_root_modulus(&[(1, 0.5)]) - 0.5).abs() < 1e-12);
        assert!((inverse_root_modulus(&[(1, 0.5), (2, 0.5)]) - 1.0).abs() < 1e-9);
        assert_eq!(inverse_root_modulus(&[]), 0.0);
        // y_t = 0.9^12-ish seasonal AR(12): radius 0.9
        let r = inverse_root_modulus(&[(12, 0.9f64.powi(12))]);
        assert!((r - 0.9).abs() < 1e-9);
        // 1 - z + 0.5 z^2 has complex roots of modulus sqrt(2)
        assert!((inverse_root_modulus(&[(1, 1.0), (2, -0.5)]) - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((inverse_root_modulus(&[(1, -1.3)]) - 1.3).abs() < 1e-9);
    }

    #[test]
    fn psd_sqrt_reconstructs() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.9, 0.9, 1.0]);
        let a = psd_sqrt(&s);
        assert!((&a * a.transpose() - s).abs().max() < 1e-12);
        let z = psd_sqrt(&DMatrix::zeros(3, 3));
        assert_eq!(z.abs().max(), 0.0);
    }

    #[test]
    fn pinv_of_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, rank) = pinv_symmetric(&m, 1e-12);
        assert_eq!(rank, 1);
        assert!((&m * &p * &m - &m).abs().max() < 1e-12);
    }
}
