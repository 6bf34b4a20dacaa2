//! Dense helpers for the handful of tiny matrices the crate needs
//! (covariance factors and block-design least squares).

use crate::error::{invalid, PtfcError, Result};

/// Lower-triangular factor `L` with `L Lᵀ = m` for a positive semidefinite
/// matrix. Zero pivots are allowed; a clearly negative pivot is rejected.
pub fn cholesky_psd(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return Err(invalid("covariance matrix must be square"));
    }
    for i in 0..n {
        for j in 0..i {
            if (m[i][j] - m[j][i]).abs() > 1e-12 * (m[i][j].abs() + m[j][i].abs()).max(1.0) {
                return Err(invalid("covariance matrix must be symmetric"));
            }
        }
    }
    let scale = (0..n).map(|i| m[i][i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = m[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -tol {
            return Err(invalid("covariance matrix is not positive semidefinite"));
        }
        if d <= tol {
            // zero pivot: the rest of the column must vanish for a PSD input
            for i in j + 1..n {
                let r = m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if r.abs() > 1e-9 * scale {
                    return Err(invalid("covariance matrix is not positive semidefinite"));
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[j][j] = djj;
        for i in j + 1..n {
            let r = m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = r / djj;
        }
    }
    Ok(l)
}

/// `L z` for a lower-triangular `L`.
pub fn lower_mul(l: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    l.iter().map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum()).collect()
}

/// Least-squares solution of `X b ≈ y` by modified Gram–Schmidt QR.
///
/// `columns` holds the design column-wise. A column whose residual norm
/// after orthogonalization drops below `1e-10` of its original norm makes
/// the design rank deficient; the error names it via `label(index)`.
pub fn least_squares(
    columns: &[Vec<f64>],
    y: &[f64],
    label: impl Fn(usize) -> String,
) -> Result<Vec<f64>> {
    let p = columns.len();
    let m = y.len();
    if columns.iter().any(|c| c.len() != m) {
        return Err(invalid("design columns and response differ in length"));
    }
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut r = vec![vec![0.0; p]; p];
    for (j, col) in columns.iter().enumerate() {
        let original = norm(col);
        let mut v = col.clone();
        for (i, qi) in q.iter().enumerate() {
            let proj = dot(qi, &v);
            r[i][j] = proj;
            for (vk, qk) in v.iter_mut().zip(qi) {
                *vk -= proj * qk;
            }
        }
        let nv = norm(&v);
        if original == 0.0 || nv <= 1e-10 * original {
            return Err(PtfcError::RankDeficient(format!("{} is collinear with earlier columns", label(j))));
        }
        r[j][j] = nv;
        q.push(v.into_iter().map(|x| x / nv).collect());
    }
    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, y)).collect();
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| r[i][k] * b[k]).sum();
        b[i] = (qty[i] - s) / r[i][i];
    }
    Ok(b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
