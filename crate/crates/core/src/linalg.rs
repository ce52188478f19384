//! Small dense kernels on plain slices.
//!
//! Tangent vectors live in `Vec<f64>` and bases are stored column-wise as
//! `Vec<Vec<f64>>`; the hot loops never allocate through this module.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, with two zero vectors counting as equal.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        return 0.0;
    }
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    diff.sqrt() / scale
}

/// Thin QR of the columns in place by classical Gram-Schmidt with one
/// reorthogonalization pass ("twice is enough"). `r` receives the m x m
/// upper-triangular factor in row-major order with a positive diagonal.
///
/// Returns `Err(i)` if column `i` is numerically dependent (`R_ii < tol`).
pub fn qr_in_place(cols: &mut [Vec<f64>], r: &mut [f64], tol: f64) -> Result<(), usize> {
    let m = cols.len();
    debug_assert_eq!(r.len(), m * m);
    r.iter_mut().for_each(|x| *x = 0.0);
    for j in 0..m {
        let (done, rest) = cols.split_at_mut(j);
        let col = &mut rest[0];
        for _pass in 0..2 {
            for (i, qi) in done.iter().enumerate() {
                let h = dot(qi, col);
                axpy(-h, qi, col);
                r[i * m + j] += h;
            }
        }
        let nrm = norm(col);
        if !(nrm >= tol) {
            return Err(j);
        }
        scale(1.0 / nrm, col);
        r[j * m + j] = nrm;
    }
    Ok(())
}

/// Inverse of an m x m upper-triangular matrix (row-major) by back substitution.
pub fn upper_triangular_inverse(r: &[f64], m: usize) -> Vec<f64> {
    let mut inv = vec![0.0; m * m];
    for j in 0..m {
        inv[j * m + j] = 1.0 / r[j * m + j];
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in i + 1..=j {
                s += r[i * m + k] * inv[k * m + j];
            }
            inv[i * m + j] = -s / r[i * m + i];
        }
    }
    inv
}

/// Max-abs deviation of `Q^T Q` from the identity.
pub fn orthonormality_defect(cols: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, qi) in cols.iter().enumerate() {
        for (j, qj) in cols.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(qi, qj) - target).abs());
        }
    }
    worst
}
