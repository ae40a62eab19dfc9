//! Small dense symmetric kernels. Problem sizes stay in the low hundreds, so
//! plain loops beat any BLAS dependency and keep summation order fixed.

use ndarray::{Array1, Array2};

/// In-place lower Cholesky factorization. Returns false if the matrix is not
/// numerically positive definite.
pub fn cholesky_factor(a: &mut Array2<f64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let djj = d.sqrt();
        a[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / djj;
        }
    }
    true
}

/// Solves L L' x = b given the lower factor from [`cholesky_factor`].
pub fn cholesky_solve_factored(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Solves a symmetric positive definite system, retrying with an increasing
/// diagonal ridge when the factorization fails. Returns None when even a
/// heavy ridge cannot make the matrix factorizable (e.g. NaNs present).
pub fn solve_spd_with_ridge(a: &Array2<f64>, b: &Array1<f64>) -> Option<(Array2<f64>, Array1<f64>)> {
    let n = a.nrows();
    let mut trace = 0.0;
    for i in 0..n {
        trace += a[[i, i]].abs();
    }
    let base = 1e-14 * (1.0 + trace / n as f64);
    let mut ridge = 0.0;
    for attempt in 0..6 {
        let mut m = a.clone();
        if ridge > 0.0 {
            for i in 0..n {
                m[[i, i]] += ridge;
            }
        }
        if cholesky_factor(&mut m) {
            let x = cholesky_solve_factored(&m, b);
            if x.iter().all(|v| v.is_finite()) {
                return Some((m, x));
            }
        }
        ridge = if attempt == 0 { base } else { ridge * 100.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_round_trip() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let b = array![1.0, -2.0, 0.5];
        let mut l = a.clone();
        assert!(cholesky_factor(&mut l));
        let x = cholesky_solve_factored(&l, &b);
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn indefinite_matrix_fails() {
        let mut a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(!cholesky_factor(&mut a));
    }

    #[test]
    fn ridge_recovers_semidefinite() {
        // rank-1 matrix plus consistent rhs still solvable with a ridge
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![2.0, 2.0];
        let (_, x) = solve_spd_with_ridge(&a, &b).unwrap();
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-5));
    }
}
