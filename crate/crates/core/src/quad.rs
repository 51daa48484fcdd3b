//! Gauss-type quadrature rules (Golub-Welsch).

use crate::specfun::ln_gamma;
use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights on [-1, 1] for the weight `(1-x)^a (1+x)^b`, `a, b > -1`.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && a > -1.0 && b > -1.0);
    let mut t = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        t[(k, k)] = diag;
        if k + 1 < n {
            let j = kf + 1.0;
            let s1 = 2.0 * j + a + b;
            let num = 4.0 * j * (j + a) * (j + b) * (j + a + b);
            let den = s1 * s1 * (s1 + 1.0) * (s1 - 1.0);
            let off = (num / den).sqrt();
            t[(k, k + 1)] = off;
            t[(k + 1, k)] = off;
        }
    }
    let mu0 = ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0))
    .exp();
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    pairs.into_iter().unzip()
}

/// Gauss-Legendre rule mapped to [lo, hi].
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, 0.0, 0.0);
    let h = 0.5 * (hi - lo);
    let c = 0.5 * (hi + lo);
    (x.iter().map(|v| c + h * v).collect(), w.iter().map(|v| v * h).collect())
}

/// Rule on [0, 1] for the weight `u^alpha`.
pub fn gauss_jacobi_unit(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, 0.0, alpha);
    let sc = 0.5f64.powf(alpha + 1.0);
    (x.iter().map(|v| 0.5 * (1.0 + v)).collect(), w.iter().map(|v| v * sc).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10, 0.0, 2.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(19)).sum();
        assert!((s / (2f64.powi(20) / 20.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn jacobi_unit_moments() {
        let (u, w) = gauss_jacobi_unit(16, -0.4);
        for k in 0..20 {
            let s: f64 = u.iter().zip(&w).map(|(u, w)| w * u.powi(k)).sum();
            let exact = 1.0 / (k as f64 + 0.6);
            assert!((s / exact - 1.0).abs() < 1e-12, "k={k}");
        }
    }
}
