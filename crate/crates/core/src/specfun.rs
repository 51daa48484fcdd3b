//! Gamma function, the normalizing constant `d_gamma`, round-sphere
//! multipliers of the fractional GJMS operators and sharp Sobolev constants.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Default exclusion radius around the integers 1 and 2.
pub const DEFAULT_GUARD: f64 = 0.05;

/// The triple (gamma, n, m). `m` is fixed by gamma: `m = 1 + 2 floor(gamma) - 2 gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub gamma: f64,
    pub n: usize,
    pub m: f64,
}

impl FracParams {
    pub fn new(gamma: f64, n: usize) -> Result<Self> {
        Self::with_guard(gamma, n, DEFAULT_GUARD)
    }

    /// Like [`FracParams::new`] with a custom exclusion radius around 1 and 2.
    pub fn with_guard(gamma: f64, n: usize, guard: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) || !gamma.is_finite() {
            return Err(Error::InvalidParams(format!("gamma = {gamma} not in (0,2)")));
        }
        if (gamma - 1.0).abs() < guard.max(1e-12) || 2.0 - gamma < guard {
            return Err(Error::InvalidParams(format!(
                "gamma = {gamma} within {guard} of an integer"
            )));
        }
        if (n as f64) <= 2.0 * gamma {
            return Err(Error::InvalidParams(format!("need n > 2 gamma, got n = {n}")));
        }
        let m = 1.0 + 2.0 * gamma.floor() - 2.0 * gamma;
        Ok(Self { gamma, n, m })
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// True for gamma in (1,2).
    pub fn is_high(&self) -> bool {
        self.gamma > 1.0
    }

    /// Exponent of the second branch: `2 gamma` below 1, `2 gamma - 2` above.
    pub fn beta(&self) -> f64 {
        if self.is_high() {
            2.0 * self.gamma - 2.0
        } else {
            2.0 * self.gamma
        }
    }

    /// Conformal weight `(n - 2 gamma) / 2`.
    pub fn weight(&self) -> f64 {
        0.5 * (self.nf() - 2.0 * self.gamma)
    }
}

fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    if r.abs() <= 0.5 {
        (PI * r).sin()
    } else {
        (PI * (r.signum() - r)).sin()
    }
}

fn lanczos_sum(x: f64) -> f64 {
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64 - 1.0);
    }
    a
}

/// Gamma on the real line, with a pole error at non-positive integers.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.round() {
        return Err(Error::Pole(x));
    }
    if x < 0.5 {
        return Ok(PI / (sin_pi(x) * gamma_fn(1.0 - x)?));
    }
    let t = x + LANCZOS_G - 0.5;
    // split the power to keep the intermediate finite up to x ~ 171
    let half = t.powf(0.5 * (x - 0.5));
    Ok((2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(x))
}

/// log |Gamma(x)| for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs a positive argument");
    if x < 0.5 {
        return (PI / (sin_pi(x) * gamma_fn(1.0 - x).unwrap())).abs().ln();
    }
    let t = x + LANCZOS_G - 0.5;
    0.5 * (2.0 * PI).ln() + (x - 0.5) * t.ln() - t + lanczos_sum(x).ln()
}

/// Gamma(a)/Gamma(b) for positive arguments, stable for large ones.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    if a.max(b) < 60.0 {
        gamma_fn(a).unwrap() / gamma_fn(b).unwrap()
    } else {
        (ln_gamma(a) - ln_gamma(b)).exp()
    }
}

/// `2^{2g} Gamma(g) / Gamma(-g)` for any non-integer g.
pub fn d_gamma_of(g: f64) -> f64 {
    4f64.powf(g) * gamma_fn(g).unwrap() / gamma_fn(-g).unwrap()
}

pub fn d_gamma(p: &FracParams) -> f64 {
    d_gamma_of(p.gamma)
}

/// Multiplier of the order-`2g` operator on degree-k harmonics of the round `S^n`.
pub fn sphere_multiplier_of(k: usize, n: usize, g: f64) -> f64 {
    let a = k as f64 + 0.5 * n as f64;
    gamma_ratio(a + g, a - g)
}

pub fn sphere_multiplier(k: usize, p: &FracParams) -> f64 {
    sphere_multiplier_of(k, p.n, p.gamma)
}

/// `|S^n|^{2g/n} Gamma((n+2g)/2)/Gamma((n-2g)/2)`: the sharp constant of the
/// inequality `<f, P f> >= C ||f||_{2n/(n-2g)}^2` on the round sphere.
pub fn lieb_constant(n: usize, g: f64) -> f64 {
    let nf = n as f64;
    let vol_term = 4f64.powf(g) * PI.powf(g) * gamma_ratio(0.5 * nf, nf).powf(2.0 * g / nf);
    vol_term * gamma_ratio(0.5 * (nf + 2.0 * g), 0.5 * (nf - 2.0 * g))
}

/// The order-2 constant evaluated by its formula for any `g` (no range check);
/// used for the psi-term where the order is `2 - gamma`.
pub fn c2_formula(n: usize, g: f64) -> f64 {
    let nf = n as f64;
    8.0 * PI.powf(g) * gamma_fn(2.0 - g).unwrap() / gamma_fn(g).unwrap()
        * gamma_ratio(0.5 * (nf + 2.0 * g), 0.5 * (nf - 2.0 * g))
        * gamma_ratio(0.5 * nf, nf).powf(2.0 * g / nf)
}

/// Sharp Sobolev trace constants `c^{(1)}_{n,gamma}` (order 1) and `c^{(2)}_{n,gamma}` (order 2).
pub fn sharp_constant(order: u8, p: &FracParams) -> Result<f64> {
    let g = p.gamma;
    let nf = p.nf();
    match order {
        1 if g < 1.0 => Ok(2.0 * PI.powf(g) * gamma_fn(1.0 - g)? / gamma_fn(g)?
            * gamma_ratio(0.5 * (nf + 2.0 * g), 0.5 * (nf - 2.0 * g))
            * gamma_ratio(0.5 * nf, nf).powf(2.0 * g / nf)),
        2 if g > 1.0 => Ok(c2_formula(p.n, g)),
        1 => Err(Error::OrderMismatch { order, range: "(0,1)", gamma: g }),
        2 => Err(Error::OrderMismatch { order, range: "(1,2)", gamma: g }),
        _ => Err(Error::InvalidParams(format!("order {order} not in {{1,2}}"))),
    }
}

/// Volume of the unit sphere `S^d`.
pub fn sphere_volume(d: usize) -> f64 {
    let a = 0.5 * (d as f64 + 1.0);
    2.0 * PI.powf(a) / gamma_fn(a).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_integer_values() {
        let sp = PI.sqrt();
        assert!((gamma_fn(0.5).unwrap() / sp - 1.0).abs() < 1e-15);
        assert!((gamma_fn(-1.5).unwrap() / (4.0 / 3.0 * sp) - 1.0).abs() < 1e-14);
        assert!(gamma_fn(-3.0).is_err());
        assert!(gamma_fn(0.0).is_err());
    }

    #[test]
    fn params_reject_near_integers() {
        assert!(FracParams::new(1.02, 5).is_err());
        assert!(FracParams::new(1.98, 5).is_err());
        assert!(FracParams::with_guard(1.02, 5, 0.01).is_ok());
        assert!(FracParams::new(1.5, 3).is_err());
        let p = FracParams::new(1.25, 4).unwrap();
        assert!((p.m - 0.5).abs() < 1e-15);
    }
}
