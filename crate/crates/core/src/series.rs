//! Truncated generalized power series `x^e * (c_0 + c_1 x + ... )`.
//!
//! With `e = 0` this is an ordinary Taylor jet (used for automatic
//! differentiation at interior points).  A non-integer `e` carries a
//! boundary branch such as `rho^{2 gamma - 2}`; sums are only defined
//! between series whose exponents differ by an integer.

use std::ops::{Add, Div, Mul, Neg, Sub};

const EXP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Ser {
    pub e: f64,
    pub c: Vec<f64>,
}

fn int_offset(d: f64) -> i64 {
    let r = d.round();
    assert!(
        (d - r).abs() < EXP_TOL,
        "series exponents differ by a non-integer amount ({d})"
    );
    r as i64
}

fn is_int(x: f64) -> bool {
    (x - x.round()).abs() < EXP_TOL
}

impl Ser {
    pub fn new(e: f64, c: Vec<f64>) -> Self {
        Self { e, c }
    }

    pub fn zero(len: usize) -> Self {
        Self { e: 0.0, c: vec![0.0; len] }
    }

    pub fn constant(v: f64, len: usize) -> Self {
        let mut c = vec![0.0; len.max(1)];
        c[0] = v;
        Self { e: 0.0, c }
    }

    /// The independent variable shifted to `x0`: `x0 + x`.
    pub fn var(x0: f64, len: usize) -> Self {
        let mut c = vec![0.0; len.max(2)];
        c[0] = x0;
        c[1] = 1.0;
        c.truncate(len.max(1));
        Self { e: 0.0, c }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn truncate(mut self, len: usize) -> Self {
        self.c.truncate(len);
        self
    }

    /// Exponent just past the last known coefficient.
    pub fn end(&self) -> f64 {
        self.e + self.c.len() as f64
    }

    /// Coefficient of `x^k` for integer `k` (zero below the leading exponent).
    pub fn coef(&self, k: i64) -> f64 {
        let i = k - int_offset(self.e);
        if i < 0 {
            0.0
        } else {
            *self
                .c
                .get(i as usize)
                .unwrap_or_else(|| panic!("coefficient {k} beyond truncation"))
        }
    }

    /// Value at the expansion point; requires an integer exponent >= 0.
    pub fn value(&self) -> f64 {
        self.coef(0)
    }

    /// The j-th derivative at the expansion point.
    pub fn deriv_at(&self, j: usize) -> f64 {
        let f: f64 = (1..=j).map(|i| i as f64).product();
        self.coef(j as i64) * f
    }

    /// Drop exactly-zero leading coefficients.
    pub fn strip(mut self) -> Self {
        let z = self.c.iter().take_while(|v| **v == 0.0).count();
        if z == self.c.len() {
            return self;
        }
        self.c.drain(..z);
        self.e += z as f64;
        self
    }

    /// Re-express with exponent `e_new <= e` (integer offset), padding zeros.
    pub fn with_exponent(&self, e_new: f64) -> Self {
        let d = int_offset(self.e - e_new);
        assert!(d >= 0, "cannot raise exponent without losing terms");
        let mut c = vec![0.0; d as usize];
        c.extend_from_slice(&self.c);
        Self { e: e_new, c }
    }

    fn taylor(&self) -> Self {
        if self.e == 0.0 {
            return self.clone();
        }
        let s = self.clone().strip();
        if s.e >= -EXP_TOL && is_int(s.e) {
            s.with_exponent(0.0)
        } else if is_int(s.e) && s.c.iter().all(|v| *v == 0.0) {
            Ser::zero(s.len())
        } else {
            panic!("series with exponent {} is not a Taylor series", s.e)
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { e: self.e, c: self.c.iter().map(|v| v * a).collect() }
    }

    pub fn add_ser(&self, o: &Ser) -> Self {
        let (lo, hi) = if self.e <= o.e { (self, o) } else { (o, self) };
        let d = int_offset(hi.e - lo.e) as usize;
        let end = lo.c.len().min(d + hi.c.len());
        let mut c = vec![0.0; end];
        for (i, v) in c.iter_mut().enumerate() {
            if i < lo.c.len() {
                *v += lo.c[i];
            }
            if i >= d && i - d < hi.c.len() {
                *v += hi.c[i - d];
            }
        }
        Self { e: lo.e, c }
    }

    pub fn add_scalar(&self, a: f64) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        let k = int_offset(self.e);
        if k > 0 {
            let mut s = self.with_exponent(0.0);
            s.c[0] += a;
            s
        } else {
            let mut s = self.clone();
            let i = (-k) as usize;
            assert!(i < s.c.len(), "constant beyond truncation");
            s.c[i] += a;
            s
        }
    }

    pub fn mul_ser(&self, o: &Ser) -> Self {
        let n = self.c.len().min(o.c.len());
        let mut c = vec![0.0; n];
        for i in 0..n {
            let a = self.c[i];
            if a == 0.0 {
                continue;
            }
            for j in 0..n - i {
                c[i + j] += a * o.c[j];
            }
        }
        Self { e: self.e + o.e, c }.canon()
    }

    pub fn recip(&self) -> Self {
        let b = self.clone().strip();
        let n = b.c.len();
        let b0 = b.c[0];
        assert!(b0 != 0.0, "reciprocal of a zero series");
        let mut r = vec![0.0; n];
        r[0] = 1.0 / b0;
        for j in 1..n {
            let mut s = 0.0;
            for i in 1..=j {
                s += b.c[i] * r[j - i];
            }
            r[j] = -s / b0;
        }
        Self { e: -b.e, c: r }
    }

    pub fn div_ser(&self, o: &Ser) -> Self {
        self.mul_ser(&o.recip())
    }

    fn pow_core(&self, p: f64, first: f64) -> Self {
        let a = &self.c;
        let n = a.len();
        let a0 = a[0];
        let mut b = vec![0.0; n];
        b[0] = first;
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += (p * j as f64 - (k - j) as f64) * a[j] * b[k - j];
            }
            b[k] = s / (k as f64 * a0);
        }
        Self { e: self.e * p, c: b }
    }

    /// Real power; the leading coefficient must be positive.
    pub fn powf(&self, p: f64) -> Self {
        let s = self.clone().strip();
        assert!(s.c[0] > 0.0, "powf of a series with non-positive leading term");
        let first = s.c[0].powf(p);
        s.pow_core(p, first)
    }

    pub fn powi(&self, p: i32) -> Self {
        if p == 0 {
            return Ser::constant(1.0, self.len());
        }
        let s = self.clone().strip();
        let first = s.c[0].powi(p);
        s.pow_core(p as f64, first)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn exp(&self) -> Self {
        let a = self.taylor();
        let n = a.c.len();
        let mut b = vec![0.0; n];
        b[0] = a.c[0].exp();
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a.c[j] * b[k - j];
            }
            b[k] = s / k as f64;
        }
        Self { e: 0.0, c: b }
    }

    pub fn ln(&self) -> Self {
        let a = self.taylor();
        let n = a.c.len();
        let a0 = a.c[0];
        assert!(a0 > 0.0, "log of a series with non-positive leading term");
        let mut b = vec![0.0; n];
        b[0] = a0.ln();
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * b[j] * a.c[k - j];
            }
            b[k] = (a.c[k] - s / k as f64) / a0;
        }
        Self { e: 0.0, c: b }
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let a = self.taylor();
        let n = a.c.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = a.c[0].sin();
        c[0] = a.c[0].cos();
        for k in 1..n {
            let (mut ss, mut cc) = (0.0, 0.0);
            for j in 1..=k {
                let w = j as f64 * a.c[j];
                ss += w * c[k - j];
                cc += w * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = -cc / k as f64;
        }
        (Self { e: 0.0, c: s }, Self { e: 0.0, c })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    pub fn asin(&self) -> Self {
        let a = self.taylor();
        let n = a.c.len();
        let one_minus = (&a * &a).scale(-1.0).add_scalar(1.0);
        let d = &a.deriv() * &one_minus.powf(-0.5);
        let mut b = vec![0.0; n];
        b[0] = a.c[0].asin();
        for k in 1..n {
            b[k] = d.coef(k as i64 - 1) / k as f64;
        }
        Self { e: 0.0, c: b }
    }

    /// Derivative with respect to the series variable.
    pub fn deriv(&self) -> Self {
        let c: Vec<f64> = self
            .c
            .iter()
            .enumerate()
            .map(|(j, v)| v * (self.e + j as f64))
            .collect();
        let mut e = self.e - 1.0;
        if is_int(e) {
            e = e.round();
        }
        Self { e, c }.canon()
    }

    /// Remove exactly-zero leading terms sitting at negative integer exponents.
    fn canon(mut self) -> Self {
        if is_int(self.e) {
            self.e = self.e.round();
            let mut z = 0;
            while self.e + (z as f64) < -0.5 && z < self.c.len() && self.c[z] == 0.0 {
                z += 1;
            }
            if z > 0 {
                self.c.drain(..z);
                self.e += z as f64;
            }
        }
        self
    }

    /// Multiply by `x^k`.
    pub fn shift(&self, k: f64) -> Self {
        Self { e: self.e + k, c: self.c.clone() }
    }

    /// Evaluate the truncated sum at `x > 0`.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for v in self.c.iter().rev() {
            acc = acc * x + v;
        }
        acc * x.powf(self.e)
    }

    /// Magnitude of the last retained term at `x`; a cheap truncation indicator.
    pub fn tail(&self, x: f64) -> f64 {
        let n = self.c.len();
        let k = n.saturating_sub(2);
        self.c[k..]
            .iter()
            .enumerate()
            .map(|(i, v)| (v * x.powf(self.e + (k + i) as f64)).abs())
            .fold(0.0, f64::max)
    }

    /// `int_0^x` termwise; every nonzero term must be integrable at 0.
    pub fn integrate_to(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        let scale = self.max_abs();
        for (j, v) in self.c.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let p = self.e + j as f64 + 1.0;
            if p <= 0.0 {
                assert!(v.abs() <= 1e-10 * scale, "non-integrable term x^{}", p - 1.0);
                continue;
            }
            acc += v * x.powf(p) / p;
        }
        acc
    }

    /// Value at the expansion point of a boundary series: the `x^0` coefficient,
    /// after checking that no negative power survives beyond `rel` times `scale`.
    pub fn limit_at_zero(&self, scale: f64, rel: f64) -> crate::Result<f64> {
        let mut lim = 0.0;
        for (j, v) in self.c.iter().enumerate() {
            let p = self.e + j as f64;
            if p < -EXP_TOL {
                if v.abs() > rel * scale.max(f64::MIN_POSITIVE) {
                    return Err(crate::Error::Divergent(*v));
                }
            } else if p.abs() < EXP_TOL {
                lim = *v;
            } else {
                break;
            }
        }
        Ok(lim)
    }

    /// Coefficient of `x^p` for a possibly non-integer `p`; zero if `p` is
    /// not on this series' exponent lattice.
    pub fn coef_at(&self, p: f64) -> f64 {
        let d = p - self.e;
        if !is_int(d) || d < -EXP_TOL {
            return 0.0;
        }
        self.c.get(d.round() as usize).copied().unwrap_or(0.0)
    }

    /// Taylor jet recentred at `x0 + h` (exponent 0 series only).
    pub fn recentre(&self, h: f64, len: usize) -> Self {
        assert!(self.e == 0.0);
        let n = self.c.len();
        let mut out = vec![0.0; len.min(n)];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut binom = 1.0;
            let mut hp = 1.0;
            for j in i..n {
                acc += binom * self.c[j] * hp;
                binom = binom * (j + 1) as f64 / (j + 1 - i) as f64;
                hp *= h;
            }
            *o = acc;
        }
        Self { e: 0.0, c: out }
    }

    /// Exponent of the first nonzero coefficient.
    pub fn lead(&self) -> f64 {
        let z = self.c.iter().take_while(|v| **v == 0.0).count();
        self.e + z as f64
    }

    /// Largest of the first three coefficients from the leading one on.
    pub fn lead_scale(&self) -> f64 {
        let z = self.c.iter().take_while(|v| **v == 0.0).count();
        self.c.iter().skip(z).take(3).fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Drop leading terms with exponent below `e_min` whose size is at most
    /// `tol`. These are rounding remnants of exact cancellations such as
    /// `e(e-1+m) = 0`.
    pub fn drop_tiny_below(mut self, e_min: f64, tol: f64) -> Self {
        let mut z = 0;
        while z < self.c.len() && self.e + (z as f64) < e_min - EXP_TOL && self.c[z].abs() <= tol {
            z += 1;
        }
        if z > 0 && z < self.c.len() {
            self.c.drain(..z);
            self.e += z as f64;
        }
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Horner evaluation of `sum a_j x^j` on a series argument with integer exponent.
pub fn poly_eval(a: &[f64], x: &Ser) -> Ser {
    let len = x.len();
    let mut acc = Ser::constant(*a.last().unwrap_or(&0.0), len);
    for v in a.iter().rev().skip(1) {
        acc = (&acc * x).add_scalar(*v);
    }
    acc
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl $tr<&Ser> for &Ser {
            type Output = Ser;
            fn $m(self, o: &Ser) -> Ser {
                $f(self, o)
            }
        }
        impl $tr<Ser> for Ser {
            type Output = Ser;
            fn $m(self, o: Ser) -> Ser {
                $f(&self, &o)
            }
        }
        impl $tr<&Ser> for Ser {
            type Output = Ser;
            fn $m(self, o: &Ser) -> Ser {
                $f(&self, o)
            }
        }
        impl $tr<Ser> for &Ser {
            type Output = Ser;
            fn $m(self, o: Ser) -> Ser {
                $f(self, &o)
            }
        }
    };
}

fn add_f(a: &Ser, b: &Ser) -> Ser {
    a.add_ser(b)
}
fn sub_f(a: &Ser, b: &Ser) -> Ser {
    a.add_ser(&b.scale(-1.0))
}
fn mul_f(a: &Ser, b: &Ser) -> Ser {
    a.mul_ser(b)
}
fn div_f(a: &Ser, b: &Ser) -> Ser {
    a.div_ser(b)
}

binop!(Add, add, add_f);
binop!(Sub, sub, sub_f);
binop!(Mul, mul, mul_f);
binop!(Div, div, div_f);

macro_rules! scalar_ops {
    ($t:ty) => {
        impl Add<f64> for $t {
            type Output = Ser;
            fn add(self, a: f64) -> Ser {
                self.add_scalar(a)
            }
        }
        impl Sub<f64> for $t {
            type Output = Ser;
            fn sub(self, a: f64) -> Ser {
                self.add_scalar(-a)
            }
        }
        impl Mul<f64> for $t {
            type Output = Ser;
            fn mul(self, a: f64) -> Ser {
                self.scale(a)
            }
        }
        impl Div<f64> for $t {
            type Output = Ser;
            fn div(self, a: f64) -> Ser {
                self.scale(1.0 / a)
            }
        }
        impl Add<$t> for f64 {
            type Output = Ser;
            fn add(self, s: $t) -> Ser {
                s.add_scalar(self)
            }
        }
        impl Sub<$t> for f64 {
            type Output = Ser;
            fn sub(self, s: $t) -> Ser {
                s.scale(-1.0).add_scalar(self)
            }
        }
        impl Mul<$t> for f64 {
            type Output = Ser;
            fn mul(self, s: $t) -> Ser {
                s.scale(self)
            }
        }
        impl Neg for $t {
            type Output = Ser;
            fn neg(self) -> Ser {
                self.scale(-1.0)
            }
        }
    };
}

scalar_ops!(Ser);
scalar_ops!(&Ser);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_of_sin_over_x() {
        let x = Ser::var(0.0, 10);
        let q = &x.sin() / &x;
        assert_eq!(q.e, 0.0);
        assert!((q.coef(0) - 1.0).abs() < 1e-15);
        assert!((q.coef(2) + 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn branch_exponents_carry() {
        let x = Ser::var(0.0, 8);
        let b = x.powf(0.4) * (1.0 + &x);
        let d = b.deriv();
        assert!((d.e + 0.6).abs() < 1e-12);
        assert!((d.c[0] - 0.4).abs() < 1e-15);
        assert!((d.c[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn exp_ln_roundtrip_and_recentre() {
        let x = Ser::var(0.3, 12);
        let y = x.exp().ln();
        for (a, b) in y.c.iter().zip(x.c.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        let e = Ser::var(0.0, 30).exp();
        let r = e.recentre(0.5, 4);
        assert!((r.c[0] - 0.5f64.exp()).abs() < 1e-14);
        assert!((r.c[2] - 0.5 * 0.5f64.exp()).abs() < 1e-14);
    }
}
