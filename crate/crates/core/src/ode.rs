//! High-order Taylor-series integrator for linear systems `y' = M(t) y`
//! with dense output. The coefficient matrix is supplied as truncated series
//! in the local step variable, so each step is a recurrence on series
//! coefficients (no stage evaluations).

use crate::error::{Error, Result};
use crate::series::Ser;

pub type CoefMatrix = Vec<Vec<Ser>>;

#[derive(Clone, Debug)]
pub struct OdeOpts {
    pub order: usize,
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOpts {
    fn default() -> Self {
        Self { order: 30, tol: 1e-17, max_steps: 20_000 }
    }
}

#[derive(Clone, Debug)]
struct Segment {
    t0: f64,
    h: f64,
    coef: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct DenseSolution {
    segs: Vec<Segment>,
    pub dim: usize,
    pub t_start: f64,
    pub t_end: f64,
}

/// Integrate from `t_start` to `t_end` (either direction). `matrix` returns
/// `M(t0 + x)` as series in `x` of the requested length; `hmax` caps the step
/// near singular points of the coefficients.
pub fn integrate_linear(
    matrix: &dyn Fn(f64, usize) -> CoefMatrix,
    hmax: &dyn Fn(f64) -> f64,
    y0: &[f64],
    t_start: f64,
    t_end: f64,
    opts: &OdeOpts,
) -> Result<DenseSolution> {
    let dim = y0.len();
    let n = opts.order;
    let dir = (t_end - t_start).signum();
    let mut t = t_start;
    let mut y = y0.to_vec();
    let mut segs = Vec::new();
    for _ in 0..opts.max_steps {
        if (t_end - t) * dir <= 0.0 {
            return Ok(DenseSolution { segs, dim, t_start, t_end });
        }
        let m = matrix(t, n + 1);
        let mut coef = vec![vec![0.0; n + 1]; dim];
        for i in 0..dim {
            coef[i][0] = y[i];
        }
        for j in 0..n {
            for i in 0..dim {
                let mut acc = 0.0;
                for (k, mik) in m[i].iter().enumerate() {
                    for l in 0..=j {
                        let a = mik.c[l];
                        if a != 0.0 {
                            acc += a * coef[k][j - l];
                        }
                    }
                }
                coef[i][j + 1] = acc / (j + 1) as f64;
            }
        }
        let scale = coef
            .iter()
            .map(|c| c[0].abs().max(c[1].abs() * 1e-3))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut h = hmax(t).min((t_end - t).abs());
        for c in &coef {
            for j in [n - 1, n] {
                if c[j] != 0.0 {
                    h = h.min((opts.tol * scale / c[j].abs()).powf(1.0 / j as f64));
                }
            }
        }
        if !(h > 1e-14) {
            return Err(Error::Integration(format!("step collapsed at t = {t}")));
        }
        let h = h * dir;
        for i in 0..dim {
            let mut acc = 0.0;
            for v in coef[i].iter().rev() {
                acc = acc * h + v;
            }
            y[i] = acc;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration(format!("non-finite state at t = {t}")));
        }
        segs.push(Segment { t0: t, h, coef });
        t += h;
        if ((t_end - t) * dir).abs() < 1e-15 {
            t = t_end;
        }
    }
    Err(Error::Integration("step limit reached".into()))
}

impl DenseSolution {
    fn find(&self, t: f64) -> &Segment {
        let idx = self.segs.partition_point(|s| {
            let lo = s.t0.min(s.t0 + s.h);
            let hi = s.t0.max(s.t0 + s.h);
            if s.h > 0.0 {
                hi < t
            } else {
                lo > t
            }
        });
        &self.segs[idx.min(self.segs.len() - 1)]
    }

    /// Taylor jet of component `i` at `t` with `len` coefficients.
    pub fn jet(&self, i: usize, t: f64, len: usize) -> Ser {
        let s = self.find(t);
        Ser::new(0.0, s.coef[i].clone()).recentre(t - s.t0, len)
    }

    pub fn value(&self, t: f64) -> Vec<f64> {
        (0..self.dim).map(|i| self.jet(i, t, 1).c[0]).collect()
    }

    pub fn steps(&self) -> usize {
        self.segs.len()
    }

    /// Whether `t` lies in the integrated interval.
    pub fn covers(&self, t: f64) -> bool {
        let lo = self.t_start.min(self.t_end);
        let hi = self.t_start.max(self.t_end);
        t >= lo - 1e-14 && t <= hi + 1e-14
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let mat = |_t: f64, len: usize| {
            vec![
                vec![Ser::constant(0.0, len), Ser::constant(1.0, len)],
                vec![Ser::constant(-1.0, len), Ser::constant(0.0, len)],
            ]
        };
        let sol = integrate_linear(&mat, &|_| 10.0, &[0.0, 1.0], 0.0, 10.0, &OdeOpts::default()).unwrap();
        let v = sol.value(7.3);
        assert!((v[0] - 7.3f64.sin()).abs() < 1e-13);
        let back = integrate_linear(&mat, &|_| 10.0, &[0.0, 1.0], 0.0, -3.0, &OdeOpts::default()).unwrap();
        assert!((back.value(-2.0)[0] + 2.0f64.sin()).abs() < 1e-14);
        let j = sol.jet(0, 2.0, 3);
        assert!((j.c[2] + 0.5 * 2.0f64.sin()).abs() < 1e-13);
    }
}
