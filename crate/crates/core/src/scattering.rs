//! Scattering problem `-Delta v - s(n-s) v = 0` on hyperbolic space, one
//! spherical-harmonic mode at a time.
//!
//! The regular solution is started from its Frobenius series at the pole
//! `t = pi/2`, carried toward the boundary with the Taylor integrator, and
//! matched (value and slope) to the two boundary Frobenius branches
//! `r^{n-s} sum a_j r^{2j}` and `r^s sum b_j r^{2j}` in the geodesic variable
//! `r = 2 tan(t/2)`.

use crate::boundary::BoundaryJet;
use crate::error::{Error, Result};
use crate::field::{ModeField, Part, Profile};
use crate::geometry::{Chart, Kind, ModelGeometry, Pt};
use crate::ode::{integrate_linear, DenseSolution, OdeOpts};
use crate::series::Ser;
use crate::specfun::{d_gamma_of, FracParams};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

const BOUNDARY_TERMS: usize = 90;
const POLE_TERMS: usize = 90;
const TAU0: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub k: usize,
    pub s: f64,
    /// leading coefficient of the `r^{n-s}` branch
    pub f0: f64,
    /// leading coefficient of the `r^s` branch
    pub g0: f64,
    /// `d_{s-n/2} G0/F0`: the scattering multiplier
    pub p2g: f64,
    /// `F2/F0`
    pub f2_ratio: f64,
    /// relative mismatch between series and integrated solution at a check point
    pub residual: f64,
}

/// Frobenius coefficients (in powers of `x = r^2`) of the branch `r^sigma`.
pub fn boundary_series(k: usize, s: f64, n: usize, sigma: f64, terms: usize) -> Result<Vec<f64>> {
    let nf = n as f64;
    let lam = k as f64 * (k as f64 + nf - 1.0);
    let ss = s * (nf - s);
    let p = [1.0, -0.5, 1.0 / 16.0];
    let q = [1.0 - nf, -0.5, (1.0 + nf) / 16.0];
    let r = [ss, -0.5 * ss - lam, ss / 16.0];
    let mut c = vec![0.0; terms];
    c[0] = 1.0;
    for j in 1..terms {
        let e_top = sigma + 2.0 * j as f64;
        let den = (e_top - s) * (e_top - nf + s);
        if den.abs() < 1e-12 {
            return Err(Error::Resonance(s));
        }
        let mut acc = 0.0;
        for i in 1..=2usize.min(j) {
            let e = sigma + 2.0 * (j - i) as f64;
            acc += (p[i] * e * (e - 1.0) + q[i] * e + r[i]) * c[j - i];
        }
        c[j] = -acc / den;
    }
    Ok(c)
}

/// Coefficients `a_j` of the regular pole solution `tau^k sum a_j tau^j`.
pub fn pole_series(k: usize, s: f64, n: usize, terms: usize) -> Vec<f64> {
    let nf = n as f64;
    let kf = k as f64;
    let lam = kf * (kf + nf - 1.0);
    let ss = s * (nf - s);
    let tau = Ser::var(0.0, terms + 2);
    let (sn, cs) = tau.sin_cos();
    // tau*(n cot + (n-1) tan) and -tau^2 (lam / sin^2 - s(n-s)/cos^2)
    let pt = (&tau * &cs / &sn) * nf + (&tau * &sn / &cs) * (nf - 1.0);
    let t2s = (&tau / &sn).powi(2);
    let t2c = (&tau / &cs).powi(2);
    let qt = t2s * (-lam) + t2c * ss;
    let mut a = vec![0.0; terms];
    a[0] = 1.0;
    for j in 1..terms {
        let jf = j as f64;
        let den = jf * (2.0 * kf + jf + nf - 1.0);
        let mut acc = 0.0;
        for i in 1..=j {
            let e = kf + (j - i) as f64;
            acc += (pt.coef(i as i64) * e + qt.coef(i as i64)) * a[j - i];
        }
        a[j] = -acc / den;
    }
    a
}

fn branch_eval(coef: &[f64], expo: f64, r: &Ser) -> Ser {
    let x = r * r;
    let mut acc = Ser::constant(*coef.last().unwrap(), r.len());
    for v in coef.iter().rev().skip(1) {
        acc = (&acc * &x).add_scalar(*v);
    }
    acc * r.powf(expo)
}

fn branch_value(coef: &[f64], expo: f64, r: f64) -> (f64, f64) {
    let x = r * r;
    let (mut v, mut dv) = (0.0, 0.0);
    for c in coef.iter().rev() {
        v = v * x + c;
    }
    for (j, c) in coef.iter().enumerate() {
        let e = expo + 2.0 * j as f64;
        dv += c * e * r.powf(e - 1.0);
    }
    (v * r.powf(expo), dv)
}

/// Full solution of one mode problem: series near both ends plus the
/// integrated middle section, normalized so the pole series starts with `tau^k`.
#[derive(Clone, Debug)]
pub struct ModeSolution {
    pub k: usize,
    pub s: f64,
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub pole: Vec<f64>,
    pub f: f64,
    pub g: f64,
    /// matching radius in t; below it the boundary series represent the solution
    pub t_match: f64,
    pub t_pole: f64,
    dense: DenseSolution,
    pub residual: f64,
}

pub fn match_radius(k: usize) -> f64 {
    (2.0 / (k as f64 + 1.0)).min(1.0)
}

pub fn solve_mode_full(k: usize, s: f64, n: usize, tol: f64) -> Result<ModeSolution> {
    let nf = n as f64;
    let d = 2.0 * s - nf;
    if (d / 2.0 - (d / 2.0).round()).abs() < 1e-9 {
        return Err(Error::Resonance(s));
    }
    if !(s > 0.5 * nf && s < nf) {
        return Err(Error::InvalidParams(format!("s = {s} outside (n/2, n)")));
    }
    let a = boundary_series(k, s, n, nf - s, BOUNDARY_TERMS)?;
    let b = boundary_series(k, s, n, s, BOUNDARY_TERMS)?;
    let pole = pole_series(k, s, n, POLE_TERMS);
    let kf = k as f64;
    let lam = kf * (kf + nf - 1.0);
    let ss = s * (nf - s);

    // start value from the pole series at tau0
    let (mut u, mut du) = (0.0, 0.0);
    for (j, c) in pole.iter().enumerate() {
        let e = kf + j as f64;
        u += c * TAU0.powf(e);
        if e > 0.0 {
            du += c * e * TAU0.powf(e - 1.0);
        }
    }
    let t_pole = FRAC_PI_2 - TAU0;
    let rm = match_radius(k);
    let t_match = 2.0 * (0.5 * rm).atan();
    let r_chk = 0.6 * rm;
    let t_chk = 2.0 * (0.5 * r_chk).atan();

    let matrix = move |t0: f64, len: usize| {
        let t = Ser::var(t0, len);
        let (sn, cs) = t.sin_cos();
        let p = (&cs / &sn) * (nf - 1.0) + (&sn / &cs) * nf;
        let q = (&cs * &cs).recip() * lam - (&sn * &sn).recip() * ss;
        vec![vec![Ser::constant(0.0, len), Ser::constant(1.0, len)], vec![q, p]]
    };
    let hmax = |t: f64| 0.3 * t.min(FRAC_PI_2 - t + 0.2).max(1e-6);
    let opts = OdeOpts::default();
    let dense = integrate_linear(&matrix, &hmax, &[u, -du], t_pole, t_chk, &opts)?;

    let ym = dense.value(t_match);
    let dtdr = 1.0 / (1.0 + 0.25 * rm * rm);
    let (p1, dp1) = branch_value(&a, nf - s, rm);
    let (p2, dp2) = branch_value(&b, s, rm);
    let det = p1 * dp2 - p2 * dp1;
    let vr = ym[1] * dtdr;
    let f = (ym[0] * dp2 - p2 * vr) / det;
    let g = (p1 * vr - ym[0] * dp1) / det;

    let yc = dense.value(t_chk);
    let (q1, _) = branch_value(&a, nf - s, r_chk);
    let (q2, _) = branch_value(&b, s, r_chk);
    let residual = ((f * q1 + g * q2 - yc[0]) / yc[0]).abs();
    if residual > tol {
        return Err(Error::FitResidual { residual, tol });
    }
    Ok(ModeSolution { k, s, n, a, b, pole, f, g, t_match, t_pole, dense, residual })
}

impl ModeSolution {
    pub fn result(&self) -> ScatteringResult {
        let g_s = self.s - 0.5 * self.n as f64;
        ScatteringResult {
            k: self.k,
            s: self.s,
            f0: self.f,
            g0: self.g,
            p2g: d_gamma_of(g_s) * self.g / self.f,
            f2_ratio: self.a[1],
            residual: self.residual,
        }
    }

    /// Exponents (in the geodesic variable) of the two boundary branches.
    pub fn exponents(&self) -> (f64, f64) {
        (self.n as f64 - self.s, self.s)
    }

    /// `v` as a series at a chart point of the hemisphere.
    /// `which`: 0 = both branches, 1 = F-branch only, 2 = G-branch only
    /// (the latter two only inside the matching radius).
    pub fn v(&self, pt: &Pt, which: u8) -> Ser {
        let len = pt.len();
        let near = match pt.chart {
            Chart::Boundary => true,
            Chart::At(t0) => t0 <= self.t_match,
        };
        if near {
            let r = pt.r();
            let (e1, e2) = self.exponents();
            let v1 = || branch_eval(&self.a, e1, &r) * self.f;
            let v2 = || branch_eval(&self.b, e2, &r) * self.g;
            return match which {
                1 => v1(),
                2 => v2(),
                _ => v1() + v2(),
            };
        }
        if which == 2 {
            return Ser::zero(len);
        }
        let t0 = pt.t.c[0];
        if t0 <= self.t_pole {
            self.dense.jet(0, t0, len)
        } else {
            let tau = (&pt.t * -1.0) + FRAC_PI_2;
            let kf = self.k as f64;
            let mut acc = Ser::constant(*self.pole.last().unwrap(), len);
            for c in self.pole.iter().rev().skip(1) {
                acc = (&acc * &tau).add_scalar(*c);
            }
            if self.k > 0 {
                acc = acc * tau.powi(kf as i32);
            }
            acc
        }
    }
}

/// Solve one mode and report the scattering data.
pub fn solve_mode(k: usize, s: f64, geo: &ModelGeometry, tol: f64) -> Result<ScatteringResult> {
    if geo.kind != Kind::Hemisphere {
        return Err(Error::InvalidParams("solve_mode needs the hemisphere model".into()));
    }
    Ok(solve_mode_full(k, s, geo.n, tol)?.result())
}

/// Apply `P_{2 gamma}` to a list of (degree, coefficient) pairs.
pub fn p2gamma_apply(modes: &[(usize, f64)], p: &FracParams, geo: &ModelGeometry) -> Result<Vec<(usize, f64)>> {
    let s = 0.5 * p.nf() + p.gamma;
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(modes.len());
    for &(k, c) in modes {
        let m = match cache.get(&k) {
            Some(m) => *m,
            None => {
                let m = solve_mode(k, s, geo, 1e-9)?.p2g;
                cache.insert(k, m);
                m
            }
        };
        out.push((k, m * c));
    }
    Ok(out)
}

/// Extension profile `rho^{-(n-2 gamma)/2} sum_i c_i v_i` on a (possibly
/// rescaled) hemisphere.
pub struct ExtensionProfile {
    geo: ModelGeometry,
    weight: f64,
    beta: f64,
    sols: Vec<(f64, Arc<ModeSolution>)>,
    split: f64,
}

impl ExtensionProfile {
    fn class_of(&self, e_u: f64) -> Part {
        let r = |x: f64| ((x / 2.0) - (x / 2.0).round()).abs() < 1e-9;
        if r(e_u) {
            Part::Smooth
        } else if r(e_u - self.beta) {
            Part::Branch
        } else {
            panic!("branch exponent {e_u} outside the admissible classes")
        }
    }
}

impl Profile for ExtensionProfile {
    fn eval(&self, pt: &Pt, part: Part) -> Ser {
        let len = pt.len();
        let rho = self.geo.sigma_at(pt).exp() * &pt.s;
        let pre = rho.powf(-self.weight);
        let near = match pt.chart {
            Chart::Boundary => true,
            Chart::At(t0) => t0 <= self.split,
        };
        let mut acc: Option<Ser> = None;
        for (c, sol) in &self.sols {
            let v = if near && part != Part::Whole {
                let (e1, e2) = sol.exponents();
                let mut v: Option<Ser> = None;
                for (which, e) in [(1u8, e1), (2u8, e2)] {
                    if self.class_of(e - self.weight) == part {
                        let w = sol.v(pt, which);
                        v = Some(match v {
                            None => w,
                            Some(x) => x + w,
                        });
                    }
                }
                match v {
                    Some(v) => v,
                    None => continue,
                }
            } else if !near && part == Part::Branch {
                continue;
            } else {
                sol.v(pt, 0)
            };
            let term = v * *c;
            acc = Some(match acc {
                None => term,
                Some(a) => a + term,
            });
        }
        match acc {
            Some(a) => a * &pre,
            None => Ser::zero(len),
        }
    }

    fn split(&self) -> f64 {
        self.split
    }
}

/// Extension of boundary data `(f, psi)` for one mode: in the kernel of the
/// weighted conformal Laplacian (gamma < 1) or Paneitz operator (gamma > 1).
pub fn extension_mode(k: usize, f: f64, psi: f64, p: &FracParams, geo: &ModelGeometry) -> Result<ModeField> {
    if geo.kind != Kind::Hemisphere {
        return Err(Error::InvalidParams("extension needs the hemisphere model".into()));
    }
    if !p.is_high() && psi != 0.0 {
        return Err(Error::InvalidParams("psi data only exist for gamma > 1".into()));
    }
    let nf = p.nf();
    let mut sols = Vec::new();
    // rho-hat / r tends to e^{sigma_0} at the boundary
    let sig0 = geo.sigma0();
    let w = p.weight();
    if f != 0.0 {
        let sol = solve_mode_full(k, 0.5 * nf + p.gamma, p.n, 1e-9)?;
        sols.push((f * (w * sig0).exp() / sol.f, Arc::new(sol)));
    }
    if psi != 0.0 {
        let sol = solve_mode_full(k, 0.5 * nf + 2.0 - p.gamma, p.n, 1e-9)?;
        sols.push((psi * ((w + p.beta()) * sig0).exp() / sol.f, Arc::new(sol)));
    }
    if sols.is_empty() {
        return Ok(ModeField::zero(k as f64));
    }
    let split = sols.iter().map(|(_, s)| s.t_match).fold(f64::INFINITY, f64::min);
    let prof = ExtensionProfile { geo: geo.clone(), weight: p.weight(), beta: p.beta(), sols, split };
    Ok(ModeField::from_profile(k as f64, Arc::new(prof)))
}

/// Per-mode extensions of `f = sum f_k Y_k`, `psi = sum psi_k Y_k`.
pub fn build_extension(
    f_modes: &[(usize, f64)],
    psi_modes: &[(usize, f64)],
    p: &FracParams,
    geo: &ModelGeometry,
) -> Result<Vec<ModeField>> {
    if !p.is_high() && !psi_modes.is_empty() {
        return Err(Error::InvalidParams("psi data only exist for gamma > 1".into()));
    }
    let mut ks: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for &(k, c) in f_modes {
        ks.entry(k).or_default().0 += c;
    }
    for &(k, c) in psi_modes {
        ks.entry(k).or_default().1 += c;
    }
    ks.into_iter().map(|(k, (f, psi))| extension_mode(k, f, psi, p, geo)).collect()
}

/// Least-squares fit of the boundary expansion from samples of a field near
/// `rho = 0`. Returns the jet and the condition number of the fit.
pub fn jet_of_solution(field: &ModeField, p: &FracParams, geo: &ModelGeometry) -> Result<(BoundaryJet, f64)> {
    let b = p.beta();
    let mut powers = Vec::new();
    for j in 0..5 {
        powers.push(2.0 * j as f64);
        powers.push(b + 2.0 * j as f64);
    }
    let npts = 60;
    let (lo, hi) = (0.004f64, 0.1f64);
    let mut a = DMatrix::<f64>::zeros(npts, powers.len());
    let mut y = DVector::<f64>::zeros(npts);
    for i in 0..npts {
        let s = lo * (hi / lo).powf(i as f64 / (npts - 1) as f64);
        let t = match geo.kind {
            Kind::Hemisphere => s.asin(),
            Kind::HalfSpace => s,
        };
        let pt = geo.point(Chart::At(t), 1);
        let rho = geo.sigma_at(&pt).exp().value() * s;
        y[i] = field.value_at(geo, t);
        for (j, e) in powers.iter().enumerate() {
            a[(i, j)] = (rho / hi).powf(*e);
        }
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = sv.max() / sv.min().max(f64::MIN_POSITIVE);
    if cond > 1e14 {
        return Err(Error::IllConditioned(cond));
    }
    let mut x = svd.solve(&y, 0.0).map_err(|e| Error::InvalidParams(e.to_string()))?;
    for (j, e) in powers.iter().enumerate() {
        x[j] /= hi.powf(*e);
    }
    let jet = if p.is_high() {
        BoundaryJet { f: x[0], psi: x[1], f2: x[2], psi2: x[3] }
    } else {
        BoundaryJet { f: x[0], psi: x[1], f2: 0.0, psi2: 0.0 }
    };
    Ok((jet, cond))
}
