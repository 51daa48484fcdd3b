//! Sharp Sobolev trace inequalities on the hemisphere for zonal data.
//!
//! Boundary functions are zonal on `S^n`: `f = sum_k f_k Y_k` with `Y_k` the
//! degree-k zonal harmonic normalized by `oint Y_k^2 = 1`. In `x = cos(theta)`
//! the measure is `|S^{n-1}| (1 - x^2)^{(n-2)/2} dx`.

use crate::energy::{energy, RESIDUAL_TS};
use crate::error::{Error, Result};
use crate::field::ModeField;
use crate::geometry::{DefiningFunctionJet, ModelGeometry};
use crate::ops::{relative_residual, Op};
use crate::quad::gauss_jacobi;
use crate::scattering::build_extension;
use crate::specfun::{c2_formula, lieb_constant, ln_gamma, sharp_constant, sphere_multiplier_of, sphere_volume, FracParams};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Coefficients below this fraction of the largest are left out of the
/// energy assembly; their contribution is added to the budget instead.
const NEGLIGIBLE: f64 = 1e-14;

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("zonal synthesis needs n >= 2, got {n}")));
    }
    Ok(())
}

/// `Y_0(x), ..., Y_kmax(x)` on `S^n`.
pub fn zonal_harmonics(n: usize, kmax: usize, x: f64) -> Vec<f64> {
    let lam = 0.5 * (n as f64 - 1.0);
    let area = sphere_volume(n - 1);
    let mut g = vec![0.0; kmax + 1];
    g[0] = 1.0;
    if kmax >= 1 {
        g[1] = 2.0 * lam * x;
    }
    for k in 2..=kmax {
        let kf = k as f64;
        g[k] = (2.0 * x * (kf + lam - 1.0) * g[k - 1] - (kf + 2.0 * lam - 2.0) * g[k - 2]) / kf;
    }
    g.iter()
        .enumerate()
        .map(|(k, v)| {
            let kf = k as f64;
            let ln_h = PI.ln() + (1.0 - 2.0 * lam) * std::f64::consts::LN_2 + ln_gamma(kf + 2.0 * lam)
                - ln_gamma(kf + 1.0)
                - (kf + lam).ln()
                - 2.0 * ln_gamma(lam);
            v / (area * ln_h.exp()).sqrt()
        })
        .collect()
}

/// Latitude rule: nodes in `x` and weights including `|S^{n-1}|`.
fn latitude_rule(n: usize, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let a = 0.5 * (n as f64 - 2.0);
    let (x, w) = gauss_jacobi(nodes, a, a);
    let area = sphere_volume(n - 1);
    (x, w.iter().map(|v| v * area).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZonalModes {
    pub n: usize,
    pub coef: Vec<(usize, f64)>,
    /// estimated l2 norm of the dropped coefficients
    pub tail: f64,
}

/// Zonal coefficients of `c (1 + a x)^{-(n - 2 gamma)/2}` up to degree `kmax`.
pub fn extremal_modes(a: f64, c: f64, p: &FracParams, kmax: usize, nodes: usize, tol: f64) -> Result<ZonalModes> {
    let n = p.n;
    check_dim(n)?;
    if !(a.abs() < 1.0) {
        return Err(Error::InvalidParams(format!("|a| = {} must be below 1", a.abs())));
    }
    if nodes <= kmax {
        return Err(Error::GridTooSmall(nodes));
    }
    let e = -0.5 * (n as f64 - 2.0 * p.gamma);
    let (xs, ws) = latitude_rule(n, nodes);
    let mut coef = vec![0.0; kmax + 1];
    for (x, w) in xs.iter().zip(&ws) {
        let fx = c * (1.0 + a * x).powf(e);
        for (k, y) in zonal_harmonics(n, kmax, *x).iter().enumerate() {
            coef[k] += w * fx * y;
        }
    }
    // coefficients decay like |a|^k
    let r = a.abs();
    let last = coef[kmax].abs().max(if kmax > 0 { coef[kmax - 1].abs() * r } else { 0.0 });
    let tail = if r == 0.0 { 0.0 } else { 2.0 * last * r / (1.0 - r) };
    let scale = coef.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if tail > tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Truncation { tail, tol: tol * scale });
    }
    Ok(ZonalModes { n, coef: coef.into_iter().enumerate().collect(), tail })
}

/// `(oint |f|^q)^{1/q}` for zonal `f`, by Gauss-Jacobi quadrature in latitude.
pub fn lq_norm(modes: &[(usize, f64)], n: usize, q: f64, nodes: usize) -> Result<f64> {
    check_dim(n)?;
    let kmax = modes.iter().map(|m| m.0).max().unwrap_or(0);
    if nodes <= kmax {
        return Err(Error::GridTooSmall(nodes));
    }
    let (xs, ws) = latitude_rule(n, nodes);
    let mut s = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let y = zonal_harmonics(n, kmax, *x);
        let fx: f64 = modes.iter().map(|(k, c)| c * y[*k]).sum();
        s += w * fx.abs().powf(q);
    }
    Ok(s.powf(1.0 / q))
}

/// `2n / (n - 2 gamma)`.
pub fn trace_exponent(n: usize, g: f64) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0 * g)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Lieb {
    /// `oint f P_{2 gamma} f`
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// `|lhs - rhs|` change when the latitude grid is halved
    pub quad_err: f64,
}

fn lieb_of(f: &[(usize, f64)], n: usize, g: f64, nodes: usize) -> Result<Lieb> {
    let lhs: f64 = f.iter().map(|(k, c)| sphere_multiplier_of(*k, n, g) * c * c).sum();
    let q = trace_exponent(n, g);
    let cst = lieb_constant(n, g);
    let rhs = cst * lq_norm(f, n, q, nodes)?.powi(2);
    let coarse = cst * lq_norm(f, n, q, nodes / 2).unwrap_or(0.0).powi(2);
    Ok(Lieb { lhs, rhs, gap: lhs - rhs, quad_err: (rhs - coarse).abs() })
}

/// Sharp fractional Sobolev inequality on the round `S^n` for zonal `f`.
pub fn verify_lieb(f: &[(usize, f64)], p: &FracParams, nodes: usize) -> Result<Lieb> {
    lieb_of(f, p.n, p.gamma, nodes)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SobolevReport {
    pub gamma: f64,
    pub n: usize,
    /// full energy `Q(U, U)`
    pub energy: f64,
    pub interior: f64,
    pub boundary: f64,
    /// `||f||_q^2` with `q = 2n/(n - 2 gamma)`
    pub f_norm_sq: f64,
    /// `||psi||_q^2` with `q = 2n/(n - 4 + 2 gamma)`
    pub psi_norm_sq: f64,
    /// `c^{(1)}` or `c^{(2)}`
    pub constant: f64,
    /// coefficient of the psi term as stated: a quarter of `c^{(2)}_{n, 2-gamma}`
    pub psi_constant: f64,
    /// the psi coefficient attained by solutions: `c^{(2)}_{n, 2-gamma}`
    pub psi_constant_sharp: f64,
    pub rhs: f64,
    pub gap: f64,
    /// gap against the sharp psi coefficient
    pub sharp_gap: f64,
    /// `energy / f_norm_sq`
    pub quotient: f64,
    /// largest relative residual of the interior equation over the modes
    pub residual: f64,
    pub budget: f64,
    pub equality: bool,
}

/// Check the sharp trace inequality for `U = extension(f, psi) + extra`.
/// For gamma in (0,1) `psi` must be empty and the first-order constant is
/// used. `extra` fields need vanishing boundary data.
pub fn verify_trace_sobolev(
    f: &[(usize, f64)],
    psi: &[(usize, f64)],
    extra: &[ModeField],
    p: &FracParams,
    nodes: usize,
) -> Result<SobolevReport> {
    let n = p.n;
    check_dim(n)?;
    let g = p.gamma;
    let high = p.is_high();
    if !high && psi.iter().any(|m| m.1 != 0.0) {
        return Err(Error::WrongRange(g));
    }
    let geo = ModelGeometry::hemisphere(n);
    let dj = DefiningFunctionJet::hemisphere_canonical();
    let scale = f.iter().chain(psi).fold(0.0f64, |m, v| m.max(v.1.abs()));
    let keep = |m: &&(usize, f64)| m.1.abs() > NEGLIGIBLE * scale;
    let fk: Vec<(usize, f64)> = f.iter().filter(keep).copied().collect();
    let pk: Vec<(usize, f64)> = psi.iter().filter(keep).copied().collect();
    let mut dropped = 0.0;
    for (k, c) in f.iter().filter(|m| !keep(m)) {
        dropped += sphere_multiplier_of(*k, n, g) * c * c;
    }
    for (k, c) in psi.iter().filter(|m| !keep(m)) {
        dropped += sphere_multiplier_of(*k, n, 2.0 - g) * c * c;
    }

    let mut by_k: BTreeMap<i64, ModeField> = BTreeMap::new();
    for u in build_extension(&fk, &pk, p, &geo)?.into_iter().chain(extra.iter().cloned()) {
        let k = u.degree.round() as i64;
        let merged = match by_k.remove(&k) {
            Some(v) => v.add(&u),
            None => u,
        };
        by_k.insert(k, merged);
    }
    let fields: Vec<ModeField> = by_k.into_values().collect();
    let e = energy(&fields, &dj, p, &geo)?;
    let op = if high { Op::L4 } else { Op::L2 };
    let residual = fields
        .iter()
        .filter(|u| !u.is_zero())
        .map(|u| relative_residual(u, &geo, p, op, &RESIDUAL_TS))
        .fold(0.0, f64::max);

    let f_lieb = lieb_of(f, n, g, nodes)?;
    let constant = sharp_constant(if high { 2 } else { 1 }, p)?;
    let cst_over_lieb = constant / lieb_constant(n, g);
    let f_norm_sq = f_lieb.rhs / lieb_constant(n, g);
    let (psi_norm_sq, psi_constant, psi_constant_sharp, psi_quad) = if high && !psi.is_empty() {
        let l = lieb_of(psi, n, 2.0 - g, nodes)?;
        let c = c2_formula(n, 2.0 - g);
        (l.rhs / lieb_constant(n, 2.0 - g), 0.25 * c, c, l.quad_err * c / lieb_constant(n, 2.0 - g))
    } else if high {
        (0.0, 0.25 * c2_formula(n, 2.0 - g), c2_formula(n, 2.0 - g), 0.0)
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };
    let energy_value = e.total;
    let rhs = constant * f_norm_sq + psi_constant * psi_norm_sq;
    let sharp_rhs = constant * f_norm_sq + psi_constant_sharp * psi_norm_sq;
    let budget = f_lieb.quad_err * cst_over_lieb + psi_quad + dropped * cst_over_lieb.max(1.0) + 1e-9 * energy_value.abs();
    let gap = energy_value - rhs;
    Ok(SobolevReport {
        gamma: g,
        n,
        energy: energy_value,
        interior: e.interior,
        boundary: e.boundary,
        f_norm_sq,
        psi_norm_sq,
        constant,
        psi_constant,
        psi_constant_sharp,
        rhs,
        gap,
        sharp_gap: energy_value - sharp_rhs,
        quotient: if f_norm_sq > 0.0 { energy_value / f_norm_sq } else { 0.0 },
        residual,
        budget,
        equality: gap.abs() <= budget,
    })
}

/// Sobolev quotient of the extension of the extremal with parameter `a`.
pub fn extremal_quotient(a: f64, p: &FracParams, kmax: usize, nodes: usize) -> Result<SobolevReport> {
    let m = extremal_modes(a, 1.0, p, kmax, nodes, 1e-8)?;
    verify_trace_sobolev(&m.coef, &[], &[], p, nodes)
}
