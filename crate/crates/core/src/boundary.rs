//! Conformally covariant boundary operators for the weighted conformal
//! Laplacian (gamma < 1) and weighted Paneitz operator (gamma > 1).
//!
//! Each operator is evaluated two ways on radial model geometries: exactly,
//! as the constant term of its boundary series, and at finite distance
//! `h` from the boundary with Richardson elimination of the two leading
//! error exponents.

use crate::error::{Error, Result};
use crate::field::{ModeField, Part};
use crate::geometry::{conformal_rescale, Chart, DefiningFunctionJet, Kind, Local, ModelGeometry, SigmaFn};
use crate::series::Ser;
use crate::specfun::FracParams;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

const LEN: usize = 14;
const EXTRA: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryJet {
    pub f: f64,
    pub psi: f64,
    pub f2: f64,
    pub psi2: f64,
}

/// `(B0, B_{2 gamma})` from the jets, gamma in (0,1).
pub fn b_ops_low(jet: &BoundaryJet, dj: &DefiningFunctionJet, p: &FracParams) -> Result<(f64, f64)> {
    if p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    let g = p.gamma;
    Ok((jet.f, -2.0 * g * (jet.psi + 0.5 * (p.nf() - 2.0 * g) * dj.phi * jet.f)))
}

pub fn gamma_mean_curvature(dj: &DefiningFunctionJet, p: &FracParams) -> f64 {
    -2.0 * p.nf() * p.gamma * dj.phi
}

/// `(B0, B_{2gamma-2}, B_2, B_{2gamma})` of one mode on the round hemisphere
/// with the geodesic compactification.
pub fn b_ops_high(jet: &BoundaryJet, geo: &ModelGeometry, p: &FracParams, k: usize) -> Result<(f64, f64, f64, f64)> {
    if !p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    let (g, n) = (p.gamma, p.nf());
    let lam = geo.lambda(k as f64) / geo.w0().powi(2);
    let jb = geo.j_bar();
    let b2 = ((2.0 - g) / (g - 1.0)) * (lam + 0.5 * (n - 2.0 * g) * jb) * jet.f + 4.0 * (2.0 - g) * jet.f2;
    let b2g = 8.0 * g * (g - 1.0) * jet.psi2 - 2.0 * g * (lam + 0.5 * (n + 2.0 * g - 4.0) * jb) * jet.psi;
    Ok((jet.f, 2.0 * (1.0 - g) * jet.psi, b2, b2g))
}

/// Boundary operators. `B2W`/`B2gW` are the general-weight operators whose
/// covariance holds for every weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BOp {
    B0,
    B2gm2,
    B2,
    B2g,
    B2W(f64),
    B2gW(f64),
}

impl BOp {
    /// Homogeneity degree under constant rescaling.
    pub fn degree(&self, p: &FracParams) -> f64 {
        match self {
            BOp::B0 => 0.0,
            BOp::B2gm2 => p.m - 1.0,
            BOp::B2 | BOp::B2W(_) => -2.0,
            BOp::B2g | BOp::B2gW(_) => -2.0 * p.gamma,
        }
    }

    /// Conformal weight of the argument.
    pub fn weight(&self, p: &FracParams) -> f64 {
        match self {
            BOp::B2W(w) | BOp::B2gW(w) => *w,
            _ => -p.weight(),
        }
    }

    /// The two leading error exponents of the finite-distance evaluation.
    pub fn error_exponents(&self, p: &FracParams) -> (f64, f64) {
        let b = p.beta();
        match self {
            BOp::B0 | BOp::B2 | BOp::B2W(_) => (b, 2.0),
            _ => (2.0 - b, 2.0),
        }
    }

    fn check(&self, p: &FracParams) -> Result<()> {
        let ok = match self {
            BOp::B0 | BOp::B2g => true,
            _ => p.is_high(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::WrongRange(p.gamma))
        }
    }
}

/// Local boundary-geometric series used by the operators.
struct Ctx {
    l: Local,
    /// `eta = -nu e_s`
    nu: Ser,
    rho_m: Ser,
    /// `P(eta, eta)`
    pe: Ser,
    /// `rho^{-1} Delta rho`
    rli: Ser,
    jbar: f64,
    /// eigenvalue of the boundary Laplacian
    lapbar: f64,
    lam: f64,
}

impl Ctx {
    fn new(geo: &ModelGeometry, p: &FracParams, chart: Chart, len: usize, degree: f64) -> Self {
        let l = geo.local(chart, len + EXTRA, p);
        let rhat = geo.geodesic_r(&l.pt);
        let nu = (&l.rho / &rhat) * l.ds(&rhat);
        let rho_m = l.rho.powf(p.m);
        let pe = &(&nu * &nu) * &l.schouten().0;
        let rli = l.lap_rho() / &l.rho;
        let lam = geo.lambda(degree);
        let lapbar = -lam / geo.w0().powi(2);
        Ctx { l, nu, rho_m, pe, rli, jbar: geo.j_bar(), lapbar, lam }
    }

    fn eta(&self, x: &Ser) -> Ser {
        -(&self.nu * &self.l.ds(x))
    }

    fn rho_m_eta(&self, x: &Ser) -> Ser {
        &self.rho_m * &self.eta(x)
    }

    /// `Hess U(eta, eta) + m rho^{-1} d_rho U`
    fn hess(&self, u: &Ser) -> Ser {
        let us = self.l.ds(u);
        let a = &(&self.nu * &self.nu) * &self.l.ds(&us);
        let b = (&us / &(&self.l.rho * &self.l.ds(&self.l.rho))) * self.l.m;
        (a + b).drop_tiny_below(u.lead() - 1.0, 1e-10 * u.lead_scale())
    }

    fn mix(&self) -> Ser {
        (&self.pe + &self.rli) + self.jbar
    }

    fn t2(&self, p: &FracParams) -> Ser {
        let (g, m, n) = (p.gamma, p.m, p.nf());
        let inner = &self.pe - &(self.mix() * (m / (n + 1.0)));
        -inner + (2.0 - g) / (g - 1.0) * self.jbar
    }

    fn s2(&self, p: &FracParams) -> Ser {
        let (g, m, n) = (p.gamma, p.m, p.nf());
        let cj = 0.5 * (n - 2.0 * g) + (n + 2.0 * g - 4.0) / (2.0 * (g - 1.0));
        &self.pe * (0.5 * (n - 2.0 * g - 4.0)) - self.mix() * (m * (n - 2.0 * g + 4.0) / (2.0 * (n + 1.0))) + cj * self.jbar
    }

    fn t2w(&self, p: &FracParams, w: f64) -> Ser {
        let (m, n) = (p.m, p.nf());
        let den = 2.0 * m + n + 2.0 * w - 4.0;
        let cj = (m + w - 1.0) * (m + n + 2.0 * w - 1.0) / den - w;
        -(&self.pe * (m + n + 3.0 * w - 1.0)) - self.mix() * (m * (m + n + w - 1.0) / (n + 1.0)) + cj * self.jbar
    }

    fn delta_eta(&self) -> Ser {
        let l = &self.l;
        -(l.ds(&self.nu) + &(&self.nu * &(&l.ws / &l.w)) * l.n)
    }

    fn apply(&self, op: BOp, p: &FracParams, u: &Ser) -> Ser {
        let (g, m, n) = (p.gamma, p.m, p.nf());
        match op {
            BOp::B0 => u.clone(),
            BOp::B2gm2 => self.rho_m_eta(u),
            BOp::B2 => {
                let c = (2.0 - g) / (g - 1.0);
                u * (-c * self.lapbar) + self.hess(u) + &self.t2(p) * u * (0.5 * (n - 2.0 * g))
            }
            BOp::B2W(w) => {
                let c = (n + 2.0 * w - 2.0) / (m + 1.0);
                let inner = &self.pe - &(self.mix() * (m / (n + 1.0)));
                let pot = (inner * (-c) + self.jbar) * w;
                u * (-self.lapbar) + self.hess(u) * c - &pot * u
            }
            BOp::B2g if !p.is_high() => {
                let de = self.delta_eta();
                &self.rho_m * &(self.eta(u) + &(u * &de) * ((n - 2.0 * g) / (2.0 * n)))
            }
            BOp::B2g => {
                let lu = self.l.lap_phi(u, self.lam);
                let rmu = self.rho_m_eta(u);
                let rmj = self.rho_m_eta(&self.l.j_phi());
                -self.rho_m_eta(&lu) + &rmu * (-self.lapbar / (g - 1.0)) + &self.s2(p) * &rmu
                    + &rmj * u * (0.5 * (n - 2.0 * g))
            }
            BOp::B2gW(w) => {
                let lu = self.l.lap_phi(u, self.lam);
                let rmu = self.rho_m_eta(u);
                let rmj = self.rho_m_eta(&self.l.j_phi());
                let c = (m + n + 2.0 * w - 1.0) / (2.0 * m + n + 2.0 * w - 4.0);
                -self.rho_m_eta(&lu) + &rmu * (c * self.lapbar) + &self.t2w(p, w) * &rmu - &rmj * u * w
            }
        }
    }
}

fn limit(s: &Ser) -> Result<f64> {
    let scale = s.max_abs();
    s.limit_at_zero(scale, 1e-7)
}

/// Exact value of a boundary operator on one mode field.
pub fn b_exact(op: BOp, u: &ModeField, p: &FracParams, geo: &ModelGeometry) -> Result<f64> {
    op.check(p)?;
    let ctx = Ctx::new(geo, p, Chart::Boundary, LEN, u.degree);
    let mut acc = 0.0;
    for part in [Part::Smooth, Part::Branch] {
        let v = u.eval(&ctx.l.pt, part);
        if v.c.iter().all(|x| *x == 0.0) {
            continue;
        }
        acc += limit(&ctx.apply(op, p, &v))?;
    }
    Ok(acc)
}

/// Raw value of the operator's defining expression at canonical distance `h`.
pub fn b_at(op: BOp, u: &ModeField, p: &FracParams, geo: &ModelGeometry, h: f64) -> Result<f64> {
    op.check(p)?;
    let t = match geo.kind {
        Kind::Hemisphere => h.asin(),
        Kind::HalfSpace => h,
    };
    let ctx = Ctx::new(geo, p, Chart::At(t), 1, u.degree);
    let v = u.eval(&ctx.l.pt, Part::Whole);
    Ok(ctx.apply(op, p, &v).value())
}

/// Eliminate `a h^e1 + b h^e2` from values at `h, h/2, h/4`.
pub fn richardson(v: [f64; 3], h: f64, e: (f64, f64)) -> f64 {
    let hs = [h, 0.5 * h, 0.25 * h];
    let a = Matrix3::from_fn(|i, j| match j {
        0 => 1.0,
        1 => hs[i].powf(e.0),
        _ => hs[i].powf(e.1),
    });
    let x = a.lu().solve(&Vector3::new(v[0], v[1], v[2])).expect("distinct exponents");
    x[0]
}

/// Finite-distance value with the two leading error terms eliminated.
pub fn b_finite(op: BOp, u: &ModeField, p: &FracParams, geo: &ModelGeometry, h: f64) -> Result<f64> {
    let v = [b_at(op, u, p, geo, h)?, b_at(op, u, p, geo, 0.5 * h)?, b_at(op, u, p, geo, 0.25 * h)?];
    Ok(richardson(v, h, op.error_exponents(p)))
}

/// Boundary limits of `T_2` and `S_2`.
pub fn curvature_coefficients(geo: &ModelGeometry, p: &FracParams) -> Result<(f64, f64)> {
    if !p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    let ctx = Ctx::new(geo, p, Chart::Boundary, LEN, 0.0);
    Ok((limit(&ctx.t2(p))?, limit(&ctx.s2(p))?))
}

/// `H_{2gamma}` as the limit of `rho^m delta eta` (gamma < 1).
pub fn gamma_mean_curvature_limit(geo: &ModelGeometry, p: &FracParams) -> Result<f64> {
    if p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    let ctx = Ctx::new(geo, p, Chart::Boundary, LEN, 0.0);
    limit(&(&ctx.rho_m * &ctx.delta_eta()))
}

/// Boundary limit of `rho^m eta J_phi`.
pub fn rho_eta_jphi_limit(geo: &ModelGeometry, p: &FracParams) -> Result<f64> {
    let ctx = Ctx::new(geo, p, Chart::Boundary, LEN, 0.0);
    limit(&ctx.rho_m_eta(&ctx.l.j_phi()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovarianceReport {
    /// residual between the exact boundary limits
    pub exact: f64,
    /// finite-distance residuals at `h, h/2, h/4`
    pub finite: [f64; 3],
    /// `finite[i] / finite[i+1]`
    pub ratios: [f64; 2],
    pub h: f64,
}

/// Compare `B` on `e^{2 sigma} g` with `e^{(w+k) sigma} B(e^{-w sigma} U)` on `g`.
pub fn covariance_check(
    op: BOp,
    sigma: &SigmaFn,
    u: &ModeField,
    p: &FracParams,
    geo: &ModelGeometry,
    h: f64,
) -> Result<CovarianceReport> {
    let hat = conformal_rescale(geo, sigma.clone(), p)?;
    let s0 = hat.sigma0() - geo.sigma0();
    let (w, k) = (op.weight(p), op.degree(p));
    let pre = ((w + k) * s0).exp();
    let v = u.times_exp(sigma, -w);
    let exact = (b_exact(op, u, p, &hat)? - pre * b_exact(op, &v, p, geo)?).abs();
    let mut finite = [0.0; 3];
    for (i, f) in finite.iter_mut().enumerate() {
        let hh = h * 0.5f64.powi(i as i32);
        *f = (b_finite(op, u, p, &hat, hh)? - pre * b_finite(op, &v, p, geo, hh)?).abs();
    }
    let ratios = [finite[0] / finite[1], finite[1] / finite[2]];
    Ok(CovarianceReport { exact, finite, ratios, h })
}

/// Natural boundary quantities appearing in the linearization identities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    /// boundary Laplacian of the trace
    LapBar,
    /// `Hess U(eta,eta) + m rho^{-1} d_rho U`
    Hess,
    JbarU,
    UPeta,
    /// `rho^{-1} U Delta rho`
    URhoLap,
    /// boundary Laplacian of `rho^m eta U`
    LapBarRhoEta,
    /// `rho^m eta Delta_phi U`
    RhoEtaLap,
    /// `U rho^m eta J_phi`
    URhoEtaJ,
}

impl Quantity {
    pub const ALL: [Quantity; 8] = [
        Quantity::LapBar,
        Quantity::Hess,
        Quantity::JbarU,
        Quantity::UPeta,
        Quantity::URhoLap,
        Quantity::LapBarRhoEta,
        Quantity::RhoEtaLap,
        Quantity::URhoEtaJ,
    ];

    pub fn degree(&self, p: &FracParams) -> f64 {
        match self {
            Quantity::LapBar | Quantity::Hess | Quantity::JbarU | Quantity::UPeta | Quantity::URhoLap => -2.0,
            _ => -2.0 * p.gamma,
        }
    }

    fn series(&self, c: &Ctx, u: &Ser) -> Ser {
        match self {
            Quantity::LapBar => u * c.lapbar,
            Quantity::Hess => c.hess(u),
            Quantity::JbarU => u * c.jbar,
            Quantity::UPeta => &c.pe * u,
            Quantity::URhoLap => &c.rli * u,
            Quantity::LapBarRhoEta => c.rho_m_eta(u) * c.lapbar,
            Quantity::RhoEtaLap => c.rho_m_eta(&c.l.lap_phi(u, c.lam)),
            Quantity::URhoEtaJ => &c.rho_m_eta(&c.l.j_phi()) * u,
        }
    }

    /// Exact boundary value.
    pub fn value(&self, u: &ModeField, p: &FracParams, geo: &ModelGeometry) -> Result<f64> {
        let ctx = Ctx::new(geo, p, Chart::Boundary, LEN, u.degree);
        let mut acc = 0.0;
        for part in [Part::Smooth, Part::Branch] {
            let v = u.eval(&ctx.l.pt, part);
            if v.c.iter().all(|x| *x == 0.0) {
                continue;
            }
            acc += limit(&self.series(&ctx, &v))?;
        }
        Ok(acc)
    }

    /// Right-hand side of the linearization identity for a radial `sigma`
    /// (all tangential derivatives of `sigma` vanish). Gamma in (1,2) only.
    pub fn linearization(&self, sigma: &SigmaFn, u: &ModeField, p: &FracParams, geo: &ModelGeometry, w: f64) -> Result<f64> {
        if !p.is_high() {
            return Err(Error::WrongRange(p.gamma));
        }
        let ctx = Ctx::new(geo, p, Chart::Boundary, LEN, u.degree);
        let s = sigma(&ctx.l.pt);
        let ss = ctx.l.ds(&s);
        let hess_s = limit(&(&(&ctx.nu * &ctx.nu) * &ctx.l.ds(&ss)))?;
        let drho_s = limit(&(&ss / &(&ctx.l.rho * &ctx.l.ds(&ctx.l.rho))))?;
        let lap_s = ctx.l.lap_phi(&s, 0.0);
        let rme_lap_s = limit(&ctx.rho_m_eta(&lap_s))?;
        let lap_s0 = limit(&lap_s)?;
        let f = b_exact(BOp::B0, u, p, geo)?;
        let (m, n) = (p.m, p.nf());
        Ok(match self {
            Quantity::LapBar | Quantity::JbarU | Quantity::LapBarRhoEta => 0.0,
            Quantity::Hess => w * f * (hess_s + m * drho_s),
            Quantity::UPeta => -f * hess_s,
            Quantity::URhoLap => f * (hess_s + (n + 1.0) * drho_s),
            Quantity::RhoEtaLap => {
                let rmu = Quantity::rho_m_eta_u(u, p, geo)?;
                w * f * rme_lap_s + ((m + n + 2.0 * w - 1.0) * (hess_s - m * drho_s) + w * lap_s0) * rmu
            }
            Quantity::URhoEtaJ => -f * rme_lap_s,
        })
    }

    fn rho_m_eta_u(u: &ModeField, p: &FracParams, geo: &ModelGeometry) -> Result<f64> {
        let ctx = Ctx::new(geo, p, Chart::Boundary, LEN, u.degree);
        let mut acc = 0.0;
        for part in [Part::Smooth, Part::Branch] {
            let v = u.eval(&ctx.l.pt, part);
            if v.c.iter().all(|x| *x == 0.0) {
                continue;
            }
            acc += limit(&ctx.rho_m_eta(&v))?;
        }
        Ok(acc)
    }

    /// Central difference in the conformal parameter of
    /// `e^{-(w+k) tau sigma} T_{e^{2 tau sigma} g}(e^{w tau sigma} U)`.
    pub fn finite_difference(&self, sigma: &SigmaFn, u: &ModeField, p: &FracParams, geo: &ModelGeometry, w: f64, tau: f64) -> Result<f64> {
        let k = self.degree(p);
        let side = |t: f64| -> Result<f64> {
            let sg = sigma.clone();
            let st: SigmaFn = std::sync::Arc::new(move |pt| sg(pt) * t);
            let hat = conformal_rescale(geo, st.clone(), p)?;
            let s0 = hat.sigma0() - geo.sigma0();
            Ok((-(w + k) * s0).exp() * self.value(&u.times_exp(&st, w), p, &hat)?)
        };
        Ok((side(tau)? - side(-tau)?) / (2.0 * tau))
    }
}
