//! Energy functionals with fixed boundary data, their bilinear forms, and the
//! minimization over interior perturbations.
//!
//! Fields are lists of modes, one spherical harmonic per entry, with each
//! harmonic normalized in `L^2` of the unit round sphere. Boundary integrals
//! carry the factor `w0^n` of the boundary metric `w0^2 h`.

use crate::boundary::{b_exact, curvature_coefficients, gamma_mean_curvature_limit, rho_eta_jphi_limit, BOp};
use crate::error::{Error, Result};
use crate::field::{gram, integrate_bilinear, l2_inner, Derived, Envelope, Kernel, ModeField, Part, PolyProfile, Profile, QuadOpts};
use crate::geometry::{Chart, DefiningFunctionJet, Kind, Local, ModelGeometry, Pt};
use crate::ops::{l2phi_apply, l4phi_apply, relative_residual, Op};
use crate::scattering::p2gamma_apply;
use crate::series::Ser;
use crate::specfun::{d_gamma_of, FracParams};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use rand::Rng;
use std::cell::RefCell;
use std::f64::consts::FRAC_PI_2;
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// weighted interior integral (left-hand side of the inequality)
    pub interior: f64,
    /// boundary terms completing the energy functional
    pub boundary: f64,
    /// `interior + boundary`
    pub total: f64,
    /// boundary expression bounding `interior` from below
    pub rhs: f64,
    /// `interior - rhs`
    pub gap: f64,
}

/// Coefficient of `oint psi P_{4-2 gamma} psi`: the closed form
/// `d_gamma / (2 gamma (gamma-1))` and the value `8(1-gamma)(2-gamma)/d_{2-gamma}`
/// reached through the boundary operators.
pub fn psi_coefficients(p: &FracParams) -> (f64, f64) {
    let g = p.gamma;
    (d_gamma_of(g) / (2.0 * g * (g - 1.0)), 8.0 * (1.0 - g) * (2.0 - g) / d_gamma_of(2.0 - g))
}

/// Quadrature options for energies: a thin boundary layer keeps the series of
/// high-degree polynomial profiles within their truncation.
pub fn energy_opts() -> QuadOpts {
    QuadOpts { near_max: 0.15, ..QuadOpts::default() }
}

/// Curvature series entering the interior density at one point.
struct Coeffs {
    jp: Ser,
    /// radial and tangential eigenvalues of `4P - (n - 2 gamma + 2) J_phi g`
    ts: Ser,
    tt: Ser,
    q: Ser,
}

impl Coeffs {
    fn new(p: &FracParams, l: &Local) -> Self {
        let jp = l.j_phi();
        if !p.is_high() {
            let z = Ser::zero(1);
            return Coeffs { jp, ts: z.clone(), tt: z.clone(), q: z };
        }
        let (ps, pt) = l.p_phi();
        let c = p.nf() - 2.0 * p.gamma + 2.0;
        let ts = ps * 4.0 - &jp * c;
        let tt = pt * 4.0 - &jp * c;
        Coeffs { ts, tt, q: l.q_phi(), jp }
    }
}

fn density(p: &FracParams, l: &Local, co: &Coeffs, a: &Derived, b: &Derived, lam: f64) -> Ser {
    let w = 0.5 * (p.nf() - 2.0 * p.gamma);
    let uv = &a.u * &b.u;
    let tang = &l.inv_w2 * &uv * lam;
    if !p.is_high() {
        let grad = &a.us * &b.us + tang;
        return grad + &co.jp * &uv * w;
    }
    let la = a.lap.as_ref().expect("laplacian requested");
    let lb = b.lap.as_ref().expect("laplacian requested");
    la * lb - &co.ts * &(&a.us * &b.us) - &co.tt * &tang + &co.q * &uv * w
}

/// Interior density as a kernel; the curvature series of the most recent
/// point are kept between calls.
fn kernel(p: FracParams) -> impl Fn(&Local, &Derived, &Derived, f64) -> Ser {
    let cache: RefCell<Option<((usize, u64, usize), Coeffs)>> = RefCell::new(None);
    move |l, a, b, lam| {
        let key = (l as *const Local as usize, l.pt.t.c[0].to_bits(), l.pt.len());
        let mut c = cache.borrow_mut();
        if c.as_ref().map(|(k, _)| *k != key).unwrap_or(true) {
            *c = Some((key, Coeffs::new(&p, l)));
        }
        density(&p, l, &c.as_ref().unwrap().1, a, b, lam)
    }
}

/// Reject fields whose interior energy density is not integrable at the boundary.
fn check_integrable(u: &ModeField, p: &FracParams, geo: &ModelGeometry) -> Result<()> {
    let l = geo.local(Chart::Boundary, 16, p);
    let lam = geo.lambda(u.degree);
    let vol = l.vol();
    let co = Coeffs::new(p, &l);
    let parts: Vec<Derived> = [Part::Smooth, Part::Branch]
        .iter()
        .map(|pa| Derived::new(&l, u.eval(&l.pt, *pa), lam, p.is_high()))
        .filter(|d| d.u.max_abs() > 0.0)
        .collect();
    for a in &parts {
        for b in &parts {
            let d = density(p, &l, &co, a, b, lam) * &vol;
            let scale = d.max_abs();
            for (j, c) in d.c.iter().enumerate() {
                if d.e + j as f64 <= -1.0 + 1e-9 && c.abs() > 1e-10 * scale {
                    return Err(Error::Divergent(*c));
                }
            }
        }
    }
    Ok(())
}

fn interior(u: &ModeField, v: &ModeField, p: &FracParams, geo: &ModelGeometry) -> Result<f64> {
    if u.degree != v.degree {
        return Err(Error::InvalidParams("modes of different degree".into()));
    }
    check_integrable(u, p, geo)?;
    check_integrable(v, p, geo)?;
    let k = kernel(*p);
    Ok(integrate_bilinear(geo, p, u, v, &k, p.is_high(), &energy_opts()).value)
}

/// Boundary constants shared by all modes.
struct Bdry {
    vol: f64,
    w0: f64,
    /// `H_{2 gamma}` (gamma < 1) or `T_2` (gamma > 1)
    curv: f64,
    /// `rho^m eta J_phi` (gamma > 1)
    rj: f64,
}

impl Bdry {
    fn new(p: &FracParams, geo: &ModelGeometry) -> Result<Self> {
        let w0 = geo.w0();
        let vol = w0.powi(p.n as i32);
        if p.is_high() {
            Ok(Bdry { vol, w0, curv: curvature_coefficients(geo, p)?.0, rj: rho_eta_jphi_limit(geo, p)? })
        } else {
            Ok(Bdry { vol, w0, curv: gamma_mean_curvature_limit(geo, p)?, rj: 0.0 })
        }
    }

    fn lap(&self, geo: &ModelGeometry, degree: f64) -> f64 {
        geo.lambda(degree) / (self.w0 * self.w0)
    }
}

/// `(B_0 U, B_{2 gamma - 2} U)`; the second entry is zero for gamma < 1.
fn traces(u: &ModeField, p: &FracParams, geo: &ModelGeometry) -> Result<(f64, f64)> {
    let b0 = b_exact(BOp::B0, u, p, geo)?;
    let bb = if p.is_high() { b_exact(BOp::B2gm2, u, p, geo)? } else { 0.0 };
    Ok((b0, bb))
}

fn boundary_form(p: &FracParams, geo: &ModelGeometry, c: &Bdry, degree: f64, u: (f64, f64), v: (f64, f64)) -> f64 {
    let (g, n) = (p.gamma, p.nf());
    if !p.is_high() {
        return c.vol * (n - 2.0 * g) / (2.0 * n) * c.curv * u.0 * v.0;
    }
    let cross = u.0 * v.1 + v.0 * u.1;
    c.vol
        * (c.lap(geo, degree) / (g - 1.0) * cross
            + 0.5 * (n - 2.0 * g) * c.curv * cross
            + 0.5 * (n - 2.0 * g) * c.rj * u.0 * v.0)
}

fn check_order(p: &FracParams, order: u8) -> Result<()> {
    match (order, p.is_high()) {
        (1, false) | (2, true) => Ok(()),
        (1, true) => Err(Error::OrderMismatch { order, range: "(0,1)", gamma: p.gamma }),
        (2, false) => Err(Error::OrderMismatch { order, range: "(1,2)", gamma: p.gamma }),
        _ => Err(Error::InvalidParams(format!("order {order} not in {{1,2}}"))),
    }
}

/// Symmetric bilinear form whose diagonal is the energy functional.
pub fn q_form(u: &[ModeField], v: &[ModeField], p: &FracParams, geo: &ModelGeometry, order: u8) -> Result<f64> {
    check_order(p, order)?;
    if u.len() != v.len() {
        return Err(Error::InvalidParams("mode lists of different length".into()));
    }
    let c = Bdry::new(p, geo)?;
    let mut acc = 0.0;
    for (a, b) in u.iter().zip(v) {
        if a.is_zero() || b.is_zero() {
            continue;
        }
        acc += interior(a, b, p, geo)?;
        acc += boundary_form(p, geo, &c, a.degree, traces(a, p, geo)?, traces(b, p, geo)?);
    }
    Ok(acc)
}

/// `E(U) = Q(U, U)` split into interior and boundary parts.
fn split_energy(u: &[ModeField], p: &FracParams, geo: &ModelGeometry, c: &Bdry) -> Result<(f64, f64, Vec<(usize, f64, f64)>)> {
    let (mut int, mut bd) = (0.0, 0.0);
    let mut tr = Vec::new();
    for a in u {
        if a.is_zero() {
            continue;
        }
        let t = traces(a, p, geo)?;
        int += interior(a, a, p, geo)?;
        bd += boundary_form(p, geo, c, a.degree, t, t);
        tr.push((a.degree.round() as usize, t.0, t.1));
    }
    Ok((int, bd, tr))
}

fn multipliers(ks: &[usize], p: &FracParams, geo: &ModelGeometry) -> Result<BTreeMap<usize, f64>> {
    let ones: Vec<(usize, f64)> = ks.iter().map(|k| (*k, 1.0)).collect();
    let scale = geo.w0().powf(-2.0 * p.gamma);
    Ok(p2gamma_apply(&ones, p, geo)?.into_iter().map(|(k, m)| (k, m * scale)).collect())
}

/// Energy identity and lower bound for gamma in (0,1).
pub fn energy_low(u: &[ModeField], dj: &DefiningFunctionJet, p: &FracParams, geo: &ModelGeometry) -> Result<EnergyBreakdown> {
    if p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    let c = Bdry::new(p, geo)?;
    let (int, bd, tr) = split_energy(u, p, geo, &c)?;
    let (g, n) = (p.gamma, p.nf());
    let d = d_gamma_of(g);
    let ks: Vec<usize> = tr.iter().map(|t| t.0).collect();
    let mult = multipliers(&ks, p, geo)?;
    let mut rhs = 0.0;
    for (k, f, _) in &tr {
        rhs += -2.0 * g / d * (mult[k] * f * f - 0.5 * (n - 2.0 * g) * d * dj.phi * f * f) * c.vol;
    }
    Ok(EnergyBreakdown { interior: int, boundary: bd, total: int + bd, rhs, gap: int - rhs })
}

/// Energy identity and lower bound for gamma in (1,2), including the
/// `psi` terms and the `rho_2` cross term.
pub fn energy_high(u: &[ModeField], dj: &DefiningFunctionJet, p: &FracParams, geo: &ModelGeometry) -> Result<EnergyBreakdown> {
    if !p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    let c = Bdry::new(p, geo)?;
    let (int, bd, tr) = split_energy(u, p, geo, &c)?;
    let (g, n) = (p.gamma, p.nf());
    let d = d_gamma_of(g);
    let q = FracParams::new(2.0 - g, p.n)?;
    let ks: Vec<usize> = tr.iter().map(|t| t.0).collect();
    let mf = multipliers(&ks, p, geo)?;
    let mpsi = multipliers(&ks, &q, geo)?;
    let cpsi = psi_coefficients(p).0;
    let jbar = geo.j_bar();
    let mut rhs = 0.0;
    for (k, f, bb) in &tr {
        let psi = bb / (2.0 * (1.0 - g));
        let ff = 8.0 * g * (g - 1.0) / d * (mf[k] * f * f - 0.5 * (n - 2.0 * g) * d * dj.phi * f * f);
        let pp = cpsi * mpsi[k] * psi * psi;
        let grad = c.lap(geo, *k as f64) * f * psi;
        let pot = 0.5 * (n - 2.0 * g) * (2.0 - g) * (jbar + 4.0 * (g - 1.0) * dj.rho2) * f * psi;
        rhs += (ff + pp + 4.0 * (grad + pot)) * c.vol;
    }
    Ok(EnergyBreakdown { interior: int, boundary: bd, total: int + bd, rhs, gap: int - rhs })
}

/// Energy of the parameter's range.
pub fn energy(u: &[ModeField], dj: &DefiningFunctionJet, p: &FracParams, geo: &ModelGeometry) -> Result<EnergyBreakdown> {
    if p.is_high() {
        energy_high(u, dj, p, geo)
    } else {
        energy_low(u, dj, p, geo)
    }
}

/// `E(U) = Q(U, U)`.
pub fn energy_value(u: &[ModeField], p: &FracParams, geo: &ModelGeometry) -> Result<f64> {
    let c = Bdry::new(p, geo)?;
    let (int, bd, _) = split_energy(u, p, geo, &c)?;
    Ok(int + bd)
}

/// `int U^2 rho^{m - 2 kappa}` with `kappa = 1` (gamma < 1) or `2` (gamma > 1):
/// the weight in the lower bound `E(V) >= lambda int V^2 rho^{m-2kappa}` for `V`
/// with vanishing boundary data.
pub fn hyperbolic_l2(u: &[ModeField], p: &FracParams, geo: &ModelGeometry) -> f64 {
    let pw = if p.is_high() { 4 } else { 2 };
    let k = move |l: &Local, a: &Derived, b: &Derived, _lam: f64| (&a.u * &b.u) / &l.rho.powi(pw);
    u.iter()
        .map(|a| integrate_bilinear(geo, p, a, a, &k, false, &energy_opts()).value)
        .sum()
}

/// Bottom of the spectrum of the interior operator in the hyperbolic picture:
/// `gamma^2` or `gamma^2 (2-gamma)^2`.
pub fn spectral_floor(p: &FracParams) -> f64 {
    let g = p.gamma;
    if p.is_high() {
        g * g * (2.0 - g) * (2.0 - g)
    } else {
        g * g
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SelfAdjointness {
    /// `int V L U + boundary pairing of (V, U)`
    pub forward: f64,
    /// the same with `U` and `V` exchanged
    pub backward: f64,
    pub q: f64,
    /// `|forward - backward| / scale`
    pub defect: f64,
    /// `|forward - q| / scale`
    pub ibp_defect: f64,
}

fn pairing(u: &ModeField, v: &ModeField, p: &FracParams, geo: &ModelGeometry, c: &Bdry) -> Result<(f64, f64)> {
    let opts = energy_opts();
    let (lu, terms) = if p.is_high() {
        let b2 = b_exact(BOp::B2, u, p, geo)?;
        let b2g = b_exact(BOp::B2g, u, p, geo)?;
        let (v0, vb) = traces(v, p, geo)?;
        (l4phi_apply(u, geo, p)?, (v0 * b2g + vb * b2, v0.abs() * b2g.abs() + vb.abs() * b2.abs()))
    } else {
        let b2g = b_exact(BOp::B2g, u, p, geo)?;
        let v0 = b_exact(BOp::B0, v, p, geo)?;
        (l2phi_apply(u, geo, p)?, (v0 * b2g, (v0 * b2g).abs()))
    };
    let int = l2_inner(geo, p, v, &lu, &opts).value;
    Ok((int + c.vol * terms.0, int.abs() + c.vol * terms.1))
}

/// Symmetry of the interior operator together with its boundary operators.
pub fn self_adjointness(u: &ModeField, v: &ModeField, p: &FracParams, geo: &ModelGeometry) -> Result<SelfAdjointness> {
    let c = Bdry::new(p, geo)?;
    let (forward, s1) = pairing(u, v, p, geo, &c)?;
    let (backward, s2) = pairing(v, u, p, geo, &c)?;
    let order = if p.is_high() { 2 } else { 1 };
    let q = q_form(std::slice::from_ref(u), std::slice::from_ref(v), p, geo, order)?;
    let scale = s1.max(s2).max(f64::MIN_POSITIVE);
    Ok(SelfAdjointness {
        forward,
        backward,
        q,
        defect: (forward - backward).abs() / scale,
        ibp_defect: (forward - q).abs() / scale,
    })
}

/// Radial pieces on the hemisphere in `x = sin^2 t`, times `cos^k t`.
/// Nodes `0 = x_0 < x_1 < ... < x_L < 1` split `[0, 1]` into elements.
#[derive(Clone, Copy, Debug)]
enum PieceKind {
    /// `s^e0 (x_1 - x)^2 P_j` on the first element
    First { e0: f64, j: usize },
    /// `(x - x_i)^2 (x_{i+1} - x)^2 P_j` on element `i`; the factor at
    /// `x = 1` is dropped on the last element
    Bubble { i: usize, j: usize },
    /// cubic Hermite function of value (`slope = false`) or slope at `x_i`
    Vertex { i: usize, slope: bool },
    /// `s^e0 (1 - x/x_1)^2` on the first element
    Cap { e0: f64 },
}

#[derive(Clone, Debug)]
struct Piece {
    kind: PieceKind,
    k: i32,
    /// `x_0 = 0, x_1, ..., x_L, 1`
    xs: Arc<Vec<f64>>,
}

fn is_even(e: f64) -> bool {
    (e * 0.5 - (e * 0.5).round()).abs() < 1e-12
}

fn legendre(j: usize, u: &Ser) -> Ser {
    let len = u.len();
    let mut p0 = Ser::constant(1.0, len);
    if j == 0 {
        return p0;
    }
    let mut p1 = u.clone();
    for i in 1..j {
        let fi = i as f64;
        let p2 = ((u * &p1) * (2.0 * fi + 1.0) - &p0 * fi) / (fi + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn t_of(x: f64) -> f64 {
    x.sqrt().asin()
}

impl Piece {
    fn branch(&self) -> bool {
        match self.kind {
            PieceKind::First { e0, .. } | PieceKind::Cap { e0 } => !is_even(e0),
            _ => false,
        }
    }

    /// Support as an element range `[lo, hi)`.
    fn elements(&self) -> (usize, usize) {
        match self.kind {
            PieceKind::First { .. } | PieceKind::Cap { .. } => (0, 1),
            PieceKind::Bubble { i, .. } => (i, i + 1),
            PieceKind::Vertex { i, .. } => (i - 1, i + 1),
        }
    }

    fn value(&self, x: &Ser, s: &Ser, el: usize) -> Option<Ser> {
        let xs = &self.xs;
        let last = xs.len() - 2;
        let (lo, hi) = self.elements();
        if el < lo || el >= hi {
            return None;
        }
        let (a, b) = (xs[el], xs[el + 1]);
        let u = (x - a) * (2.0 / (b - a)) - 1.0;
        Some(match self.kind {
            PieceKind::First { e0, j } => {
                let d = x * -1.0 + b;
                legendre(j, &u) * (&d * &d) * s.powf(e0)
            }
            PieceKind::Cap { e0 } => {
                let d = x * (-1.0 / b) + 1.0;
                (&d * &d) * s.powf(e0)
            }
            PieceKind::Bubble { j, .. } => {
                let da = x - a;
                let mut v = legendre(j, &u) * (&da * &da);
                if el != last {
                    let db = x * -1.0 + b;
                    v = v * (&db * &db);
                }
                v
            }
            PieceKind::Vertex { i, slope } => {
                let h = b - a;
                let tau = (x - a) * (1.0 / h);
                let t2 = &tau * &tau;
                let t3 = &t2 * &tau;
                match (el + 1 == i, slope) {
                    (true, false) => &t2 * 3.0 - &t3 * 2.0,
                    (true, true) => (&t3 - &t2) * h,
                    (false, false) => &t3 * 2.0 - &t2 * 3.0 + 1.0,
                    (false, true) => (&t3 - &t2 * 2.0 + &tau) * h,
                }
            }
        })
    }
}

impl Profile for Piece {
    fn eval(&self, pt: &Pt, part: Part) -> Ser {
        let len = pt.len();
        let el = match pt.chart {
            Chart::Boundary => 0,
            Chart::At(t) => {
                let x0 = t.sin().powi(2);
                self.xs[1..].iter().position(|b| x0 < *b).unwrap_or(self.xs.len() - 2)
            }
        };
        let branch_here = self.branch() && el == 0;
        let wanted = match part {
            Part::Whole => true,
            Part::Smooth => !branch_here,
            Part::Branch => branch_here,
        };
        if !wanted {
            return Ser::zero(len);
        }
        let x = &pt.s * &pt.s;
        match self.value(&x, &pt.s, el) {
            None => Ser::zero(len),
            Some(v) if self.k == 0 => v,
            Some(v) => v * pt.c.powi(self.k),
        }
    }

    fn split(&self) -> f64 {
        t_of(self.xs[1])
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.xs[1..self.xs.len() - 1].iter().map(|x| t_of(*x)).collect()
    }
}

/// Perturbation space of one mode: `near_smooth` and `near_branch` functions
/// on the first element, `per_element` bubbles on each later element, and the
/// Hermite functions at the interior nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisSpec {
    pub nodes: Vec<f64>,
    pub near_smooth: usize,
    pub near_branch: usize,
    pub per_element: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self { nodes: vec![0.04, 0.12, 0.36], near_smooth: 4, near_branch: 4, per_element: 13 }
    }
}

impl BasisSpec {
    fn xs(&self) -> Arc<Vec<f64>> {
        let mut xs = vec![0.0];
        xs.extend(self.nodes.iter().cloned());
        xs.push(1.0);
        Arc::new(xs)
    }
}

fn piece(k: usize, kind: PieceKind, xs: &Arc<Vec<f64>>) -> ModeField {
    ModeField::from_profile(k as f64, Arc::new(Piece { kind, k: k as i32, xs: xs.clone() }))
}

/// Fields on the round hemisphere with vanishing boundary data, spanning the
/// admissible perturbations of one mode.
pub fn perturbation_basis(k: usize, p: &FracParams, spec: &BasisSpec) -> Vec<ModeField> {
    let xs = spec.xs();
    let mut out = Vec::new();
    for j in 0..spec.near_smooth {
        out.push(piece(k, PieceKind::First { e0: 2.0, j }, &xs));
    }
    for j in 0..spec.near_branch {
        out.push(piece(k, PieceKind::First { e0: 2.0 * p.gamma, j }, &xs));
    }
    for i in 1..=spec.nodes.len() {
        out.push(piece(k, PieceKind::Vertex { i, slope: false }, &xs));
        out.push(piece(k, PieceKind::Vertex { i, slope: true }, &xs));
        for j in 0..spec.per_element {
            out.push(piece(k, PieceKind::Bubble { i, j }, &xs));
        }
    }
    out
}

/// A fixed field with trace `f` (and `psi` for gamma > 1) on the hemisphere.
pub fn data_field(k: usize, f: f64, psi: f64, p: &FracParams, geo: &ModelGeometry, spec: &BasisSpec) -> Result<ModeField> {
    let base = ModeField::from_profile(k as f64, Arc::new(PolyProfile::global(Envelope::CosPow(k as i32), 0.0, 0, false)));
    let b0 = b_exact(BOp::B0, &base, p, geo)?;
    let mut u = base.scale(f / b0);
    if psi != 0.0 {
        if !p.is_high() {
            return Err(Error::InvalidParams("psi data only exist for gamma > 1".into()));
        }
        let cap = piece(k, PieceKind::Cap { e0: p.beta() }, &spec.xs());
        let bb = b_exact(BOp::B2gm2, &cap, p, geo)?;
        u = u.add(&cap.scale(2.0 * (1.0 - p.gamma) * psi / bb));
    }
    Ok(u)
}

/// Matrix of the interior bilinear form over a list of fields of one degree.
pub fn energy_gram(fields: &[ModeField], p: &FracParams, geo: &ModelGeometry) -> DMatrix<f64> {
    let kern = kernel(*p);
    gram(geo, p, fields, &kern as &Kernel, p.is_high(), &energy_opts())
}

/// Random admissible field with data `(f, psi)`: the data field plus every
/// perturbation piece with a uniform random coefficient, normalized by the
/// piece's sup and damped by `0.6^j` in the polynomial index `j`.
pub fn random_admissible<R: Rng>(
    rng: &mut R,
    k: usize,
    f: f64,
    psi: f64,
    p: &FracParams,
    geo: &ModelGeometry,
    amp: f64,
) -> Result<ModeField> {
    let spec = BasisSpec::default();
    let xs = spec.xs();
    let mut kinds = Vec::new();
    for j in 0..spec.near_smooth {
        kinds.push((PieceKind::First { e0: 2.0, j }, j));
    }
    for j in 0..spec.near_branch {
        kinds.push((PieceKind::First { e0: 2.0 * p.gamma, j }, j));
    }
    for i in 1..=spec.nodes.len() {
        kinds.push((PieceKind::Vertex { i, slope: false }, 0));
        kinds.push((PieceKind::Vertex { i, slope: true }, 0));
        for j in 0..spec.per_element {
            kinds.push((PieceKind::Bubble { i, j }, j));
        }
    }
    let ts: Vec<f64> = (1..48).map(|i| i as f64 * FRAC_PI_2 / 48.0).collect();
    let mut u = data_field(k, f, psi, p, geo, &spec)?;
    for (kind, j) in kinds {
        let v = piece(k, kind, &xs);
        let norm = v.samples(geo, &ts).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if norm > 0.0 {
            let c = amp * rng.gen_range(-1.0..1.0) * 0.6f64.powi(j as i32) / norm;
            u = u.add(&v.scale(c));
        }
    }
    Ok(u)
}

fn combine(u0: &ModeField, basis: &[ModeField], c: &DVector<f64>) -> ModeField {
    basis.iter().zip(c.iter()).fold(u0.clone(), |acc, (b, ci)| acc.add(&b.scale(*ci)))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    /// energy after each iterate, starting from the data field
    pub energies: Vec<f64>,
    /// relative difference between the CG and Cholesky coefficients
    pub direct_gap: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for `A c = r`, minimizing
/// `c^T A c - 2 r^T c`; records the quadratic after every step.
fn pcg(a: &DMatrix<f64>, r: &DVector<f64>, tol: f64, max_it: usize) -> (DVector<f64>, Vec<f64>, usize, bool) {
    let n = r.len();
    let dinv = DVector::from_iterator(n, (0..n).map(|i| 1.0 / a[(i, i)]));
    let quad = |c: &DVector<f64>| (c.transpose() * a * c)[(0, 0)] - 2.0 * r.dot(c);
    let mut c = DVector::zeros(n);
    let mut res = r.clone();
    let mut z = res.component_mul(&dinv);
    let mut d = z.clone();
    let mut rz = res.dot(&z);
    let mut record = vec![0.0];
    let rn = r.norm().max(f64::MIN_POSITIVE);
    for it in 0..max_it {
        if res.norm() <= tol * rn {
            return (c, record, it, true);
        }
        let ad = a * &d;
        let den = d.dot(&ad);
        if den <= 0.0 {
            return (c, record, it, false);
        }
        let alpha = rz / den;
        c += alpha * &d;
        res -= alpha * ad;
        record.push(quad(&c));
        z = res.component_mul(&dinv);
        let rz_new = res.dot(&z);
        d = &z + (rz_new / rz) * d;
        rz = rz_new;
    }
    let ok = res.norm() <= tol * rn;
    (c, record, max_it, ok)
}

#[derive(Clone, Debug)]
pub struct Minimizer {
    pub fields: Vec<ModeField>,
    /// largest relative residual of the interior operator over the modes
    pub residual: f64,
    pub reports: Vec<CgReport>,
}

/// Sample points for residual checks, away from the basis breakpoint.
pub const RESIDUAL_TS: [f64; 5] = [0.3, 0.45, 0.75, 1.05, 1.3];

/// Minimize the energy over interior perturbations of fixed boundary data on
/// the round hemisphere.
pub fn minimize_over_interior(
    f_modes: &[(usize, f64)],
    psi_modes: &[(usize, f64)],
    p: &FracParams,
    geo: &ModelGeometry,
    tol: f64,
) -> Result<Minimizer> {
    minimize_with(f_modes, psi_modes, p, geo, tol, &BasisSpec::default())
}

pub fn minimize_with(
    f_modes: &[(usize, f64)],
    psi_modes: &[(usize, f64)],
    p: &FracParams,
    geo: &ModelGeometry,
    tol: f64,
    spec: &BasisSpec,
) -> Result<Minimizer> {
    if geo.kind != Kind::Hemisphere || geo.is_rescaled() {
        return Err(Error::InvalidParams("minimization runs on the round hemisphere".into()));
    }
    let mut ks: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for &(k, c) in f_modes {
        ks.entry(k).or_default().0 += c;
    }
    for &(k, c) in psi_modes {
        ks.entry(k).or_default().1 += c;
    }
    let kern = kernel(*p);
    let op = if p.is_high() { Op::L4 } else { Op::L2 };
    let mut fields = Vec::new();
    let mut reports = Vec::new();
    let mut residual: f64 = 0.0;
    for (k, (f, psi)) in ks {
        if f == 0.0 && psi == 0.0 {
            fields.push(ModeField::zero(k as f64));
            reports.push(CgReport { converged: true, ..Default::default() });
            continue;
        }
        let u0 = data_field(k, f, psi, p, geo, spec)?;
        let basis = perturbation_basis(k, p, spec);
        let mut all = vec![u0.clone()];
        all.extend(basis.iter().cloned());
        let g = gram(geo, p, &all, &kern as &Kernel, p.is_high(), &energy_opts());
        let nb = basis.len();
        let a = g.view((1, 1), (nb, nb)).into_owned();
        let r = -g.view((1, 0), (nb, 1)).column(0).into_owned();
        let e0 = energy_value(std::slice::from_ref(&u0), p, geo)?;
        let (c, rec, it, ok) = pcg(&a, &r, (tol * 1e-7).clamp(1e-14, 1e-8), 40 * nb);
        if !ok {
            return Err(Error::NoConvergence(it));
        }
        let direct = a.clone().cholesky().map(|ch| ch.solve(&r));
        let direct_gap = match direct {
            Some(x) => (&x - &c).norm() / x.norm().max(f64::MIN_POSITIVE),
            None => f64::NAN,
        };
        let u = combine(&u0, &basis, &c);
        residual = residual.max(relative_residual(&u, geo, p, op, &RESIDUAL_TS));
        reports.push(CgReport { iterations: it, energies: rec.iter().map(|q| e0 + q).collect(), direct_gap, converged: ok });
        fields.push(u);
    }
    Ok(Minimizer { fields, residual, reports })
}

/// Weighted `L^2` distance between two mode lists.
pub fn l2_distance(u: &[ModeField], v: &[ModeField], p: &FracParams, geo: &ModelGeometry) -> f64 {
    let opts = energy_opts();
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let d = a.lin(1.0, b, -1.0);
            l2_inner(geo, p, &d, &d, &opts).value.max(0.0)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundednessCurve {
    pub ts: Vec<f64>,
    /// `E(U + t V)` evaluated directly
    pub values: Vec<f64>,
    /// `(E(V), 2 Q(U, V), E(U))`
    pub coeffs: [f64; 3],
    /// largest relative deviation of `values` from the quadratic
    pub residual: f64,
    /// `-Q(U, V) / E(V)`
    pub vertex: f64,
}

/// Energy along the line `U + t V` for 11 values of `t` in `[-1, 1]`.
pub fn boundedness_demo(v: &[ModeField], u: &[ModeField], p: &FracParams, geo: &ModelGeometry) -> Result<BoundednessCurve> {
    let order = if p.is_high() { 2 } else { 1 };
    let ev = q_form(v, v, p, geo, order)?;
    let quv = q_form(u, v, p, geo, order)?;
    let eu = q_form(u, u, p, geo, order)?;
    let ts: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
    let mut values = Vec::with_capacity(ts.len());
    for t in &ts {
        let w: Vec<ModeField> = u.iter().zip(v).map(|(a, b)| a.lin(1.0, b, *t)).collect();
        values.push(energy_value(&w, p, geo)?);
    }
    let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let residual = ts
        .iter()
        .zip(&values)
        .map(|(t, val)| (val - (ev * t * t + 2.0 * quv * t + eu)).abs() / scale)
        .fold(0.0, f64::max);
    Ok(BoundednessCurve { ts, values, coeffs: [ev, 2.0 * quv, eu], residual, vertex: -quv / ev })
}
