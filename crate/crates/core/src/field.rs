//! Per-mode fields and weighted quadrature of bilinear densities.
//!
//! A field is a linear combination of profiles. Near the boundary every
//! profile splits into a smooth part (even in rho) and a branch part
//! (`rho^b` times an even function); integrals over the boundary layer are
//! done termwise on the exact series of each part, and Gauss-Legendre panels
//! cover the rest of the radial interval.

use crate::boundary::BoundaryJet;
use crate::geometry::{Chart, Kind, Local, ModelGeometry, Pt};
use crate::quad::gauss_legendre;
use crate::series::Ser;
use crate::specfun::FracParams;
use nalgebra::DMatrix;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Whole,
    Smooth,
    Branch,
}

pub trait Profile: Send + Sync {
    /// Series of the requested part at a chart point. Beyond `split()` the
    /// smooth part is the whole profile and the branch part is zero.
    fn eval(&self, pt: &Pt, part: Part) -> Ser;
    /// Radial position (t or y) up to which the two parts are available.
    fn split(&self) -> f64;
    /// Points where the profile is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Clone)]
pub struct ModeField {
    /// harmonic degree k, or frequency |xi|
    pub degree: f64,
    terms: Vec<(f64, Arc<dyn Profile>)>,
}

impl std::fmt::Debug for ModeField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModeField").field("degree", &self.degree).field("terms", &self.terms.len()).finish()
    }
}

impl ModeField {
    pub fn zero(degree: f64) -> Self {
        Self { degree, terms: Vec::new() }
    }

    pub fn from_profile(degree: f64, p: Arc<dyn Profile>) -> Self {
        Self { degree, terms: vec![(1.0, p)] }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
    }

    pub fn eval(&self, pt: &Pt, part: Part) -> Ser {
        let mut acc: Option<Ser> = None;
        for (c, p) in &self.terms {
            if *c == 0.0 {
                continue;
            }
            let v = p.eval(pt, part).scale(*c);
            if v.c.iter().all(|x| *x == 0.0) {
                continue;
            }
            acc = Some(match acc {
                None => v,
                Some(a) => a + v,
            });
        }
        acc.unwrap_or_else(|| Ser::zero(pt.len()))
    }

    pub fn split(&self) -> f64 {
        self.terms.iter().map(|(_, p)| p.split()).fold(f64::INFINITY, f64::min)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.terms.iter().flat_map(|(_, p)| p.breakpoints()).collect();
        v.push(self.split());
        v
    }

    pub fn add(&self, o: &ModeField) -> ModeField {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        ModeField { degree: self.degree, terms }
    }

    pub fn scale(&self, a: f64) -> ModeField {
        ModeField { degree: self.degree, terms: self.terms.iter().map(|(c, p)| (c * a, p.clone())).collect() }
    }

    pub fn lin(&self, a: f64, o: &ModeField, b: f64) -> ModeField {
        self.scale(a).add(&o.scale(b))
    }

    /// Value at an interior point.
    pub fn value_at(&self, geo: &ModelGeometry, t: f64) -> f64 {
        self.eval(&geo.point(Chart::At(t), 1), Part::Whole).c[0]
    }

    /// Samples on a set of radial positions.
    pub fn samples(&self, geo: &ModelGeometry, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|t| self.value_at(geo, *t)).collect()
    }

    /// Exact boundary jet in powers of the geometry's defining function,
    /// read off the boundary series of both parts.
    pub fn jet(&self, geo: &ModelGeometry, p: &FracParams) -> BoundaryJet {
        let pt = geo.point(Chart::Boundary, 8);
        let sm = self.eval(&pt, Part::Smooth);
        let br = self.eval(&pt, Part::Branch);
        let b = p.beta();
        // rho / s = q0 (1 + q1 s^2 + ...)
        let q = geo.sigma_at(&pt).exp();
        let q0 = q.coef(0);
        let q1 = q.coef(2) / q0;
        let (a0, a1) = (sm.coef_at(0.0), sm.coef_at(2.0));
        let (b0, b1) = (br.coef_at(b), br.coef_at(b + 2.0));
        let psi = b0 / q0.powf(b);
        if p.is_high() {
            BoundaryJet {
                f: a0,
                psi,
                f2: a1 / (q0 * q0),
                psi2: (b1 - b * q1 * b0) / q0.powf(b + 2.0),
            }
        } else {
            BoundaryJet { f: a0, psi, f2: 0.0, psi2: 0.0 }
        }
    }
}

/// Envelope multiplying a polynomial profile.
#[derive(Clone, Copy, Debug)]
pub enum Envelope {
    One,
    /// `cos^k t`
    CosPow(i32),
    /// `e^{-a y}`
    Decay(f64),
}

/// `env(t) * rho^e0 * x^xpow * P_leg(u)`, `x = rho^2`, `u` mapping `[xlo, xhi]`
/// onto `[-1, 1]`, supported on `support`. `Part::Branch` class if `e0` is
/// not an even integer.
#[derive(Clone, Debug)]
pub struct PolyProfile {
    pub env: Envelope,
    pub e0: f64,
    pub xpow: u32,
    pub leg: usize,
    pub xrange: (f64, f64),
    pub support: (f64, f64),
    pub branch: bool,
}

impl PolyProfile {
    /// `env * rho^e0 * x^xpow` on the whole radial interval.
    pub fn global(env: Envelope, e0: f64, xpow: u32, branch: bool) -> Self {
        Self { env, e0, xpow, leg: 0, xrange: (0.0, 1.0), support: (0.0, f64::INFINITY), branch }
    }
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

impl Profile for PolyProfile {
    fn eval(&self, pt: &Pt, part: Part) -> Ser {
        let len = pt.len();
        let t0 = pt.t.c[0];
        let inside = match pt.chart {
            Chart::Boundary => self.support.0 <= 0.0,
            Chart::At(_) => t0 >= self.support.0 && t0 <= self.support.1,
        };
        let near = match pt.chart {
            Chart::Boundary => true,
            Chart::At(_) => t0 <= self.split(),
        };
        let wanted = match part {
            Part::Whole => true,
            Part::Smooth => !self.branch || !near,
            Part::Branch => self.branch && near,
        };
        if !inside || !wanted {
            return Ser::zero(len);
        }
        let x = &pt.s * &pt.s;
        let u = (&x - self.xrange.0) * (2.0 / (self.xrange.1 - self.xrange.0)) - 1.0;
        let mut v = legendre(self.leg, &u);
        if self.xpow > 0 {
            v = v * x.powi(self.xpow as i32);
        }
        if self.e0 != 0.0 {
            v = v * pt.s.powf(self.e0);
        }
        match self.env {
            Envelope::One => v,
            Envelope::CosPow(k) => {
                if k == 0 {
                    v
                } else {
                    v * pt.c.powi(k)
                }
            }
            Envelope::Decay(a) => v * (&pt.t * -a).exp(),
        }
    }

    fn split(&self) -> f64 {
        if self.support.0 > 0.0 {
            self.support.0
        } else {
            self.support.1
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.support.0, self.support.1]
    }
}

/// Derived quantities of one field part at a point.
#[derive(Clone, Debug)]
pub struct Derived {
    pub u: Ser,
    pub us: Ser,
    pub lap: Option<Ser>,
}

impl Derived {
    pub fn new(l: &Local, u: Ser, lam: f64, need_lap: bool) -> Self {
        let us = l.ds(&u);
        let lap = if need_lap { Some(l.lap_phi(&u, lam)) } else { None };
        Derived { u, us, lap }
    }

    fn is_zero(&self) -> bool {
        self.u.c.iter().all(|v| *v == 0.0)
    }
}

/// Bilinear density per unit `rho^m dvol`.
pub type Kernel<'a> = dyn Fn(&Local, &Derived, &Derived, f64) -> Ser + 'a;

#[derive(Clone, Debug)]
pub struct QuadOpts {
    /// series length used in the boundary layer
    pub near_len: usize,
    /// Gauss-Legendre nodes per panel
    pub panel_nodes: usize,
    /// maximal panel length (radial variable)
    pub panel_len: f64,
    /// largest boundary-layer radius (in t or y)
    pub near_max: f64,
    pub estimate_error: bool,
}

impl Default for QuadOpts {
    fn default() -> Self {
        Self { near_len: 64, panel_nodes: 32, panel_len: 0.25, near_max: std::f64::consts::FRAC_PI_6, estimate_error: true }
    }
}

impl QuadOpts {
    /// Options matching a requested total radial node count.
    pub fn with_nodes(n: usize) -> Self {
        let panel_nodes = (n / 8).clamp(12, 64);
        Self { panel_nodes, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Integral {
    pub value: f64,
    pub err: f64,
}

/// Split points of the radial interval for a set of fields.
fn panels(geo: &ModelGeometry, fields: &[&ModeField], opts: &QuadOpts) -> (f64, Vec<(f64, f64)>) {
    let degree = fields.iter().map(|f| f.degree).fold(0.0, f64::max);
    let tmax = geo.t_max(degree);
    let near = fields.iter().map(|f| f.split()).fold(opts.near_max.min(tmax), f64::min);
    let mut pts: Vec<f64> = vec![near, tmax];
    for f in fields {
        for b in f.breakpoints() {
            if b > near && b < tmax {
                pts.push(b);
            }
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let step = match geo.kind {
        Kind::Hemisphere => opts.panel_len,
        Kind::HalfSpace => (2.0 / degree.max(1e-3)).min(4.0),
    };
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // grade the first panels geometrically away from the boundary layer
        let mut lo = a;
        while lo < b - 1e-14 {
            let hi = (lo + step.min(lo.max(1e-3))).min(b);
            let hi = if b - hi < 1e-3 * step { b } else { hi };
            out.push((lo, hi));
            lo = hi;
        }
    }
    (near, out)
}

/// `int rho^m dvol K(U, V)` for one mode with tangential eigenvalue `lam`.
pub fn integrate_bilinear(
    geo: &ModelGeometry,
    p: &FracParams,
    u: &ModeField,
    v: &ModeField,
    kernel: &Kernel,
    need_lap: bool,
    opts: &QuadOpts,
) -> Integral {
    let lam = geo.lambda(u.degree);
    let (near, pans) = panels(geo, &[u, v], opts);
    let mut total = Integral::default();
    if u.is_zero() || v.is_zero() {
        return total;
    }
    // boundary layer: exact series of each part pair
    let lb = geo.local(Chart::Boundary, opts.near_len, p);
    let rc = match geo.kind {
        Kind::Hemisphere => near.sin(),
        Kind::HalfSpace => near,
    };
    let vol = lb.vol();
    let up: Vec<Derived> = [Part::Smooth, Part::Branch]
        .iter()
        .map(|pa| Derived::new(&lb, u.eval(&lb.pt, *pa), lam, need_lap))
        .collect();
    let vp: Vec<Derived> = [Part::Smooth, Part::Branch]
        .iter()
        .map(|pa| Derived::new(&lb, v.eval(&lb.pt, *pa), lam, need_lap))
        .collect();
    for a in &up {
        for b in &vp {
            if a.is_zero() || b.is_zero() {
                continue;
            }
            let dens = kernel(&lb, a, b, lam) * &vol;
            total.value += dens.integrate_to(rc);
            total.err += dens.tail(rc) * rc;
        }
    }
    // interior panels
    let far = |nodes: usize| -> f64 {
        let mut acc = 0.0;
        for (a, b) in &pans {
            let (xs, ws) = gauss_legendre(nodes, *a, *b);
            for (x, w) in xs.iter().zip(&ws) {
                let l = geo.local(Chart::At(*x), 3, p);
                let du = Derived::new(&l, u.eval(&l.pt, Part::Whole), lam, need_lap);
                let dv = Derived::new(&l, v.eval(&l.pt, Part::Whole), lam, need_lap);
                let dens = kernel(&l, &du, &dv, lam) * &l.vol();
                acc += w * dens.c[0];
            }
        }
        acc
    };
    let fine = far(opts.panel_nodes);
    total.value += fine;
    if opts.estimate_error {
        let coarse = far(opts.panel_nodes * 3 / 4);
        total.err += (fine - coarse).abs();
    }
    total.err += 1e-15 * total.value.abs();
    total
}

/// All pairwise integrals `int rho^m dvol K(U_i, U_j)` for fields of one
/// degree, with each field differentiated once per node. `K` must be symmetric.
pub fn gram(
    geo: &ModelGeometry,
    p: &FracParams,
    fields: &[ModeField],
    kernel: &Kernel,
    need_lap: bool,
    opts: &QuadOpts,
) -> DMatrix<f64> {
    let nf = fields.len();
    let mut g = DMatrix::zeros(nf, nf);
    if nf == 0 {
        return g;
    }
    let lam = geo.lambda(fields[0].degree);
    assert!(fields.iter().all(|f| f.degree == fields[0].degree), "gram needs one degree");
    let refs: Vec<&ModeField> = fields.iter().collect();
    let (near, pans) = panels(geo, &refs, opts);
    let lb = geo.local(Chart::Boundary, opts.near_len, p);
    let rc = match geo.kind {
        Kind::Hemisphere => near.sin(),
        Kind::HalfSpace => near,
    };
    let vol = lb.vol();
    let parts: Vec<Vec<Derived>> = fields
        .iter()
        .map(|f| {
            [Part::Smooth, Part::Branch]
                .iter()
                .map(|pa| Derived::new(&lb, f.eval(&lb.pt, *pa), lam, need_lap))
                .filter(|d| !d.is_zero())
                .collect()
        })
        .collect();
    for i in 0..nf {
        for j in i..nf {
            let mut acc = 0.0;
            for a in &parts[i] {
                for b in &parts[j] {
                    acc += (kernel(&lb, a, b, lam) * &vol).integrate_to(rc);
                }
            }
            g[(i, j)] = acc;
        }
    }
    for (a, b) in &pans {
        let (xs, ws) = gauss_legendre(opts.panel_nodes, *a, *b);
        for (x, w) in xs.iter().zip(&ws) {
            let l = geo.local(Chart::At(*x), 3, p);
            let vol = l.vol();
            let ds: Vec<Derived> =
                fields.iter().map(|f| Derived::new(&l, f.eval(&l.pt, Part::Whole), lam, need_lap)).collect();
            for i in 0..nf {
                for j in i..nf {
                    g[(i, j)] += w * (kernel(&l, &ds[i], &ds[j], lam) * &vol).c[0];
                }
            }
        }
    }
    for i in 0..nf {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

/// Weighted L2 inner product per mode.
pub fn l2_inner(geo: &ModelGeometry, p: &FracParams, u: &ModeField, v: &ModeField, opts: &QuadOpts) -> Integral {
    integrate_bilinear(geo, p, u, v, &|_l, a, b, _| &a.u * &b.u, false, opts)
}

/// Default radial upper limit for the hemisphere.
pub const POLE: f64 = FRAC_PI_2;

struct ExpScaled {
    src: ModeField,
    sigma: crate::geometry::SigmaFn,
    c: f64,
}

impl Profile for ExpScaled {
    fn eval(&self, pt: &Pt, part: Part) -> Ser {
        let u = self.src.eval(pt, part);
        if u.c.iter().all(|v| *v == 0.0) {
            return u;
        }
        u * ((self.sigma)(pt) * self.c).exp()
    }

    fn split(&self) -> f64 {
        self.src.split()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.src.breakpoints()
    }
}

impl ModeField {
    /// `e^{c sigma} U` for an even radial `sigma`.
    pub fn times_exp(&self, sigma: &crate::geometry::SigmaFn, c: f64) -> ModeField {
        if c == 0.0 {
            return self.clone();
        }
        let prof = ExpScaled { src: self.clone(), sigma: sigma.clone(), c };
        ModeField::from_profile(self.degree, Arc::new(prof))
    }
}
