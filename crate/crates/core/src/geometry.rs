//! Model smooth metric measure spaces: the flat half-space and the
//! hemisphere, optionally rescaled by a radial conformal factor.
//!
//! Fields are handled one harmonic mode at a time.  All local quantities
//! are truncated series in a chart variable: either a Taylor jet around an
//! interior point (`Chart::At`) or an expansion in the canonical defining
//! function at the boundary (`Chart::Boundary`).  The latter gives exact
//! boundary limits without 0/0 evaluations.

use crate::error::{Error, Result};
use crate::quad::gauss_jacobi_unit;
use crate::series::Ser;
use crate::specfun::FracParams;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    HalfSpace,
    Hemisphere,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Chart {
    /// Taylor jet in `t` (or `y`) around an interior point.
    At(f64),
    /// Series in the canonical defining function `sin t` (or `y`) at 0.
    Boundary,
}

/// Chart point: `t`, `s = sin t`, `c = cos t` and `dt/dvar` as series.
/// On the half-space `t = s = y` and `c = 1`.
#[derive(Clone, Debug)]
pub struct Pt {
    pub chart: Chart,
    pub t: Ser,
    pub s: Ser,
    pub c: Ser,
    pub dt: Ser,
}

impl Pt {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Geodesic variable `2 tan(t/2)` of the canonical hemisphere.
    pub fn r(&self) -> Ser {
        (&self.s * 2.0) / (&self.c + 1.0)
    }
}

pub type SigmaFn = Arc<dyn Fn(&Pt) -> Ser + Send + Sync>;

#[derive(Clone)]
pub struct ModelGeometry {
    pub kind: Kind,
    pub n: usize,
    sigma: Option<SigmaFn>,
    sigma0: f64,
    pub label: String,
}

impl fmt::Debug for ModelGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelGeometry")
            .field("kind", &self.kind)
            .field("n", &self.n)
            .field("label", &self.label)
            .finish()
    }
}

/// Local geometric series at a chart point, for one model.
#[derive(Clone, Debug)]
pub struct Local {
    pub pt: Pt,
    /// conformal factor on dt, warp of the fiber, defining function
    pub a: Ser,
    pub w: Ser,
    pub rho: Ser,
    /// `1/(a dt/dvar)`: converts d/dvar into the unit-speed d/ds
    pub inv_ds: Ser,
    pub ws: Ser,
    pub wss: Ser,
    pub rs: Ser,
    pub rss: Ser,
    /// `n w_s/w + m rho_s/rho`
    pub drift: Ser,
    pub inv_w2: Ser,
    pub m: f64,
    pub n: f64,
    pub kappa: f64,
}

impl Local {
    pub fn ds(&self, f: &Ser) -> Ser {
        f.deriv() * &self.inv_ds
    }

    /// Weighted Laplacian of a mode with tangential eigenvalue `lam`.
    pub fn lap_phi(&self, u: &Ser, lam: f64) -> Ser {
        let us = self.ds(u);
        let out = self.ds(&us) + &self.drift * &us - (&self.inv_w2 * u) * lam;
        out.drop_tiny_below(u.lead(), 1e-10 * u.lead_scale())
    }

    /// `delta_phi(T grad u)` for `T = diag(a_s, a_t)` (radial and tangential eigenvalues).
    pub fn div_phi(&self, u: &Ser, lam: f64, a_s: &Ser, a_t: &Ser) -> Ser {
        let f = a_s * &self.ds(u);
        let out = self.ds(&f) + &self.drift * &f - (&(&self.inv_w2 * a_t) * u) * lam;
        out.drop_tiny_below(u.lead(), 1e-10 * u.lead_scale())
    }

    /// `rho^m dvol` per mode, as a density in the chart variable.
    pub fn vol(&self) -> Ser {
        let dtdv = &self.pt.dt;
        self.rho.powf(self.m) * self.w.powi(self.n as i32) * &self.a * dtdv
    }

    pub fn ric(&self) -> (Ser, Ser) {
        let n = self.n;
        let wss_w = &self.wss / &self.w;
        let rss = -&wss_w * n;
        let rtt = -&wss_w + ((&self.ws * &self.ws) * -1.0 + self.kappa) * &self.inv_w2 * (n - 1.0);
        (rss, rtt)
    }

    pub fn scal(&self) -> Ser {
        let (a, b) = self.ric();
        a + b * self.n
    }

    pub fn j(&self) -> Ser {
        self.scal() / (2.0 * self.n)
    }

    /// Schouten tensor eigenvalues (radial, tangential); needs n >= 2.
    pub fn schouten(&self) -> (Ser, Ser) {
        let (a, b) = self.ric();
        let j = self.j();
        let d = self.n - 1.0;
        ((a - &j) / d, (b - &j) / d)
    }

    pub fn lap_rho(&self) -> Ser {
        &self.rss + (&self.ws / &self.w) * &self.rs * self.n
    }

    /// `(|grad rho|^2 - 1)/rho^2`
    pub fn grad_defect(&self) -> Ser {
        ((&self.rs * &self.rs) - 1.0).drop_tiny_below(0.5, 1e-12) / (&self.rho * &self.rho)
    }

    pub fn j_phi(&self) -> Ser {
        let m = self.m;
        let t = self.scal() - (self.lap_rho() / &self.rho) * (2.0 * m) - self.grad_defect() * (m * (m - 1.0));
        t / (2.0 * (m + self.n))
    }

    /// Lemma-type closed form `J - m/(n+1) (J + rho^{-1} Delta rho)`.
    pub fn j_phi_alt(&self) -> Ser {
        let j = self.j();
        let t = &j + self.lap_rho() / &self.rho;
        j - t * (self.m / (self.n + 1.0))
    }

    pub fn p_phi(&self) -> (Ser, Ser) {
        let m = self.m;
        let (a, b) = self.ric();
        let jp = self.j_phi();
        let d = m + self.n - 1.0;
        let hs = &self.rss / &self.rho;
        let ht = (&self.ws / &self.w) * &self.rs / &self.rho;
        ((a - hs * m - &jp) / d, (b - ht * m - &jp) / d)
    }

    /// `Y / m` with `Y = J_phi - tr P_phi`, written without the division by m.
    pub fn y_over_m(&self) -> Ser {
        let d = self.m + self.n - 1.0;
        -(self.j_phi() + self.lap_rho() / &self.rho + self.grad_defect() * (self.m - 1.0)) / d
    }

    pub fn y_phi(&self) -> Ser {
        self.y_over_m() * self.m
    }

    /// Weighted Q-curvature; `coef` multiplies `J_phi^2` (the Paneitz-consistent
    /// value is `(m+n+1)/2`).
    pub fn q_phi_with(&self, coef: f64) -> Ser {
        let jp = self.j_phi();
        let (ps, pt) = self.p_phi();
        let p2 = &ps * &ps + (&pt * &pt) * self.n;
        let ym = self.y_over_m();
        let lapj = self.lap_phi(&jp, 0.0);
        -lapj - p2 * 2.0 - (&ym * &ym) * (2.0 * self.m) + (&jp * &jp) * coef
    }

    pub fn q_phi(&self) -> Ser {
        self.q_phi_with(0.5 * (self.m + self.n + 1.0))
    }

    /// Eq. (2.6)-type residual `J + rho^{-1} Delta rho - (n+1)/2 rho^{-2}(|grad rho|^2 - 1)`.
    pub fn einstein_residual(&self) -> Ser {
        self.j() + self.lap_rho() / &self.rho - self.grad_defect() * (0.5 * (self.n + 1.0))
    }
}

impl ModelGeometry {
    pub fn hemisphere(n: usize) -> Self {
        Self { kind: Kind::Hemisphere, n, sigma: None, sigma0: 0.0, label: "hemisphere".into() }
    }

    pub fn halfspace(n: usize) -> Self {
        Self { kind: Kind::HalfSpace, n, sigma: None, sigma0: 0.0, label: "halfspace".into() }
    }

    /// Hemisphere with the geodesic compactification `rho = 2 tan(t/2)`.
    pub fn hemisphere_geodesic(n: usize) -> Self {
        let sig: SigmaFn = Arc::new(|pt: &Pt| -(((&pt.c + 1.0) * 0.5).ln()));
        Self {
            kind: Kind::Hemisphere,
            n,
            sigma: Some(sig),
            sigma0: 0.0,
            label: "hemisphere-geodesic".into(),
        }
    }

    pub fn is_rescaled(&self) -> bool {
        self.sigma.is_some()
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Upper end of the radial chart.
    pub fn t_max(&self, degree: f64) -> f64 {
        match self.kind {
            Kind::Hemisphere => std::f64::consts::FRAC_PI_2,
            Kind::HalfSpace => 40.0 / degree.max(1e-3),
        }
    }

    /// Tangential eigenvalue of a mode: `k(k+n-1)` or `|xi|^2`.
    pub fn lambda(&self, degree: f64) -> f64 {
        match self.kind {
            Kind::Hemisphere => degree * (degree + self.n as f64 - 1.0),
            Kind::HalfSpace => degree * degree,
        }
    }

    pub fn point(&self, chart: Chart, len: usize) -> Pt {
        match (self.kind, chart) {
            (Kind::Hemisphere, Chart::At(t0)) => {
                let t = Ser::var(t0, len);
                let (s, c) = t.sin_cos();
                Pt { chart, t, s, c, dt: Ser::constant(1.0, len) }
            }
            (Kind::Hemisphere, Chart::Boundary) => {
                let s = Ser::var(0.0, len);
                let c = (1.0 - &s * &s).sqrt();
                let t = s.asin();
                let dt = c.recip();
                Pt { chart, t, s, c, dt }
            }
            (Kind::HalfSpace, Chart::At(y0)) => {
                let t = Ser::var(y0, len);
                Pt { chart, s: t.clone(), t, c: Ser::constant(1.0, len), dt: Ser::constant(1.0, len) }
            }
            (Kind::HalfSpace, Chart::Boundary) => {
                let t = Ser::var(0.0, len);
                Pt { chart, s: t.clone(), t, c: Ser::constant(1.0, len), dt: Ser::constant(1.0, len) }
            }
        }
    }

    pub fn sigma_at(&self, pt: &Pt) -> Ser {
        match &self.sigma {
            Some(f) => f(pt),
            None => Ser::constant(0.0, pt.len()),
        }
    }

    /// Local geometry at a chart point. `len` is the series length of the
    /// returned quantities; internally two extra orders are carried.
    pub fn local(&self, chart: Chart, len: usize, p: &FracParams) -> Local {
        let pt = self.point(chart, len + 3);
        let a = self.sigma_at(&pt).exp();
        let (w, rho, kappa) = match self.kind {
            Kind::Hemisphere => (&a * &pt.c, &a * &pt.s, 1.0),
            Kind::HalfSpace => (a.clone(), &a * &pt.s, 0.0),
        };
        let inv_ds = (&a * &pt.dt).recip();
        let ds = |f: &Ser| f.deriv() * &inv_ds;
        let ws = ds(&w);
        let wss = ds(&ws);
        let rs = ds(&rho);
        let rss = ds(&rs);
        let n = self.n as f64;
        let drift = (&ws / &w) * n + (&rs / &rho) * p.m;
        let inv_w2 = (&w * &w).recip();
        Local { pt, a, w, rho, inv_ds, ws, wss, rs, rss, drift, inv_w2, m: p.m, n, kappa }
    }

    /// Geodesic defining function of this compactification at a chart point.
    pub fn geodesic_r(&self, pt: &Pt) -> Ser {
        let sc = self.sigma0.exp();
        match self.kind {
            Kind::Hemisphere => pt.r() * sc,
            Kind::HalfSpace => &pt.s * sc,
        }
    }

    /// Boundary value of the fiber warp `w`, so that the boundary metric is `w0^2 h`.
    pub fn w0(&self) -> f64 {
        self.sigma0.exp()
    }

    /// Scalar curvature of the boundary metric divided by `2(n-1)`: `J-bar`.
    pub fn j_bar(&self) -> f64 {
        match self.kind {
            Kind::Hemisphere => 0.5 * self.n as f64 * (-2.0 * self.sigma0).exp(),
            Kind::HalfSpace => 0.0,
        }
    }

    /// Jet `(rho_2, Phi)` of `rho/r` for this compactification.
    pub fn defining_jet(&self) -> DefiningFunctionJet {
        let pt = self.point(Chart::Boundary, 8);
        let a = self.sigma_at(&pt).exp();
        let rho = match self.kind {
            Kind::Hemisphere => &a * &pt.s,
            Kind::HalfSpace => &a * &pt.s,
        };
        let q = rho / self.geodesic_r(&pt);
        DefiningFunctionJet { rho2: q.coef(2) / q.coef(0) / (self.sigma0.exp().powi(2)), phi: 0.0 }
    }
}

/// Radial rescaling `e^{2 sigma} g`, `e^sigma rho`. The factor must be an
/// even function of the canonical defining function (smooth, radial).
pub fn conformal_rescale(g: &ModelGeometry, sigma: SigmaFn, p: &FracParams) -> Result<ModelGeometry> {
    if g.sigma.is_some() {
        let inner = g.sigma.clone().unwrap();
        let outer = sigma.clone();
        let composed: SigmaFn = Arc::new(move |pt: &Pt| inner(pt) + outer(pt));
        let mut out = conformal_rescale(&ModelGeometry { sigma: None, ..g.clone() }, composed, p)?;
        out.label = format!("{}+rescaled", g.label);
        return Ok(out);
    }
    let pt = g.point(Chart::Boundary, 12);
    let s = sigma(&pt);
    let s = if s.e == 0.0 { s } else { s.with_exponent(0.0) };
    let scale = s.max_abs().max(1.0);
    for (j, v) in s.c.iter().enumerate() {
        if j % 2 == 1 && v.abs() > 1e-12 * scale {
            return Err(Error::NotAdmissible(format!(
                "odd power rho^{j} in the conformal factor (gamma = {})",
                p.gamma
            )));
        }
    }
    Ok(ModelGeometry {
        kind: g.kind,
        n: g.n,
        sigma0: s.c[0],
        sigma: Some(sigma),
        label: format!("{}+rescaled", g.label),
    })
}

/// Coefficients of `rho/r = 1 + rho_2 r^2 + Phi r^{2 gamma} + ...`.
#[derive(Clone, Copy, Debug, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct DefiningFunctionJet {
    pub rho2: f64,
    pub phi: f64,
}

impl DefiningFunctionJet {
    pub fn geodesic() -> Self {
        Self { rho2: 0.0, phi: 0.0 }
    }

    /// Canonical `rho = sin t` on the hemisphere.
    pub fn hemisphere_canonical() -> Self {
        Self { rho2: -0.25, phi: 0.0 }
    }
}

/// Gauss-Jacobi grid on (0,1) for the weight `rho^m`.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// polynomials up to this degree (times `rho^m`) are integrated exactly
    pub exact_degree: usize,
}

impl RadialGrid {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

pub fn make_grid(_g: &ModelGeometry, p: &FracParams, n: usize) -> Result<RadialGrid> {
    if n < 8 {
        return Err(Error::GridTooSmall(n));
    }
    let (nodes, weights) = gauss_jacobi_unit(n, p.m);
    Ok(RadialGrid { nodes, weights, exact_degree: 2 * n - 1 })
}

/// Pointwise weighted curvature values at an interior `t`.
#[derive(Clone, Copy, Debug)]
pub struct CurvatureValues {
    pub j_phi: f64,
    pub p_normal: f64,
    pub p_tangential: f64,
    pub q_phi: f64,
    pub y_phi: f64,
}

/// Radial profiles of the weighted curvatures, plus the alternative
/// closed-form route used as a cross-check.
pub struct WeightedCurvatures<'a> {
    pub geo: &'a ModelGeometry,
    pub p: FracParams,
}

pub fn weighted_curvatures<'a>(g: &'a ModelGeometry, p: &FracParams) -> WeightedCurvatures<'a> {
    WeightedCurvatures { geo: g, p: *p }
}

impl WeightedCurvatures<'_> {
    pub fn at(&self, t: f64) -> CurvatureValues {
        let l = self.geo.local(Chart::At(t), 3, &self.p);
        let (ps, pt) = l.p_phi();
        CurvatureValues {
            j_phi: l.j_phi().value(),
            p_normal: ps.value(),
            p_tangential: pt.value(),
            q_phi: l.q_phi().value(),
            y_phi: l.y_phi().value(),
        }
    }

    /// Largest deviation between the definitional and closed-form routes at `t`:
    /// `J_phi`, `P_phi = P`, and the Einstein-type identity.
    pub fn cross_check(&self, t: f64) -> f64 {
        let l = self.geo.local(Chart::At(t), 3, &self.p);
        let d1 = (l.j_phi().value() - l.j_phi_alt().value()).abs();
        let d3 = l.einstein_residual().value().abs();
        let mut d = d1.max(d3);
        if self.geo.n >= 2 {
            let (a, b) = l.p_phi();
            let (c, e) = l.schouten();
            d = d.max((a.value() - c.value()).abs()).max((b.value() - e.value()).abs());
        }
        d
    }

    /// Boundary limits of `J`, `P(eta,eta)`, `rho^{-1} Delta rho`, `J_phi`.
    pub fn boundary_limits(&self) -> Result<(f64, f64, f64, f64)> {
        let l = self.geo.local(Chart::Boundary, 10, &self.p);
        let j = l.j().limit_at_zero(1.0, 1e-9)?;
        let pnn = if self.geo.n >= 2 { l.schouten().0.limit_at_zero(1.0, 1e-9)? } else { 0.0 };
        let lr = (l.lap_rho() / &l.rho).limit_at_zero(1.0, 1e-9)?;
        let jp = l.j_phi().limit_at_zero(1.0, 1e-9)?;
        Ok((j, pnn, lr, jp))
    }
}
