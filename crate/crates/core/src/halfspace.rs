//! Per-frequency model on the upper half space `(0, inf) x R^n` with weight
//! `y^m`. A Fourier mode `U(y) e^{i x.xi}` turns `Delta_phi` into
//! `L = d^2/dy^2 + (m/y) d/dy - |xi|^2`.
//!
//! Solutions are built in two pieces: Frobenius series on `[0, y0]` with
//! `y0 = 1/xi`, and Taylor integration inward from `y_max = 40/xi` on
//! `[y0, y_max]` started on the decaying branch. Growing components picked up
//! by the approximate start decay like `e^{-2 xi (y_max - y)}` and are below
//! roundoff at `y0`. Beyond `y_max` profiles are taken to be zero.

use crate::error::{Error, Result};
use crate::ode::{integrate_linear, CoefMatrix, DenseSolution, OdeOpts};
use crate::quad::gauss_legendre;
use crate::series::Ser;
use crate::specfun::{d_gamma, FracParams};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::Serialize;
use std::sync::Arc;

const TERMS: usize = 48;
const Y_MAX: f64 = 40.0;
const PANEL: f64 = 0.5;
const PANEL_NODES: usize = 16;

type FarFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// A mode profile `u(y)` for one frequency `xi`.
#[derive(Clone)]
pub struct HalfProfile {
    pub xi: f64,
    m: f64,
    /// series on `[0, y0]`, one per exponent lattice
    near: Vec<Ser>,
    far: Vec<(f64, FarFn)>,
}

impl std::fmt::Debug for HalfProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HalfProfile")
            .field("xi", &self.xi)
            .field("m", &self.m)
            .field("near", &self.near)
            .field("far_parts", &self.far.len())
            .finish()
    }
}

fn push_ser(list: &mut Vec<Ser>, s: Ser) {
    for t in list.iter_mut() {
        let d = s.e - t.e;
        if (d - d.round()).abs() < 1e-9 {
            *t = t.add_ser(&s);
            return;
        }
    }
    list.push(s);
}

fn sum_eval(list: &[Ser], y: f64) -> f64 {
    list.iter().map(|s| s.eval(y)).sum()
}

impl HalfProfile {
    pub fn zero(xi: f64, p: &FracParams) -> Self {
        Self { xi, m: p.m, near: vec![], far: vec![] }
    }

    pub fn y0(&self) -> f64 {
        1.0 / self.xi
    }

    pub fn y_max(&self) -> f64 {
        Y_MAX / self.xi
    }

    /// `(u, u', u'')` at `y > 0`.
    pub fn eval(&self, y: f64) -> [f64; 3] {
        if y <= self.y0() {
            let d1: Vec<Ser> = self.near.iter().map(|s| s.deriv()).collect();
            let d2: Vec<Ser> = d1.iter().map(|s| s.deriv()).collect();
            [sum_eval(&self.near, y), sum_eval(&d1, y), sum_eval(&d2, y)]
        } else if y >= self.y_max() {
            [0.0; 3]
        } else {
            let mut out = [0.0; 3];
            for (a, f) in &self.far {
                let v = f(y);
                for i in 0..3 {
                    out[i] += a * v[i];
                }
            }
            out
        }
    }

    pub fn add(&self, o: &HalfProfile) -> Self {
        assert!((self.xi - o.xi).abs() <= 1e-14 * self.xi, "profiles at different frequencies");
        let mut near = self.near.clone();
        for s in &o.near {
            push_ser(&mut near, s.clone());
        }
        let mut far = self.far.clone();
        far.extend(o.far.iter().cloned());
        Self { xi: self.xi, m: self.m, near, far }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            xi: self.xi,
            m: self.m,
            near: self.near.iter().map(|s| s.scale(a)).collect(),
            far: self.far.iter().map(|(c, f)| (c * a, f.clone())).collect(),
        }
    }

    fn coef_at(&self, e: f64) -> f64 {
        self.near.iter().map(|s| s.coef_at(e)).sum()
    }

    /// `u(0)`.
    pub fn trace(&self) -> f64 {
        self.coef_at(0.0)
    }

    /// `lim_{y -> 0} y^m u'(y)`.
    pub fn weighted_flux(&self) -> f64 {
        (1.0 - self.m) * self.coef_at(1.0 - self.m)
    }

    pub fn is_zero(&self) -> bool {
        self.near.iter().all(|s| s.c.iter().all(|v| *v == 0.0)) && self.far.iter().all(|(a, _)| *a == 0.0)
    }

    /// `int_0^inf F(u, u', u'', y) y^m dy` where `near` gives `F` as series on
    /// `[0, y0]` and `far` pointwise.
    fn integrate(&self, near: impl Fn(&[Ser], &[Ser], &[Ser]) -> Vec<Ser>, far: impl Fn([f64; 3], f64) -> f64) -> f64 {
        let y0 = self.y0();
        let d1: Vec<Ser> = self.near.iter().map(|s| s.deriv()).collect();
        let d2: Vec<Ser> = d1.iter().map(|s| s.deriv()).collect();
        let inner: f64 = near(&self.near, &d1, &d2).iter().map(|s| s.shift(self.m).integrate_to(y0)).sum();
        let ym = self.y_max();
        let panels = ((ym - y0) / (PANEL / self.xi)).ceil() as usize;
        let h = (ym - y0) / panels as f64;
        let mut outer = 0.0;
        for k in 0..panels {
            let (ys, ws) = gauss_legendre(PANEL_NODES, y0 + k as f64 * h, y0 + (k + 1) as f64 * h);
            for (y, w) in ys.iter().zip(&ws) {
                outer += w * far(self.eval(*y), *y) * y.powf(self.m);
            }
        }
        inner + outer
    }
}

fn products(a: &[Ser], b: &[Ser]) -> Vec<Ser> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            push_ser(&mut out, x.mul_ser(y));
        }
    }
    out
}

fn lin(a: &[Ser], ca: f64, b: &[Ser], cb: f64) -> Vec<Ser> {
    let mut out: Vec<Ser> = a.iter().map(|s| s.scale(ca)).collect();
    for s in b {
        push_ser(&mut out, s.scale(cb));
    }
    out
}

/// Frobenius solution of `L^2 u = 0` on the lattice `s0 + 2j`, where `s0` is
/// 0 or `1 - m`, with `u ~ c0 y^s0` and `(L u) ~ w0 y^s0`. Returns `(u, L u)`.
fn frobenius(s0: f64, c0: f64, w0: f64, m: f64, xi: f64) -> (Ser, Ser) {
    let d = |s: f64| s * (s - 1.0 + m);
    let x2 = xi * xi;
    let mut c = vec![0.0; TERMS];
    let mut w = vec![0.0; TERMS];
    c[0] = c0;
    w[0] = w0;
    for j in (2..TERMS).step_by(2) {
        let s = s0 + j as f64;
        w[j] = x2 * w[j - 2] / d(s);
        c[j] = (w[j - 2] + x2 * c[j - 2]) / d(s);
    }
    (Ser::new(s0, c), Ser::new(s0, w))
}

fn coefficient_matrix(m: f64, xi: f64, order4: bool) -> impl Fn(f64, usize) -> CoefMatrix {
    move |t: f64, len: usize| {
        let inv: Vec<f64> = (0..len).map(|j| (-1.0f64).powi(j as i32) * m / t.powi(j as i32 + 1)).collect();
        let z = Ser::zero(len);
        let k = Ser::constant(xi * xi, len);
        let one = Ser::constant(1.0, len);
        let minus_inv = Ser::new(0.0, inv.iter().map(|v| -v).collect());
        if order4 {
            vec![
                vec![z.clone(), one.clone(), z.clone(), z.clone()],
                vec![k.clone(), minus_inv.clone(), one.clone(), z.clone()],
                vec![z.clone(), z.clone(), z.clone(), one],
                vec![z.clone(), z, k, minus_inv],
            ]
        } else {
            vec![vec![z.clone(), one], vec![k, minus_inv]]
        }
    }
}

/// Integrate from `y_max` down to `y0` starting at `start`.
fn inward(m: f64, xi: f64, start: &[f64]) -> Result<Arc<DenseSolution>> {
    let order4 = start.len() == 4;
    let mat = coefficient_matrix(m, xi, order4);
    let sol = integrate_linear(&mat, &|y| 0.5 * y, start, Y_MAX / xi, 1.0 / xi, &OdeOpts::default())?;
    Ok(Arc::new(sol))
}

fn far_from(sol: Arc<DenseSolution>) -> FarFn {
    Arc::new(move |y| {
        let j = sol.jet(0, y, 3);
        [j.c[0], j.c[1], 2.0 * j.c[2]]
    })
}

fn state(u: &Ser, w: &Ser, y: f64) -> [f64; 4] {
    [u.eval(y), u.deriv().eval(y), w.eval(y), w.deriv().eval(y)]
}

/// Amplitude at `y_max` that makes the decaying branch O(1) at `y0`.
fn start_scale() -> f64 {
    (1.0 - Y_MAX).exp()
}

fn check_xi(xi: f64) -> Result<()> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::InvalidParams(format!("frequency must be positive, got {xi}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct CsMode {
    /// `(d_gamma / 2 gamma) lim y^m u'`, to be compared with `xi^{2 gamma}`
    pub dtn: f64,
    pub profile: HalfProfile,
}

/// Decaying solution of `L u = 0` with `u(0) = 1`, for gamma in (0,1).
pub fn cs_mode(xi: f64, p: &FracParams) -> Result<CsMode> {
    if p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    check_xi(xi)?;
    let m = p.m;
    let y0 = 1.0 / xi;
    let ym = Y_MAX / xi;
    let s = start_scale();
    let sol = inward(m, xi, &[s, -s * (xi + 0.5 * m / ym)])?;
    let v = sol.value(y0);
    let (u1, _) = frobenius(0.0, 1.0, 0.0, m, xi);
    let (u2, _) = frobenius(1.0 - m, 1.0, 0.0, m, xi);
    let a = Matrix2::new(u1.eval(y0), u2.eval(y0), u1.deriv().eval(y0), u2.deriv().eval(y0));
    let ab = a
        .lu()
        .solve(&Vector2::new(v[0], v[1]))
        .ok_or_else(|| Error::Integration("decay branch selection failed".into()))?;
    if !(ab[0].abs() > 1e-12 * ab[1].abs()) {
        return Err(Error::Integration("decaying branch has zero trace".into()));
    }
    let inv = 1.0 / ab[0];
    let mut near = vec![u1];
    push_ser(&mut near, u2.scale(ab[1] * inv));
    let profile = HalfProfile { xi, m, near, far: vec![(inv, far_from(sol))] };
    let dtn = d_gamma(p) / (2.0 * p.gamma) * profile.weighted_flux();
    Ok(CsMode { dtn, profile })
}

/// Per-mode energies of a profile for gamma in (1,2).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ModeEnergies {
    pub f: f64,
    pub psi: f64,
    /// `int (Delta_phi U)^2 y^m`
    pub laplacian_sq: f64,
    /// `int |grad^2 U + m y^{-1} dU/dy dy (x) dy|^2 y^m`
    pub hessian: f64,
    /// `4 xi^2 f psi`
    pub cross: f64,
    /// lower bound for `laplacian_sq`, attained by solutions
    pub preenergy_rhs: f64,
    /// the stated lower bound for `hessian`: no cross term, coefficients
    /// `8 gamma (gamma-1)^2 / d_gamma` and `d_gamma / 2 gamma`
    pub energy_rhs: f64,
    /// `hessian - energy_rhs` on solutions:
    /// `(2 - gamma) (a xi^gamma f + b xi^{2-gamma} psi)^2`
    pub solution_gap: f64,
    /// `laplacian_sq - hessian - 4 (gamma - 1) xi^2 f psi`; zero for every
    /// admissible profile
    pub ibp_defect: f64,
}

/// Quadratic forms of a mode profile for gamma in (1,2). `f = u(0)` and
/// `psi = lim y^m u' / (2 (gamma - 1))`.
pub fn mode_energies(u: &HalfProfile, p: &FracParams) -> Result<ModeEnergies> {
    if !p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    let g = p.gamma;
    let m = p.m;
    let xi = u.xi;
    let x2 = xi * xi;
    let d = d_gamma(p);
    let f = u.trace();
    let psi = u.weighted_flux() / (2.0 * (g - 1.0));
    let a_part = |u: &[Ser], d1: &[Ser], d2: &[Ser]| -> Vec<Ser> {
        let _ = u;
        lin(d2, 1.0, &d1.iter().map(|s| s.shift(-1.0)).collect::<Vec<_>>(), m)
    };
    let laplacian_sq = u.integrate(
        |u, d1, d2| {
            let l = lin(&a_part(u, d1, d2), 1.0, u, -x2);
            products(&l, &l)
        },
        |v, y| (v[2] + m * v[1] / y - x2 * v[0]).powi(2),
    );
    let hessian = u.integrate(
        |u, d1, d2| {
            let a = a_part(u, d1, d2);
            let mut out = products(&a, &a);
            for s in products(d1, d1) {
                push_ser(&mut out, s.scale(2.0 * x2));
            }
            for s in products(u, u) {
                push_ser(&mut out, s.scale(x2 * x2));
            }
            out
        },
        |v, y| (v[2] + m * v[1] / y).powi(2) + 2.0 * x2 * v[1] * v[1] + x2 * x2 * v[0] * v[0],
    );
    let cross = 4.0 * x2 * f * psi;
    let cf = 8.0 * g * (g - 1.0) / d;
    let cp = d / (2.0 * g * (g - 1.0));
    let xf = xi.powf(2.0 * g);
    let xp = xi.powf(4.0 - 2.0 * g);
    let preenergy_rhs = cf * xf * f * f + cross + cp * xp * psi * psi;
    let energy_rhs = cf * (g - 1.0) * xf * f * f + d / (2.0 * g) * xp * psi * psi;
    let solution_gap = (2.0 - g) * (cf.sqrt() * xi.powf(g) * f + cp.sqrt() * xi.powf(2.0 - g) * psi).powi(2);
    let ibp_defect = laplacian_sq - hessian - 4.0 * (g - 1.0) * x2 * f * psi;
    Ok(ModeEnergies { f, psi, laplacian_sq, hessian, cross, preenergy_rhs, energy_rhs, solution_gap, ibp_defect })
}

/// Weighted Dirichlet energy `int (u'^2 + xi^2 u^2) y^m` and its lower bound
/// `-(2 gamma / d_gamma) xi^{2 gamma} u(0)^2`, for gamma in (0,1).
pub fn dirichlet_energy(u: &HalfProfile, p: &FracParams) -> Result<(f64, f64)> {
    if p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    let x2 = u.xi * u.xi;
    let e = u.integrate(
        |u, d1, _| {
            let mut out = products(d1, d1);
            for s in products(u, u) {
                push_ser(&mut out, s.scale(x2));
            }
            out
        },
        |v, _| v[1] * v[1] + x2 * v[0] * v[0],
    );
    let f = u.trace();
    Ok((e, -2.0 * p.gamma / d_gamma(p) * u.xi.powf(2.0 * p.gamma) * f * f))
}

#[derive(Clone, Debug)]
pub struct BiharmonicMode {
    pub profile: HalfProfile,
    pub energies: ModeEnergies,
    /// rank of the 4 x 2 matrix expressing the decaying solutions in the
    /// Frobenius basis
    pub decay_rank: usize,
    pub singular_values: [f64; 2],
}

/// Decaying solution of `L^2 u = 0` with `u(0) = f` and
/// `lim y^m u' = 2 (gamma - 1) psi`, for gamma in (1,2).
pub fn biharmonic_mode(xi: f64, f: f64, psi: f64, p: &FracParams) -> Result<BiharmonicMode> {
    if !p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    check_xi(xi)?;
    let m = p.m;
    let y0 = 1.0 / xi;
    let ym = Y_MAX / xi;
    let s = start_scale();
    let dv = -s * (xi + 0.5 * m / ym);
    let d1 = inward(m, xi, &[s, dv, 0.0, 0.0])?;
    let k = -ym / (2.0 * xi);
    let d2 = inward(m, xi, &[k * s, -s / (2.0 * xi) + k * dv, s, dv])?;
    let basis = [
        frobenius(0.0, 1.0, 0.0, m, xi),
        frobenius(1.0 - m, 1.0, 0.0, m, xi),
        frobenius(0.0, 0.0, 1.0, m, xi),
        frobenius(1.0 - m, 0.0, 1.0, m, xi),
    ];
    let fm = DMatrix::from_fn(4, 4, |i, j| state(&basis[j].0, &basis[j].1, y0)[i]);
    let dm = DMatrix::from_fn(4, 2, |i, j| if j == 0 { d1.value(y0)[i] } else { d2.value(y0)[i] });
    let c = fm
        .lu()
        .solve(&dm)
        .ok_or_else(|| Error::Integration("singular Frobenius basis".into()))?;
    let cn = DMatrix::from_fn(4, 2, |i, j| c[(i, j)] / c.column(j).norm());
    let sv = cn.singular_values();
    let decay_rank = sv.iter().filter(|v| **v > 1e-8 * sv[0]).count();
    let ab = Matrix2::new(c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)])
        .lu()
        .solve(&Vector2::new(f, psi))
        .filter(|_| decay_rank == 2)
        .ok_or_else(|| Error::Integration("decay branch selection failed".into()))?;
    let coef: DVector<f64> = &c * DVector::from_column_slice(ab.as_slice());
    let mut near = Vec::new();
    // data coefficients are imposed exactly
    let exact = [f, psi, coef[2], coef[3]];
    for (b, a) in basis.iter().zip(exact) {
        push_ser(&mut near, b.0.scale(a));
    }
    let far = vec![(ab[0], far_from(d1)), (ab[1], far_from(d2))];
    let profile = HalfProfile { xi, m, near, far };
    let energies = mode_energies(&profile, p)?;
    Ok(BiharmonicMode { profile, energies, decay_rank, singular_values: [sv[0], sv[1]] })
}

/// `amp (xi y)^k e^{-xi y}`, `k >= 2`: zero trace and zero weighted flux.
pub fn bump(xi: f64, k: u32, amp: f64, p: &FracParams) -> Result<HalfProfile> {
    check_xi(xi)?;
    if k < 2 {
        return Err(Error::InvalidParams(format!("bump order {k} < 2 has nonzero boundary data")));
    }
    let mut c = vec![0.0; TERMS];
    let mut t = amp * xi.powi(k as i32);
    for (j, v) in c.iter_mut().enumerate() {
        *v = t;
        t *= -xi / (j + 1) as f64;
    }
    let kf = k as f64;
    let far: FarFn = Arc::new(move |y| {
        let z = xi * y;
        let e = amp * (-z).exp();
        let u = z.powf(kf) * e;
        let du = xi * (kf * z.powf(kf - 1.0) - z.powf(kf)) * e;
        let d2 = xi * xi * (kf * (kf - 1.0) * z.powf(kf - 2.0) - 2.0 * kf * z.powf(kf - 1.0) + z.powf(kf)) * e;
        [u, du, d2]
    });
    Ok(HalfProfile { xi, m: p.m, near: vec![Ser::new(kf, c)], far: vec![(1.0, far)] })
}

/// Preenergy identity of a profile: `lhs = int (Delta_phi U)^2`, `rhs` the
/// bound attained by solutions, and the cross term `4 xi^2 f psi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Preenergy {
    pub lhs: f64,
    pub rhs: f64,
    pub cross_term: f64,
}

pub fn preenergy_identity(u: &HalfProfile, p: &FracParams) -> Result<Preenergy> {
    let e = mode_energies(u, p)?;
    Ok(Preenergy { lhs: e.laplacian_sq, rhs: e.preenergy_rhs, cross_term: e.cross })
}

/// Sum of per-mode energies of solutions over a finite frequency set
/// `(xi, f, psi, weight)`.
pub fn multi_mode_energies(modes: &[(f64, f64, f64, f64)], p: &FracParams) -> Result<ModeEnergies> {
    let mut acc = ModeEnergies::default();
    for &(xi, f, psi, w) in modes {
        let e = biharmonic_mode(xi, f, psi, p)?.energies;
        acc.laplacian_sq += w * e.laplacian_sq;
        acc.hessian += w * e.hessian;
        acc.cross += w * e.cross;
        acc.preenergy_rhs += w * e.preenergy_rhs;
        acc.energy_rhs += w * e.energy_rhs;
        acc.solution_gap += w * e.solution_gap;
        acc.ibp_defect += w * e.ibp_defect;
    }
    Ok(acc)
}

/// `log2(F(2 xi) / F(xi))`.
pub fn homogeneity_exponent(f: impl Fn(f64) -> Result<f64>, xi: f64) -> Result<f64> {
    Ok((f(2.0 * xi)? / f(xi)?).log2())
}
