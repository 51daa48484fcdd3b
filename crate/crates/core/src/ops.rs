//! Weighted Laplacian, weighted conformal Laplacian and weighted Paneitz
//! operator acting on mode fields.

use crate::error::{Error, Result};
use crate::field::{ModeField, Part, Profile};
use crate::geometry::{Chart, Kind, Local, ModelGeometry, Pt};
use crate::series::Ser;
use crate::specfun::FracParams;
use std::sync::Arc;

const EXTRA: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Lap,
    L2,
    L4,
    /// product of the two second-order factors (round hemisphere only)
    L4Factored,
}

/// Terms of an operator at a point; their sum is the operator value.
fn terms(l: &Local, u: &Ser, lam: f64, op: Op) -> Vec<Ser> {
    let mn = l.m + l.n;
    match op {
        Op::Lap => vec![l.lap_phi(u, lam)],
        Op::L2 => vec![l.lap_phi(u, lam) * -1.0, &l.j_phi() * u * (0.5 * (mn - 1.0))],
        Op::L4 => {
            let lu = l.lap_phi(u, lam);
            let llu = l.lap_phi(&lu, lam);
            let j = l.j_phi();
            let (ps, pt) = l.p_phi();
            let a_s = ps * 4.0 - &j * (mn - 1.0);
            let a_t = pt * 4.0 - &j * (mn - 1.0);
            vec![llu, l.div_phi(u, lam, &a_s, &a_t), &l.q_phi() * u * (0.5 * (mn - 3.0))]
        }
        Op::L4Factored => {
            let (c1, c2) = factor_constants(l.m, l.n);
            let v = l.lap_phi(u, lam) * -1.0 + u * c2;
            vec![l.lap_phi(&v, lam) * -1.0, v * c1]
        }
    }
}

/// Constants `((m+n)^2-1)/4` and `((m+n)^2-9)/4` of the factorization on the
/// round hemisphere.
pub fn factor_constants(m: f64, n: f64) -> (f64, f64) {
    let mn2 = (m + n) * (m + n);
    (0.25 * (mn2 - 1.0), 0.25 * (mn2 - 9.0))
}

struct OpProfile {
    geo: ModelGeometry,
    p: FracParams,
    src: ModeField,
    op: Op,
}

impl Profile for OpProfile {
    fn eval(&self, pt: &Pt, part: Part) -> Ser {
        let len = pt.len();
        let l = self.geo.local(pt.chart, len + EXTRA, &self.p);
        let u = self.src.eval(&l.pt, part);
        let lam = self.geo.lambda(self.src.degree);
        let mut it = terms(&l, &u, lam, self.op).into_iter();
        let first = it.next().unwrap();
        it.fold(first, |a, b| a + b).truncate(len)
    }

    fn split(&self) -> f64 {
        self.src.split()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.src.breakpoints()
    }
}

fn wrap(f: &ModeField, geo: &ModelGeometry, p: &FracParams, op: Op) -> ModeField {
    let prof = OpProfile { geo: geo.clone(), p: *p, src: f.clone(), op };
    ModeField::from_profile(f.degree, Arc::new(prof))
}

pub fn weighted_laplacian_mode(f: &ModeField, geo: &ModelGeometry, p: &FracParams) -> ModeField {
    wrap(f, geo, p, Op::Lap)
}

pub fn l2phi_apply(f: &ModeField, geo: &ModelGeometry, p: &FracParams) -> Result<ModeField> {
    if p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    Ok(wrap(f, geo, p, Op::L2))
}

pub fn l4phi_apply(f: &ModeField, geo: &ModelGeometry, p: &FracParams) -> Result<ModeField> {
    if !p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    Ok(wrap(f, geo, p, Op::L4))
}

pub fn l4phi_factored(f: &ModeField, geo: &ModelGeometry, p: &FracParams) -> Result<ModeField> {
    if !p.is_high() {
        return Err(Error::WrongRange(p.gamma));
    }
    if geo.kind != Kind::Hemisphere || geo.is_rescaled() {
        return Err(Error::InvalidParams("factorized form holds on the round hemisphere only".into()));
    }
    Ok(wrap(f, geo, p, Op::L4Factored))
}

/// `max |L u| / max sum |terms|` over interior positions `ts`.
pub fn relative_residual(f: &ModeField, geo: &ModelGeometry, p: &FracParams, op: Op, ts: &[f64]) -> f64 {
    let lam = geo.lambda(f.degree);
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for &t in ts {
        let l = geo.local(Chart::At(t), 1 + EXTRA, p);
        let u = f.eval(&l.pt, Part::Whole);
        let tv: Vec<f64> = terms(&l, &u, lam, op).iter().map(|s| s.value()).collect();
        num = num.max(tv.iter().sum::<f64>().abs());
        den = den.max(tv.iter().map(|v| v.abs()).sum::<f64>());
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
