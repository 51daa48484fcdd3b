use gjms::field::{Envelope, ModeField, PolyProfile};
use gjms::geometry::ModelGeometry;
use gjms::ops::{factor_constants, l2phi_apply, l4phi_apply, l4phi_factored, relative_residual, weighted_laplacian_mode, Op};
use gjms::scattering::build_extension;
use gjms::specfun::{gamma_ratio, FracParams};
use std::sync::Arc;

fn interior(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * (i as f64 + 0.5) / n as f64).collect()
}

#[test]
fn halfspace_harmonic_decay() {
    let geo = ModelGeometry::halfspace(3);
    let p = FracParams::new(0.5, 3).unwrap();
    let u = ModeField::from_profile(1.0, Arc::new(PolyProfile::global(Envelope::Decay(1.0), 0.0, 0, false)));
    let lu = l2phi_apply(&u, &geo, &p).unwrap();
    for y in interior(0.05, 5.0, 12) {
        assert!(lu.value_at(&geo, y).abs() < 1e-13);
    }
    let lap = weighted_laplacian_mode(&ModeField::from_profile(0.0, Arc::new(PolyProfile::global(Envelope::One, 0.0, 0, false))), &geo, &p);
    assert!(lap.value_at(&geo, 0.7).abs() < 1e-14);
}

#[test]
fn extension_lies_in_kernel() {
    for &(n, g) in &[(4usize, 0.3), (5, 0.7), (5, 1.25), (7, 1.75)] {
        let geo = ModelGeometry::hemisphere(n);
        let p = FracParams::new(g, n).unwrap();
        let psis = if p.is_high() { vec![(3usize, -0.4)] } else { vec![] };
        let u = build_extension(&[(3, 1.0)], &psis, &p, &geo).unwrap();
        let op = if p.is_high() { Op::L4 } else { Op::L2 };
        let ts = interior(0.02, 1.55, 40);
        let r = relative_residual(&u[0], &geo, &p, op, &ts);
        assert!(r < 1e-8, "n={n} g={g}: {r:e}");
    }
}

#[test]
fn paneitz_forms_agree() {
    let p = FracParams::new(1.4, 5).unwrap();
    let geo = ModelGeometry::hemisphere(5);
    let b = p.beta();
    let parts: Vec<(f64, PolyProfile)> = vec![
        (0.7, PolyProfile::global(Envelope::CosPow(2), 0.0, 1, false)),
        (-1.1, PolyProfile::global(Envelope::CosPow(2), b, 0, true)),
        (0.3, PolyProfile::global(Envelope::CosPow(4), 0.0, 3, false)),
    ];
    let mut u = ModeField::zero(2.0);
    for (c, pp) in parts {
        u = u.add(&ModeField::from_profile(2.0, Arc::new(pp)).scale(c));
    }
    let a = l4phi_apply(&u, &geo, &p).unwrap();
    let f = l4phi_factored(&u, &geo, &p).unwrap();
    for t in interior(0.03, 1.5, 25) {
        let (x, y) = (a.value_at(&geo, t), f.value_at(&geo, t));
        assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0), "t={t}: {x} vs {y}");
    }
}

#[test]
fn factor_constants_match_gamma_forms() {
    for &(n, g) in &[(4usize, 1.3), (5, 1.5), (9, 1.8)] {
        let p = FracParams::new(g, n).unwrap();
        let (c1, c2) = factor_constants(p.m, n as f64);
        let nn = n as f64 - 2.0 * g;
        let want = gamma_ratio(0.5 * (nn + 8.0), 0.5 * nn);
        assert!((c1 * c2 - want).abs() < 1e-10 * want);
        assert!((c1 + c2 - ((nn + 3.0).powi(2) - 5.0) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn wrong_range_is_rejected() {
    let geo = ModelGeometry::hemisphere(5);
    let u = ModeField::zero(0.0);
    assert!(l4phi_apply(&u, &geo, &FracParams::new(0.5, 5).unwrap()).is_err());
    assert!(l2phi_apply(&u, &geo, &FracParams::new(1.5, 5).unwrap()).is_err());
}
