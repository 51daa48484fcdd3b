use gjms::energy::*;
use gjms::field::{Envelope, ModeField, PolyProfile};
use gjms::geometry::{conformal_rescale, DefiningFunctionJet, ModelGeometry, SigmaFn};
use gjms::ops::{relative_residual, Op};
use gjms::scattering::{build_extension, p2gamma_apply};
use gjms::{Error, FracParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn models(n: usize) -> [(ModelGeometry, DefiningFunctionJet); 2] {
    [
        (ModelGeometry::hemisphere_geodesic(n), DefiningFunctionJet::geodesic()),
        (ModelGeometry::hemisphere(n), DefiningFunctionJet::hemisphere_canonical()),
    ]
}

fn poly(k: usize, e0: f64, xpow: u32) -> ModeField {
    let branch = (e0 * 0.5).fract() != 0.0;
    ModeField::from_profile(k as f64, Arc::new(PolyProfile::global(Envelope::CosPow(k as i32), e0, xpow, branch)))
}

#[test]
fn extension_attains_the_bound() {
    for (g, n) in [(0.3, 4usize), (0.5, 3), (0.75, 5), (1.3, 5), (1.7, 7)] {
        let p = FracParams::new(g, n).unwrap();
        for (geo, dj) in models(n) {
            let f = [(0, 1.0), (1, -0.4), (4, 0.3)];
            let psi: Vec<(usize, f64)> = if p.is_high() { vec![(0, 0.7), (1, 0.2), (4, -0.5)] } else { vec![] };
            let u = build_extension(&f, &psi, &p, &geo).unwrap();
            let e = energy(&u, &dj, &p, &geo).unwrap();
            assert!(e.gap.abs() <= 1e-8 * e.rhs.abs().max(1.0), "{g} {n} {}: {e:?}", geo.label);
            assert!((e.total - e.interior - e.boundary).abs() < 1e-12 * e.total.abs());
        }
    }
}

#[test]
fn psi_coefficient_routes_agree() {
    for g in [1.06, 1.2, 1.35, 1.5, 1.65, 1.8, 1.94] {
        let p = FracParams::new(g, 6).unwrap();
        let (a, b) = psi_coefficients(&p);
        assert!((a - b).abs() <= 1e-10 * a.abs(), "{g}: {a} {b}");
    }
}

#[test]
fn psi_only_extension() {
    let p = FracParams::new(1.4, 5).unwrap();
    let geo = ModelGeometry::hemisphere_geodesic(5);
    let q = FracParams::new(0.6, 5).unwrap();
    let data = [(0usize, 1.0), (2, 0.5)];
    let u = build_extension(&[], &data, &p, &geo).unwrap();
    let e = energy_high(&u, &DefiningFunctionJet::geodesic(), &p, &geo).unwrap();
    let pp = p2gamma_apply(&data, &q, &geo).unwrap();
    let expect: f64 = data.iter().zip(&pp).map(|((_, a), (_, b))| a * b).sum::<f64>() * psi_coefficients(&p).0;
    assert!((e.interior - expect).abs() < 1e-8 * expect.abs(), "{} {expect}", e.interior);
}

#[test]
fn zero_field_has_zero_energy() {
    let p = FracParams::new(1.3, 5).unwrap();
    let geo = ModelGeometry::hemisphere(5);
    let e = energy_high(&[ModeField::zero(2.0)], &DefiningFunctionJet::hemisphere_canonical(), &p, &geo).unwrap();
    assert_eq!(e, EnergyBreakdown::default());
    let m = minimize_over_interior(&[(1, 0.0)], &[], &p, &geo, 1e-6).unwrap();
    assert!(m.fields[0].is_zero());
}

#[test]
fn wrong_range_and_order() {
    let lo = FracParams::new(0.5, 3).unwrap();
    let hi = FracParams::new(1.5, 4).unwrap();
    let geo = ModelGeometry::hemisphere(3);
    let dj = DefiningFunctionJet::geodesic();
    assert!(matches!(energy_high(&[], &dj, &lo, &geo), Err(Error::WrongRange(_))));
    assert!(matches!(energy_low(&[], &dj, &hi, &geo), Err(Error::WrongRange(_))));
    assert!(matches!(q_form(&[], &[], &lo, &geo, 2), Err(Error::OrderMismatch { .. })));
}

#[test]
fn inadmissible_field_is_rejected() {
    let p = FracParams::new(0.5, 3).unwrap();
    let geo = ModelGeometry::hemisphere(3);
    // |grad U|^2 rho^m ~ rho^{-1.5}
    let u = poly(0, 0.25, 0);
    let r = energy_low(&[u], &DefiningFunctionJet::hemisphere_canonical(), &p, &geo);
    assert!(matches!(r, Err(Error::Divergent(_))), "{r:?}");
}

#[test]
fn random_fields_respect_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (g, n) in [(0.4, 3usize), (1.6, 5)] {
        let p = FracParams::new(g, n).unwrap();
        for (geo, dj) in models(n) {
            for _ in 0..6 {
                let k = rng.gen_range(0..=10);
                let f = rng.gen_range(-1.0..1.0);
                let psi = if p.is_high() { rng.gen_range(-1.0..1.0) } else { 0.0 };
                let u = random_admissible(&mut rng, k, f, psi, &p, &geo, 0.5).unwrap();
                let e = energy(&[u], &dj, &p, &geo).unwrap();
                assert!(e.gap >= -1e-8 * e.interior.abs().max(1.0), "{g} k={k}: {e:?}");
            }
        }
    }
}

#[test]
fn perturbation_raises_energy_by_its_own_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (g, n) in [(0.5, 3usize), (1.3, 5)] {
        let p = FracParams::new(g, n).unwrap();
        let order = if p.is_high() { 2 } else { 1 };
        let (geo, dj) = models(n)[1].clone();
        let psi: Vec<(usize, f64)> = if p.is_high() { vec![(2, 0.4)] } else { vec![] };
        let ext = build_extension(&[(2, 1.0)], &psi, &p, &geo).unwrap();
        let v = random_admissible(&mut rng, 2, 0.0, 0.0, &p, &geo, 0.3).unwrap();
        let u = vec![ext[0].add(&v)];
        let e0 = energy(&ext, &dj, &p, &geo).unwrap();
        let e1 = energy(&u, &dj, &p, &geo).unwrap();
        let ev = q_form(std::slice::from_ref(&v), std::slice::from_ref(&v), &p, &geo, order).unwrap();
        let cross = q_form(&ext, std::slice::from_ref(&v), &p, &geo, order).unwrap();
        assert!(ev > 0.0);
        assert!(cross.abs() < 1e-8 * ev, "{cross} {ev}");
        assert!((e1.gap - e0.gap - ev).abs() < 1e-8 * ev, "{} {ev}", e1.gap);
        // the interior operator is bounded below on fields with zero data
        assert!(ev >= spectral_floor(&p) * hyperbolic_l2(&[v], &p, &geo));
    }
}

#[test]
fn equality_exactly_for_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (g, n) in [(0.5, 3usize), (1.7, 7)] {
        let p = FracParams::new(g, n).unwrap();
        let (geo, dj) = models(n)[1].clone();
        let op = if p.is_high() { Op::L4 } else { Op::L2 };
        let psi: Vec<(usize, f64)> = if p.is_high() { vec![(1, -0.3)] } else { vec![] };
        let ext = build_extension(&[(1, 1.0)], &psi, &p, &geo).unwrap();
        let v = random_admissible(&mut rng, 1, 0.0, 0.0, &p, &geo, 0.3).unwrap();
        for t in [0.0, 0.05, 0.5, 1.0] {
            let u = ext[0].lin(1.0, &v, t);
            let e = energy(std::slice::from_ref(&u), &dj, &p, &geo).unwrap();
            let res = relative_residual(&u, &geo, &p, op, &RESIDUAL_TS);
            let equal = e.gap.abs() <= 1e-7 * e.rhs.abs().max(1.0);
            assert_eq!(equal, res <= 1e-7, "t={t}: gap {} residual {res}", e.gap);
            assert_eq!(equal, t == 0.0);
        }
    }
}

#[test]
fn q_form_polarization_and_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (g, n) in [(0.35, 4usize), (1.45, 5)] {
        let p = FracParams::new(g, n).unwrap();
        let order = if p.is_high() { 2 } else { 1 };
        let geo = ModelGeometry::hemisphere(n);
        let psi = if p.is_high() { 0.5 } else { 0.0 };
        let u = random_admissible(&mut rng, 3, 1.0, psi, &p, &geo, 0.5).unwrap();
        let v = random_admissible(&mut rng, 3, -0.3, -psi, &p, &geo, 0.5).unwrap();
        let q = |a: &ModeField, b: &ModeField| q_form(std::slice::from_ref(a), std::slice::from_ref(b), &p, &geo, order).unwrap();
        let quv = q(&u, &v);
        let pol = (energy_value(&[u.add(&v)], &p, &geo).unwrap() - energy_value(&[u.lin(1.0, &v, -1.0)], &p, &geo).unwrap()) / 4.0;
        let scale = q(&u, &u).abs() + q(&v, &v).abs();
        assert!((quv - pol).abs() < 1e-9 * scale, "{quv} {pol}");
        assert!((quv - q(&v, &u)).abs() < 1e-12 * scale);
        assert!((q(&u, &u) - energy_value(std::slice::from_ref(&u), &p, &geo).unwrap()).abs() < 1e-12 * scale);
    }
}

#[test]
fn q_form_is_conformally_invariant() {
    for (g, n) in [(0.6, 3usize), (1.3, 5)] {
        let p = FracParams::new(g, n).unwrap();
        let order = if p.is_high() { 2 } else { 1 };
        let geo = ModelGeometry::hemisphere(n);
        let sigma: SigmaFn = Arc::new(|pt| (&pt.c * &pt.c) * 0.3);
        let hat = conformal_rescale(&geo, sigma.clone(), &p).unwrap();
        let w = p.weight();
        let (u, v) = smooth_pair(&p, 2);
        let on_hat = q_form(std::slice::from_ref(&u), std::slice::from_ref(&v), &p, &hat, order).unwrap();
        let pulled = q_form(&[u.times_exp(&sigma, w)], &[v.times_exp(&sigma, w)], &p, &geo, order).unwrap();
        assert!((on_hat - pulled).abs() < 1e-6 * on_hat.abs().max(1.0), "{g}: {on_hat} {pulled}");
    }
}

fn smooth_pair(p: &FracParams, k: usize) -> (ModeField, ModeField) {
    let g = p.gamma;
    let b = p.beta();
    let u = poly(k, 0.0, 0).add(&poly(k, 0.0, 1).scale(0.4)).add(&poly(k, 2.0 * g, 0).scale(-0.3));
    let v = poly(k, 0.0, 0).scale(-0.7).add(&poly(k, 0.0, 2)).add(&poly(k, 2.0 * g, 1).scale(0.2));
    if p.is_high() {
        (u.add(&poly(k, b, 0).scale(0.5)), v.add(&poly(k, b, 1).scale(-0.4)))
    } else {
        (u, v)
    }
}

#[test]
fn boundary_pairing_is_symmetric() {
    for (g, n) in [(0.5, 3usize), (0.8, 4), (1.25, 5), (1.7, 6)] {
        let p = FracParams::new(g, n).unwrap();
        let geo = ModelGeometry::hemisphere(n);
        let (u, v) = smooth_pair(&p, 2);
        let s = self_adjointness(&u, &v, &p, &geo).unwrap();
        assert!(s.defect <= 1e-7, "{g}: {s:?}");
        assert!(s.ibp_defect <= 1e-7, "{g}: {s:?}");
    }
}

#[test]
fn energy_along_a_line_is_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (g, n) in [(0.5, 3usize), (1.5, 4)] {
        let p = FracParams::new(g, n).unwrap();
        let geo = ModelGeometry::hemisphere(n);
        let psi = if p.is_high() { 0.3 } else { 0.0 };
        let u = random_admissible(&mut rng, 1, 1.0, psi, &p, &geo, 0.3).unwrap();
        let v = random_admissible(&mut rng, 1, 0.0, 0.0, &p, &geo, 0.5).unwrap();
        let c = boundedness_demo(&[v], &[u], &p, &geo).unwrap();
        assert!(c.residual <= 1e-9, "{c:?}");
        assert!((c.values[5] - c.coeffs[2]).abs() <= 1e-12 * c.coeffs[2].abs());
        assert!(c.coeffs[0] > 0.0);
        // least-squares parabola through the samples
        let a = nalgebra::DMatrix::from_fn(11, 3, |i, j| c.ts[i].powi(2 - j as i32));
        let y = nalgebra::DVector::from_vec(c.values.clone());
        let fit = a.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        for j in 0..3 {
            assert!((fit[j] - c.coeffs[j]).abs() <= 1e-9 * c.values.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
        let e_at = |t: f64| c.coeffs[0] * t * t + c.coeffs[1] * t + c.coeffs[2];
        assert!(c.values.iter().all(|v| *v >= e_at(c.vertex) - 1e-12 * v.abs()));
    }
}

#[test]
fn minimizer_is_the_extension() {
    for (g, n, k, psi) in [(0.5, 3usize, 0usize, 0.0), (0.3, 4, 2, 0.0), (1.3, 5, 1, 0.6), (1.7, 7, 0, -0.5)] {
        let p = FracParams::new(g, n).unwrap();
        let geo = ModelGeometry::hemisphere(n);
        let ps: Vec<(usize, f64)> = if psi != 0.0 { vec![(k, psi)] } else { vec![] };
        let m = minimize_over_interior(&[(k, 1.0)], &ps, &p, &geo, 1e-6).unwrap();
        let ext = build_extension(&[(k, 1.0)], &ps, &p, &geo).unwrap();
        assert!(l2_distance(&m.fields, &ext, &p, &geo) <= 1e-6);
        let r = &m.reports[0];
        assert!(r.converged && r.direct_gap < 1e-6, "{r:?}");
        assert!(r.energies.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
        assert!(m.residual < 1e-3, "{}", m.residual);
        let e_ext = energy_value(&ext, &p, &geo).unwrap();
        assert!((r.energies.last().unwrap() - e_ext).abs() < 1e-8 * e_ext.abs());
    }
}

proptest::proptest! {
    #![proptest_config(proptest::test_runner::Config::with_cases(8))]
    #[test]
    fn bound_holds_for_random_data(g in 0.1f64..0.9, high in proptest::bool::ANY, seed in 0u64..1000, k in 0usize..6) {
        let g = if high { g + 1.05 } else { g };
        let n = if high { 5 } else { 3 };
        let p = FracParams::new(g.min(1.94), n).unwrap();
        let geo = ModelGeometry::hemisphere(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = if p.is_high() { rng.gen_range(-1.0..1.0) } else { 0.0 };
        let u = random_admissible(&mut rng, k, 1.0, psi, &p, &geo, 0.4).unwrap();
        let e = energy(&[u], &DefiningFunctionJet::hemisphere_canonical(), &p, &geo).unwrap();
        proptest::prop_assert!(e.gap >= -1e-8 * e.interior.abs().max(1.0), "{:?}", e);
    }
}
