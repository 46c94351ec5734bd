use std::sync::OnceLock;

use nalgebra::DVector;
use proptest::prelude::*;

use nonlocal_core::analysis::{lorentz_norm, rearrange, Check, DistributionProfile, LorentzWeight, Verifier};
use nonlocal_core::config::RunConfig;
use nonlocal_core::domain::{default_r_ext, Domain, GridFunction, Shape};
use nonlocal_core::forms::{offset_weight, FormKind, FormMatrix};
use nonlocal_core::kernels::{EllSpec, EllVariant, KernelSpec, Tail};
use nonlocal_core::linalg::conjugate_gradient;
use nonlocal_core::output::{grid_function_csv, read_grid_function};
use nonlocal_core::Error;

fn setup() -> &'static (Domain, FormMatrix) {
    static CELL: OnceLock<(Domain, FormMatrix)> = OnceLock::new();
    CELL.get_or_init(|| {
        let k = KernelSpec::new(
            1,
            EllSpec::new(EllVariant::LogPow(1.0), 0.5).unwrap(),
            Tail::PowerDecay { alpha2: 0.5 },
        )
        .unwrap();
        let h = 1.0 / 16.0;
        let d = Domain::build(Shape::Interval { a: -1.0, b: 1.0 }, h, default_r_ext(0.5, h, 1)).unwrap();
        let f = FormMatrix::assemble(&d, &k).unwrap();
        (d, f)
    })
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn interior_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 32)
}

fn grid(values: Vec<f64>) -> GridFunction {
    let (d, _) = setup();
    GridFunction::from_interior(d, values).unwrap()
}

fn nonzero(v: &[f64]) -> bool {
    v.iter().any(|x| x.abs() > 1e-3)
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn energy_is_symmetric_and_nonnegative(a in interior_values(), b in interior_values()) {
        let (_, f) = setup();
        let (u, v) = (grid(a), grid(b));
        for kind in [FormKind::Full, FormKind::Censored, FormKind::Global] {
            let uv = f.energy(&u, &v, kind).unwrap();
            let vu = f.energy(&v, &u, kind).unwrap();
            prop_assert!((uv - vu).abs() <= 1e-12 * (1.0 + uv.abs()));
            prop_assert!(f.energy(&u, &u, kind).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn energy_is_bilinear(a in interior_values(), b in interior_values(), s in -3.0f64..3.0) {
        let (_, f) = setup();
        let (u, v) = (grid(a.clone()), grid(b));
        let su = grid(a.iter().map(|x| s * x).collect());
        let lhs = f.energy(&su, &v, FormKind::Full).unwrap();
        let rhs = s * f.energy(&u, &v, FormKind::Full).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn zero_exterior_inequalities_hold(a in interior_values(), p in 1.2f64..4.0) {
        prop_assume!(nonzero(&a));
        let (_, f) = setup();
        let u = grid(a);
        for check in [Check::AbsoluteValue, Check::Poincare, Check::PiconeRemainder] {
            let r = Verifier::new(f, check).unwrap().evaluate(&u).unwrap();
            prop_assert!(r.pass, "{} ratio {}", check.name(), r.ratio);
        }
        let sv = Verifier::new(f, Check::StroockVaropoulos).unwrap().with_exponent(p).evaluate(&u).unwrap();
        prop_assert!(sv.pass, "stroock_varopoulos at p = {p}: ratio {}", sv.ratio);
    }

    #[test]
    fn rearrangement_is_equimeasurable(a in interior_values()) {
        let (d, _) = setup();
        let u = grid(a);
        let r = rearrange(d, &u).unwrap();
        let vol = d.cell_volume();
        let back = DistributionProfile::of(&r.values, vol);
        prop_assert_eq!(&back, &r.profile);
        for q in [1.0, 2.0, 3.5] {
            let (x, y) = (u.lp_norm(d, q), r.values.lp_norm(&r.ball.domain, q));
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x));
        }
    }

    #[test]
    fn linear_lorentz_weight_is_lp(a in interior_values(), p in 1.0f64..5.0) {
        let (d, _) = setup();
        let u = grid(a);
        let l = lorentz_norm(&u, d.cell_volume(), &LorentzWeight::Linear(1.0), p).unwrap();
        let lp = u.lp_norm(d, p);
        prop_assert!((l - lp).abs() <= 1e-10 * (1.0 + lp), "{l} vs {lp}");
    }

    #[test]
    fn cg_matches_cholesky(b in interior_values()) {
        prop_assume!(nonzero(&b));
        let (_, f) = setup();
        let a = f.stiffness();
        let cg = conjugate_gradient(&a, &b, 1e-12, 10_000, None).unwrap();
        let exact = a.clone().cholesky().unwrap().solve(&DVector::from_vec(b));
        let scale = exact.amax();
        for (x, y) in cg.x.iter().zip(exact.iter()) {
            prop_assert!((x - y).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact(a in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 32)) {
        let (d, _) = setup();
        let u = grid(a);
        let back = read_grid_function(d, &grid_function_csv(d, &u, true).unwrap()).unwrap();
        for (x, y) in u.interior.iter().zip(&back.interior) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn offset_weights_respect_lattice_symmetry(i in 1i64..6, j in 0i64..6) {
        let k = KernelSpec::new(2, EllSpec::constant(0.6), Tail::PowerDecay { alpha2: 0.5 }).unwrap();
        let h = 0.2;
        let w = offset_weight(&k, h, [i, j]).unwrap();
        prop_assert!(w > 0.0);
        for d in [[-i, j], [i, -j], [-i, -j], [j, i], [-j, i]] {
            let v = offset_weight(&k, h, d).unwrap();
            prop_assert!((v - w).abs() <= 1e-9 * w, "{d:?}: {v} vs {w}");
        }
    }

    #[test]
    fn unknown_config_keys_report_their_line(pad in 0usize..6, key in "[a-z]{3,8}") {
        let mut text = String::from("[kernel]\ndimension = 1\nrho = 0.5\n");
        for _ in 0..pad {
            text.push_str("# filler\n");
        }
        text.push_str(&format!("zz_{key} = 1\n"));
        let line = 4 + pad;
        match RunConfig::parse(&text) {
            Err(Error::Config { line: l, .. }) => prop_assert_eq!(l, line),
            other => prop_assert!(false, "expected a config error, got {other:?}"),
        }
    }
}
