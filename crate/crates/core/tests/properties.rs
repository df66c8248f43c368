use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix2;
use num_complex::Complex64;
use proptest::prelude::*;

use qprotect::closed_form::{
    fidelity_at_optimal_gamma, optimal_gamma, reduced_fidelity, ClosedFormInput,
};
use qprotect::oracle::{conditional_maps, exhaustive_argmax, superoperator_protect, FreeParam};
use qprotect::qubit::{
    bloch, ket_plane, outer, wrap_angle, Complex, DensityMatrix, Operator, PureState,
};
use qprotect::scheme::{
    protect, run_paths, trace_evolution, ControlParams, Ensemble, KrausIndex, NoiseStrength,
    OperatorSet, Sign,
};
use qprotect::search::{
    definite_optimum, discrimination_probability, helstrom_angle, pareto, BaselineKind, BasisPin,
    Family, FeedbackPin, GridSpec, Objective, SearchOptions,
};

fn nr(r: f64) -> NoiseStrength {
    NoiseStrength::new(r).unwrap()
}

fn complex() -> impl Strategy<Value = Complex> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| Complex::new(a, b))
}

fn operator() -> impl Strategy<Value = Operator> {
    (complex(), complex(), complex(), complex()).prop_map(|(a, b, c, d)| Operator {
        m00: a,
        m01: b,
        m10: c,
        m11: d,
    })
}

fn state() -> impl Strategy<Value = PureState> {
    (complex(), complex())
        .prop_filter("nonzero", |(a, b)| a.norm() + b.norm() > 1e-3)
        .prop_map(|(a, b)| PureState::new(a, b).normalized().unwrap())
}

fn ensemble() -> impl Strategy<Value = Ensemble> {
    (0.0..=PI, -PI..PI, 0.0..=1.0f64).prop_map(|(t, f, s)| Ensemble::new(t, f, s).unwrap())
}

fn controls() -> impl Strategy<Value = ControlParams> {
    (
        -PI..PI,
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.0..=1.0f64,
        -PI..PI,
        -PI..PI,
    )
        .prop_map(|(alpha, p, p1, p2, gamma_plus, gamma_minus)| ControlParams {
            alpha,
            p,
            p1,
            p2,
            gamma_plus,
            gamma_minus,
        })
}

fn noise() -> impl Strategy<Value = NoiseStrength> {
    (0.0..=1.0f64).prop_map(nr)
}

fn gap(a: &qprotect::scheme::ProtectionResult, b: &qprotect::scheme::ProtectionResult) -> f64 {
    [
        (a.fidelity, b.fidelity),
        (a.success, b.success),
        (a.f_plus, b.f_plus),
        (a.f_minus, b.f_minus),
        (a.g_plus, b.g_plus),
        (a.g_minus, b.g_minus),
    ]
    .iter()
    .map(|(x, y)| (x - y).abs())
    .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn trace_is_cyclic(a in operator(), b in operator()) {
        let d = (a.compose(&b).trace() - b.compose(&a).trace()).norm();
        prop_assert!(d < 1e-12);
    }

    #[test]
    fn outer_is_hermitian_psd(s in state()) {
        let rho = outer(&s);
        prop_assert!(rho.hermiticity_defect() < 1e-15);
        let (l0, l1) = rho.eigenvalues();
        prop_assert!(l0.min(l1) > -1e-12);
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bloch_round_trip(s in state(), mix in 0.0..=1.0f64) {
        let rho = outer(&s).scale(mix) + DensityMatrix::maximally_mixed().scale(1.0 - mix);
        let back = DensityMatrix::from_bloch(&bloch(&rho));
        prop_assert!(back.max_abs_diff(&rho) < 1e-12);
    }

    #[test]
    fn ket_plane_is_pure(t in -PI..PI, phi in -PI..PI) {
        let b = bloch(&outer(&ket_plane(t, phi)));
        prop_assert!((b.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_covariance(
        e in ensemble(), c in controls(), r in noise(), shift in -PI..PI
    ) {
        let shifted = Ensemble::new(e.theta, wrap_angle(e.phi + shift), e.s_plus).unwrap();
        if let (Ok(a), Ok(b)) = (protect(&e, &c, r), protect(&shifted, &c, r)) {
            prop_assert!(gap(&a, &b) < 1e-12);
        }
    }

    #[test]
    fn trace_matches_path_sum(e in ensemble(), c in controls(), r in noise()) {
        let ops = OperatorSet::build(e.phi, &c, r);
        for which in Sign::BOTH {
            let paths = run_paths(&e.state(which), &ops);
            for (k, o) in Sign::BOTH.into_iter().enumerate() {
                let ev = trace_evolution(which, o, &e, &c, r);
                for j in 0..2 {
                    prop_assert!(ev.final_states[j].max_abs_diff(&paths[2 * k + j].final_state) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mixed_state_equivalence(e in ensemble(), c in controls(), r in noise()) {
        let Ok(res) = protect(&e, &c, r) else { return Ok(()) };
        let m = e.mixed_state();
        let rho = Matrix2::new(
            Complex64::new(m.m00.re, m.m00.im),
            Complex64::new(m.m01.re, m.m01.im),
            Complex64::new(m.m10.re, m.m10.im),
            Complex64::new(m.m11.re, m.m11.im),
        );
        let maps = conditional_maps(e.phi, &c, r);
        let out = maps[0].apply(&rho) + maps[1].apply(&rho);
        let expect = res.rho_out_plus.scale(e.s_plus * res.g_plus)
            + res.rho_out_minus.scale(e.s_minus() * res.g_minus);
        let got = [out[(0, 0)], out[(0, 1)], out[(1, 0)], out[(1, 1)]];
        let want = [expect.m00, expect.m01, expect.m10, expect.m11];
        for (g, w) in got.iter().zip(want) {
            prop_assert!((Complex::new(g.re, g.im) - w).norm() < 1e-12);
        }
    }

    /// Swapping the priors is undone by α → −α − π and γ± → −γ± when φ = 0.
    #[test]
    fn prior_swap_symmetry(t in 0.0..=PI, s in 0.0..=1.0f64, c in controls(), r in noise()) {
        let e = Ensemble::new(t, 0.0, s).unwrap();
        let swapped = Ensemble::new(t, 0.0, 1.0 - s).unwrap();
        let c2 = ControlParams {
            alpha: wrap_angle(-c.alpha - PI),
            gamma_plus: wrap_angle(-c.gamma_plus),
            gamma_minus: wrap_angle(-c.gamma_minus),
            ..c
        };
        if let (Ok(a), Ok(b)) = (protect(&e, &c, r), protect(&swapped, &c2, r)) {
            prop_assert!((a.fidelity - b.fidelity).abs() < 1e-12);
            prop_assert!((a.success - b.success).abs() < 1e-12);
        }
    }

    /// A projective logical-basis measurement parks each branch on a fixed
    /// output independent of the noise.
    #[test]
    fn projective_feedforward_is_noise_free(t in 0.0..=PI, s in 0.0..=1.0f64, r in noise()) {
        let e = Ensemble::new(t, 0.0, s).unwrap();
        let c = ControlParams { alpha: 0.0, p: 1.0, ..ControlParams::identity() };
        let res = protect(&e, &c, r).unwrap();
        let v0 = PureState::ket0();
        let v1 = PureState::ket1();
        let expect: f64 = Sign::BOTH
            .into_iter()
            .map(|k| {
                let psi = e.state(k);
                e.prior(k) * (psi.inner(&v0).norm_sqr().powi(2) + psi.inner(&v1).norm_sqr().powi(2))
            })
            .sum();
        prop_assert!((res.fidelity - expect).abs() < 1e-12);
        prop_assert!((res.success - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_optimum_is_consistent(r in 0.0..=1.0f64, a in -PI..PI, p in 0.0..=1.0f64) {
        let g = optimal_gamma(nr(r), a, p);
        let f = reduced_fidelity(&ClosedFormInput { r: nr(r), alpha_cf: a, p, gamma: g });
        prop_assert!((f - fidelity_at_optimal_gamma(nr(r), a, p)).abs() < 1e-12);
        for k in 0..64 {
            let other = -PI + k as f64 * PI / 32.0;
            let h = reduced_fidelity(&ClosedFormInput { r: nr(r), alpha_cf: a, p, gamma: other });
            prop_assert!(h <= f + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn oracle_equivalence(e in ensemble(), c in controls(), r in noise()) {
        match (protect(&e, &c, r), superoperator_protect(&e, &c, r)) {
            (Ok(a), Ok(b)) => {
                for (x, y) in [
                    (a.f_plus, b.f_plus), (a.f_minus, b.f_minus),
                    (a.g_plus, b.g_plus), (a.g_minus, b.g_minus),
                    (a.fidelity, b.fidelity), (a.success, b.success),
                ] {
                    prop_assert!((x - y).abs() < 1e-12);
                }
                prop_assert!(a.rho_out_plus.max_abs_diff(&b.rho_out_plus) < 1e-12);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "one route degenerate: {:?} {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn maps_are_completely_positive(e in ensemble(), c in controls(), r in noise()) {
        for m in conditional_maps(e.phi, &c, r) {
            prop_assert!(m.choi_min_eigenvalue() > -1e-12);
            prop_assert!(m.trace_excess() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn completeness_and_unitarity(phi in -PI..PI, c in controls(), r in noise()) {
        let ops = OperatorSet::build(phi, &c, r);
        prop_assert!(ops.completeness_defect() < 1e-12);
        prop_assert!(ops.unitarity_defect() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn path_weights_sum_to_success(e in ensemble(), c in controls(), r in noise()) {
        let ops = OperatorSet::build(e.phi, &c, r);
        for which in Sign::BOTH {
            let paths = run_paths(&e.state(which), &ops);
            let w: f64 = paths.iter().map(|p| p.weight).sum();
            let direct: f64 = Sign::BOTH
                .into_iter()
                .flat_map(|i| [KrausIndex::One, KrausIndex::Two].map(move |j| (i, j)))
                .map(|(i, j)| ops.path_operator(i, j).apply(&e.state(which)).norm_sqr())
                .sum();
            prop_assert!((w - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn helstrom_angle_beats_a_fine_grid() {
    for (t, phi, s) in [(0.4, 0.0, 0.3), (1.1, 0.7, 0.5), (2.0, -1.2, 0.8), (PI / 6.0, 0.0, 1.0 / 3.0)] {
        let e = Ensemble::new(t, phi, s).unwrap();
        let h = helstrom_angle(&e);
        assert!(!h.degenerate);
        let at_h = discrimination_probability(&e, h.alpha);
        let n = (2.0 * PI / 1e-6) as usize;
        let grid_best = (0..n)
            .map(|k| discrimination_probability(&e, -PI + k as f64 * 1e-6))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(at_h >= grid_best - 1e-12, "{at_h} < {grid_best}");
        assert!((at_h - qprotect::oracle::helstrom_success(&e)).abs() < 1e-12);
    }
}

#[test]
fn helstrom_angle_example() {
    let e = Ensemble::new(PI / 6.0, 0.0, 1.0 / 3.0).unwrap();
    assert!((helstrom_angle(&e).alpha - std::f64::consts::FRAC_PI_6).abs() < 1e-9);
}

#[test]
fn degenerate_ensemble_falls_back_to_logical_basis() {
    let e = Ensemble::new(0.0, 0.0, 0.5).unwrap();
    let h = helstrom_angle(&e);
    assert!(h.degenerate);
    assert_eq!(h.alpha, 0.0);
}

#[test]
fn nested_families_are_dominated() {
    let e = Ensemble::new(PI / 5.0, 0.0, 0.4).unwrap();
    let r = nr(0.7);
    let grid = GridSpec::definite();
    let opts = SearchOptions::default();
    let full = definite_optimum(&e, r, &BaselineKind::Gqcc.family(), &grid, &opts).unwrap();
    for basis in [BasisPin::Fixed(0.0), BasisPin::Helstrom, BasisPin::Fixed(1.0)] {
        for fb in FeedbackPin::ALL {
            let o = definite_optimum(&e, r, &Family::new(basis, fb), &grid, &opts).unwrap();
            assert!(o.fidelity <= full.fidelity + 1e-9, "{basis:?} {fb:?}");
            assert!((o.success - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn definite_optimum_reevaluates_exactly() {
    let e = Ensemble::new(1.0, 0.3, 0.6).unwrap();
    let r = nr(0.5);
    for b in BaselineKind::ALL {
        let o = definite_optimum(&e, r, &b.family(), &GridSpec::definite(), &SearchOptions::default())
            .unwrap();
        let res = o.reevaluate(&e, r).unwrap();
        assert!((res.fidelity - o.fidelity).abs() < 1e-12);
        assert_eq!(o.objective, Objective::MaxFidelity);
    }
}

#[test]
fn frontier_points_reevaluate_exactly() {
    let e = Ensemble::new(PI / 3.0, 0.0, 1.0 / 3.0).unwrap();
    let r = nr(0.9);
    let grid = GridSpec {
        alpha: qprotect::search::Axis::turn(24),
        p: qprotect::search::Axis::new(0.0, 1.0, 0.1),
        p1: qprotect::search::Axis::new(0.0, 1.0, 0.1),
        p2: qprotect::search::Axis::new(0.0, 1.0, 0.1),
        ..GridSpec::default()
    };
    let fam = BaselineKind::Gqcc.family();
    let fr = pareto(&e, r, 20, &grid, &fam, &SearchOptions::default()).unwrap();
    assert!(!fr.points.is_empty());
    let mut last = f64::INFINITY;
    for pt in &fr.points {
        let res = fam.evaluate(&e, &pt.params, r).unwrap().1;
        assert!((res.fidelity - pt.fidelity).abs() < 1e-12);
        assert!((res.success - pt.success).abs() < 1e-12);
        let (lo, hi) = fr.bin_edges(pt.bin);
        assert!(pt.success >= lo - 1e-12 && pt.success <= hi + 1e-12);
        // fidelity falls as success rises along the envelope
        assert!(pt.fidelity < last);
        last = pt.fidelity;
    }
}

#[test]
fn exhaustive_argmax_equal_priors_logical_basis() {
    // equal priors in the logical basis: the best single feedback angle is 0
    let e = Ensemble::new(PI / 3.0, 0.0, 0.5).unwrap();
    let pinned = ControlParams {
        alpha: 0.0,
        p: 0.9,
        ..ControlParams::identity()
    };
    let g = exhaustive_argmax(&e, nr(0.6), &pinned, &[FreeParam::Gamma], 1e-3).unwrap();
    assert!(g.params.gamma_plus.abs() < 1e-3, "{:?}", g.params);
    assert!((g.success - 1.0).abs() < 1e-12);
}

#[test]
fn identity_limit() {
    for (t, phi, s) in [(0.3, 0.0, 0.5), (2.5, 1.0, 0.1), (FRAC_PI_2, -2.0, 0.9)] {
        let e = Ensemble::new(t, phi, s).unwrap();
        let res = protect(&e, &ControlParams::identity(), nr(0.0)).unwrap();
        assert!((res.fidelity - 1.0).abs() < 1e-12);
        assert!((res.success - 1.0).abs() < 1e-12);
    }
}
