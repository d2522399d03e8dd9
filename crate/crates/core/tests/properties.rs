use std::f64::consts::PI;
use std::sync::Arc;

use hvlab_core::grid::{
    boundary_integral, lp_norm_volume, read_snapshot, snapshot_string, volume_integral, weighted_dirichlet_energy,
};
use hvlab_core::inequalities::{hardy_p_check, ladder_supnorm_diagnostic, trace_l2_check, trace_lq_chain_check};
use hvlab_core::minimizers::{minimize, rayleigh_quotient, Constraint, MinimizeConfig};
use hvlab_core::pohozaev::{criticality_coefficients_exact, pohozaev_eval};
use hvlab_core::rearrangement::{equimeasurability_check, schwarz_rearrange};
use hvlab_core::solver::{mountain_pass_ring, preset, ProblemParams, VariationalProblem};
use hvlab_core::suite::suite_member;
use hvlab_core::{critical_exponents, hardy_constant, make_grid, AxisymGrid, Field, Weight};
use num_rational::Ratio;
use proptest::prelude::*;

fn grid32() -> Arc<AxisymGrid> {
    make_grid(3, 10.0, 10.0, 32, 32).unwrap()
}

/// `|S^{k-1}|` for the few `k` used below, written out by hand.
fn sphere(k: usize) -> f64 {
    match k {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        5 => 8.0 * PI * PI / 3.0,
        _ => unreachable!(),
    }
}

#[test]
fn exponent_arithmetic_is_exact() {
    for n in 3..=200usize {
        let (ts, tl) = hvlab_core::constants::critical_exponents_exact(n).unwrap();
        assert!(tl < ts);
        assert_eq!(ts * Ratio::from_integer(n as i64 - 2), Ratio::from_integer(2 * n as i64));
        let ex = critical_exponents(n).unwrap();
        assert!(ex.two_lower < ex.two_star);
    }
}

#[test]
fn criticality_coefficients_vanish_exactly() {
    for n in 3..=10usize {
        let ni = n as i64;
        let ps = Ratio::new(2 * ni, ni - 2);
        let ql = Ratio::new(2 * (ni - 1), ni - 2);
        let (a, b) = criticality_coefficients_exact(n, ps, ql).unwrap();
        assert_eq!(a, Ratio::from_integer(0), "N = {n}");
        assert_eq!(b, Ratio::from_integer(0), "N = {n}");
    }
}

#[test]
fn hardy_constant_vanishes_at_the_threshold() {
    for p in [1.5, 2.0, 3.0] {
        let c = hardy_constant(p, p - 1.0 + 1e-12).unwrap();
        assert!((0.0..1e-11).contains(&c));
        assert!(hardy_constant(p, p - 1.0).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hardy_constant_increases_in_gamma(p in 1.05f64..5.0, d1 in 0.01f64..5.0, d2 in 0.01f64..5.0) {
        let g1 = p - 1.0 + d1;
        let g2 = g1 + d2;
        prop_assert!(hardy_constant(p, g2).unwrap() > hardy_constant(p, g1).unwrap());
    }

    #[test]
    fn power_weights_are_ordered(g1 in 0.0f64..6.0, dg in 0.0f64..3.0, s in 0.0f64..100.0) {
        let lo = Weight::power(g1).value(s);
        let hi = Weight::power(g1 + dg).value(s);
        prop_assert!(lo <= hi);
        prop_assert!((lo - (1.0 + s).powf(g1)).abs() <= 1e-12 * lo);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bilinear_quadrature_is_exact(
        dim in 3usize..=6,
        r_max in 0.5f64..5.0,
        z_max in 0.5f64..5.0,
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0,
    ) {
        let g = make_grid(dim, r_max, z_max, 9, 8).unwrap();
        let f = Field::from_fn(&g, |r, z| (a + b * r) * (c + d * z));
        let k = (dim - 2) as i32;
        let radial = a * r_max.powi(k + 1) / (k + 1) as f64 + b * r_max.powi(k + 2) / (k + 2) as f64;
        let vertical = c * z_max + d * z_max * z_max / 2.0;
        let exact = sphere(dim - 1) * radial * vertical;
        let scale = sphere(dim - 1) * r_max.powi(k + 1) * (1.0 + r_max) * z_max * (1.0 + z_max) * 4.0;
        prop_assert!((volume_integral(&f).unwrap() - exact).abs() <= 1e-12 * scale);
        let trace = sphere(dim - 1) * c * radial;
        prop_assert!((boundary_integral(&f).unwrap() - trace).abs() <= 1e-12 * scale);
    }

    #[test]
    fn lp_norm_is_homogeneous(seed in 0u64..1000, c in -50.0f64..50.0, p in 1.0f64..8.0) {
        let g = grid32();
        let u = suite_member(&g, seed, 0).unwrap();
        let lhs = lp_norm_volume(&u.scaled(c), p).unwrap();
        let rhs = c.abs() * lp_norm_volume(&u, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn weight_above_one_raises_energy(seed in 0u64..1000, gamma in 0.0f64..6.0) {
        let g = grid32();
        let u = suite_member(&g, seed, 3).unwrap();
        let plain = weighted_dirichlet_energy(&u, &Weight::unit()).unwrap();
        let weighted = weighted_dirichlet_energy(&u, &Weight::power(gamma)).unwrap();
        prop_assert!(weighted >= plain * (1.0 - 1e-14));
    }

    #[test]
    fn hardy_holds_on_random_bumps(seed in 0u64..10_000, p in prop::sample::select(vec![1.5, 2.0, 3.0]), excess in 0.1f64..4.0) {
        let g = grid32();
        let u = suite_member(&g, seed, 0).unwrap();
        let rep = hardy_p_check(&u, &Weight::power(p - 1.0 + excess), p).unwrap();
        prop_assert!(rep.holds_within(1e-8), "slack {}", rep.relative_slack);
    }

    #[test]
    fn trace_l2_holds_on_random_bumps(seed in 0u64..10_000, gamma in prop::sample::select(vec![1.5, 2.0, 3.0, 5.0])) {
        let g = grid32();
        let u = suite_member(&g, seed, 1).unwrap();
        let rep = trace_l2_check(&u, gamma).unwrap();
        prop_assert!(rep.holds_within(1e-8), "slack {}", rep.relative_slack);
    }

    #[test]
    fn weight_link_has_no_rounding_slack(seed in 0u64..10_000, gamma in 0.0f64..4.0) {
        let g = grid32();
        let u = suite_member(&g, seed, 2).unwrap();
        let chain = trace_lq_chain_check(&u, gamma, 4.0, 1.0).unwrap();
        prop_assert!(chain.weight_link.holds_within(1e-12));
    }

    #[test]
    fn ladder_is_nondecreasing_in_probability_measure(seed in 0u64..1000) {
        let g = grid32();
        let u = suite_member(&g, seed, 0).unwrap();
        let entries = ladder_supnorm_diagnostic(&u, 2.0, 6, true).unwrap();
        for w in entries.windows(2) {
            prop_assert!(w[1].norm >= w[0].norm * (1.0 - 1e-12));
        }
        prop_assert!(entries.last().unwrap().norm <= u.max_abs() * (1.0 + 1e-12));
    }

    #[test]
    fn rearrangement_is_idempotent_and_equimeasurable(seed in 0u64..10_000) {
        let g = grid32();
        let u = suite_member(&g, seed, 0).unwrap();
        let once = schwarz_rearrange(&u).unwrap();
        let twice = schwarz_rearrange(&once.field).unwrap();
        prop_assert_eq!(&twice.field, &once.field);
        prop_assert!(once.monotone.iter().all(|m| *m));
        for s in [1.0, 2.0, 4.0] {
            let rep = equimeasurability_check(&u, &once.field, s).unwrap();
            prop_assert!(rep.within_tolerance, "s = {s}: {}", rep.max_slice_relative_error);
        }
    }

    #[test]
    fn rearrangement_preserves_order(seed in 0u64..10_000) {
        let g = grid32();
        let u = suite_member(&g, seed, 0).unwrap();
        let extra = suite_member(&g, seed, 1).unwrap().map(f64::abs);
        let v = u.map(f64::abs).add(&extra);
        let us = schwarz_rearrange(&u.map(f64::abs)).unwrap().field;
        let vs = schwarz_rearrange(&v).unwrap().field;
        for (a, b) in us.values().iter().zip(vs.values()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn quotient_is_scale_invariant(seed in 0u64..1000, c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let g = grid32();
        let u = suite_member(&g, seed, 0).unwrap();
        for (constraint, exponent) in [(Constraint::BoundaryLq, 3.0), (Constraint::VolumeLp, 4.0)] {
            let cfg = MinimizeConfig::new(constraint, exponent, Weight::power(2.0));
            let q1 = rayleigh_quotient(&u, &cfg).unwrap();
            let q2 = rayleigh_quotient(&u.scaled(c), &cfg).unwrap();
            prop_assert!((q1 - q2).abs() <= 1e-12 * q1);
        }
    }

    #[test]
    fn pohozaev_report_is_consistent(seed in 0u64..10_000, gamma in 0.25f64..4.0) {
        let g = grid32();
        let u = suite_member(&g, seed, 0).unwrap();
        let params = ProblemParams::new(1.0, 1.0, 4.0, 3.0);
        let rep = pohozaev_eval(&u, &params, &Weight::power(gamma)).unwrap();
        prop_assert_eq!(rep.residual, rep.recomputed_residual());
        prop_assert!(rep.lhs_weight > 0.0);
        let flat = pohozaev_eval(&u, &params, &Weight::unit()).unwrap();
        prop_assert_eq!(flat.lhs_weight, 0.0);
    }

    #[test]
    fn snapshot_round_trips(seed in 0u64..10_000) {
        let g = make_grid(4, 3.0, 2.0, 12, 9).unwrap();
        let u = suite_member(&g, seed, 0).unwrap().scaled(1.0 / 3.0);
        let back = read_snapshot(snapshot_string(&u).as_bytes()).unwrap();
        prop_assert_eq!(back, u);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gradient_matches_central_differences(seed in 0u64..10_000, name in prop::sample::select(vec!["thm16", "thm17", "thm18"])) {
        let g = grid32();
        let pr = preset(name).unwrap();
        let problem = VariationalProblem::new(&g, pr.params, &pr.weight()).unwrap();
        let u = suite_member(&g, seed, 0).unwrap().map(f64::abs);
        let v = suite_member(&g, seed, 1).unwrap();
        let t = 1e-4;
        let ip = problem.energy(&u.axpy(t, &v)).unwrap().total;
        let im = problem.energy(&u.axpy(-t, &v)).unwrap().total;
        let fd = (ip - im) / (2.0 * t);
        let (grad, _) = problem.gradient(&u).unwrap();
        let exact = problem.discretization().inner(grad.values(), v.values());
        prop_assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1e-8), "fd {fd}, exact {exact}");
    }

    #[test]
    fn energy_is_positive_on_the_ring(seed in 0u64..10_000, name in prop::sample::select(vec!["thm16", "thm17", "thm17i", "thm18"])) {
        let g = grid32();
        let pr = preset(name).unwrap();
        let ring = mountain_pass_ring(&pr.params, pr.gamma, 3).unwrap();
        let problem = VariationalProblem::new(&g, pr.params, &pr.weight()).unwrap();
        for k in 0..50 {
            let u = suite_member(&g, seed, k).unwrap();
            let norm = problem.discretization().energy(u.values()).sqrt();
            let e = problem.energy(&u.scaled(ring.r0 / norm)).unwrap().total;
            prop_assert!(e > 0.0, "field {k}: I = {e}");
        }
    }
}

#[test]
fn minimizer_history_never_increases() {
    let g = make_grid(3, 8.0, 8.0, 24, 24).unwrap();
    for (constraint, exponent) in [(Constraint::BoundaryLq, 3.0), (Constraint::VolumeLp, 4.0)] {
        let mut cfg = MinimizeConfig::new(constraint, exponent, Weight::power(3.0));
        cfg.max_iters = 200;
        cfg.multistart = 2;
        let res = hvlab_core::minimizers::best_effort(minimize(&g, &cfg)).unwrap();
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]), "{constraint:?}");
    }
}

#[test]
fn weighted_minimum_dominates_unweighted() {
    let g = make_grid(3, 8.0, 8.0, 24, 24).unwrap();
    let run = |w: Weight| {
        let mut cfg = MinimizeConfig::new(Constraint::BoundaryLq, 3.0, w);
        cfg.max_iters = 400;
        hvlab_core::minimizers::best_effort(minimize(&g, &cfg)).unwrap().best_value
    };
    assert!(run(Weight::power(2.0)) >= run(Weight::unit()));
}

#[test]
fn parallel_reductions_are_reproducible() {
    let g = make_grid(3, 10.0, 10.0, 96, 96).unwrap();
    let u = suite_member(&g, 11, 4).unwrap();
    let w = Weight::power(2.5);
    let first = (volume_integral(&u).unwrap(), weighted_dirichlet_energy(&u, &w).unwrap());
    for _ in 0..5 {
        let again = (volume_integral(&u).unwrap(), weighted_dirichlet_energy(&u, &w).unwrap());
        assert_eq!(first.0.to_bits(), again.0.to_bits());
        assert_eq!(first.1.to_bits(), again.1.to_bits());
    }
}
