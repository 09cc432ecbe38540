use std::f64::consts::{FRAC_PI_2, PI};

use lie_core::geometry::{sample_arc_on, ArcParams, Vec3};
use lie_core::harness::experiments::{exact_arc_solution, simulate_arc};
use lie_core::invariants::Channel;
use lie_core::perturbations::{
    check_assumptions, looped_arc, looped_radius, smooth_random, symmetric_random, symmetrize, PerturbationSpec,
};
use lie_core::solver::SolverConfig;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn symmetrize_is_idempotent(seed in 0u64..10_000, theta in 0.3f64..6.0, r in 0.5f64..2.0) {
        let p = ArcParams::new(r, theta).unwrap();
        let grid = p.grid(129).unwrap();
        let phi = smooth_random(seed, 1e-2, 0.1, &p, &grid)
            .or_else(|_| symmetric_random(seed, 1e-2, 0.1, &p, &grid))
            .unwrap();
        let once = symmetrize(&phi, &p).unwrap();
        let twice = symmetrize(&once, &p).unwrap();
        prop_assert!(twice.max_abs_diff(&once) <= 1e-15 * (1.0 + r));
    }

    #[test]
    fn random_corpus_is_admissible(seed in 0u64..10_000, theta in 0.3f64..3.0) {
        let p = ArcParams::new(1.0, theta).unwrap();
        let grid = p.grid(513).unwrap();
        let phi = smooth_random(seed, 1e-2, 0.1, &p, &grid).unwrap();
        let report = check_assumptions(&phi, &p).unwrap();
        prop_assert!(report.max_residual() <= 1e-8, "{report:?}");
    }

    #[test]
    fn symmetric_corpus_is_admissible_beyond_pi(seed in 0u64..10_000, theta in 0.3f64..6.2) {
        let p = ArcParams::new(1.0, theta).unwrap();
        let grid = p.grid(513).unwrap();
        let phi = symmetric_random(seed, 1e-2, 0.1, &p, &grid).unwrap();
        let report = check_assumptions(&phi, &p).unwrap();
        prop_assert!(report.max_residual() <= 1e-8, "{report:?}");
    }

    #[test]
    fn looped_arcs_keep_the_boundary_tangents(n in 1u32..6, theta in 0.3f64..3.0, r in 0.5f64..2.0) {
        let p = ArcParams::new(r, theta).unwrap();
        let grid = p.grid(257).unwrap();
        let phi = looped_arc(n, &p, &grid).unwrap();
        // The perturbed curve is the arc of radius Rₙ, so its tangent is known in closed form.
        let rn = looped_radius(n, &p);
        let x = sample_arc_on(r, 0.0, &grid).unwrap().perturbed(&phi).unwrap();
        let looped = sample_arc_on(rn, 0.0, &grid).unwrap();
        let gap = x.points.iter().zip(&looped.points).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-12 * r, "{gap:e}");
        let turn = p.length() / rn;
        prop_assert!((turn - theta - 2.0 * PI * n as f64).abs() <= 1e-12 * turn);
        let end = Vec3::new(-turn.sin(), turn.cos(), 0.0);
        prop_assert!((end - p.upper_tangent()).norm() <= 1e-12 * turn);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn boundary_planes_hold_along_random_runs(seed in 0u64..10_000) {
        let p = ArcParams::new(1.0, FRAC_PI_2).unwrap();
        let spec = PerturbationSpec::SmoothRandom { seed, amplitude: 1e-2, margin: 0.1 };
        let solver = SolverConfig { t_final: 0.02, ..Default::default() };
        let run = simulate_arc(&p, &spec, 128, &solver, &[Channel::PlaneLower, Channel::PlaneUpper], 1e-3).unwrap();
        for ch in [Channel::PlaneLower, Channel::PlaneUpper] {
            let worst = run.trajectory.channel(ch.name()).unwrap().iter().cloned().fold(0.0, f64::max);
            prop_assert!(worst <= 1e-6, "{}: {worst:e}", ch.name());
        }
    }
}

#[test]
fn constant_shift_reproduces_the_shifted_arc() {
    let p = ArcParams::new(1.0, FRAC_PI_2).unwrap();
    // Admissible shifts are vertical: e₂·c = 0 and b·c = 0 with θ ∈ (0, π).
    let spec = PerturbationSpec::ConstantShift { c: [0.0, 0.0, 0.1] };
    let solver = SolverConfig {
        t_final: 0.1,
        ..Default::default()
    };
    let run = simulate_arc(&p, &spec, 128, &solver, &[], 0.01).unwrap();
    assert!(run.exact_error.unwrap() <= 1e-3);
    let exact = exact_arc_solution(&spec, &p, &p.grid(128).unwrap(), 0.0).unwrap();
    assert!(exact.points[0].z == 0.1);
}
