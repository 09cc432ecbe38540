use std::f64::consts::PI;

use lie_core::geometry::{
    canonical_rotation, derivative, reflect_t, sample_arc_on, ArcParams, Curve, Grid, Vec3, VectorField, E2, E3,
};
use lie_core::solver::{lie_rhs_with, BoundaryClosure, BoundaryCondition};
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    vec3(1.0)
        .prop_filter("away from zero", |v| v.norm() > 0.1)
        .prop_map(|v| v.normalize())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflect_t_is_an_involution(half in 4usize..60, l in 0.1f64..5.0, seed in vec3(3.0)) {
        let grid = Grid::symmetric(l, 2 * half + 1).unwrap();
        let vectors: Vec<Vec3> = (0..grid.n_nodes)
            .map(|i| seed * (i as f64 * 0.37).sin() + Vec3::new(i as f64, 1.0 / (1.0 + i as f64), -0.5))
            .collect();
        let f = VectorField::new(grid, vectors).unwrap();
        let twice = reflect_t(&reflect_t(&f).unwrap()).unwrap();
        prop_assert_eq!(twice.vectors, f.vectors);
    }

    #[test]
    fn exact_arc_only_moves_vertically(r in 0.2f64..5.0, theta in 0.1f64..6.2, t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
        let p = ArcParams::new(r, theta).unwrap();
        let grid = p.grid(33).unwrap();
        let a = sample_arc_on(r, t1, &grid).unwrap();
        let b = sample_arc_on(r, t2, &grid).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            prop_assert_eq!(x.x, y.x);
            prop_assert_eq!(x.y, y.y);
            let dz = (y.z - x.z) - (t2 - t1) / r;
            prop_assert!(dz.abs() <= 8.0 * f64::EPSILON * (t1.abs() + t2.abs() + 1.0) / r);
        }
    }

    #[test]
    fn second_derivative_of_arc_has_curvature_one_over_r(r in 0.5f64..3.0, theta in 0.3f64..3.0, n in 64usize..256) {
        let p = ArcParams::new(r, theta).unwrap();
        let grid = p.grid(n).unwrap();
        let c = sample_arc_on(r, 0.0, &grid).unwrap();
        let d2 = derivative(&c.points, &grid, 2).unwrap();
        let h = grid.spacing;
        // One-sided end stencils carry the largest truncation constant.
        let tol = 2.0 * h * h / r.powi(3) + 1e3 * f64::EPSILON * r / (h * h);
        for v in &d2 {
            prop_assert!((v.norm() - 1.0 / r).abs() <= tol, "{} vs {}", v.norm(), 1.0 / r);
        }
    }

    #[test]
    fn canonical_rotation_is_proper_orthogonal(a in unit().prop_filter("not vertical", |a| a.x.hypot(a.y) > 1e-3)) {
        let frame = canonical_rotation(&a).unwrap();
        let q = frame.rotation;
        prop_assert!((q.determinant() - 1.0).abs() <= 1e-12);
        prop_assert!((q.transpose() * q - nalgebra::Matrix3::identity()).norm() <= 1e-12);
        prop_assert!((q * E3 - E2).norm() <= 1e-12);
        prop_assert!((q * a - frame.canonical_tangent()).norm() <= 1e-12);
    }

    #[test]
    fn reflection_commutes_with_the_right_hand_side(
        half in 8usize..40,
        bump in vec3(0.05),
        lower in unit(),
        upper in unit(),
        closure in prop_oneof![Just(BoundaryClosure::Reflection), Just(BoundaryClosure::TangentGhost)],
    ) {
        let grid = Grid::symmetric(1.0, 2 * half + 1).unwrap();
        let y = Curve::from_fn(grid, |s| {
            Vec3::new((s * PI / 2.0).cos(), (s * PI / 2.0).sin(), 0.2 * s * s) + bump * (3.0 * s + 0.4).sin()
        })
        .unwrap();
        let ty = Curve::new(grid, reflect_t(&y.as_field()).unwrap().vectors).unwrap();
        let t_of = |v: Vec3| Vec3::new(-v.x, v.y, -v.z);
        let bc = BoundaryCondition::fixed(lower, upper).unwrap();
        let bc_t = BoundaryCondition::fixed(t_of(upper), t_of(lower)).unwrap();
        let lhs = reflect_t(&lie_rhs_with(&y, &bc, closure).unwrap()).unwrap();
        let rhs = lie_rhs_with(&ty, &bc_t, closure).unwrap();
        let scale = lhs.vectors.iter().map(|v| v.amax()).fold(1.0, f64::max);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * scale);
    }
}
