#![allow(clippy::needless_range_loop)]

use evpde_core::fem::{self, P1Mesh};
use evpde_core::flowmap::{FlowMap, MeasureKind};
use evpde_core::linalg::{self, direct_solve, TripletBuilder};
use evpde_core::mesh::{build_circle_mesh, build_disk_mesh};
use proptest::prelude::*;

fn flow() -> impl Strategy<Value = FlowMap> {
    prop_oneof![
        (0.0..2.0f64).prop_map(|s| FlowMap::translating(s, 1.0).unwrap()),
        (0.0..1.0f64).prop_map(|g| FlowMap::expanding(g, 1.0).unwrap()),
        (0.0..0.5f64).prop_map(|a| FlowMap::oscillating(a, 1.0).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_inverse_round_trips(map in flow(), t in 0.0..1.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let image = map.evaluate(t, [x, y]).unwrap();
        let back = map.inverse(t, image).unwrap();
        prop_assert!((back[0] - x).abs() < 1e-12 && (back[1] - y).abs() < 1e-12);
    }

    #[test]
    fn jacobians_positive(map in flow(), t in 0.0..1.0f64, th in 0.0..6.3f64) {
        let x0 = [th.cos(), th.sin()];
        prop_assert!(map.jacobian_det(t, x0, MeasureKind::Surface).unwrap() > 0.0);
        prop_assert!(map.jacobian_det(t, [0.5 * x0[0], 0.5 * x0[1]], MeasureKind::Bulk).unwrap() > 0.0);
    }

    #[test]
    fn triplet_order_does_not_matter(entries in prop::collection::vec((0usize..6, 0usize..6, -1.0..1.0f64), 1..40)) {
        let mut forward = TripletBuilder::new(6, 6);
        let mut dense = [[0.0f64; 6]; 6];
        for &(i, j, v) in &entries {
            forward.push(i, j, v);
            dense[i][j] += v;
        }
        let mut backward = TripletBuilder::new(6, 6);
        for &(i, j, v) in entries.iter().rev() {
            backward.push(i, j, v);
        }
        let (a, b) = (forward.build(), backward.build());
        for i in 0..6 {
            for j in 0..6 {
                prop_assert!((a.get(i, j) - dense[i][j]).abs() < 1e-14);
                prop_assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn moved_curve_matrices_are_consistent(map in flow(), t in 0.0..1.0f64, n in 8usize..64) {
        let c = build_circle_mesh(n).unwrap().moved(&map, t).unwrap();
        let ones = vec![1.0; n];
        let m = c.mass();
        let s = c.stiffness();
        prop_assert!((m.bilinear(&ones, &ones).unwrap() - c.length()).abs() < 1e-12 * c.length());
        prop_assert!(linalg::norm(&s.spmv(&ones).unwrap()) < 1e-10);
        prop_assert!(m.max_asymmetry() < 1e-14 && s.max_asymmetry() < 1e-14);
    }

    #[test]
    fn mass_is_positive_definite(seed in prop::collection::vec(-1.0..1.0f64, 24)) {
        prop_assume!(linalg::norm(&seed) > 1e-3);
        let c = build_circle_mesh(24).unwrap();
        prop_assert!(c.mass().bilinear(&seed, &seed).unwrap() > 0.0);
        prop_assert!(c.stiffness().bilinear(&seed, &seed).unwrap() >= -1e-14);
    }

    #[test]
    fn disk_mass_sums_to_area(map in flow(), t in 0.0..1.0f64) {
        let d = build_disk_mesh(0.3).unwrap().moved(&map, t).unwrap();
        let ones = vec![1.0; d.n_nodes()];
        prop_assert!((d.mass().bilinear(&ones, &ones).unwrap() - d.area()).abs() < 1e-12 * d.area());
    }

    #[test]
    fn interpolated_affine_functions_are_exact(a in -2.0..2.0f64, b in -2.0..2.0f64, c0 in -2.0..2.0f64) {
        let d = build_disk_mesh(0.3).unwrap();
        let u = fem::interpolate(d.nodes(), |x| a * x[0] + b * x[1] + c0);
        let err = d.l2_error(&u, &|x: evpde_core::Point| a * x[0] + b * x[1] + c0).unwrap();
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn direct_solve_has_small_residual(shift in 0.1..10.0f64, rhs in prop::collection::vec(-1.0..1.0f64, 16)) {
        let c = build_circle_mesh(16).unwrap();
        let a = c.stiffness().linear_combination(1.0, &c.mass(), shift).unwrap();
        let x = direct_solve(&a, &rhs).unwrap();
        let mut r = a.spmv(&x).unwrap();
        linalg::axpy(-1.0, &rhs, &mut r);
        prop_assert!(linalg::norm(&r) < 1e-10 * (1.0 + linalg::norm(&rhs)));
    }
}
