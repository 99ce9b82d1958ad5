use gsqg_core::contour::Domain;
use gsqg_core::kernel::ClosedForm;
use gsqg_core::scenario::pi_indices;
use gsqg_core::velocity::{kernel_split, split_velocities, velocity_area, Piece, RegionSet};
use proptest::prelude::*;

fn block(w: f64) -> RegionSet {
    RegionSet::new(vec![Piece::Rectangle { x0: 0.1, x1: 0.5, y0: 0.0, y1: 0.4, weight: w }], true).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn velocity_is_linear_in_density(x1 in 0.0f64..0.8, x2 in 0.45f64..0.9, alpha in 0.05f64..0.6) {
        let k = ClosedForm::AlphaSqg { alpha };
        let a = velocity_area([x1, x2], &block(1.0), &k, Domain::HalfPlane, 1e-11).unwrap().u;
        let b = velocity_area([x1, x2], &block(2.0), &k, Domain::HalfPlane, 1e-11).unwrap().u;
        for i in 0..2 {
            prop_assert!((b[i] - 2.0 * a[i]).abs() <= 1e-12 * (1.0 + a[i].abs()));
        }
    }

    #[test]
    fn splits_add_up(x1 in 0.01f64..0.6, x2 in 0.01f64..0.6) {
        let k = ClosedForm::AlphaSqg { alpha: 0.25 };
        prop_assume!(!(0.09..0.51).contains(&x1) || x2 > 0.41);
        let s = split_velocities([x1, x2], &block(1.0), &k, Domain::HalfPlane, 1e-11).unwrap();
        prop_assert!((s.u1_bad + s.u1_good - s.u[0]).abs() < 1e-8);
        prop_assert!((s.u2_bad + s.u2_good - s.u[1]).abs() < 1e-8);
    }

    #[test]
    fn sign_predicates_hold(x in prop::array::uniform2(0.0f64..0.7), y in prop::array::uniform2(0.0f64..0.7), alpha in 0.0f64..1.0) {
        prop_assume!((x[0] + y[0]).hypot(x[1] + y[1]) <= 1.0 && x != y);
        let s = if alpha < 0.05 {
            kernel_split(x, y, &ClosedForm::Euler).unwrap()
        } else {
            kernel_split(x, y, &ClosedForm::AlphaSqg { alpha }).unwrap()
        };
        prop_assert!(s.predicates(x, y, 1e-12).iter().all(|&p| p));
    }

    #[test]
    fn pi_signs_for_k5(beta in 1e-4f64..0.3333) {
        let p = pi_indices(beta, 5.0, 1e3).unwrap();
        prop_assert!(p.pi1 < 0.0 && p.pi2 > 0.0);
    }
}
