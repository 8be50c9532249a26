//! Property-based invariants across the library, exercised on randomized
//! inputs.

use std::f64::consts::PI;

use proptest::prelude::*;

use leggett_core::experiment::{correlation_from_counts, CountTable};
use leggett_core::inequalities::{leggett_bound, leggett_lhs, LeggettInputs};
use leggett_core::nlhv::{alice_threshold, bob_interval, bob_interval_clamped, model_valid};
use leggett_core::quantum::{joint_probability, Visibility};
use leggett_core::types::{Measurement, Outcome};
use leggett_core::{
    check_sine_difference_bounds, check_triangle_inequality, polarizer_to_poincare, sphere_angle,
    MeasurementPlane, PoincareVector, PolarizerSetting,
};

/// A point uniform-ish on the sphere from two bounded parameters.
fn unit_vector(z: f64, azimuth: f64) -> PoincareVector {
    let r = (1.0 - z * z).max(0.0).sqrt();
    PoincareVector::new(r * azimuth.cos(), r * azimuth.sin(), z)
        .expect("parameterization always yields a unit vector")
}

fn vector_strategy() -> impl Strategy<Value = PoincareVector> {
    (-1.0f64..=1.0, 0.0f64..2.0 * PI).prop_map(|(z, az)| unit_vector(z, az))
}

fn plane_strategy() -> impl Strategy<Value = MeasurementPlane> {
    prop_oneof![
        Just(MeasurementPlane::Linear),
        Just(MeasurementPlane::Rotated)
    ]
}

proptest! {
    #[test]
    fn analyzer_directions_are_unit_and_stay_in_their_plane(
        angle in -720.0f64..720.0,
        plane in plane_strategy(),
    ) {
        let v = polarizer_to_poincare(PolarizerSetting::new(angle, plane));
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        match plane {
            MeasurementPlane::Linear => prop_assert!(v.y().abs() < 1e-12),
            MeasurementPlane::Rotated => prop_assert!(v.x().abs() < 1e-12),
        }
    }

    #[test]
    fn analyzer_angles_double_on_the_sphere(
        a in -360.0f64..360.0,
        b in -360.0f64..360.0,
    ) {
        let s1 = PolarizerSetting::new(a, MeasurementPlane::Linear);
        let s2 = PolarizerSetting::new(b, MeasurementPlane::Linear);
        let sphere = sphere_angle(s1, s2);
        // Doubling folds analyzer differences into [0°, 180°] on the sphere.
        let delta = (2.0 * (a - b).to_radians()).rem_euclid(2.0 * PI);
        let expected = if delta > PI { 2.0 * PI - delta } else { delta };
        prop_assert!((sphere - expected).abs() < 1e-9);
    }

    #[test]
    fn dot_products_and_angles_are_bounded(
        u in vector_strategy(),
        v in vector_strategy(),
    ) {
        let d = u.dot(&v);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&d));
        let angle = u.angle_to(&v);
        prop_assert!((0.0..=PI).contains(&angle));
        let (cx, cy, cz) = u.cross(&v);
        prop_assert!((cx * u.x() + cy * u.y() + cz * u.z()).abs() < 1e-12);
        prop_assert!((cx * v.x() + cy * v.y() + cz * v.z()).abs() < 1e-12);
    }

    #[test]
    fn clamped_interval_is_always_well_formed(
        a in vector_strategy(),
        b in vector_strategy(),
        u in vector_strategy(),
        v in vector_strategy(),
    ) {
        let interval = bob_interval_clamped(&a, &b, &u, &v);
        prop_assert!(interval.x1() >= 0.0);
        prop_assert!(interval.x2() <= 1.0);
        prop_assert!(interval.x1() <= interval.x2());
        let width = (0.5 * (1.0 + v.dot(&b))).clamp(0.0, 1.0);
        prop_assert!((interval.width() - width).abs() < 1e-12);
    }

    #[test]
    fn validity_matches_interval_placement(
        a in vector_strategy(),
        b in vector_strategy(),
        u in vector_strategy(),
        v in vector_strategy(),
    ) {
        // Skip configurations within a whisker of the validity boundary,
        // where the two computations may round to different sides.
        let ua = u.dot(&a);
        let vb = v.dot(&b);
        let ab = a.dot(&b);
        let margin = (1.0 - vb - (ab + ua).abs()).min(1.0 + vb - (ab - ua).abs());
        prop_assume!(margin.abs() > 1e-9);

        let valid = model_valid(&a, &b, &u, &v);
        let placed = match bob_interval(&a, &b, &u, &v) {
            Ok(interval) => {
                let threshold = alice_threshold(&a, &u);
                interval.x1() <= threshold && threshold <= interval.x2()
            }
            Err(_) => false,
        };
        prop_assert_eq!(valid, placed);
    }

    #[test]
    fn leggett_bound_stays_in_range(phi in -10.0f64..10.0) {
        let bound = leggett_bound(phi);
        prop_assert!(bound <= 4.0 + 1e-12);
        prop_assert!(bound >= 4.0 - 4.0 / PI - 1e-12);
        prop_assert!((bound - leggett_bound(-phi)).abs() < 1e-12);
    }

    #[test]
    fn joint_probabilities_form_a_distribution(
        a in vector_strategy(),
        b in vector_strategy(),
        vis in 0.0f64..=1.0,
    ) {
        let vis = Visibility::new(vis).unwrap();
        let mut total = 0.0;
        let mut correlation = 0.0;
        for i in Outcome::BOTH {
            for j in Outcome::BOTH {
                let p = joint_probability(i, j, &a, &b, vis);
                prop_assert!((-1e-12..=0.5 + 1e-12).contains(&p));
                total += p;
                correlation += i.sign() * j.sign() * p;
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!((correlation - (-vis.value() * a.dot(&b))).abs() < 1e-12);
    }

    #[test]
    fn count_estimator_is_bounded(
        n_pp in 0u64..1_000_000,
        n_pm in 0u64..1_000_000,
        n_mp in 0u64..1_000_000,
        n_mm in 0u64..1_000_000,
    ) {
        let table = CountTable { n_pp, n_pm, n_mp, n_mm };
        prop_assume!(table.total() > 0);
        let est = correlation_from_counts(&table).unwrap();
        prop_assert!(est.value.abs() <= 1.0);
        prop_assert!(est.std_error >= 0.0);
        prop_assert_eq!(est.std_error == 0.0, table.same() == 0 || table.different() == 0);
    }

    #[test]
    fn trig_lemmas_hold_for_arbitrary_angles(
        phi in -7.0f64..7.0,
        phi_prime in -7.0f64..7.0,
        chi in -7.0f64..7.0,
    ) {
        prop_assert!(check_sine_difference_bounds(phi, phi_prime, chi));
    }

    #[test]
    fn triangle_inequality_holds_for_arbitrary_vectors(
        x0 in -1e6f64..1e6,
        x1 in -1e6f64..1e6,
        y0 in -1e6f64..1e6,
        y1 in -1e6f64..1e6,
    ) {
        prop_assert!(check_triangle_inequality([x0, x1], [y0, y1]));
    }

    #[test]
    fn leggett_error_propagation_is_quadrature_with_doubled_shared_term(
        e11 in -1.0f64..1.0,
        e22 in -1.0f64..1.0,
        e23 in -1.0f64..1.0,
        s11 in 0.001f64..0.1,
        s22 in 0.001f64..0.1,
        s23 in 0.001f64..0.1,
    ) {
        let lhs = leggett_lhs(&LeggettInputs {
            e11: Measurement::with_error(e11, s11),
            e22: Measurement::with_error(e22, s22),
            e23: Measurement::with_error(e23, s23),
        });
        let expected = (s11 * s11 + s22 * s22 + 2.0 * s23 * s23).sqrt();
        prop_assert!((lhs.std_error.unwrap() - expected).abs() < 1e-12);
    }
}
