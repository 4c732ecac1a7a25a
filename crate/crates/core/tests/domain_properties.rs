//! Properties of the punctured-ball geometry and the sampled inward checks.

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use dde_periodic::domain::{
    example_system, sup_norm_estimate, tau_star, verify_inward, Component, ExampleParams, Hole, PointClass,
    PuncturedBall, SamplingOptions,
};
use dde_periodic::{DelaySystem, Execution, LinearField};

/// A ball of radius 3 with up to three disjoint holes on a fixed lattice.
fn domain() -> impl Strategy<Value = PuncturedBall> {
    (1usize..=3, 0usize..=3, 0.05..0.4_f64).prop_map(|(dim, holes, r)| {
        let centres = [-1.5, 0.0, 1.5];
        let holes = (0..holes)
            .map(|j| {
                let mut c = vec![0.0; dim];
                c[0] = centres[j];
                Hole { center: c, radius: r }
            })
            .collect();
        PuncturedBall::new(dim, 3.0, holes).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_samples_carry_the_domain_normal(dom in domain()) {
        for bp in dom.boundary_samples(32) {
            let class = dom.classify(&bp.point);
            match bp.component {
                Component::Outer => prop_assert_eq!(class, PointClass::OuterBoundary),
                Component::Hole(j) => prop_assert_eq!(class, PointClass::HoleBoundary(j)),
            }
            let normal = dom.normal(&bp.point).unwrap();
            let len: f64 = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((len - 1.0).abs() < 1e-12);
            for (a, b) in normal.iter().zip(&bp.normal) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            // stepping along the normal leaves the closed domain
            let out: Vec<f64> = bp.point.iter().zip(&normal).map(|(x, n)| x + 1e-3 * n).collect();
            prop_assert_eq!(dom.classify(&out), PointClass::Exterior);
        }
    }

    #[test]
    fn interior_samples_keep_their_margin(dom in domain(), margin in 0.0..0.2_f64) {
        for x in dom.interior_samples(64, margin) {
            prop_assert!(dom.contains_closed(&x));
            for h in dom.holes() {
                let d: f64 = x.iter().zip(&h.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                prop_assert!(d >= h.radius + margin);
            }
            prop_assert!(dom.distance_to_boundary(&x) >= -dom.tol_geo());
        }
    }

    #[test]
    fn euler_characteristic_follows_the_hole_count(dom in domain()) {
        let sign = if dom.dim() % 2 == 0 { 1 } else { -1 };
        prop_assert_eq!(dom.euler_characteristic(), 1 - sign * dom.hole_count() as i64);
    }
}

fn example() -> (DelaySystem, PuncturedBall) {
    let params = ExampleParams::planar_default();
    let dom = PuncturedBall::with_common_hole_radius(2, 4.0, &params.centers, 0.1).unwrap();
    (example_system(&params, &dom, 1e-4, 1.0, None).unwrap(), dom)
}

#[test]
fn field_sup_estimate_is_stable_under_sample_doubling() {
    let (sys, dom) = example();
    let coarse = sup_norm_estimate(&sys, &dom, 20_000, Execution::Parallel);
    let fine = sup_norm_estimate(&sys, &dom, 40_000, Execution::Parallel);
    assert!(coarse.is_finite() && coarse > 0.0);
    assert!((fine / coarse - 1.0).abs() <= 0.02, "{coarse} vs {fine}");
    let seq = sup_norm_estimate(&sys, &dom, 20_000, Execution::Sequential);
    assert_eq!(seq, coarse);
}

#[test]
fn delayed_restoring_force_has_a_known_delay_bound() {
    // g(x, y) = -y on the ball of radius R: the delayed condition holds
    // exactly while |y - x| < R, and sup |g| = R
    let radius = 2.0;
    let sys = DelaySystem::new(
        Arc::new(LinearField::new(DMatrix::zeros(2, 2), -DMatrix::identity(2, 2))),
        0.1,
        1.0,
        None,
        vec![0.0, 0.0],
    )
    .unwrap();
    let dom = PuncturedBall::ball(2, radius).unwrap();
    let opts = SamplingOptions::default();
    let star = tau_star(&sys, &dom, &opts).unwrap();
    assert!((star.epsilon - radius).abs() <= 1e-3 * radius, "{star:?}");
    let bound = radius / star.sup_norm;
    assert!((star.tau_star - bound).abs() <= 1e-3 * bound);
    assert!((star.sup_norm / (1.1 * radius) - 1.0).abs() < 0.02);
    assert!(verify_inward(&sys, &dom, 0.5 * star.tau_star, &opts).passes());
    assert!(!verify_inward(&sys, &dom, 1.5 * star.tau_star, &opts).strong_pass);
}
