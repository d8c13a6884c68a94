//! Property tests over randomized inputs: localization algebra, stress
//! solver invariants on complete graphs, transform composition, and
//! scenario round-trips.

use affineform::stress::{StressSolverOptions, StressTolerances};
use affineform::{
    compute_stress, follower_targets, localizability_check, target_formation, validate_stress,
    AffineTransform, NominalFormation,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Planar points kept away from collinearity so that three leaders span
/// the plane and the complete graph admits a full-rank stress.
fn generic_planar_points(n: usize) -> impl Strategy<Value = Vec<DVector<f64>>> {
    let coord = -3.0f64..3.0f64;
    proptest::collection::vec((coord.clone(), coord), n).prop_filter_map(
        "degenerate configuration",
        |pts| {
            let points: Vec<DVector<f64>> = pts
                .iter()
                .map(|&(x, y)| DVector::from_column_slice(&[x, y]))
                .collect();
            // pairwise separation
            for i in 0..points.len() {
                for j in (i + 1)..points.len() {
                    if (&points[i] - &points[j]).norm() < 0.35 {
                        return None;
                    }
                }
            }
            // every triple spans a triangle of decent area
            for i in 0..points.len() {
                for j in (i + 1)..points.len() {
                    for k in (j + 1)..points.len() {
                        let u = &points[j] - &points[i];
                        let v = &points[k] - &points[i];
                        let area = (u[0] * v[1] - u[1] * v[0]).abs();
                        if area < 0.25 {
                            return None;
                        }
                    }
                }
            }
            Some(points)
        },
    )
}

fn complete_graph(n: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((i, j));
        }
    }
    edges
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Complete graphs on generic planar points always admit a stress
    /// that passes every invariant, and the followers are localizable.
    #[test]
    fn complete_graph_stress_validates(points in generic_planar_points(5)) {
        let n = points.len();
        let formation = NominalFormation::new(3, points, complete_graph(n)).unwrap();
        prop_assume!(formation.leaders_span());
        let stress = compute_stress(&formation, &StressSolverOptions::default()).unwrap();
        let report = validate_stress(stress.matrix(), &formation, &StressTolerances::solver_grade());
        prop_assert!(report.passed(), "solver stress failed validation:\n{report}");
        let loc = localizability_check(&stress);
        prop_assert!(loc.localizable);
        prop_assert!(loc.min_eig_ff > 0.0);
    }

    /// Localization commutes with affine maps of the leader targets.
    #[test]
    fn localization_is_affine_invariant(
        points in generic_planar_points(5),
        g in proptest::array::uniform4(-1.5f64..1.5f64),
        offset in proptest::array::uniform2(-3.0f64..3.0f64),
    ) {
        let gamma = DMatrix::from_row_slice(2, 2, &g);
        prop_assume!(gamma.determinant().abs() > 0.15);
        let n = points.len();
        let formation = NominalFormation::new(3, points, complete_graph(n)).unwrap();
        prop_assume!(formation.leaders_span());
        let stress = compute_stress(&formation, &StressSolverOptions::default()).unwrap();
        let upsilon = DVector::from_column_slice(&offset);
        let mapped_leaders: Vec<DVector<f64>> = formation
            .leader_positions()
            .iter()
            .map(|a| &gamma * a + &upsilon)
            .collect();
        let followers = follower_targets(&stress, &mapped_leaders).unwrap();
        for (got, nominal) in followers.iter().zip(formation.follower_positions()) {
            let expect = &gamma * nominal + &upsilon;
            prop_assert!((got - expect).norm() < 1e-6);
        }
    }

    /// Localization is linear in the leader targets.
    #[test]
    fn localization_is_linear(
        x in proptest::collection::vec(proptest::array::uniform2(-5.0f64..5.0), 3),
        y in proptest::collection::vec(proptest::array::uniform2(-5.0f64..5.0), 3),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        points in generic_planar_points(5),
    ) {
        let n = points.len();
        let formation = NominalFormation::new(3, points, complete_graph(n)).unwrap();
        prop_assume!(formation.leaders_span());
        let stress = compute_stress(&formation, &StressSolverOptions::default()).unwrap();
        let xs: Vec<DVector<f64>> = x.iter().map(|p| DVector::from_column_slice(p)).collect();
        let ys: Vec<DVector<f64>> = y.iter().map(|p| DVector::from_column_slice(p)).collect();
        let combo: Vec<DVector<f64>> = xs
            .iter()
            .zip(&ys)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let fx = follower_targets(&stress, &xs).unwrap();
        let fy = follower_targets(&stress, &ys).unwrap();
        let fc = follower_targets(&stress, &combo).unwrap();
        for ((fa, fb), fcv) in fx.iter().zip(&fy).zip(&fc) {
            prop_assert!((alpha * fa + beta * fb - fcv).norm() <= 1e-10);
        }
    }

    /// Applying a transform to an already transformed configuration is
    /// the composed transform.
    #[test]
    fn transform_composition(
        g1 in proptest::array::uniform9(-1.0f64..1.0),
        g2 in proptest::array::uniform9(-1.0f64..1.0),
        u1 in proptest::array::uniform3(-2.0f64..2.0),
        u2 in proptest::array::uniform3(-2.0f64..2.0),
    ) {
        let formation = affineform::fixtures::case1_formation();
        let t1 = AffineTransform::new(
            DMatrix::from_row_slice(3, 3, &g1),
            DVector::from_column_slice(&u1),
            "first",
        );
        let t2 = AffineTransform::new(
            DMatrix::from_row_slice(3, 3, &g2),
            DVector::from_column_slice(&u2),
            "second",
        );
        let composed = t2.compose(&t1);
        let inner = target_formation(&formation, &t1).unwrap();
        let direct = target_formation(&formation, &composed).unwrap();
        for (agent, p) in inner.points().iter().enumerate() {
            prop_assert!((direct.point(agent) - t2.apply(p)).norm() < 1e-12);
        }
    }
}

// Round-trip through TOML for randomized scenario perturbations.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scenario_round_trip(seed in any::<u64>(), dt in 0.001f64..0.1, t_end in 0.0f64..20.0) {
        let mut config = affineform::scenario::fixture("case2-combination").unwrap();
        config.seed = seed;
        config.dt = dt;
        config.t_end = t_end;
        let text = config.to_toml();
        let back = affineform::sim::ScenarioConfig::from_toml(&text).unwrap();
        prop_assert_eq!(config, back);
    }
}
