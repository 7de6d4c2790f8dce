use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use teachgym_core::gmm::{gmr, EmConfig, GaussianComponent, Gmm, Samples};
use teachgym_core::metrics::{
    classify_demo, efficiency, generalisation_set, similarity, undemonstrated_states, DemoClass,
    EfficacyReport, MetricsConfig,
};
use teachgym_core::scenarios;
use teachgym_core::task::Task;
use teachgym_core::tpgmm::{self, FitConfig, Frame, FrameInstance, Init, StateLayout};
use teachgym_core::{MembershipResult, Point, Sample, Trajectory};

fn maze_task() -> teachgym_core::MazeTask {
    match scenarios::maze().task {
        Task::Maze(m) => m,
        _ => unreachable!(),
    }
}

fn polyline(points: Vec<(f64, f64)>) -> Trajectory {
    let pts: Vec<Point> = points.into_iter().map(|(x, y)| Point::xy(x, y)).collect();
    Trajectory::from_points(&pts).unwrap()
}

fn verdict_is_consistent(m: &MembershipResult) -> bool {
    m.is_member == m.violated_criteria.is_empty()
        && (m.worst_violation == 0.0) == m.is_member
        && m.worst_violation >= 0.0
        && m.violated_criteria.windows(2).all(|w| w[0] < w[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn maze_verdicts_are_consistent_and_densify_invariant(
        pts in prop::collection::vec((-0.02f64..0.22, -0.02f64..0.32), 2..8)
    ) {
        let task = maze_task();
        let t = polyline(pts);
        let m = task.check_membership(&t).unwrap();
        prop_assert!(verdict_is_consistent(&m));
        let d = task.check_membership(&t.densified()).unwrap();
        prop_assert_eq!(&m.violated_criteria, &d.violated_criteria);
        prop_assert_eq!(m.is_member, d.is_member);
    }

    #[test]
    fn efficacy_report_counts_and_sets_partition(
        outcomes in prop::collection::vec(any::<bool>(), 1..140),
        covered_raw in prop::collection::vec(0usize..140, 0..10),
    ) {
        let n = outcomes.len();
        let report = EfficacyReport::from_outcomes(outcomes.clone()).unwrap();
        prop_assert_eq!(report.successes, outcomes.iter().filter(|o| **o).count());
        prop_assert!((report.efficacy - report.successes as f64 / n as f64).abs() < 1e-15);
        let covered: BTreeSet<usize> = covered_raw.into_iter().filter(|i| *i < n).collect();
        let u = undemonstrated_states(&report, &covered);
        let g = generalisation_set(&report, &covered);
        prop_assert!(u.is_disjoint(&g));
        let union: BTreeSet<usize> = u.iter().chain(&g).chain(&covered).copied().collect();
        prop_assert!(report.successful_items().is_subset(&union));
    }

    #[test]
    fn efficiency_is_non_increasing_in_demo_count(nu in 0.0f64..=1.0, m in 1usize..50) {
        prop_assert!(efficiency(nu, m + 1).unwrap() <= efficiency(nu, m).unwrap());
    }

    #[test]
    fn classification_is_total(
        now in 0.0f64..=1.0, prev in 0.0f64..=1.0, s in 0.0f64..0.2, member in any::<bool>()
    ) {
        let config = MetricsConfig { ambiguity_threshold: 0.02, efficacy_delta_bounds: (-0.01, 0.02), similarity_len: 100 };
        let membership = if member {
            MembershipResult::member()
        } else {
            MembershipResult {
                is_member: false,
                violated_criteria: vec![teachgym_core::task::Criterion::EndCondition],
                worst_violation: 0.01,
                missing_actions: false,
            }
        };
        let a = classify_demo(now, prev, s, &membership, &config);
        let b = classify_demo(now, prev, s, &membership, &config);
        prop_assert_eq!(a, b);
        if !member {
            prop_assert_eq!(a.class, DemoClass::Incorrect);
        }
        prop_assert_eq!(a.cause.is_some(), a.class == DemoClass::Incorrect);
    }

    #[test]
    fn similarity_to_itself_is_zero(pts in prop::collection::vec((0.0f64..0.2, 0.0f64..0.3), 2..6)) {
        let t = polyline(pts);
        let config = MetricsConfig::for_task(&scenarios::maze().task);
        prop_assert!(similarity(&t, std::slice::from_ref(&t), &config).abs() < 1e-15);
    }

    #[test]
    fn em_is_monotone_with_normalized_priors_and_floored_covariances(
        seed in 0u64..1000, k in 1usize..4, n in 30usize..80
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * 2)
            .map(|i| if i % 2 == 0 { rng.random_range(0.0..1.0) } else { rng.random_range(-1.0..1.0) })
            .collect();
        let config = EmConfig::new(k, 1e-4, seed);
        let (gmm, trace) = Gmm::fit(&Samples::new(&data, 2), &config).unwrap();
        for w in trace.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8, "{} then {}", w[0], w[1]);
        }
        prop_assert!((gmm.priors.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for c in &gmm.components {
            let eig = c.covariance_matrix().symmetric_eigen().eigenvalues;
            prop_assert!(eig.min() >= 1e-4 * (1.0 - 1e-9));
        }
    }

    #[test]
    fn gmr_mean_lies_in_hull_of_conditional_means(
        means in prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), 1..4),
        slopes in prop::collection::vec(-0.5f64..0.5, 3),
        t in 0.0f64..1.0,
    ) {
        let components: Vec<GaussianComponent> = means
            .iter()
            .zip(&slopes)
            .map(|((mt, mx), c)| GaussianComponent::new(vec![*mt, *mx], &DMatrix::from_row_slice(2, 2, &[0.05, *c * 0.05, *c * 0.05, 0.05])))
            .collect();
        let k = components.len();
        let gmm = Gmm { priors: vec![1.0 / k as f64; k], components };
        let conditional: Vec<f64> = gmm
            .components
            .iter()
            .map(|c| c.mean[1] + c.cov(1, 0) / c.cov(0, 0) * (t - c.mean[0]))
            .collect();
        let lo = conditional.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = conditional.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let out = gmr(&gmm, t);
        prop_assert!(out.mean[0] >= lo - 1e-12 && out.mean[0] <= hi + 1e-12);
    }

    #[test]
    fn realization_is_translation_equivariant(dx in -0.05f64..0.05, dy in -0.05f64..0.05, seed in 0u64..20) {
        let layout = StateLayout::maze();
        let demo = |ox: f64, oy: f64, bend: f64| {
            let pts: Vec<Point> = (0..30)
                .map(|i| {
                    let u = i as f64 / 29.0;
                    Point::xy(ox + 0.1 * u + bend * (u * std::f64::consts::PI).sin(), oy + 0.2 * u)
                })
                .collect();
            Trajectory::from_points(&pts).unwrap()
        };
        let inst = |ox: f64, oy: f64| {
            FrameInstance::new(vec![
                Frame::translation(layout, &[ox, oy]).unwrap(),
                Frame::translation(layout, &[0.15, 0.27]).unwrap(),
            ])
        };
        let origins = [(0.02, 0.01), (0.12, 0.04), (0.07, 0.02)];
        let demos: Vec<Trajectory> = origins.iter().enumerate().map(|(i, (x, y))| demo(*x, *y, 0.01 * i as f64)).collect();
        let frames: Vec<FrameInstance> = origins.iter().map(|(x, y)| inst(*x, *y)).collect();
        let mut config = FitConfig::new(3, 1e-6, seed);
        config.init = Init::TimeBased;
        let (model, _) = tpgmm::fit(&demos, &frames, &config).unwrap();
        let shifted_demos: Vec<Trajectory> = demos.iter().map(|d| d.translated(&[dx, dy])).collect();
        let shifted_frames: Vec<FrameInstance> = frames.iter().map(|f| f.translated(&[dx, dy])).collect();
        let (shifted, _) = tpgmm::fit(&shifted_demos, &shifted_frames, &config).unwrap();
        let query = inst(0.09, 0.03);
        let a = tpgmm::realize(&model, &query, 50).unwrap();
        let b = tpgmm::realize(&shifted, &query.translated(&[dx, dy]), 50).unwrap();
        for (p, q) in a.samples().iter().zip(b.samples()) {
            prop_assert!((q.position.x() - p.position.x() - dx).abs() < 1e-9);
            prop_assert!((q.position.y() - p.position.y() - dy).abs() < 1e-9);
        }
    }
}

#[test]
fn single_identity_frame_matches_plain_gmm_regression() {
    let pts: Vec<Sample> = (0..40)
        .map(|i| {
            let u = i as f64 / 39.0;
            Sample::new(u, Point::xy(0.1 * u * u, 0.2 * (u * 3.0).sin()))
        })
        .collect();
    let demo = Trajectory::new(pts, None).unwrap();
    let identity = FrameInstance::new(vec![
        Frame::translation(StateLayout::maze(), &[0.0, 0.0]).unwrap()
    ]);
    let config = FitConfig::new(4, 1e-6, 7);
    let (model, _) = tpgmm::fit(
        std::slice::from_ref(&demo),
        std::slice::from_ref(&identity),
        &config,
    )
    .unwrap();
    let (_, encoded) = tpgmm::encode_demonstration(&demo, config.resample_len);
    let (plain, _) = Gmm::fit(&Samples::new(&encoded, 3), &config.em).unwrap();
    let fused = tpgmm::fuse(&model, &identity).unwrap();
    for (f, c) in fused.components.iter().zip(&model.components) {
        for (a, b) in f.mean.iter().zip(&c[0].mean) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in f.covariance.iter().zip(&c[0].covariance) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let realized = tpgmm::realize(&model, &identity, 100).unwrap();
    for s in realized.samples() {
        let g = gmr(&plain, s.t);
        assert!((s.position.x() - g.mean[0]).abs() < 1e-9);
        assert!((s.position.y() - g.mean[1]).abs() < 1e-9);
    }
}

#[test]
fn fit_is_bit_reproducible() {
    let scenario = scenarios::maze();
    let ts = scenario.test_set();
    let mut teacher = teachgym_core::teachers::Teacher::new(
        scenario.teacher_config(teachgym_core::teachers::TeacherVariant::Naive),
        3,
        &ts,
    )
    .unwrap();
    let demos: Vec<_> = (0..3)
        .map(|i| {
            teacher
                .demonstrate(&scenario.task, &ts, &scenario.script, i * 40)
                .unwrap()
        })
        .collect();
    let config = teachgym_core::learner::LearnerConfig::for_task(&scenario.task, 11);
    let (a, _) = teachgym_core::learner::fit(&scenario.task, &demos, &config).unwrap();
    let (b, _) = teachgym_core::learner::fit(&scenario.task, &demos, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        teachgym_core::learner::model_hash(&a),
        teachgym_core::learner::model_hash(&b)
    );
}

#[test]
fn one_component_recovers_sample_moments() {
    let pts: Vec<Point> = (0..20).map(|i| Point::xy(0.01 * i as f64, 0.05)).collect();
    let demo = Trajectory::from_points(&pts).unwrap();
    let identity = FrameInstance::new(vec![
        Frame::translation(StateLayout::maze(), &[0.0, 0.0]).unwrap()
    ]);
    let config = FitConfig::new(1, 1e-8, 0);
    let (model, _) = tpgmm::fit(
        std::slice::from_ref(&demo),
        std::slice::from_ref(&identity),
        &config,
    )
    .unwrap();
    let (_, encoded) = tpgmm::encode_demonstration(&demo, config.resample_len);
    for d in 0..3 {
        let mean = encoded.iter().skip(d).step_by(3).sum::<f64>() / config.resample_len as f64;
        assert!((model.components[0][0].mean[d] - mean).abs() < 1e-12);
    }
}

#[test]
fn two_step_realization_hits_time_endpoints() {
    let demo = Trajectory::from_points(&[Point::xy(0.0, 0.0), Point::xy(0.1, 0.2)]).unwrap();
    let identity = FrameInstance::new(vec![
        Frame::translation(StateLayout::maze(), &[0.0, 0.0]).unwrap()
    ]);
    let (model, _) = tpgmm::fit(
        std::slice::from_ref(&demo),
        std::slice::from_ref(&identity),
        &FitConfig::new(2, 1e-6, 0),
    )
    .unwrap();
    let r = tpgmm::realize(&model, &identity, 2).unwrap();
    assert_eq!(r.len(), 2);
    assert_eq!(r.samples()[0].t, 0.0);
    assert_eq!(r.samples()[1].t, 1.0);
}
