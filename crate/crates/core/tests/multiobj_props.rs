use fsipp_core::certify::LowerLevelOptions;
use fsipp_core::fixtures;
use fsipp_core::multiobj::{
    epsilon_constraint_solve, grid_points, scalarize, EpsOptions, MultiFsippProblem, SampledFeasibility, StopKind,
};
use fsipp_core::relax::CaseTag;

fn options(case: usize) -> EpsOptions {
    match case {
        2 => EpsOptions {
            k_min: 4,
            case_override: Some(CaseTag::Case3),
            ..EpsOptions::default()
        },
        3 => EpsOptions {
            k_min: 4,
            case_override: Some(CaseTag::Case4),
            ..EpsOptions::default()
        },
        _ => EpsOptions::default(),
    }
}

fn instances() -> Vec<MultiFsippProblem> {
    vec![
        fixtures::multi_case_i(),
        fixtures::multi_case_ii(),
        fixtures::multi_case_iii(),
        fixtures::multi_case_iv(),
    ]
}

#[test]
fn objective_vectors_never_increase_along_the_path() {
    for (c, m) in instances().iter().enumerate() {
        let u0 = fixtures::MULTI_STARTS[c];
        let rep = epsilon_constraint_solve(m, &u0, &options(c)).unwrap();
        let mut prev = m.values(&u0).unwrap();
        for s in &rep.path {
            let cur = m.values(&s.point).unwrap();
            for (a, b) in cur.iter().zip(&prev) {
                assert!(*a <= *b + 1e-4, "case {c} stage {}: {cur:?} vs {prev:?}", s.index + 1);
            }
            prev = cur;
        }
        assert_eq!(rep.objective_vector, m.values(&rep.final_point).unwrap());
    }
}

#[test]
fn uniqueness_stop_is_sound() {
    let boxes = fixtures::multi_boxes();
    for c in [2, 3] {
        let m = &instances()[c];
        let u0 = fixtures::MULTI_STARTS[c];
        let rep = epsilon_constraint_solve(m, &u0, &options(c)).unwrap();
        assert_eq!(rep.stopped_by, StopKind::Uniqueness);
        assert_eq!(rep.path.len(), 1);
        // no sampled feasible point of the first scalarized problem does better
        let sub = scalarize(m, 0, &u0).unwrap();
        let sampled = SampledFeasibility::new(m, 41).unwrap();
        let best = sub.objective(&rep.final_point).unwrap();
        for v in grid_points(&boxes[c], 121) {
            if sub.g.eval(&v).unwrap() <= 0.0 || sub.psis.iter().any(|q| q.eval(&v).unwrap() > 0.0) {
                continue;
            }
            if sampled.feasible(&v, 0.0).unwrap() {
                let (ok, _) =
                    fsipp_core::certify::feasibility_check(&v, &sub, 1e-9, &LowerLevelOptions::default()).unwrap();
                if ok {
                    assert!(sub.objective(&v).unwrap() >= best - 1e-4, "case {c}: {v:?} beats the stop point");
                }
            }
        }
    }
}
