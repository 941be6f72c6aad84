use fsipp_core::extract::{
    extract_atoms, flat_truncation_check, numeric_rank, point_from_functional, reconstruction_error, ExtractOptions,
    DEFAULT_RANK_TOL,
};
use fsipp_core::moment::MomentFunctional;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn separated(points: &[Vec<f64>], gap: f64) -> bool {
    points.iter().enumerate().all(|(i, a)| {
        points[..i]
            .iter()
            .all(|b| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() >= gap)
    })
}

fn measure() -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    (1usize..=3)
        .prop_flat_map(|m| prop::collection::vec((prop::collection::vec(-1.0f64..1.0, m), 0.1f64..1.0), 1..=4))
        .prop_filter("atoms are well separated", |a| {
            separated(&a.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>(), 0.25)
        })
}

fn order_for(m: usize) -> u32 {
    match m {
        1 => 5,
        2 => 4,
        _ => 3,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn atoms_round_trip(a in measure()) {
        let m = a[0].0.len();
        let k = order_for(m);
        let l = MomentFunctional::from_atoms(m, k, &a).unwrap();
        let cert = flat_truncation_check(&l, k, 1, 1, DEFAULT_RANK_TOL);
        prop_assert!(cert.is_some(), "flat truncation failed");
        let cert = cert.unwrap();
        prop_assert_eq!(cert.rank_high, a.len());
        let got = extract_atoms(&l, &cert, &ExtractOptions::default()).unwrap();
        prop_assert_eq!(got.len(), a.len());
        // Hausdorff distance and matched weights
        for (p, w) in &a {
            let best = got
                .iter()
                .min_by(|x, y| dist(&x.point, p).total_cmp(&dist(&y.point, p)))
                .unwrap();
            prop_assert!(dist(&best.point, p) <= 1e-6, "atom {:?} vs {:?}", best.point, p);
            prop_assert!((best.weight - w).abs() <= 1e-6);
        }
        for g in &got {
            prop_assert!(a.iter().any(|(p, _)| dist(&g.point, p) <= 1e-6));
        }
        prop_assert!(reconstruction_error(&l, &got, 2 * k) <= 1e-6);
    }

    #[test]
    fn rank_one_point_is_the_atom(p in prop::collection::vec(-1.0f64..1.0, 2), w in 0.1f64..3.0) {
        let l = MomentFunctional::from_atoms(2, 3, &[(p.clone(), w)]).unwrap();
        let cert = flat_truncation_check(&l, 3, 1, 1, DEFAULT_RANK_TOL).unwrap();
        prop_assert_eq!(cert.rank_high, 1);
        let atoms = extract_atoms(&l, &cert, &ExtractOptions::default()).unwrap();
        let q = point_from_functional(&l).unwrap();
        prop_assert!(dist(&q, &atoms[0].point) <= 1e-6);
    }

    #[test]
    fn rank_is_rotation_invariant(
        vs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 1..=5),
        q in prop::collection::vec(-1.0f64..1.0, 25),
    ) {
        let n = 5;
        let mut a = DMatrix::zeros(n, n);
        for v in &vs {
            let v = nalgebra::DVector::from_vec(v.clone());
            a += &v * v.transpose();
        }
        let rot = DMatrix::from_vec(n, n, q).qr().q();
        let b = &rot * &a * rot.transpose();
        prop_assert_eq!(numeric_rank(&a, DEFAULT_RANK_TOL).0, numeric_rank(&b, DEFAULT_RANK_TOL).0);
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
