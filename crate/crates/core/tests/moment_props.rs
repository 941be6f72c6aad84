use fsipp_core::certify::cone_membership;
use fsipp_core::moment::{
    dual_cone_min_eig, moment_matrix, poly_image_in_y, ConeSpec, MomentFunctional, MonomialBasis,
};
use fsipp_core::poly::{BivariatePoly, Polynomial};
use fsipp_sdp::SolverOptions;
use proptest::prelude::*;

fn atoms(n: usize, max: usize) -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    prop::collection::vec((prop::collection::vec(-1.0f64..1.0, n), 0.05f64..1.0), 1..=max).prop_map(|mut a| {
        let s: f64 = a.iter().map(|(_, w)| w).sum();
        for (_, w) in a.iter_mut() {
            *w /= s;
        }
        a
    })
}

fn poly_of_degree(n: usize, d: u32) -> impl Strategy<Value = Polynomial> {
    let monos: Vec<Vec<u32>> = MonomialBasis::new(n, d)
        .monomials()
        .iter()
        .map(|m| m.exponents().to_vec())
        .collect();
    prop::collection::vec(-1.0f64..1.0, monos.len())
        .prop_map(move |c| Polynomial::from_terms(n, monos.iter().cloned().zip(c)).unwrap())
}

fn affine(n: usize) -> impl Strategy<Value = Polynomial> {
    poly_of_degree(n, 1)
}

/// `sum (a.x + b)^2 + sum (c.x + e)^4`, s.o.s-convex by construction.
fn sos_convex(n: usize) -> impl Strategy<Value = Polynomial> {
    (prop::collection::vec(affine(n), 1..3), prop::collection::vec(affine(n), 1..3)).prop_map(move |(sq, qu)| {
        let mut h = Polynomial::zero(n);
        for a in &sq {
            h = &h + &a.pow(2);
        }
        for c in &qu {
            h = &h + &c.pow(4);
        }
        h
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn atomic_moment_matrices_are_psd(a in (1usize..4).prop_flat_map(|n| atoms(n, 3)), k in 1u32..4) {
        let n = a[0].0.len();
        let l = MomentFunctional::from_atoms(n, k, &a).unwrap();
        for kk in 0..=k {
            let m = moment_matrix(&l, kk).unwrap();
            let e = m.symmetric_eigenvalues().min();
            prop_assert!(e >= -1e-9, "k = {kk}: min eigenvalue {e}");
        }
        let cone = ConeSpec::SosBounded { nvars: n, degree: 2 * k };
        prop_assert!(dual_cone_min_eig(&l, &cone).unwrap() >= -1e-9);
    }

    #[test]
    fn jensen_for_sos_convex(h in sos_convex(2), a in atoms(2, 3)) {
        let l = MomentFunctional::from_atoms(2, 2, &a).unwrap();
        let mean: Vec<f64> = (0..2).map(|i| l.apply(&Polynomial::var(2, i)).unwrap()).collect();
        prop_assert!(l.apply(&h).unwrap() >= h.eval(&mean).unwrap() - 1e-8);
    }

    #[test]
    fn image_in_y_is_linear(
        joint in poly_of_degree(3, 3),
        v1 in prop::collection::vec(-1.0f64..1.0, 10),
        v2 in prop::collection::vec(-1.0f64..1.0, 10),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        // order-2 functionals in two variables carry the 15 moments of degree <= 4
        let p = BivariatePoly::from_joint(&joint, 2);
        let lim = |v: &[f64]| MomentFunctional::new(2, 2, v.iter().copied().chain(std::iter::repeat(0.3)).take(15).collect()).unwrap();
        let (l1, l2) = (lim(&v1), lim(&v2));
        let comb = MomentFunctional::new(
            2,
            2,
            l1.values().iter().zip(l2.values()).map(|(x, y)| a * x + b * y).collect(),
        )
        .unwrap();
        let lhs = poly_image_in_y(&comb, &p).unwrap();
        let rhs = &poly_image_in_y(&l1, &p).unwrap().scale(a) + &poly_image_in_y(&l2, &p).unwrap().scale(b);
        let diff = &lhs - &rhs;
        prop_assert!(diff.terms().all(|(_, c)| c.abs() <= 1e-10 * (1.0 + lhs.coeff_norm())));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn explicit_sums_of_squares_are_members(hs in prop::collection::vec(poly_of_degree(2, 2), 1..4)) {
        let mut p = Polynomial::zero(2);
        for h in &hs {
            p = &p + &h.pow(2);
        }
        let cone = ConeSpec::SosBounded { nvars: 2, degree: 4 };
        prop_assert!(cone_membership(&p, &cone, &SolverOptions::default()).unwrap());
    }
}
