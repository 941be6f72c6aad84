mod common;

use common::{opts, planted_instance};
use fsipp_core::certify::cone_membership;
use fsipp_core::fixtures;
use fsipp_core::moment::{dual_cone_min_eig, poly_image_in_y, MomentFunctional};
use fsipp_core::relax::{
    build_dual_sdp, build_primal_sdp, classify_case, solve_hierarchy, solve_order, x_cone, y_cone, CaseTag,
    FsippProblem, IndexSetDesc,
};
use fsipp_sdp::{Block, SdpProblem, SolverOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;


/// Each fixture with its tag and an upper bound on `r*` (the objective at a feasible point).
fn fixtures_with_bounds() -> Vec<(&'static str, FsippProblem, CaseTag, f64)> {
    let at = |p: &FsippProblem, u: [f64; 2]| p.objective(&u).unwrap();
    let (c3, c4, g) = (fixtures::case3(), fixtures::case4(), fixtures::general());
    let r3 = at(&c3, [0.9044, 0.8460]);
    let r4 = at(&c4, [0.7211, 0.6912]);
    let rg = at(&g, [0.7377, 0.6033]);
    let planted = planted_instance(&mut ChaCha8Rng::seed_from_u64(1));
    vec![
        ("case1", fixtures::case1(), CaseTag::Case1, 0.25),
        ("case2", fixtures::case2(), CaseTag::Case2, 0.5),
        ("case3", c3, CaseTag::Case3, r3),
        ("case4", c4, CaseTag::Case4, r4),
        ("general", g, CaseTag::General, rg),
        ("planted", planted.0, CaseTag::Case1, planted.1),
    ]
}

fn audit(sdp: &SdpProblem, gram_sizes: &[usize]) {
    let n = sdp.num_vars();
    for c in sdp.constraints() {
        assert!(c.terms.iter().all(|(i, _)| *i < n));
        assert!(c.rhs.is_finite());
    }
    assert_eq!(sdp.blocks().iter().map(Block::len).sum::<usize>(), n);
    let psd: Vec<usize> = sdp
        .blocks()
        .iter()
        .filter_map(|b| match b {
            Block::Psd(s) => Some(*s),
            _ => None,
        })
        .collect();
    for s in gram_sizes {
        assert!(psd.contains(s), "no PSD block of size {s} in {psd:?}");
    }
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn programs_are_well_formed() {
    for (name, prob, tag, _) in fixtures_with_bounds() {
        let k = if tag.single_order() { prob.d() } else { 4 };
        let o = opts(k);
        let dual = build_dual_sdp(&prob, &o, tag).unwrap();
        let primal = build_primal_sdp(&prob, &o, tag).unwrap();
        let m = prob.nvars();
        let kx = x_cone(&prob, &o, tag).dual_order() as usize;
        // the moment matrix of the x functional and the matching Gram block
        audit(&dual.sdp, &[binom(m + kx, kx)]);
        audit(&primal.sdp, &[binom(m + kx, kx)]);
        assert!(dual.sdp.objective().iter().all(|c| c.is_finite()), "{name}");
    }
}

fn scaled_dirac(prob: &FsippProblem, u: &[f64], order: u32) -> MomentFunctional {
    let gu = prob.g.eval(u).unwrap();
    MomentFunctional::from_atoms(prob.nvars(), order, &[(u.to_vec(), 1.0 / gu)]).unwrap()
}

fn strictly_feasible_points(prob: &FsippProblem, radius: f64) -> Vec<[f64; 2]> {
    let ys = match &prob.index_set {
        IndexSetDesc::Interval => (0..=400).map(|i| vec![-1.0 + i as f64 / 200.0]).collect::<Vec<_>>(),
        _ => {
            let mut v = Vec::new();
            for i in 0..=30 {
                for j in 0..=30 {
                    let y = vec![-1.0 + i as f64 / 15.0, -1.0 + j as f64 / 15.0];
                    if y[0] * y[0] + y[1] * y[1] <= 1.0 {
                        v.push(y);
                    }
                }
            }
            v
        }
    };
    let mut out = Vec::new();
    for i in 0..17 {
        for j in 0..17 {
            let u = [-1.6 + 0.2 * i as f64, -1.6 + 0.2 * j as f64];
            if u[0] * u[0] + u[1] * u[1] > radius * radius || prob.g.eval(&u).unwrap() <= 0.1 {
                continue;
            }
            let q = prob.p.substitute_x(&u).unwrap();
            let worst = ys.iter().map(|y| q.eval(y).unwrap()).fold(f64::NEG_INFINITY, f64::max);
            let psi = prob.psis.iter().map(|s| s.eval(&u).unwrap()).fold(f64::NEG_INFINITY, f64::max);
            if worst < -0.02 && psi < -0.02 {
                out.push(u);
            }
        }
    }
    out
}

#[test]
fn scaled_dirac_is_dual_feasible() {
    let sdp = SolverOptions::default();
    for (name, prob, tag) in [
        ("case1", fixtures::case1(), CaseTag::Case1),
        ("case2", fixtures::case2(), CaseTag::Case2),
        ("case3", fixtures::case3(), CaseTag::Case3),
        ("case4", fixtures::case4(), CaseTag::Case4),
    ] {
        let k = if tag.single_order() { prob.d() } else { 4 };
        let o = opts(k);
        let xc = x_cone(&prob, &o, tag);
        let yc = y_cone(&prob, &o, tag);
        let pts = strictly_feasible_points(&prob, o.radius);
        assert!(!pts.is_empty(), "{name}");
        for u in pts.iter().take(4) {
            let l = scaled_dirac(&prob, u, xc.dual_order());
            assert!((l.apply(&prob.g).unwrap() - 1.0).abs() < 1e-9);
            assert!(dual_cone_min_eig(&l, &xc).unwrap() >= -1e-8, "{name} at {u:?}");
            for psi in &prob.psis {
                assert!(l.apply(psi).unwrap() <= 1e-12);
            }
            let image = -poly_image_in_y(&l, &prob.p).unwrap();
            assert!(cone_membership(&image, &yc, &sdp).unwrap(), "{name} at {u:?}");
            assert!((l.apply(&prob.f).unwrap() - prob.objective(u).unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn relaxation_values_are_sandwiched() {
    for (name, prob, tag, r_star) in fixtures_with_bounds() {
        let orders: Vec<u32> = if tag.single_order() { vec![prob.d()] } else { (4..=5).collect() };
        let mut prev = f64::INFINITY;
        for k in orders {
            let rec = solve_order(&prob, &opts(k), tag).unwrap();
            let (rp, rd) = (rec.r_primal, rec.r_dual);
            assert!(rp <= rd + 1e-6 * (1.0 + rd.abs()), "{name} k={k}: primal {rp} above dual {rd}");
            assert!(rd <= r_star + 1e-3, "{name} k={k}: dual {rd} above r* bound {r_star}");
            assert!(rd <= prev + 1e-6, "{name} k={k}: dual {rd} increased from {prev}");
            prev = rd;
        }
    }
}

#[test]
fn planted_quadratics_are_solved_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..20 {
        let (prob, r_star, xs) = planted_instance(&mut rng);
        let tag = classify_case(&prob).unwrap().tag;
        assert_eq!(tag, CaseTag::Case1, "instance {i}");
        let trace = solve_hierarchy(&prob, &opts(1), 1, 1, tag).unwrap();
        let rec = trace.last().unwrap();
        assert!(rec.r_primal <= rec.r_dual + 1e-6 * (1.0 + rec.r_dual.abs()), "instance {i}");
        assert!(rec.r_dual <= r_star + 1e-3, "instance {i}: {} vs {r_star}", rec.r_dual);
        assert!((rec.r_dual - r_star).abs() <= 5e-4, "instance {i}: {} vs {r_star}", rec.r_dual);
        let u = rec.point.as_ref().unwrap();
        assert!((u[0] - xs[0]).hypot(u[1] - xs[1]) <= 1e-3, "instance {i}: {u:?} vs {xs:?}");
    }
}

#[test]
fn special_cases_recover_the_minimizer() {
    for (prob, u_star, r_star) in [
        (fixtures::case1(), [-0.5, -0.5], 0.25),
        (fixtures::case2(), [0.5, 0.5], 0.5),
    ] {
        let tag = classify_case(&prob).unwrap().tag;
        let trace = solve_hierarchy(&prob, &opts(1), 1, 1, tag).unwrap();
        let rec = trace.last().unwrap();
        let u = rec.point.as_ref().unwrap();
        assert!((rec.r_dual - r_star).abs() <= 5e-4);
        assert!((u[0] - u_star[0]).hypot(u[1] - u_star[1]) <= 1e-3);
    }
}
