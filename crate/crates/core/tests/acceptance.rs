//! One PASS/FAIL line per acceptance criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};

use common::{opts, planted_instance};
use fsipp_core::certify::{cone_membership, nnls, sos_convexity_check, stop_criterion, StopOptions, Verdict};
use fsipp_core::extract::{extract_atoms, flat_truncation_check, ExtractOptions, DEFAULT_RANK_TOL};
use fsipp_core::fixtures;
use fsipp_core::moment::{ConeSpec, MomentFunctional};
use fsipp_core::multiobj::{efficiency_audit, epsilon_constraint_solve, EpsOptions, StopKind};
use fsipp_core::poly::Polynomial;
use fsipp_core::relax::{classify_case, solve_order, CaseTag, FsippProblem};
use fsipp_sdp::SolverOptions;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn single_order(prob: &FsippProblem, u_star: [f64; 2], r_star: f64) -> Outcome {
    let tag = classify_case(prob).map_err(|e| e.to_string())?.tag;
    let rec = solve_order(prob, &opts(prob.d()), tag).map_err(|e| e.to_string())?;
    let u = rec.point.ok_or("no point")?;
    let r = prob.objective(&u).map_err(|e| e.to_string())?;
    ensure(dist(&u, &u_star) <= 1e-3, || format!("point {u:?}"))?;
    ensure((rec.r_dual - r_star).abs() <= 1e-3, || format!("r_dual {}", rec.r_dual))?;
    ensure((r - r_star).abs() <= 1e-3, || format!("f/g at point {r}"))
}

fn criterion1() -> Outcome {
    single_order(&fixtures::case1(), [-0.5, -0.5], 0.25)
}

fn criterion2() -> Outcome {
    // f/g at (0.5, 0.5) = (0.25 - 1 + 0.25 - 1 + 2) / 1
    single_order(&fixtures::case2(), [0.5, 0.5], 0.5)
}

fn rank_one_at_four(prob: &FsippProblem, tag: CaseTag, atom: [f64; 2]) -> Result<f64, String> {
    let rec = solve_order(prob, &opts(4), tag).map_err(|e| e.to_string())?;
    ensure(rec.rank_one(), || format!("rank certificate {:?}", rec.rank))?;
    ensure(rec.atoms.len() == 1, || format!("{} atoms", rec.atoms.len()))?;
    let a = &rec.atoms[0].point;
    ensure(dist(a, &atom) <= 2e-3, || format!("atom {a:?}"))?;
    Ok(rec.r_dual)
}

fn criterion3() -> Outcome {
    let r = rank_one_at_four(&fixtures::case3(), CaseTag::Case3, [0.9044, 0.8460])?;
    ensure((r + 0.8745).abs() <= 2e-3, || format!("r_dual {r}"))
}

fn criterion4() -> Outcome {
    rank_one_at_four(&fixtures::case4(), CaseTag::Case4, [0.7211, 0.6912]).map(|_| ())
}

fn criterion5() -> Outcome {
    let prob = fixtures::general();
    let rec = solve_order(&prob, &opts(4), CaseTag::General).map_err(|e| e.to_string())?;
    ensure((rec.r_dual - 0.0274).abs() <= 2e-3, || format!("r_dual {}", rec.r_dual))?;
    let u = rec.point.ok_or("no candidate")?;
    ensure(dist(&u, &[0.7377, 0.6033]) <= 2e-3, || format!("candidate {u:?}"))?;
    let rep = stop_criterion(&[0.7377, 0.6033], &prob, &StopOptions::default()).map_err(|e| e.to_string())?;
    ensure((rep.p_star - 6.7654e-5).abs() <= 5e-4, || format!("p* {}", rep.p_star))?;
    ensure(
        rep.lambda.len() == 1 && dist(&rep.lambda[0], &[0.775, 0.6315]) <= 2e-3,
        || format!("lambda {:?}", rep.lambda),
    )?;
    ensure(rep.omega <= 1e-4, || format!("omega {}", rep.omega))?;
    ensure(rep.verdict() == Verdict::Certified, || format!("verdict {:?}", rep.verdict()))
}

fn criterion6() -> Outcome {
    let probs = [
        fixtures::multi_case_i(),
        fixtures::multi_case_ii(),
        fixtures::multi_case_iii(),
        fixtures::multi_case_iv(),
    ];
    let targets = [[-0.2138, 0.8319], [0.6822, -0.1476], [0.0, -0.1623], [0.1231, 0.0]];
    let boxes = fixtures::multi_boxes();
    for c in 0..4 {
        let o = match c {
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
        };
        let rep = epsilon_constraint_solve(&probs[c], &fixtures::MULTI_STARTS[c], &o).map_err(|e| e.to_string())?;
        let u = &rep.final_point;
        ensure(dist(u, &targets[c]) <= 5e-3, || format!("case {}: point {u:?}", c + 1))?;
        if c >= 2 {
            ensure(rep.stopped_by == StopKind::Uniqueness && rep.path.len() == 1, || {
                format!("case {}: {} stages, {:?}", c + 1, rep.path.len(), rep.stopped_by)
            })?;
        }
        let ok = efficiency_audit(&probs[c], u, 200, &boxes[c], &o.lower).map_err(|e| e.to_string())?;
        ensure(ok, || format!("case {}: audit found a dominating point", c + 1))?;
    }
    Ok(())
}

fn sandwich(name: &str, prob: &FsippProblem, tag: CaseTag, orders: &[u32], r_star: f64) -> Outcome {
    let mut prev = f64::INFINITY;
    for &k in orders {
        let rec = solve_order(prob, &opts(k), tag).map_err(|e| e.to_string())?;
        let (rp, rd) = (rec.r_primal, rec.r_dual);
        ensure(rp <= rd + 1e-6 * (1.0 + rd.abs()), || format!("{name} k={k}: primal {rp} > dual {rd}"))?;
        ensure(rd <= r_star + 1e-3, || format!("{name} k={k}: dual {rd} > r* {r_star}"))?;
        ensure(rd <= prev + 1e-6, || format!("{name} k={k}: dual rose from {prev} to {rd}"))?;
        prev = rd;
    }
    Ok(())
}

fn criterion7() -> Outcome {
    let at = |p: &FsippProblem, u: [f64; 2]| p.objective(&u).unwrap();
    let (c3, c4, g) = (fixtures::case3(), fixtures::case4(), fixtures::general());
    let (r3, r4, rg) = (at(&c3, [0.9044, 0.8460]), at(&c4, [0.7211, 0.6912]), at(&g, [0.7377, 0.6033]));
    let (c1, c2) = (fixtures::case1(), fixtures::case2());
    sandwich("case1", &c1, CaseTag::Case1, &[c1.d()], 0.25)?;
    sandwich("case2", &c2, CaseTag::Case2, &[c2.d()], 0.5)?;
    sandwich("case3", &c3, CaseTag::Case3, &[4, 5], r3)?;
    sandwich("case4", &c4, CaseTag::Case4, &[4, 5], r4)?;
    sandwich("general", &g, CaseTag::General, &[4, 5], rg)?;
    let (planted, r_planted, _) = planted_instance(&mut ChaCha8Rng::seed_from_u64(1));
    sandwich("planted", &planted, CaseTag::Case1, &[planted.d()], r_planted)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..20 {
        let (prob, r_star, _) = planted_instance(&mut rng);
        sandwich(&format!("quadratic {i}"), &prob, CaseTag::Case1, &[prob.d()], r_star)?;
    }
    Ok(())
}

fn criterion8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut done = 0;
    while done < 50 {
        let m = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=4);
        let atoms: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|_| ((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(0.1..1.0)))
            .collect();
        let sep = atoms
            .iter()
            .enumerate()
            .all(|(i, a)| atoms[..i].iter().all(|b| dist(&a.0, &b.0) >= 0.25));
        if !sep {
            continue;
        }
        done += 1;
        let k = [5, 4, 3][m - 1];
        let l = MomentFunctional::from_atoms(m, k, &atoms).map_err(|e| e.to_string())?;
        let cert = flat_truncation_check(&l, k, 1, 1, DEFAULT_RANK_TOL).ok_or("flat truncation failed")?;
        let got = extract_atoms(&l, &cert, &ExtractOptions::default()).map_err(|e| e.to_string())?;
        ensure(got.len() == n, || format!("{} atoms recovered of {n}", got.len()))?;
        // compare the moments of the recovered measure with the input ones
        let rebuilt: Vec<(Vec<f64>, f64)> = got.iter().map(|a| (a.point.clone(), a.weight)).collect();
        let l2 = MomentFunctional::from_atoms(m, k, &rebuilt).map_err(|e| e.to_string())?;
        let err = l.values().iter().zip(l2.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-6, || format!("moment error {err:e}"))?;
        for (p, _) in &atoms {
            let d = got.iter().map(|a| dist(&a.point, p)).fold(f64::INFINITY, f64::min);
            ensure(d <= 1e-6, || format!("atom {p:?} missed by {d:e}"))?;
        }
    }
    Ok(())
}

fn exhaustive_nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let n = a.ncols();
    let mut best = b.norm_squared();
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
        let Ok(x) = sub.clone().svd(true, true).solve(b, 1e-14) else {
            continue;
        };
        if x.iter().all(|v| *v >= 0.0) {
            best = best.min((&sub * x - b).norm_squared());
        }
    }
    best
}

fn criterion9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..100 {
        let rows = rng.gen_range(2..=8);
        let cols = rng.gen_range(1..=7);
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-2.0..2.0));
        let b = DVector::from_fn(rows, |_, _| rng.gen_range(-2.0..2.0));
        let (_, r) = nnls(&a, &b).map_err(|e| format!("instance {i}: {e}"))?;
        let oracle = exhaustive_nnls(&a, &b);
        ensure((r - oracle).abs() <= 1e-9, || format!("instance {i}: {r} vs {oracle}"))?;
    }
    Ok(())
}

fn criterion10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..10 {
        // B'B + c plus a random affine part
        let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = |j| Polynomial::var(2, j);
        let l1 = &(&x(0) * b[0]) + &(&x(1) * b[1]);
        let l2 = &(&x(0) * b[2]) + &(&x(1) * b[3]);
        let lin = &(&x(0) * rng.gen_range(-3.0..3.0)) + &(&x(1) * rng.gen_range(-3.0..3.0));
        let q = &(&(&l1 * &l1) + &(&l2 * &l2)) + &lin;
        let ok = sos_convexity_check(&q).map_err(|e| e.to_string())?;
        ensure(ok, || format!("quadratic {i} rejected"))?;
    }
    let h2 = sos_convexity_check(&fixtures::h2()).map_err(|e| e.to_string())?;
    ensure(!h2, || "h2 reported s.o.s-convex".into())?;
    let sdp = SolverOptions::default();
    let h1 = cone_membership(&fixtures::h1(), &ConeSpec::SosBounded { nvars: 3, degree: 8 }, &sdp);
    ensure(h1.map_err(|e| e.to_string())?, || "h1 not SOS".into())?;
    let h2 = cone_membership(&fixtures::h2(), &ConeSpec::SosBounded { nvars: 2, degree: 6 }, &sdp);
    ensure(h2.map_err(|e| e.to_string())?, || "h2 not SOS".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("case 1 exactness", criterion1),
        ("case 2 exactness", criterion2),
        ("case 3 rank-one convergence at k = 4", criterion3),
        ("case 4 rank-one convergence at k = 4", criterion4),
        ("general hierarchy and stop criterion", criterion5),
        ("multi-objective efficient solutions", criterion6),
        ("sandwich and weak duality", criterion7),
        ("atom extraction oracle", criterion8),
        ("nnls oracle", criterion9),
        ("s.o.s-convexity discriminator", criterion10),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(()) => println!("criterion {:>2} PASS  {name}", i + 1),
            Err(e) => {
                println!("criterion {:>2} FAIL  {name}: {e}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
