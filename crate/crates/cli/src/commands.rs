//! The four commands, independent of argument parsing and file output.

use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use fsipp_core::certify::{stop_criterion, StopOptions, Verdict};
use fsipp_core::error::FsippError;
use fsipp_core::multiobj::{
    efficiency_audit, epsilon_constraint_solve, grid_points, scalarize, BoundingBox, EpsOptions, SampledFeasibility,
};
use fsipp_core::relax::{
    choose_r_gstar, classify_case, solve_hierarchy, CaseTag, FsippProblem, HierarchyTrace, IndexSetDesc, RelaxOptions,
    StopReason,
};
use sha2::{Digest, Sha256};

use crate::problem::{parse_problem, ProblemFile};
use crate::report::{FindingJson, KktJson, ParetoJson, RankJson, RunReport, TraceRow, VerdictJson};

/// Command-line overrides of the file's options.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub k_min: Option<u32>,
    pub k_max: Option<u32>,
    pub tau: Option<f64>,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub bbox: Option<BoundingBox>,
}

pub const DEFAULT_K_MAX: u32 = 6;
pub const DEFAULT_GRID: usize = 200;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses a problem file, turning schema errors into `anyhow` errors.
pub fn load(text: &str) -> Result<ProblemFile> {
    parse_problem(text).map_err(|e| anyhow!(e))
}

fn tau_of(file: &ProblemFile, ov: &Overrides) -> f64 {
    ov.tau.or(file.options.tau).unwrap_or(RelaxOptions::default().tau)
}

fn base_options(file: &ProblemFile, ov: &Overrides) -> RelaxOptions {
    let mut o = RelaxOptions {
        tau: tau_of(file, ov),
        ..RelaxOptions::default()
    };
    if let Some(t) = ov.tol {
        o.sdp.tol = t;
    }
    o
}

fn stop_options(opts: &RelaxOptions) -> StopOptions {
    StopOptions {
        tau: opts.tau,
        sdp: opts.sdp,
        rank_tol: opts.rank_tol,
        ..StopOptions::default()
    }
}

/// Lines printed by `classify`; the first is the case tag.
pub fn classify(text: &str) -> Result<Vec<String>> {
    let file = load(text)?;
    if file.is_multi() {
        bail!("classify expects a single objective");
    }
    let prob = file.to_problem()?;
    let c = classify_case(&prob)?;
    let mut lines = vec![c.tag.to_string()];
    for f in &c.findings {
        let v = if f.sos_convex { "s.o.s-convex" } else { "not certified s.o.s-convex" };
        lines.push(format!("{}: {v}", f.name));
    }
    if let Some(t) = file.case_override() {
        lines.push(format!("override: {t}"));
    }
    if let IndexSetDesc::Semialgebraic { archimedean_hint, .. } = &prob.index_set {
        match archimedean_hint {
            Some(m) => lines.push(format!("note: Archimedean hint {m} - |y|^2 >= 0 is appended to Y")),
            None => lines.push(
                "note: no Archimedean hint; the quadratic module of Y is assumed Archimedean (set options.archimedean_hint)"
                    .into(),
            ),
        }
    }
    Ok(lines)
}

fn tag_for(file: &ProblemFile, prob: &FsippProblem, report: &mut RunReport) -> Result<CaseTag> {
    let c = classify_case(prob)?;
    report.findings = c
        .findings
        .iter()
        .map(|f| FindingJson {
            name: f.name.clone(),
            sos_convex: f.sos_convex,
        })
        .collect();
    Ok(file.case_override().unwrap_or(c.tag))
}

/// Fills `R` and `g*` from the file, falling back to the selection recipes.
fn radius_and_gstar(file: &ProblemFile, prob: &FsippProblem, tag: CaseTag, opts: &mut RelaxOptions, report: &mut RunReport) -> Result<()> {
    let needs_r = matches!(tag, CaseTag::Case3 | CaseTag::Case4 | CaseTag::General);
    let needs_g = tag == CaseTag::General;
    let (r, g) = (file.options.radius, file.options.g_star);
    if (needs_r && r.is_none()) || (needs_g && g.is_none()) {
        let choice = choose_r_gstar(prob, &file.hints(), opts)?;
        report.auxiliary = choice.auxiliary.clone();
        opts.radius = r.unwrap_or(choice.radius);
        opts.g_star = g.unwrap_or(choice.g_star);
    } else {
        opts.radius = r.unwrap_or(opts.radius);
        opts.g_star = g.unwrap_or(opts.g_star);
    }
    if needs_r {
        report.radius = Some(opts.radius);
    }
    if needs_g {
        report.g_star = Some(opts.g_star);
    }
    Ok(())
}

fn record_trace(report: &mut RunReport, trace: &HierarchyTrace) {
    report.trace = trace.records.iter().map(TraceRow::from).collect();
    report.stopped = Some(format!("{:?}", trace.stopped));
    report.order_errors = trace.errors.iter().map(|(k, e)| format!("k = {k}: {e}")).collect();
    report.solver.sdp_solves += 2 * trace.records.len();
    report.solver.iterations += trace.records.iter().map(|r| r.iterations.0 + r.iterations.1).sum::<usize>();
}

/// Runs the hierarchy and certifies its last candidate.
pub fn solve(text: &str, ov: &Overrides) -> Result<RunReport> {
    let start = Instant::now();
    let file = load(text)?;
    let prob = file.to_problem()?;
    let mut report = RunReport::new("solve", sha256_hex(text.as_bytes()));
    let tag = tag_for(&file, &prob, &mut report)?;
    report.case_tag = Some(tag.to_string());
    let mut opts = base_options(&file, ov);
    radius_and_gstar(&file, &prob, tag, &mut opts, &mut report)?;
    let k_min = ov.k_min.or(file.options.k_min).unwrap_or_else(|| prob.min_order());
    let k_max = ov.k_max.or(file.options.k_max).unwrap_or(DEFAULT_K_MAX).max(k_min);
    let trace = solve_hierarchy(&prob, &opts, k_min, k_max, tag)?;
    record_trace(&mut report, &trace);

    if !trace.records.is_empty() && trace.records.iter().all(|r| r.r_dual == f64::INFINITY) {
        report.verdict = VerdictJson::Infeasible;
        report.message = Some("every moment relaxation is infeasible, so the feasible set is empty".into());
        report.timing_seconds = start.elapsed().as_secs_f64();
        return Ok(report);
    }
    let Some(rec) = trace.records.iter().rev().find(|r| r.point.is_some()) else {
        report.verdict = VerdictJson::Inconclusive;
        report.message = Some("no order produced a candidate".into());
        report.timing_seconds = start.elapsed().as_secs_f64();
        return Ok(report);
    };
    let candidate = if rec.atoms.len() == 1 {
        rec.atoms[0].point.clone()
    } else {
        rec.point.clone().expect("filtered above")
    };
    report.candidate = Some(candidate.clone());
    report.atoms = rec.atoms.iter().map(Into::into).collect();
    report.rank = rec.rank.as_ref().map(RankJson::from);
    let kkt = match &rec.kkt {
        Some(k) => Some(k.clone()),
        None => match stop_criterion(&candidate, &prob, &stop_options(&opts)) {
            Ok(k) => Some(k),
            Err(e) => {
                report.order_errors.push(format!("stop criterion: {e}"));
                None
            }
        },
    };
    report.kkt = kkt.as_ref().map(KktJson::from);
    let rank_ok = rec.rank.as_ref().is_some_and(|c| c.passed) && !rec.atoms.is_empty();
    let kkt_ok = kkt.as_ref().is_some_and(|k| k.passed());
    report.verdict = if rank_ok || kkt_ok {
        VerdictJson::Certified
    } else {
        VerdictJson::Inconclusive
    };
    report.message = Some(match (rank_ok, kkt_ok, trace.stopped) {
        (true, _, _) => "flat truncation certificate with extracted minimizers".into(),
        (false, true, _) => "feasible within tau and KKT residual within tau".into(),
        (false, false, StopReason::Exhausted) => "order budget exhausted without a certificate".into(),
        _ => "no certificate for the candidate".into(),
    });
    report.timing_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Feasibility and KKT test of a user point.
pub fn certify(text: &str, point: &[f64], ov: &Overrides) -> Result<RunReport> {
    let start = Instant::now();
    let file = load(text)?;
    let prob = file.to_problem()?;
    if point.len() != prob.nvars() {
        bail!("point has {} coordinates, expected {}", point.len(), prob.nvars());
    }
    let mut report = RunReport::new("certify", sha256_hex(text.as_bytes()));
    let opts = base_options(&file, ov);
    let k = stop_criterion(point, &prob, &stop_options(&opts))?;
    report.candidate = Some(point.to_vec());
    report.kkt = Some(KktJson::from(&k));
    report.verdict = k.verdict().into();
    report.message = Some(
        match k.verdict() {
            Verdict::Certified => "feasible within tau and KKT residual within tau",
            Verdict::Inconclusive if !k.lower_certified => "lower-level value not certified",
            Verdict::Inconclusive => "feasible but the KKT residual exceeds tau",
            Verdict::Infeasible => "point violates the constraints by more than tau",
        }
        .into(),
    );
    report.timing_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Outcome of `pareto`: the report and the image-space grid rows.
pub struct ParetoOutput {
    pub report: RunReport,
    pub grid: Vec<GridRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub x: Vec<f64>,
    pub feasible: bool,
    pub values: Vec<f64>,
}

/// Writes grid rows as CSV: `x1..xm, feasible, F1..Ft`.
pub fn grid_csv<W: std::io::Write>(rows: &[GridRow], m: usize, t: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header = (1..=m)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("feasible".to_string()))
        .chain((1..=t).map(|i| format!("F{i}")));
    out.write_record(header)?;
    for r in rows {
        let rec = r
            .x
            .iter()
            .map(|v| v.to_string())
            .chain(std::iter::once(u8::from(r.feasible).to_string()))
            .chain(r.values.iter().map(|v| v.to_string()));
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes hierarchy rows as CSV.
pub fn trace_csv<W: std::io::Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "r_primal", "r_dual", "primal_status", "dual_status", "point", "rank_low", "rank_high", "flat", "atoms", "omega"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let opt_u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let point = r
            .point
            .as_ref()
            .map(|p| p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        out.write_record([
            r.k.to_string(),
            opt(r.r_primal),
            opt(r.r_dual),
            r.primal_status.clone(),
            r.dual_status.clone(),
            point,
            opt_u(r.rank_low),
            opt_u(r.rank_high),
            r.flat.to_string(),
            r.atoms.to_string(),
            opt(r.omega),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Epsilon-constraint run from `u0`, efficiency audit and image-space grid.
pub fn pareto(text: &str, u0: Option<&[f64]>, ov: &Overrides) -> Result<ParetoOutput> {
    let start = Instant::now();
    let file = load(text)?;
    let mprob = file.to_multi()?;
    let sha = sha256_hex(text.as_bytes());
    let u0 = u0
        .map(<[f64]>::to_vec)
        .or_else(|| file.u0.clone())
        .ok_or_else(|| anyhow!("pareto needs an initial point (--u0 or u0 in the file)"))?;
    if u0.len() != mprob.nvars() {
        bail!("u0 has {} coordinates, expected {}", u0.len(), mprob.nvars());
    }
    let bbox = ov.bbox.clone().or_else(|| file.bbox.clone());
    if let Some(b) = &bbox {
        if b.len() != mprob.nvars() {
            bail!("box has {} axes, expected {}", b.len(), mprob.nvars());
        }
    }
    let grid = ov.grid.unwrap_or(DEFAULT_GRID);
    let mut relax = base_options(&file, ov);
    relax.radius = file.options.radius.unwrap_or(relax.radius);
    relax.g_star = file.options.g_star.unwrap_or(relax.g_star);
    let opts = EpsOptions {
        relax: relax.clone(),
        k_min: ov.k_min.or(file.options.k_min).unwrap_or(1),
        k_max: ov.k_max.or(file.options.k_max).unwrap_or(DEFAULT_K_MAX),
        case_override: file.case_override(),
        ..EpsOptions::default()
    };
    let mut report = RunReport::new("pareto", sha);
    let eff = match epsilon_constraint_solve(&mprob, &u0, &opts) {
        Ok(r) => r,
        Err(FsippError::Infeasible(msg)) => {
            report.verdict = VerdictJson::Infeasible;
            report.message = Some(msg);
            report.timing_seconds = start.elapsed().as_secs_f64();
            return Ok(ParetoOutput { report, grid: Vec::new() });
        }
        Err(e) => return Err(e.into()),
    };
    report.solver.sdp_solves = 2 * eff.path.len();
    report.case_tag = eff.path.last().map(|s| s.tag.to_string());
    report.candidate = Some(eff.final_point.clone());

    // certify the last scalarized problem at the final point
    let last = eff.path.last().expect("at least one stage runs");
    let u_prev = if eff.path.len() > 1 {
        eff.path[eff.path.len() - 2].point.clone()
    } else {
        u0.clone()
    };
    let sub = scalarize(&mprob, last.index, &u_prev)?;
    let kkt = stop_criterion(&eff.final_point, &sub, &stop_options(&relax));
    match &kkt {
        Ok(k) => report.kkt = Some(KktJson::from(k)),
        Err(e) => report.order_errors.push(format!("stop criterion: {e}")),
    }
    let kkt_ok = kkt.as_ref().is_ok_and(|k| k.passed());

    let (audit, rows) = match &bbox {
        Some(b) => {
            let audit = efficiency_audit(&mprob, &eff.final_point, grid, b, &opts.lower)?;
            let sampled = SampledFeasibility::new(&mprob, 41)?;
            let rows = grid_points(b, grid)
                .into_iter()
                .map(|x| {
                    let feasible = sampled.feasible(&x, 0.0)?;
                    let values = mprob.values(&x)?;
                    Ok(GridRow { x, feasible, values })
                })
                .collect::<Result<Vec<_>>>()?;
            (Some(audit), rows)
        }
        None => (None, Vec::new()),
    };
    report.pareto = Some(ParetoJson::new(&u0, &eff, grid, audit));
    report.verdict = if (last.rank_one || kkt_ok) && audit != Some(false) {
        VerdictJson::Certified
    } else {
        VerdictJson::Inconclusive
    };
    report.message = Some(match (last.rank_one, kkt_ok, audit) {
        (_, _, Some(false)) => "a feasible grid point dominates the output".into(),
        (true, _, _) => "last stage has a rank-one flat certificate".into(),
        (false, true, _) => "last stage is feasible within tau with KKT residual within tau".into(),
        _ => "no certificate for the last stage".into(),
    });
    report.timing_seconds = start.elapsed().as_secs_f64();
    Ok(ParetoOutput { report, grid: rows })
}
