//! Run reports written by every command.

use fsipp_core::certify::{KktReport, Verdict};
use fsipp_core::extract::{Atom, RankCertificate};
use fsipp_core::multiobj::{EfficiencyReport, StopKind};
use fsipp_core::relax::OrderRecord;
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictJson {
    Certified,
    Inconclusive,
    Infeasible,
    Error,
}

impl VerdictJson {
    pub fn exit_code(self) -> i32 {
        match self {
            VerdictJson::Certified | VerdictJson::Inconclusive => 0,
            VerdictJson::Error => 1,
            VerdictJson::Infeasible => 2,
        }
    }
}

impl From<Verdict> for VerdictJson {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Certified => VerdictJson::Certified,
            Verdict::Inconclusive => VerdictJson::Inconclusive,
            Verdict::Infeasible => VerdictJson::Infeasible,
        }
    }
}

/// JSON has no infinities, so non-finite values become `null`.
fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: u32,
    pub r_primal: Option<f64>,
    pub r_dual: Option<f64>,
    pub primal_status: String,
    pub dual_status: String,
    pub point: Option<Vec<f64>>,
    pub rank_low: Option<usize>,
    pub rank_high: Option<usize>,
    pub flat: bool,
    pub atoms: usize,
    pub omega: Option<f64>,
    pub iterations_primal: usize,
    pub iterations_dual: usize,
}

impl From<&OrderRecord> for TraceRow {
    fn from(r: &OrderRecord) -> Self {
        TraceRow {
            k: r.k,
            r_primal: finite(r.r_primal),
            r_dual: finite(r.r_dual),
            primal_status: format!("{:?}", r.primal_status),
            dual_status: format!("{:?}", r.dual_status),
            point: r.point.clone(),
            rank_low: r.rank.as_ref().map(|c| c.rank_low),
            rank_high: r.rank.as_ref().map(|c| c.rank_high),
            flat: r.rank.as_ref().is_some_and(|c| c.passed),
            atoms: r.atoms.len(),
            omega: r.kkt.as_ref().and_then(|k| finite(k.omega)),
            iterations_primal: r.iterations.0,
            iterations_dual: r.iterations.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankJson {
    pub k_prime: u32,
    pub k0: u32,
    pub rank_low: usize,
    pub rank_high: usize,
    pub passed: bool,
}

impl From<&RankCertificate> for RankJson {
    fn from(c: &RankCertificate) -> Self {
        RankJson {
            k_prime: c.k_prime,
            k0: c.k0,
            rank_low: c.rank_low,
            rank_high: c.rank_high,
            passed: c.passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub point: Vec<f64>,
    pub weight: f64,
}

impl From<&Atom> for AtomJson {
    fn from(a: &Atom) -> Self {
        AtomJson {
            point: a.point.clone(),
            weight: a.weight,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktJson {
    pub point: Vec<f64>,
    pub p_star: Option<f64>,
    pub lambda: Vec<Vec<f64>>,
    pub j: Vec<usize>,
    pub omega: Option<f64>,
    pub gammas: Vec<f64>,
    pub etas: Vec<f64>,
    pub margin: Option<f64>,
    pub feasible_within_tau: bool,
    pub tau: f64,
    pub lower_certified: bool,
    pub lower_order: u32,
    pub verdict: VerdictJson,
}

impl From<&KktReport> for KktJson {
    fn from(r: &KktReport) -> Self {
        KktJson {
            point: r.point.clone(),
            p_star: finite(r.p_star),
            lambda: r.lambda.clone(),
            j: r.j.clone(),
            omega: finite(r.omega),
            gammas: r.gammas.clone(),
            etas: r.etas.clone(),
            margin: finite(r.margin),
            feasible_within_tau: r.feasible_within_tau,
            tau: r.tau,
            lower_certified: r.lower_certified,
            lower_order: r.lower_order,
            verdict: r.verdict().into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageJson {
    pub objective: usize,
    pub case_tag: String,
    pub point: Vec<f64>,
    pub value: f64,
    pub order: u32,
    pub rank_one: bool,
    pub hessian_pd: Option<bool>,
    pub margin: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoJson {
    pub u0: Vec<f64>,
    pub stages: Vec<StageJson>,
    pub final_point: Vec<f64>,
    pub stopped_by: String,
    pub objective_vector: Vec<f64>,
    pub audit_grid: usize,
    pub audit_passed: Option<bool>,
}

impl ParetoJson {
    pub fn new(u0: &[f64], r: &EfficiencyReport, audit_grid: usize, audit_passed: Option<bool>) -> Self {
        ParetoJson {
            u0: u0.to_vec(),
            stages: r
                .path
                .iter()
                .map(|s| StageJson {
                    objective: s.index + 1,
                    case_tag: s.tag.to_string(),
                    point: s.point.clone(),
                    value: s.value,
                    order: s.order,
                    rank_one: s.rank_one,
                    hessian_pd: s.hessian_pd,
                    margin: finite(s.margin),
                })
                .collect(),
            final_point: r.final_point.clone(),
            stopped_by: match r.stopped_by {
                StopKind::Uniqueness => "uniqueness".into(),
                StopKind::ExhaustedT => "all_objectives".into(),
            },
            objective_vector: r.objective_vector.clone(),
            audit_grid,
            audit_passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FindingJson {
    pub name: String,
    pub sos_convex: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub sdp_solves: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub problem_sha256: String,
    pub case_tag: Option<String>,
    pub findings: Vec<FindingJson>,
    pub radius: Option<f64>,
    pub g_star: Option<f64>,
    pub auxiliary: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub stopped: Option<String>,
    pub order_errors: Vec<String>,
    pub candidate: Option<Vec<f64>>,
    pub atoms: Vec<AtomJson>,
    pub rank: Option<RankJson>,
    pub kkt: Option<KktJson>,
    pub pareto: Option<ParetoJson>,
    pub timing_seconds: f64,
    pub solver: SolverStats,
    pub verdict: VerdictJson,
    pub message: Option<String>,
}

impl RunReport {
    pub fn new(command: &str, problem_sha256: String) -> Self {
        RunReport {
            command: command.into(),
            problem_sha256,
            case_tag: None,
            findings: Vec::new(),
            radius: None,
            g_star: None,
            auxiliary: Vec::new(),
            trace: Vec::new(),
            stopped: None,
            order_errors: Vec::new(),
            candidate: None,
            atoms: Vec::new(),
            rank: None,
            kkt: None,
            pareto: None,
            timing_seconds: 0.0,
            solver: SolverStats::default(),
            verdict: VerdictJson::Error,
            message: None,
        }
    }

    pub fn error(command: &str, problem_sha256: String, message: String) -> Self {
        RunReport {
            message: Some(message),
            ..RunReport::new(command, problem_sha256)
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
