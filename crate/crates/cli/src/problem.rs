//! Problem files: JSON schema validation and conversion into core problems.

use std::fmt;

use fsipp_core::multiobj::{BoundingBox, MultiFsippProblem};
use fsipp_core::poly::{BivariatePoly, Monomial, Polynomial};
use fsipp_core::relax::{CaseTag, FsippProblem, Hints, IndexSetDesc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROBLEM_SCHEMA: &str = include_str!("../schemas/problem.schema.json");

/// `[[exponents, coefficient], ...]`, the term list of a `Polynomial`.
pub type PolyJson = Vec<(Vec<u32>, f64)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub f: PolyJson,
    pub g: PolyJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub y: Vec<u32>,
    pub x: PolyJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexSetJson {
    Interval,
    Quadratic {
        phi: PolyJson,
        interior_point: Vec<f64>,
    },
    Semialgebraic {
        ineqs: Vec<PolyJson>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        eqs: Vec<PolyJson>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptionsJson {
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_override: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archimedean_hint: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HintsJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub vars_x: usize,
    pub vars_y: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objectives: Option<Vec<Ratio>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub psis: Vec<PolyJson>,
    pub p: Vec<Slice>,
    pub index_set: IndexSetJson,
    #[serde(default, skip_serializing_if = "is_default")]
    pub options: OptionsJson,
    #[serde(default, skip_serializing_if = "is_default")]
    pub hints: HintsJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<f64>>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
}

fn is_default<T: Default + PartialEq>(t: &T) -> bool {
    *t == T::default()
}

/// A problem file error located by a JSON pointer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "schema error at {at}: {}", self.message)
    }
}

impl std::error::Error for SchemaError {}

fn err(pointer: impl Into<String>, message: impl Into<String>) -> SchemaError {
    SchemaError {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// Validates `value` against the problem schema; the first error wins.
pub fn validate_value(value: &Value) -> Result<(), SchemaError> {
    let schema: Value = serde_json::from_str(PROBLEM_SCHEMA).expect("bundled schema is valid JSON");
    crate::schema::validate(&schema, value)
}

/// Parses and validates a problem file.
pub fn parse_problem(text: &str) -> Result<ProblemFile, SchemaError> {
    let value: Value = serde_json::from_str(text).map_err(|e| err("", format!("line {}: {e}", e.line())))?;
    validate_value(&value)?;
    let file: ProblemFile = serde_json::from_value(value).map_err(|e| err("", e.to_string()))?;
    file.check()?;
    Ok(file)
}

fn check_poly(pointer: &str, p: &PolyJson, n: usize) -> Result<(), SchemaError> {
    for (i, (e, _)) in p.iter().enumerate() {
        if e.len() != n {
            return Err(err(
                format!("{pointer}/{i}/0"),
                format!("exponent vector has length {}, expected {n}", e.len()),
            ));
        }
    }
    Ok(())
}

fn check_len(pointer: &str, v: &[f64], n: usize) -> Result<(), SchemaError> {
    if v.len() != n {
        return Err(err(pointer, format!("vector has length {}, expected {n}", v.len())));
    }
    Ok(())
}

impl ProblemFile {
    /// Checks the constraints the schema cannot express.
    pub fn check(&self) -> Result<(), SchemaError> {
        let (m, n) = (self.vars_x, self.vars_y);
        match (&self.objective, &self.objectives) {
            (Some(r), None) => {
                check_poly("/objective/f", &r.f, m)?;
                check_poly("/objective/g", &r.g, m)?;
            }
            (None, Some(rs)) => {
                for (i, r) in rs.iter().enumerate() {
                    check_poly(&format!("/objectives/{i}/f"), &r.f, m)?;
                    check_poly(&format!("/objectives/{i}/g"), &r.g, m)?;
                }
            }
            _ => return Err(err("", "exactly one of objective and objectives must be present")),
        }
        for (i, p) in self.psis.iter().enumerate() {
            check_poly(&format!("/psis/{i}"), p, m)?;
        }
        for (i, s) in self.p.iter().enumerate() {
            if s.y.len() != n {
                return Err(err(
                    format!("/p/{i}/y"),
                    format!("exponent vector has length {}, expected {n}", s.y.len()),
                ));
            }
            check_poly(&format!("/p/{i}/x"), &s.x, m)?;
        }
        match &self.index_set {
            IndexSetJson::Interval => {
                if n != 1 {
                    return Err(err("/vars_y", "the interval index set needs vars_y = 1"));
                }
            }
            IndexSetJson::Quadratic { phi, interior_point } => {
                check_poly("/index_set/phi", phi, n)?;
                check_len("/index_set/interior_point", interior_point, n)?;
            }
            IndexSetJson::Semialgebraic { ineqs, eqs } => {
                for (i, q) in ineqs.iter().enumerate() {
                    check_poly(&format!("/index_set/ineqs/{i}"), q, n)?;
                }
                for (i, q) in eqs.iter().enumerate() {
                    check_poly(&format!("/index_set/eqs/{i}"), q, n)?;
                }
            }
        }
        if let Some(c) = &self.options.case_override {
            c.parse::<CaseTag>().map_err(|e| err("/options/case_override", e.to_string()))?;
        }
        if let (Some(a), Some(b)) = (self.options.k_min, self.options.k_max) {
            if a > b {
                return Err(err("/options/k_max", "k_max is below k_min"));
            }
        }
        if let Some(u) = &self.hints.feasible_point {
            check_len("/hints/feasible_point", u, m)?;
        }
        if let Some(u) = &self.u0 {
            check_len("/u0", u, m)?;
        }
        if let Some(b) = &self.bbox {
            if b.len() != m {
                return Err(err("/box", format!("box has {} axes, expected {m}", b.len())));
            }
            for (i, (lo, hi)) in b.iter().enumerate() {
                if !(lo < hi) {
                    return Err(err(format!("/box/{i}"), "lower end must be below upper end"));
                }
            }
        }
        Ok(())
    }

    pub fn is_multi(&self) -> bool {
        self.objectives.is_some()
    }

    fn index_set(&self) -> anyhow::Result<IndexSetDesc> {
        let n = self.vars_y;
        Ok(match &self.index_set {
            IndexSetJson::Interval => IndexSetDesc::Interval,
            IndexSetJson::Quadratic { phi, interior_point } => IndexSetDesc::QuadraticSet {
                phi: to_poly(n, phi)?,
                interior_point: interior_point.clone(),
            },
            IndexSetJson::Semialgebraic { ineqs, eqs } => IndexSetDesc::Semialgebraic {
                ineqs: ineqs.iter().map(|q| to_poly(n, q)).collect::<anyhow::Result<_>>()?,
                eqs: eqs.iter().map(|q| to_poly(n, q)).collect::<anyhow::Result<_>>()?,
                archimedean_hint: self.options.archimedean_hint,
            },
        })
    }

    fn bivariate(&self) -> anyhow::Result<BivariatePoly> {
        let slices = self
            .p
            .iter()
            .map(|s| Ok((Monomial::new(s.y.clone()), to_poly(self.vars_x, &s.x)?)))
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(BivariatePoly::new(self.vars_x, self.vars_y, slices)?)
    }

    fn psis(&self) -> anyhow::Result<Vec<Polynomial>> {
        self.psis.iter().map(|q| to_poly(self.vars_x, q)).collect()
    }

    /// The single-objective problem; errors on multi-objective files.
    pub fn to_problem(&self) -> anyhow::Result<FsippProblem> {
        let r = self
            .objective
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("file has an objectives list; use the pareto command"))?;
        let m = self.vars_x;
        Ok(FsippProblem::new(
            to_poly(m, &r.f)?,
            to_poly(m, &r.g)?,
            self.psis()?,
            self.bivariate()?,
            self.index_set()?,
        )?)
    }

    pub fn to_multi(&self) -> anyhow::Result<MultiFsippProblem> {
        let rs = self
            .objectives
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("file has a single objective; pareto needs an objectives list"))?;
        let m = self.vars_x;
        let objectives = rs
            .iter()
            .map(|r| Ok((to_poly(m, &r.f)?, to_poly(m, &r.g)?)))
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(MultiFsippProblem::new(
            objectives,
            self.psis()?,
            self.bivariate()?,
            self.index_set()?,
        )?)
    }

    pub fn case_override(&self) -> Option<CaseTag> {
        self.options.case_override.as_ref().and_then(|c| c.parse().ok())
    }

    pub fn hints(&self) -> Hints {
        Hints {
            feasible_point: self.hints.feasible_point.clone(),
            bound: self.hints.bound,
        }
    }

    /// File for a single-objective core problem.
    pub fn from_problem(prob: &FsippProblem) -> ProblemFile {
        let mut file = Self::skeleton(prob.nvars(), prob.n_y(), &prob.psis, &prob.p, &prob.index_set);
        file.objective = Some(Ratio {
            f: prob.f.term_list(),
            g: prob.g.term_list(),
        });
        file
    }

    /// File for a multi-objective core problem.
    pub fn from_multi(prob: &MultiFsippProblem) -> ProblemFile {
        let mut file = Self::skeleton(prob.nvars(), prob.index_set.n_y(), &prob.psis, &prob.p, &prob.index_set);
        file.objectives = Some(
            prob.objectives
                .iter()
                .map(|(f, g)| Ratio {
                    f: f.term_list(),
                    g: g.term_list(),
                })
                .collect(),
        );
        file
    }

    fn skeleton(m: usize, n: usize, psis: &[Polynomial], p: &BivariatePoly, y: &IndexSetDesc) -> ProblemFile {
        let mut options = OptionsJson::default();
        let index_set = match y {
            IndexSetDesc::Interval => IndexSetJson::Interval,
            IndexSetDesc::QuadraticSet { phi, interior_point } => IndexSetJson::Quadratic {
                phi: phi.term_list(),
                interior_point: interior_point.clone(),
            },
            IndexSetDesc::Semialgebraic {
                ineqs,
                eqs,
                archimedean_hint,
            } => {
                options.archimedean_hint = *archimedean_hint;
                IndexSetJson::Semialgebraic {
                    ineqs: ineqs.iter().map(Polynomial::term_list).collect(),
                    eqs: eqs.iter().map(Polynomial::term_list).collect(),
                }
            }
        };
        ProblemFile {
            vars_x: m,
            vars_y: n,
            objective: None,
            objectives: None,
            psis: psis.iter().map(Polynomial::term_list).collect(),
            p: p.slices()
                .map(|(mono, q)| Slice {
                    y: mono.exponents().to_vec(),
                    x: q.term_list(),
                })
                .collect(),
            index_set,
            options,
            hints: HintsJson::default(),
            u0: None,
            bbox: None,
        }
    }
}

fn to_poly(n: usize, p: &PolyJson) -> anyhow::Result<Polynomial> {
    Ok(Polynomial::from_terms(n, p.iter().cloned())?)
}
