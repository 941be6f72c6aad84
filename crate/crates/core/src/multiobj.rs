//! Multi-objective FSIPP through the epsilon-constraint method.

use crate::certify::{feasibility_check, feasibility_margin, LowerLevelOptions};
use crate::error::{check_dim, FsippError, Result};
use crate::poly::{BivariatePoly, Polynomial};
use crate::relax::{classify_case, solve_hierarchy, CaseTag, FsippProblem, IndexSetDesc, RelaxOptions};

/// `Min (f_1/g_1, ..., f_t/g_t)` over `{psi_j <= 0, p(x, y) <= 0 for all y in Y}`.
#[derive(Clone, Debug)]
pub struct MultiFsippProblem {
    pub objectives: Vec<(Polynomial, Polynomial)>,
    pub psis: Vec<Polynomial>,
    pub p: BivariatePoly,
    pub index_set: IndexSetDesc,
}

impl MultiFsippProblem {
    pub fn new(
        objectives: Vec<(Polynomial, Polynomial)>,
        psis: Vec<Polynomial>,
        p: BivariatePoly,
        index_set: IndexSetDesc,
    ) -> Result<Self> {
        if objectives.len() < 2 {
            return Err(FsippError::InvalidProblem("need at least two objectives".into()));
        }
        let m = p.n_x();
        for (f, g) in &objectives {
            check_dim(m, f.nvars())?;
            check_dim(m, g.nvars())?;
        }
        for psi in &psis {
            check_dim(m, psi.nvars())?;
        }
        index_set.validate()?;
        check_dim(index_set.n_y(), p.n_y())?;
        Ok(MultiFsippProblem {
            objectives,
            psis,
            p,
            index_set,
        })
    }

    pub fn nvars(&self) -> usize {
        self.p.n_x()
    }

    pub fn num_objectives(&self) -> usize {
        self.objectives.len()
    }

    /// `(f_1/g_1, ..., f_t/g_t)` at `x`.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.objectives
            .iter()
            .map(|(f, g)| Ok(f.eval(x)? / g.eval(x)?))
            .collect()
    }

    /// The single-objective problem with no extra constraints.
    pub fn single(&self, i: usize) -> Result<FsippProblem> {
        let (f, g) = self.objectives.get(i).ok_or_else(|| bad_index(i))?;
        FsippProblem::new(f.clone(), g.clone(), self.psis.clone(), self.p.clone(), self.index_set.clone())
    }
}

fn bad_index(i: usize) -> FsippError {
    FsippError::InvalidProblem(format!("objective index {i} out of range"))
}

/// `(P_i)`: minimize `f_i/g_i` subject to `g_j(u) f_j(x) - f_j(u) g_j(x) <= 0` for `j != i`.
pub fn scalarize(mprob: &MultiFsippProblem, i: usize, u_prev: &[f64]) -> Result<FsippProblem> {
    check_dim(mprob.nvars(), u_prev.len())?;
    if i >= mprob.num_objectives() {
        return Err(bad_index(i));
    }
    let mut psis = mprob.psis.clone();
    for (j, (f, g)) in mprob.objectives.iter().enumerate() {
        if j == i {
            continue;
        }
        let gu = g.eval(u_prev)?;
        if !(gu > 0.0) {
            return Err(FsippError::Infeasible(format!("g{}(u) = {gu} is not positive", j + 1)));
        }
        psis.push(&(f * gu) - &(g * f.eval(u_prev)?));
    }
    let (f, g) = &mprob.objectives[i];
    FsippProblem::new(f.clone(), g.clone(), psis, mprob.p.clone(), mprob.index_set.clone())
}

#[derive(Clone, Debug)]
pub struct EpsOptions {
    pub relax: RelaxOptions,
    pub k_min: u32,
    pub k_max: u32,
    /// Tag used for every stage; classified per stage when absent.
    pub case_override: Option<CaseTag>,
    pub lower: LowerLevelOptions,
}

impl Default for EpsOptions {
    fn default() -> Self {
        EpsOptions {
            relax: RelaxOptions::default(),
            k_min: 1,
            k_max: 6,
            case_override: None,
            lower: LowerLevelOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    /// Zero-based objective index.
    pub index: usize,
    pub tag: CaseTag,
    pub point: Vec<f64>,
    pub value: f64,
    pub order: u32,
    pub rank_one: bool,
    pub hessian_pd: Option<bool>,
    /// `max{-p*, psi_j(u)}` of the scalarized problem at `point`.
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopKind {
    Uniqueness,
    ExhaustedT,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyReport {
    pub path: Vec<Stage>,
    pub final_point: Vec<f64>,
    pub stopped_by: StopKind,
    pub objective_vector: Vec<f64>,
}

fn stage_error(i: usize, e: FsippError) -> FsippError {
    match e {
        FsippError::Infeasible(s) => FsippError::Infeasible(format!("stage {}: {s}", i + 1)),
        FsippError::NumericalTrouble(s) => FsippError::NumericalTrouble(format!("stage {}: {s}", i + 1)),
        other => other,
    }
}

/// Algorithm of the epsilon-constraint method from a feasible `u0`.
pub fn epsilon_constraint_solve(mprob: &MultiFsippProblem, u0: &[f64], opts: &EpsOptions) -> Result<EfficiencyReport> {
    check_dim(mprob.nvars(), u0.len())?;
    let tau = opts.relax.tau;
    let (ok, margin) = feasibility_check(u0, &mprob.single(0)?, tau, &opts.lower)?;
    if !ok {
        return Err(FsippError::Infeasible(format!("initial point violates the constraints by {margin:e}")));
    }
    let mut u = u0.to_vec();
    let mut path = Vec::new();
    let mut stopped_by = StopKind::ExhaustedT;
    for i in 0..mprob.num_objectives() {
        let sub = scalarize(mprob, i, &u).map_err(|e| stage_error(i, e))?;
        let tag = match opts.case_override {
            Some(t) => t,
            None => classify_case(&sub)?.tag,
        };
        let trace = solve_hierarchy(&sub, &opts.relax, opts.k_min, opts.k_max, tag).map_err(|e| stage_error(i, e))?;
        let rec = trace
            .records
            .iter()
            .rev()
            .find(|r| r.point.is_some())
            .ok_or_else(|| stage_error(i, FsippError::NumericalTrouble("no order produced a point".into())))?;
        let point = if rec.atoms.len() == 1 {
            rec.atoms[0].point.clone()
        } else {
            rec.point.clone().expect("filtered above")
        };
        let ll = crate::certify::lower_level_solve(&point, &sub, &opts.lower).map_err(|e| stage_error(i, e))?;
        let margin = feasibility_margin(&point, &sub, ll.p_star)?;
        let unique = matches!(tag, CaseTag::Case3 | CaseTag::Case4) && rec.rank_one() && rec.hessian_pd == Some(true);
        path.push(Stage {
            index: i,
            tag,
            value: sub.objective(&point)?,
            point: point.clone(),
            order: rec.k,
            rank_one: rec.rank_one(),
            hessian_pd: rec.hessian_pd,
            margin,
        });
        u = point;
        if unique {
            stopped_by = StopKind::Uniqueness;
            break;
        }
    }
    Ok(EfficiencyReport {
        objective_vector: mprob.values(&u)?,
        final_point: u,
        path,
        stopped_by,
    })
}

/// Axis-aligned box `[lo_i, hi_i]`.
pub type BoundingBox = Vec<(f64, f64)>;

/// Grid points of `bbox` with `grid` points per axis, first axis slowest.
pub fn grid_points(bbox: &BoundingBox, grid: usize) -> Vec<Vec<f64>> {
    let grid = grid.max(2);
    let mut out = vec![Vec::new()];
    for &(lo, hi) in bbox {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..grid).map(move |k| {
                    let mut q = p.clone();
                    q.push(lo + (hi - lo) * k as f64 / (grid - 1) as f64);
                    q
                })
            })
            .collect();
    }
    out
}

/// Cheap feasibility test on sampled `Y` points (no certificate).
pub struct SampledFeasibility {
    slices: Vec<Polynomial>,
    psis: Vec<Polynomial>,
}

impl SampledFeasibility {
    pub fn new(mprob: &MultiFsippProblem, per_axis: usize) -> Result<Self> {
        let slices = mprob
            .index_set
            .samples(per_axis)?
            .iter()
            .map(|y| mprob.p.substitute_y(y))
            .collect::<Result<_>>()?;
        Ok(SampledFeasibility {
            slices,
            psis: mprob.psis.clone(),
        })
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> Result<bool> {
        for q in self.psis.iter().chain(&self.slices) {
            if q.eval(x)? > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

const DOMINANCE_TOL: f64 = 1e-6;

/// `a` dominates `b`: no worse anywhere, better by more than the tolerance somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= *y) && a.iter().zip(b).any(|(x, y)| *x < *y - DOMINANCE_TOL)
}

/// False iff a feasible grid point dominates `u_star`.
pub fn efficiency_audit(
    mprob: &MultiFsippProblem,
    u_star: &[f64],
    grid: usize,
    bbox: &BoundingBox,
    lower: &LowerLevelOptions,
) -> Result<bool> {
    check_dim(mprob.nvars(), u_star.len())?;
    check_dim(mprob.nvars(), bbox.len())?;
    let target = mprob.values(u_star)?;
    let sampled = SampledFeasibility::new(mprob, 41)?;
    let single = mprob.single(0)?;
    for v in grid_points(bbox, grid) {
        let mut vals = Vec::with_capacity(target.len());
        let mut ok = true;
        for (f, g) in &mprob.objectives {
            let gv = g.eval(&v)?;
            if !(gv > 0.0) {
                ok = false;
                break;
            }
            vals.push(f.eval(&v)? / gv);
        }
        if !ok || !dominates(&vals, &target) || !sampled.feasible(&v, 0.0)? {
            continue;
        }
        let (feasible, _) = feasibility_check(&v, &single, 1e-9, lower)?;
        if feasible {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn epsilon_constraints_vanish_at_the_incumbent() {
        let m = fixtures::multi_case_iv();
        for u in [[0.1, -0.2], [-0.5, 0.5], [0.3, 0.3]] {
            for i in 0..2 {
                let sub = scalarize(&m, i, &u).unwrap();
                assert_eq!(sub.psis.len(), m.psis.len() + 1);
                for psi in &sub.psis[m.psis.len()..] {
                    assert!(psi.eval(&u).unwrap().abs() <= 1e-8);
                }
                assert_eq!(&sub.f, &m.objectives[i].0);
            }
        }
    }

    #[test]
    fn scalarize_rejects_nonpositive_denominators() {
        let m = fixtures::multi_case_iv();
        // g2 = x1 + x2 + 2 vanishes at (-1, -1)
        assert!(matches!(scalarize(&m, 0, &[-1.0, -1.0]), Err(FsippError::Infeasible(_))));
        assert!(scalarize(&m, 2, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn dominance_is_strict_somewhere() {
        assert!(dominates(&[0.0, 1.0], &[0.0, 2.0]));
        assert!(!dominates(&[0.0, 1.0], &[0.0, 1.0]));
        assert!(!dominates(&[0.0, 1.0], &[0.0, 1.0 + 1e-7]));
        assert!(!dominates(&[-1.0, 3.0], &[0.0, 2.0]));
    }

    #[test]
    fn grid_spans_the_box() {
        let pts = grid_points(&vec![(0.0, 1.0), (-2.0, 2.0)], 3);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![0.0, -2.0]);
        assert_eq!(pts[1], vec![0.0, 0.0]);
        assert_eq!(pts[8], vec![1.0, 2.0]);
    }

    #[test]
    fn needs_two_objectives() {
        let m = fixtures::multi_case_i();
        let one = vec![m.objectives[0].clone()];
        assert!(MultiFsippProblem::new(one, vec![], m.p.clone(), m.index_set.clone()).is_err());
    }
}
