//! FSIPP problem model, case classification, and the primal/dual SDP compilers.

use std::fmt;

use fsipp_sdp::{solve, SdpProblem, SdpSolution, SdpStatus, SolverOptions};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::certify::{self, KktReport, StopOptions};
use crate::error::{check_dim, FsippError, Result};
use crate::extract::{
    extract_atoms, flat_truncation_check, point_from_functional, Atom, ExtractOptions, RankCertificate,
};
use crate::moment::{
    dual_cone_blocks, poly_image_in_y_symbolic, sos_membership_blocks, AffinePoly, ConeSpec, MomentFunctional,
    SymbolicFunctional,
};
use crate::poly::{BivariatePoly, Polynomial};
use crate::program::{LinExpr, ProgramBuilder};

/// The index set `Y`.
#[derive(Clone, Debug, PartialEq)]
pub enum IndexSetDesc {
    /// `[-1, 1]`
    Interval,
    /// `{y : phi(y) >= 0}` with `deg phi = 2`.
    QuadraticSet { phi: Polynomial, interior_point: Vec<f64> },
    /// `{y : q_i(y) >= 0, e_j(y) = 0}`.
    Semialgebraic {
        ineqs: Vec<Polynomial>,
        eqs: Vec<Polynomial>,
        /// `M` in the redundant constraint `M - |y|^2 >= 0`.
        archimedean_hint: Option<f64>,
    },
}

impl IndexSetDesc {
    pub fn n_y(&self) -> usize {
        match self {
            IndexSetDesc::Interval => 1,
            IndexSetDesc::QuadraticSet { phi, .. } => phi.nvars(),
            IndexSetDesc::Semialgebraic { ineqs, eqs, .. } => {
                ineqs.first().or(eqs.first()).map(|p| p.nvars()).unwrap_or(0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IndexSetDesc::Interval => Ok(()),
            IndexSetDesc::QuadraticSet { phi, interior_point } => {
                check_dim(phi.nvars(), interior_point.len())?;
                if phi.degree() != Some(2) {
                    return Err(FsippError::InvalidProblem("phi must have degree 2".into()));
                }
                if !(phi.eval(interior_point)? > 0.0) {
                    return Err(FsippError::InvalidProblem("phi is not positive at the interior point".into()));
                }
                Ok(())
            }
            IndexSetDesc::Semialgebraic {
                ineqs,
                eqs,
                archimedean_hint,
            } => {
                let n = self.n_y();
                if n == 0 {
                    return Err(FsippError::InvalidProblem("index set has no generators".into()));
                }
                for q in ineqs.iter().chain(eqs) {
                    check_dim(n, q.nvars())?;
                }
                if let Some(m) = archimedean_hint {
                    if !(*m > 0.0) {
                        return Err(FsippError::InvalidProblem("archimedean hint must be positive".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// Inequality and equality generators of `Y`.
    pub fn generators(&self) -> (Vec<Polynomial>, Vec<Polynomial>) {
        match self {
            IndexSetDesc::Interval => (
                vec![&Polynomial::constant(1, 1.0) - &Polynomial::var(1, 0).pow(2)],
                Vec::new(),
            ),
            IndexSetDesc::QuadraticSet { phi, .. } => (vec![phi.clone()], Vec::new()),
            IndexSetDesc::Semialgebraic {
                ineqs,
                eqs,
                archimedean_hint,
            } => {
                let mut q = ineqs.clone();
                if let Some(m) = archimedean_hint {
                    q.push(ball_poly(self.n_y(), *m));
                }
                (q, eqs.clone())
            }
        }
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.n_y(), y.len())?;
        let (q, e) = self.generators();
        for g in &q {
            if g.eval(y)? < -tol {
                return Ok(false);
            }
        }
        for g in &e {
            if g.eval(y)?.abs() > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// A deterministic finite sample of `Y`.
    pub fn samples(&self, per_axis: usize) -> Result<Vec<Vec<f64>>> {
        let per_axis = per_axis.max(2);
        let n = self.n_y();
        match self {
            IndexSetDesc::Interval => Ok(linspace(-1.0, 1.0, per_axis).into_iter().map(|t| vec![t]).collect()),
            IndexSetDesc::QuadraticSet { phi, .. } => {
                if let Some((center, shape, level)) = ellipsoid(phi)? {
                    let mut out = Vec::new();
                    for u in grid(n, per_axis, 1.0) {
                        let r2: f64 = u.iter().map(|v| v * v).sum();
                        if r2 <= 1.0 + 1e-12 {
                            out.push(map_ellipsoid(&center, &shape, level, &u));
                        }
                    }
                    if n == 2 {
                        for i in 0..4 * per_axis {
                            let t = i as f64 * std::f64::consts::TAU / (4 * per_axis) as f64;
                            out.push(map_ellipsoid(&center, &shape, level, &[t.cos(), t.sin()]));
                        }
                    }
                    Ok(out)
                } else {
                    let mut out = Vec::new();
                    for u in grid(n, per_axis, 10.0) {
                        if phi.eval(&u)? >= 0.0 {
                            out.push(u);
                        }
                    }
                    Ok(out)
                }
            }
            IndexSetDesc::Semialgebraic {
                eqs, archimedean_hint, ..
            } => {
                let r = archimedean_hint.map(f64::sqrt).unwrap_or(1.0);
                let mut out = Vec::new();
                for mut u in grid(n, per_axis, r) {
                    if !eqs.is_empty() && !project_onto(eqs, &mut u)? {
                        continue;
                    }
                    if self.contains(&u, 1e-9)? {
                        out.push(u);
                    }
                }
                Ok(out)
            }
        }
    }
}

pub(crate) fn ball_poly(n: usize, r2: f64) -> Polynomial {
    let mut p = Polynomial::constant(n, r2);
    for i in 0..n {
        p = &p - &Polynomial::var(n, i).pow(2);
    }
    p
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn grid(n: usize, per_axis: usize, r: f64) -> Vec<Vec<f64>> {
    let axis = linspace(-r, r, per_axis);
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

/// `{y : phi(y) >= 0}` as `center + sqrt(level) * shape * u`, `|u| <= 1`, when bounded.
fn ellipsoid(phi: &Polynomial) -> Result<Option<(Vec<f64>, DMatrix<f64>, f64)>> {
    let n = phi.nvars();
    let zero = vec![0.0; n];
    let h = DMatrix::from_fn(n, n, |i, j| phi.hessian()[i][j].eval(&zero).unwrap_or(0.0));
    let neg = -&h / 2.0;
    let Some(chol) = neg.clone().cholesky() else {
        return Ok(None);
    };
    let b = nalgebra::DVector::from_vec(phi.gradient_at(&zero)?);
    // phi = -y^T N y + b^T y + c, center N^{-1} b / 2
    let center = chol.solve(&b) / 2.0;
    let center: Vec<f64> = center.iter().copied().collect();
    let level = phi.eval(&center)?;
    if level <= 0.0 {
        return Ok(None);
    }
    let eig = SymmetricEigen::new(neg);
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let shape = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    Ok(Some((center, shape, level)))
}

fn map_ellipsoid(center: &[f64], shape: &DMatrix<f64>, level: f64, u: &[f64]) -> Vec<f64> {
    let s = level.sqrt();
    (0..center.len())
        .map(|i| center[i] + s * (0..u.len()).map(|j| shape[(i, j)] * u[j]).sum::<f64>())
        .collect()
}

/// Gauss-Newton projection onto `{e = 0}`; false when it does not converge.
fn project_onto(eqs: &[Polynomial], y: &mut [f64]) -> Result<bool> {
    for _ in 0..50 {
        let r: Vec<f64> = eqs.iter().map(|e| e.eval(y)).collect::<Result<_>>()?;
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-13 {
            return Ok(true);
        }
        let rows: Vec<Vec<f64>> = eqs.iter().map(|e| e.gradient_at(y)).collect::<Result<_>>()?;
        let j = DMatrix::from_fn(eqs.len(), y.len(), |i, k| rows[i][k]);
        let Ok(step) = j.svd(true, true).solve(&nalgebra::DVector::from_vec(r), 1e-12) else {
            return Ok(false);
        };
        if step.iter().all(|v| *v == 0.0) {
            return Ok(false);
        }
        for (yi, si) in y.iter_mut().zip(step.iter()) {
            *yi -= si;
        }
    }
    Ok(false)
}

/// `min f/g s.t. psi_j <= 0, p(x, y) <= 0 for all y in Y`.
#[derive(Clone, Debug)]
pub struct FsippProblem {
    pub f: Polynomial,
    pub g: Polynomial,
    pub psis: Vec<Polynomial>,
    pub p: BivariatePoly,
    pub index_set: IndexSetDesc,
    d: u32,
}

impl FsippProblem {
    pub fn new(
        f: Polynomial,
        g: Polynomial,
        psis: Vec<Polynomial>,
        p: BivariatePoly,
        index_set: IndexSetDesc,
    ) -> Result<Self> {
        let m = f.nvars();
        check_dim(m, g.nvars())?;
        for psi in &psis {
            check_dim(m, psi.nvars())?;
        }
        check_dim(m, p.n_x())?;
        index_set.validate()?;
        check_dim(index_set.n_y(), p.n_y())?;
        if g.is_zero() {
            return Err(FsippError::InvalidProblem("denominator is the zero polynomial".into()));
        }
        let d = std::iter::once(f.degree_or_zero())
            .chain(std::iter::once(g.degree_or_zero()))
            .chain(psis.iter().map(|q| q.degree_or_zero()))
            .chain(std::iter::once(p.deg_x().unwrap_or(0)))
            .max()
            .unwrap_or(0)
            .max(1);
        Ok(FsippProblem {
            f,
            g,
            psis,
            p,
            index_set,
            d,
        })
    }

    pub fn nvars(&self) -> usize {
        self.f.nvars()
    }

    pub fn n_y(&self) -> usize {
        self.p.n_y()
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn min_order(&self) -> u32 {
        self.d.div_ceil(2)
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        Ok(self.f.eval(x)? / self.g.eval(x)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseTag {
    Case1,
    Case2,
    Case3,
    Case4,
    General,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::Case1 => "Case1",
            CaseTag::Case2 => "Case2",
            CaseTag::Case3 => "Case3",
            CaseTag::Case4 => "Case4",
            CaseTag::General => "General",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for CaseTag {
    type Err = FsippError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Case1" => Ok(CaseTag::Case1),
            "Case2" => Ok(CaseTag::Case2),
            "Case3" => Ok(CaseTag::Case3),
            "Case4" => Ok(CaseTag::Case4),
            "General" => Ok(CaseTag::General),
            _ => Err(FsippError::InvalidProblem(format!("unknown case tag {s:?}"))),
        }
    }
}

impl CaseTag {
    /// True for the tags whose `C[x]` is the bounded-degree SOS cone.
    pub fn single_order(&self) -> bool {
        matches!(self, CaseTag::Case1 | CaseTag::Case2)
    }
}

/// One line of the classification report.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityFinding {
    pub name: String,
    pub sos_convex: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub tag: CaseTag,
    pub findings: Vec<ConvexityFinding>,
}

/// Most specific tag whose checkable conditions pass (never Case 3/4).
pub fn classify_case(prob: &FsippProblem) -> Result<Classification> {
    let mut findings = Vec::new();
    let shape_ok = match &prob.index_set {
        IndexSetDesc::Interval => true,
        IndexSetDesc::QuadraticSet { .. } => prob.p.deg_y().unwrap_or(0) <= 2 && prob.n_y() > 1,
        IndexSetDesc::Semialgebraic { .. } => false,
    };
    let mut all = true;
    let mut check = |name: String, h: &Polynomial| -> Result<()> {
        let ok = certify::sos_convexity_check(h)?;
        all &= ok;
        findings.push(ConvexityFinding { name, sos_convex: ok });
        Ok(())
    };
    check("f".into(), &prob.f)?;
    check("-g".into(), &-&prob.g)?;
    for (j, psi) in prob.psis.iter().enumerate() {
        check(format!("psi{}", j + 1), psi)?;
    }
    let p_ok = certify::parametric_sos_convexity(&prob.p, &prob.index_set)?;
    findings.push(ConvexityFinding {
        name: "p(., y)".into(),
        sos_convex: p_ok,
    });
    all &= p_ok;
    let tag = match (&prob.index_set, shape_ok && all) {
        (IndexSetDesc::Interval, true) => CaseTag::Case1,
        (IndexSetDesc::QuadraticSet { .. }, true) => CaseTag::Case2,
        _ => CaseTag::General,
    };
    Ok(Classification { tag, findings })
}

/// Relative rank tolerance applied to solver-produced moment matrices.
pub const RELAX_RANK_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct RelaxOptions {
    /// `R` of the ball `R^2 - |x|^2 >= 0`.
    pub radius: f64,
    pub g_star: f64,
    pub order: u32,
    pub case_override: Option<CaseTag>,
    pub tau: f64,
    pub rank_tol: f64,
    pub sdp: SolverOptions,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            radius: 2.0,
            g_star: 0.5,
            order: 1,
            case_override: None,
            tau: 1e-3,
            rank_tol: RELAX_RANK_TOL,
            sdp: SolverOptions::default(),
        }
    }
}

impl RelaxOptions {
    pub fn validate(&self, prob: &FsippProblem, tag: CaseTag) -> Result<()> {
        if !(self.radius > 0.0) || !(self.g_star > 0.0) {
            return Err(FsippError::InvalidProblem("R and g* must be positive".into()));
        }
        if !tag.single_order() && self.order < prob.min_order() {
            return Err(FsippError::DegreeOverflow(format!(
                "order {} is below ceil(d/2) = {}",
                self.order,
                prob.min_order()
            )));
        }
        Ok(())
    }
}

fn check_tag(prob: &FsippProblem, tag: CaseTag) -> Result<()> {
    match (tag, &prob.index_set) {
        (CaseTag::Case1 | CaseTag::Case3, IndexSetDesc::Interval) => Ok(()),
        (CaseTag::Case2 | CaseTag::Case4, IndexSetDesc::QuadraticSet { .. }) => {
            if prob.p.deg_y().unwrap_or(0) > 2 {
                Err(FsippError::InconsistentTag(format!("{tag} needs deg_y p <= 2")))
            } else {
                Ok(())
            }
        }
        (CaseTag::General, _) => Ok(()),
        _ => Err(FsippError::InconsistentTag(format!("{tag} does not match the index set"))),
    }
}

/// `C[x]` for the tag.
pub fn x_cone(prob: &FsippProblem, opts: &RelaxOptions, tag: CaseTag) -> ConeSpec {
    let m = prob.nvars();
    let ball = ball_poly(m, opts.radius * opts.radius);
    match tag {
        CaseTag::Case1 | CaseTag::Case2 => ConeSpec::SosBounded {
            nvars: m,
            degree: 2 * prob.d(),
        },
        CaseTag::Case3 | CaseTag::Case4 => ConeSpec::QModule {
            nvars: m,
            generators: vec![ball],
            equalities: Vec::new(),
            order: opts.order,
        },
        CaseTag::General => ConeSpec::QModule {
            nvars: m,
            generators: vec![ball, &prob.g - &Polynomial::constant(m, opts.g_star)],
            equalities: Vec::new(),
            order: opts.order,
        },
    }
}

/// `C[y]` for the tag.
pub fn y_cone(prob: &FsippProblem, opts: &RelaxOptions, tag: CaseTag) -> ConeSpec {
    let d_y = prob.p.deg_y().unwrap_or(0);
    match (tag, &prob.index_set) {
        (CaseTag::Case1 | CaseTag::Case3, _) => ConeSpec::interval_for(d_y),
        (CaseTag::Case2 | CaseTag::Case4, IndexSetDesc::QuadraticSet { phi, .. }) => {
            ConeSpec::SLemma { phi: phi.clone() }
        }
        _ => {
            let (generators, equalities) = prob.index_set.generators();
            ConeSpec::QModule {
                nvars: prob.n_y(),
                generators,
                equalities,
                order: opts.order.max(d_y.div_ceil(2)),
            }
        }
    }
}

/// The moment program `inf L(f)` and its variable map.
#[derive(Clone, Debug)]
pub struct DualProgram {
    pub sdp: SdpProblem,
    pub moments: SymbolicFunctional,
    pub x_cone: ConeSpec,
    pub y_cone: ConeSpec,
    pub tag: CaseTag,
}

pub fn build_dual_sdp(prob: &FsippProblem, opts: &RelaxOptions, tag: CaseTag) -> Result<DualProgram> {
    check_tag(prob, tag)?;
    opts.validate(prob, tag)?;
    let xc = x_cone(prob, opts, tag);
    let yc = y_cone(prob, opts, tag);
    let mut b = ProgramBuilder::new();
    let l = SymbolicFunctional::new_free(&mut b, prob.nvars(), xc.dual_order());
    b.add_eq(&l.apply(&prob.g)?, 1.0);
    for psi in &prob.psis {
        b.add_nonneg_constraint(&l.apply(psi)?.scaled(-1.0));
    }
    dual_cone_blocks(&mut b, &l, &xc)?;
    let mut target = AffinePoly::zero(prob.n_y());
    target.add_scaled(&poly_image_in_y_symbolic(&l, &prob.p)?, -1.0);
    sos_membership_blocks(&mut b, &target, &yc)?;
    b.add_objective(&l.apply(&prob.f)?);
    Ok(DualProgram {
        sdp: b.finish()?,
        moments: l,
        x_cone: xc,
        y_cone: yc,
        tag,
    })
}

/// The SOS program `sup rho` and its variable map.
#[derive(Clone, Debug)]
pub struct PrimalProgram {
    pub sdp: SdpProblem,
    pub rho: usize,
    pub eta_start: usize,
    pub num_eta: usize,
    pub h: SymbolicFunctional,
    pub x_cone: ConeSpec,
    pub y_cone: ConeSpec,
    pub tag: CaseTag,
}

pub fn build_primal_sdp(prob: &FsippProblem, opts: &RelaxOptions, tag: CaseTag) -> Result<PrimalProgram> {
    check_tag(prob, tag)?;
    opts.validate(prob, tag)?;
    let xc = x_cone(prob, opts, tag);
    let yc = y_cone(prob, opts, tag);
    let mut b = ProgramBuilder::new();
    let rho = b.add_free(1);
    let s = prob.psis.len();
    let eta_start = if s > 0 { b.add_nonneg(s) } else { b.num_vars() };
    let h = SymbolicFunctional::new_free(&mut b, prob.n_y(), yc.dual_order());
    dual_cone_blocks(&mut b, &h, &yc)?;
    let mut target = AffinePoly::from_poly(&prob.f);
    target.add_poly_times(&prob.g, &LinExpr::term(rho, -1.0));
    for (my, px) in prob.p.slices() {
        let hb = h.apply(&Polynomial::monomial(my.clone(), 1.0))?;
        target.add_poly_times(px, &hb);
    }
    for (j, psi) in prob.psis.iter().enumerate() {
        target.add_poly_times(psi, &LinExpr::var(eta_start + j));
    }
    sos_membership_blocks(&mut b, &target, &xc)?;
    b.add_objective(&LinExpr::term(rho, -1.0));
    Ok(PrimalProgram {
        sdp: b.finish()?,
        rho,
        eta_start,
        num_eta: s,
        h,
        x_cone: xc,
        y_cone: yc,
        tag,
    })
}

/// Value of a minimization SDP: `+inf` when infeasible, `-inf` when unbounded.
fn min_value(sol: &SdpSolution) -> f64 {
    match sol.status {
        SdpStatus::PrimalInfeasible => f64::INFINITY,
        SdpStatus::DualInfeasible => f64::NEG_INFINITY,
        _ => sol.primal_value,
    }
}

/// Everything computed at one relaxation order.
#[derive(Clone, Debug)]
pub struct OrderRecord {
    pub k: u32,
    pub r_primal: f64,
    pub r_dual: f64,
    pub primal_status: SdpStatus,
    pub dual_status: SdpStatus,
    pub dual_functional: Option<MomentFunctional>,
    pub eta: Vec<f64>,
    pub h_moments: Vec<f64>,
    pub point: Option<Vec<f64>>,
    pub rank: Option<RankCertificate>,
    pub atoms: Vec<Atom>,
    pub kkt: Option<KktReport>,
    /// Positive definiteness of the Hessian of `f` at the point (Cases 3/4).
    pub hessian_pd: Option<bool>,
    pub iterations: (usize, usize),
}

impl OrderRecord {
    pub fn rank_one(&self) -> bool {
        self.rank.as_ref().is_some_and(|c| c.passed && c.rank_high == 1)
    }
}

/// Smallest eigenvalue of the Hessian of `f` at `x` is positive.
pub fn hessian_pd(f: &Polynomial, x: &[f64]) -> Result<bool> {
    let h = f.hessian();
    let m = f.nvars();
    let mut mat = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            mat[(i, j)] = h[i][j].eval(x)?;
        }
    }
    let scale = mat.amax().max(1.0);
    let min = SymmetricEigen::new(mat).eigenvalues.min();
    Ok(min > 1e-9 * scale)
}

/// Builds and solves both SDPs at `opts.order`.
pub fn solve_order(prob: &FsippProblem, opts: &RelaxOptions, tag: CaseTag) -> Result<OrderRecord> {
    let dual = build_dual_sdp(prob, opts, tag)?;
    let dsol = solve(&dual.sdp, &opts.sdp)?;
    let r_dual = min_value(&dsol);
    let mut functional = None;
    let mut point = None;
    let mut rank = None;
    let mut atoms = Vec::new();
    let mut hpd = None;
    if matches!(dsol.status, SdpStatus::Optimal | SdpStatus::IterLimit | SdpStatus::NumericalTrouble) {
        let x = dsol.scalarized(&dual.sdp);
        let l = dual.moments.values_at(&x);
        point = point_from_functional(&l).ok();
        let k = l.order();
        rank = flat_truncation_check(&l, k, 1, prob.min_order(), opts.rank_tol);
        if let Some(cert) = &rank {
            atoms = extract_atoms(&l, cert, &ExtractOptions::default()).unwrap_or_default();
        }
        if let (Some(u), CaseTag::Case3 | CaseTag::Case4) = (&point, tag) {
            hpd = Some(hessian_pd(&prob.f, u)?);
        }
        functional = Some(l);
    }
    let primal = build_primal_sdp(prob, opts, tag)?;
    let psol = solve(&primal.sdp, &opts.sdp)?;
    let r_primal = -min_value(&psol);
    let (eta, h_moments) = if psol.status == SdpStatus::Optimal {
        let x = psol.scalarized(&primal.sdp);
        (
            x[primal.eta_start..primal.eta_start + primal.num_eta].to_vec(),
            primal.h.exprs.iter().map(|e| e.eval(&x)).collect(),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(OrderRecord {
        k: opts.order,
        r_primal,
        r_dual,
        primal_status: psol.status,
        dual_status: dsol.status,
        dual_functional: functional,
        eta,
        h_moments,
        point,
        rank,
        atoms,
        kkt: None,
        hessian_pd: hpd,
        iterations: (psol.iterations, dsol.iterations),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Cases 1/2: the single SDP pair is exact.
    SingleOrder,
    RankCondition,
    KktCertified,
    Exhausted,
}

#[derive(Clone, Debug)]
pub struct HierarchyTrace {
    pub tag: CaseTag,
    pub records: Vec<OrderRecord>,
    pub stopped: StopReason,
    /// Orders whose build or solve failed.
    pub errors: Vec<(u32, String)>,
}

impl HierarchyTrace {
    pub fn last(&self) -> Option<&OrderRecord> {
        self.records.last()
    }
}

/// Runs the hierarchy over `k_min..=k_max` (a single order for Cases 1/2).
pub fn solve_hierarchy(
    prob: &FsippProblem,
    opts: &RelaxOptions,
    k_min: u32,
    k_max: u32,
    tag: CaseTag,
) -> Result<HierarchyTrace> {
    check_tag(prob, tag)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    if tag.single_order() {
        let o = RelaxOptions {
            order: prob.d(),
            ..opts.clone()
        };
        let rec = solve_order(prob, &o, tag)?;
        return Ok(HierarchyTrace {
            tag,
            records: vec![rec],
            stopped: StopReason::SingleOrder,
            errors,
        });
    }
    let start = k_min.max(prob.min_order());
    let mut stopped = StopReason::Exhausted;
    for k in start..=k_max.max(start) {
        let o = RelaxOptions {
            order: k,
            ..opts.clone()
        };
        let mut rec = match solve_order(prob, &o, tag) {
            Ok(r) => r,
            Err(e) => {
                errors.push((k, e.to_string()));
                continue;
            }
        };
        let flat = rec.rank.as_ref().is_some_and(|c| c.passed);
        if flat && tag != CaseTag::General {
            records.push(rec);
            stopped = StopReason::RankCondition;
            break;
        }
        if tag == CaseTag::General {
            if let Some(u) = rec.point.clone() {
                let sopts = StopOptions {
                    tau: opts.tau,
                    sdp: opts.sdp,
                    rank_tol: opts.rank_tol,
                    ..StopOptions::default()
                };
                match certify::stop_criterion(&u, prob, &sopts) {
                    Ok(rep) => rec.kkt = Some(rep),
                    Err(e) => errors.push((k, format!("stop criterion: {e}"))),
                }
            }
            let kkt_ok = rec.kkt.as_ref().is_some_and(|r| r.passed());
            if kkt_ok || (flat && rec.atoms.len() == 1) {
                stopped = if kkt_ok {
                    StopReason::KktCertified
                } else {
                    StopReason::RankCondition
                };
                records.push(rec);
                break;
            }
        }
        records.push(rec);
    }
    Ok(HierarchyTrace {
        tag,
        records,
        stopped,
        errors,
    })
}

/// Optional user knowledge feeding the choice of `R` and `g*`.
#[derive(Clone, Debug, Default)]
pub struct Hints {
    pub feasible_point: Option<Vec<f64>>,
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusChoice {
    pub radius: f64,
    pub g_star: f64,
    /// `f(u') = 0` at a feasible `u'` (or `min_K f = 0`), so `r* = 0`.
    pub zero_optimum: bool,
    /// Values of the auxiliary solves (`min_K g` or `min_K f`).
    pub auxiliary: Vec<f64>,
}

/// Largest `a * 10^e <= v` with `a` in {1, 2, 5}.
fn nice_floor(v: f64) -> f64 {
    let e = v.log10().floor();
    let base = 10f64.powf(e);
    let m = v / base;
    let a = if m >= 5.0 {
        5.0
    } else if m >= 2.0 {
        2.0
    } else {
        1.0
    };
    a * base
}

/// Auxiliary order used by [`choose_r_gstar`].
const AUX_ORDER_SPAN: u32 = 1;

/// Recipes for `R` and `g*`.
pub fn choose_r_gstar(prob: &FsippProblem, hints: &Hints, opts: &RelaxOptions) -> Result<RadiusChoice> {
    let m = prob.nvars();
    let radius = match (hints.bound, &hints.feasible_point) {
        (Some(b), _) if b > 0.0 => b,
        (_, Some(u)) => {
            check_dim(m, u.len())?;
            let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            1.5 * n.max(1.0)
        }
        _ => return Err(FsippError::MissingHint("need a norm bound or a feasible point for R".into())),
    };
    let mut auxiliary = Vec::new();
    let deg_g = prob.g.degree_or_zero();
    if deg_g == 0 {
        let c = prob.g.eval(&vec![0.0; m])?;
        if !(c > 0.0) {
            return Err(FsippError::InvalidProblem("constant denominator must be positive".into()));
        }
        return Ok(RadiusChoice {
            radius,
            g_star: c / 2.0,
            zero_optimum: false,
            auxiliary,
        });
    }
    let aux = |f: &Polynomial| -> Result<f64> {
        let sub = FsippProblem::new(
            f.clone(),
            Polynomial::constant(m, 1.0),
            prob.psis.clone(),
            prob.p.clone(),
            prob.index_set.clone(),
        )?;
        let o = RelaxOptions {
            radius,
            g_star: 0.5,
            ..opts.clone()
        };
        let k0 = sub.min_order();
        let tr = solve_hierarchy(&sub, &o, k0, k0 + AUX_ORDER_SPAN, CaseTag::General)?;
        let best = tr
            .records
            .iter()
            .map(|r| r.r_dual)
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if best.is_finite() {
            Ok(best)
        } else {
            Err(FsippError::NumericalTrouble("auxiliary solve returned no finite value".into()))
        }
    };
    if deg_g == 1 {
        let gmin = aux(&prob.g)?;
        auxiliary.push(gmin);
        if !(gmin > 0.0) {
            return Err(FsippError::InvalidProblem(format!("min of g over K is {gmin}, not positive")));
        }
        return Ok(RadiusChoice {
            radius,
            g_star: nice_floor(gmin / 2.0),
            zero_optimum: false,
            auxiliary,
        });
    }
    let Some(u) = &hints.feasible_point else {
        return Err(FsippError::MissingHint("g is nonlinear and no feasible point was given".into()));
    };
    let fu = prob.f.eval(u)?;
    let gu = prob.g.eval(u)?;
    if fu == 0.0 {
        return Ok(RadiusChoice {
            radius,
            g_star: 0.0,
            zero_optimum: true,
            auxiliary,
        });
    }
    let fstar = aux(&prob.f)?;
    auxiliary.push(fstar);
    if fstar.abs() <= 1e-12 {
        return Ok(RadiusChoice {
            radius,
            g_star: 0.0,
            zero_optimum: true,
            auxiliary,
        });
    }
    let bound = gu / fu * fstar;
    if !(bound > 0.0) {
        return Err(FsippError::InvalidProblem(format!("g(u')/f(u') * f* = {bound} is not positive")));
    }
    Ok(RadiusChoice {
        radius,
        g_star: nice_floor(bound / 2.0),
        zero_optimum: false,
        auxiliary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_floor_values() {
        assert_eq!(nice_floor(1.3), 1.0);
        assert_eq!(nice_floor(0.37), 0.2);
        assert_eq!(nice_floor(7.0), 5.0);
    }

    #[test]
    fn ellipsoid_samples_lie_in_the_set() {
        let phi = Polynomial::from_terms(2, vec![(vec![0, 0], 1.0), (vec![2, 0], -1.0), (vec![0, 2], -4.0)]).unwrap();
        let y = IndexSetDesc::QuadraticSet {
            phi: phi.clone(),
            interior_point: vec![0.0, 0.0],
        };
        let s = y.samples(9).unwrap();
        assert!(s.len() > 20);
        for p in &s {
            assert!(phi.eval(p).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn projection_reaches_the_circle() {
        let (q, e) = (
            vec![Polynomial::var(2, 0), Polynomial::var(2, 1)],
            vec![&ball_poly(2, 1.0) * -1.0],
        );
        let y = IndexSetDesc::Semialgebraic {
            ineqs: q,
            eqs: e,
            archimedean_hint: None,
        };
        let s = y.samples(7).unwrap();
        assert!(!s.is_empty());
        for p in &s {
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-9 && p[0] >= -1e-9 && p[1] >= -1e-9);
        }
    }
}
