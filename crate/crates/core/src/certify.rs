//! Stop criterion for candidate minimizers and auxiliary analytic checks.

use fsipp_sdp::{solve, SdpStatus, SolverOptions};
use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, FsippError, Result};
use crate::extract::{extract_atoms, flat_truncation_check, point_from_functional, ExtractOptions};
use crate::moment::{
    dual_cone_blocks, sos_membership_blocks, AffinePoly, ConeSpec, GramAccumulator, MonomialBasis,
    SymbolicFunctional,
};
use crate::poly::{BivariatePoly, Monomial, Polynomial};
use crate::program::{LinExpr, ProgramBuilder};
use crate::relax::{FsippProblem, IndexSetDesc};

/// Relative threshold on the max-`t` value below which a Hessian form is not SOS.
pub const SOS_CONVEX_TOL: f64 = 1e-6;

/// Samples of `Y` used when the parametric check fails.
const SLICE_SAMPLES: usize = 25;
/// Largest Gram block tried for the joint `(x, y, z)` certificate.
const MAX_JOINT_GRAM: usize = 60;

/// `z^T (hess h) z` in variables `(x, z)`.
fn hessian_form(h: &Polynomial, nx: usize) -> Polynomial {
    let n = h.nvars();
    let total = n + nx;
    let hess = h.hessian();
    let mut t = Polynomial::zero(total);
    for i in 0..nx {
        for j in 0..nx {
            let zi = Polynomial::var(total, n + i);
            let zj = Polynomial::var(total, n + j);
            t = &t + &(&(&zi * &zj) * &hess[i][j].embed(total, 0));
        }
    }
    t
}

/// Monomials `z_i * w^a` with `|a| <= e`, where `w` are the first `nw` variables.
fn z_linear_basis(nw: usize, nz: usize, e: u32) -> MonomialBasis {
    let total = nw + nz;
    let inner = MonomialBasis::new(nw, e);
    let mut monos = Vec::new();
    for i in 0..nz {
        for m in inner.monomials() {
            let mut ex = m.exponents().to_vec();
            ex.resize(total, 0);
            ex[nw + i] = 1;
            monos.push(Monomial::new(ex));
        }
    }
    MonomialBasis::from_monomials(total, monos)
}

/// Largest `t <= 1` with `T = v^T (G + t I) v + sum_q q v_q^T G_q v_q (+ ideal terms)`.
///
/// `nw` leading variables carry the polynomial dependence, `nz` trailing ones are `z`.
fn max_shift(
    target: &Polynomial,
    nw: usize,
    nz: usize,
    gens: &[Polynomial],
    eqs: &[Polynomial],
    sdp: &SolverOptions,
) -> Result<Option<f64>> {
    let total = nw + nz;
    let w_deg = target
        .terms()
        .map(|(m, _)| m.exponents()[..nw].iter().sum::<u32>())
        .max()
        .unwrap_or(0);
    let mut b = ProgramBuilder::new();
    let t = b.add_free(1);
    b.add_nonneg_constraint(&LinExpr {
        terms: [(t, -1.0)].into_iter().collect(),
        constant: 1.0,
    });
    let shift = LinExpr::var(t);
    let mut acc = GramAccumulator::new();
    let one = Polynomial::constant(total, 1.0);
    acc.add_gram(&mut b, &one, &z_linear_basis(nw, nz, w_deg.div_ceil(2)), Some(&shift));
    for q in gens {
        let dq = q.degree_or_zero();
        if dq > w_deg {
            continue;
        }
        let e = (w_deg - dq) / 2;
        acc.add_gram(&mut b, q, &z_linear_basis(nw, nz, e), None);
    }
    for eq in eqs {
        let de = eq.degree_or_zero();
        if de > w_deg {
            continue;
        }
        let inner = MonomialBasis::new(nw, w_deg - de);
        for i in 0..nz {
            for j in i..nz {
                for m in inner.monomials() {
                    let mut ex = m.exponents().to_vec();
                    ex.resize(total, 0);
                    ex[nw + i] += 1;
                    ex[nw + j] += 1;
                    let v = b.add_free(1);
                    acc.add_poly_times(&(eq * &Polynomial::monomial(Monomial::new(ex), 1.0)), &LinExpr::var(v));
                }
            }
        }
    }
    acc.finish(&mut b, &AffinePoly::from_poly(target));
    b.add_objective(&LinExpr::term(t, -1.0));
    let prob = b.finish()?;
    let sol = solve(&prob, sdp)?;
    match sol.status {
        SdpStatus::Optimal => Ok(Some(-sol.primal_value)),
        SdpStatus::PrimalInfeasible => Ok(None),
        s => Err(FsippError::NumericalTrouble(format!("Hessian Gram SDP ended with {s:?}"))),
    }
}

/// Max-`t` value of the Hessian Gram SDP of `h` with its coefficients scaled
/// to unit maximum, or `None` when no Gram matrix exists.
fn normalized_margin(h: &Polynomial) -> Result<Option<f64>> {
    let m = h.nvars();
    let t = hessian_form(h, m);
    if t.is_zero() {
        return Ok(Some(0.0));
    }
    let t = &t * (1.0 / t.max_abs_coeff());
    max_shift(&t, m, m, &[], &[], &SolverOptions::default())
}

fn translate(h: &Polynomial, c: &[f64]) -> Result<Polynomial> {
    let m = h.nvars();
    let subs: Vec<Polynomial> = (0..m)
        .map(|i| &Polynomial::var(m, i) + &Polynomial::constant(m, c[i]))
        .collect();
    h.compose(&subs)
}

/// Damped Newton iterate from the origin, `None` when it diverges.
fn approx_minimizer(h: &Polynomial) -> Result<Option<Vec<f64>>> {
    let m = h.nvars();
    let hess = h.hessian();
    let mut x = vec![0.0; m];
    let mut fx = h.eval(&x)?;
    for _ in 0..100 {
        let g = DVector::from_vec(h.gradient_at(&x)?);
        if g.norm() <= 1e-10 * (1.0 + fx.abs()) {
            break;
        }
        let mut hm = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                hm[(i, j)] = hess[i][j].eval(&x)?;
            }
        }
        let d = match hm.cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -g.clone(),
        };
        let mut step = 1.0;
        loop {
            let y: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
            let fy = h.eval(&y)?;
            if fy < fx {
                x = y;
                fx = fy;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return Ok(Some(x));
            }
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return Ok(None);
        }
    }
    Ok(Some(x))
}

/// Smallest normalized Gram margin of `h` taken at the origin and at an
/// approximate minimizer, or `None` when some Gram SDP is infeasible.
pub fn sos_convexity_margin(h: &Polynomial) -> Result<Option<f64>> {
    let mut best = match normalized_margin(h)? {
        Some(v) => v,
        None => return Ok(None),
    };
    if let Some(c) = approx_minimizer(h)? {
        if c.iter().any(|v| v.abs() > 1e-9) {
            match normalized_margin(&translate(h, &c)?)? {
                Some(v) => best = best.min(v),
                None => return Ok(None),
            }
        }
    }
    Ok(Some(best))
}

/// Hessian of `h` is an SOS matrix.
pub fn sos_convexity_check(h: &Polynomial) -> Result<bool> {
    if h.degree_or_zero() <= 1 {
        return Ok(true);
    }
    Ok(sos_convexity_margin(h)?.is_some_and(|t| t >= -SOS_CONVEX_TOL))
}

/// `p(., y)` is s.o.s-convex for every `y` in `Y`.
///
/// Certifies the Hessian form of `p` in `(x, y, z)` on the generators of `Y`;
/// on failure or when that SDP is too large, checks 25 sampled slices instead.
pub fn parametric_sos_convexity(p: &BivariatePoly, y: &IndexSetDesc) -> Result<bool> {
    let (m, n) = (p.n_x(), p.n_y());
    if p.deg_x().unwrap_or(0) <= 1 {
        return Ok(true);
    }
    // variables (x, y, z): the Hessian form of the joint polynomial in x only
    let joint = p.to_joint();
    let total = m + n + m;
    let hess = joint.hessian();
    let mut t = Polynomial::zero(total);
    for i in 0..m {
        for j in 0..m {
            let zz = &Polynomial::var(total, m + n + i) * &Polynomial::var(total, m + n + j);
            t = &t + &(&zz * &hess[i][j].embed(total, 0));
        }
    }
    if t.is_zero() {
        return Ok(true);
    }
    let (gens, eqs) = y.generators();
    let gens: Vec<Polynomial> = gens.iter().map(|q| q.embed(total, m)).collect();
    let eqs: Vec<Polynomial> = eqs.iter().map(|q| q.embed(total, m)).collect();
    let t = &t * (1.0 / t.max_abs_coeff());
    let w_deg = t
        .terms()
        .map(|(mono, _)| mono.exponents()[..m + n].iter().sum::<u32>())
        .max()
        .unwrap_or(0);
    let gram = m * MonomialBasis::new(m + n, w_deg.div_ceil(2)).len();
    if gram <= MAX_JOINT_GRAM {
        if let Ok(Some(v)) = max_shift(&t, m + n, m, &gens, &eqs, &SolverOptions::default()) {
            if v >= -SOS_CONVEX_TOL {
                return Ok(true);
            }
        }
    }
    let all = y.samples(SLICE_SAMPLES)?;
    if all.is_empty() {
        return Ok(false);
    }
    let stride = (all.len() / SLICE_SAMPLES).max(1);
    for yp in all.iter().step_by(stride).take(SLICE_SAMPLES) {
        if !sos_convexity_check(&p.substitute_y(yp)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Feasibility of `p in cone` by a Gram SDP.
pub fn cone_membership(p: &Polynomial, cone: &ConeSpec, sdp: &SolverOptions) -> Result<bool> {
    let mut b = ProgramBuilder::new();
    sos_membership_blocks(&mut b, &AffinePoly::from_poly(p), cone)?;
    let prob = b.finish()?;
    let sol = solve(&prob, sdp)?;
    match sol.status {
        SdpStatus::Optimal => Ok(true),
        SdpStatus::PrimalInfeasible => Ok(false),
        s => Err(FsippError::NumericalTrouble(format!("membership SDP ended with {s:?}"))),
    }
}

/// Global minimization of `-p(u, .)` over `Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerLevel {
    pub p_star: f64,
    pub lambda: Vec<Vec<f64>>,
    pub certified: bool,
    pub order: u32,
    /// `p` does not depend on `y`; `lambda` holds one representative point.
    pub whole_y: bool,
}

#[derive(Clone, Debug)]
pub struct LowerLevelOptions {
    pub k_min: Option<u32>,
    /// Orders tried beyond the first.
    pub extra_orders: u32,
    pub rank_tol: f64,
    pub sdp: SolverOptions,
}

impl Default for LowerLevelOptions {
    fn default() -> Self {
        LowerLevelOptions {
            k_min: None,
            extra_orders: 2,
            rank_tol: 1e-6,
            sdp: SolverOptions::default(),
        }
    }
}

fn best_samples(h: &Polynomial, y: &IndexSetDesc) -> Result<Vec<f64>> {
    let per_axis = match y.n_y() {
        1 => 10_000,
        2 => 100,
        _ => 22,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in y.samples(per_axis)? {
        let v = h.eval(&s)?;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, s));
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| FsippError::InvalidProblem("index set sample is empty".into()))
}

pub fn lower_level_solve(u: &[f64], prob: &FsippProblem, opts: &LowerLevelOptions) -> Result<LowerLevel> {
    check_dim(prob.nvars(), u.len())?;
    let h = -prob.p.substitute_x(u)?;
    let n = prob.n_y();
    if h.degree_or_zero() == 0 {
        let rep = best_samples(&h, &prob.index_set)?;
        return Ok(LowerLevel {
            p_star: h.eval(&rep)?,
            lambda: vec![rep],
            certified: true,
            order: 0,
            whole_y: true,
        });
    }
    let (gens, eqs) = prob.index_set.generators();
    let k0 = gens
        .iter()
        .chain(&eqs)
        .map(|q| q.degree_or_zero().div_ceil(2))
        .max()
        .unwrap_or(1)
        .max(1);
    let d_half = h.degree_or_zero().div_ceil(2);
    let first = opts.k_min.unwrap_or(d_half.max(k0)).max(d_half.max(k0));
    let mut last: Option<(f64, u32, Option<Vec<f64>>)> = None;
    for k in first..=first + opts.extra_orders {
        let cone = ConeSpec::QModule {
            nvars: n,
            generators: gens.clone(),
            equalities: eqs.clone(),
            order: k,
        };
        let mut b = ProgramBuilder::new();
        let l = SymbolicFunctional::new_free(&mut b, n, k);
        b.add_eq(&l.apply(&Polynomial::constant(n, 1.0))?, 1.0);
        dual_cone_blocks(&mut b, &l, &cone)?;
        b.add_objective(&l.apply(&h)?);
        let sdp = b.finish()?;
        let sol = solve(&sdp, &opts.sdp)?;
        match sol.status {
            SdpStatus::Optimal => {}
            SdpStatus::PrimalInfeasible => return Err(FsippError::Infeasible("index set is empty".into())),
            s => {
                return Err(FsippError::NumericalTrouble(format!(
                    "lower-level SDP at order {k} ended with {s:?}"
                )))
            }
        }
        let lv = l.values_at(&sol.scalarized(&sdp));
        let p_star = sol.primal_value;
        if let Some(cert) = flat_truncation_check(&lv, k, k0, d_half, opts.rank_tol) {
            if let Ok(atoms) = extract_atoms(&lv, &cert, &ExtractOptions::default()) {
                if !atoms.is_empty() {
                    return Ok(LowerLevel {
                        p_star,
                        lambda: atoms.into_iter().map(|a| a.point).collect(),
                        certified: true,
                        order: k,
                        whole_y: false,
                    });
                }
            }
        }
        last = Some((p_star, k, point_from_functional(&lv).ok()));
    }
    let (p_star, order, mean) = last.expect("at least one order is solved");
    let mut cand = best_samples(&h, &prob.index_set)?;
    if let Some(m) = mean {
        if prob.index_set.contains(&m, 1e-9)? && h.eval(&m)? < h.eval(&cand)? {
            cand = m;
        }
    }
    Ok(LowerLevel {
        p_star,
        lambda: vec![cand],
        certified: false,
        order,
        whole_y: false,
    })
}

/// `Lambda` (kept only when `p* <= tau`) and `J = {j : |psi_j(u)| <= tau}`.
pub fn active_sets(u: &[f64], prob: &FsippProblem, ll: &LowerLevel, tau: f64) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let lambda = if ll.p_star <= tau { ll.lambda.clone() } else { Vec::new() };
    let mut j = Vec::new();
    for (i, psi) in prob.psis.iter().enumerate() {
        if psi.eval(u)?.abs() <= tau {
            j.push(i);
        }
    }
    Ok((lambda, j))
}

/// `min |Ax - b|^2` over `x >= 0` (Lawson-Hanson); returns `(x, |Ax - b|^2)`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (rows, n) = a.shape();
    check_dim(rows, b.len())?;
    let mut x = DVector::zeros(n);
    if n == 0 {
        return Ok((x, b.norm_squared()));
    }
    let tol = 10.0 * f64::EPSILON * a.norm().max(1.0) * rows.max(n) as f64;
    let mut passive = vec![false; n];
    // columns whose positive gradient is a rounding artifact
    let mut blocked = vec![false; n];
    let max_iter = 30 * n + 10;
    let mut iter = 0;
    loop {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = cand else {
            break;
        };
        passive[t] = true;
        let mut first = true;
        loop {
            iter += 1;
            if iter > max_iter {
                return Err(FsippError::IterationCap(format!("nnls exceeded {max_iter} iterations")));
            }
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(rows, idx.len(), |r, c| a[(r, idx[c])]);
            let zs = sub
                .svd(true, true)
                .solve(b, 1e-14)
                .map_err(|e| FsippError::NumericalTrouble(e.to_string()))?;
            let mut z = DVector::zeros(n);
            for (c, &j) in idx.iter().enumerate() {
                z[j] = zs[c];
            }
            if first && z[t] <= 0.0 {
                passive[t] = false;
                blocked[t] = true;
                break;
            }
            first = false;
            if idx.iter().all(|&j| z[j] > 0.0) {
                x = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &idx {
                if z[j] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[j]));
                }
            }
            x += (z - &x) * alpha;
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    let r = (a * &x - b).norm_squared();
    Ok((x, r))
}

/// `omega` and the multipliers of the KKT residual problem.
#[derive(Clone, Debug, PartialEq)]
pub struct KktResidual {
    pub omega: f64,
    pub gammas: Vec<f64>,
    pub etas: Vec<f64>,
}

/// Columns `grad_x p(u, y)` for `y` in `lambda` and `grad psi_j(u)` for `j` in `j_set`.
pub fn kkt_residual(u: &[f64], prob: &FsippProblem, lambda: &[Vec<f64>], j_set: &[usize]) -> Result<KktResidual> {
    check_dim(prob.nvars(), u.len())?;
    let gu = prob.g.eval(u)?;
    if !(gu > 0.0) {
        return Err(FsippError::InvalidProblem(format!("g(u) = {gu} is not positive")));
    }
    let ratio = prob.f.eval(u)? / gu;
    let df = prob.f.gradient_at(u)?;
    let dg = prob.g.gradient_at(u)?;
    let m = prob.nvars();
    let b = DVector::from_fn(m, |i, _| -(df[i] - ratio * dg[i]));
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for y in lambda {
        cols.push(prob.p.grad_x(u, y)?);
    }
    for &j in j_set {
        let psi = prob
            .psis
            .get(j)
            .ok_or_else(|| FsippError::InvalidProblem(format!("no constraint psi{}", j + 1)))?;
        cols.push(psi.gradient_at(u)?);
    }
    let a = DMatrix::from_fn(m, cols.len(), |r, c| cols[c][r]);
    let (x, omega) = nnls(&a, &b)?;
    let nl = lambda.len();
    Ok(KktResidual {
        omega,
        gammas: x.iter().take(nl).copied().collect(),
        etas: x.iter().skip(nl).copied().collect(),
    })
}

/// `max{-p*, psi_j(u)}`
pub fn feasibility_margin(u: &[f64], prob: &FsippProblem, p_star: f64) -> Result<f64> {
    let mut margin = -p_star;
    for psi in &prob.psis {
        margin = margin.max(psi.eval(u)?);
    }
    Ok(margin)
}

pub fn feasibility_check(u: &[f64], prob: &FsippProblem, tau: f64, opts: &LowerLevelOptions) -> Result<(bool, f64)> {
    let ll = lower_level_solve(u, prob, opts)?;
    let margin = feasibility_margin(u, prob, ll.p_star)?;
    Ok((margin <= tau, margin))
}

/// Strict feasibility of a candidate Slater point.
pub fn slater_probe(prob: &FsippProblem, candidate: &[f64], opts: &LowerLevelOptions) -> Result<(bool, f64)> {
    let ll = lower_level_solve(candidate, prob, opts)?;
    let slack = feasibility_margin(candidate, prob, ll.p_star)?;
    Ok((slack < 0.0, slack))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    Inconclusive,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktReport {
    pub point: Vec<f64>,
    pub p_star: f64,
    pub lambda: Vec<Vec<f64>>,
    pub j: Vec<usize>,
    pub omega: f64,
    pub gammas: Vec<f64>,
    pub etas: Vec<f64>,
    pub margin: f64,
    pub feasible_within_tau: bool,
    pub tau: f64,
    pub lower_certified: bool,
    pub lower_order: u32,
}

impl KktReport {
    pub fn verdict(&self) -> Verdict {
        if !self.feasible_within_tau {
            Verdict::Infeasible
        } else if self.lower_certified && self.omega <= self.tau {
            Verdict::Certified
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict() == Verdict::Certified
    }
}

#[derive(Clone, Debug)]
pub struct StopOptions {
    pub tau: f64,
    pub rank_tol: f64,
    pub sdp: SolverOptions,
    pub lower: LowerLevelOptions,
}

impl Default for StopOptions {
    fn default() -> Self {
        StopOptions {
            tau: 1e-3,
            rank_tol: 1e-6,
            sdp: SolverOptions::default(),
            lower: LowerLevelOptions::default(),
        }
    }
}

/// Feasibility within `tau` followed by the KKT residual at `u`.
pub fn stop_criterion(u: &[f64], prob: &FsippProblem, opts: &StopOptions) -> Result<KktReport> {
    let lopts = LowerLevelOptions {
        sdp: opts.sdp,
        ..opts.lower.clone()
    };
    let ll = lower_level_solve(u, prob, &lopts)?;
    let margin = feasibility_margin(u, prob, ll.p_star)?;
    let (lambda, j) = active_sets(u, prob, &ll, opts.tau)?;
    // the KKT system is only meaningful at (nearly) feasible points
    let res = if margin <= opts.tau {
        kkt_residual(u, prob, &lambda, &j)?
    } else {
        KktResidual {
            omega: f64::INFINITY,
            gammas: Vec::new(),
            etas: Vec::new(),
        }
    };
    Ok(KktReport {
        point: u.to_vec(),
        p_star: ll.p_star,
        lambda,
        j,
        omega: res.omega,
        gammas: res.gammas,
        etas: res.etas,
        margin,
        feasible_within_tau: margin <= opts.tau,
        tau: opts.tau,
        lower_certified: ll.certified,
        lower_order: ll.order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(n: usize, t: &[(&[u32], f64)]) -> Polynomial {
        Polynomial::from_terms(n, t.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
    }

    #[test]
    fn nnls_examples() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let (x, r) = nnls(&a, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && r.abs() < 1e-20);
        let (x, r) = nnls(&a, &DVector::from_vec(vec![-1.0, 0.0])).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convexity_examples() {
        assert!(sos_convexity_check(&poly(2, &[(&[2, 0], 1.0), (&[1, 1], 1.0), (&[0, 2], 2.0)])).unwrap());
        assert!(sos_convexity_check(&poly(2, &[(&[4, 0], 1.0), (&[0, 4], 1.0)])).unwrap());
        assert!(!sos_convexity_check(&poly(1, &[(&[3], 1.0)])).unwrap());
        assert!(!sos_convexity_check(&poly(2, &[(&[2, 0], -1.0)])).unwrap());
    }
}
