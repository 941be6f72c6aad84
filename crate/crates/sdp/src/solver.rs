//! Homogeneous self-dual interior-point method.
//!
//! The embedding works on `(x, y, s, tau, kappa)` with
//!
//! ```text
//! A x - b tau            = 0
//! A^T y + s - c tau      = 0
//! b^T y - c^T x - kappa  = 0
//! x in K, s in K*, tau, kappa >= 0
//! ```
//!
//! Free blocks carry `s = 0` and enter the Newton system through an
//! augmented saddle-point matrix `[[M, A_F], [A_F^T, 0]]`, where `M` is the
//! HKM Schur complement of the conic blocks. Each iteration takes a Mehrotra
//! predictor-corrector step. A vanishing `tau` against a growing `kappa`
//! exposes a Farkas certificate of primal or dual infeasibility.

use nalgebra::{DMatrix, DVector};

use crate::error::SdpError;
use crate::problem::{tri_entry, Block, SdpProblem};
use crate::solution::{BlockValue, Residuals, SdpSolution, SdpStatus};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

type SymEntries = Vec<(usize, usize, f64)>;

struct PsdData {
    block: usize,
    dim: usize,
    c: DMatrix<f64>,
    /// Constraint rows touching this block, each as a full symmetric entry
    /// list with `<A, X> = sum v X[r, c]`.
    rows: Vec<(usize, SymEntries)>,
}

#[derive(Default)]
struct VecData {
    c: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    /// (block, local index) for each component.
    origin: Vec<(usize, usize)>,
}

impl VecData {
    fn len(&self) -> usize {
        self.c.len()
    }
}

struct Model {
    m: usize,
    b: DVector<f64>,
    psd: Vec<PsdData>,
    nn: VecData,
    fr: VecData,
    nu: f64,
    norm_b: f64,
    norm_c: f64,
}

fn push_sym(list: &mut SymEntries, i: usize, j: usize, v: f64) {
    if i == j {
        list.push((i, i, v));
    } else {
        list.push((i, j, 0.5 * v));
        list.push((j, i, 0.5 * v));
    }
}

impl Model {
    fn new(prob: &SdpProblem) -> Model {
        let blocks = prob.blocks();
        let mut psd_pos = vec![usize::MAX; blocks.len()];
        let mut vec_pos: Vec<(bool, usize)> = vec![(false, 0); blocks.len()];
        let mut psd = Vec::new();
        let mut nn = VecData::default();
        let mut fr = VecData::default();
        for (b, blk) in blocks.iter().enumerate() {
            match *blk {
                Block::Psd(s) => {
                    psd_pos[b] = psd.len();
                    psd.push(PsdData {
                        block: b,
                        dim: s,
                        c: DMatrix::zeros(s, s),
                        rows: Vec::new(),
                    });
                }
                Block::Nonneg(r) => {
                    vec_pos[b] = (true, nn.len());
                    for i in 0..r {
                        nn.c.push(0.0);
                        nn.cols.push(Vec::new());
                        nn.origin.push((b, i));
                    }
                }
                Block::Free(t) => {
                    vec_pos[b] = (false, fr.len());
                    for i in 0..t {
                        fr.c.push(0.0);
                        fr.cols.push(Vec::new());
                        fr.origin.push((b, i));
                    }
                }
            }
        }
        for (idx, &v) in prob.objective().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let (b, local) = prob.locate(idx);
            match blocks[b] {
                Block::Psd(_) => {
                    let (i, j) = tri_entry(local);
                    let c = &mut psd[psd_pos[b]].c;
                    if i == j {
                        c[(i, i)] += v;
                    } else {
                        c[(i, j)] += 0.5 * v;
                        c[(j, i)] += 0.5 * v;
                    }
                }
                Block::Nonneg(_) => nn.c[vec_pos[b].1 + local] += v,
                Block::Free(_) => fr.c[vec_pos[b].1 + local] += v,
            }
        }
        let m = prob.num_constraints();
        let mut b = DVector::zeros(m);
        for (row, con) in prob.constraints().iter().enumerate() {
            b[row] = con.rhs;
            let mut per_block: Vec<(usize, SymEntries)> = Vec::new();
            for &(idx, v) in &con.terms {
                let (blk, local) = prob.locate(idx);
                match blocks[blk] {
                    Block::Psd(_) => {
                        let p = psd_pos[blk];
                        let (i, j) = tri_entry(local);
                        match per_block.iter_mut().find(|e| e.0 == p) {
                            Some(e) => push_sym(&mut e.1, i, j, v),
                            None => {
                                let mut l = Vec::new();
                                push_sym(&mut l, i, j, v);
                                per_block.push((p, l));
                            }
                        }
                    }
                    Block::Nonneg(_) => nn.cols[vec_pos[blk].1 + local].push((row, v)),
                    Block::Free(_) => fr.cols[vec_pos[blk].1 + local].push((row, v)),
                }
            }
            for (p, l) in per_block {
                psd[p].rows.push((row, l));
            }
        }
        let nu = psd.iter().map(|p| p.dim as f64).sum::<f64>() + nn.len() as f64;
        let norm_b = b.norm();
        let norm_c = (psd.iter().map(|p| p.c.norm_squared()).sum::<f64>()
            + nn.c.iter().map(|v| v * v).sum::<f64>()
            + fr.c.iter().map(|v| v * v).sum::<f64>())
        .sqrt();
        Model {
            m,
            b,
            psd,
            nn,
            fr,
            nu,
            norm_b,
            norm_c,
        }
    }

    fn apply_a(&self, x: &Point) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (p, xm) in self.psd.iter().zip(&x.psd) {
            for (row, entries) in &p.rows {
                out[*row] += entries.iter().map(|&(r, c, v)| v * xm[(r, c)]).sum::<f64>();
            }
        }
        for (k, col) in self.nn.cols.iter().enumerate() {
            for &(row, a) in col {
                out[row] += a * x.nn[k];
            }
        }
        for (k, col) in self.fr.cols.iter().enumerate() {
            for &(row, a) in col {
                out[row] += a * x.fr[k];
            }
        }
        out
    }

    /// `A^T y`, block by block.
    fn apply_at(&self, y: &DVector<f64>) -> Point {
        let psd = self
            .psd
            .iter()
            .map(|p| {
                let mut z = DMatrix::zeros(p.dim, p.dim);
                for (row, entries) in &p.rows {
                    let yr = y[*row];
                    if yr != 0.0 {
                        for &(r, c, v) in entries {
                            z[(r, c)] += v * yr;
                        }
                    }
                }
                z
            })
            .collect();
        let col_dot = |cols: &Vec<Vec<(usize, f64)>>| {
            DVector::from_iterator(
                cols.len(),
                cols.iter()
                    .map(|col| col.iter().map(|&(row, a)| a * y[row]).sum::<f64>()),
            )
        };
        Point {
            psd,
            nn: col_dot(&self.nn.cols),
            fr: col_dot(&self.fr.cols),
        }
    }

    fn c_point(&self) -> Point {
        Point {
            psd: self.psd.iter().map(|p| p.c.clone()).collect(),
            nn: DVector::from_column_slice(&self.nn.c),
            fr: DVector::from_column_slice(&self.fr.c),
        }
    }
}

/// A value in the (scalarized) variable space, split by cone kind.
#[derive(Clone, Debug)]
struct Point {
    psd: Vec<DMatrix<f64>>,
    nn: DVector<f64>,
    fr: DVector<f64>,
}

impl Point {
    fn dot(&self, other: &Point) -> f64 {
        self.psd
            .iter()
            .zip(&other.psd)
            .map(|(a, b)| a.dot(b))
            .sum::<f64>()
            + self.nn.dot(&other.nn)
            + self.fr.dot(&other.fr)
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self + alpha * other`
    fn axpy(&self, alpha: f64, other: &Point) -> Point {
        Point {
            psd: self
                .psd
                .iter()
                .zip(&other.psd)
                .map(|(a, b)| a + b * alpha)
                .collect(),
            nn: &self.nn + &other.nn * alpha,
            fr: &self.fr + &other.fr * alpha,
        }
    }

    fn scale(&self, alpha: f64) -> Point {
        Point {
            psd: self.psd.iter().map(|a| a * alpha).collect(),
            nn: &self.nn * alpha,
            fr: &self.fr * alpha,
        }
    }
}

struct Iterate {
    x: Point,
    s: Point,
    y: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Point,
    ds: Point,
    dy: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Per-iteration factorization data.
struct Scaling {
    sinv: Vec<DMatrix<f64>>,
    /// LU of the augmented matrix `[[M, A_F], [A_F^T, 0]]`; `None` when it is empty.
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    /// Solution of the system for the `tau` column.
    q_y: DVector<f64>,
    q_f: DVector<f64>,
}

impl Scaling {
    fn solve_k(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.lu {
            Some(lu) => lu.solve(rhs),
            None => Some(DVector::zeros(0)),
        }
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn spd_inverse(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let ch = nalgebra::Cholesky::new(s.clone())?;
    let inv = ch.inverse();
    if inv.iter().all(|v| v.is_finite()) {
        Some(sym(inv))
    } else {
        None
    }
}

/// Largest `alpha` with `x + alpha * dx` in the cone (may be infinite).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let ch = nalgebra::Cholesky::new(x.clone())?;
    let l = ch.l();
    let w = l.solve_lower_triangular(dx)?;
    let w2 = l.solve_lower_triangular(&w.transpose())?;
    let eig = nalgebra::SymmetricEigen::new(sym(w2));
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

fn max_step_vec(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn max_step_scalar(x: f64, dx: f64) -> f64 {
    if dx < 0.0 {
        -x / dx
    } else {
        f64::INFINITY
    }
}

struct Solver<'a> {
    model: &'a Model,
    c: Point,
}

impl<'a> Solver<'a> {
    /// `D(Z) = sym(X Z S^{-1})` on PSD blocks, `x/s * z` on the orthant, zero on free blocks.
    fn apply_d(&self, it: &Iterate, sinv: &[DMatrix<f64>], z: &Point) -> Point {
        Point {
            psd: it
                .x
                .psd
                .iter()
                .zip(sinv)
                .zip(&z.psd)
                .map(|((x, si), zm)| sym(x * zm * si))
                .collect(),
            nn: DVector::from_iterator(
                z.nn.len(),
                (0..z.nn.len()).map(|k| it.x.nn[k] / it.s.nn[k] * z.nn[k]),
            ),
            fr: DVector::zeros(z.fr.len()),
        }
    }

    fn schur(&self, it: &Iterate, sinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.model.m;
        let mut mat = DMatrix::zeros(m, m);
        for ((p, x), si) in self.model.psd.iter().zip(&it.x.psd).zip(sinv) {
            let n = p.dim;
            for (row_j, entries_j) in &p.rows {
                let mut pj = DMatrix::<f64>::zeros(n, n);
                for &(r, c, v) in entries_j {
                    // P_j += v * X[:, r] * Sinv[c, :]
                    for col in 0..n {
                        let f = v * si[(c, col)];
                        if f != 0.0 {
                            for a in 0..n {
                                pj[(a, col)] += f * x[(a, r)];
                            }
                        }
                    }
                }
                for (row_i, entries_i) in &p.rows {
                    let val: f64 = entries_i.iter().map(|&(r, c, v)| v * pj[(c, r)]).sum();
                    mat[(*row_i, *row_j)] += val;
                }
            }
        }
        for (k, col) in self.model.nn.cols.iter().enumerate() {
            let w = it.x.nn[k] / it.s.nn[k];
            for &(ri, ai) in col {
                for &(rj, aj) in col {
                    mat[(ri, rj)] += w * ai * aj;
                }
            }
        }
        mat
    }

    fn factor(&self, it: &Iterate) -> Option<Scaling> {
        let sinv: Vec<DMatrix<f64>> = it
            .s
            .psd
            .iter()
            .map(spd_inverse)
            .collect::<Option<Vec<_>>>()?;
        let m = self.model.m;
        let t = self.model.fr.len();
        let schur = self.schur(it, &sinv);
        let build = |reg: f64| {
            let mut k = DMatrix::zeros(m + t, m + t);
            k.view_mut((0, 0), (m, m)).copy_from(&schur);
            for (j, col) in self.model.fr.cols.iter().enumerate() {
                for &(row, a) in col {
                    k[(row, m + j)] = a;
                    k[(m + j, row)] = a;
                }
            }
            if reg > 0.0 {
                let scale = (0..m).map(|i| schur[(i, i)].abs()).fold(1.0, f64::max);
                for i in 0..m {
                    k[(i, i)] += reg * scale;
                }
                for j in 0..t {
                    k[(m + j, m + j)] -= reg * scale;
                }
            }
            k
        };
        let d_c = self.apply_d(it, &sinv, &self.c);
        let mut rhs = DVector::zeros(m + t);
        let adc = self.model.apply_a(&d_c);
        for i in 0..m {
            rhs[i] = adc[i] + self.model.b[i];
        }
        for j in 0..t {
            rhs[m + j] = self.c.fr[j];
        }
        if m + t == 0 {
            return Some(Scaling {
                sinv,
                q_y: DVector::zeros(0),
                q_f: DVector::zeros(0),
                lu: None,
            });
        }
        for reg in [0.0, 1e-13, 1e-11, 1e-9] {
            let lu = build(reg).lu();
            if let Some(sol) = lu.solve(&rhs) {
                if sol.iter().all(|v| v.is_finite()) {
                    return Some(Scaling {
                        sinv,
                        q_y: sol.rows(0, m).into_owned(),
                        q_f: sol.rows(m, t).into_owned(),
                        lu: Some(lu),
                    });
                }
            }
        }
        None
    }

    /// Newton direction with centering target `sigma_mu`, residual weight `eta`
    /// and an optional second-order correction from a predictor direction.
    fn direction(
        &self,
        it: &Iterate,
        sc: &Scaling,
        sigma_mu: f64,
        eta: f64,
        corr: Option<&Direction>,
        res: &ResidualSet,
    ) -> Option<Direction> {
        let model = self.model;
        let m = model.m;
        let t = model.fr.len();
        // R_c: complementarity right-hand side, conic blocks only.
        let rc = Point {
            psd: it
                .x
                .psd
                .iter()
                .zip(&sc.sinv)
                .enumerate()
                .map(|(b, (x, si))| {
                    let mut r = si * sigma_mu - x;
                    if let Some(d) = corr {
                        r -= sym(&d.dx.psd[b] * &d.ds.psd[b] * si);
                    }
                    r
                })
                .collect(),
            nn: DVector::from_iterator(
                it.x.nn.len(),
                (0..it.x.nn.len()).map(|k| {
                    let mut v = sigma_mu - it.x.nn[k] * it.s.nn[k];
                    if let Some(d) = corr {
                        v -= d.dx.nn[k] * d.ds.nn[k];
                    }
                    v / it.s.nn[k]
                }),
            ),
            fr: DVector::zeros(t),
        };
        let mut tc = sigma_mu - it.tau * it.kappa;
        if let Some(d) = corr {
            tc -= d.dtau * d.dkappa;
        }
        let d_rd = self.apply_d(it, &sc.sinv, &res.rd);
        let inner = rc.axpy(-eta, &d_rd);
        let a_inner = model.apply_a(&inner);
        let mut rhs = DVector::zeros(m + t);
        for i in 0..m {
            rhs[i] = eta * res.rp[i] - a_inner[i];
        }
        for j in 0..t {
            rhs[m + j] = eta * res.rd.fr[j];
        }
        let sol = sc.solve_k(&rhs)?;
        let p_y = sol.rows(0, m).into_owned();
        let p_f = sol.rows(m, t).into_owned();

        // u0 = R_c - D(eta R_d - A^T p_y), u1 = -D(C - A^T q_y)
        let at_py = model.apply_at(&p_y);
        let at_qy = model.apply_at(&sc.q_y);
        let u0 = rc.axpy(-1.0, &self.apply_d(it, &sc.sinv, &res.rd.scale(eta).axpy(-1.0, &at_py)));
        let u1 = self
            .apply_d(it, &sc.sinv, &self.c.axpy(-1.0, &at_qy))
            .scale(-1.0);
        let c_conic = |p: &Point| {
            p.psd
                .iter()
                .zip(&self.c.psd)
                .map(|(a, c)| a.dot(c))
                .sum::<f64>()
                + p.nn.dot(&self.c.nn)
        };
        let num = eta * res.rg - model.b.dot(&p_y) + c_conic(&u0) + self.c.fr.dot(&p_f) + tc / it.tau;
        let den = model.b.dot(&sc.q_y) - c_conic(&u1) - self.c.fr.dot(&sc.q_f) + it.kappa / it.tau;
        if den == 0.0 || !den.is_finite() {
            return None;
        }
        let dtau = num / den;
        let dy = &p_y + &sc.q_y * dtau;
        let dxf = &p_f + &sc.q_f * dtau;
        let at_dy = model.apply_at(&dy);
        let mut ds = res.rd.scale(eta).axpy(-1.0, &at_dy).axpy(dtau, &self.c);
        ds.fr = DVector::zeros(t);
        let mut dx = rc.axpy(-1.0, &self.apply_d(it, &sc.sinv, &ds));
        dx.fr = dxf;
        let dkappa = (tc - it.kappa * dtau) / it.tau;
        let ok = dx.norm().is_finite() && ds.norm().is_finite() && dtau.is_finite();
        ok.then_some(Direction {
            dx,
            ds,
            dy,
            dtau,
            dkappa,
        })
    }

    fn max_step(&self, it: &Iterate, d: &Direction) -> Option<f64> {
        let mut a = f64::INFINITY;
        for (x, dx) in it.x.psd.iter().zip(&d.dx.psd) {
            a = a.min(max_step_psd(x, dx)?);
        }
        for (s, ds) in it.s.psd.iter().zip(&d.ds.psd) {
            a = a.min(max_step_psd(s, ds)?);
        }
        a = a.min(max_step_vec(&it.x.nn, &d.dx.nn));
        a = a.min(max_step_vec(&it.s.nn, &d.ds.nn));
        a = a.min(max_step_scalar(it.tau, d.dtau));
        a = a.min(max_step_scalar(it.kappa, d.dkappa));
        Some(a)
    }

    fn residuals(&self, it: &Iterate) -> ResidualSet {
        let model = self.model;
        let ax = model.apply_a(&it.x);
        let rp = &model.b * it.tau - ax;
        let at_y = model.apply_at(&it.y);
        let mut rd = self.c.scale(it.tau).axpy(-1.0, &at_y).axpy(-1.0, &it.s);
        // free slack is identically zero
        rd.fr = &self.c.fr * it.tau - &at_y.fr;
        let rg = it.kappa + self.c.dot(&it.x) - model.b.dot(&it.y);
        ResidualSet { rp, rd, rg }
    }
}

struct ResidualSet {
    rp: DVector<f64>,
    rd: Point,
    rg: f64,
}

fn to_blocks(model: &Model, nblocks: usize, p: &Point, blocks: &[Block]) -> Vec<BlockValue> {
    let mut out: Vec<Option<BlockValue>> = vec![None; nblocks];
    for (data, mat) in model.psd.iter().zip(&p.psd) {
        out[data.block] = Some(BlockValue::Psd(sym(mat.clone())));
    }
    for (b, blk) in blocks.iter().enumerate() {
        match blk {
            Block::Nonneg(r) => out[b] = Some(BlockValue::Nonneg(vec![0.0; *r])),
            Block::Free(t) => out[b] = Some(BlockValue::Free(vec![0.0; *t])),
            Block::Psd(_) => {}
        }
    }
    for (k, &(b, i)) in model.nn.origin.iter().enumerate() {
        if let Some(BlockValue::Nonneg(v)) = &mut out[b] {
            v[i] = p.nn[k];
        }
    }
    for (k, &(b, i)) in model.fr.origin.iter().enumerate() {
        if let Some(BlockValue::Free(v)) = &mut out[b] {
            v[i] = p.fr[k];
        }
    }
    out.into_iter().map(|v| v.expect("every block filled")).collect()
}

/// Solves `prob` with the homogeneous self-dual interior-point method.
///
/// Returns `Err` only for malformed input; solver outcomes, including
/// infeasibility and numerical failure, are reported through
/// [`SdpSolution::status`]. The iteration is fully deterministic.
pub fn solve(prob: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    prob.validate()?;
    let model = Model::new(prob);
    let solver = Solver {
        model: &model,
        c: model.c_point(),
    };
    let mut it = Iterate {
        x: Point {
            psd: model.psd.iter().map(|p| DMatrix::identity(p.dim, p.dim)).collect(),
            nn: DVector::from_element(model.nn.len(), 1.0),
            fr: DVector::zeros(model.fr.len()),
        },
        s: Point {
            psd: model.psd.iter().map(|p| DMatrix::identity(p.dim, p.dim)).collect(),
            nn: DVector::from_element(model.nn.len(), 1.0),
            fr: DVector::zeros(model.fr.len()),
        },
        y: DVector::zeros(model.m),
        tau: 1.0,
        kappa: 1.0,
    };
    let tol = opts.tol;
    let status;
    let mut iterations = 0;
    let mut stalls = 0;
    loop {
        let res = solver.residuals(&it);
        let gap_xs = it.x.dot(&it.s);
        let mu = (gap_xs + it.tau * it.kappa) / (model.nu + 1.0);

        let pres = res.rp.norm() / it.tau / (1.0 + model.norm_b);
        let dres = res.rd.norm() / it.tau / (1.0 + model.norm_c);
        let pobj = solver.c.dot(&it.x) / it.tau;
        let dobj = model.b.dot(&it.y) / it.tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        if pres <= tol && dres <= tol && gap <= tol {
            status = SdpStatus::Optimal;
            break;
        }
        // Farkas certificates
        let by = model.b.dot(&it.y);
        if by > 0.0 {
            let at_y = model.apply_at(&it.y);
            let cert = at_y.axpy(1.0, &it.s);
            let mut cert_norm2 = cert.psd.iter().map(|m| m.norm_squared()).sum::<f64>()
                + cert.nn.norm_squared();
            cert_norm2 += at_y.fr.norm_squared();
            if cert_norm2.sqrt() <= tol * by * (1.0 + model.norm_c).max(1.0) && it.tau < it.kappa {
                status = SdpStatus::PrimalInfeasible;
                break;
            }
        }
        let cx = solver.c.dot(&it.x);
        if cx < 0.0 {
            let ax = model.apply_a(&it.x);
            if ax.norm() <= tol * (-cx) * (1.0 + model.norm_b).max(1.0) && it.tau < it.kappa {
                status = SdpStatus::DualInfeasible;
                break;
            }
        }
        if iterations >= opts.max_iter {
            status = SdpStatus::IterLimit;
            break;
        }
        iterations += 1;

        let Some(sc) = solver.factor(&it) else {
            status = SdpStatus::NumericalTrouble;
            break;
        };
        let Some(aff) = solver.direction(&it, &sc, 0.0, 1.0, None, &res) else {
            status = SdpStatus::NumericalTrouble;
            break;
        };
        let Some(a_aff) = solver.max_step(&it, &aff) else {
            status = SdpStatus::NumericalTrouble;
            break;
        };
        let a_aff = a_aff.min(1.0);
        let x_a = it.x.axpy(a_aff, &aff.dx);
        let s_a = it.s.axpy(a_aff, &aff.ds);
        let mu_aff = (x_a.dot(&s_a) + (it.tau + a_aff * aff.dtau) * (it.kappa + a_aff * aff.dkappa))
            / (model.nu + 1.0);
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let Some(dir) = solver.direction(&it, &sc, sigma * mu, 1.0 - sigma, Some(&aff), &res) else {
            status = SdpStatus::NumericalTrouble;
            break;
        };
        let Some(a_max) = solver.max_step(&it, &dir) else {
            status = SdpStatus::NumericalTrouble;
            break;
        };
        let alpha = (0.98 * a_max).min(1.0);
        if alpha < 1e-10 {
            stalls += 1;
            if stalls > 3 {
                status = SdpStatus::NumericalTrouble;
                break;
            }
        } else {
            stalls = 0;
        }
        it.x = it.x.axpy(alpha, &dir.dx);
        it.s = it.s.axpy(alpha, &dir.ds);
        it.y += &dir.dy * alpha;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
        for m in it.x.psd.iter_mut().chain(it.s.psd.iter_mut()) {
            *m = sym(m.clone());
        }
        if !(it.tau > 0.0 && it.kappa > 0.0) {
            status = SdpStatus::NumericalTrouble;
            break;
        }
    }

    let certificate = matches!(
        status,
        SdpStatus::PrimalInfeasible | SdpStatus::DualInfeasible
    );
    let scale = if certificate { 1.0 } else { 1.0 / it.tau };
    let x = it.x.scale(scale);
    let s = it.s.scale(scale);
    let y = &it.y * scale;
    let primal_value = solver.c.dot(&x);
    let dual_value = model.b.dot(&y);
    let rp = model.apply_a(&x) - &model.b;
    let at_y = model.apply_at(&y);
    let mut rd = solver.c.axpy(-1.0, &at_y).axpy(-1.0, &s);
    rd.fr = &solver.c.fr - &at_y.fr;
    let residuals = Residuals {
        primal: rp.norm() / (1.0 + model.norm_b),
        dual: rd.norm() / (1.0 + model.norm_c),
        gap: (primal_value - dual_value).abs() / (1.0 + primal_value.abs()),
    };
    Ok(SdpSolution {
        status,
        primal_value,
        dual_value,
        primal_point: to_blocks(&model, prob.blocks().len(), &x, prob.blocks()),
        dual_point: y.iter().cloned().collect(),
        dual_slack: to_blocks(&model, prob.blocks().len(), &s, prob.blocks()),
        iterations,
        residuals,
    })
}
