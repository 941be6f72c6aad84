//! Monomial bases, moment and localizing matrices, cone descriptions and their
//! compilation into SDP blocks.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, FsippError, Result};
use crate::poly::{BivariatePoly, Monomial, Polynomial};
use crate::program::{LinExpr, ProgramBuilder, PsdHandle};

fn exps_of_degree(nvars: usize, deg: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == nvars {
        prefix.push(deg);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=deg).rev() {
        prefix.push(e);
        exps_of_degree(nvars, deg - e, prefix, out);
        prefix.pop();
    }
}

/// All monomials of degree at most `max_degree`, in graded-lex order.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    nvars: usize,
    max_degree: u32,
    monos: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl MonomialBasis {
    pub fn new(nvars: usize, max_degree: u32) -> Self {
        let mut monos = Vec::new();
        if nvars == 0 {
            monos.push(Monomial::new(Vec::new()));
        } else {
            for d in 0..=max_degree {
                let mut out = Vec::new();
                exps_of_degree(nvars, d, &mut Vec::new(), &mut out);
                monos.extend(out.into_iter().map(Monomial::new));
            }
        }
        let index = monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        MonomialBasis {
            nvars,
            max_degree,
            monos,
            index,
        }
    }

    /// A basis made of the given monomials, in the given order.
    pub fn from_monomials(nvars: usize, monos: Vec<Monomial>) -> Self {
        let max_degree = monos.iter().map(|m| m.degree()).max().unwrap_or(0);
        let index = monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        MonomialBasis {
            nvars,
            max_degree,
            monos,
            index,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monos
    }

    pub fn get(&self, i: usize) -> &Monomial {
        &self.monos[i]
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Number of monomials of degree `<= d` (a prefix of the enumeration).
    pub fn prefix_len(&self, d: u32) -> usize {
        self.monos.iter().take_while(|m| m.degree() <= d).count()
    }
}

/// `binom(n + k, k)`
pub fn basis_size(nvars: usize, k: u32) -> usize {
    let mut r: u128 = 1;
    for i in 1..=k as u128 {
        r = r * (nvars as u128 + i) / i;
    }
    r as usize
}

/// A linear functional on `R[x]_{2k}` given by its moments.
#[derive(Clone, Debug)]
pub struct MomentFunctional {
    order: u32,
    basis: MonomialBasis,
    values: Vec<f64>,
}

impl MomentFunctional {
    /// `values` are indexed by the graded-lex basis of degree `2 * order`.
    pub fn new(nvars: usize, order: u32, values: Vec<f64>) -> Result<Self> {
        let basis = MonomialBasis::new(nvars, 2 * order);
        check_dim(basis.len(), values.len())?;
        Ok(MomentFunctional {
            order,
            basis,
            values,
        })
    }

    pub fn from_fn(nvars: usize, order: u32, f: impl Fn(&Monomial) -> f64) -> Self {
        let basis = MonomialBasis::new(nvars, 2 * order);
        let values = basis.monomials().iter().map(f).collect();
        MomentFunctional {
            order,
            basis,
            values,
        }
    }

    pub fn zeros(nvars: usize, order: u32) -> Self {
        MomentFunctional::from_fn(nvars, order, |_| 0.0)
    }

    /// Moments of `sum_j w_j delta_{a_j}`.
    pub fn from_atoms(nvars: usize, order: u32, atoms: &[(Vec<f64>, f64)]) -> Result<Self> {
        for (a, _) in atoms {
            check_dim(nvars, a.len())?;
        }
        Ok(MomentFunctional::from_fn(nvars, order, |m| {
            atoms.iter().map(|(a, w)| w * m.eval(a)).sum()
        }))
    }

    pub fn nvars(&self) -> usize {
        self.basis.nvars()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, m: &Monomial) -> Option<f64> {
        self.basis.index_of(m).map(|i| self.values[i])
    }

    /// `L(1)`
    pub fn mass(&self) -> f64 {
        self.values[0]
    }

    pub fn apply(&self, p: &Polynomial) -> Result<f64> {
        check_dim(self.nvars(), p.nvars())?;
        let mut s = 0.0;
        for (m, c) in p.terms() {
            let v = self.get(m).ok_or_else(|| {
                FsippError::DegreeOverflow(format!(
                    "degree {} exceeds functional order 2*{}",
                    m.degree(),
                    self.order
                ))
            })?;
            s += c * v;
        }
        Ok(s)
    }

    pub fn scale(&self, a: f64) -> MomentFunctional {
        MomentFunctional {
            order: self.order,
            basis: self.basis.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    pub fn truncate(&self, order: u32) -> Result<MomentFunctional> {
        if order > self.order {
            return Err(FsippError::DegreeOverflow(format!(
                "cannot extend order {} to {order}",
                self.order
            )));
        }
        let n = basis_size(self.nvars(), 2 * order);
        MomentFunctional::new(self.nvars(), order, self.values[..n].to_vec())
    }
}

/// Entry `(i, j)` as a combination of moment indices: `L(q * m_i * m_j)`.
type Structure = Vec<Vec<Vec<(usize, f64)>>>;

fn localizing_structure(full: &MonomialBasis, rows: &MonomialBasis, q: &Polynomial) -> Result<Structure> {
    let s = rows.len();
    let mut out = vec![vec![Vec::new(); s]; s];
    for i in 0..s {
        for j in 0..=i {
            let mij = rows.get(i).mul(rows.get(j));
            let mut e = Vec::new();
            for (m, c) in q.terms() {
                let idx = full.index_of(&mij.mul(m)).ok_or_else(|| {
                    FsippError::DegreeOverflow("localizing entry exceeds functional degree".into())
                })?;
                e.push((idx, c));
            }
            out[j][i] = e.clone();
            out[i][j] = e;
        }
    }
    Ok(out)
}

fn half_ceil(d: u32) -> u32 {
    d.div_ceil(2)
}

/// Row basis of the order-`k` localizing matrix of `q`, or `None` when empty.
fn localizing_rows(nvars: usize, q: &Polynomial, k: u32) -> Option<MonomialBasis> {
    let dq = half_ceil(q.degree_or_zero());
    (k >= dq).then(|| MonomialBasis::new(nvars, k - dq))
}

fn eval_structure(st: &Structure, values: &[f64]) -> DMatrix<f64> {
    let s = st.len();
    DMatrix::from_fn(s, s, |i, j| st[i][j].iter().map(|&(k, c)| c * values[k]).sum())
}

pub fn moment_matrix(l: &MomentFunctional, k: u32) -> Result<DMatrix<f64>> {
    localizing_matrix(l, &Polynomial::constant(l.nvars(), 1.0), k)
}

/// `(L(q x^{a+b}))_{a,b}` indexed by `N_{k - ceil(deg q / 2)}`.
pub fn localizing_matrix(l: &MomentFunctional, q: &Polynomial, k: u32) -> Result<DMatrix<f64>> {
    check_dim(l.nvars(), q.nvars())?;
    if k > l.order() {
        return Err(FsippError::DegreeOverflow(format!(
            "order {k} exceeds functional order {}",
            l.order()
        )));
    }
    let rows = localizing_rows(l.nvars(), q, k)
        .ok_or_else(|| FsippError::DegreeOverflow(format!("deg q exceeds 2*{k}")))?;
    let st = localizing_structure(l.basis(), &rows, q)?;
    Ok(eval_structure(&st, l.values()))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Description of a cone of polynomials.
#[derive(Clone, Debug, PartialEq)]
pub enum ConeSpec {
    /// Sums of squares of degree at most `degree` in `nvars` variables.
    SosBounded { nvars: usize, degree: u32 },
    /// `theta0 + theta1 (1 - y^2)` with both terms of degree at most `cap`.
    IntervalUnivariate { cap: u32 },
    /// `theta + lambda phi` with `theta` SOS of degree 2 and `lambda >= 0`.
    SLemma { phi: Polynomial },
    /// Order-`order` quadratic module of `generators`, plus the ideal of `equalities`.
    QModule {
        nvars: usize,
        generators: Vec<Polynomial>,
        equalities: Vec<Polynomial>,
        order: u32,
    },
}

impl ConeSpec {
    /// Interval cone sized for a polynomial of y-degree `d_y`.
    pub fn interval_for(d_y: u32) -> Self {
        ConeSpec::IntervalUnivariate {
            cap: 2 * half_ceil(d_y),
        }
    }

    pub fn nvars(&self) -> usize {
        match self {
            ConeSpec::SosBounded { nvars, .. } | ConeSpec::QModule { nvars, .. } => *nvars,
            ConeSpec::IntervalUnivariate { .. } => 1,
            ConeSpec::SLemma { phi } => phi.nvars(),
        }
    }

    pub fn degree_bound(&self) -> u32 {
        match self {
            ConeSpec::SosBounded { degree, .. } => 2 * half_ceil(*degree),
            ConeSpec::IntervalUnivariate { cap } => *cap,
            ConeSpec::SLemma { .. } => 2,
            ConeSpec::QModule { order, .. } => 2 * order,
        }
    }

    /// Order of the moment functionals in the dual cone.
    pub fn dual_order(&self) -> u32 {
        self.degree_bound() / 2
    }

    /// Weighted SOS terms `(multiplier, Gram basis)` of the cone.
    fn sos_terms(&self) -> Vec<(Polynomial, MonomialBasis)> {
        let n = self.nvars();
        let one = Polynomial::constant(n, 1.0);
        match self {
            ConeSpec::SosBounded { degree, .. } => vec![(one, MonomialBasis::new(n, half_ceil(*degree)))],
            ConeSpec::IntervalUnivariate { cap } => {
                let d = cap / 2;
                let mut v = vec![(one.clone(), MonomialBasis::new(1, d))];
                if d >= 1 {
                    let g = &one - &Polynomial::var(1, 0).pow(2);
                    v.push((g, MonomialBasis::new(1, d - 1)));
                }
                v
            }
            ConeSpec::SLemma { .. } => vec![(one, MonomialBasis::new(n, 1))],
            ConeSpec::QModule {
                generators, order, ..
            } => {
                let mut v = vec![(one, MonomialBasis::new(n, *order))];
                for g in generators {
                    if let Some(b) = localizing_rows(n, g, *order) {
                        v.push((g.clone(), b));
                    }
                }
                v
            }
        }
    }
}

/// Polynomial whose coefficients are affine in builder variables.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePoly {
    pub nvars: usize,
    pub terms: BTreeMap<Monomial, LinExpr>,
}

impl AffinePoly {
    pub fn zero(nvars: usize) -> Self {
        AffinePoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        let mut a = AffinePoly::zero(p.nvars());
        a.add_poly_times(p, &LinExpr::constant(1.0));
        a
    }

    /// `self += p * e`
    pub fn add_poly_times(&mut self, p: &Polynomial, e: &LinExpr) {
        for (m, c) in p.terms() {
            self.terms
                .entry(m.clone())
                .or_default()
                .add_scaled(e, c);
        }
    }

    pub fn add_scaled(&mut self, other: &AffinePoly, a: f64) {
        for (m, e) in &other.terms {
            self.terms.entry(m.clone()).or_default().add_scaled(e, a);
        }
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms
            .iter()
            .filter(|(_, e)| !(e.is_constant() && e.constant == 0.0))
            .map(|(m, _)| m.degree())
            .max()
    }

    pub fn eval_coeffs(&self, x: &[f64]) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .map(|(m, e)| (m.exponents().to_vec(), e.eval(x)));
        Polynomial::from_terms(self.nvars, terms.collect::<Vec<_>>()).expect("consistent dimensions")
    }
}

/// A moment functional whose values are builder expressions.
#[derive(Clone, Debug)]
pub struct SymbolicFunctional {
    pub basis: MonomialBasis,
    pub exprs: Vec<LinExpr>,
    order: u32,
}

impl SymbolicFunctional {
    /// One free builder variable per moment of degree `<= 2 * order`.
    pub fn new_free(b: &mut ProgramBuilder, nvars: usize, order: u32) -> Self {
        let basis = MonomialBasis::new(nvars, 2 * order);
        let start = b.add_free(basis.len());
        let exprs = (0..basis.len()).map(|i| LinExpr::var(start + i)).collect();
        SymbolicFunctional { basis, exprs, order }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn nvars(&self) -> usize {
        self.basis.nvars()
    }

    pub fn apply(&self, p: &Polynomial) -> Result<LinExpr> {
        check_dim(self.nvars(), p.nvars())?;
        let mut e = LinExpr::default();
        for (m, c) in p.terms() {
            let i = self.basis.index_of(m).ok_or_else(|| {
                FsippError::DegreeOverflow(format!("degree {} exceeds 2*{}", m.degree(), self.order))
            })?;
            e.add_scaled(&self.exprs[i], c);
        }
        Ok(e)
    }

    pub fn values_at(&self, x: &[f64]) -> MomentFunctional {
        let vals = self.exprs.iter().map(|e| e.eval(x)).collect();
        MomentFunctional::new(self.nvars(), self.order, vals).expect("basis length matches")
    }

    fn matrix(&self, st: &Structure) -> Vec<Vec<LinExpr>> {
        st.iter()
            .map(|row| {
                row.iter()
                    .map(|entry| {
                        let mut e = LinExpr::default();
                        for &(k, c) in entry {
                            e.add_scaled(&self.exprs[k], c);
                        }
                        e
                    })
                    .collect()
            })
            .collect()
    }
}

/// Coefficient-matching equalities `sum_k mult_k * v_k^T G_k v_k + ... = target`.
#[derive(Clone, Debug, Default)]
pub struct GramAccumulator {
    acc: BTreeMap<Monomial, LinExpr>,
}

impl GramAccumulator {
    pub fn new() -> Self {
        GramAccumulator::default()
    }

    /// Adds `mult * v^T (G + t I) v` for a fresh Gram block `G` on `basis`.
    pub fn add_gram(
        &mut self,
        b: &mut ProgramBuilder,
        mult: &Polynomial,
        basis: &MonomialBasis,
        shift: Option<&LinExpr>,
    ) -> PsdHandle {
        let h = b.add_psd(basis.len());
        for i in 0..basis.len() {
            for j in 0..=i {
                let mij = basis.get(i).mul(basis.get(j));
                let w = if i == j { 1.0 } else { 2.0 };
                for (m, c) in mult.terms() {
                    let e = self.acc.entry(mij.mul(m)).or_default();
                    e.add_term(h.entry(i, j), w * c);
                    if i == j {
                        if let Some(t) = shift {
                            e.add_scaled(t, c);
                        }
                    }
                }
            }
        }
        h
    }

    /// Adds `p * e`.
    pub fn add_poly_times(&mut self, p: &Polynomial, e: &LinExpr) {
        for (m, c) in p.terms() {
            self.acc.entry(m.clone()).or_default().add_scaled(e, c);
        }
    }

    /// Emits one equality per monomial.
    pub fn finish(mut self, b: &mut ProgramBuilder, target: &AffinePoly) {
        for (m, e) in &target.terms {
            self.acc.entry(m.clone()).or_default().add_scaled(e, -1.0);
        }
        for e in self.acc.values() {
            if e.is_constant() && e.constant == 0.0 {
                continue;
            }
            b.add_eq(e, 0.0);
        }
    }
}

/// Gram blocks and multipliers created by a membership constraint.
#[derive(Clone, Debug)]
pub struct Membership {
    /// One Gram block per SOS term, with its multiplier polynomial and basis.
    pub grams: Vec<(PsdHandle, Polynomial, MonomialBasis)>,
    pub lambda: Option<usize>,
    /// Free coefficient vectors of the equality multipliers.
    pub eq_multipliers: Vec<(usize, MonomialBasis)>,
}

/// Constrains `target` to lie in `cone` through Gram matrices.
pub fn sos_membership_blocks(b: &mut ProgramBuilder, target: &AffinePoly, cone: &ConeSpec) -> Result<Membership> {
    sos_membership_blocks_shifted(b, target, cone, None)
}

/// As [`sos_membership_blocks`], with every Gram matrix replaced by `G + t I`.
pub fn sos_membership_blocks_shifted(
    b: &mut ProgramBuilder,
    target: &AffinePoly,
    cone: &ConeSpec,
    shift: Option<&LinExpr>,
) -> Result<Membership> {
    check_dim(cone.nvars(), target.nvars)?;
    let bound = cone.degree_bound();
    if let Some(d) = target.degree() {
        if d > bound {
            return Err(FsippError::DegreeOverflow(format!(
                "target degree {d} exceeds cone degree bound {bound}"
            )));
        }
    }
    let n = cone.nvars();
    let mut acc = GramAccumulator::new();
    let mut grams = Vec::new();
    for (mult, basis) in cone.sos_terms() {
        let h = acc.add_gram(b, &mult, &basis, shift);
        grams.push((h, mult, basis));
    }
    let mut lambda = None;
    let mut eq_multipliers = Vec::new();
    match cone {
        ConeSpec::SLemma { phi } => {
            let l = b.add_nonneg(1);
            acc.add_poly_times(phi, &LinExpr::var(l));
            lambda = Some(l);
        }
        ConeSpec::QModule { equalities, .. } => {
            for e in equalities {
                let de = e.degree_or_zero();
                if de > bound {
                    continue;
                }
                let basis = MonomialBasis::new(n, bound - de);
                let start = b.add_free(basis.len());
                for (i, mb) in basis.monomials().iter().enumerate() {
                    acc.add_poly_times(&(e * &Polynomial::monomial(mb.clone(), 1.0)), &LinExpr::var(start + i));
                }
                eq_multipliers.push((start, basis));
            }
        }
        _ => {}
    }
    acc.finish(b, target);
    Ok(Membership {
        grams,
        lambda,
        eq_multipliers,
    })
}

/// Constrains a symbolic functional to the dual cone of `cone`.
pub fn dual_cone_blocks(b: &mut ProgramBuilder, l: &SymbolicFunctional, cone: &ConeSpec) -> Result<Vec<PsdHandle>> {
    check_dim(cone.nvars(), l.nvars())?;
    if cone.dual_order() > l.order() {
        return Err(FsippError::DegreeOverflow(format!(
            "cone needs order {} but functional has order {}",
            cone.dual_order(),
            l.order()
        )));
    }
    let mut handles = Vec::new();
    for (mult, rows) in cone.sos_terms() {
        let st = localizing_structure(&l.basis, &rows, &mult)?;
        handles.push(b.add_psd_constraint(&l.matrix(&st)));
    }
    match cone {
        ConeSpec::SLemma { phi } => {
            b.add_nonneg_constraint(&l.apply(phi)?);
        }
        ConeSpec::QModule {
            nvars,
            equalities,
            order,
            ..
        } => {
            for e in equalities {
                let de = e.degree_or_zero();
                if de > 2 * order {
                    continue;
                }
                for m in MonomialBasis::new(*nvars, 2 * order - de).monomials() {
                    let shifted = e * &Polynomial::monomial(m.clone(), 1.0);
                    b.add_eq(&l.apply(&shifted)?, 0.0);
                }
            }
        }
        _ => {}
    }
    Ok(handles)
}

/// Smallest eigenvalue over all blocks of the dual-cone constraints at `l`
/// (negative when violated). Equality rows count as `-|L(e x^a)|`.
pub fn dual_cone_min_eig(l: &MomentFunctional, cone: &ConeSpec) -> Result<f64> {
    check_dim(cone.nvars(), l.nvars())?;
    if cone.dual_order() > l.order() {
        return Err(FsippError::DegreeOverflow("functional order too small for cone".into()));
    }
    let mut worst = f64::INFINITY;
    for (mult, rows) in cone.sos_terms() {
        let st = localizing_structure(l.basis(), &rows, &mult)?;
        worst = worst.min(min_eigenvalue(&eval_structure(&st, l.values())));
    }
    match cone {
        ConeSpec::SLemma { phi } => worst = worst.min(l.apply(phi)?),
        ConeSpec::QModule {
            nvars,
            equalities,
            order,
            ..
        } => {
            for e in equalities {
                let de = e.degree_or_zero();
                if de > 2 * order {
                    continue;
                }
                for m in MonomialBasis::new(*nvars, 2 * order - de).monomials() {
                    let v = l.apply(&(e * &Polynomial::monomial(m.clone(), 1.0)))?;
                    worst = worst.min(-v.abs());
                }
            }
        }
        _ => {}
    }
    Ok(worst)
}

/// `L(p(x, y))` as a polynomial in `y`.
pub fn poly_image_in_y(l: &MomentFunctional, p: &BivariatePoly) -> Result<Polynomial> {
    check_dim(l.nvars(), p.n_x())?;
    let mut terms = Vec::new();
    for (my, px) in p.slices() {
        terms.push((my.exponents().to_vec(), l.apply(px)?));
    }
    Polynomial::from_terms(p.n_y(), terms)
}

/// Symbolic counterpart of [`poly_image_in_y`].
pub fn poly_image_in_y_symbolic(l: &SymbolicFunctional, p: &BivariatePoly) -> Result<AffinePoly> {
    check_dim(l.nvars(), p.n_x())?;
    let mut out = AffinePoly::zero(p.n_y());
    for (my, px) in p.slices() {
        out.terms.insert(my.clone(), l.apply(px)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fsipp_sdp::{solve, SdpStatus, SolverOptions};

    #[test]
    fn basis_enumeration() {
        let b = MonomialBasis::new(2, 2);
        assert_eq!(b.len(), 6);
        assert_eq!(basis_size(2, 2), 6);
        assert_eq!(b.get(1).exponents(), &[1, 0]);
        assert_eq!(b.get(5).exponents(), &[0, 2]);
        for (i, m) in b.monomials().iter().enumerate() {
            assert_eq!(b.index_of(m), Some(i));
        }
        assert_eq!(MonomialBasis::new(3, 4).len(), basis_size(3, 4));
        assert_eq!(b.prefix_len(1), 3);
    }

    #[test]
    fn moment_matrix_examples() {
        let a = 0.7;
        let l = MomentFunctional::from_atoms(1, 1, &[(vec![a], 1.0)]).unwrap();
        let m = moment_matrix(&l, 1).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, a, a, a * a]));
        assert!(moment_matrix(&MomentFunctional::zeros(2, 2), 2)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        let half = MomentFunctional::from_atoms(1, 1, &[(vec![0.0], 0.5), (vec![1.0], 0.5)]).unwrap();
        let m = moment_matrix(&half, 1).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.5]));
        assert!(moment_matrix(&half, 2).is_err());
    }

    #[test]
    fn localizing_examples() {
        let one = Polynomial::constant(1, 1.0);
        let q = &one - &Polynomial::var(1, 0).pow(2);
        let l0 = MomentFunctional::from_atoms(1, 1, &[(vec![0.0], 1.0)]).unwrap();
        assert_eq!(localizing_matrix(&l0, &q, 1).unwrap(), DMatrix::from_element(1, 1, 1.0));
        let l2 = MomentFunctional::from_atoms(1, 1, &[(vec![2.0], 1.0)]).unwrap();
        assert_eq!(localizing_matrix(&l2, &q, 1).unwrap(), DMatrix::from_element(1, 1, -3.0));
        assert_eq!(localizing_matrix(&l2, &one, 1).unwrap(), moment_matrix(&l2, 1).unwrap());
    }

    fn feasible(target: &Polynomial, cone: &ConeSpec) -> bool {
        let mut b = ProgramBuilder::new();
        sos_membership_blocks(&mut b, &AffinePoly::from_poly(target), cone).unwrap();
        let p = b.finish().unwrap();
        solve(&p, &SolverOptions::default()).unwrap().status == SdpStatus::Optimal
    }

    #[test]
    fn membership_examples() {
        let one = Polynomial::constant(1, 1.0);
        let q = &one - &Polynomial::var(1, 0).pow(2);
        assert!(feasible(&q, &ConeSpec::IntervalUnivariate { cap: 2 }));
        let cone = ConeSpec::SosBounded { nvars: 1, degree: 2 };
        assert!(feasible(&Polynomial::var(1, 0).pow(2), &cone));
        assert!(!feasible(&Polynomial::constant(1, -1.0), &cone));
    }

    #[test]
    fn membership_gram_for_square() {
        let mut b = ProgramBuilder::new();
        let cone = ConeSpec::SosBounded { nvars: 1, degree: 2 };
        let mem = sos_membership_blocks(&mut b, &AffinePoly::from_poly(&Polynomial::var(1, 0).pow(2)), &cone).unwrap();
        let p = b.finish().unwrap();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        let g = mem.grams[0].0.matrix(&s.scalarized(&p));
        assert!((g - DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).norm() < 1e-6);
    }

    #[test]
    fn membership_rejects_degree_overflow() {
        let mut b = ProgramBuilder::new();
        let cone = ConeSpec::SosBounded { nvars: 1, degree: 2 };
        let t = AffinePoly::from_poly(&Polynomial::var(1, 0).pow(4));
        assert!(sos_membership_blocks(&mut b, &t, &cone).is_err());
    }

    #[test]
    fn dual_cone_examples() {
        let one = Polynomial::constant(2, 1.0);
        let ball = &one.scale(4.0) - &(&Polynomial::var(2, 0).pow(2) + &Polynomial::var(2, 1).pow(2));
        let cone = ConeSpec::QModule {
            nvars: 2,
            generators: vec![ball],
            equalities: vec![],
            order: 2,
        };
        let l = MomentFunctional::from_atoms(2, 2, &[(vec![0.5, -1.0], 1.0)]).unwrap();
        assert!(dual_cone_min_eig(&l, &cone).unwrap() >= -1e-12);
        let out = MomentFunctional::from_atoms(2, 2, &[(vec![3.0, 0.0], 1.0)]).unwrap();
        assert!(dual_cone_min_eig(&out, &cone).unwrap() < 0.0);

        let sos = ConeSpec::SosBounded { nvars: 1, degree: 2 };
        let l = MomentFunctional::from_atoms(1, 1, &[(vec![0.3], 0.4), (vec![-2.0], 0.6)]).unwrap();
        assert!(dual_cone_min_eig(&l, &sos).unwrap() >= -1e-12);
        // M1 = [[1, 0], [0, -1]]
        let bad = MomentFunctional::new(1, 1, vec![1.0, 0.0, -1.0]).unwrap();
        assert!((dual_cone_min_eig(&bad, &sos).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn image_in_y_examples() {
        // p = y1 x1
        let joint = &Polynomial::var(2, 1) * &Polynomial::var(2, 0);
        let p = BivariatePoly::from_joint(&joint, 1);
        let l = MomentFunctional::new(1, 1, vec![1.0, 2.0, 5.0]).unwrap();
        assert_eq!(poly_image_in_y(&l, &p).unwrap(), Polynomial::var(1, 0).scale(2.0));
        // p independent of x
        let joint = &Polynomial::var(2, 1).pow(2) + &Polynomial::constant(2, 1.0);
        let p = BivariatePoly::from_joint(&joint, 1);
        let l3 = l.scale(3.0);
        let img = poly_image_in_y(&l3, &p).unwrap();
        assert_eq!(img, (&Polynomial::var(1, 0).pow(2) + &Polynomial::constant(1, 1.0)).scale(3.0));
    }
}
