//! Incremental construction of equality-form SDPs with affine expressions.

use std::collections::BTreeMap;

use fsipp_sdp::{tri_index, Block, SdpProblem};

use crate::error::Result;

/// `sum_i a_i v_i + constant` over builder variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: BTreeMap<usize, f64>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        LinExpr::term(v, 1.0)
    }

    pub fn term(v: usize, a: f64) -> Self {
        let mut e = LinExpr::default();
        e.add_term(v, a);
        e
    }

    pub fn add_term(&mut self, v: usize, a: f64) {
        if a == 0.0 {
            return;
        }
        let s = self.terms.entry(v).or_insert(0.0);
        *s += a;
        if *s == 0.0 {
            self.terms.remove(&v);
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, a: f64) {
        if a == 0.0 {
            return;
        }
        for (&v, &c) in &other.terms {
            self.add_term(v, a * c);
        }
        self.constant += a * other.constant;
    }

    pub fn scaled(&self, a: f64) -> LinExpr {
        let mut e = LinExpr::default();
        e.add_scaled(self, a);
        e
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&v, &a)| a * x[v]).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PsdHandle {
    pub block: usize,
    pub start: usize,
    pub size: usize,
}

impl PsdHandle {
    pub fn entry(&self, i: usize, j: usize) -> usize {
        self.start + tri_index(i, j)
    }

    /// The matrix value from a scalarized point.
    pub fn matrix(&self, x: &[f64]) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.size, self.size, |i, j| x[self.entry(i, j)])
    }
}

#[derive(Clone, Debug, Default)]
pub struct ProgramBuilder {
    blocks: Vec<Block>,
    nvars: usize,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
    objective: BTreeMap<usize, f64>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        ProgramBuilder::default()
    }

    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn push_block(&mut self, b: Block) -> (usize, usize) {
        let start = self.nvars;
        self.nvars += b.len();
        self.blocks.push(b);
        (self.blocks.len() - 1, start)
    }

    /// `n` free scalars; returns the index of the first.
    pub fn add_free(&mut self, n: usize) -> usize {
        self.push_block(Block::Free(n)).1
    }

    pub fn add_nonneg(&mut self, n: usize) -> usize {
        self.push_block(Block::Nonneg(n)).1
    }

    pub fn add_psd(&mut self, size: usize) -> PsdHandle {
        let (block, start) = self.push_block(Block::Psd(size));
        PsdHandle { block, start, size }
    }

    /// `expr = rhs`
    pub fn add_eq(&mut self, expr: &LinExpr, rhs: f64) {
        let terms: Vec<(usize, f64)> = expr.terms.iter().map(|(&v, &a)| (v, a)).collect();
        self.rows.push((terms, rhs - expr.constant));
    }

    /// `expr >= 0` through a nonnegative slack.
    pub fn add_nonneg_constraint(&mut self, expr: &LinExpr) -> usize {
        let s = self.add_nonneg(1);
        let mut e = expr.clone();
        e.add_term(s, -1.0);
        self.add_eq(&e, 0.0);
        s
    }

    /// Symmetric matrix of affine expressions constrained PSD (lower triangle is read).
    pub fn add_psd_constraint(&mut self, mat: &[Vec<LinExpr>]) -> PsdHandle {
        let h = self.add_psd(mat.len());
        for i in 0..mat.len() {
            for j in 0..=i {
                let mut e = mat[i][j].clone();
                e.add_term(h.entry(i, j), -1.0);
                self.add_eq(&e, 0.0);
            }
        }
        h
    }

    /// Adds `expr` to the minimization objective (constants are dropped).
    pub fn add_objective(&mut self, expr: &LinExpr) {
        for (&v, &a) in &expr.terms {
            *self.objective.entry(v).or_insert(0.0) += a;
        }
    }

    pub fn finish(self) -> Result<SdpProblem> {
        let mut p = SdpProblem::new(self.blocks);
        for (v, a) in self.objective {
            p.set_objective(v, a)?;
        }
        for (terms, rhs) in self.rows {
            p.add_constraint(terms, rhs)?;
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fsipp_sdp::{solve, SdpStatus, SolverOptions};

    #[test]
    fn linexpr_cancellation() {
        let mut e = LinExpr::var(3);
        e.add_term(3, -1.0);
        assert!(e.is_constant());
    }

    #[test]
    fn psd_constraint_on_free_variables() {
        // min t s.t. [[t, 1], [1, 1]] psd  -> t = 1
        let mut b = ProgramBuilder::new();
        let t = b.add_free(1);
        let one = LinExpr::constant(1.0);
        let mat = vec![vec![LinExpr::var(t), one.clone()], vec![one.clone(), one.clone()]];
        b.add_psd_constraint(&mat);
        b.add_objective(&LinExpr::var(t));
        let p = b.finish().unwrap();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.primal_value - 1.0).abs() < 1e-6);
    }
}
