use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::SdpError;
use crate::problem::{tri_entry, Block, SdpProblem};
use crate::solution::{BlockValue, SdpSolution};

/// Residuals recomputed from the problem data and the returned points only.
///
/// All values are absolute. Cone violations are Euclidean norms of the
/// negative eigenvalue (or component) parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResidualReport {
    /// `|A x - b|_2`
    pub primal: f64,
    /// Violation of `x in K`.
    pub primal_cone: f64,
    /// Violation of `c - A^T y in K*` (free blocks must have zero slack).
    pub dual: f64,
    /// `|<c, x> - <b, y>|`
    pub gap: f64,
    /// `<x, c - A^T y>`
    pub complementarity: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.primal_cone)
            .max(self.dual)
            .max(self.gap)
            .max(self.complementarity.abs())
    }
}

fn neg_part_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues
        .iter()
        .filter(|v| **v < 0.0)
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

fn unpack(block: Block, slice: &[f64]) -> DMatrix<f64> {
    let Block::Psd(s) = block else {
        unreachable!()
    };
    let mut m = DMatrix::zeros(s, s);
    for (k, &v) in slice.iter().enumerate() {
        let (i, j) = tri_entry(k);
        if i == j {
            m[(i, i)] = v;
        } else {
            m[(i, j)] = 0.5 * v;
            m[(j, i)] = 0.5 * v;
        }
    }
    m
}

/// Recomputes primal and dual residuals and the duality gap of `sol`.
pub fn check_solution(prob: &SdpProblem, sol: &SdpSolution) -> Result<ResidualReport, SdpError> {
    if sol.primal_point.len() != prob.blocks().len() {
        return Err(SdpError::Shape(format!(
            "{} primal blocks for {} problem blocks",
            sol.primal_point.len(),
            prob.blocks().len()
        )));
    }
    if sol.dual_point.len() != prob.num_constraints() {
        return Err(SdpError::Shape(format!(
            "{} multipliers for {} constraints",
            sol.dual_point.len(),
            prob.num_constraints()
        )));
    }
    for (b, (blk, val)) in prob.blocks().iter().zip(&sol.primal_point).enumerate() {
        let ok = match (blk, val) {
            (Block::Psd(s), BlockValue::Psd(m)) => m.nrows() == *s && m.ncols() == *s,
            (Block::Nonneg(r), BlockValue::Nonneg(v)) => v.len() == *r,
            (Block::Free(t), BlockValue::Free(v)) => v.len() == *t,
            _ => false,
        };
        if !ok {
            return Err(SdpError::Shape(format!("block {b} does not match its declaration")));
        }
    }
    let x = sol.scalarized(prob);
    let y = &sol.dual_point;

    let mut primal2 = 0.0;
    let mut slack = prob.objective().to_vec();
    for (con, &yi) in prob.constraints().iter().zip(y) {
        let ax: f64 = con.terms.iter().map(|&(k, a)| a * x[k]).sum();
        primal2 += (ax - con.rhs).powi(2);
        for &(k, a) in &con.terms {
            slack[k] -= yi * a;
        }
    }
    let cx: f64 = prob.objective().iter().zip(&x).map(|(c, v)| c * v).sum();
    let by: f64 = prob.constraints().iter().zip(y).map(|(c, v)| c.rhs * v).sum();
    let comp: f64 = slack.iter().zip(&x).map(|(s, v)| s * v).sum();

    let mut pcone2 = 0.0;
    let mut dual2 = 0.0;
    for (b, blk) in prob.blocks().iter().enumerate() {
        let off = prob.block_offset(b);
        let xs = &x[off..off + blk.len()];
        let ss = &slack[off..off + blk.len()];
        match blk {
            Block::Psd(_) => {
                pcone2 += neg_part_norm(&unpack(*blk, xs)).powi(2);
                dual2 += neg_part_norm(&unpack(*blk, ss)).powi(2);
            }
            Block::Nonneg(_) => {
                pcone2 += xs.iter().filter(|v| **v < 0.0).map(|v| v * v).sum::<f64>();
                dual2 += ss.iter().filter(|v| **v < 0.0).map(|v| v * v).sum::<f64>();
            }
            Block::Free(_) => {
                dual2 += ss.iter().map(|v| v * v).sum::<f64>();
            }
        }
    }
    Ok(ResidualReport {
        primal: primal2.sqrt(),
        primal_cone: pcone2.sqrt(),
        dual: dual2.sqrt(),
        gap: (cx - by).abs(),
        complementarity: comp,
    })
}
