use nalgebra::DMatrix;

use crate::problem::{tri_index, Block, SdpProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalTrouble,
    IterLimit,
}

/// Value of one cone block.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockValue {
    Psd(DMatrix<f64>),
    Nonneg(Vec<f64>),
    Free(Vec<f64>),
}

impl BlockValue {
    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            BlockValue::Psd(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_slice(&self) -> Option<&[f64]> {
        match self {
            BlockValue::Nonneg(v) | BlockValue::Free(v) => Some(v),
            BlockValue::Psd(_) => None,
        }
    }
}

/// Relative residuals of a returned point.
///
/// `primal = |Ax - b| / (1 + |b|)`, `dual = |c - A^T y - s| / (1 + |c|)` and
/// `gap = |primal_value - dual_value| / (1 + |primal_value|)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// `<c, x>` at the returned primal point.
    pub primal_value: f64,
    /// `<b, y>` at the returned dual point.
    pub dual_value: f64,
    pub primal_point: Vec<BlockValue>,
    /// Equality multipliers `y`.
    pub dual_point: Vec<f64>,
    /// Dual slack `s = c - A^T y`, per block.
    pub dual_slack: Vec<BlockValue>,
    pub iterations: usize,
    pub residuals: Residuals,
}

impl SdpSolution {
    /// The primal point flattened back to the scalarized layout of `prob`.
    pub fn scalarized(&self, prob: &SdpProblem) -> Vec<f64> {
        let mut out = vec![0.0; prob.num_vars()];
        for (b, (block, value)) in prob.blocks().iter().zip(&self.primal_point).enumerate() {
            let off = prob.block_offset(b);
            match (block, value) {
                (Block::Psd(s), BlockValue::Psd(m)) => {
                    for i in 0..*s {
                        for j in 0..=i {
                            out[off + tri_index(i, j)] = m[(i, j)];
                        }
                    }
                }
                (_, BlockValue::Nonneg(v)) | (_, BlockValue::Free(v)) => {
                    out[off..off + v.len()].copy_from_slice(v);
                }
                _ => unreachable!("block kind mismatch"),
            }
        }
        out
    }

    /// Scalar value at a global index of the primal point.
    pub fn value_at(&self, prob: &SdpProblem, index: usize) -> f64 {
        let (b, local) = prob.locate(index);
        match &self.primal_point[b] {
            BlockValue::Psd(m) => {
                let (i, j) = crate::problem::tri_entry(local);
                m[(i, j)]
            }
            BlockValue::Nonneg(v) | BlockValue::Free(v) => v[local],
        }
    }
}
