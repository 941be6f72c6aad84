use crate::error::SdpError;

/// One cone block of the scalarized variable.
///
/// A `Psd(s)` block occupies `s(s+1)/2` scalar slots holding the lower
/// triangle of a symmetric matrix in row-major order: entry `(i, j)` with
/// `i >= j` lives at offset `i(i+1)/2 + j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Psd(usize),
    Nonneg(usize),
    Free(usize),
}

impl Block {
    /// Number of scalar slots the block occupies.
    pub fn len(&self) -> usize {
        match *self {
            Block::Psd(s) => s * (s + 1) / 2,
            Block::Nonneg(r) => r,
            Block::Free(t) => t,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Offset of entry `(i, j)` inside a packed lower triangle.
#[inline]
pub fn tri_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

/// Inverse of [`tri_index`].
pub fn tri_entry(k: usize) -> (usize, usize) {
    let mut r = ((((8 * k + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    while r * (r + 1) / 2 > k {
        r -= 1;
    }
    while (r + 1) * (r + 2) / 2 <= k {
        r += 1;
    }
    (r, k - r * (r + 1) / 2)
}

/// A linear equality `sum coeff * x[index] = rhs` over the scalarized variable.
///
/// For a PSD block the coefficient multiplies the stored lower-triangle entry
/// itself, so an off-diagonal coefficient `a` corresponds to the symmetric
/// matrix entries `A_ij = A_ji = a/2` under the trace inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Block-structured conic program in equality form:
///
/// ```text
/// minimize  <c, x>
/// s.t.      <a_i, x> = b_i,   x in K = K_1 x ... x K_p
/// ```
///
/// Every block is a PSD cone, a nonnegative orthant or a free space.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<Block>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut n = 0;
        for b in &blocks {
            offsets.push(n);
            n += b.len();
        }
        SdpProblem {
            blocks,
            offsets,
            objective: vec![0.0; n],
            constraints: Vec::new(),
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn block_offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    /// Global scalar index of entry `(i, j)` of PSD block `block`.
    pub fn psd_index(&self, block: usize, i: usize, j: usize) -> usize {
        debug_assert!(matches!(self.blocks[block], Block::Psd(s) if i < s && j < s));
        self.offsets[block] + tri_index(i, j)
    }

    /// Global scalar index of component `i` of a vector block.
    pub fn vec_index(&self, block: usize, i: usize) -> usize {
        debug_assert!(i < self.blocks[block].len());
        self.offsets[block] + i
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, index: usize, value: f64) -> Result<(), SdpError> {
        let n = self.num_vars();
        let slot = self
            .objective
            .get_mut(index)
            .ok_or(SdpError::IndexOutOfRange { index, len: n })?;
        *slot = value;
        Ok(())
    }

    pub fn add_objective(&mut self, index: usize, value: f64) -> Result<(), SdpError> {
        let n = self.num_vars();
        let slot = self
            .objective
            .get_mut(index)
            .ok_or(SdpError::IndexOutOfRange { index, len: n })?;
        *slot += value;
        Ok(())
    }

    /// Appends an equality constraint. Repeated indices are merged and exact
    /// zeros dropped. Returns the row index.
    pub fn add_constraint(
        &mut self,
        terms: impl IntoIterator<Item = (usize, f64)>,
        rhs: f64,
    ) -> Result<usize, SdpError> {
        let n = self.num_vars();
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (index, v) in terms {
            if index >= n {
                return Err(SdpError::IndexOutOfRange { index, len: n });
            }
            merged.push((index, v));
        }
        merged.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(merged.len());
        for (i, v) in merged {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => out.push((i, v)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        if !rhs.is_finite() || out.iter().any(|t| !t.1.is_finite()) {
            return Err(SdpError::NonFinite);
        }
        self.constraints.push(Constraint { terms: out, rhs });
        Ok(self.constraints.len() - 1)
    }

    /// Which block a scalar index falls into, and its local offset.
    pub fn locate(&self, index: usize) -> (usize, usize) {
        let b = match self.offsets.binary_search(&index) {
            Ok(mut b) => {
                // skip empty blocks sharing the same offset
                while self.blocks[b].is_empty() {
                    b += 1;
                }
                b
            }
            Err(b) => b - 1,
        };
        (b, index - self.offsets[b])
    }

    pub(crate) fn validate(&self) -> Result<(), SdpError> {
        if self.num_vars() == 0 {
            return Err(SdpError::Empty);
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(SdpError::NonFinite);
        }
        Ok(())
    }
}
