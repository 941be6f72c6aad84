//! Sparse SDPA text format.
//!
//! An equality-form problem `min <C, X> s.t. <A_i, X> = b_i` is written as the
//! SDPA dual `max <F_0, Y> s.t. <F_i, Y> = c_i` with `F_i = A_i`, `c_i = b_i`
//! and `F_0 = -C`. Nonnegative blocks become diagonal blocks. A free block of
//! size `t` becomes a diagonal block of size `2t` holding the split `x+ - x-`;
//! a leading `* fsipp-blocks` comment records the original block kinds so
//! that [`read_sdpa`] restores them. Numbers are printed in shortest
//! round-trip form, so coefficients survive a write/read cycle bit-exactly.

use std::fmt::Write as _;

use crate::error::SdpError;
use crate::problem::{tri_entry, Block, SdpProblem};

const TAG: &str = "* fsipp-blocks";

fn sdpa_block_size(b: &Block) -> i64 {
    match *b {
        Block::Psd(s) => s as i64,
        Block::Nonneg(r) => -(r as i64),
        Block::Free(t) => -2 * t as i64,
    }
}

/// Entries `(block, i, j, value)` (1-based, `i <= j`) of one SDPA matrix,
/// from a scalarized coefficient vector.
fn matrix_entries(prob: &SdpProblem, coeffs: &[(usize, f64)]) -> Vec<(usize, usize, usize, f64)> {
    let mut out = Vec::new();
    for &(idx, a) in coeffs {
        let (b, local) = prob.locate(idx);
        match prob.blocks()[b] {
            Block::Psd(_) => {
                let (r, c) = tri_entry(local);
                let v = if r == c { a } else { 0.5 * a };
                out.push((b + 1, c + 1, r + 1, v));
            }
            Block::Nonneg(_) => out.push((b + 1, local + 1, local + 1, a)),
            Block::Free(t) => {
                out.push((b + 1, local + 1, local + 1, a));
                out.push((b + 1, t + local + 1, t + local + 1, -a));
            }
        }
    }
    out
}

pub fn write_sdpa(prob: &SdpProblem) -> String {
    let mut s = String::new();
    let kinds: Vec<String> = prob
        .blocks()
        .iter()
        .map(|b| match b {
            Block::Psd(n) => format!("P{n}"),
            Block::Nonneg(n) => format!("N{n}"),
            Block::Free(n) => format!("F{n}"),
        })
        .collect();
    let _ = writeln!(s, "{TAG} {}", kinds.join(" "));
    let _ = writeln!(s, "{}", prob.num_constraints());
    let _ = writeln!(s, "{}", prob.blocks().len());
    let sizes: Vec<String> = prob
        .blocks()
        .iter()
        .map(|b| sdpa_block_size(b).to_string())
        .collect();
    let _ = writeln!(s, "{}", sizes.join(" "));
    let rhs: Vec<String> = prob
        .constraints()
        .iter()
        .map(|c| format!("{:e}", c.rhs))
        .collect();
    let _ = writeln!(s, "{}", rhs.join(" "));
    let obj: Vec<(usize, f64)> = prob
        .objective()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i, -*v))
        .collect();
    for (b, i, j, v) in matrix_entries(prob, &obj) {
        let _ = writeln!(s, "0 {b} {i} {j} {v:e}");
    }
    for (row, con) in prob.constraints().iter().enumerate() {
        for (b, i, j, v) in matrix_entries(prob, &con.terms) {
            let _ = writeln!(s, "{} {b} {i} {j} {v:e}", row + 1);
        }
    }
    s
}

fn perr(line: usize, msg: impl Into<String>) -> SdpError {
    SdpError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn read_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
    let mut kinds: Option<Vec<Block>> = None;
    // (line number, cleaned content)
    let mut lines: Vec<(usize, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let t = raw.trim();
        if let Some(rest) = t.strip_prefix(TAG) {
            let mut ks = Vec::new();
            for tok in rest.split_whitespace() {
                let (kind, size) = tok.split_at(1);
                let size: usize = size.parse().map_err(|_| perr(lineno, "bad block tag"))?;
                ks.push(match kind {
                    "P" => Block::Psd(size),
                    "N" => Block::Nonneg(size),
                    "F" => Block::Free(size),
                    _ => return Err(perr(lineno, "bad block tag")),
                });
            }
            kinds = Some(ks);
            continue;
        }
        if t.is_empty() || t.starts_with('*') || t.starts_with('"') {
            continue;
        }
        let t = t.split('=').next().unwrap_or("");
        let cleaned: String = t
            .chars()
            .map(|c| if "{}(),".contains(c) { ' ' } else { c })
            .collect();
        lines.push((lineno, cleaned));
    }
    let mut tokens = lines
        .iter()
        .flat_map(|(n, l)| l.split_whitespace().map(move |tok| (*n, tok)));
    let mut next = |what: &str| tokens.next().ok_or_else(|| perr(0, format!("missing {what}")));
    let parse_usize = |(n, tok): (usize, &str)| tok.parse::<usize>().map_err(|_| perr(n, "expected integer"));
    let parse_i64 = |(n, tok): (usize, &str)| tok.parse::<i64>().map_err(|_| perr(n, "expected integer"));
    let parse_f64 = |(n, tok): (usize, &str)| tok.parse::<f64>().map_err(|_| perr(n, "expected number"));

    let m = parse_usize(next("m")?)?;
    let nblocks = parse_usize(next("nBlocks")?)?;
    let mut sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        sizes.push(parse_i64(next("block size")?)?);
    }
    let blocks: Vec<Block> = match kinds {
        Some(ks) => {
            if ks.len() != nblocks
                || ks.iter().zip(&sizes).any(|(k, s)| sdpa_block_size(k) != *s)
            {
                return Err(perr(0, "block tag does not match block structure"));
            }
            ks
        }
        None => sizes
            .iter()
            .map(|&s| {
                if s >= 0 {
                    Block::Psd(s as usize)
                } else {
                    Block::Nonneg((-s) as usize)
                }
            })
            .collect(),
    };
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        rhs.push(parse_f64(next("rhs")?)?);
    }
    let mut prob = SdpProblem::new(blocks.clone());
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let rest: Vec<(usize, &str)> = tokens.collect();
    if rest.len() % 5 != 0 {
        return Err(perr(rest.last().map(|t| t.0).unwrap_or(0), "truncated entry line"));
    }
    for chunk in rest.chunks(5) {
        let line = chunk[0].0;
        let mat = parse_usize(chunk[0])?;
        let blk = parse_usize(chunk[1])?;
        let i = parse_usize(chunk[2])?;
        let j = parse_usize(chunk[3])?;
        let v = parse_f64(chunk[4])?;
        if mat > m || blk == 0 || blk > nblocks || i == 0 || j == 0 {
            return Err(perr(line, "entry index out of range"));
        }
        let b = blk - 1;
        let (i, j) = (i - 1, j - 1);
        let (idx, coeff) = match blocks[b] {
            Block::Psd(s) => {
                if i >= s || j >= s {
                    return Err(perr(line, "entry index out of range"));
                }
                let c = if i == j { v } else { 2.0 * v };
                (prob.psd_index(b, i, j), c)
            }
            Block::Nonneg(r) => {
                if i != j || i >= r {
                    return Err(perr(line, "off-diagonal entry in diagonal block"));
                }
                (prob.vec_index(b, i), v)
            }
            Block::Free(t) => {
                if i != j || i >= 2 * t {
                    return Err(perr(line, "off-diagonal entry in diagonal block"));
                }
                if i >= t {
                    // the negated mirror of the split variable
                    continue;
                }
                (prob.vec_index(b, i), v)
            }
        };
        if mat == 0 {
            prob.add_objective(idx, -coeff)?;
        } else {
            rows[mat - 1].push((idx, coeff));
        }
    }
    for (terms, b) in rows.into_iter().zip(rhs) {
        prob.add_constraint(terms, b)?;
    }
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_sdpa_without_tag_reads_diagonal_blocks_as_orthant() {
        let text = "\"example\"\n2 =mDIM\n2 =nBLOCK\n{2, -1}\n{1.0, 2.0}\n0 1 1 1 -1.0\n1 1 1 1 1.0\n1 1 2 2 1.0\n2 1 1 2 0.5\n2 2 1 1 1.0\n";
        let p = read_sdpa(text).unwrap();
        assert_eq!(p.blocks(), &[Block::Psd(2), Block::Nonneg(1)]);
        assert_eq!(p.objective()[0], 1.0);
        assert_eq!(p.constraints()[0].terms, vec![(0, 1.0), (2, 1.0)]);
        // off-diagonal matrix entry 0.5 is scalar coefficient 1.0
        assert_eq!(p.constraints()[1].terms, vec![(1, 1.0), (3, 1.0)]);
        assert_eq!(p.constraints()[1].rhs, 2.0);
    }

    #[test]
    fn malformed_entry_reports_line() {
        let text = "1\n1\n2\n1.0\n1 1 3 1 1.0\n";
        match read_sdpa(text) {
            Err(SdpError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
