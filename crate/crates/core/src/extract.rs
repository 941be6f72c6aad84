//! Minimizer recovery from moment functionals.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FsippError, Result};
use crate::moment::{moment_matrix, MomentFunctional, MonomialBasis};
use crate::poly::Monomial;

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// `(L(x_1), ..., L(x_m)) / L(1)`
pub fn point_from_functional(l: &MomentFunctional) -> Result<Vec<f64>> {
    let mass = l.mass();
    if !(mass > 1e-12) {
        return Err(FsippError::DegenerateMass(mass));
    }
    let m = l.nvars();
    Ok((0..m)
        .map(|i| l.get(&Monomial::var(m, i)).unwrap_or(0.0) / mass)
        .collect())
}

/// Number of singular values above `rel_tol * max`, with the singular values (descending).
pub fn numeric_rank(mat: &DMatrix<f64>, rel_tol: f64) -> (usize, Vec<f64>) {
    if mat.nrows() == 0 {
        return (0, Vec::new());
    }
    let mut sv: Vec<f64> = mat.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv[0];
    if top == 0.0 {
        return (0, sv);
    }
    let r = sv.iter().filter(|s| **s > rel_tol * top).count();
    (r, sv)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankCertificate {
    pub k_prime: u32,
    pub k0: u32,
    pub rank_low: usize,
    pub rank_high: usize,
    pub singular_values_low: Vec<f64>,
    pub singular_values_high: Vec<f64>,
    pub passed: bool,
}

/// Scans `k'` from `max(d_half, k0)` to `k` for `rank M_{k'-k0} = rank M_{k'}`.
pub fn flat_truncation_check(
    l: &MomentFunctional,
    k: u32,
    k0: u32,
    d_half: u32,
    rel_tol: f64,
) -> Option<RankCertificate> {
    let k = k.min(l.order());
    let start = d_half.max(k0);
    for kp in start..=k {
        let low = moment_matrix(l, kp - k0).ok()?;
        let high = moment_matrix(l, kp).ok()?;
        let (rl, svl) = numeric_rank(&low, rel_tol);
        let (rh, svh) = numeric_rank(&high, rel_tol);
        if rl == rh && rh > 0 {
            return Some(RankCertificate {
                k_prime: kp,
                k0,
                rank_low: rl,
                rank_high: rh,
                singular_values_low: svl,
                singular_values_high: svh,
                passed: true,
            });
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ExtractOptions {
    /// Pivot threshold of the echelon reduction, relative to the largest entry.
    pub pivot_tol: f64,
    /// Allowed relative commutator norm of the multiplication matrices.
    pub commute_tol: f64,
    pub seed: u64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            pivot_tol: 1e-6,
            commute_tol: 1e-5,
            seed: 0x5eed,
        }
    }
}

/// Reduced row echelon form with partial pivoting; returns pivot columns.
fn rref(w: &mut DMatrix<f64>, tol: f64) -> Vec<usize> {
    let (rows, cols) = w.shape();
    let scale = w.amax().max(f64::MIN_POSITIVE);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, w[(i, c)].abs()))
            .fold((r, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if val <= tol * scale {
            for i in r..rows {
                w[(i, c)] = 0.0;
            }
            continue;
        }
        w.swap_rows(r, best);
        let p = w[(r, c)];
        for j in 0..cols {
            w[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = w[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        w[(i, j)] -= f * w[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Henrion-Lasserre extraction of the atoms of a flat moment matrix.
pub fn extract_atoms(l: &MomentFunctional, cert: &RankCertificate, opts: &ExtractOptions) -> Result<Vec<Atom>> {
    if !cert.passed {
        return Err(FsippError::NumericalTrouble("rank certificate did not pass".into()));
    }
    let r = cert.rank_high;
    if r == 0 {
        return Err(FsippError::DegenerateMass(l.mass()));
    }
    let m = l.nvars();
    let kp = cert.k_prime;
    let mat = moment_matrix(l, kp)?;
    let basis = MonomialBasis::new(m, kp);
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let s = basis.len();
    let mut v = DMatrix::zeros(s, r);
    for (c, &i) in order.iter().take(r).enumerate() {
        let lam = eig.eigenvalues[i].max(0.0).sqrt();
        v.set_column(c, &(eig.eigenvectors.column(i) * lam));
    }
    let mut w = v.transpose();
    let pivots = rref(&mut w, opts.pivot_tol);
    if pivots.len() != r {
        return Err(FsippError::NumericalTrouble(format!(
            "echelon form found {} pivots for rank {r}",
            pivots.len()
        )));
    }
    let u = w.transpose();
    let mut mults = Vec::with_capacity(m);
    for i in 0..m {
        let xi = Monomial::var(m, i);
        let mut n = DMatrix::zeros(r, r);
        for (j, &pc) in pivots.iter().enumerate() {
            let row = basis.index_of(&basis.get(pc).mul(&xi)).ok_or_else(|| {
                FsippError::NumericalTrouble("shifted pivot monomial leaves the basis".into())
            })?;
            n.set_row(j, &u.row(row));
        }
        mults.push(n);
    }
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in a + 1..m {
            let c = &mults[a] * &mults[b] - &mults[b] * &mults[a];
            let scale = (mults[a].norm() * mults[b].norm()).max(1.0);
            worst = worst.max(c.norm() / scale);
        }
    }
    if worst > opts.commute_tol {
        return Err(FsippError::NumericalTrouble(format!(
            "multiplication matrices commute only to {worst:e}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut lam: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = lam.iter().sum();
    lam.iter_mut().for_each(|x| *x /= total);
    let mut comb = DMatrix::zeros(r, r);
    for (li, ni) in lam.iter().zip(&mults) {
        comb += ni * *li;
    }
    let schur = comb.schur();
    let (q, _) = schur.unpack();
    let points: Vec<Vec<f64>> = (0..r)
        .map(|j| {
            let qj = q.column(j);
            mults.iter().map(|ni| qj.dot(&(ni * qj))).collect()
        })
        .collect();

    let wdeg = 2 * (kp - cert.k0);
    let wbasis = MonomialBasis::new(m, wdeg);
    let a = DMatrix::from_fn(wbasis.len(), r, |i, j| wbasis.get(i).eval(&points[j]));
    let rhs = DVector::from_iterator(
        wbasis.len(),
        wbasis.monomials().iter().map(|mm| l.get(mm).unwrap_or(0.0)),
    );
    let wts = a
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| FsippError::NumericalTrouble(e.to_string()))?;
    let mass_scale = l.mass().abs().max(1e-300);
    if wts.iter().any(|w| *w / mass_scale < -1e-7) {
        return Err(FsippError::NumericalTrouble("negative atom weight".into()));
    }
    Ok(points
        .into_iter()
        .zip(wts.iter())
        .map(|(point, &weight)| Atom { point, weight })
        .collect())
}

/// Max relative deviation between `l` and the moments of `atoms` on degree `<= degree`.
pub fn reconstruction_error(l: &MomentFunctional, atoms: &[Atom], degree: u32) -> f64 {
    let basis = MonomialBasis::new(l.nvars(), degree.min(2 * l.order()));
    let scale = l.values().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    basis
        .monomials()
        .iter()
        .map(|mm| {
            let rec: f64 = atoms.iter().map(|a| a.weight * mm.eval(&a.point)).sum();
            (rec - l.get(mm).unwrap_or(0.0)).abs() / scale
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_examples() {
        let l = MomentFunctional::from_atoms(2, 1, &[(vec![2.0, 3.0], 1.0)]).unwrap();
        assert_eq!(point_from_functional(&l).unwrap(), vec![2.0, 3.0]);
        assert_eq!(point_from_functional(&l.scale(5.0)).unwrap(), vec![2.0, 3.0]);
        assert!(matches!(
            point_from_functional(&MomentFunctional::zeros(2, 1)),
            Err(FsippError::DegenerateMass(_))
        ));
    }

    #[test]
    fn rank_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-12]));
        assert_eq!(numeric_rank(&d, 1e-8).0, 1);
        assert_eq!(numeric_rank(&DMatrix::zeros(3, 3), 1e-8).0, 0);
        let l = MomentFunctional::from_atoms(2, 4, &[(vec![0.3, -0.7], 1.0)]).unwrap();
        assert_eq!(numeric_rank(&moment_matrix(&l, 4).unwrap(), 1e-8).0, 1);
    }

    #[test]
    fn dirac_and_two_atoms() {
        let l = MomentFunctional::from_atoms(2, 3, &[(vec![0.25, -0.5], 1.0)]).unwrap();
        let cert = flat_truncation_check(&l, 3, 1, 1, 1e-8).unwrap();
        assert_eq!(cert.rank_high, 1);
        let atoms = extract_atoms(&l, &cert, &ExtractOptions::default()).unwrap();
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0].point[0] - 0.25).abs() < 1e-10 && (atoms[0].point[1] + 0.5).abs() < 1e-10);
        assert!((atoms[0].weight - 1.0).abs() < 1e-10);

        let l = MomentFunctional::from_atoms(2, 3, &[(vec![0.0, 0.0], 0.5), (vec![1.0, 1.0], 0.5)]).unwrap();
        let cert = flat_truncation_check(&l, 3, 1, 1, 1e-8).unwrap();
        assert_eq!(cert.rank_high, 2);
        let mut atoms = extract_atoms(&l, &cert, &ExtractOptions::default()).unwrap();
        atoms.sort_by(|a, b| a.point[0].total_cmp(&b.point[0]));
        assert!(atoms[0].point.iter().all(|v| v.abs() < 1e-8));
        assert!(atoms[1].point.iter().all(|v| (v - 1.0).abs() < 1e-8));
        assert!(atoms.iter().all(|a| (a.weight - 0.5).abs() < 1e-8));
    }

    #[test]
    fn continuous_measure_is_not_flat() {
        // moments of the uniform measure on [0,1]^2
        let l = MomentFunctional::from_fn(2, 3, |m| {
            m.exponents().iter().map(|&e| 1.0 / (e as f64 + 1.0)).product()
        });
        assert!(flat_truncation_check(&l, 3, 1, 1, 1e-8).is_none());
    }
}
