//! Worked instances: the two convex but not s.o.s-convex polynomials, the
//! general-case example and the four special cases.

use crate::multiobj::{BoundingBox, MultiFsippProblem};
use crate::poly::{BivariatePoly, Polynomial};
use crate::relax::{FsippProblem, IndexSetDesc};

pub(crate) fn poly(n: usize, terms: &[(&[u32], f64)]) -> Polynomial {
    Polynomial::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), *c))).expect("fixture exponents match nvars")
}

fn var(n: usize, i: usize) -> Polynomial {
    Polynomial::var(n, i)
}

fn c(n: usize, v: f64) -> Polynomial {
    Polynomial::constant(n, v)
}

/// `h1(x1, x2, x3)`, homogeneous of degree 8.
pub fn h1() -> Polynomial {
    poly(
        3,
        &[
            (&[8, 0, 0], 32.0),
            (&[6, 2, 0], 118.0),
            (&[6, 0, 2], 40.0),
            (&[4, 4, 0], 25.0),
            (&[4, 2, 2], -43.0),
            (&[4, 0, 4], -35.0),
            (&[2, 4, 2], 3.0),
            (&[2, 2, 4], -16.0),
            (&[2, 0, 6], 24.0),
            (&[0, 8, 0], 16.0),
            (&[0, 6, 2], 44.0),
            (&[0, 4, 4], 70.0),
            (&[0, 2, 6], 60.0),
            (&[0, 0, 8], 30.0),
        ],
    )
}

/// `h2(x1, x2)`, of degree 6.
pub fn h2() -> Polynomial {
    poly(
        2,
        &[
            (&[0, 0], 89.0),
            (&[4, 1], -363.0),
            (&[0, 6], 51531.0 / 64.0),
            (&[0, 5], -9005.0 / 4.0),
            (&[0, 4], 49171.0 / 16.0),
            (&[2, 0], 721.0),
            (&[0, 3], -2060.0),
            (&[3, 0], -14.0),
            (&[0, 2], 3817.0 / 4.0),
            (&[4, 0], 363.0),
            (&[5, 0], -9.0),
            (&[6, 0], 77.0),
            (&[1, 1], 316.0),
            (&[1, 3], 49.0),
            (&[2, 1], -2550.0),
            (&[1, 2], -968.0),
            (&[1, 4], 1710.0),
            (&[3, 1], 794.0),
            (&[2, 2], 7269.0 / 2.0),
            (&[5, 1], -301.0 / 2.0),
            (&[4, 2], 2143.0 / 4.0),
            (&[3, 3], 1671.0 / 2.0),
            (&[2, 4], 14901.0 / 16.0),
            (&[1, 5], -1399.0 / 2.0),
            (&[3, 2], -3825.0 / 2.0),
            (&[2, 3], -4041.0 / 2.0),
            (&[0, 1], -364.0),
            (&[1, 0], 48.0),
        ],
    )
}

/// `h1(x1, x2, 1)`
pub fn h1_dehomogenized() -> Polynomial {
    h1().compose(&[var(2, 0), var(2, 1), c(2, 1.0)]).expect("three substitutions")
}

fn unit_disc() -> IndexSetDesc {
    IndexSetDesc::QuadraticSet {
        phi: poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], -1.0)]),
        interior_point: vec![0.0, 0.0],
    }
}

fn problem(f: Polynomial, g: Polynomial, psis: Vec<Polynomial>, joint_p: Polynomial, y: IndexSetDesc) -> FsippProblem {
    let p = BivariatePoly::from_joint(&joint_p, 2);
    FsippProblem::new(f, g, psis, p, y).expect("fixture is well formed")
}

/// General case: `Y` is a quarter of the unit circle.
pub fn general() -> FsippProblem {
    // joint variables (x1, x2, y1, y2)
    let (x1, x2, y1, y2) = (var(4, 0), var(4, 1), var(4, 2), var(4, 3));
    let a = &(&y1 * &x1) - &(&y2 * &x2);
    let b = &(&y2 * &x1) + &(&y1 * &x2);
    let rot = h1().compose(&[a.clone(), b.clone(), c(4, 1.0)]).expect("three substitutions");
    let p = &(&(&rot * 0.01) + &a) - &(&b + &c(4, 1.0));
    let f = h2().compose(&[&var(2, 0) - &c(2, 1.0), &var(2, 1) - &c(2, 1.0)]).expect("two substitutions") * 1e-4;
    let g = poly(2, &[(&[0, 0], 4.0), (&[2, 0], -1.0), (&[0, 2], -1.0)]);
    let psi = poly(2, &[(&[2, 0], 0.5), (&[0, 2], 2.0), (&[0, 0], -1.0)]);
    let y = IndexSetDesc::Semialgebraic {
        ineqs: vec![var(2, 0), var(2, 1)],
        eqs: vec![poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], -1.0)])],
        archimedean_hint: None,
    };
    problem(f, g, vec![psi], p, y)
}

pub fn case1() -> FsippProblem {
    let f = poly(2, &[(&[2, 0], 1.0), (&[1, 0], 2.0), (&[0, 2], 1.0), (&[0, 1], 2.0), (&[0, 0], 2.0)]);
    let g = poly(2, &[(&[1, 0], -1.0), (&[0, 1], -1.0), (&[0, 0], 1.0)]);
    let p = poly(
        3,
        &[
            (&[2, 0, 0], 1.0),
            (&[0, 2, 2], 1.0),
            (&[1, 1, 1], 2.0),
            (&[1, 0, 0], 1.0),
            (&[0, 1, 0], 1.0),
        ],
    );
    problem(f, g, vec![], p, IndexSetDesc::Interval)
}

pub fn case2() -> FsippProblem {
    let f = poly(2, &[(&[2, 0], 1.0), (&[1, 0], -2.0), (&[0, 2], 1.0), (&[0, 1], -2.0), (&[0, 0], 2.0)]);
    let g = poly(2, &[(&[1, 0], 1.0), (&[0, 1], 1.0)]);
    let s = poly(2, &[(&[1, 0], 1.0), (&[0, 1], 1.0)]);
    let psi = &(&s - &c(2, 1.0)) * &(&s - &c(2, 0.5));
    let p = poly(
        4,
        &[
            (&[2, 0, 2, 0], 1.0),
            (&[2, 0, 0, 2], 1.0),
            (&[0, 2, 0, 0], 0.5),
            (&[0, 2, 1, 1], -1.0),
            (&[0, 0, 0, 0], -1.0),
        ],
    );
    problem(f, g, vec![psi], p, unit_disc())
}

pub fn case3() -> FsippProblem {
    let f = poly(2, &[(&[2, 0], 1.0), (&[1, 0], -2.0), (&[0, 2], 1.0), (&[0, 1], -2.0)]);
    let g = poly(2, &[(&[1, 0], -1.0), (&[0, 1], -1.0), (&[0, 0], 4.0)]);
    let psi = poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], -4.0)]);
    let h = (h2() * 1e-3).embed(3, 0);
    let rest = poly(3, &[(&[1, 0, 1], -1.0), (&[0, 1, 2], -1.0), (&[0, 0, 0], -1.0)]);
    problem(f, g, vec![psi], &h + &rest, IndexSetDesc::Interval)
}

pub fn case4() -> FsippProblem {
    let f = poly(2, &[(&[2, 0], 1.0), (&[1, 0], -4.0), (&[0, 2], 1.0), (&[0, 1], -4.0), (&[0, 0], 7.0)]);
    let g = poly(2, &[(&[2, 0], -1.0), (&[0, 2], -1.0), (&[0, 0], 4.0)]);
    let psi = poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], -1.0)]);
    let h = (h2() * 1e-3).embed(4, 0);
    let rest = poly(4, &[(&[1, 0, 1, 1], 1.0), (&[0, 1, 1, 1], 1.0), (&[0, 0, 0, 0], -1.0)]);
    problem(f, g, vec![psi], &h + &rest, unit_disc())
}

fn multi(objectives: Vec<(Polynomial, Polynomial)>, joint_p: Polynomial, y: IndexSetDesc) -> MultiFsippProblem {
    let p = BivariatePoly::from_joint(&joint_p, 2);
    MultiFsippProblem::new(objectives, vec![], p, y).expect("fixture is well formed")
}

/// Multi-objective instance with an ellipse described over `[-1, 1]`.
pub fn multi_case_i() -> MultiFsippProblem {
    let p = poly(
        3,
        &[
            (&[1, 0, 4], 1.0),
            (&[1, 0, 3], 2.0),
            (&[1, 0, 2], -3.0),
            (&[1, 0, 1], -2.0),
            (&[1, 0, 0], 1.0),
            (&[0, 1, 3], 2.0),
            (&[0, 1, 1], -2.0),
            (&[0, 0, 2], -2.0),
        ],
    );
    let f1 = poly(2, &[(&[2, 0], 1.0), (&[0, 1], 1.0)]);
    let g1 = poly(2, &[(&[0, 1], 1.0), (&[0, 0], 1.0)]);
    let f2 = poly(2, &[(&[2, 0], 1.0), (&[0, 1], -1.0), (&[1, 0], 1.0)]);
    multi(vec![(f1, g1), (f2, c(2, 1.0))], p, IndexSetDesc::Interval)
}

pub fn multi_case_ii() -> MultiFsippProblem {
    // -1 + x1^2 + x2^2 + (y1 - y2)^2 x1 x2
    let p = poly(
        4,
        &[
            (&[0, 0, 0, 0], -1.0),
            (&[2, 0, 0, 0], 1.0),
            (&[0, 2, 0, 0], 1.0),
            (&[1, 1, 2, 0], 1.0),
            (&[1, 1, 1, 1], -2.0),
            (&[1, 1, 0, 2], 1.0),
        ],
    );
    let f1 = poly(2, &[(&[0, 2], 1.0), (&[1, 0], -1.0), (&[0, 0], 1.0)]);
    let g1 = poly(2, &[(&[2, 0], -1.0), (&[0, 0], 2.0)]);
    let f2 = poly(2, &[(&[2, 0], 1.0), (&[0, 1], 1.0), (&[1, 0], 1.0)]);
    multi(vec![(f1, g1), (f2, c(2, 1.0))], p, unit_disc())
}

pub fn multi_case_iii() -> MultiFsippProblem {
    let h = (h1_dehomogenized() * 0.01).embed(3, 0);
    let rest = poly(3, &[(&[0, 0, 0], -1.0), (&[1, 0, 1], -1.0), (&[0, 1, 2], -1.0)]);
    let f1 = poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], 1.0)]);
    let g1 = poly(2, &[(&[2, 0], -1.0), (&[0, 1], -1.0), (&[0, 0], 3.0)]);
    let f2 = poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[1, 0], -1.0), (&[0, 0], 1.0)]);
    multi(vec![(f1, g1), (f2, c(2, 1.0))], &h + &rest, IndexSetDesc::Interval)
}

pub fn multi_case_iv() -> MultiFsippProblem {
    let h = (h1_dehomogenized() * 0.01).embed(4, 0);
    let rest = poly(4, &[(&[0, 0, 0, 0], -1.0), (&[1, 0, 1, 1], -1.0), (&[0, 1, 1, 1], -1.0)]);
    let f1 = poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0), (&[0, 0], 1.0)]);
    let g1 = poly(2, &[(&[0, 2], -1.0), (&[1, 0], 1.0), (&[0, 0], 4.0)]);
    let f2 = poly(2, &[(&[2, 0], 1.0), (&[0, 1], 1.0)]);
    let g2 = poly(2, &[(&[1, 0], 1.0), (&[0, 1], 1.0), (&[0, 0], 2.0)]);
    multi(vec![(f1, g1), (f2, g2)], &h + &rest, unit_disc())
}

/// Initial points of the four multi-objective instances.
pub const MULTI_STARTS: [[f64; 2]; 4] = [[-1.0, 1.0], [0.0, 1.0], [-0.6, 0.5], [-0.5, 0.5]];

/// Boxes containing the feasible sets of the four multi-objective instances.
pub fn multi_boxes() -> [BoundingBox; 4] {
    [
        vec![(-2.5, 0.5), (-1.5, 2.5)],
        vec![(-1.05, 1.05), (-1.05, 1.05)],
        vec![(-1.5, 1.5), (-1.5, 1.5)],
        vec![(-1.5, 1.5), (-1.5, 1.5)],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case1_slices_match_the_closed_forms() {
        let p = case1().p;
        let s = |x: &[f64]| x[0] + x[1];
        for x in [[0.3, -0.7], [-1.2, 0.4]] {
            let at1 = p.substitute_y(&[1.0]).unwrap().eval(&x).unwrap();
            assert!((at1 - s(&x) * (s(&x) + 1.0)).abs() < 1e-12);
            let atm1 = p.substitute_y(&[-1.0]).unwrap().eval(&x).unwrap();
            assert!((atm1 - ((x[0] - x[1]).powi(2) + s(&x))).abs() < 1e-12);
        }
    }

    #[test]
    fn degrees() {
        assert_eq!(general().d(), 8);
        assert_eq!(general().p.deg_y(), Some(8));
        assert_eq!(case1().d(), 2);
        assert_eq!(case3().d(), 6);
        assert_eq!(h1_dehomogenized().degree(), Some(8));
    }
}
