//! Sparse multivariate polynomials over `f64`.
//!
//! Monomials are ordered graded-lexicographically with `x1 > x2 > ...`, so a
//! sorted list of monomials reads `1, x1, x2, x1^2, x1 x2, x2^2, ...`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{check_dim, FsippError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
    degree: u32,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        let degree = exps.iter().sum();
        Monomial { exps, degree }
    }

    pub fn one(nvars: usize) -> Self {
        Monomial::new(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial::new(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn is_one(&self) -> bool {
        self.degree == 0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        assert_eq!(self.nvars(), other.nvars(), "monomial variable count mismatch");
        Monomial {
            exps: self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect(),
            degree: self.degree + other.degree,
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(point)
            .filter(|(e, _)| **e > 0)
            .map(|(e, v)| v.powi(*e as i32))
            .product()
    }

    /// `|a|! / (a_1! ... a_m!)`
    pub fn multinomial(&self) -> f64 {
        let mut num = 1.0;
        let mut k = 0u32;
        for &e in &self.exps {
            for j in 1..=e {
                k += 1;
                num *= k as f64 / j as f64;
            }
        }
        num
    }

    /// Splits into the first `at` exponents and the rest.
    pub fn split(&self, at: usize) -> (Monomial, Monomial) {
        (
            Monomial::new(self.exps[..at].to_vec()),
            Monomial::new(self.exps[at..].to_vec()),
        )
    }

    pub fn concat(&self, other: &Monomial) -> Monomial {
        let mut e = self.exps.clone();
        e.extend_from_slice(&other.exps);
        Monomial::new(e)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "x{}", i + 1)?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Polynomial::monomial(Monomial::one(nvars), c)
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Polynomial::monomial(Monomial::var(nvars, i), 1.0)
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let mut p = Polynomial::zero(m.nvars());
        p.add_term(m, c);
        p
    }

    /// Builds from `(exponents, coefficient)` pairs; repeated exponents are summed.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Polynomial::zero(nvars);
        for (e, c) in terms {
            check_dim(nvars, e.len())?;
            if !c.is_finite() {
                return Err(FsippError::InvalidProblem("non-finite coefficient".into()));
            }
            p.add_term(Monomial::new(e), c);
        }
        Ok(p)
    }

    pub fn term_list(&self) -> Vec<(Vec<u32>, f64)> {
        self.terms
            .iter()
            .map(|(m, c)| (m.exponents().to_vec(), *c))
            .collect()
    }

    pub(crate) fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(m);
        match e {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    /// Degree with the zero polynomial counted as 0, for degree bounds.
    pub fn degree_or_zero(&self) -> u32 {
        self.degree().unwrap_or(0)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        check_dim(self.nvars, point.len())?;
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(point)).sum())
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial> {
        check_dim(self.nvars, other.nvars)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Polynomial) -> Result<Polynomial> {
        check_dim(self.nvars, other.nvars)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -*c);
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        check_dim(self.nvars, other.nvars)?;
        let mut out = Polynomial::zero(self.nvars);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(a.mul(b), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, lambda: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * lambda);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    pub fn partial(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.exponents()[i];
            if e == 0 {
                continue;
            }
            let mut ex = m.exponents().to_vec();
            ex[i] -= 1;
            out.add_term(Monomial::new(ex), c * e as f64);
        }
        out
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars).map(|i| self.partial(i)).collect()
    }

    pub fn hessian(&self) -> Vec<Vec<Polynomial>> {
        let g = self.gradient();
        (0..self.nvars)
            .map(|i| (0..self.nvars).map(|j| g[i].partial(j)).collect())
            .collect()
    }

    pub fn gradient_at(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.gradient().iter().map(|p| p.eval(point)).collect()
    }

    /// `max_a |c_a| / multinomial(|a|; a)`
    pub fn coeff_norm(&self) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c.abs() / m.multinomial())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).fold(0.0, f64::max)
    }

    /// Substitutes variable `i` by `subs[i]`; all substitutes share one variable count.
    pub fn compose(&self, subs: &[Polynomial]) -> Result<Polynomial> {
        check_dim(self.nvars, subs.len())?;
        let n = subs.first().map(|s| s.nvars).unwrap_or(0);
        for s in subs {
            check_dim(n, s.nvars)?;
        }
        let mut cache: Vec<Vec<Polynomial>> = subs
            .iter()
            .map(|s| vec![Polynomial::constant(n, 1.0), s.clone()])
            .collect();
        let mut out = Polynomial::zero(n);
        for (m, c) in &self.terms {
            let mut t = Polynomial::constant(n, *c);
            for (i, &e) in m.exponents().iter().enumerate() {
                let e = e as usize;
                while cache[i].len() <= e {
                    let next = &cache[i][cache[i].len() - 1] * &subs[i];
                    cache[i].push(next);
                }
                if e > 0 {
                    t = &t * &cache[i][e];
                }
            }
            out = &out + &t;
        }
        Ok(out)
    }

    /// Embeds into `new_nvars` variables, placing the current ones at `offset`.
    pub fn embed(&self, new_nvars: usize, offset: usize) -> Polynomial {
        assert!(offset + self.nvars <= new_nvars);
        let mut out = Polynomial::zero(new_nvars);
        for (m, c) in &self.terms {
            let mut e = vec![0; new_nvars];
            e[offset..offset + self.nvars].copy_from_slice(m.exponents());
            out.add_term(Monomial::new(e), *c);
        }
        out
    }
}

fn binop(a: &Polynomial, b: &Polynomial, f: fn(&Polynomial, &Polynomial) -> Result<Polynomial>) -> Polynomial {
    match f(a, b) {
        Ok(p) => p,
        Err(e) => panic!("polynomial arithmetic: {e}"),
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        binop(self, rhs, Polynomial::checked_add)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        binop(self, rhs, Polynomial::checked_sub)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        binop(self, rhs, Polynomial::checked_mul)
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: &Polynomial) -> Polynomial {
                (&self).$m(rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl Mul<f64> for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let (sign, a) = if *c < 0.0 { ("-", -c) } else { ("+", *c) };
            if i == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if m.is_one() {
                write!(f, "{a}")?;
            } else if a == 1.0 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{a}*{m}")?;
            }
        }
        Ok(())
    }
}

/// `p(x, y)` stored as y-monomial -> polynomial in `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct BivariatePoly {
    n_x: usize,
    n_y: usize,
    slices: BTreeMap<Monomial, Polynomial>,
    d_x: Option<u32>,
    d_y: Option<u32>,
}

impl BivariatePoly {
    pub fn new<I>(n_x: usize, n_y: usize, slices: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, Polynomial)>,
    {
        let mut map: BTreeMap<Monomial, Polynomial> = BTreeMap::new();
        for (ym, px) in slices {
            check_dim(n_y, ym.nvars())?;
            check_dim(n_x, px.nvars())?;
            let e = map.entry(ym).or_insert_with(|| Polynomial::zero(n_x));
            *e = &*e + &px;
        }
        map.retain(|_, p| !p.is_zero());
        let d_x = map.values().filter_map(|p| p.degree()).max();
        let d_y = map.keys().map(|m| m.degree()).max();
        Ok(BivariatePoly {
            n_x,
            n_y,
            slices: map,
            d_x,
            d_y,
        })
    }

    /// Splits a polynomial in `(x, y)` (x variables first).
    pub fn from_joint(joint: &Polynomial, n_x: usize) -> Self {
        let n_y = joint.nvars() - n_x;
        let slices = joint.terms().map(|(m, c)| {
            let (mx, my) = m.split(n_x);
            (my, Polynomial::monomial(mx, c))
        });
        BivariatePoly::new(n_x, n_y, slices.collect::<Vec<_>>()).expect("split dimensions are consistent")
    }

    pub fn to_joint(&self) -> Polynomial {
        let mut out = Polynomial::zero(self.n_x + self.n_y);
        for (my, px) in &self.slices {
            for (mx, c) in px.terms() {
                out.add_term(mx.concat(my), c);
            }
        }
        out
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn slices(&self) -> impl Iterator<Item = (&Monomial, &Polynomial)> {
        self.slices.iter()
    }

    pub fn deg_x(&self) -> Option<u32> {
        self.d_x
    }

    pub fn deg_y(&self) -> Option<u32> {
        self.d_y
    }

    pub fn substitute_y(&self, ypoint: &[f64]) -> Result<Polynomial> {
        check_dim(self.n_y, ypoint.len())?;
        let mut out = Polynomial::zero(self.n_x);
        for (my, px) in &self.slices {
            let w = my.eval(ypoint);
            for (mx, c) in px.terms() {
                out.add_term(mx.clone(), c * w);
            }
        }
        Ok(out)
    }

    pub fn substitute_x(&self, xpoint: &[f64]) -> Result<Polynomial> {
        check_dim(self.n_x, xpoint.len())?;
        let mut out = Polynomial::zero(self.n_y);
        for (my, px) in &self.slices {
            out.add_term(my.clone(), px.eval(xpoint)?);
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.substitute_y(y)?.eval(x)
    }

    /// `grad_x p(x, y)`
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.substitute_y(y)?.gradient_at(x)
    }

    pub fn scale(&self, lambda: f64) -> BivariatePoly {
        let slices = self.slices.iter().map(|(m, p)| (m.clone(), p.scale(lambda)));
        BivariatePoly::new(self.n_x, self.n_y, slices.collect::<Vec<_>>()).expect("same dimensions")
    }
}
