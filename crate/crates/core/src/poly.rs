//! Sparse multivariate polynomials with complex coefficients over real
//! variables `x1 .. xN`.
//!
//! Terms are kept in a `BTreeMap` keyed by [`Monomial`], whose ordering is
//! graded (total degree first) and, inside one degree, lexicographic with
//! earlier variables leading (`x1^2, x1*x2, x2^2`). Every ordered traversal
//! in the crate (canonical printing, ansatz columns, basis normalization)
//! follows this order.

mod parse;

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use parse::VarNames;

/// Exponent vector of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Value at a real point.
    pub fn eval(&self, p: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(p)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }

    /// Value at a complex point.
    pub fn eval_complex(&self, p: &[Complex64]) -> Complex64 {
        self.0
            .iter()
            .zip(p)
            .filter(|(e, _)| **e > 0)
            .fold(Complex64::new(1.0, 0.0), |acc, (&e, &z)| acc * z.powu(e))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All monomials in `nvars` variables of total degree `<= degree`, in
/// monomial order (the constant first).
pub fn monomials_up_to(nvars: usize, degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=degree {
        let mut cur = vec![0u32; nvars];
        push_degree(&mut out, &mut cur, 0, d);
    }
    out
}

fn push_degree(out: &mut Vec<Monomial>, cur: &mut Vec<u32>, idx: usize, remaining: u32) {
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    if idx + 1 == cur.len() {
        cur[idx] = remaining;
        out.push(Monomial(cur.clone()));
        cur[idx] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[idx] = e;
        push_degree(out, cur, idx + 1, remaining - e);
    }
    cur[idx] = 0;
}

/// A polynomial `sum c_a x^a` with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Monomial, Complex64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: impl Into<Complex64>) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(Monomial::one(nvars), c.into());
        p
    }

    /// The coordinate function `x_{i+1}`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(
            i < nvars,
            "variable index {i} out of range for {nvars} variables"
        );
        let mut p = Poly::zero(nvars);
        p.add_term(Monomial::var(nvars, i), Complex64::new(1.0, 0.0));
        p
    }

    /// `x_{2j+1} + i x_{2j+2}`, the j-th (0-based) complex coordinate.
    pub fn complex_coordinate(nvars: usize, j: usize) -> Self {
        Poly::var(nvars, 2 * j) + Poly::var(nvars, 2 * j + 1) * Complex64::i()
    }

    pub fn from_terms(
        nvars: usize,
        terms: impl IntoIterator<Item = (Monomial, Complex64)>,
    ) -> Result<Self> {
        let mut p = Poly::zero(nvars);
        for (m, c) in terms {
            if m.nvars() != nvars {
                return Err(Error::Dimension(format!(
                    "monomial has {} variables, polynomial has {nvars}",
                    m.nvars()
                )));
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    /// Adds `c * m`, merging with an existing term and dropping exact zeros.
    pub fn add_term(&mut self, m: Monomial, c: Complex64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        let zero = Complex64::new(0.0, 0.0);
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == zero {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if c != zero {
                    v.insert(c);
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, exponents: &[u32]) -> Complex64 {
        self.terms
            .get(&Monomial(exponents.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// True when every coefficient has an exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.im == 0.0)
    }

    pub fn check_degree(&self, cap: u32) -> Result<()> {
        if self.degree() > cap {
            return Err(Error::Config(format!(
                "polynomial degree {} exceeds cap {cap}",
                self.degree()
            )));
        }
        Ok(())
    }

    /// Largest coefficient modulus.
    pub fn max_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, p: &[f64]) -> Complex64 {
        debug_assert_eq!(p.len(), self.nvars);
        self.terms
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, (m, c)| acc + c * m.eval(p))
    }

    /// Real part of the value; used for real-coefficient fields.
    pub fn eval_real(&self, p: &[f64]) -> f64 {
        self.eval(p).re
    }

    /// Value with the variables set to complex numbers.
    pub fn eval_complex(&self, p: &[Complex64]) -> Complex64 {
        debug_assert_eq!(p.len(), self.nvars);
        self.terms
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, (m, c)| {
                acc + c * m.eval_complex(p)
            })
    }

    /// Exact partial derivative with respect to variable `i` (0-based).
    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.0[i] -= 1;
            out.add_term(dm, c * f64::from(e));
        }
        out
    }

    pub fn gradient(&self) -> Vec<Poly> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    pub fn conj(&self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.conj()))
                .collect(),
        }
    }

    /// Real and imaginary parts as real-coefficient polynomials.
    pub fn re_im(&self) -> (Poly, Poly) {
        let mut re = Poly::zero(self.nvars);
        let mut im = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            if c.re != 0.0 {
                re.add_term(m.clone(), Complex64::new(c.re, 0.0));
            }
            if c.im != 0.0 {
                im.add_term(m.clone(), Complex64::new(c.im, 0.0));
            }
        }
        (re, im)
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::constant(self.nvars, 1.0);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Substitutes `subs[i]` for variable `i`. All substitutes must share a
    /// variable count, which becomes the variable count of the result.
    pub fn compose(&self, subs: &[Poly]) -> Result<Poly> {
        if subs.len() != self.nvars {
            return Err(Error::Dimension(format!(
                "composition needs {} substitutes, got {}",
                self.nvars,
                subs.len()
            )));
        }
        let target = subs.first().map(Poly::nvars).unwrap_or(0);
        if subs.iter().any(|s| s.nvars() != target) {
            return Err(Error::Dimension(
                "substitutes have different variable counts".into(),
            ));
        }
        // powers[i][e] = subs[i]^e, built lazily up to the largest exponent
        let mut powers: Vec<Vec<Poly>> = subs
            .iter()
            .map(|s| vec![Poly::constant(target, 1.0), s.clone()])
            .collect();
        for m in self.terms.keys() {
            for (i, &e) in m.0.iter().enumerate() {
                while powers[i].len() <= e as usize {
                    let next = &powers[i][powers[i].len() - 1] * &subs[i];
                    powers[i].push(next);
                }
            }
        }
        let mut out = Poly::zero(target);
        for (m, c) in &self.terms {
            let mut term = Poly::constant(target, *c);
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    term = &term * &powers[i][e as usize];
                }
            }
            out = out + term;
        }
        Ok(out)
    }

    /// Canonical text using the given variable names.
    pub fn to_string_with(&self, names: &VarNames) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                out.push_str(" + ");
            }
            out.push_str(&format_complex(*c));
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => out.push_str(&format!("*{}", names.name(i))),
                    _ => out.push_str(&format!("*{}^{e}", names.name(i))),
                }
            }
        }
        out
    }

    /// Parses a polynomial in the real variables `x1 .. x{nvars}`.
    pub fn parse(text: &str, nvars: usize) -> Result<Poly> {
        parse::parse(text, &VarNames::Real(nvars))
    }

    pub fn parse_with(text: &str, names: &VarNames) -> Result<Poly> {
        parse::parse(text, names)
    }
}

fn format_complex(c: Complex64) -> String {
    // adding +0.0 turns a negative zero into a positive one
    let c = Complex64::new(c.re + 0.0, c.im + 0.0);
    let sign = if c.im.is_sign_negative() { '-' } else { '+' };
    format!("({}{}{}i)", c.re, sign, c.im.abs())
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_with(&VarNames::Real(self.nvars)))
    }
}

impl std::ops::Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl std::ops::Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl std::ops::Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl std::ops::Mul<&Poly> for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut out = Poly::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl std::ops::Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

impl std::ops::Mul<Complex64> for Poly {
    type Output = Poly;
    fn mul(self, rhs: Complex64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in self.terms {
            out.add_term(m, c * rhs);
        }
        out
    }
}

impl std::ops::Mul<f64> for Poly {
    type Output = Poly;
    fn mul(self, rhs: f64) -> Poly {
        self * Complex64::new(rhs, 0.0)
    }
}
