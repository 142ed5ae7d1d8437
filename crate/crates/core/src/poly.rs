//! Sparse homogeneous polynomials and monomial bases of symmetric powers.
//!
//! Terms are kept in graded-lexicographic order with `x[0]` the greatest
//! variable, so for a fixed degree the first monomial is `x0^d` and the last
//! is `x_{n-1}^d`. The same order indexes [`MonomialBasis`], which fixes the
//! coordinate layout of every symmetric-tensor vector in the crate.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar field used for polynomial coefficients: `f64` for numeric paths,
/// [`BigRational`] for exact identity checks.
pub trait Coeff: Clone + Debug + PartialEq + Num + Neg<Output = Self> + Send + Sync {
    fn from_i64(n: i64) -> Self;
    fn from_big(n: &BigInt) -> Self;
    fn to_f64(&self) -> f64;
}

impl Coeff for f64 {
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn from_big(n: &BigInt) -> Self {
        n.to_f64().unwrap_or(f64::NAN)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coeff for BigRational {
    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn from_big(n: &BigInt) -> Self {
        BigRational::from_integer(n.clone())
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Exponent vector ordered so that iteration runs in graded-lex order with
/// `x[0]` greatest.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Exponent(pub Vec<u32>);

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        let da: u32 = self.0.iter().sum();
        let db: u32 = other.0.iter().sum();
        db.cmp(&da).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Homogeneous polynomial in `nvars` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct HomoPoly<T> {
    nvars: usize,
    degree: u32,
    terms: BTreeMap<Exponent, T>,
}

impl<T: Coeff> HomoPoly<T> {
    pub fn zero(nvars: usize, degree: u32) -> Self {
        HomoPoly {
            nvars,
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        let mut p = Self::zero(nvars, 0);
        p.insert_term(vec![0; nvars], c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, T::one())
    }

    /// The linear form `x[i]`.
    pub fn variable(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index {i} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars, 1);
        p.insert_term(e, T::one());
        p
    }

    /// Build from `(exponent, coefficient)` pairs; repeated exponents are summed.
    pub fn from_terms<I>(nvars: usize, degree: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, T)>,
    {
        let mut p = Self::zero(nvars, degree);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::LengthMismatch {
                    expected: nvars,
                    got: e.len(),
                });
            }
            let d: u32 = e.iter().sum();
            if d != degree {
                return Err(Error::DegreeMismatch(degree, d));
            }
            p.insert_term(e, c);
        }
        Ok(p)
    }

    fn insert_term(&mut self, e: Vec<u32>, c: T) {
        if c.is_zero() {
            return;
        }
        let key = Exponent(e);
        match self.terms.get_mut(&key) {
            Some(v) => {
                let s = v.clone() + c;
                if s.is_zero() {
                    self.terms.remove(&key);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &T)> {
        self.terms.iter().map(|(e, c)| (e.0.as_slice(), c))
    }

    pub fn coeff(&self, e: &[u32]) -> T {
        self.terms.get(&Exponent(e.to_vec())).cloned().unwrap_or_else(T::zero)
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut p = Self::zero(self.nvars, self.degree);
        if c.is_zero() {
            return p;
        }
        for (e, v) in &self.terms {
            p.terms.insert(e.clone(), v.clone() * c.clone());
        }
        p
    }

    fn check_same_ring(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::VarMismatch(self.nvars, other.nvars));
        }
        Ok(())
    }

    /// `self += c * other`. A zero polynomial adopts the degree of the other operand.
    pub fn add_scaled(&mut self, other: &Self, c: &T) -> Result<()> {
        self.check_same_ring(other)?;
        if other.is_zero() || c.is_zero() {
            return Ok(());
        }
        if self.is_zero() {
            self.degree = other.degree;
        } else if self.degree != other.degree {
            return Err(Error::DegreeMismatch(self.degree, other.degree));
        }
        for (e, v) in &other.terms {
            self.insert_term(e.0.clone(), v.clone() * c.clone());
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut p = self.clone();
        p.add_scaled(other, &T::one())?;
        Ok(p)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut p = self.clone();
        p.add_scaled(other, &-T::one())?;
        Ok(p)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_ring(other)?;
        let mut p = Self::zero(self.nvars, self.degree + other.degree);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.0.iter().zip(&eb.0).map(|(a, b)| a + b).collect();
                p.insert_term(e, ca.clone() * cb.clone());
            }
        }
        Ok(p)
    }

    /// `self^r` by repeated squaring; `p^0 = 1`.
    pub fn pow(&self, r: u32) -> Self {
        let mut result = Self::one(self.nvars);
        let mut base = self.clone();
        let mut k = r;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base).expect("same ring");
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base).expect("same ring");
            }
        }
        result
    }

    pub fn evaluate(&self, x: &[T]) -> Result<T> {
        if x.len() != self.nvars {
            return Err(Error::LengthMismatch {
                expected: self.nvars,
                got: x.len(),
            });
        }
        let mut acc = T::zero();
        for (e, c) in &self.terms {
            let mut m = c.clone();
            for (xi, &ei) in x.iter().zip(&e.0) {
                for _ in 0..ei {
                    m = m * xi.clone();
                }
            }
            acc = acc + m;
        }
        Ok(acc)
    }

    /// Substitute `x[i] -> x[map[i]]` into a ring with `nvars` variables.
    pub fn relabel(&self, nvars: usize, map: impl Fn(usize) -> usize) -> Self {
        let mut p = Self::zero(nvars, self.degree);
        for (e, c) in &self.terms {
            let mut f = vec![0u32; nvars];
            for (i, &ei) in e.0.iter().enumerate() {
                if ei > 0 {
                    f[map(i)] += ei;
                }
            }
            p.insert_term(f, c.clone());
        }
        p
    }

    /// Coordinates in the monomial basis of matching size and degree.
    pub fn sym_coords(&self) -> Vec<T> {
        let basis = MonomialBasis::new(self.nvars, self.degree);
        self.coords_in(&basis)
    }

    pub fn coords_in(&self, basis: &MonomialBasis) -> Vec<T> {
        assert_eq!(basis.nvars(), self.nvars);
        let mut v = vec![T::zero(); basis.len()];
        if self.is_zero() {
            return v;
        }
        assert_eq!(basis.degree(), self.degree);
        for (e, c) in &self.terms {
            v[basis.index_of(&e.0).expect("exponent in basis")] = c.clone();
        }
        v
    }

    pub fn from_sym_coords(basis: &MonomialBasis, coords: &[T]) -> Result<Self> {
        if coords.len() != basis.len() {
            return Err(Error::LengthMismatch {
                expected: basis.len(),
                got: coords.len(),
            });
        }
        let mut p = Self::zero(basis.nvars(), basis.degree());
        for (e, c) in basis.iter().zip(coords) {
            p.insert_term(e.to_vec(), c.clone());
        }
        Ok(p)
    }

    pub fn map_coeffs<U: Coeff>(&self, f: impl Fn(&T) -> U) -> HomoPoly<U> {
        let mut p = HomoPoly::zero(self.nvars, self.degree);
        for (e, c) in &self.terms {
            p.insert_term(e.0.clone(), f(c));
        }
        p
    }
}

impl HomoPoly<BigRational> {
    pub fn to_f64(&self) -> HomoPoly<f64> {
        self.map_coeffs(Coeff::to_f64)
    }
}

impl HomoPoly<f64> {
    pub fn to_rational(&self) -> HomoPoly<BigRational> {
        self.map_coeffs(|c| rational_from_f64(*c))
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    e: Vec<u32>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    nvars: usize,
    degree: u32,
    terms: Vec<TermJson>,
}

impl Serialize for HomoPoly<f64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyJson {
            nvars: self.nvars,
            degree: self.degree,
            terms: self.terms().map(|(e, c)| TermJson { e: e.to_vec(), c: *c }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HomoPoly<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PolyJson::deserialize(d)?;
        HomoPoly::from_terms(raw.nvars, raw.degree, raw.terms.into_iter().map(|t| (t.e, t.c))).map_err(serde::de::Error::custom)
    }
}

/// Monomials of a fixed degree in graded-lex order, with index lookup.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    nvars: usize,
    degree: u32,
    exps: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl MonomialBasis {
    pub fn new(nvars: usize, degree: u32) -> Self {
        let exps = enumerate_exponents(nvars, degree);
        let index = exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        MonomialBasis {
            nvars,
            degree,
            exps,
            index,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponent(&self, i: usize) -> &[u32] {
        &self.exps[i]
    }

    pub fn index_of(&self, e: &[u32]) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.exps.iter().map(|e| e.as_slice())
    }
}

/// All exponent vectors of total degree `degree` in `nvars` variables,
/// graded-lex with the first variable greatest.
pub fn enumerate_exponents(nvars: usize, degree: u32) -> Vec<Vec<u32>> {
    if nvars == 0 {
        return if degree == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    let mut e = vec![0u32; nvars];
    e[0] = degree;
    loop {
        out.push(e.clone());
        // Next exponent in descending lex order: find the rightmost position
        // (excluding the last) with a positive entry, move one unit right and
        // sweep the tail into the position after it.
        let last = nvars - 1;
        let tail = e[last];
        e[last] = 0;
        let Some(pos) = (0..last).rev().find(|&i| e[i] > 0) else {
            break;
        };
        e[pos] -= 1;
        e[pos + 1] = tail + 1;
    }
    out
}

/// Binomial coefficient as `u128`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Multinomial coefficient `(|a| choose a)`.
pub fn multinomial(a: &[u32]) -> u128 {
    let mut acc: u128 = 1;
    let mut n: u64 = 0;
    for &ai in a {
        n += ai as u64;
        acc *= binomial(n, ai as u64);
    }
    acc
}

/// Veronese vector: every basis monomial evaluated at `x`.
pub fn veronese<T: Coeff>(x: &[T], degree: u32) -> Vec<T> {
    let basis = MonomialBasis::new(x.len(), degree);
    veronese_in(&basis, x)
}

pub fn veronese_in<T: Coeff>(basis: &MonomialBasis, x: &[T]) -> Vec<T> {
    assert_eq!(basis.nvars(), x.len());
    let d = basis.degree() as usize;
    // powers[i][p] = x[i]^p
    let powers: Vec<Vec<T>> = x
        .iter()
        .map(|xi| {
            let mut v = Vec::with_capacity(d + 1);
            v.push(T::one());
            for p in 0..d {
                let next = v[p].clone() * xi.clone();
                v.push(next);
            }
            v
        })
        .collect();
    basis
        .iter()
        .map(|e| {
            e.iter()
                .enumerate()
                .fold(T::one(), |acc, (i, &ei)| acc * powers[i][ei as usize].clone())
        })
        .collect()
}

/// `⟨coords, veronese(x)⟩`, the unweighted monomial pairing.
pub fn pair<T: Coeff>(coords: &[T], ver: &[T]) -> T {
    coords
        .iter()
        .zip(ver)
        .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
}
