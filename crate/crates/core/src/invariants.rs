//! Dimension, degree and generic Euclidean distance degree of the neuromanifold.
//!
//! Everything here is evaluated in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::conv::Architecture;
use crate::error::{Error, Result};

/// Published generic ED degrees for two layers of equal filter size `k`;
/// rows `r = 1..=6`, columns `k = 2..=6`.
pub const TABLE1_REFERENCE: [[u64; 5]; 6] = [
    [6, 39, 284, 2205, 17730],
    [14, 219, 3772, 68405, 1277898],
    [22, 543, 14684, 417005, 12186066],
    [30, 1011, 37244, 1439205, 57202074],
    [38, 1623, 75676, 3699005, 185917794],
    [46, 2379, 134204, 7933205, 482134890],
];

/// Column headers of [`table1_csv`].
pub const TABLE1_HEADER: &str = "r,k2,k3,k4,k5,k6";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InvariantReport {
    pub dim: usize,
    #[serde(serialize_with = "ser_big")]
    pub degree: BigInt,
    #[serde(serialize_with = "ser_big")]
    pub ged: BigInt,
    pub m: Vec<u64>,
    pub p: Vec<u64>,
}

fn ser_big<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    // integers beyond 2^53 lose precision as JSON numbers in many readers
    match i64::try_from(v) {
        Ok(x) if x.unsigned_abs() < (1u64 << 53) => s.serialize_i64(x),
        _ => s.serialize_str(&v.to_string()),
    }
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn big_pow(base: u64, exp: u64) -> BigInt {
    num_traits::pow(BigInt::from(base), exp as usize)
}

fn to_integer(q: BigRational, err: impl FnOnce(String) -> Error) -> Result<BigInt> {
    if q.is_integer() {
        Ok(q.to_integer())
    } else {
        Err(err(q.to_string()))
    }
}

/// Visits every `α` with `0 ≤ α_j ≤ caps_j` and `Σ α_j = total`.
fn for_each_multi_index(caps: &[u64], total: u64, mut f: impl FnMut(&[u64])) {
    let n = caps.len();
    if n == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    let mut alpha = vec![0u64; n];
    loop {
        if alpha.iter().sum::<u64>() == total {
            f(&alpha);
        }
        let mut j = 0;
        loop {
            if j == n {
                return;
            }
            if alpha[j] < caps[j] {
                alpha[j] += 1;
                break;
            }
            alpha[j] = 0;
            j += 1;
        }
    }
}

/// Segre–Veronese weights `m = (r^{L-1}, …, r, 1)`.
pub fn segre_weights(arch: &Architecture) -> Vec<u64> {
    let l = arch.layers() as u32;
    (0..l).map(|i| (arch.r as u64).pow(l - 1 - i)).collect()
}

/// Projective factor dimensions `p_i = k_i - 1`.
pub fn segre_dims(arch: &Architecture) -> Vec<u64> {
    arch.k.iter().map(|&k| k as u64 - 1).collect()
}

fn require_nonlinear(arch: &Architecture) -> Result<()> {
    if arch.r < 2 {
        Err(Error::RequiresRGreaterOne)
    } else {
        Ok(())
    }
}

/// `|k| - L + 1`.
pub fn neuromanifold_dim(arch: &Architecture) -> Result<usize> {
    require_nonlinear(arch)?;
    Ok(arch.num_params() - arch.layers() + 1)
}

/// `(|k| - L)! Π_j r^{(L-j-1)(k_j-1)} / (k_j-1)!`.
pub fn neuromanifold_degree(arch: &Architecture) -> Result<BigInt> {
    require_nonlinear(arch)?;
    let l = arch.layers() as u64;
    let kbar = (arch.num_params() - arch.layers()) as u64;
    let mut q = BigRational::from_integer(factorial(kbar));
    for (j, &k) in arch.k.iter().enumerate() {
        let kj = k as u64 - 1;
        q *= BigRational::new(big_pow(arch.r as u64, (l - j as u64 - 1) * kj), factorial(kj));
    }
    to_integer(q, Error::NonIntegralDegree)
}

/// Generic ED degree of the Segre–Veronese variety with weights `m` and factor dimensions `p`.
pub fn ged_segre_veronese(m: &[u64], p: &[u64]) -> Result<BigInt> {
    ged_segre_veronese_with(m, p, 1)
}

// `shift` = 1 is the true formula; other values feed the negative control.
fn ged_segre_veronese_with(m: &[u64], p: &[u64], shift: u64) -> Result<BigInt> {
    if m.len() != p.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            got: m.len(),
        });
    }
    if m.contains(&0) {
        return Err(Error::InvalidArchitecture("Segre–Veronese weights must be positive".into()));
    }
    let total: u64 = p.iter().sum();
    let mut sum = BigRational::zero();
    for i in 0..=total {
        let mut inner = BigRational::zero();
        for_each_multi_index(p, i, |alpha| {
            let mut term = BigRational::one();
            for ((&pj, &mj), &aj) in p.iter().zip(m).zip(alpha) {
                term *= BigRational::new(binom(pj + 1, aj) * big_pow(mj, pj - aj), factorial(pj - aj));
            }
            inner += term;
        });
        let outer = (big_pow(2, total + shift - i) - BigInt::one()) * factorial(total - i);
        let signed = BigRational::from_integer(outer) * inner;
        if i % 2 == 0 {
            sum += signed;
        } else {
            sum -= signed;
        }
    }
    let n = to_integer(sum, Error::NonIntegralGed)?;
    if !n.is_positive() {
        return Err(Error::NonIntegralGed(format!("non-positive value {n}")));
    }
    Ok(n)
}

/// Generic ED degree written directly in filter sizes and activation degree.
fn ged_from_filters(k: &[usize], r: u32) -> Result<BigInt> {
    let l = k.len() as u64;
    let kbar: u64 = k.iter().map(|&x| x as u64 - 1).sum();
    let caps: Vec<u64> = k.iter().map(|&x| x as u64 - 1).collect();
    let mut sum = BigRational::zero();
    for i in 0..=kbar {
        let mut inner = BigRational::zero();
        for_each_multi_index(&caps, i, |alpha| {
            let mut term = BigRational::one();
            for (j, (&kj, &aj)) in k.iter().zip(alpha).enumerate() {
                let kj = kj as u64;
                let e = (l - j as u64 - 1) * (kj - aj - 1);
                term *= BigRational::new(binom(kj, aj) * big_pow(r as u64, e), factorial(kj - aj - 1));
            }
            inner += term;
        });
        let c = BigRational::from_integer((big_pow(2, kbar + 1 - i) - BigInt::one()) * factorial(kbar - i));
        if i % 2 == 0 {
            sum += c * inner;
        } else {
            sum -= c * inner;
        }
    }
    to_integer(sum, Error::NonIntegralGed)
}

/// Generic ED degree of the neuromanifold, computed two ways and cross-checked.
///
/// The formula is evaluated for any `r ≥ 1`; for `r = 1` it is the value of the
/// Segre variety rather than of a neuromanifold.
pub fn ged_neuromanifold(arch: &Architecture) -> Result<BigInt> {
    let a = ged_from_filters(&arch.k, arch.r)?;
    let b = ged_segre_veronese(&segre_weights(arch), &segre_dims(arch))?;
    if a != b {
        return Err(Error::FormulaMismatch(a.to_string(), b.to_string()));
    }
    Ok(a)
}

pub fn invariant_report(arch: &Architecture) -> Result<InvariantReport> {
    let report = InvariantReport {
        dim: neuromanifold_dim(arch)?,
        degree: neuromanifold_degree(arch)?,
        ged: ged_neuromanifold(arch)?,
        m: segre_weights(arch),
        p: segre_dims(arch),
    };
    debug_assert!(report.ged >= report.degree);
    Ok(report)
}

fn two_layer(k: usize, r: u32) -> Architecture {
    Architecture::with_output_width(vec![k, k], vec![1, 1], r, 1).expect("valid two-layer architecture")
}

/// Rows `r = 1..=6`, columns `k = 2..=6`, for two layers with equal filter size `k`.
pub fn table1() -> Result<Vec<Vec<BigInt>>> {
    (1..=6u32)
        .map(|r| (2..=6usize).map(|k| ged_neuromanifold(&two_layer(k, r))).collect())
        .collect()
}

/// Same grid with a deliberately wrong power of two; used as a negative control.
pub fn table1_canary() -> Result<Vec<Vec<BigInt>>> {
    (1..=6u64)
        .map(|r| {
            (2..=6u64)
                .map(|k| ged_segre_veronese_with(&[r, 1], &[k - 1, k - 1], 0))
                .collect()
        })
        .collect()
}

pub fn table1_csv(grid: &[Vec<BigInt>]) -> String {
    let mut out = String::from(TABLE1_HEADER);
    out.push('\n');
    for (r, row) in grid.iter().enumerate() {
        out.push_str(&(r + 1).to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}
