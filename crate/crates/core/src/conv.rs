//! Strided 1-D convolution ("valid" padding) as a Toeplitz map and as
//! bivariate polynomial multiplication.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Coeff, HomoPoly};

/// Relative singular-value threshold for numeric rank.
pub const RANK_RTOL: f64 = 1e-9;

/// A single convolution filter `w ∈ R^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Filter<T = f64>(pub Vec<T>);

impl<T: Coeff> Filter<T> {
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArchitecture("filter must have at least one entry".into()));
        }
        Ok(Filter(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_nonzero(&self) -> bool {
        self.0.iter().any(|v| !v.is_zero())
    }

    pub fn entries(&self) -> &[T] {
        &self.0
    }

    /// Number of zero entries before the first nonzero one (all of them for a zero filter).
    pub fn leading_zeros(&self) -> usize {
        self.0.iter().take_while(|v| v.is_zero()).count()
    }

    pub fn trailing_zeros(&self) -> usize {
        self.0.iter().rev().take_while(|v| v.is_zero()).count()
    }
}

/// Layer structure of a 1-D polynomial CNN.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Activation exponent.
    pub r: u32,
    /// Filter sizes, one per layer.
    pub k: Vec<usize>,
    /// Strides, one per layer.
    pub s: Vec<usize>,
    /// Layer widths `d_0, …, d_L`.
    pub d: Vec<usize>,
}

impl Architecture {
    /// Derive the width chain from the input width, checking that every layer
    /// satisfies `d_i = s_i (d_{i+1} - 1) + k_i`.
    pub fn new(d0: usize, k: Vec<usize>, s: Vec<usize>, r: u32) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::InvalidArchitecture("at least one layer is required".into()));
        }
        if k.len() != s.len() {
            return Err(Error::InvalidArchitecture(format!(
                "{} filter sizes but {} strides",
                k.len(),
                s.len()
            )));
        }
        if r == 0 {
            return Err(Error::InvalidArchitecture("activation exponent must be >= 1".into()));
        }
        if let Some(i) = k.iter().position(|&ki| ki == 0) {
            return Err(Error::InvalidArchitecture(format!("filter size of layer {i} is zero")));
        }
        if let Some(i) = s.iter().position(|&si| si == 0) {
            return Err(Error::InvalidArchitecture(format!("stride of layer {i} is zero")));
        }
        let mut d = vec![d0];
        for (layer, (&ki, &si)) in k.iter().zip(&s).enumerate() {
            let width = *d.last().unwrap();
            if width < ki {
                return Err(Error::NonPositiveWidth { layer, width, k: ki });
            }
            if (width - ki) % si != 0 {
                return Err(Error::NonIntegralWidth {
                    layer,
                    width,
                    k: ki,
                    s: si,
                });
            }
            d.push((width - ki) / si + 1);
        }
        Ok(Architecture { r, k, s, d })
    }

    /// Build the architecture with the given output width `d_L`.
    pub fn with_output_width(k: Vec<usize>, s: Vec<usize>, r: u32, d_out: usize) -> Result<Self> {
        if d_out == 0 || k.len() != s.len() {
            return Err(Error::InvalidArchitecture("output width must be >= 1".into()));
        }
        let mut width = d_out;
        for (&ki, &si) in k.iter().zip(&s).rev() {
            width = si * (width - 1) + ki;
        }
        Self::new(width, k, s, r)
    }

    pub fn layers(&self) -> usize {
        self.k.len()
    }

    pub fn d0(&self) -> usize {
        self.d[0]
    }

    pub fn d_out(&self) -> usize {
        *self.d.last().unwrap()
    }

    /// `|k|`, the number of parameters.
    pub fn num_params(&self) -> usize {
        self.k.iter().sum()
    }

    /// Offset of layer `i`'s first entry in the flat parameter vector.
    pub fn param_offset(&self, layer: usize) -> usize {
        self.k[..layer].iter().sum()
    }

    /// Degree `r^{L-1}` of the network polynomials.
    pub fn output_degree(&self) -> u32 {
        self.r.pow(self.layers() as u32 - 1)
    }

    /// Degree exponents `m = (r^{L-1}, …, r, 1)` of the Segre–Veronese factors.
    pub fn segre_degrees(&self) -> Vec<u32> {
        let l = self.layers() as u32;
        (0..l).map(|i| self.r.pow(l - 1 - i)).collect()
    }

    /// Product of all strides: the input shift between adjacent outputs.
    pub fn total_stride(&self) -> usize {
        self.s.iter().product()
    }

    /// Receptive field of one output: `1 + Σ_i (k_i - 1) Π_{j<i} s_j`.
    pub fn receptive_field(&self) -> usize {
        let mut w = 1;
        let mut prod = 1;
        for (&ki, &si) in self.k.iter().zip(&self.s) {
            w += (ki - 1) * prod;
            prod *= si;
        }
        w
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "d0={};k={};s={};r={}", self.d0(), join(&self.k), join(&self.s), self.r)
    }
}

impl FromStr for Architecture {
    type Err = Error;

    /// Parses `d0=<int>;k=<int,...>;s=<int,...>;r=<int>`.
    fn from_str(text: &str) -> Result<Self> {
        let mut d0 = None;
        let mut k = None;
        let mut s = None;
        let mut r = None;
        let list = |v: &str| -> Result<Vec<usize>> {
            v.split(',')
                .map(|x| {
                    x.parse::<usize>()
                        .map_err(|e| Error::Parse(format!("bad integer {x:?}: {e}")))
                })
                .collect()
        };
        for field in text.trim().split(';') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, found {field:?}")))?;
            match key {
                "d0" => d0 = Some(value.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?),
                "k" => k = Some(list(value)?),
                "s" => s = Some(list(value)?),
                "r" => r = Some(value.parse::<u32>().map_err(|e| Error::Parse(e.to_string()))?),
                other => return Err(Error::Parse(format!("unknown key {other:?}"))),
            }
        }
        let missing = |name: &str| Error::Parse(format!("missing field {name}"));
        Architecture::new(
            d0.ok_or_else(|| missing("d0"))?,
            k.ok_or_else(|| missing("k"))?,
            s.ok_or_else(|| missing("s"))?,
            r.ok_or_else(|| missing("r"))?,
        )
    }
}

/// Input length required for `d_out` outputs.
pub fn input_len(k: usize, s: usize, d_out: usize) -> usize {
    s * (d_out - 1) + k
}

/// `d_out × (s (d_out - 1) + k)` banded matrix of `x ↦ w ⋆_s x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzMatrix {
    pub matrix: DMatrix<f64>,
}

impl ToeplitzMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(Error::LengthMismatch {
                expected: self.cols(),
                got: x.len(),
            });
        }
        Ok((0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.matrix[(i, j)] * x[j]).sum())
            .collect())
    }
}

pub fn toeplitz(w: &Filter, s: usize, d_out: usize) -> ToeplitzMatrix {
    assert!(d_out >= 1 && s >= 1);
    let k = w.len();
    let mut m = DMatrix::zeros(d_out, input_len(k, s, d_out));
    for i in 0..d_out {
        for (j, &wj) in w.0.iter().enumerate() {
            m[(i, s * i + j)] = wj;
        }
    }
    ToeplitzMatrix { matrix: m }
}

/// `(w ⋆_s x)[i] = Σ_j w[j] x[s i + j]`.
pub fn convolve<T: Coeff>(w: &Filter<T>, s: usize, x: &[T]) -> Result<Vec<T>> {
    let k = w.len();
    if s == 0 || x.len() < k || !(x.len() - k).is_multiple_of(s) {
        return Err(Error::LengthMismatch {
            expected: if x.len() < k {
                k
            } else {
                input_len(k, s.max(1), (x.len() - k) / s.max(1) + 1)
            },
            got: x.len(),
        });
    }
    let d_out = (x.len() - k) / s + 1;
    Ok((0..d_out)
        .map(|i| {
            w.0.iter()
                .enumerate()
                .fold(T::zero(), |acc, (j, wj)| acc + wj.clone() * x[s * i + j].clone())
        })
        .collect())
}

/// `π_s(w) = Σ_i w[i] a^{s(k-i-1)} b^{s i}` as a bivariate form in `(a, b)`.
pub fn filter_to_poly<T: Coeff>(w: &Filter<T>, s: usize) -> HomoPoly<T> {
    let k = w.len();
    let degree = (s * (k - 1)) as u32;
    HomoPoly::from_terms(
        2,
        degree,
        w.0.iter()
            .enumerate()
            .map(|(i, c)| (vec![(s * (k - i - 1)) as u32, (s * i) as u32], c.clone())),
    )
    .expect("exponents sum to the degree")
}

/// Merge an outer filter `v` with an inner filter `w` applied at stride
/// `inner_stride`: for every outer stride `s`,
/// `v ⋆_s (w ⋆_t x) = q ⋆_{s t} x` with `π_1(q) = π_t(v) π_1(w)`.
pub fn compose_filters<T: Coeff>(v: &Filter<T>, inner_stride: usize, w: &Filter<T>) -> Filter<T> {
    let t = inner_stride;
    let len = t * (v.len() - 1) + w.len();
    let mut q = vec![T::zero(); len];
    for (m, vm) in v.0.iter().enumerate() {
        for (j, wj) in w.0.iter().enumerate() {
            q[t * m + j] = q[t * m + j].clone() + vm.clone() * wj.clone();
        }
    }
    Filter(q)
}

/// Singular values of a dense matrix, sorted descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Number of singular values above `rtol · σ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&smax) = sv.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&x| x > rtol * smax).count()
}

pub fn toeplitz_rank(w: &Filter, s: usize, d_out: usize) -> Result<usize> {
    if !w.is_nonzero() {
        return Err(Error::ZeroFilter { layer: 0 });
    }
    Ok(numeric_rank(&toeplitz(w, s, d_out).matrix, RANK_RTOL))
}
