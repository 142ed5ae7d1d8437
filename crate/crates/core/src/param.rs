//! The parametrization `w ↦ φ_w`, its exact expansion, the layerwise
//! Veronese lift and the factorization through the Segre–Veronese embedding.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conv::{convolve, Architecture, Filter};
use crate::error::{Error, Result};
use crate::poly::{binomial, enumerate_exponents, multinomial, rational_from_f64, Coeff, HomoPoly, MonomialBasis};

/// Upper bound on the number of entries of a materialized dense matrix.
pub const MAX_DENSE_ENTRIES: usize = 1 << 21;

/// One filter per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTuple<T = f64> {
    pub filters: Vec<Filter<T>>,
}

impl<T: Coeff> WeightTuple<T> {
    pub fn new(arch: &Architecture, filters: Vec<Vec<T>>) -> Result<Self> {
        if filters.len() != arch.layers() {
            return Err(Error::LengthMismatch {
                expected: arch.layers(),
                got: filters.len(),
            });
        }
        for (f, &k) in filters.iter().zip(&arch.k) {
            if f.len() != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    got: f.len(),
                });
            }
        }
        Ok(WeightTuple {
            filters: filters.into_iter().map(Filter).collect(),
        })
    }

    /// Split a flat parameter vector (layer 0 first).
    pub fn from_flat(arch: &Architecture, flat: &[T]) -> Result<Self> {
        if flat.len() != arch.num_params() {
            return Err(Error::LengthMismatch {
                expected: arch.num_params(),
                got: flat.len(),
            });
        }
        let mut filters = Vec::with_capacity(arch.layers());
        let mut at = 0;
        for &k in &arch.k {
            filters.push(Filter(flat[at..at + k].to_vec()));
            at += k;
        }
        Ok(WeightTuple { filters })
    }

    pub fn flat(&self) -> Vec<T> {
        self.filters.iter().flat_map(|f| f.0.iter().cloned()).collect()
    }

    pub fn layers(&self) -> usize {
        self.filters.len()
    }

    pub fn all_nonzero(&self) -> bool {
        self.filters.iter().all(|f| f.is_nonzero())
    }

    /// Index of the first zero filter, if any.
    pub fn first_zero_filter(&self) -> Option<usize> {
        self.filters.iter().position(|f| !f.is_nonzero())
    }

    pub(crate) fn check(&self, arch: &Architecture) -> Result<()> {
        if self.filters.len() != arch.layers() {
            return Err(Error::LengthMismatch {
                expected: arch.layers(),
                got: self.filters.len(),
            });
        }
        for (f, &k) in self.filters.iter().zip(&arch.k) {
            if f.len() != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    got: f.len(),
                });
            }
        }
        Ok(())
    }
}

impl WeightTuple<f64> {
    /// Filters with i.i.d. standard normal entries.
    pub fn random<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        WeightTuple {
            filters: arch
                .k
                .iter()
                .map(|&k| Filter((0..k).map(|_| rng.sample(StandardNormal)).collect()))
                .collect(),
        }
    }

    pub fn to_rational(&self) -> WeightTuple<num_rational::BigRational> {
        WeightTuple {
            filters: self
                .filters
                .iter()
                .map(|f| Filter(f.0.iter().map(|&v| rational_from_f64(v)).collect()))
                .collect(),
        }
    }
}

/// Evaluate `φ_w(x) = w_{L-1} ⋆ σ_r(⋯ σ_r(w_0 ⋆ x))`.
pub fn forward<T: Coeff>(arch: &Architecture, w: &WeightTuple<T>, x: &[T]) -> Result<Vec<T>> {
    w.check(arch)?;
    if x.len() != arch.d0() {
        return Err(Error::LengthMismatch {
            expected: arch.d0(),
            got: x.len(),
        });
    }
    let mut h = x.to_vec();
    for (i, (f, &s)) in w.filters.iter().zip(&arch.s).enumerate() {
        if i > 0 {
            h = h.into_iter().map(|v| pow(&v, arch.r)).collect();
        }
        h = convolve(f, s, &h)?;
    }
    Ok(h)
}

fn pow<T: Coeff>(v: &T, r: u32) -> T {
    (0..r).fold(T::one(), |acc, _| acc * v.clone())
}

/// The output polynomials of a network: `d_L` forms of degree `r^{L-1}` in `d_0` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkPolynomials<T> {
    pub polys: Vec<HomoPoly<T>>,
    pub nvars: usize,
    pub degree: u32,
    /// Input shift between consecutive outputs.
    pub shift: usize,
}

impl<T: Coeff> NetworkPolynomials<T> {
    pub fn basis(&self) -> MonomialBasis {
        MonomialBasis::new(self.nvars, self.degree)
    }

    /// Output-major stacking of the monomial coordinates of every output.
    pub fn sym_coords(&self) -> Vec<T> {
        let basis = self.basis();
        self.sym_coords_in(&basis)
    }

    pub fn sym_coords_in(&self, basis: &MonomialBasis) -> Vec<T> {
        self.polys.iter().flat_map(|p| p.coords_in(basis)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.polys.iter().all(|p| p.is_zero())
    }

    pub fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        self.polys.iter().map(|p| p.evaluate(x)).collect()
    }

    /// Whether output `i` equals output 0 with inputs shifted by `i · Π s_j`.
    pub fn is_equivariant(&self) -> bool {
        let Some(first) = self.polys.first() else {
            return true;
        };
        self.polys.iter().enumerate().all(|(i, p)| {
            let off = i * self.shift;
            if first
                .terms()
                .any(|(e, _)| e.iter().enumerate().any(|(v, &ev)| ev > 0 && v + off >= self.nvars))
            {
                return false;
            }
            first.relabel(self.nvars, |v| v + off) == *p
        })
    }
}

/// Push symbolic inputs through the network. Filter entries are given as
/// polynomials, which lets the same routine expand numerically weighted
/// networks (constant entries) and jointly in weights and inputs.
fn expand_network<T: Coeff>(arch: &Architecture, filters: &[Vec<HomoPoly<T>>], inputs: Vec<HomoPoly<T>>) -> Vec<HomoPoly<T>> {
    let mut h = inputs;
    for (i, (f, &s)) in filters.iter().zip(&arch.s).enumerate() {
        if i > 0 {
            h = h.iter().map(|p| p.pow(arch.r)).collect();
        }
        let d_out = (h.len() - f.len()) / s + 1;
        h = (0..d_out)
            .map(|o| {
                let mut acc = HomoPoly::zero(h[0].nvars(), 0);
                for (j, wj) in f.iter().enumerate() {
                    let term = wj.mul(&h[s * o + j]).expect("same ring");
                    acc.add_scaled(&term, &T::one()).expect("homogeneous layer");
                }
                acc
            })
            .collect();
    }
    h
}

/// Exact expansion of `φ_w` as polynomials in the input variables.
pub fn symbolic_network<T: Coeff>(arch: &Architecture, w: &WeightTuple<T>) -> Result<NetworkPolynomials<T>> {
    w.check(arch)?;
    let n = arch.d0();
    let filters: Vec<Vec<HomoPoly<T>>> = w
        .filters
        .iter()
        .map(|f| f.0.iter().map(|c| HomoPoly::constant(n, c.clone())).collect())
        .collect();
    let inputs = (0..n).map(|i| HomoPoly::variable(n, i)).collect();
    let degree = arch.output_degree();
    let polys = expand_network(arch, &filters, inputs)
        .into_iter()
        .map(|p| if p.is_zero() { HomoPoly::zero(n, degree) } else { p })
        .collect();
    Ok(NetworkPolynomials {
        polys,
        nvars: n,
        degree,
        shift: arch.total_stride(),
    })
}

/// `σ_r(w ⋆_s x)` rewritten as a plain convolution `w̃ ⋆_{s̃} x̃`.
#[derive(Clone, Debug, PartialEq)]
pub struct VeroneseLift<T> {
    /// `w̃[a] = (r choose a) Π_j w[j]^{a_j}`, indexed by multi-indices `|a| = r`.
    pub filter: Filter<T>,
    pub stride: usize,
    /// Multi-indices in graded-lex order; entry `i` labels `filter[i]` and
    /// position `i` inside every block of the lifted input.
    pub multi_indices: Vec<Vec<u32>>,
    pub source_k: usize,
    pub source_s: usize,
}

impl<T: Coeff> VeroneseLift<T> {
    /// `k̃ = C(r + k - 1, r)`.
    pub fn lifted_k(&self) -> usize {
        self.multi_indices.len()
    }

    /// Lifted input: one block of `k̃` monomials `Π_j x[p + j]^{a_j}` for
    /// every window start `p = 0, …, len(x) - k`. Blocks at non-multiples of
    /// the original stride are never read by the stride-`s̃` convolution.
    pub fn lift_input(&self, x: &[T]) -> Result<Vec<T>> {
        let k = self.source_k;
        if x.len() < k || !(x.len() - k).is_multiple_of(self.source_s) {
            return Err(Error::LengthMismatch {
                expected: k,
                got: x.len(),
            });
        }
        let mut out = Vec::with_capacity((x.len() - k + 1) * self.lifted_k());
        for p in 0..=(x.len() - k) {
            for a in &self.multi_indices {
                let m = a.iter().enumerate().fold(T::one(), |acc, (j, &aj)| acc * pow(&x[p + j], aj));
                out.push(m);
            }
        }
        Ok(out)
    }
}

pub fn veronese_lift<T: Coeff>(w: &Filter<T>, s: usize, r: u32) -> VeroneseLift<T> {
    assert!(r >= 1, "activation exponent must be positive");
    let k = w.len();
    let multi_indices = enumerate_exponents(k, r);
    let entries = multi_indices
        .iter()
        .map(|a| {
            let c = T::from_i64(multinomial(a) as i64);
            a.iter().enumerate().fold(c, |acc, (j, &aj)| acc * pow(&w.0[j], aj))
        })
        .collect();
    let kt = binomial((r as u64) + k as u64 - 1, r as u64) as usize;
    debug_assert_eq!(kt, multi_indices.len());
    VeroneseLift {
        filter: Filter(entries),
        stride: s * kt,
        multi_indices,
        source_k: k,
        source_s: s,
    }
}

/// Monomial bases of the Segre–Veronese factors: degree `m_i` in `k_i` variables.
#[derive(Clone, Debug)]
pub struct SegreVeronese {
    pub bases: Vec<MonomialBasis>,
    pub dims: Vec<usize>,
    pub degrees: Vec<u32>,
}

/// Coordinates of `ν_{m,p}(w)` flattened with factor 0 varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct SegreVeroneseCoords<T> {
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl SegreVeronese {
    pub fn new(arch: &Architecture) -> Self {
        let degrees = arch.segre_degrees();
        let bases: Vec<MonomialBasis> = arch.k.iter().zip(&degrees).map(|(&k, &m)| MonomialBasis::new(k, m)).collect();
        let dims = bases.iter().map(|b| b.len()).collect();
        SegreVeronese { bases, dims, degrees }
    }

    /// Total number of coordinates `Π C(k_i - 1 + m_i, m_i)`.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Split a flat index into per-factor monomial indices.
    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (i, &d) in self.dims.iter().enumerate().rev() {
            out[i] = idx % d;
            idx /= d;
        }
        out
    }

    pub fn flatten(&self, parts: &[usize]) -> usize {
        parts.iter().zip(&self.dims).fold(0, |acc, (&p, &d)| acc * d + p)
    }

    pub fn embed<T: Coeff>(&self, w: &WeightTuple<T>) -> SegreVeroneseCoords<T> {
        let factors: Vec<Vec<T>> = self
            .bases
            .iter()
            .zip(&w.filters)
            .map(|(b, f)| crate::poly::veronese_in(b, &f.0))
            .collect();
        let mut data = vec![T::one()];
        for fac in &factors {
            let mut next = Vec::with_capacity(data.len() * fac.len());
            for a in &data {
                for b in fac {
                    next.push(a.clone() * b.clone());
                }
            }
            data = next;
        }
        SegreVeroneseCoords {
            dims: self.dims.clone(),
            data,
        }
    }

    /// Per-factor monomial values, first and second derivatives at `w`.
    fn factor_jets(&self, w: &WeightTuple<f64>) -> Vec<FactorJet> {
        self.bases
            .iter()
            .zip(&w.filters)
            .map(|(b, f)| FactorJet::new(b, &f.0))
            .collect()
    }

    /// `dν` at `w`: a `len() × |k|` matrix of exact product-rule derivatives.
    pub fn differential(&self, w: &WeightTuple<f64>) -> DMatrix<f64> {
        let jets = self.factor_jets(w);
        let offsets: Vec<usize> = prefix_offsets(&self.dims_k());
        let nparams: usize = self.dims_k().iter().sum();
        let mut d = DMatrix::zeros(self.len(), nparams);
        for c in 0..self.len() {
            let parts = self.unflatten(c);
            for (i, jet) in jets.iter().enumerate() {
                let others: f64 = jets
                    .iter()
                    .enumerate()
                    .filter(|(l, _)| *l != i)
                    .map(|(l, jl)| jl.value[parts[l]])
                    .product();
                for j in 0..jet.k {
                    d[(c, offsets[i] + j)] = jet.grad[parts[i]][j] * others;
                }
            }
        }
        d
    }

    /// `Σ_c e_c ∇²ν_c(w)`, a symmetric `|k| × |k|` matrix.
    pub fn contracted_hessian(&self, w: &WeightTuple<f64>, e: &[f64]) -> DMatrix<f64> {
        let jets = self.factor_jets(w);
        let ks = self.dims_k();
        let offsets = prefix_offsets(&ks);
        let nparams: usize = ks.iter().sum();
        let l = jets.len();
        let mut h = DMatrix::zeros(nparams, nparams);
        for (c, &ec) in e.iter().enumerate() {
            if ec == 0.0 {
                continue;
            }
            let parts = self.unflatten(c);
            for i in 0..l {
                for m in i..l {
                    let rest: f64 = (0..l)
                        .filter(|&q| q != i && q != m)
                        .map(|q| jets[q].value[parts[q]])
                        .product();
                    for a in 0..ks[i] {
                        for b in 0..ks[m] {
                            let v = if i == m {
                                jets[i].hess[parts[i]][a * ks[i] + b] * rest
                            } else {
                                jets[i].grad[parts[i]][a] * jets[m].grad[parts[m]][b] * rest
                            };
                            let v = ec * v;
                            h[(offsets[i] + a, offsets[m] + b)] += v;
                            if i != m {
                                h[(offsets[m] + b, offsets[i] + a)] += v;
                            }
                        }
                    }
                }
            }
        }
        h
    }

    fn dims_k(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.nvars()).collect()
    }
}

fn prefix_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    for &s in sizes {
        out.push(acc);
        acc += s;
    }
    out
}

/// Values, gradients and Hessians of every basis monomial of one factor.
struct FactorJet {
    k: usize,
    value: Vec<f64>,
    grad: Vec<Vec<f64>>,
    hess: Vec<Vec<f64>>,
}

impl FactorJet {
    fn new(basis: &MonomialBasis, w: &[f64]) -> Self {
        let k = w.len();
        let mono = |e: &[u32]| -> f64 { e.iter().zip(w).map(|(&ei, &wi)| wi.powi(ei as i32)).product() };
        let mut value = Vec::with_capacity(basis.len());
        let mut grad = Vec::with_capacity(basis.len());
        let mut hess = Vec::with_capacity(basis.len());
        for e in basis.iter() {
            value.push(mono(e));
            let mut g = vec![0.0; k];
            let mut hm = vec![0.0; k * k];
            for a in 0..k {
                if e[a] == 0 {
                    continue;
                }
                let mut ea = e.to_vec();
                ea[a] -= 1;
                g[a] = e[a] as f64 * mono(&ea);
                for b in 0..k {
                    if ea[b] == 0 {
                        continue;
                    }
                    let mut eab = ea.clone();
                    eab[b] -= 1;
                    hm[a * k + b] = e[a] as f64 * ea[b] as f64 * mono(&eab);
                }
            }
            grad.push(g);
            hess.push(hm);
        }
        FactorJet { k, value, grad, hess }
    }
}

pub fn segre_veronese_embed<T: Coeff>(w: &WeightTuple<T>, arch: &Architecture) -> SegreVeroneseCoords<T> {
    SegreVeronese::new(arch).embed(w)
}

/// Dense matrix of the linear map `Λ` from Segre–Veronese coordinates to the
/// output-major monomial coordinates of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<T>,
}

impl<T: Coeff> FactorizationMatrix<T> {
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.cols + col]
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .fold(
                        T::zero(),
                        |acc, (a, b)| if a.is_zero() { acc } else { acc + a.clone() * b.clone() },
                    )
            })
            .collect()
    }

    pub fn nonzero_rows(&self) -> usize {
        (0..self.rows)
            .filter(|&i| self.data[i * self.cols..(i + 1) * self.cols].iter().any(|v| !v.is_zero()))
            .count()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_f64())
    }
}

/// Build `Λ` by expanding the network jointly in inputs and filter entries and
/// reading each (output, input monomial) coefficient as a linear functional on
/// Segre–Veronese monomials.
pub fn factorization_matrix<T: Coeff>(arch: &Architecture) -> Result<FactorizationMatrix<T>> {
    let sv = SegreVeronese::new(arch);
    let xbasis = MonomialBasis::new(arch.d0(), arch.output_degree());
    let rows = arch.d_out() * xbasis.len();
    let cols = sv.len();
    let entries = rows.saturating_mul(cols);
    if entries > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge {
            entries,
            limit: MAX_DENSE_ENTRIES,
        });
    }
    let n = arch.d0();
    let nvars = n + arch.num_params();
    let filters: Vec<Vec<HomoPoly<T>>> = (0..arch.layers())
        .map(|i| {
            let off = n + arch.param_offset(i);
            (0..arch.k[i]).map(|j| HomoPoly::variable(nvars, off + j)).collect()
        })
        .collect();
    let inputs = (0..n).map(|i| HomoPoly::variable(nvars, i)).collect();
    let outputs = expand_network(arch, &filters, inputs);

    let mut data = vec![T::zero(); entries];
    for (o, poly) in outputs.iter().enumerate() {
        for (e, c) in poly.terms() {
            let row = o * xbasis.len() + xbasis.index_of(&e[..n]).expect("input monomial of output degree");
            let parts: Vec<usize> = (0..arch.layers())
                .map(|i| {
                    let off = n + arch.param_offset(i);
                    sv.bases[i]
                        .index_of(&e[off..off + arch.k[i]])
                        .expect("filter monomial of Segre–Veronese degree")
                })
                .collect();
            let col = sv.flatten(&parts);
            let slot = &mut data[row * cols + col];
            *slot = slot.clone() + c.clone();
        }
    }
    Ok(FactorizationMatrix { rows, cols, data })
}
