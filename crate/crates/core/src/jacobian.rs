//! Differential of the parametrization and its kernel.
//!
//! The Jacobian has one row per output-major monomial coordinate of `φ_w` and
//! one column per filter entry (layer 0 first). It is built by the layerwise
//! Leibniz recursion and, independently, as `Λ · dν(w)`.

use nalgebra::DMatrix;

use crate::conv::{singular_values, Architecture};
use crate::error::{Error, Result};
use crate::param::{symbolic_network, FactorizationMatrix, SegreVeronese, WeightTuple};
use crate::poly::{HomoPoly, MonomialBasis};

/// Relative threshold below which a singular value counts as zero.
pub const KERNEL_RTOL: f64 = 1e-7;
/// Band `[lo, hi]·σ_max` whose occupation flags a degenerate spectrum.
pub const DEGENERATE_BAND: (f64, f64) = (1e-9, 1e-5);

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: DMatrix<f64>,
}

impl JacobianMatrix {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let out = &self.matrix * nalgebra::DVector::from_column_slice(v);
        out.iter().copied().collect()
    }
}

/// Jacobian via `ẇ_{L-1} ⋆ σ_r(φ') + r w_{L-1} ⋆ (σ_{r-1}(φ') ⊙ J'(ẇ'))`.
pub fn jacobian(arch: &Architecture, w: &WeightTuple<f64>) -> Result<JacobianMatrix> {
    w.check(arch)?;
    let n = arch.d0();
    let nparams = arch.num_params();
    let r = arch.r;
    let zero = |deg: u32| HomoPoly::<f64>::zero(n, deg);

    let mut vals: Vec<HomoPoly<f64>> = (0..n).map(|i| HomoPoly::variable(n, i)).collect();
    let mut ders: Vec<Vec<HomoPoly<f64>>> = vec![vec![zero(1); nparams]; n];

    for (layer, (f, &s)) in w.filters.iter().zip(&arch.s).enumerate() {
        if layer > 0 {
            let mut new_vals = Vec::with_capacity(vals.len());
            let mut new_ders = Vec::with_capacity(vals.len());
            for (v, dv) in vals.iter().zip(&ders) {
                let lower = v.pow(r - 1).scale(&(r as f64));
                new_vals.push(v.pow(r));
                new_ders.push(
                    dv.iter()
                        .map(|d| {
                            if d.is_zero() {
                                d.clone()
                            } else {
                                lower.mul(d).expect("same ring")
                            }
                        })
                        .collect(),
                );
            }
            vals = new_vals;
            ders = new_ders;
        }
        let d_out = (vals.len() - f.len()) / s + 1;
        let off = arch.param_offset(layer);
        let mut next_vals = Vec::with_capacity(d_out);
        let mut next_ders = Vec::with_capacity(d_out);
        for o in 0..d_out {
            let mut q = zero(0);
            let mut dq: Vec<HomoPoly<f64>> = vec![zero(0); nparams];
            for (j, &wj) in f.0.iter().enumerate() {
                let idx = s * o + j;
                q.add_scaled(&vals[idx], &wj)?;
                for (p, d) in ders[idx].iter().enumerate() {
                    dq[p].add_scaled(d, &wj)?;
                }
                dq[off + j].add_scaled(&vals[idx], &1.0)?;
            }
            next_vals.push(q);
            next_ders.push(dq);
        }
        vals = next_vals;
        ders = next_ders;
    }

    let basis = MonomialBasis::new(n, arch.output_degree());
    let nb = basis.len();
    let mut m = DMatrix::zeros(arch.d_out() * nb, nparams);
    for (o, dq) in ders.iter().enumerate() {
        for (p, d) in dq.iter().enumerate() {
            for (i, c) in d.coords_in(&basis).into_iter().enumerate() {
                m[(o * nb + i, p)] = c;
            }
        }
    }
    Ok(JacobianMatrix { matrix: m })
}

/// Jacobian as `Λ · dν(w)` with the exact differential of the Segre–Veronese map.
pub fn jacobian_factored(arch: &Architecture, lambda: &DMatrix<f64>, w: &WeightTuple<f64>) -> JacobianMatrix {
    let sv = SegreVeronese::new(arch);
    JacobianMatrix {
        matrix: lambda * sv.differential(w),
    }
}

/// Relative Frobenius distance between the two Jacobian constructions.
pub fn jacobian_consistency(arch: &Architecture, lambda: &FactorizationMatrix<f64>, w: &WeightTuple<f64>) -> Result<f64> {
    let a = jacobian(arch, w)?.matrix;
    let b = jacobian_factored(arch, &lambda.to_dmatrix(), w).matrix;
    let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
    Ok((a - b).norm() / scale)
}

/// The `L - 1` vectors `(0, …, w_i, -r w_{i+1}, …, 0)` spanning the kernel.
pub fn claimed_kernel_basis(arch: &Architecture, w: &WeightTuple<f64>) -> Result<Vec<Vec<f64>>> {
    if let Some(layer) = w.first_zero_filter() {
        return Err(Error::ZeroFilter { layer });
    }
    let r = arch.r as f64;
    let nparams = arch.num_params();
    Ok((0..arch.layers().saturating_sub(1))
        .map(|i| {
            let mut v = vec![0.0; nparams];
            let a = arch.param_offset(i);
            let b = arch.param_offset(i + 1);
            for (j, &x) in w.filters[i].0.iter().enumerate() {
                v[a + j] = x;
            }
            for (j, &x) in w.filters[i + 1].0.iter().enumerate() {
                v[b + j] = -r * x;
            }
            v
        })
        .collect())
}

/// `‖J_w(λ_0 w_0, …) − (Σ_i r^{L-1-i} λ_i) φ_w‖`, divided by `max(1, ‖φ_w‖)`.
pub fn scaling_identity_check(arch: &Architecture, w: &WeightTuple<f64>, lambda: &[f64]) -> Result<f64> {
    if lambda.len() != arch.layers() {
        return Err(Error::LengthMismatch {
            expected: arch.layers(),
            got: lambda.len(),
        });
    }
    let j = jacobian(arch, w)?;
    scaling_residual(arch, &j, w, lambda)
}

pub(crate) fn scaling_residual(arch: &Architecture, j: &JacobianMatrix, w: &WeightTuple<f64>, lambda: &[f64]) -> Result<f64> {
    let dir: Vec<f64> = w
        .filters
        .iter()
        .zip(lambda)
        .flat_map(|(f, &l)| f.0.iter().map(move |&x| l * x))
        .collect();
    let image = j.apply(&dir);
    let l = arch.layers() as u32;
    let factor: f64 = lambda
        .iter()
        .enumerate()
        .map(|(i, &li)| (arch.r as f64).powi((l - 1 - i as u32) as i32) * li)
        .sum();
    let phi = symbolic_network(arch, w)?.sym_coords();
    let norm_phi = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let res = image
        .iter()
        .zip(&phi)
        .map(|(a, b)| (a - factor * b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(res / norm_phi.max(1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelReport {
    pub dim: usize,
    /// Some singular value falls in the ambiguous band of [`DEGENERATE_BAND`].
    pub degenerate_spectrum: bool,
    pub singular_values: Vec<f64>,
}

/// Kernel dimension: columns minus singular values at or above `tol · σ_max`.
pub fn kernel_dim(j: &JacobianMatrix, tol: f64) -> KernelReport {
    let sv = singular_values(&j.matrix);
    let cols = j.matrix.ncols();
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return KernelReport {
            dim: cols,
            degenerate_spectrum: false,
            singular_values: sv,
        };
    }
    let rank = sv.iter().filter(|&&x| x >= tol * smax).count();
    let (lo, hi) = DEGENERATE_BAND;
    let degenerate_spectrum = sv.iter().any(|&x| x >= lo * smax && x <= hi * smax);
    KernelReport {
        dim: cols - rank,
        degenerate_spectrum,
        singular_values: sv,
    }
}

/// Orthonormal basis of the numeric kernel (right singular vectors below `tol · σ_max`).
pub fn numeric_kernel(j: &JacobianMatrix, tol: f64) -> DMatrix<f64> {
    let cols = j.matrix.ncols();
    // pad to square so that the SVD returns a full set of right singular vectors
    let rows = j.matrix.nrows().max(cols);
    let mut a = DMatrix::zeros(rows, cols);
    a.view_mut((0, 0), (j.matrix.nrows(), cols)).copy_from(&j.matrix);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let idx: Vec<usize> = (0..cols).filter(|&i| svd.singular_values[i] < tol * smax).collect();
    DMatrix::from_fn(cols, idx.len(), |r, c| vt[(idx[c], r)])
}

/// Largest sine of the principal angles between span(`vectors`) and the numeric kernel.
/// Returns `f64::INFINITY` when the dimensions differ.
pub fn kernel_span_defect(j: &JacobianMatrix, vectors: &[Vec<f64>], tol: f64) -> f64 {
    let kern = numeric_kernel(j, tol);
    if kern.ncols() != vectors.len() {
        return f64::INFINITY;
    }
    if vectors.is_empty() {
        return 0.0;
    }
    let n = j.matrix.ncols();
    let b = DMatrix::from_fn(n, vectors.len(), |r, c| vectors[c][r]);
    let q = b.qr().q();
    let resid = &q - &kern * (kern.transpose() * &q);
    singular_values(&resid).first().copied().unwrap_or(0.0)
}
