//! Square loss on a finite dataset, its rewriting as a weighted distance to the
//! least-squares anchor, and the subspace of convolution-structured maps.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conv::{numeric_rank, Architecture, RANK_RTOL};
use crate::error::{Error, Result};
use crate::param::{forward, symbolic_network, WeightTuple};
use crate::poly::{veronese_in, MonomialBasis};

/// Condition number above which [`project_anchor`] refuses to solve.
pub const MAX_PROJECTION_CONDITION: f64 = 1e12;
/// Extra samples beyond the monomial count in generated datasets.
pub const DATASET_MARGIN: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetMode {
    /// Inputs and targets i.i.d. standard normal.
    Generic,
    /// Targets from a random network plus Gaussian noise.
    Teacher,
}

/// Monomial count `N` of the ambient space of each output.
pub fn monomial_count(arch: &Architecture) -> usize {
    MonomialBasis::new(arch.d0(), arch.output_degree()).len()
}

/// `N + DATASET_MARGIN`.
pub fn default_size(arch: &Architecture) -> usize {
    monomial_count(arch) + DATASET_MARGIN
}

fn normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn generic<R: Rng + ?Sized>(arch: &Architecture, n: usize, rng: &mut R) -> Self {
        let samples = (0..n)
            .map(|_| Sample {
                x: normal_vec(arch.d0(), rng),
                y: normal_vec(arch.d_out(), rng),
            })
            .collect();
        Dataset { samples }
    }

    /// Returns the dataset together with the teacher weights.
    pub fn teacher<R: Rng + ?Sized>(arch: &Architecture, n: usize, noise: f64, rng: &mut R) -> (Self, WeightTuple<f64>) {
        let w = WeightTuple::random(arch, rng);
        let samples = (0..n)
            .map(|_| {
                let x = normal_vec(arch.d0(), rng);
                let mut y = forward(arch, &w, &x).expect("shapes follow the architecture");
                for v in &mut y {
                    *v += noise * rng.sample::<f64, _>(StandardNormal);
                }
                Sample { x, y }
            })
            .collect();
        (Dataset { samples }, w)
    }

    pub fn check(&self, arch: &Architecture) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.x.len() != arch.d0() || s.y.len() != arch.d_out() {
                return Err(Error::ShapeMismatch(format!(
                    "sample {i} has |x|={}, |y|={}; architecture needs {} and {}",
                    s.x.len(),
                    s.y.len(),
                    arch.d0(),
                    arch.d_out()
                )));
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut samples = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s: Sample = serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            samples.push(s);
        }
        Ok(Dataset { samples })
    }
}

/// `Σ ‖φ_w(x) − y‖²`.
pub fn loss(arch: &Architecture, w: &WeightTuple<f64>, data: &Dataset) -> Result<f64> {
    data.check(arch)?;
    let mut total = 0.0;
    for s in &data.samples {
        let out = forward(arch, w, &s.x)?;
        total += out.iter().zip(&s.y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total)
}

/// Veronese design matrices of a dataset.
#[derive(Clone, Debug)]
pub struct DesignSystem {
    pub basis: MonomialBasis,
    /// `N × |D|`, column `j` is the monomial vector of `x_j`.
    pub x: DMatrix<f64>,
    /// `d_L × |D|`.
    pub y: DMatrix<f64>,
    /// `X Xᵀ`.
    pub gram: DMatrix<f64>,
    pub rank: usize,
    pub full_rank: bool,
    anchor: Option<DMatrix<f64>>,
}

impl DesignSystem {
    /// Unconstrained least-squares map `Y Xᵀ G⁻¹` (`d_L × N`).
    pub fn anchor(&self) -> Result<&DMatrix<f64>> {
        self.anchor.as_ref().ok_or(Error::SingularGram)
    }

    /// `tr(A G Bᵀ)`.
    pub fn inner(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a * &self.gram).component_mul(b).sum()
    }

    /// Least-squares residual `‖V X − Y‖²_F`.
    pub fn anchor_residual(&self) -> Result<f64> {
        let v = self.anchor()?;
        Ok((v * &self.x - &self.y).norm_squared())
    }
}

pub fn design_system(data: &Dataset, arch: &Architecture) -> Result<DesignSystem> {
    if data.is_empty() {
        return Err(Error::ShapeMismatch("dataset is empty".into()));
    }
    data.check(arch)?;
    let basis = MonomialBasis::new(arch.d0(), arch.output_degree());
    let n = basis.len();
    let cols = data.len();
    let mut x = DMatrix::zeros(n, cols);
    let mut y = DMatrix::zeros(arch.d_out(), cols);
    for (j, s) in data.samples.iter().enumerate() {
        for (i, v) in veronese_in(&basis, &s.x).into_iter().enumerate() {
            x[(i, j)] = v;
        }
        for (i, &v) in s.y.iter().enumerate() {
            y[(i, j)] = v;
        }
    }
    let gram = &x * x.transpose();
    let rank = numeric_rank(&x, RANK_RTOL);
    let full_rank = rank == n;
    let anchor = if full_rank {
        gram.clone().cholesky().map(|ch| {
            // V G = Y Xᵀ, G symmetric
            let rhs = (&y * x.transpose()).transpose();
            ch.solve(&rhs).transpose()
        })
    } else {
        None
    };
    Ok(DesignSystem {
        basis,
        x,
        y,
        gram,
        rank,
        full_rank,
        anchor,
    })
}

/// Coefficients of `φ_w` arranged as a `d_L × N` matrix.
pub fn coefficient_matrix(arch: &Architecture, w: &WeightTuple<f64>) -> Result<DMatrix<f64>> {
    let net = symbolic_network(arch, w)?;
    let n = net.basis().len();
    Ok(DMatrix::from_row_slice(arch.d_out(), n, &net.sym_coords()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossDecomposition {
    /// `tr((M − V) G (M − V)ᵀ)`.
    pub dist_sq: f64,
    /// `tr(Y Yᵀ) − tr(V G Vᵀ)`.
    pub constant: f64,
}

pub fn loss_as_distance(arch: &Architecture, w: &WeightTuple<f64>, ds: &DesignSystem) -> Result<LossDecomposition> {
    let v = ds.anchor()?;
    let m = coefficient_matrix(arch, w)?;
    if m.shape() != v.shape() {
        return Err(Error::ShapeMismatch(format!(
            "network map {:?} vs anchor {:?}",
            m.shape(),
            v.shape()
        )));
    }
    let diff = m - v;
    Ok(LossDecomposition {
        dist_sq: ds.inner(&diff, &diff),
        constant: ds.y.norm_squared() - ds.inner(v, v),
    })
}

/// Maps whose output `i` is output 0 with every input index shifted by `i·S`,
/// output 0 depending only on the receptive field `x[0..W]`.
#[derive(Clone, Debug)]
pub struct ConvSubspace {
    pub receptive_field: usize,
    pub shift: usize,
    pub outputs: usize,
    pub row_basis: MonomialBasis,
    pub ambient: MonomialBasis,
    /// `slots[o][μ]`: ambient index of row-basis monomial `μ` shifted to output `o`.
    slots: Vec<Vec<usize>>,
}

impl ConvSubspace {
    pub fn dim(&self) -> usize {
        self.row_basis.len()
    }

    /// Output-major coordinates (`d_L · N`) of the map with row-0 coefficients `c`.
    pub fn embed(&self, c: &[f64]) -> Vec<f64> {
        let n = self.ambient.len();
        let mut out = vec![0.0; self.outputs * n];
        for (o, slots) in self.slots.iter().enumerate() {
            for (&slot, &v) in slots.iter().zip(c) {
                out[o * n + slot] = v;
            }
        }
        out
    }

    /// Row-0 coefficients on the receptive-field monomials.
    pub fn coordinates(&self, sym: &[f64]) -> Vec<f64> {
        self.slots[0].iter().map(|&i| sym[i]).collect()
    }

    /// `‖sym − embed(coordinates(sym))‖ / ‖sym‖`.
    pub fn containment_residual(&self, sym: &[f64]) -> f64 {
        let back = self.embed(&self.coordinates(sym));
        let num = sym.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den = sym.iter().map(|a| a * a).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

pub fn conv_subspace(arch: &Architecture) -> ConvSubspace {
    let w = arch.receptive_field();
    let shift = arch.total_stride();
    let deg = arch.output_degree();
    let row_basis = MonomialBasis::new(w, deg);
    let ambient = MonomialBasis::new(arch.d0(), deg);
    let slots = (0..arch.d_out())
        .map(|o| {
            row_basis
                .iter()
                .map(|e| {
                    let mut full = vec![0u32; arch.d0()];
                    full[o * shift..o * shift + w].copy_from_slice(e);
                    ambient.index_of(&full).expect("shifted monomial lies in the ambient basis")
                })
                .collect()
        })
        .collect();
    ConvSubspace {
        receptive_field: w,
        shift,
        outputs: arch.d_out(),
        row_basis,
        ambient,
        slots,
    }
}

#[derive(Clone, Debug)]
pub struct AnchorProjection {
    /// Projected anchor `u_D` (`d_L × N`).
    pub u: DMatrix<f64>,
    pub coords: Vec<f64>,
    pub condition: f64,
    /// Largest `|⟨V − u, E_μ⟩| / (‖V‖ ‖E_μ‖)` over basis maps `E_μ`.
    pub orthogonality_residual: f64,
}

/// Orthogonal projection of the anchor onto `sub` in the metric `⟨A, B⟩ = tr(A G Bᵀ)`.
pub fn project_anchor(ds: &DesignSystem, sub: &ConvSubspace) -> Result<AnchorProjection> {
    let v = ds.anchor()?;
    if v.nrows() != sub.outputs || v.ncols() != sub.ambient.len() {
        return Err(Error::ShapeMismatch(
            "design and subspace come from different architectures".into(),
        ));
    }
    let g = &ds.gram;
    let dim = sub.dim();
    let vg = v * g;
    let mut b = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (o, slots) in sub.slots.iter().enumerate() {
        for (mu, &i) in slots.iter().enumerate() {
            rhs[mu] += vg[(o, i)];
            for (nu, &j) in slots.iter().enumerate() {
                b[(mu, nu)] += g[(i, j)];
            }
        }
    }
    let eig = b.clone().symmetric_eigen().eigenvalues;
    let emax = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let emin = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if emin > 0.0 { emax / emin } else { f64::INFINITY };
    if condition > MAX_PROJECTION_CONDITION {
        return Err(Error::IllConditionedProjection(condition));
    }
    let a = b
        .clone()
        .cholesky()
        .ok_or(Error::IllConditionedProjection(condition))?
        .solve(&rhs);
    let coords: Vec<f64> = a.iter().copied().collect();
    let u = DMatrix::from_row_slice(sub.outputs, sub.ambient.len(), &sub.embed(&coords));
    // ⟨V − u, E_μ⟩ = rhs_μ − (B a)_μ
    let defect = &rhs - &b * &a;
    let vnorm = ds.inner(v, v).sqrt().max(f64::MIN_POSITIVE);
    let orthogonality_residual = (0..dim)
        .map(|mu| defect[mu].abs() / (vnorm * b[(mu, mu)].sqrt()))
        .fold(0.0, f64::max);
    Ok(AnchorProjection {
        u,
        coords,
        condition,
        orthogonality_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> Architecture {
        Architecture::new(3, vec![2, 2], vec![1, 1], 2).unwrap()
    }

    #[test]
    fn teacher_data_has_zero_loss() {
        let a = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (d, w) = Dataset::teacher(&a, 12, 0.0, &mut rng);
        assert!(loss(&a, &w, &d).unwrap() < 1e-20);
    }

    #[test]
    fn single_pair_loss() {
        let a = toy();
        let w = WeightTuple::new(&a, vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let d = Dataset {
            samples: vec![Sample {
                x: vec![1.0, 1.0, 1.0],
                y: vec![3.0],
            }],
        };
        assert_eq!(loss(&a, &w, &d).unwrap(), 25.0);
    }

    #[test]
    fn loss_equals_matrix_form() {
        let a = Architecture::with_output_width(vec![3, 2], vec![1, 2], 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Dataset::generic(&a, default_size(&a), &mut rng);
        let ds = design_system(&d, &a).unwrap();
        let w = WeightTuple::random(&a, &mut rng);
        let m = coefficient_matrix(&a, &w).unwrap();
        let direct = loss(&a, &w, &d).unwrap();
        let matrix = (m * &ds.x - &ds.y).norm_squared();
        assert!((direct - matrix).abs() < 1e-10 * direct.max(1.0));
    }

    #[test]
    fn rank_flags() {
        let a = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let small = design_system(&Dataset::generic(&a, 4, &mut rng), &a).unwrap();
        assert!(!small.full_rank);
        assert_eq!(small.anchor().unwrap_err(), Error::SingularGram);
        let big = design_system(&Dataset::generic(&a, default_size(&a), &mut rng), &a).unwrap();
        assert!(big.full_rank);
        assert_eq!(big.rank, 6);
    }

    #[test]
    fn scalar_input_gram() {
        let a = Architecture::new(1, vec![1, 1], vec![1, 1], 3).unwrap();
        let d = Dataset {
            samples: vec![
                Sample {
                    x: vec![2.0],
                    y: vec![0.0],
                },
                Sample {
                    x: vec![-1.0],
                    y: vec![1.0],
                },
            ],
        };
        let ds = design_system(&d, &a).unwrap();
        assert_eq!(ds.gram.shape(), (1, 1));
        assert_eq!(ds.gram[(0, 0)], 64.0 + 1.0);
    }

    #[test]
    fn decomposition_constant_in_w() {
        let a = Architecture::with_output_width(vec![2, 3], vec![2, 1], 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Dataset::generic(&a, default_size(&a), &mut rng);
        let ds = design_system(&d, &a).unwrap();
        let lsq = ds.anchor_residual().unwrap();
        for _ in 0..10 {
            let w = WeightTuple::random(&a, &mut rng);
            let l = loss(&a, &w, &d).unwrap();
            let dec = loss_as_distance(&a, &w, &ds).unwrap();
            assert!((l - dec.dist_sq - dec.constant).abs() < 1e-8 * l.max(1.0));
            assert!((dec.constant - lsq).abs() < 1e-8 * lsq.max(1.0));
            assert!(dec.constant >= -1e-9);
        }
    }

    #[test]
    fn doubled_targets_quadruple_constant() {
        let a = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Dataset::generic(&a, default_size(&a), &mut rng);
        let mut d2 = d.clone();
        d2.samples.iter_mut().for_each(|s| s.y.iter_mut().for_each(|v| *v *= 2.0));
        let w = WeightTuple::random(&a, &mut rng);
        let c1 = loss_as_distance(&a, &w, &design_system(&d, &a).unwrap()).unwrap().constant;
        let c2 = loss_as_distance(&a, &w, &design_system(&d2, &a).unwrap()).unwrap().constant;
        assert!((c2 - 4.0 * c1).abs() < 1e-8 * c2.abs().max(1.0));
    }

    #[test]
    fn subspace_dimensions_and_containment() {
        let toy_sub = conv_subspace(&toy());
        assert_eq!(toy_sub.receptive_field, 3);
        assert_eq!(toy_sub.dim(), 6);

        let lin = Architecture::with_output_width(vec![3], vec![2], 1, 4).unwrap();
        assert_eq!(conv_subspace(&lin).dim(), 3);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for a in [
            Architecture::with_output_width(vec![3, 2], vec![2, 1], 2, 3).unwrap(),
            Architecture::with_output_width(vec![2, 2, 2], vec![1, 2, 1], 2, 2).unwrap(),
        ] {
            let sub = conv_subspace(&a);
            for _ in 0..20 {
                let w = WeightTuple::random(&a, &mut rng);
                let sym = symbolic_network(&a, &w).unwrap().sym_coords();
                assert!(sub.containment_residual(&sym) < 1e-12);
            }
        }
        // single output: dim Sym(W) < N iff W < d0
        let a = Architecture::with_output_width(vec![2, 2], vec![2, 1], 2, 1).unwrap();
        let sub = conv_subspace(&a);
        assert_eq!(sub.receptive_field, a.d0());
        assert_eq!(sub.dim(), sub.ambient.len());
    }

    #[test]
    fn projection_orthogonality_and_constant_shift() {
        let a = Architecture::with_output_width(vec![2, 2], vec![1, 1], 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = Dataset::generic(&a, default_size(&a), &mut rng);
        let ds = design_system(&d, &a).unwrap();
        let sub = conv_subspace(&a);
        let p = project_anchor(&ds, &sub).unwrap();
        assert!(p.orthogonality_residual < 1e-9);
        let u_sym: Vec<f64> = p.u.transpose().iter().copied().collect();
        assert!(sub.containment_residual(&u_sym) < 1e-12);
        let v = ds.anchor().unwrap();
        let mut offset = None;
        for _ in 0..10 {
            let w = WeightTuple::random(&a, &mut rng);
            let m = coefficient_matrix(&a, &w).unwrap();
            let dv = ds.inner(&(&m - v), &(&m - v));
            let du = ds.inner(&(&m - &p.u), &(&m - &p.u));
            let gap = dv - du;
            let o = *offset.get_or_insert(gap);
            assert!((gap - o).abs() < 1e-8 * dv.max(1.0));
        }
    }

    #[test]
    fn projection_of_contained_anchor_is_identity() {
        let a = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (d, _) = Dataset::teacher(&a, default_size(&a), 0.0, &mut rng);
        let ds = design_system(&d, &a).unwrap();
        let p = project_anchor(&ds, &conv_subspace(&a)).unwrap();
        let v = ds.anchor().unwrap();
        assert!((&p.u - v).norm() < 1e-8 * v.norm());
    }

    #[test]
    fn jsonl_round_trip() {
        let a = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = Dataset::generic(&a, 5, &mut rng);
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("{\"x\":["));
        assert_eq!(Dataset::read_jsonl(&buf[..]).unwrap(), d);
        assert!(matches!(Dataset::read_jsonl(&b"{\"x\":1}\n"[..]), Err(Error::Parse(_))));
    }

    #[test]
    fn shape_mismatch_detected() {
        let a = toy();
        let d = Dataset {
            samples: vec![Sample {
                x: vec![1.0],
                y: vec![1.0],
            }],
        };
        assert!(matches!(design_system(&d, &a), Err(Error::ShapeMismatch(_))));
        let w = WeightTuple::new(&a, vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(loss(&a, &w, &d), Err(Error::ShapeMismatch(_))));
    }
}
