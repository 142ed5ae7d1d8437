//! Multi-start search for critical points of the regression loss in parameter
//! space, deduplicated in function space and compared against the ED degree.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conv::Architecture;
use crate::error::{Error, Result};
use crate::fibers::{canonical_form, is_singular_parameter, Singularity};
use crate::invariants::ged_neuromanifold;
use crate::jacobian::{claimed_kernel_basis, jacobian};
use crate::param::{factorization_matrix, SegreVeronese, WeightTuple};
use crate::regression::{coefficient_matrix, DesignSystem};

/// Filter entries below this fraction of the filter norm count as zero when
/// classifying singular parameters.
pub const ZERO_SNAP_RTOL: f64 = 1e-9;
/// Largest accepted criticality residual.
pub const CRITICALITY_TOL: f64 = 1e-7;
/// A last filter with norm below this is treated as collapsing to `φ = 0`.
const COLLAPSE_NORM: f64 = 1e-8;
/// A last filter with norm above this is treated as diverging.
const DIVERGE_NORM: f64 = 1e8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusConfig {
    pub n_starts: usize,
    pub seed: u64,
    /// Gradient-norm convergence threshold.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative function-space distance below which points are merged.
    pub dedup_tol: f64,
    /// Hessian eigenvalues below this fraction of the largest are ignored.
    pub degeneracy_rtol: f64,
}

impl Default for CensusConfig {
    fn default() -> Self {
        CensusConfig {
            n_starts: 500,
            seed: 0,
            tol: 1e-10,
            max_iter: 500,
            dedup_tol: 1e-6,
            degeneracy_rtol: 1e-6,
        }
    }
}

/// The loss as a function of the Segre–Veronese coordinates:
/// `f = νᵀ Q ν − 2 bᵀ ν + tr(Y Yᵀ)`.
pub struct LossModel {
    arch: Architecture,
    sv: SegreVeronese,
    lambda: DMatrix<f64>,
    q: DMatrix<f64>,
    b: DVector<f64>,
    yy: f64,
}

impl LossModel {
    pub fn new(arch: &Architecture, ds: &DesignSystem) -> Result<Self> {
        let lambda = factorization_matrix::<f64>(arch)?.to_dmatrix();
        let n = ds.basis.len();
        let outputs = arch.d_out();
        if ds.y.nrows() != outputs || ds.gram.nrows() != n || lambda.nrows() != outputs * n {
            return Err(Error::ShapeMismatch("design does not match the architecture".into()));
        }
        let yx = &ds.y * ds.x.transpose();
        let p = lambda.ncols();
        let mut q = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        for o in 0..outputs {
            let block = lambda.rows(o * n, n);
            q += block.transpose() * &ds.gram * block;
            b += block.transpose() * yx.row(o).transpose();
        }
        Ok(LossModel {
            arch: arch.clone(),
            sv: SegreVeronese::new(arch),
            lambda,
            q,
            b,
            yy: ds.y.norm_squared(),
        })
    }

    fn nu(&self, w: &WeightTuple<f64>) -> DVector<f64> {
        DVector::from_vec(self.sv.embed(w).data)
    }

    pub fn value(&self, w: &WeightTuple<f64>) -> f64 {
        let nu = self.nu(w);
        nu.dot(&(&self.q * &nu)) - 2.0 * self.b.dot(&nu) + self.yy
    }

    pub fn gradient(&self, w: &WeightTuple<f64>) -> DVector<f64> {
        let nu = self.nu(w);
        let e = &self.q * &nu - &self.b;
        2.0 * self.sv.differential(w).transpose() * e
    }

    pub fn hessian(&self, w: &WeightTuple<f64>) -> DMatrix<f64> {
        let nu = self.nu(w);
        let e = &self.q * &nu - &self.b;
        let d = self.sv.differential(w);
        let h = 2.0 * d.transpose() * &self.q * &d + 2.0 * self.sv.contracted_hessian(w, e.as_slice());
        (&h + h.transpose()) * 0.5
    }

    /// Output-major monomial coordinates of `φ_w`.
    pub fn phi(&self, w: &WeightTuple<f64>) -> Vec<f64> {
        (&self.lambda * self.nu(w)).iter().copied().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartOutcome {
    Converged,
    /// The last filter collapsed, so `φ → 0`.
    Collapsed,
    Diverged,
    Stalled,
    MaxIterations,
}

#[derive(Clone, Debug, Serialize)]
pub struct RawPoint {
    pub start: usize,
    pub weights: WeightTuple<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub outcome: StartOutcome,
}

/// Orthonormal basis of the complement of the rescaling directions at `w`.
fn transverse_basis(arch: &Architecture, w: &WeightTuple<f64>) -> Result<DMatrix<f64>> {
    let n = arch.num_params();
    let kern = claimed_kernel_basis(arch, w)?;
    if kern.is_empty() {
        return Ok(DMatrix::identity(n, n));
    }
    let k = DMatrix::from_fn(n, kern.len(), |r, c| kern[c][r]);
    let q = k.qr().q();
    let proj = DMatrix::identity(n, n) - &q * q.transpose();
    let eig = proj.symmetric_eigen();
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    Ok(DMatrix::from_fn(n, cols.len(), |r, c| eig.eigenvectors[(r, cols[c])]))
}

fn pinv_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-13 * smax.max(f64::MIN_POSITIVE);
    svd.solve(rhs, eps).unwrap_or_else(|_| DVector::zeros(rhs.len()))
}

fn offset(arch: &Architecture, w: &WeightTuple<f64>, step: &DVector<f64>, alpha: f64) -> WeightTuple<f64> {
    let flat: Vec<f64> = w.flat().iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
    WeightTuple::from_flat(arch, &flat).expect("same length")
}

fn last_norm(w: &WeightTuple<f64>) -> f64 {
    w.filters
        .last()
        .map(|f| f.0.iter().map(|x| x * x).sum::<f64>().sqrt())
        .unwrap_or(0.0)
}

fn canonical_or_collapse(arch: &Architecture, w: &WeightTuple<f64>) -> Option<WeightTuple<f64>> {
    if w.filters[..w.layers() - 1].iter().any(|f| f.0.iter().all(|&x| x == 0.0)) {
        return None;
    }
    canonical_form(arch, w).ok().map(|c| c.weights)
}

/// Projected damped Newton on the gradient system, with gradient-descent fallback.
fn descend(model: &LossModel, start: usize, mut w: WeightTuple<f64>, cfg: &CensusConfig) -> RawPoint {
    let arch = &model.arch;
    let finish = |w: WeightTuple<f64>, iterations, outcome| {
        let g = model.gradient(&w).norm();
        RawPoint {
            start,
            loss: model.value(&w),
            grad_norm: g,
            weights: w,
            iterations,
            outcome,
        }
    };
    for it in 0..cfg.max_iter {
        let ln = last_norm(&w);
        if ln < COLLAPSE_NORM || !w.all_nonzero() {
            return finish(w, it, StartOutcome::Collapsed);
        }
        if ln > DIVERGE_NORM || !ln.is_finite() {
            return finish(w, it, StartOutcome::Diverged);
        }
        let g = model.gradient(&w);
        let gn = g.norm();
        if gn < cfg.tol {
            return finish(w, it, StartOutcome::Converged);
        }
        let Ok(u) = transverse_basis(arch, &w) else {
            return finish(w, it, StartOutcome::Collapsed);
        };
        let h = model.hessian(&w);
        let hu = u.transpose() * &h * &u;
        let step = &u * pinv_solve(&hu, &(-(u.transpose() * &g)));

        let mut next = None;
        let mut alpha = 1.0;
        for _ in 0..30 {
            let cand = offset(arch, &w, &step, alpha);
            if model.gradient(&cand).norm() < gn {
                next = Some(cand);
                break;
            }
            alpha *= 0.5;
        }
        if next.is_none() {
            // Armijo descent on the loss
            let f0 = model.value(&w);
            let mut alpha = 1.0 / (1.0 + h.norm());
            for _ in 0..60 {
                let cand = offset(arch, &w, &(-&g), alpha);
                if model.value(&cand) <= f0 - 1e-4 * alpha * gn * gn {
                    next = Some(cand);
                    break;
                }
                alpha *= 0.5;
            }
        }
        let Some(cand) = next else {
            return finish(w, it, StartOutcome::Stalled);
        };
        match canonical_or_collapse(arch, &cand) {
            Some(c) => w = c,
            None => return finish(cand, it + 1, StartOutcome::Collapsed),
        }
    }
    let outcome = if model.gradient(&w).norm() < cfg.tol {
        StartOutcome::Converged
    } else {
        StartOutcome::MaxIterations
    };
    finish(w, cfg.max_iter, outcome)
}

fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Run every start and return the final points, converged or not, in start order.
pub fn find_stationary(arch: &Architecture, model: &LossModel, cfg: &CensusConfig) -> Vec<RawPoint> {
    (0..cfg.n_starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = start_rng(cfg.seed, i);
            let mut w = WeightTuple::random(arch, &mut rng);
            if let Ok(c) = canonical_form(arch, &w) {
                w = c.weights;
            }
            descend(model, i, w, cfg)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Min,
    Saddle,
    Max,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPoint {
    pub weights: WeightTuple<f64>,
    /// Output-major monomial coordinates of the network.
    pub phi: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub class: PointClass,
    /// Transverse Hessian eigenvalues below the degeneracy threshold.
    pub degenerate_directions: usize,
    pub singularity: Singularity,
    pub criticality_residual: f64,
    pub multiplicity: usize,
}

/// Copy of `w` with entries below `ZERO_SNAP_RTOL · ‖filter‖` set to zero.
pub fn snap_zeros(w: &WeightTuple<f64>) -> WeightTuple<f64> {
    let mut out = w.clone();
    for f in &mut out.filters {
        let n = f.0.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut f.0 {
            if x.abs() <= ZERO_SNAP_RTOL * n {
                *x = 0.0;
            }
        }
    }
    out
}

/// Inertia of the Hessian on the complement of the rescaling directions.
pub fn classify(model: &LossModel, w: &WeightTuple<f64>, rtol: f64) -> Result<(PointClass, usize)> {
    let u = transverse_basis(&model.arch, w)?;
    let h = u.transpose() * model.hessian(w) * &u;
    let eig = h.symmetric_eigen().eigenvalues;
    let scale = eig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let pos = eig.iter().filter(|&&x| x > rtol * scale).count();
    let neg = eig.iter().filter(|&&x| x < -rtol * scale).count();
    let degenerate = eig.len() - pos - neg;
    let class = match (pos, neg) {
        (_, 0) => PointClass::Min,
        (0, _) => PointClass::Max,
        _ => PointClass::Saddle,
    };
    Ok((class, degenerate))
}

/// `‖Jᵀ Ĝ (φ_w − V)‖ / (1 + ‖J‖_F ‖Ĝ V‖)` with `J` from the layerwise recursion and
/// `Ĝ` the dataset metric on each output row.
pub fn verify_criticality_on_manifold(arch: &Architecture, w: &WeightTuple<f64>, ds: &DesignSystem) -> Result<f64> {
    let sing = is_singular_parameter(arch, &snap_zeros(w))?;
    if sing != Singularity::Smooth {
        return Err(Error::SingularPointRejected(format!("{sing:?}")));
    }
    let v = ds.anchor()?;
    let m = coefficient_matrix(arch, w)?;
    let resid = (m - v) * &ds.gram;
    let gv = v * &ds.gram;
    let flat = DVector::from_iterator(resid.len(), resid.transpose().iter().copied());
    let j = jacobian(arch, w)?.matrix;
    let num = (j.transpose() * flat).norm();
    Ok(num / (1.0 + j.norm() * gv.norm()))
}

fn relative_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d / na.max(nb).max(f64::MIN_POSITIVE)
}

/// Merge converged points with equal networks, in start order.
pub fn dedup(points: &[RawPoint], model: &LossModel, ds: &DesignSystem, cfg: &CensusConfig) -> Result<Vec<CriticalPoint>> {
    let arch = &model.arch;
    let mut out: Vec<CriticalPoint> = Vec::new();
    for p in points.iter().filter(|p| p.outcome == StartOutcome::Converged) {
        let phi = model.phi(&p.weights);
        if let Some(existing) = out.iter_mut().find(|c| relative_distance(&c.phi, &phi) < cfg.dedup_tol) {
            existing.multiplicity += 1;
            continue;
        }
        let singularity = is_singular_parameter(arch, &snap_zeros(&p.weights))?;
        let (class, degenerate_directions) = classify(model, &p.weights, cfg.degeneracy_rtol)?;
        let criticality_residual = match singularity {
            Singularity::Smooth => verify_criticality_on_manifold(arch, &p.weights, ds)?,
            _ => f64::NAN,
        };
        out.push(CriticalPoint {
            weights: p.weights.clone(),
            phi,
            loss: p.loss,
            grad_norm: p.grad_norm,
            class,
            degenerate_directions,
            singularity,
            criticality_residual,
            multiplicity: 1,
        });
    }
    out.sort_by(|a, b| a.loss.total_cmp(&b.loss));
    Ok(out)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ClassCounts {
    pub min: usize,
    pub saddle: usize,
    pub max: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvergenceStats {
    pub converged: usize,
    pub collapsed: usize,
    pub diverged: usize,
    pub stalled: usize,
    pub max_iterations: usize,
    pub mean_iterations: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub arch: String,
    /// Smooth critical points with every filter nonzero.
    pub points: Vec<CriticalPoint>,
    /// Converged points at singular parameters, reported separately.
    pub singular_points: Vec<CriticalPoint>,
    #[serde(serialize_with = "ser_display")]
    pub ged: BigInt,
    pub distinct_smooth: usize,
    pub within_bound: bool,
    pub counts: ClassCounts,
    pub seed: u64,
    pub n_starts: usize,
    pub stats: ConvergenceStats,
}

fn ser_display<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl CensusReport {
    /// Every accepted point has small gradient and criticality residual and is smooth.
    pub fn accepted_points_valid(&self, cfg: &CensusConfig) -> bool {
        self.points
            .iter()
            .all(|p| p.grad_norm < cfg.tol && p.criticality_residual < CRITICALITY_TOL && p.singularity == Singularity::Smooth)
    }
}

/// Whether two point sets coincide up to `tol` in relative function-space distance.
pub fn same_point_set(a: &[CriticalPoint], b: &[CriticalPoint], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().all(|p| b.iter().any(|q| relative_distance(&p.phi, &q.phi) < tol))
        && b.iter().all(|p| a.iter().any(|q| relative_distance(&p.phi, &q.phi) < tol))
}

pub fn census(arch: &Architecture, ds: &DesignSystem, cfg: &CensusConfig) -> Result<CensusReport> {
    if arch.r == 1 && arch.layers() > 1 {
        return Err(Error::RequiresRGreaterOne);
    }
    ds.anchor()?;
    let ged = ged_neuromanifold(arch)?;
    let model = LossModel::new(arch, ds)?;
    let raw = find_stationary(arch, &model, cfg);

    let mut stats = ConvergenceStats::default();
    for p in &raw {
        match p.outcome {
            StartOutcome::Converged => stats.converged += 1,
            StartOutcome::Collapsed => stats.collapsed += 1,
            StartOutcome::Diverged => stats.diverged += 1,
            StartOutcome::Stalled => stats.stalled += 1,
            StartOutcome::MaxIterations => stats.max_iterations += 1,
        }
    }
    stats.mean_iterations = raw.iter().map(|p| p.iterations as f64).sum::<f64>() / raw.len().max(1) as f64;

    let all = dedup(&raw, &model, ds, cfg)?;
    let (points, singular_points): (Vec<_>, Vec<_>) = all.into_iter().partition(|p| p.singularity == Singularity::Smooth);
    let mut counts = ClassCounts::default();
    for p in &points {
        match p.class {
            PointClass::Min => counts.min += 1,
            PointClass::Saddle => counts.saddle += 1,
            PointClass::Max => counts.max += 1,
        }
    }
    let distinct_smooth = points.len();
    Ok(CensusReport {
        arch: arch.to_string(),
        within_bound: BigInt::from(distinct_smooth) <= ged,
        points,
        singular_points,
        ged,
        distinct_smooth,
        counts,
        seed: cfg.seed,
        n_starts: cfg.n_starts,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{default_size, design_system, loss, Dataset};

    fn toy() -> Architecture {
        Architecture::new(3, vec![2, 2], vec![1, 1], 2).unwrap()
    }

    fn setup(arch: &Architecture, seed: u64) -> (Dataset, DesignSystem) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Dataset::generic(arch, default_size(arch), &mut rng);
        let ds = design_system(&d, arch).unwrap();
        (d, ds)
    }

    #[test]
    fn model_matches_direct_loss_and_derivatives() {
        let a = Architecture::with_output_width(vec![2, 3], vec![2, 1], 2, 2).unwrap();
        let (d, ds) = setup(&a, 1);
        let model = LossModel::new(&a, &ds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = WeightTuple::random(&a, &mut rng);
        let f = model.value(&w);
        assert!((f - loss(&a, &w, &d).unwrap()).abs() < 1e-9 * f);
        let g = model.gradient(&w);
        let hess = model.hessian(&w);
        let h = 1e-5;
        let flat = w.flat();
        for p in 0..flat.len() {
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[p] += h;
            dn[p] -= h;
            let wu = WeightTuple::from_flat(&a, &up).unwrap();
            let wd = WeightTuple::from_flat(&a, &dn).unwrap();
            let fd = (model.value(&wu) - model.value(&wd)) / (2.0 * h);
            assert!((fd - g[p]).abs() < 1e-5 * g.norm().max(1.0), "grad {p}");
            let gd = (model.gradient(&wu) - model.gradient(&wd)) / (2.0 * h);
            for q in 0..flat.len() {
                assert!((gd[q] - hess[(q, p)]).abs() < 1e-4 * hess.norm().max(1.0), "hess {q},{p}");
            }
        }
    }

    #[test]
    fn teacher_start_is_global_minimum() {
        let a = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (d, teacher) = Dataset::teacher(&a, default_size(&a), 0.0, &mut rng);
        let ds = design_system(&d, &a).unwrap();
        let model = LossModel::new(&a, &ds).unwrap();
        let cfg = CensusConfig::default();
        let p = descend(&model, 0, canonical_form(&a, &teacher).unwrap().weights, &cfg);
        assert_eq!(p.outcome, StartOutcome::Converged);
        assert!(p.loss < 1e-12);
        assert!(verify_criticality_on_manifold(&a, &p.weights, &ds).unwrap() < 1e-9);
    }

    #[test]
    fn toy_census_respects_bound() {
        let a = toy();
        let (_, ds) = setup(&a, 4);
        let cfg = CensusConfig {
            n_starts: 200,
            seed: 9,
            ..CensusConfig::default()
        };
        let rep = census(&a, &ds, &cfg).unwrap();
        assert!(rep.within_bound);
        assert!(rep.distinct_smooth >= 1);
        assert!(rep.accepted_points_valid(&cfg));
        assert_eq!(rep.ged, BigInt::from(14));
    }

    #[test]
    fn rescaled_critical_point_stays_critical() {
        let a = toy();
        let (_, ds) = setup(&a, 5);
        let model = LossModel::new(&a, &ds).unwrap();
        let cfg = CensusConfig {
            n_starts: 20,
            seed: 1,
            ..CensusConfig::default()
        };
        let p = find_stationary(&a, &model, &cfg)
            .into_iter()
            .find(|p| p.outcome == StartOutcome::Converged)
            .expect("some start converges");
        // λ_0 = 1, λ_1 = -r: zero weighted sum, so φ is unchanged to first order
        let t: f64 = 0.3;
        let mut w = p.weights.clone();
        w.filters[0].0.iter_mut().for_each(|x| *x *= t.exp());
        w.filters[1].0.iter_mut().for_each(|x| *x *= (-2.0 * t).exp());
        assert!(model.gradient(&w).norm() < 1e-9);
    }

    #[test]
    fn random_point_is_not_critical() {
        let a = toy();
        let (_, ds) = setup(&a, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = WeightTuple::random(&a, &mut rng);
        assert!(verify_criticality_on_manifold(&a, &w, &ds).unwrap() > 1e-4);
        let bad = WeightTuple::new(&a, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            verify_criticality_on_manifold(&a, &bad, &ds),
            Err(Error::SingularPointRejected(_))
        ));
    }

    #[test]
    fn single_layer_has_one_critical_point() {
        let a = Architecture::with_output_width(vec![3], vec![2], 2, 3).unwrap();
        let (_, ds) = setup(&a, 8);
        let cfg = CensusConfig {
            n_starts: 30,
            ..CensusConfig::default()
        };
        let rep = census(&a, &ds, &cfg).unwrap();
        assert_eq!(rep.distinct_smooth, 1);
        assert_eq!(rep.points[0].class, PointClass::Min);
        assert_eq!(rep.points[0].multiplicity, 30);
    }

    #[test]
    fn linear_deep_network_is_gated() {
        let a = Architecture::new(3, vec![2, 2], vec![1, 1], 1).unwrap();
        let (_, ds) = setup(&a, 9);
        assert_eq!(
            census(&a, &ds, &CensusConfig::default()).unwrap_err(),
            Error::RequiresRGreaterOne
        );
    }

    #[test]
    fn dedup_merges_scalings_and_shifts() {
        let a = toy();
        let (_, ds) = setup(&a, 10);
        let model = LossModel::new(&a, &ds).unwrap();
        let cfg = CensusConfig::default();
        let raw = |w: WeightTuple<f64>, start| RawPoint {
            start,
            loss: model.value(&w),
            grad_norm: 0.0,
            weights: w,
            iterations: 0,
            outcome: StartOutcome::Converged,
        };
        let w = WeightTuple::new(&a, vec![vec![0.6, 0.8], vec![1.5, -0.5]]).unwrap();
        let scaled = WeightTuple::new(&a, vec![vec![1.2, 1.6], vec![0.375, -0.125]]).unwrap();
        let padded = WeightTuple::new(&a, vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let shifted = WeightTuple::new(&a, vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let far = WeightTuple::new(&a, vec![vec![1.0, 0.0], vec![3.0, 1.0]]).unwrap();
        let pts = vec![raw(w, 0), raw(scaled, 1), raw(padded, 2), raw(shifted, 3), raw(far, 4)];
        let merged = dedup(&pts, &model, &ds, &cfg).unwrap();
        assert_eq!(merged.len(), 3);
        let mut mult: Vec<usize> = merged.iter().map(|p| p.multiplicity).collect();
        mult.sort();
        assert_eq!(mult, vec![1, 2, 2]);
    }
}
