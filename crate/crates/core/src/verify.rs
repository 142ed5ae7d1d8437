//! Randomized property suites behind `neurocnn verify`.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conv::{compose_filters, convolve, input_len, toeplitz, Architecture, Filter};
use crate::error::Result;
use crate::fibers::{
    admissible_shifts, apply_shift, canonical_form, is_singular_parameter, padded_sample, shift_is_compatible, ShiftVector,
    Singularity, ZeroProfile,
};
use crate::invariants::{
    ged_neuromanifold, ged_segre_veronese, neuromanifold_degree, segre_dims, segre_weights, table1, table1_canary,
    TABLE1_REFERENCE,
};
use crate::jacobian::{claimed_kernel_basis, jacobian, jacobian_consistency, kernel_dim, scaling_identity_check, KERNEL_RTOL};
use crate::param::{factorization_matrix, segre_veronese_embed, symbolic_network, veronese_lift, WeightTuple};
use crate::regression::{conv_subspace, default_size, design_system, loss, loss_as_distance, project_anchor, Dataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Conv,
    Jacobian,
    Fibers,
    Regression,
    Invariants,
    All,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyResult {
    pub suite: &'static str,
    pub property: &'static str,
    pub checked: usize,
    pub failed: usize,
    pub max_error: f64,
    pub skipped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub results: Vec<PropertyResult>,
    pub passed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Restrict architecture-dependent suites to this architecture.
    pub arch: Option<Architecture>,
    /// Replace the ED-degree formula by a deliberately wrong one.
    pub canary: bool,
}

struct Tally {
    suite: &'static str,
    property: &'static str,
    checked: usize,
    failed: usize,
    max_error: f64,
}

impl Tally {
    fn new(suite: &'static str, property: &'static str) -> Self {
        Tally {
            suite,
            property,
            checked: 0,
            failed: 0,
            max_error: 0.0,
        }
    }

    fn check(&mut self, ok: bool) {
        self.checked += 1;
        self.failed += usize::from(!ok);
    }

    fn within(&mut self, err: f64, tol: f64) {
        self.max_error = self.max_error.max(err);
        self.check(err < tol);
    }

    fn done(self) -> PropertyResult {
        PropertyResult {
            suite: self.suite,
            property: self.property,
            checked: self.checked,
            failed: self.failed,
            max_error: self.max_error,
            skipped: false,
            note: None,
        }
    }
}

fn skipped(suite: &'static str, property: &'static str, note: String) -> PropertyResult {
    PropertyResult {
        suite,
        property,
        checked: 0,
        failed: 0,
        max_error: 0.0,
        skipped: true,
        note: Some(note),
    }
}

fn default_architectures() -> Vec<Architecture> {
    [
        (vec![2, 2], vec![1, 1], 2, 1),
        (vec![3, 2], vec![2, 1], 2, 2),
        (vec![2, 3, 2], vec![1, 1, 1], 2, 2),
        (vec![3, 2], vec![1, 2], 3, 2),
        (vec![2, 2, 2], vec![2, 1, 1], 3, 1),
    ]
    .into_iter()
    .map(|(k, s, r, d)| Architecture::with_output_width(k, s, r, d).expect("valid preset"))
    .collect()
}

fn architectures(opts: &VerifyOptions) -> Vec<Architecture> {
    match &opts.arch {
        Some(a) => vec![a.clone()],
        None => default_architectures(),
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let n = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() / n
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn conv_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut toe = Tally::new("conv", "toeplitz_matches_convolution");
    let mut comp = Tally::new("conv", "composition_law");
    let mut lift = Tally::new("conv", "veronese_lift_identity");
    for _ in 0..100 {
        let k = rng.random_range(1..=5);
        let s = rng.random_range(1..=3);
        let d = rng.random_range(1..=5);
        let w = Filter(uniform(&mut rng, k));
        let x = uniform(&mut rng, input_len(k, s, d));
        let direct = convolve(&w, s, &x).expect("matching length");
        toe.within(rel(&direct, &toeplitz(&w, s, d).apply(&x).expect("matching length")), 1e-12);

        let kv = rng.random_range(1..=4);
        let t = rng.random_range(1..=3);
        let v = Filter(uniform(&mut rng, kv));
        let mid = input_len(kv, s, d);
        let xin = uniform(&mut rng, input_len(k, t, mid));
        let nested = convolve(&v, s, &convolve(&w, t, &xin).expect("len")).expect("len");
        let merged = convolve(&compose_filters(&v, t, &w), s * t, &xin).expect("len");
        comp.within(rel(&nested, &merged), 1e-12);

        let r = rng.random_range(1..=4);
        let lifted = veronese_lift(&w, s, r);
        let lhs: Vec<f64> = direct.iter().map(|y| y.powi(r as i32)).collect();
        let rhs = convolve(&lifted.filter, lifted.stride, &lifted.lift_input(&x).expect("len")).expect("len");
        lift.within(rel(&lhs, &rhs), 1e-10);
    }

    let mut equi = Tally::new("conv", "network_equivariance");
    let mut fact = Tally::new("conv", "factorization_identity");
    for a in architectures(opts) {
        let lambda = factorization_matrix::<f64>(&a);
        for _ in 0..20 {
            let w = WeightTuple::random(&a, &mut rng);
            let net = symbolic_network(&a, &w).expect("shapes follow arch");
            equi.check(net.is_equivariant());
            if let Ok(l) = &lambda {
                let nu = segre_veronese_embed(&w, &a).data;
                fact.within(rel(&net.sym_coords(), &l.apply(&nu)), 1e-10);
            }
        }
    }
    vec![toe.done(), comp.done(), lift.done(), equi.done(), fact.done()]
}

pub fn jacobian_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let archs: Vec<Architecture> = architectures(opts);
    if archs.iter().all(|a| a.r == 1) {
        return vec![skipped(
            "jacobian",
            "kernel_dimension",
            "linear networks (r = 1) have larger generic fibers; the rank statement assumes r > 1".into(),
        )];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5a5a);
    let mut dim = Tally::new("jacobian", "kernel_dimension");
    let mut annihilated = Tally::new("jacobian", "claimed_basis_annihilated");
    let mut scaling = Tally::new("jacobian", "scaling_identity");
    let mut consistent = Tally::new("jacobian", "recursion_matches_factorization");
    for a in archs.iter().filter(|a| a.r > 1) {
        let lambda = factorization_matrix::<f64>(a).ok();
        for _ in 0..60 {
            let w = WeightTuple::random(a, &mut rng);
            let j = jacobian(a, &w).expect("shapes follow arch");
            let rep = kernel_dim(&j, KERNEL_RTOL);
            dim.check(rep.dim == a.layers() - 1);
            let norm = j.matrix.norm().max(1.0);
            let worst = claimed_kernel_basis(a, &w)
                .expect("random filters are nonzero")
                .iter()
                .map(|v| j.apply(v).iter().map(|x| x * x).sum::<f64>().sqrt() / norm)
                .fold(0.0, f64::max);
            annihilated.within(worst, 1e-10);
            let lam = uniform(&mut rng, a.layers());
            scaling.within(scaling_identity_check(a, &w, &lam).expect("lengths match"), 1e-9);
            if let Some(l) = &lambda {
                consistent.within(jacobian_consistency(a, l, &w).expect("shapes"), 1e-10);
            }
        }
    }
    vec![dim.done(), annihilated.done(), scaling.done(), consistent.done()]
}

pub fn fibers_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xf1be);
    let mut exact = Tally::new("fibers", "shift_preserves_network");
    let mut reject = Tally::new("fibers", "stride_violations_rejected");
    let mut canon = Tally::new("fibers", "canonical_form_idempotent");
    let mut smooth = Tally::new("fibers", "generic_points_smooth");
    let archs = architectures(opts);
    for a in &archs {
        for _ in 0..20 {
            let w = padded_sample(a, &mut rng, 50);
            let wr: WeightTuple<BigRational> = w.to_rational();
            let base = symbolic_network(a, &wr).expect("shapes");
            for t in admissible_shifts(a, &ZeroProfile::of(&w)) {
                let v = apply_shift(a, &wr, &t).expect("enumerated shifts are admissible");
                exact.check(symbolic_network(a, &v).expect("shapes") == base);
            }
            let l = a.layers();
            let t = ShiftVector((0..l).map(|_| rng.random_range(-2..=2)).collect());
            if !shift_is_compatible(a, &t) {
                reject.check(apply_shift(a, &w, &t).is_err());
            }
            let g = WeightTuple::random(a, &mut rng);
            let c = canonical_form(a, &g).expect("nonzero");
            canon.check(canonical_form(a, &c.weights).expect("nonzero").weights == c.weights);
            smooth.check(is_singular_parameter(a, &g).expect("shapes") == Singularity::Smooth);
        }
    }
    // the stride recursion must reject odd leading shifts after a stride-2 layer
    let strided = Architecture::new(9, vec![3, 2], vec![2, 1], 2).expect("valid");
    let w = WeightTuple::new(&strided, vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0]]).expect("shapes");
    for t1 in -1..=0 {
        reject.check(apply_shift(&strided, &w, &ShiftVector(vec![1, t1])).is_err());
    }
    vec![exact.done(), reject.done(), canon.done(), smooth.done()]
}

pub fn regression_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7e57);
    let mut identity = Tally::new("regression", "loss_equals_distance_plus_constant");
    let mut residual = Tally::new("regression", "constant_is_least_squares_residual");
    let mut contained = Tally::new("regression", "network_in_conv_subspace");
    let mut ortho = Tally::new("regression", "anchor_projection_orthogonal");
    let mut rank = Tally::new("regression", "generic_design_full_rank");
    for a in architectures(opts).iter().filter(|a| a.output_degree() <= 4) {
        let sub = conv_subspace(a);
        for _ in 0..3 {
            let d = Dataset::generic(a, default_size(a), &mut rng);
            let Ok(ds) = design_system(&d, a) else { continue };
            rank.check(ds.full_rank);
            if !ds.full_rank {
                continue;
            }
            let lsq = ds.anchor_residual().expect("full rank");
            for _ in 0..10 {
                let w = WeightTuple::random(a, &mut rng);
                let l = loss(a, &w, &d).expect("shapes");
                let dec = loss_as_distance(a, &w, &ds).expect("full rank");
                identity.within((l - dec.dist_sq - dec.constant).abs() / l.max(1.0), 1e-8);
                residual.within((dec.constant - lsq).abs() / lsq.max(1.0), 1e-8);
                let sym = symbolic_network(a, &w).expect("shapes").sym_coords();
                contained.within(sub.containment_residual(&sym), 1e-9);
            }
            match project_anchor(&ds, &sub) {
                Ok(p) => ortho.within(p.orthogonality_residual, 1e-9),
                Err(_) => ortho.check(false),
            }
        }
    }
    vec![identity.done(), residual.done(), contained.done(), ortho.done(), rank.done()]
}

/// Random architecture for formula sweeps: `L ≤ 4`, `k_i ≤ 5`, `r` in the given range.
pub fn random_formula_architecture(rng: &mut impl Rng, r_min: u32, r_max: u32) -> Architecture {
    let l = rng.random_range(1..=4);
    let k: Vec<usize> = (0..l).map(|_| rng.random_range(1..=5)).collect();
    let r = rng.random_range(r_min..=r_max);
    Architecture::with_output_width(k, vec![1; l], r, 1).expect("unit strides always fit")
}

pub fn invariants_suite(opts: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let mut table = Tally::new("invariants", "table1_exact");
    let grid = if opts.canary { table1_canary()? } else { table1()? };
    for (row, want) in grid.iter().zip(TABLE1_REFERENCE) {
        for (got, want) in row.iter().zip(want) {
            table.check(*got == BigInt::from(want));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x1a7);
    let mut cross = Tally::new("invariants", "formulas_agree");
    let mut bound = Tally::new("invariants", "ged_at_least_degree");
    for _ in 0..50 {
        let a = random_formula_architecture(&mut rng, 1, 5);
        let direct = ged_neuromanifold(&a);
        let specialized = ged_segre_veronese(&segre_weights(&a), &segre_dims(&a));
        let ok = matches!((&direct, &specialized), (Ok(x), Ok(y)) if x == y);
        cross.check(ok);
        if a.r > 1 {
            if let (Ok(g), Ok(d)) = (direct, neuromanifold_degree(&a)) {
                bound.check(g >= d);
            } else {
                bound.check(false);
            }
        }
    }
    Ok(vec![table.done(), cross.done(), bound.done()])
}

pub fn run(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut results = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Conv {
        results.extend(conv_suite(opts));
    }
    if all || suite == Suite::Jacobian {
        results.extend(jacobian_suite(opts));
    }
    if all || suite == Suite::Fibers {
        results.extend(fibers_suite(opts));
    }
    if all || suite == Suite::Regression {
        results.extend(regression_suite(opts));
    }
    if all || suite == Suite::Invariants {
        results.extend(invariants_suite(opts)?);
    }
    let passed = results.iter().all(PropertyResult::passed);
    Ok(VerifyReport {
        seed: opts.seed,
        results,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        let rep = run(
            Suite::All,
            &VerifyOptions {
                seed: 7,
                ..Default::default()
            },
        )
        .unwrap();
        for r in &rep.results {
            assert!(r.passed(), "{}/{} failed {} of {}", r.suite, r.property, r.failed, r.checked);
            assert!(r.skipped || r.checked > 0, "{}/{} checked nothing", r.suite, r.property);
        }
        assert!(rep.passed);
    }

    #[test]
    fn canary_fails_table() {
        let rep = run(
            Suite::Invariants,
            &VerifyOptions {
                canary: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!rep.passed);
        assert!(!rep.results[0].passed());
    }

    #[test]
    fn linear_jacobian_is_skipped() {
        let arch = Architecture::new(7, vec![3], vec![2], 1).unwrap();
        let rep = run(
            Suite::Jacobian,
            &VerifyOptions {
                arch: Some(arch),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.passed);
        assert!(rep.results[0].skipped);
    }
}
