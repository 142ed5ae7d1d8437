//! End-to-end acceptance checks. Runs without the libtest harness so that the
//! per-criterion PASS/FAIL lines are always printed.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neurocnn::census::{census, same_point_set, CensusConfig, CRITICALITY_TOL};
use neurocnn::conv::{convolve, input_len};
use neurocnn::fibers::{
    admissible_shifts, apply_shift, padded_sample, shift_is_compatible, ShiftVector, Singularity, ZeroProfile,
};
use neurocnn::invariants::{
    ged_neuromanifold, ged_segre_veronese, invariant_report, neuromanifold_degree, neuromanifold_dim, segre_dims, segre_weights,
    table1, table1_csv,
};
use neurocnn::jacobian::{claimed_kernel_basis, jacobian, kernel_dim, scaling_identity_check};
use neurocnn::param::{factorization_matrix, symbolic_network, veronese_lift, WeightTuple};
use neurocnn::poly::binomial;
use neurocnn::regression::{default_size, design_system, loss, loss_as_distance, Dataset};
use neurocnn::verify::random_formula_architecture;
use neurocnn::{Architecture, Error, Filter};

const KERNEL_SVD_RTOL: f64 = 1e-7;
const KERNEL_ANNIHILATION_TOL: f64 = 1e-10;
const SCALING_TOL: f64 = 1e-9;
const LIFT_TOL: f64 = 1e-10;
const DISTANCE_RTOL: f64 = 1e-8;
const GRADIENT_TOL: f64 = 1e-10;
const SEED_STABILITY_TOL: f64 = 1e-6;

type Criterion = (&'static str, Duration, fn() -> Verdict);

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn toy() -> Architecture {
    "d0=3;k=2,2;s=1,1;r=2".parse().unwrap()
}

fn criterion_1() -> Verdict {
    let published: [[u64; 5]; 6] = [
        [6, 39, 284, 2205, 17730],
        [14, 219, 3772, 68405, 1277898],
        [22, 543, 14684, 417005, 12186066],
        [30, 1011, 37244, 1439205, 57202074],
        [38, 1623, 75676, 3699005, 185917794],
        [46, 2379, 134204, 7933205, 482134890],
    ];
    let grid = match table1() {
        Ok(g) => g,
        Err(e) => return verdict(false, e.to_string()),
    };
    let mut mismatches = 0;
    for (row, want) in grid.iter().zip(published) {
        for (got, want) in row.iter().zip(want) {
            mismatches += usize::from(*got != BigInt::from(want));
        }
    }
    let csv = table1_csv(&grid);
    let header_ok = csv.lines().next() == Some("r,k2,k3,k4,k5,k6");
    verdict(
        mismatches == 0 && header_ok && grid.len() == 6,
        format!("{mismatches} of 30 entries differ"),
    )
}

fn criterion_2() -> Verdict {
    let a = toy();
    let rep = match invariant_report(&a) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let inv_ok = rep.dim == 3 && rep.degree == BigInt::from(4) && rep.ged == BigInt::from(14);

    // Λ columns: a²c, a²d, abc, abd, b²c, b²d; rows: x0², x0x1, x0x2, x1², x1x2, x2²
    let expected: [[i64; 6]; 6] = [
        [1, 0, 0, 0, 0, 0],
        [0, 0, 2, 0, 0, 0],
        [0, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 1, 0],
        [0, 0, 0, 2, 0, 0],
        [0, 0, 0, 0, 0, 1],
    ];
    let lambda = factorization_matrix::<BigRational>(&a).unwrap();
    let mut lambda_ok = lambda.rows == 6 && lambda.cols == 6;
    for (i, row) in expected.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            lambda_ok &= *lambda.get(i, j) == rat(v);
        }
    }

    // direct symbolic expansion at random rational weights against the printed quintuple
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut expand_ok = true;
    for _ in 0..20 {
        let [p, q, c, d]: [BigRational; 4] = std::array::from_fn(|_| {
            BigRational::new(BigInt::from(rng.random_range(-9..=9)), BigInt::from(rng.random_range(1..=7)))
        });
        let w = WeightTuple::new(&a, vec![vec![p.clone(), q.clone()], vec![c.clone(), d.clone()]]).unwrap();
        let coords = symbolic_network(&a, &w).unwrap().sym_coords();
        let two = rat(2);
        let want = vec![
            &p * &p * &c,
            &two * &p * &q * &c,
            rat(0),
            &q * &q * &c + &p * &p * &d,
            &two * &p * &q * &d,
            &q * &q * &d,
        ];
        expand_ok &= coords == want;
    }
    verdict(
        inv_ok && lambda_ok && expand_ok,
        format!(
            "dim {} degree {} ged {}; factorization {lambda_ok}; expansion {expand_ok}",
            rep.dim, rep.degree, rep.ged
        ),
    )
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    let mut failures = Vec::new();
    for _ in 0..50 {
        let a = random_formula_architecture(&mut rng, 1, 5);
        // both routes assert integrality internally and error otherwise
        let direct = ged_neuromanifold(&a);
        let specialized = ged_segre_veronese(&segre_weights(&a), &segre_dims(&a));
        match (direct, specialized) {
            (Ok(x), Ok(y)) if x == y => agree += 1,
            (x, y) => failures.push(format!("{a}: {x:?} vs {y:?}")),
        }
    }
    verdict(agree == 50, format!("{agree}/50 agree {}", failures.join("; ")))
}

fn criterion_4() -> Verdict {
    let archs: Vec<Architecture> = [
        (vec![2, 2], vec![1, 1], 2, 2),
        (vec![3, 2], vec![2, 1], 2, 2),
        (vec![2, 3, 2], vec![1, 1, 1], 2, 1),
        (vec![3, 3], vec![1, 2], 3, 2),
        (vec![2, 2, 2], vec![2, 1, 1], 3, 1),
        (vec![4, 2], vec![1, 1], 3, 1),
    ]
    .into_iter()
    .map(|(k, s, r, d)| Architecture::with_output_width(k, s, r, d).unwrap())
    .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut tuples, mut dim_bad, mut worst_annih, mut worst_abs, mut worst_scaling) = (0, 0, 0.0f64, 0.0f64, 0.0f64);
    for a in &archs {
        for _ in 0..50 {
            let w = WeightTuple::random(a, &mut rng);
            if !w.all_nonzero() {
                continue;
            }
            tuples += 1;
            let j = jacobian(a, &w).unwrap();
            if kernel_dim(&j, KERNEL_SVD_RTOL).dim != a.layers() - 1 {
                dim_bad += 1;
            }
            // relative to the Jacobian's size: Jv is a cancellation of terms of order ‖J‖
            let scale = j.matrix.norm().max(1.0);
            for v in claimed_kernel_basis(a, &w).unwrap() {
                let image = j.apply(&v);
                let n = image.iter().map(|x| x * x).sum::<f64>().sqrt();
                worst_abs = worst_abs.max(n);
                worst_annih = worst_annih.max(n / scale);
            }
            let lam: Vec<f64> = (0..a.layers()).map(|_| rng.random_range(-1.0..1.0)).collect();
            worst_scaling = worst_scaling.max(scaling_identity_check(a, &w, &lam).unwrap());
        }
    }
    verdict(
        tuples == 300 && dim_bad == 0 && worst_annih < KERNEL_ANNIHILATION_TOL && worst_scaling < SCALING_TOL,
        format!("{tuples} tuples on {} architectures; kernel-dim failures {dim_bad}; max ‖Jv‖/‖J‖ {worst_annih:.2e} (absolute {worst_abs:.2e}); max scaling residual {worst_scaling:.2e}", archs.len()),
    )
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut shape_bad) = (0.0f64, 0);
    for _ in 0..100 {
        let k = rng.random_range(1..=5);
        let r = rng.random_range(1..=4);
        let s = rng.random_range(1..=3);
        let d_out = rng.random_range(1..=4);
        let w = Filter((0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>());
        let x: Vec<f64> = (0..input_len(k, s, d_out)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lift = veronese_lift(&w, s, r);
        let kt = binomial((r as usize + k - 1) as u64, r as u64) as usize;
        if lift.lifted_k() != kt || lift.filter.len() != kt || lift.stride != s * kt {
            shape_bad += 1;
        }
        let lhs: Vec<f64> = convolve(&w, s, &x).unwrap().iter().map(|v| v.powi(r as i32)).collect();
        let rhs = convolve(&lift.filter, lift.stride, &lift.lift_input(&x).unwrap()).unwrap();
        if lhs.len() != rhs.len() {
            shape_bad += 1;
            continue;
        }
        for (a, b) in lhs.iter().zip(&rhs) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        worst < LIFT_TOL && shape_bad == 0,
        format!("max deviation {worst:.2e}; size/stride mismatches {shape_bad}"),
    )
}

fn criterion_6() -> Verdict {
    let archs: Vec<Architecture> = [
        (vec![2, 2], vec![1, 1], 2, 1),
        (vec![2, 2], vec![1, 1], 2, 2),
        (vec![3, 2], vec![2, 1], 2, 2),
        (vec![2, 3], vec![1, 1], 2, 1),
        (vec![2, 2, 2], vec![1, 1, 1], 2, 1),
    ]
    .into_iter()
    .map(|(k, s, r, d)| Architecture::with_output_width(k, s, r, d).unwrap())
    .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_const, mut worst_lsq, mut cases) = (0.0f64, 0.0f64, 0);
    let mut rank_failures = 0;
    for a in &archs {
        for _ in 0..3 {
            let data = Dataset::generic(a, default_size(a), &mut rng);
            let ds = design_system(&data, a).unwrap();
            let Ok(lsq) = ds.anchor_residual() else {
                rank_failures += 1;
                continue;
            };
            for _ in 0..20 {
                let w = WeightTuple::random(a, &mut rng);
                let l = loss(a, &w, &data).unwrap();
                let dec = loss_as_distance(a, &w, &ds).unwrap();
                worst_const = worst_const.max(((l - dec.dist_sq) - dec.constant).abs() / l.max(1.0));
                worst_lsq = worst_lsq.max((dec.constant - lsq).abs() / lsq.max(1.0));
                cases += 1;
            }
        }
    }
    verdict(
        cases == 300 && rank_failures == 0 && worst_const < DISTANCE_RTOL && worst_lsq < DISTANCE_RTOL,
        format!("{cases} evaluations; max |loss - dist - const|/loss {worst_const:.2e}; max |const - lsq|/lsq {worst_lsq:.2e}"),
    )
}

fn criterion_7() -> Verdict {
    let archs: Vec<Architecture> = [
        (vec![2, 2], vec![1, 1], 2, 1),
        (vec![3, 3, 2], vec![1, 1, 1], 2, 2),
        (vec![4, 3], vec![2, 1], 3, 2),
        (vec![3, 4, 2], vec![1, 2, 1], 2, 1),
        (vec![5, 3], vec![3, 1], 2, 1),
    ]
    .into_iter()
    .map(|(k, s, r, d)| Architecture::with_output_width(k, s, r, d).unwrap())
    .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut tuples, mut shifts, mut nontrivial, mut broken) = (0, 0, 0, 0);
    let (mut rejected, mut inadmissible) = (0, 0);
    for i in 0..100 {
        let a = &archs[i % archs.len()];
        let w = padded_sample(a, &mut rng, 50);
        let wr = w.to_rational();
        let base = symbolic_network(a, &wr).unwrap();
        tuples += 1;
        for t in admissible_shifts(a, &ZeroProfile::of(&w)) {
            shifts += 1;
            nontrivial += usize::from(!t.is_zero());
            match apply_shift(a, &wr, &t) {
                Ok(v) if symbolic_network(a, &v).unwrap() == base => {}
                _ => broken += 1,
            }
        }
        // stride-divisibility violations
        for _ in 0..5 {
            let t = ShiftVector((0..a.layers()).map(|_| rng.random_range(-2..=2)).collect());
            if !shift_is_compatible(a, &t) {
                inadmissible += 1;
                rejected += usize::from(matches!(apply_shift(a, &wr, &t), Err(Error::InadmissibleShift(_))));
            }
        }
    }
    verdict(
        tuples == 100 && broken == 0 && nontrivial > 0 && rejected == inadmissible && inadmissible > 0,
        format!("{tuples} tuples, {shifts} admissible shifts ({nontrivial} nonzero), {broken} broke φ; rejected {rejected}/{inadmissible} inadmissible"),
    )
}

fn criterion_8() -> Verdict {
    let a = toy();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = Dataset::generic(&a, default_size(&a), &mut rng);
    let ds = design_system(&data, &a).unwrap();
    let mut reports = Vec::new();
    for seed in [1u64, 2, 3] {
        let cfg = CensusConfig {
            n_starts: 2000,
            seed,
            tol: GRADIENT_TOL,
            ..CensusConfig::default()
        };
        match census(&a, &ds, &cfg) {
            Ok(r) => reports.push(r),
            Err(e) => return verdict(false, e.to_string()),
        }
    }
    let bound = reports.iter().all(|r| r.within_bound && r.distinct_smooth <= 14);
    let accepted = reports.iter().all(|r| {
        r.points.iter().all(|p| {
            p.grad_norm < GRADIENT_TOL && p.criticality_residual < CRITICALITY_TOL && p.singularity == Singularity::Smooth
        })
    });
    let no_nodal = reports.iter().all(|r| {
        r.points
            .iter()
            .chain(&r.singular_points)
            .all(|p| p.singularity != Singularity::NodalSingular)
    });
    let stable = same_point_set(&reports[0].points, &reports[1].points, SEED_STABILITY_TOL)
        && same_point_set(&reports[0].points, &reports[2].points, SEED_STABILITY_TOL);
    let counts: Vec<usize> = reports.iter().map(|r| r.distinct_smooth).collect();
    verdict(
        bound && accepted && no_nodal,
        format!(
            "distinct real smooth critical points per seed {counts:?} (bound 14); classes {:?}; identical across seeds: {stable}",
            reports[0].counts
        ),
    )
}

fn criterion_9() -> Verdict {
    let single = Architecture::with_output_width(vec![3], vec![2], 2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data = Dataset::generic(&single, default_size(&single), &mut rng);
    let ds = design_system(&data, &single).unwrap();
    let cfg = CensusConfig {
        n_starts: 50,
        ..CensusConfig::default()
    };
    let one = census(&single, &ds, &cfg).map(|r| r.distinct_smooth);

    let linear = Architecture::new(3, vec![2, 2], vec![1, 1], 1).unwrap();
    let lin_data = Dataset::generic(&linear, default_size(&linear), &mut rng);
    let lin_ds = design_system(&lin_data, &linear).unwrap();
    let gated = census(&linear, &lin_ds, &cfg).err() == Some(Error::RequiresRGreaterOne)
        && neuromanifold_dim(&linear) == Err(Error::RequiresRGreaterOne)
        && neuromanifold_degree(&linear) == Err(Error::RequiresRGreaterOne);
    verdict(
        one == Ok(1) && gated,
        format!("single-layer critical points {one:?}; linear paths gated: {gated}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 table reproduction", Duration::from_secs(1), criterion_1),
        ("2 toy example", Duration::from_secs(1), criterion_2),
        ("3 formula cross-validation", Duration::from_secs(10), criterion_3),
        ("4 regularity", Duration::from_secs(30), criterion_4),
        ("5 veronese lift", Duration::from_secs(5), criterion_5),
        ("6 loss as distance", Duration::from_secs(30), criterion_6),
        ("7 fiber shifts", Duration::from_secs(10), criterion_7),
        ("8 critical census", Duration::from_secs(120), criterion_8),
        ("9 degenerate architectures", Duration::from_secs(5), criterion_9),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let ok = v.ok && elapsed < limit;
        failed += usize::from(!ok);
        println!(
            "{} criterion {name}: {} [{:.3}s, limit {}s]",
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
