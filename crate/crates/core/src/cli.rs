//! Command-line front end.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::census::{census, CensusConfig, CensusReport};
use crate::conv::Architecture;
use crate::error::Result;
use crate::invariants::{ged_neuromanifold, invariant_report, segre_dims, segre_weights, table1, table1_csv};
use crate::jacobian::claimed_kernel_basis;
use crate::param::{factorization_matrix, SegreVeronese, WeightTuple};
use crate::regression::{default_size, design_system, Dataset, DatasetMode};
use crate::verify::{self, Suite, VerifyOptions};

const TOY_ARCH: &str = "d0=3;k=2,2;s=1,1;r=2";

#[derive(Parser, Debug)]
#[command(name = "neurocnn", version, about = "Geometry of polynomial convolutional networks")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write a run manifest here (defaults to `<out>.manifest.json` when --out is set).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Dimension, degree and generic ED degree as JSON.
    Invariants {
        #[arg(long)]
        arch: Architecture,
        /// Only evaluate the ED-degree formula (allowed for r = 1).
        #[arg(long)]
        formula_only: bool,
    },
    /// Generic ED degrees for two layers of equal filter size, as CSV.
    Table1,
    /// Run randomized property suites.
    Verify {
        #[arg(value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        arch: Option<Architecture>,
        /// Swap in a deliberately wrong ED-degree formula.
        #[arg(long)]
        canary: bool,
    },
    /// Multi-start critical point census of the square loss.
    Census(CensusArgs),
    /// Generate a dataset as JSON lines.
    GenDataset {
        #[arg(long)]
        arch: Architecture,
        /// Number of samples (default: monomial count + 5).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum, default_value_t = ModeArg::Generic)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Full pipeline on the two-layer example with filters of size 2 and r = 2.
    Toy {
        #[arg(long, default_value_t = 500)]
        starts: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SeedArg {
    #[arg(long, env = "NEUROCNN_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Generic,
    Teacher,
}

impl From<ModeArg> for DatasetMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Generic => DatasetMode::Generic,
            ModeArg::Teacher => DatasetMode::Teacher,
        }
    }
}

#[derive(Args, Debug)]
pub struct CensusArgs {
    #[arg(long, default_value = TOY_ARCH)]
    pub arch: Architecture,
    #[arg(long, default_value_t = 500)]
    pub starts: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Read the dataset from a JSON-lines file.
    #[arg(long, conflicts_with_all = ["gen_seed", "n"])]
    pub dataset: Option<PathBuf>,
    /// Seed for a generated generic dataset.
    #[arg(long, default_value_t = 1)]
    pub gen_seed: u64,
    /// Size of the generated dataset (default: monomial count + 5).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

#[derive(Serialize)]
struct OutputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    arch: Option<String>,
    seeds: Vec<u64>,
    tool_version: &'static str,
    timestamp_unix: u64,
    outputs: Vec<OutputDigest>,
}

struct Outcome {
    text: String,
    /// Exit code when the command ran but a checked property failed.
    status: u8,
    arch: Option<String>,
    seeds: Vec<u64>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome {
            text,
            status: 0,
            arch: None,
            seeds: Vec::new(),
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn generated_dataset(arch: &Architecture, n: Option<usize>, mode: DatasetMode, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n.unwrap_or_else(|| default_size(arch));
    match mode {
        DatasetMode::Generic => Dataset::generic(arch, n, &mut rng),
        DatasetMode::Teacher => Dataset::teacher(arch, n, noise, &mut rng).0,
    }
}

fn run_census(args: &CensusArgs) -> Result<(CensusReport, CensusConfig)> {
    let data = match &args.dataset {
        Some(p) => Dataset::read_jsonl(BufReader::new(File::open(p)?))?,
        None => generated_dataset(&args.arch, args.n, DatasetMode::Generic, 0.0, args.gen_seed),
    };
    let ds = design_system(&data, &args.arch)?;
    let cfg = CensusConfig {
        n_starts: args.starts,
        seed: args.seed.seed,
        tol: args.tol,
        max_iter: args.max_iter,
        ..CensusConfig::default()
    };
    Ok((census(&args.arch, &ds, &cfg)?, cfg))
}

fn weight_names(arch: &Architecture) -> Vec<Vec<String>> {
    let letters = arch.num_params() <= 26;
    let mut next = 0u8;
    arch.k
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            (0..k)
                .map(|j| {
                    if letters {
                        next += 1;
                        ((b'a' + next - 1) as char).to_string()
                    } else {
                        format!("w{i}_{j}")
                    }
                })
                .collect()
        })
        .collect()
}

/// Coefficients of every output monomial as polynomials in the filter entries.
pub fn coefficient_formulas(arch: &Architecture) -> Result<Vec<Vec<String>>> {
    let lambda = factorization_matrix::<BigRational>(arch)?;
    let sv = SegreVeronese::new(arch);
    let names = weight_names(arch);
    let per_output = lambda.rows / arch.d_out();
    let column_names: Vec<String> = (0..lambda.cols)
        .map(|c| {
            let parts = sv.unflatten(c);
            let mut factors = Vec::new();
            for (i, &p) in parts.iter().enumerate() {
                for (j, &e) in sv.bases[i].exponent(p).iter().enumerate() {
                    match e {
                        0 => {}
                        1 => factors.push(names[i][j].clone()),
                        _ => factors.push(format!("{}^{e}", names[i][j])),
                    }
                }
            }
            if factors.is_empty() {
                "1".into()
            } else {
                factors.join("*")
            }
        })
        .collect();
    Ok((0..arch.d_out())
        .map(|o| {
            (0..per_output)
                .map(|row| {
                    let mut terms: Vec<String> = Vec::new();
                    for (c, name) in column_names.iter().enumerate() {
                        let q = lambda.get(o * per_output + row, c);
                        if q.is_zero() {
                            continue;
                        }
                        let mag = q.abs();
                        let body = if mag.is_one() { name.clone() } else { format!("{mag}*{name}") };
                        match (terms.is_empty(), q.is_negative()) {
                            (true, false) => terms.push(body),
                            (true, true) => terms.push(format!("-{body}")),
                            (false, false) => terms.push(format!("+ {body}")),
                            (false, true) => terms.push(format!("- {body}")),
                        }
                    }
                    if terms.is_empty() {
                        "0".into()
                    } else {
                        terms.join(" ")
                    }
                })
                .collect()
        })
        .collect())
}

#[derive(Serialize)]
struct ToyReport {
    arch: String,
    #[serde(flatten)]
    invariants: crate::invariants::InvariantReport,
    /// Coefficients of `x0^2, x0 x1, x0 x2, x1^2, x1 x2, x2^2`.
    coefficients: Vec<String>,
    kernel_basis_at_ones: Vec<Vec<f64>>,
    census: CensusSummary,
}

#[derive(Serialize)]
struct CensusSummary {
    seed: u64,
    n_starts: usize,
    distinct_smooth: usize,
    ged: String,
    within_bound: bool,
    counts: crate::census::ClassCounts,
    losses: Vec<f64>,
}

fn cmd_toy(starts: usize, seed: u64) -> Result<Outcome> {
    let arch: Architecture = TOY_ARCH.parse()?;
    let invariants = invariant_report(&arch)?;
    let coefficients = coefficient_formulas(&arch)?.remove(0);
    let ones = WeightTuple::new(&arch, vec![vec![1.0, 1.0], vec![1.0, 1.0]])?;
    let kernel_basis_at_ones = claimed_kernel_basis(&arch, &ones)?;
    let args = CensusArgs {
        arch: arch.clone(),
        starts,
        seed: SeedArg { seed },
        dataset: None,
        gen_seed: 1,
        n: None,
        tol: 1e-10,
        max_iter: 500,
    };
    let (rep, _) = run_census(&args)?;
    let report = ToyReport {
        arch: arch.to_string(),
        invariants,
        coefficients,
        kernel_basis_at_ones,
        census: CensusSummary {
            seed,
            n_starts: starts,
            distinct_smooth: rep.distinct_smooth,
            ged: rep.ged.to_string(),
            within_bound: rep.within_bound,
            counts: rep.counts,
            losses: rep.points.iter().map(|p| p.loss).collect(),
        },
    };
    Ok(Outcome {
        status: if rep.within_bound { 0 } else { 3 },
        text: to_json(&report)?,
        arch: Some(arch.to_string()),
        seeds: vec![seed, 1],
    })
}

#[derive(Serialize)]
struct FormulaOnly {
    ged: String,
    m: Vec<u64>,
    p: Vec<u64>,
}

fn execute(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Invariants { arch, formula_only } => {
            let text = if *formula_only {
                to_json(&FormulaOnly {
                    ged: ged_neuromanifold(arch)?.to_string(),
                    m: segre_weights(arch),
                    p: segre_dims(arch),
                })?
            } else {
                to_json(&invariant_report(arch)?)?
            };
            Ok(Outcome {
                arch: Some(arch.to_string()),
                ..Outcome::ok(text)
            })
        }
        Command::Table1 => Ok(Outcome::ok(table1_csv(&table1()?))),
        Command::Verify {
            suite,
            seed,
            arch,
            canary,
        } => {
            let opts = VerifyOptions {
                seed: seed.seed,
                arch: arch.clone(),
                canary: *canary,
            };
            let rep = verify::run(*suite, &opts)?;
            for r in &rep.results {
                let tag = if r.skipped {
                    "SKIP"
                } else if r.passed() {
                    "PASS"
                } else {
                    "FAIL"
                };
                eprintln!(
                    "{tag} {}/{} ({} checked, {} failed)",
                    r.suite, r.property, r.checked, r.failed
                );
            }
            Ok(Outcome {
                status: if rep.passed { 0 } else { 3 },
                text: to_json(&rep)?,
                arch: arch.as_ref().map(|a| a.to_string()),
                seeds: vec![seed.seed],
            })
        }
        Command::Census(args) => {
            let (rep, cfg) = run_census(args)?;
            let ok = rep.within_bound && rep.accepted_points_valid(&cfg);
            Ok(Outcome {
                status: if ok { 0 } else { 3 },
                text: to_json(&rep)?,
                arch: Some(args.arch.to_string()),
                seeds: if args.dataset.is_some() {
                    vec![args.seed.seed]
                } else {
                    vec![args.seed.seed, args.gen_seed]
                },
            })
        }
        Command::GenDataset {
            arch,
            n,
            mode,
            noise,
            seed,
        } => {
            let data = generated_dataset(arch, *n, (*mode).into(), *noise, seed.seed);
            let mut buf = Vec::new();
            data.write_jsonl(&mut buf)?;
            Ok(Outcome {
                text: String::from_utf8(buf).expect("JSON is UTF-8"),
                status: 0,
                arch: Some(arch.to_string()),
                seeds: vec![seed.seed],
            })
        }
        Command::Toy { starts, seed } => cmd_toy(*starts, seed.seed),
    }
}

fn emit(cli: &Cli, outcome: &Outcome) -> Result<()> {
    match &cli.out {
        Some(p) => std::fs::write(p, &outcome.text)?,
        None => std::io::stdout().write_all(outcome.text.as_bytes())?,
    }
    let manifest_path = cli.manifest.clone().or_else(|| {
        cli.out
            .as_ref()
            .map(|p| PathBuf::from(format!("{}.manifest.json", p.display())))
    });
    if let Some(mp) = manifest_path {
        let manifest = RunManifest {
            command: std::env::args().collect(),
            arch: outcome.arch.clone(),
            seeds: outcome.seeds.clone(),
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            outputs: vec![OutputDigest {
                path: cli
                    .out
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "-".into()),
                sha256: Sha256::digest(outcome.text.as_bytes())
                    .iter()
                    .map(|b| format!("{b:02x}"))
                    .collect(),
            }],
        };
        std::fs::write(mp, to_json(&manifest)?)?;
    }
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let result = execute(&cli.command).and_then(|o| emit(&cli, &o).map(|_| o.status));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
