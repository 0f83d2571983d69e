#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use arcwalk::absorption::{absorption_frequency, bernoulli_limit_mean};
use arcwalk::brownian::{hidden_step, last_zero, occupation_time, sample_bm, sample_bridge, BrownianPath, PathGrid};
use arcwalk::density::{arcsine_quantile, stationarity_table, z_p};
use arcwalk::kernels::simulate;
use arcwalk::lq::{classify_critical_point, lq_minimizer, CriticalPoint, LqQuery};
use arcwalk::rng::{open_unit, par_replicates};
use arcwalk::stats::{ks_report, mean_and_se};
use arcwalk::{derive_seed, rng_from_seed, DensityModel, IntervalState, QuadratureConfig, WalkParams, WalkRng};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

/// Simulate and verify median-martingale interval walks.
#[derive(Parser, Debug)]
#[command(name = "arcwalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one chain and print its recorded states as CSV.
    Simulate(SimulateArgs),
    /// Check that the stationary density is a fixed point of the kernel.
    VerifyStationary(VerifyArgs),
    /// Print the normalizing constant Z_p as CSV.
    ZpTable(ZpArgs),
    /// Distributional checks on discretized Brownian paths.
    Brownian(BrownianArgs),
    /// Check where E|z - X|^q is minimized for the p-walk's next state.
    LqCheck(LqArgs),
    /// Compare absorption frequencies of the p < 0 walk with the limit formula.
    Absorb(AbsorbArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum VariantArg {
    X,
    Y,
    P,
    Absorbing,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    variant: VariantArg,
    /// Family parameter; required for `p` and `absorbing`.
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    x0: f64,
    /// Number of recorded states.
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Quadrature,
    Montecarlo,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// 0 is the X walk with the arcsine law.
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, value_enum, default_value_t = Mode::Quadrature)]
    mode: Mode,
    /// Quadrature mode checks a = k / (grid + 1), k = 1..=grid.
    #[arg(long, default_value_t = 99)]
    grid: usize,
    /// Defaults to 1e-6 (relative residual) or 0.02 (KS distance).
    #[arg(long)]
    tol: Option<f64>,
    /// Required in montecarlo mode unless --input is given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 200_000)]
    steps: usize,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// Read samples (CSV with an `x` column, `-` for stdin) instead of simulating.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ZpArgs {
    /// Comma-separated values, e.g. `0.5,1,2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "p_range", required_unless_present = "p_range")]
    p_list: Vec<f64>,
    /// `lo:hi:step`, inclusive of `hi` up to rounding.
    #[arg(long, allow_hyphen_values = true)]
    p_range: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum What {
    Occupation,
    Lastzero,
    BridgeOccupation,
    SpliceCheck,
}

#[derive(Args, Debug, Serialize)]
struct BrownianArgs {
    #[arg(long, value_enum)]
    what: What,
    /// Grid cells; a power of two.
    #[arg(long, default_value_t = 4096)]
    n: usize,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.02)]
    tol: f64,
    /// Per-sample values as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the first sampled path as `s,value` CSV.
    #[arg(long)]
    dump_path: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct LqArgs {
    #[arg(long)]
    q: f64,
    /// Defaults to 1 - q.
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    /// Checks x = k / (x_grid + 1), k = 1..=x_grid.
    #[arg(long, default_value_t = 19)]
    x_grid: usize,
}

#[derive(Args, Debug, Serialize)]
struct AbsorbArgs {
    #[arg(long, allow_hyphen_values = true)]
    p: f64,
    #[arg(long)]
    x0: f64,
    #[arg(long, default_value_t = 100_000)]
    runs: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = arcwalk::absorption::DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = arcwalk::absorption::DEFAULT_MAX_STEPS)]
    max_steps: usize,
}

/// Exit status of a command that ran to completion.
enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("ARCWALK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().with_context(|| format!("ARCWALK_THREADS = {raw:?}"))?;
    if n == 0 {
        bail!("ARCWALK_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(command: Command) -> anyhow::Result<Verdict> {
    match command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::VerifyStationary(args) => cmd_verify(&args),
        Command::ZpTable(args) => cmd_zp_table(&args),
        Command::Brownian(args) => cmd_brownian(&args),
        Command::LqCheck(args) => cmd_lq_check(&args),
        Command::Absorb(args) => cmd_absorb(&args),
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<P: Serialize>(command: &str, params: &P, result: Value) -> anyhow::Result<()> {
    let doc = json!({ "command": command, "params": params, "result": result });
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<Verdict> {
    let need_p = || args.p.context("--p is required for this variant");
    let params = match args.variant {
        VariantArg::X => WalkParams::x(),
        VariantArg::Y => WalkParams::y(),
        VariantArg::P => WalkParams::family(need_p()?)?,
        VariantArg::Absorbing => WalkParams::absorbing(need_p()?)?,
    };
    let x0 = match args.variant {
        VariantArg::Absorbing => IntervalState::closed(args.x0)?,
        _ => IntervalState::new(args.x0)?,
    };
    let trace = simulate(params, x0, args.steps, args.burn_in, args.thin, args.seed)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "x")?;
    for x in &trace.states {
        writeln!(out, "{x}")?;
    }
    out.flush()?;
    Ok(Verdict::Pass)
}

/// Reads the `x` column (or the first column) of a headed CSV.
fn read_samples(path: &Path) -> anyhow::Result<Vec<f64>> {
    let source: Box<dyn Read> = if path == Path::new("-") {
        Box::new(io::stdin().lock())
    } else {
        Box::new(File::open(path).with_context(|| format!("opening {}", path.display()))?)
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let column = reader.headers()?.iter().position(|h| h == "x").unwrap_or(0);
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(column).unwrap_or("");
        samples.push(field.parse().with_context(|| format!("record {}: {field:?} is not a number", i + 1))?);
    }
    if samples.is_empty() {
        bail!("no samples in {}", path.display());
    }
    Ok(samples)
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<Verdict> {
    if !(args.p >= 0.0 && args.p.is_finite()) {
        bail!("--p must be finite and >= 0, got {}", args.p);
    }
    let cfg = QuadratureConfig::default();
    match args.mode {
        Mode::Quadrature => {
            let tol = args.tol.unwrap_or(1e-6);
            if args.grid == 0 {
                bail!("--grid must be at least 1");
            }
            let grid: Vec<f64> = (1..=args.grid).map(|k| k as f64 / (args.grid + 1) as f64).collect();
            let rows = stationarity_table(args.p, &grid, &cfg)?;
            let max = rows.iter().map(|r| r.relative).fold(0.0, f64::max);
            let pass = max <= tol;
            emit_json(
                "verify-stationary",
                args,
                json!({ "max_relative_residual": max, "tol": tol, "pass": pass, "rows": rows }),
            )?;
            Ok(Verdict::from_bool(pass))
        }
        Mode::Montecarlo => {
            let tol = args.tol.unwrap_or(0.02);
            let samples = match (&args.input, args.seed) {
                (Some(path), _) => read_samples(path)?,
                (None, Some(seed)) => {
                    let params = if args.p == 0.0 { WalkParams::x() } else { WalkParams::family(args.p)? };
                    simulate(params, IntervalState::new(0.5)?, args.steps, args.burn_in, args.thin, seed)?.states
                }
                (None, None) => bail!("montecarlo mode needs --seed or --input"),
            };
            let model = if args.p == 0.0 { DensityModel::arcsine() } else { DensityModel::new(args.p, cfg)? };
            let report = ks_report(&samples, |s| model.cdf(s), tol)?;
            emit_json("verify-stationary", args, serde_json::to_value(report)?)?;
            Ok(Verdict::from_bool(report.pass))
        }
    }
}

fn parse_range(range: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        bail!("--p-range expects lo:hi:step, got {range:?}");
    };
    let (lo, hi, step): (f64, f64, f64) = (lo.trim().parse()?, hi.trim().parse()?, step.trim().parse()?);
    if !(step > 0.0 && lo.is_finite() && hi.is_finite() && lo <= hi) {
        bail!("--p-range needs lo <= hi and step > 0");
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| lo + k as f64 * step).collect())
}

fn cmd_zp_table(args: &ZpArgs) -> anyhow::Result<Verdict> {
    let ps = match &args.p_range {
        Some(range) => parse_range(range)?,
        None => args.p_list.clone(),
    };
    if let Some(bad) = ps.iter().find(|&&p| !(p > 0.0)) {
        bail!("Z_p is tabulated for p > 0, got {bad}");
    }
    let cfg = QuadratureConfig::default();
    let rows = ps.iter().map(|&p| Ok((p, z_p(p, &cfg)?))).collect::<anyhow::Result<Vec<_>>>()?;
    let mut out = output(None)?;
    writeln!(out, "p,z_p")?;
    for (p, z) in rows {
        writeln!(out, "{p},{z}")?;
    }
    out.flush()?;
    Ok(Verdict::Pass)
}

fn write_column(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> anyhow::Result<()> {
    let mut out = output(Some(path))?;
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

const SPLICE_TIMES: [f64; 3] = [0.25, 0.5, 0.75];

/// The path behind one sample of `what`.
fn sample_path(what: What, grid: PathGrid, rng: &mut WalkRng) -> arcwalk::Result<BrownianPath> {
    Ok(match what {
        What::Occupation | What::Lastzero => sample_bm(grid, rng),
        What::BridgeOccupation => sample_bridge(grid, rng),
        What::SpliceCheck => {
            let split = arcsine_quantile(open_unit(rng))?.clamp(1e-12, 1.0 - 1e-12);
            hidden_step(split, grid, rng)?.path
        }
    })
}

fn cmd_brownian(args: &BrownianArgs) -> anyhow::Result<Verdict> {
    let grid = PathGrid::new(args.n)?;
    if args.samples < 2 {
        bail!("--samples must be at least 2");
    }
    let what = args.what;
    if let Some(dump) = &args.dump_path {
        // replicate 0 is drawn from derive_seed(seed, 0)
        let path = sample_path(what, grid, &mut rng_from_seed(derive_seed(args.seed, 0)))?;
        path.write_csv(BufWriter::new(File::create(dump).with_context(|| format!("creating {}", dump.display()))?))?;
    }
    let arcsine = |s: f64| arcwalk::density::arcsine_cdf(s.clamp(0.0, 1.0)).unwrap_or(f64::NAN);
    match what {
        What::Occupation | What::Lastzero | What::BridgeOccupation => {
            let values = par_replicates(args.samples, args.seed, |_, rng| {
                let path = sample_path(what, grid, rng)?;
                Ok(match what {
                    What::Lastzero => last_zero(&path),
                    _ => occupation_time(&path),
                })
            });
            let values = values.into_iter().collect::<arcwalk::Result<Vec<f64>>>()?;
            if let Some(path) = &args.out {
                write_column(path, "value", values.iter().map(f64::to_string))?;
            }
            let report = match what {
                What::BridgeOccupation => ks_report(&values, |s| s.clamp(0.0, 1.0), args.tol)?,
                _ => ks_report(&values, arcsine, args.tol)?,
            };
            emit_json("brownian", args, serde_json::to_value(report)?)?;
            Ok(Verdict::from_bool(report.pass))
        }
        What::SpliceCheck => {
            let idx = SPLICE_TIMES.map(|s| grid.nearest(s));
            let values = par_replicates(args.samples, args.seed, |_, rng| {
                sample_path(what, grid, rng).map(|w| idx.map(|k| w.values[k]))
            });
            let values = values.into_iter().collect::<arcwalk::Result<Vec<_>>>()?;
            if let Some(path) = &args.out {
                write_column(path, "w_0.25,w_0.5,w_0.75", values.iter().map(|v| format!("{},{},{}", v[0], v[1], v[2])))?;
            }
            let mut rows = Vec::new();
            let mut pass = true;
            for i in 0..3 {
                for j in i..3 {
                    let products: Vec<f64> = values.iter().map(|v| v[i] * v[j]).collect();
                    let (cov, se) = mean_and_se(&products);
                    let expected = grid.point(idx[i]).min(grid.point(idx[j]));
                    let z = (cov - expected) / se;
                    pass &= z.abs() <= 3.0;
                    rows.push(json!({
                        "s": SPLICE_TIMES[i], "t": SPLICE_TIMES[j],
                        "covariance": cov, "expected": expected, "se": se, "z": z,
                    }));
                }
            }
            emit_json("brownian", args, json!({ "covariances": rows, "pass": pass }))?;
            Ok(Verdict::from_bool(pass))
        }
    }
}

fn cmd_lq_check(args: &LqArgs) -> anyhow::Result<Verdict> {
    if !(args.q > 0.0 && args.q.is_finite()) {
        bail!("--q must be positive, got {}", args.q);
    }
    if args.x_grid == 0 {
        bail!("--x-grid must be at least 1");
    }
    let p = args.p.unwrap_or(1.0 - args.q);
    let martingale = (p - (1.0 - args.q)).abs() <= 1e-12;
    let xs: Vec<f64> = (1..=args.x_grid).map(|k| k as f64 / (args.x_grid + 1) as f64).collect();
    let mut rows = Vec::new();
    let mut sup = 0.0f64;
    let mut all_expected = true;
    for &x in &xs {
        let query = LqQuery::new(p, args.q, x)?;
        let minimizer = if args.q >= 1.0 { Some(lq_minimizer(&query, 1e-10)?) } else { None };
        if let Some(z) = minimizer {
            sup = sup.max((z - x).abs());
        }
        // classification presumes z = x is critical, which needs p = 1 - q
        let verdict = if martingale {
            match classify_critical_point(&query) {
                Ok(v) => Some(v),
                Err(arcwalk::Error::Undetermined(_)) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        let expected = if args.q >= 1.0 { CriticalPoint::Minimum } else { CriticalPoint::Inflection };
        // x = 1/2 is a symmetric point where every q gives a minimum
        let symmetric = (x - 0.5).abs() < 1e-12;
        all_expected &= (symmetric && args.q < 1.0) || verdict == Some(expected);
        rows.push(json!({ "x": x, "minimizer": minimizer, "verdict": verdict }));
    }
    let pass = martingale && all_expected && (args.q < 1.0 || sup <= 1e-6);
    let result = json!({
        "p": p,
        "sup_abs_error": if args.q >= 1.0 { Some(sup) } else { None },
        "pass": pass,
        "rows": rows,
    });
    emit_json("lq-check", args, result)?;
    Ok(Verdict::from_bool(pass))
}

fn cmd_absorb(args: &AbsorbArgs) -> anyhow::Result<Verdict> {
    if !(args.p < 0.0) {
        bail!("--p must be negative, got {}", args.p);
    }
    let formula = bernoulli_limit_mean(args.x0, args.p)?;
    let summary = absorption_frequency(args.p, args.x0, args.runs, args.max_steps, args.eps, args.seed)?;
    let empirical = summary.fraction_at_one();
    let se = summary.standard_error(formula);
    let z = if se > 0.0 { (empirical - formula).abs() / se } else { 0.0 };
    let pass = z <= 3.0;
    let result = json!({
        "empirical": empirical,
        "formula": formula,
        "se": se,
        "z": z,
        "summary": summary,
        "pass": pass,
    });
    emit_json("absorb", args, result)?;
    Ok(Verdict::from_bool(pass))
}
