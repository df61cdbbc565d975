//! Command implementations behind the `udisc` binary.
//!
//! Each command returns an [`Output`] instead of printing, so the binary and
//! the tests share one code path.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use udisc::canonical::{build_frame, CanonicalFrame, FrameError, FrameResiduals};
use udisc::fidelity;
use udisc::format::{matrix_to_rows, ComplexRows, InstanceFile};
use udisc::oracle::{self, OracleConfig, OracleError};
use udisc::sampler;
use udisc::similar::random_spec;
use udisc::solver::{self, Method, SolveError, SolveOptions, SolveReport};
use udisc::states::DiscriminationInstance;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SHAPE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "DISCRIM_SEED";

#[derive(Debug, Parser)]
#[command(name = "udisc", version, about = "Optimal unambiguous discrimination of two mixed states")]
pub struct Cli {
    /// Run sweep points and oracle restarts on a thread pool.
    #[arg(long, global = true)]
    pub parallel: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an instance file and report ranks and shape.
    Validate { path: PathBuf },
    /// Print the canonical frame as JSON.
    Canonical { path: PathBuf },
    /// Compute the optimal measurement.
    Solve(SolveArgs),
    /// Tabulate the failure probability over prior ratios.
    Sweep(SweepArgs),
    /// Simulate the optimal measurement.
    Sample(SampleArgs),
    /// Write a random similar-class instance file.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub path: PathBuf,
    /// Also run the numerical oracle and report the gap.
    #[arg(long)]
    pub oracle_check: bool,
    #[arg(long)]
    pub json: bool,
    /// Oracle seed.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub path: PathBuf,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    pub path: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Destination file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a command wants printed, and its exit status.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Self {
            stdout,
            ..Self::default()
        }
    }

    fn fail(code: i32, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        stderr.push('\n');
        Self {
            stderr,
            code,
            ..Self::default()
        }
    }
}

pub fn run(cli: &Cli) -> Output {
    match &cli.command {
        Command::Validate { path } => cmd_validate(path),
        Command::Canonical { path } => cmd_canonical(path),
        Command::Solve(args) => cmd_solve(args, cli.parallel),
        Command::Sweep(args) => cmd_sweep(args, cli.parallel),
        Command::Sample(args) => cmd_sample(args, cli.parallel),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn load(path: &Path) -> Result<DiscriminationInstance, Output> {
    InstanceFile::load(path)
        .and_then(|f| f.resolve())
        .map(|r| r.instance().clone())
        .map_err(|e| Output::fail(EXIT_VALIDATION, format!("invalid: {e}")))
}

fn frame_failure(e: FrameError) -> Output {
    Output::fail(EXIT_SHAPE, e.to_string())
}

fn solve_failure(e: SolveError) -> Output {
    let code = match &e {
        SolveError::Oracle(OracleError::NotConverged { .. }) => EXIT_NOT_CONVERGED,
        SolveError::Oracle(OracleError::NotStandardShape) => EXIT_SHAPE,
        e if e.is_shape_error() => EXIT_SHAPE,
        _ => EXIT_VALIDATION,
    };
    Output::fail(code, e.to_string())
}

pub fn cmd_validate(path: &Path) -> Output {
    let file = match InstanceFile::load(path) {
        Ok(f) => f,
        Err(e) => return Output::fail(EXIT_VALIDATION, format!("invalid: {e}")),
    };
    let inst = match file.resolve() {
        Ok(r) => r.instance().clone(),
        Err(e) => return Output::fail(EXIT_VALIDATION, format!("invalid: {e}")),
    };
    let mut out = String::new();
    let _ = writeln!(out, "dimension: {}", inst.dim());
    let _ = writeln!(out, "rank rho1: {}", inst.rho1.rank());
    let _ = writeln!(out, "rank rho2: {}", inst.rho2.rank());
    let _ = writeln!(out, "joint dimension: {}", inst.joint_dim());
    let _ = writeln!(out, "eta1: {}", inst.eta1);
    match inst.rank() {
        Some(d) => {
            let _ = writeln!(out, "standard shape: yes, d={d}");
        }
        None => {
            let _ = writeln!(out, "standard shape: no");
        }
    }
    Output::ok(out)
}

#[derive(Debug, Serialize)]
pub struct FrameDump {
    pub d: usize,
    pub dim: usize,
    pub overlaps: Vec<f64>,
    pub sines: Vec<f64>,
    pub r_basis: ComplexRows,
    pub s_basis: ComplexRows,
    pub v_basis: ComplexRows,
    pub w_basis: ComplexRows,
    pub r_mat: ComplexRows,
    pub s_mat: ComplexRows,
    pub residuals: FrameResiduals,
}

impl FrameDump {
    pub fn new(frame: &CanonicalFrame) -> Self {
        Self {
            d: frame.rank(),
            dim: frame.dim,
            overlaps: frame.overlaps.clone(),
            sines: frame.sines.clone(),
            r_basis: matrix_to_rows(&frame.r_basis),
            s_basis: matrix_to_rows(&frame.s_basis),
            v_basis: matrix_to_rows(&frame.v_basis),
            w_basis: matrix_to_rows(&frame.w_basis),
            r_mat: matrix_to_rows(&frame.r_mat),
            s_mat: matrix_to_rows(&frame.s_mat),
            residuals: frame.residuals(),
        }
    }
}

pub fn cmd_canonical(path: &Path) -> Output {
    let inst = match load(path) {
        Ok(i) => i,
        Err(o) => return o,
    };
    match build_frame(&inst) {
        Ok(frame) => Output::ok(to_json(&FrameDump::new(&frame))),
        Err(e) => frame_failure(e),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialise");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
pub struct SolveDump {
    pub method: Method,
    pub q_opt: f64,
    pub fidelity: f64,
    pub bound: f64,
    pub region_index: Option<usize>,
    pub saturated: bool,
    pub necessary_interval: (f64, f64),
    pub achieved_interval: Option<(f64, f64)>,
    pub overlaps: Vec<f64>,
    pub alpha: ComplexRows,
    pub beta: ComplexRows,
    pub pi0: ComplexRows,
    pub pi1: ComplexRows,
    pub pi2: ComplexRows,
    pub oracle_q: Option<f64>,
    pub oracle_gap: Option<f64>,
}

fn solve_dump(report: &SolveReport, oracle_q: Option<f64>) -> SolveDump {
    let m = &report.measurement;
    SolveDump {
        method: report.method,
        q_opt: report.q_opt,
        fidelity: report.fidelity.f_general,
        bound: report.bound,
        region_index: report.region_index,
        saturated: report.saturated,
        necessary_interval: report.necessary_interval,
        achieved_interval: report.achieved_interval,
        overlaps: report.frame.overlaps.clone(),
        alpha: matrix_to_rows(&m.alpha),
        beta: matrix_to_rows(&m.beta),
        pi0: matrix_to_rows(&m.pi0),
        pi1: matrix_to_rows(&m.pi1),
        pi2: matrix_to_rows(&m.pi2),
        oracle_q,
        oracle_gap: oracle_q.map(|q| report.q_opt - q),
    }
}

pub fn cmd_solve(args: &SolveArgs, parallel: bool) -> Output {
    let inst = match load(&args.path) {
        Ok(i) => i,
        Err(o) => return o,
    };
    let cfg = OracleConfig {
        seed: args.seed.unwrap_or(0),
        parallel,
        ..OracleConfig::default()
    };
    let opts = SolveOptions {
        oracle: cfg.clone(),
        force_oracle_check: false,
    };
    let report = match solver::solve_with(&inst, &opts) {
        Ok(r) => r,
        Err(e) => return solve_failure(e),
    };
    let oracle_q = if args.oracle_check {
        match oracle::optimize(&inst, &cfg) {
            Ok(r) => Some(r.q_num),
            Err(e) => return solve_failure(e.into()),
        }
    } else {
        None
    };
    let dump = solve_dump(&report, oracle_q);
    if args.json {
        return Output::ok(to_json(&dump));
    }
    let mut out = String::new();
    let method = match dump.method {
        Method::ClosedForm => "closed form",
        Method::Numerical => "numerical",
    };
    let _ = writeln!(out, "method: {method}");
    let _ = writeln!(out, "Q_opt: {:.12}", dump.q_opt);
    let _ = writeln!(out, "F: {:.12}", dump.fidelity);
    let _ = writeln!(out, "bound: {:.12}", dump.bound);
    match dump.region_index {
        Some(k) => {
            let _ = writeln!(out, "region_index: {k}");
        }
        None => {
            let _ = writeln!(out, "region_index: n/a");
        }
    }
    let _ = writeln!(out, "saturated: {}", if dump.saturated { "yes" } else { "no" });
    let (lo, hi) = dump.necessary_interval;
    let _ = writeln!(out, "necessary interval: [{lo:.12}, {hi:.12}]");
    if let (Some(q), Some(gap)) = (dump.oracle_q, dump.oracle_gap) {
        let _ = writeln!(out, "Q_oracle: {q:.12}");
        let _ = writeln!(out, "oracle gap: {gap:.3e}");
    }
    Output::ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub sqrt_eta_ratio: f64,
    pub q_opt: f64,
    pub region_index: usize,
    pub saturated: bool,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// Sorted distinct thresholds `C_k sqrt(r_k/s_k)` and `sqrt(r_k/s_k)/C_k`.
    pub breakpoints: Vec<f64>,
    pub necessary_interval: (f64, f64),
    pub fidelity: f64,
}

impl Sweep {
    pub fn region_count(&self) -> usize {
        let mut seen: Vec<usize> = self.points.iter().map(|p| p.region_index).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sqrt_eta_ratio,Q_opt,region_index\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p.sqrt_eta_ratio, p.q_opt, p.region_index);
        }
        s
    }
}

/// Priors with `sqrt(eta2/eta1) = t`.
pub fn priors_for_ratio(t: f64) -> (f64, f64) {
    let t2 = t * t;
    (1.0 / (1.0 + t2), t2 / (1.0 + t2))
}

/// Region boundaries of a frame, merged when they coincide.
pub fn breakpoints(frame: &CanonicalFrame) -> Vec<f64> {
    let plan = solver::plan_for_priors(frame, 0.5, 0.5);
    let mut b: Vec<f64> = plan
        .entries
        .iter()
        .flat_map(|e| [e.lower, e.upper])
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    b
}

/// Evaluates the closed form at the given ratios, reusing one frame.
pub fn sweep_ratios(
    inst: &DiscriminationInstance,
    ratios: &[f64],
    parallel: bool,
) -> Result<Sweep, SolveError> {
    let frame = build_frame(inst)?;
    let f = fidelity::fidelity_general(&inst.rho1, &inst.rho2)?;
    solver::plan_coefficients(&frame, 0.5, 0.5)?;
    let eval = |&t: &f64| {
        let (eta1, eta2) = priors_for_ratio(t);
        let plan = solver::plan_for_priors(&frame, eta1, eta2);
        SweepPoint {
            sqrt_eta_ratio: t,
            q_opt: solver::failure_probability(&frame, &plan, eta1, eta2),
            region_index: plan.region_index(),
            saturated: plan.is_saturated(),
            bound: 2.0 * (eta1 * eta2).sqrt() * f,
        }
    };
    let points = if parallel {
        ratios.par_iter().map(eval).collect()
    } else {
        ratios.iter().map(eval).collect()
    };
    Ok(Sweep {
        points,
        breakpoints: breakpoints(&frame),
        necessary_interval: fidelity::necessary_interval(inst, f),
        fidelity: f,
    })
}

/// `n` log-spaced ratios covering every breakpoint with a factor-two margin;
/// for the similar class this is `[C_1/2, 2/C_1]`.
pub fn sweep_range(frame: &CanonicalFrame) -> Option<(f64, f64)> {
    let b = breakpoints(frame);
    Some((b.first()? / 2.0, b.last()? * 2.0))
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo * hi).sqrt()],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

pub fn sweep(inst: &DiscriminationInstance, n: usize, parallel: bool) -> Result<Sweep, SolveError> {
    let frame = build_frame(inst)?;
    let (lo, hi) = sweep_range(&frame).ok_or(SolveError::Frame(FrameError::NotStandardShape {
        rank1: inst.rho1.rank(),
        rank2: inst.rho2.rank(),
        joint_dim: inst.joint_dim(),
    }))?;
    sweep_ratios(inst, &log_spaced(lo, hi, n), parallel)
}

pub fn cmd_sweep(args: &SweepArgs, parallel: bool) -> Output {
    let inst = match load(&args.path) {
        Ok(i) => i,
        Err(o) => return o,
    };
    if args.points < 2 {
        return Output::fail(EXIT_VALIDATION, "invalid: --points must be at least 2");
    }
    let sw = match sweep(&inst, args.points, parallel) {
        Ok(s) => s,
        Err(e) => return solve_failure(e),
    };
    let mut notes = String::new();
    for (k, b) in sw.breakpoints.iter().enumerate() {
        let _ = writeln!(notes, "breakpoint {}: {b:.12}", k + 1);
    }
    let _ = writeln!(notes, "regions: {}", sw.region_count());
    let csv = sw.to_csv();
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, csv) {
                return Output::fail(EXIT_VALIDATION, format!("cannot write {}: {e}", path.display()));
            }
            let _ = writeln!(notes, "wrote {} points to {}", sw.points.len(), path.display());
            Output::ok(notes)
        }
        None => Output {
            stdout: csv,
            stderr: notes,
            code: EXIT_OK,
        },
    }
}

pub fn cmd_sample(args: &SampleArgs, parallel: bool) -> Output {
    let inst = match load(&args.path) {
        Ok(i) => i,
        Err(o) => return o,
    };
    let report = match solver::solve(&inst) {
        Ok(r) => r,
        Err(e) => return solve_failure(e),
    };
    let seed = args.seed.unwrap_or(0);
    let res = match sampler::sample_with(&inst, &report.measurement, args.trials, seed, parallel) {
        Ok(r) => r,
        Err(e) => return Output::fail(EXIT_SHAPE, e.to_string()),
    };
    if args.json {
        return Output::ok(to_json(&res));
    }
    let mut out = String::new();
    let _ = writeln!(out, "trials: {}", res.trials);
    let _ = writeln!(out, "seed: {seed}");
    for (k, row) in res.counts.iter().enumerate() {
        let _ = writeln!(out, "outcome {k}: rho1 {} rho2 {}", row[0], row[1]);
    }
    let _ = writeln!(out, "empirical failure: {:.6}", res.empirical_failure);
    let _ = writeln!(out, "analytic failure: {:.6}", res.analytic_failure);
    let _ = writeln!(out, "standard error: {:.6}", res.stderr_failure);
    let _ = writeln!(out, "error events: {}", res.counts[1][1] + res.counts[2][0]);
    let _ = writeln!(
        out,
        "within 5 sigma: {}",
        if res.within_five_sigma { "yes" } else { "no" }
    );
    Output::ok(out)
}

pub fn cmd_gen(args: &GenArgs) -> Output {
    if args.d == 0 {
        return Output::fail(EXIT_VALIDATION, "invalid: --d must be at least 1");
    }
    let seed = args.seed.unwrap_or(0);
    let json = InstanceFile::similar(&random_spec(args.d, seed)).to_json() + "\n";
    match &args.out {
        Some(path) => match std::fs::write(path, json) {
            Ok(()) => Output::ok(format!("wrote {}\n", path.display())),
            Err(e) => Output::fail(EXIT_VALIDATION, format!("cannot write {}: {e}", path.display())),
        },
        None => Output::ok(json),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_spacing_hits_the_ends() {
        let v = log_spaced(0.25, 4.0, 5);
        assert_eq!(v.len(), 5);
        assert!((v[0] - 0.25).abs() < 1e-15 && (v[4] - 4.0).abs() < 1e-14);
        assert!((v[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn priors_invert_the_ratio() {
        let (e1, e2) = priors_for_ratio(0.7);
        assert!(((e2 / e1).sqrt() - 0.7).abs() < 1e-15);
        assert!((e1 + e2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cli_parses_global_parallel() {
        let cli = Cli::try_parse_from(["udisc", "sweep", "x.json", "--points", "9", "--parallel"]).unwrap();
        assert!(cli.parallel);
        assert!(matches!(cli.command, Command::Sweep(SweepArgs { points: 9, .. })));
    }
}
