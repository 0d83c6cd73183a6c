use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use patchmg::banksim::{self, BankConfig, ConflictReport, Hardware, Indexing, KernelKind, Stage};
use patchmg::driver::{
    self, BenchConfig, BenchReport, PrecisionMode, Preset, PresetReport, SolveConfig, SolveReport, SolverKind,
    SCHEMA_VERSION,
};
use patchmg::verify::{self, VerifyOptions, VerifyReport};
use patchmg::{Error, LocalSolver, RhsKind, SmootherKind, SmootherVariant};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "patchmg", version, about = "Matrix-free multigrid with vertex-patch smoothers")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Report format.
    #[arg(long, value_enum, default_value_t = Output::Table, global = true)]
    output: Output,

    /// Worker threads for the patch and cell loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Zero every timing so that repeated runs print identical reports.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Seed for the random vectors of the verification suites.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Output {
    Table,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the Poisson problem, or reproduce one of the iteration tables.
    Solve(SolveArgs),
    /// Run the oracle suites.
    Verify(VerifyArgs),
    /// Measure operator and smoother throughput.
    Bench(BenchArgs),
    /// Simulate shared-memory bank conflicts of the contraction kernels.
    Banksim(BanksimArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    /// Finest level; for presets, the largest level of the slice.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value = "one", value_parser = parse::<RhsKind>)]
    rhs: RhsKind,
    #[arg(long, default_value = "fmg", value_parser = parse::<SolverKind>)]
    solver: SolverKind,
    #[arg(long, value_enum, default_value_t = SmootherArg::Patch)]
    smoother: SmootherArg,
    #[arg(long, default_value = "fused", value_parser = parse::<SmootherVariant>)]
    variant: SmootherVariant,
    #[arg(long, value_enum, default_value_t = LocalSolverArg::Fastdiag)]
    local_solver: LocalSolverArg,
    #[arg(long, default_value = "f64", value_parser = parse::<PrecisionMode>)]
    precision: PrecisionMode,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 30)]
    restart: usize,
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
    /// Nonzero budget of the assembled matrix used by point Gauss–Seidel.
    #[arg(long)]
    nnz_budget: Option<usize>,
    #[arg(long, value_parser = parse::<Preset>)]
    preset: Option<Preset>,
    /// Lift the desk-scale level caps (2D: 10, 3D: 6).
    #[arg(long)]
    allow_large: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SmootherArg {
    Patch,
    Gs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum LocalSolverArg {
    Fastdiag,
    Dense,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Run only this module's suite.
    #[arg(long)]
    module: Option<String>,
    /// Test hook: flip the sign of the patch interface blocks.
    #[arg(long)]
    inject_interface_sign_error: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![4, 5, 6])]
    levels: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long)]
    allow_large: bool,
}

#[derive(Args, Debug)]
struct BanksimArgs {
    #[arg(long, default_value = "cf", value_parser = parse::<KernelKind>)]
    kernel: KernelKind,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 8)]
    word_bytes: usize,
    /// One stage; both when omitted.
    #[arg(long, value_parser = parse::<Stage>)]
    stage: Option<Stage>,
    /// One direction; all when omitted.
    #[arg(long)]
    dir: Option<usize>,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value = "linear", value_parser = parse::<Indexing>)]
    indexing: Indexing,
    /// Fail unless every simulated access is conflict free.
    #[arg(long)]
    assert_cf: bool,
    /// Add the on-chip roofline estimate of one smoothing step.
    #[arg(long)]
    roofline: bool,
    #[arg(long, default_value_t = Hardware::A100.sms)]
    sms: usize,
    #[arg(long, default_value_t = Hardware::A100.banks)]
    banks: usize,
    /// Clock in GHz.
    #[arg(long, default_value_t = Hardware::A100.clock_ghz)]
    clock: f64,
    /// Smoother variant whose traffic enters the roofline.
    #[arg(long, default_value = "fused", value_parser = parse::<SmootherVariant>)]
    variant: SmootherVariant,
    /// Print every access group, not only the totals.
    #[arg(long)]
    detail: bool,
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: Option<Error>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Diverged { .. } | Error::NonFinite(_) => EXIT_DIVERGED,
            Error::InvalidArgument(_) | Error::Unsupported(_) | Error::BudgetExceeded { .. } => EXIT_INVALID,
            _ => EXIT_CHECK_FAILED,
        };
        Failure { code, error: Some(e) }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_INVALID);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(e) = f.error {
                report_error(&cli, &e);
            }
            ExitCode::from(f.code)
        }
    }
}

fn report_error(cli: &Cli, e: &Error) {
    if cli.output == Output::Json {
        #[derive(Serialize)]
        struct ErrorReport<'a> {
            schema_version: u32,
            error: String,
            iterations: Option<usize>,
            relative_residual: Option<f64>,
            residual_history: Option<&'a [f64]>,
        }
        let (iterations, relative_residual, residual_history) = match e {
            Error::Diverged { iterations, relative_residual, residual_history } => {
                (Some(*iterations), relative_residual.is_finite().then_some(*relative_residual), Some(&residual_history[..]))
            }
            _ => (None, None, None),
        };
        let r = ErrorReport { schema_version: SCHEMA_VERSION, error: e.to_string(), iterations, relative_residual, residual_history };
        println!("{}", serde_json::to_string_pretty(&r).expect("error report serializes"));
    }
    eprintln!("error: {e}");
}

fn emit<T: Serialize>(cli: &Cli, report: &T, table: impl FnOnce() -> String) {
    match cli.output {
        Output::Json => println!("{}", serde_json::to_string_pretty(report).expect("reports serialize")),
        Output::Table => print!("{}", table()),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Solve(a) => solve(cli, a),
        Command::Verify(a) => {
            let opts = VerifyOptions {
                module: a.module.clone(),
                inject_interface_sign_error: a.inject_interface_sign_error,
                seed: cli.seed,
            };
            let report = verify::verify(&opts)?;
            emit(cli, &report, || verify_table(&report));
            if report.passed {
                Ok(())
            } else {
                Err(Failure { code: EXIT_CHECK_FAILED, error: None })
            }
        }
        Command::Bench(a) => {
            let cfg = BenchConfig {
                dim: a.dim,
                degree: a.degree,
                levels: a.levels.clone(),
                repetitions: a.repetitions,
                deterministic: cli.deterministic,
                allow_large: a.allow_large,
            };
            let report = driver::bench(&cfg)?;
            emit(cli, &report, || bench_table(&report));
            Ok(())
        }
        Command::Banksim(a) => banksim_cmd(cli, a),
    }
}

fn solve(cli: &Cli, a: &SolveArgs) -> Result<(), Failure> {
    if let Some(preset) = a.preset {
        let report = driver::run_preset(preset, a.levels, cli.deterministic)?;
        emit(cli, &report, || preset_table(&report));
        return if report.passed { Ok(()) } else { Err(Failure { code: EXIT_CHECK_FAILED, error: None }) };
    }
    let defaults = SolveConfig::default();
    let cfg = SolveConfig {
        dim: a.dim,
        degree: a.degree,
        levels: a.levels.unwrap_or(defaults.levels),
        rhs: a.rhs,
        solver: a.solver,
        smoother: match a.smoother {
            SmootherArg::Patch => SmootherKind::VertexPatch,
            SmootherArg::Gs => SmootherKind::PointGaussSeidel,
        },
        variant: a.variant,
        local_solver: match a.local_solver {
            LocalSolverArg::Fastdiag => LocalSolver::FastDiagonalization,
            LocalSolverArg::Dense => LocalSolver::DenseInverse,
        },
        precision: a.precision,
        tol: a.tol,
        restart: a.restart,
        max_iterations: a.max_iterations,
        nnz_budget: a.nnz_budget.unwrap_or(defaults.nnz_budget),
        deterministic: cli.deterministic,
        allow_large: a.allow_large,
    };
    let report = driver::solve(&cfg)?;
    emit(cli, &report, || solve_table(&report));
    Ok(())
}

#[derive(Serialize)]
struct RooflineReport {
    sms: usize,
    banks: usize,
    word_bytes: usize,
    clock_ghz: f64,
    bandwidth_tb_per_s: f64,
    variant: SmootherVariant,
    dim: usize,
    degree: usize,
    flops: f64,
    bytes_read: f64,
    bytes_written: f64,
    intensity: f64,
    bound_tflop_per_s: f64,
}

#[derive(Serialize)]
struct BanksimReport {
    schema_version: u32,
    total_excess: usize,
    reports: Vec<ConflictReport>,
    roofline: Option<RooflineReport>,
}

fn banksim_cmd(cli: &Cli, a: &BanksimArgs) -> Result<(), Failure> {
    let cfg = BankConfig { banks: a.banks, word_bytes: a.word_bytes, ..BankConfig::default() };
    cfg.validate()?;
    let stages = match a.stage {
        Some(s) => vec![s],
        None => vec![Stage::Residual, Stage::Solver],
    };
    let dirs: Vec<usize> = match a.dir {
        Some(d) => vec![d],
        None => (0..a.dim).collect(),
    };
    let mut reports = Vec::new();
    for &stage in &stages {
        for &dir in &dirs {
            reports.push(banksim::simulate(a.kernel, stage, a.dim, dir, a.degree, &cfg, a.indexing)?);
        }
    }
    let roofline = if a.roofline {
        let hw = Hardware { sms: a.sms, banks: a.banks, word_bytes: cfg.bank_width_bytes, clock_ghz: a.clock };
        let (f, r, w) = banksim::shared_traffic_model(a.variant, a.degree, a.dim, a.word_bytes)?;
        let bound = banksim::onchip_roofline(f, r, w, &hw)?;
        Some(RooflineReport {
            sms: hw.sms,
            banks: hw.banks,
            word_bytes: hw.word_bytes,
            clock_ghz: hw.clock_ghz,
            bandwidth_tb_per_s: hw.bandwidth_tb_per_s(),
            variant: a.variant,
            dim: a.dim,
            degree: a.degree,
            flops: f,
            bytes_read: r,
            bytes_written: w,
            intensity: f / (r + w),
            bound_tflop_per_s: bound / 1e12,
        })
    } else {
        None
    };
    let report = BanksimReport {
        schema_version: SCHEMA_VERSION,
        total_excess: reports.iter().map(|r| r.total_excess).sum(),
        reports,
        roofline,
    };
    emit(cli, &report, || banksim_table(&report, a.detail));
    if a.assert_cf && report.total_excess > 0 {
        eprintln!("bank conflicts found: total excess {}", report.total_excess);
        return Err(Failure { code: EXIT_CHECK_FAILED, error: None });
    }
    Ok(())
}

fn solve_table(r: &SolveReport) -> String {
    let c = &r.config;
    let mut s = String::new();
    let _ = writeln!(s, "{}D Q{} level {}  N = {}", c.dim, c.degree, c.levels, r.dofs);
    let _ = writeln!(s, "solver {} ({}), smoother {:?}/{}, rhs {}", c.solver, c.precision, c.smoother, c.variant, c.rhs);
    for (i, v) in r.residual_history.iter().enumerate() {
        let _ = writeln!(s, "  {i:>3}  {v:.3e}");
    }
    let _ = writeln!(s, "iterations {}  relative residual {:.3e}", r.iterations, r.relative_residual);
    if let Some(e) = r.l2_error {
        let _ = writeln!(s, "L2 error {e:.3e}");
    }
    let _ = writeln!(s, "wall time {:.3} s", r.wall_time);
    s
}

fn preset_table(r: &PresetReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20} {:>3} {:>3} {:>3} {:>5} {:>9} {:>10}  result", "case", "d", "k", "L", "iters", "expected", "L2 error");
    for row in &r.rows {
        let it = row.iterations.map_or("-".to_string(), |v| v.to_string());
        let exp = match row.expected {
            Some(e) if row.tolerance > 0 => format!("{e}±{}", row.tolerance),
            Some(e) => e.to_string(),
            None => "-".into(),
        };
        let l2 = row.l2_error.map_or("-".to_string(), |v| format!("{v:.3e}"));
        let _ = writeln!(
            s,
            "{:<20} {:>3} {:>3} {:>3} {:>5} {:>9} {:>10}  {}{}",
            row.label,
            row.dim,
            row.degree,
            row.level,
            it,
            exp,
            l2,
            if row.passed { "PASS" } else { "FAIL" },
            row.note.as_ref().map_or(String::new(), |n| format!("  ({n})"))
        );
    }
    let _ = writeln!(s, "{} {}", r.preset, if r.passed { "PASS" } else { "FAIL" });
    s
}

fn verify_table(r: &VerifyReport) -> String {
    let mut s = String::new();
    for c in &r.checks {
        let _ = writeln!(
            s,
            "{} {:<10} {:<55} {:>11.3e} <= {:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.module,
            c.name,
            c.measured,
            c.tolerance
        );
    }
    let failed = r.checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(s, "{} checks, {failed} failed", r.checks.len());
    s
}

fn bench_table(r: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}D Q{}", r.config.dim, r.config.degree);
    let _ = writeln!(s, "{:>3} {:>10}  {:<8} {:<9} {:>12}", "L", "N", "op", "variant", "DoF/s");
    for e in &r.entries {
        let v = e.variant.map_or("-".to_string(), |v| v.to_string());
        let _ = writeln!(s, "{:>3} {:>10}  {:<8} {:<9} {:>12.3e}", e.level, e.dofs, e.operation, v, e.dofs_per_second);
    }
    s
}

fn banksim_table(r: &BanksimReport, detail: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<6} {:<9} {:<7} {:>3} {:>2} {:>5} {:>13} {:>14} {:>10}", "kernel", "stage", "index", "k", "dir", "word", "max wavefront", "total excess", "divergent");
    for c in &r.reports {
        let _ = writeln!(
            s,
            "{:<6} {:<9} {:<7} {:>3} {:>2} {:>5} {:>13} {:>14} {:>10}",
            c.kernel.to_string(),
            c.stage.to_string(),
            c.indexing.to_string(),
            c.k,
            c.dir,
            c.word_bytes,
            c.max_wavefronts,
            c.total_excess,
            c.divergent_groups
        );
        if detail {
            for i in c.instructions.iter().filter(|i| i.excess > 0) {
                let _ = writeln!(s, "    instr {:>4} {:<11} group {:>3}: {} wavefronts", i.instruction, i.access.to_string(), i.group, i.wavefronts);
            }
        }
    }
    let _ = writeln!(s, "total excess {}", r.total_excess);
    if let Some(f) = &r.roofline {
        let _ = writeln!(s, "on-chip bandwidth {:.3} TB/s ({} SMs x {} banks x {} B x {} GHz)", f.bandwidth_tb_per_s, f.sms, f.banks, f.word_bytes, f.clock_ghz);
        let _ = writeln!(
            s,
            "{} Q{} {}D: {:.0} flop, {:.0} B read, {:.0} B written, intensity {:.3} flop/B, bound {:.2} Tflop/s",
            f.variant, f.degree, f.dim, f.flops, f.bytes_read, f.bytes_written, f.intensity, f.bound_tflop_per_s
        );
    }
    s
}
