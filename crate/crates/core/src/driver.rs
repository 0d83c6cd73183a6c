//! Run configurations and machine-readable reports for the solver, the
//! table presets and the throughput benchmark.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::krylov::{gmres, vcycle_precondition, GmresOptions, SolveStats};
use crate::mesh::CartesianLevel;
use crate::multigrid::{rhs_hierarchy, MultigridConfig, MultigridContext, SmootherKind};
use crate::operator::{compute_rhs, l2_error, LaplaceOperator, DEFAULT_NNZ_BUDGET};
use crate::problem::RhsKind;
use crate::smoother::{LocalSolver, PatchSmoother, SmootherVariant};
use crate::vector::DofVector;

/// Bumped whenever a report field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

/// Default level caps that keep a run within desk-scale memory and time.
pub const MAX_LEVELS_2D: usize = 10;
pub const MAX_LEVELS_3D: usize = 6;
pub const MAX_DEGREE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Fmg,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    #[default]
    F64,
    /// `f64` outer iteration around `f32` V-cycles.
    Mixed,
}

macro_rules! lower_names {
    ($ty:ident, $what:literal, $($variant:ident => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(invalid(format!(concat!("unknown ", $what, " '{}'"), other))),
                }
            }
        }
    };
}

lower_names!(SolverKind, "solver", Fmg => "fmg", Gmres => "gmres");
lower_names!(PrecisionMode, "precision", F64 => "f64", Mixed => "mixed");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub dim: usize,
    pub degree: usize,
    /// Finest level `L`.
    pub levels: usize,
    pub rhs: RhsKind,
    pub solver: SolverKind,
    pub smoother: SmootherKind,
    pub variant: SmootherVariant,
    pub local_solver: LocalSolver,
    pub precision: PrecisionMode,
    pub tol: f64,
    pub restart: usize,
    pub max_iterations: usize,
    pub nnz_budget: usize,
    /// Zero all timings so that reports are reproducible byte for byte.
    pub deterministic: bool,
    /// Lift the desk-scale level caps.
    pub allow_large: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            degree: 3,
            levels: 4,
            rhs: RhsKind::One,
            solver: SolverKind::Fmg,
            smoother: SmootherKind::VertexPatch,
            variant: SmootherVariant::Fused,
            local_solver: LocalSolver::FastDiagonalization,
            precision: PrecisionMode::F64,
            tol: 1e-9,
            restart: 30,
            max_iterations: 100,
            nnz_budget: DEFAULT_NNZ_BUDGET,
            deterministic: false,
            allow_large: false,
        }
    }
}

/// Checks a problem size against the module preconditions and the level
/// caps without allocating anything.
pub fn validate_size(dim: usize, degree: usize, levels: usize, allow_large: bool) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(invalid(format!("dimension must be 2 or 3, got {dim}")));
    }
    if degree == 0 || degree > MAX_DEGREE {
        return Err(invalid(format!("degree must be in 1..={MAX_DEGREE}, got {degree}")));
    }
    if levels == 0 {
        return Err(invalid("the finest level must be at least 1"));
    }
    let cap = if dim == 2 { MAX_LEVELS_2D } else { MAX_LEVELS_3D };
    if levels > cap && !allow_large {
        return Err(invalid(format!("{dim}D runs are capped at {cap} levels; pass the override flag to go further")));
    }
    if levels >= usize::BITS as usize / dim {
        return Err(invalid(format!("level {levels} overflows the index range")));
    }
    Ok(())
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        validate_size(self.dim, self.degree, self.levels, self.allow_large)?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.restart == 0 || self.max_iterations == 0 {
            return Err(invalid("restart and max_iterations must be positive"));
        }
        if self.variant == SmootherVariant::Boundary && self.local_solver == LocalSolver::DenseInverse {
            return Err(Error::Unsupported("the boundary variant needs fast diagonalization".into()));
        }
        Ok(())
    }

    fn multigrid(&self) -> MultigridConfig {
        MultigridConfig {
            smoother: self.smoother,
            variant: self.variant,
            local_solver: self.local_solver,
            max_iterations: self.max_iterations,
            nnz_budget: self.nnz_budget,
            ..MultigridConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub config: SolveConfig,
    pub dofs: usize,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub relative_residual: f64,
    pub l2_error: Option<f64>,
    pub wall_time: f64,
}

pub fn solve(cfg: &SolveConfig) -> Result<SolveReport> {
    solve_with_solution(cfg).map(|(report, _)| report)
}

/// Like [`solve`], also handing back the finest-level solution.
pub fn solve_with_solution(cfg: &SolveConfig) -> Result<(SolveReport, DofVector<f64>)> {
    cfg.validate()?;
    // No clock is read in deterministic mode, which also keeps the solver
    // usable on targets without `Instant`.
    let start = (!cfg.deterministic).then(Instant::now);
    let mg = cfg.multigrid();
    let source = |x: &[f64]| cfg.rhs.source(x);
    let (x, stats) = match (cfg.solver, cfg.precision) {
        (SolverKind::Fmg, PrecisionMode::F64) => {
            let ctx = MultigridContext::<f64>::new(cfg.dim, cfg.degree, cfg.levels, mg)?;
            let rhs = rhs_hierarchy(ctx.levels(), source)?;
            ctx.full_multigrid(&rhs, cfg.tol)?
        }
        (SolverKind::Fmg, PrecisionMode::Mixed) => {
            let ctx = MultigridContext::<f32>::new(cfg.dim, cfg.degree, cfg.levels, mg)?;
            let rhs = rhs_hierarchy::<f64, _>(ctx.levels(), source)?;
            ctx.mixed_full_multigrid(&rhs, cfg.tol)?
        }
        (SolverKind::Gmres, PrecisionMode::F64) => {
            let ctx = MultigridContext::<f64>::new(cfg.dim, cfg.degree, cfg.levels, mg)?;
            gmres_solve(cfg, &ctx, source)?
        }
        (SolverKind::Gmres, PrecisionMode::Mixed) => {
            let ctx = MultigridContext::<f32>::new(cfg.dim, cfg.degree, cfg.levels, mg)?;
            gmres_solve(cfg, &ctx, source)?
        }
    };
    let finest = *x.level();
    let l2 = match cfg.rhs.exact_solution() {
        Some(u) => Some(l2_error(&finest, &x, u)?),
        None => None,
    };
    let wall_time = start.map_or(0.0, |t| t.elapsed().as_secs_f64());
    let report = SolveReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        dofs: finest.total_dofs,
        iterations: stats.iterations,
        residual_history: stats.residual_history,
        relative_residual: stats.relative_residual,
        l2_error: l2,
        wall_time,
    };
    Ok((report, x))
}

/// GMRES in `f64` on the finest level, preconditioned by one V-cycle of
/// `ctx` in its own precision.
fn gmres_solve<T: crate::real::Real>(
    cfg: &SolveConfig,
    ctx: &MultigridContext<T>,
    source: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<(DofVector<f64>, SolveStats)> {
    let finest = *ctx.finest();
    let op = LaplaceOperator::<f64>::new(finest, Execution::Parallel)?;
    let b = compute_rhs::<f64, _>(&finest, source)?;
    let opts = GmresOptions { tol: cfg.tol, restart: cfg.restart, max_iterations: cfg.max_iterations };
    let (x, stats) = gmres(
        |x, y| {
            op.apply_slice(x, y);
            Ok(())
        },
        |r, z| vcycle_precondition(ctx, r, z),
        b.values(),
        opts,
    )?;
    Ok((DofVector::from_values(finest, x)?, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 2D full multigrid iteration counts, `f ≡ 1`.
    Table1,
    /// 3D full multigrid iteration counts, `f ≡ 1`.
    Table2,
    /// 3D point Gauss–Seidel against the vertex-patch smoother.
    Table3,
    /// 3D GMRES with `f64` and mixed-precision V-cycles.
    Table4,
}

lower_names!(Preset, "preset", Table1 => "table1", Table2 => "table2", Table3 => "table3", Table4 => "table4");

/// Published iteration counts at `L = 4`.
pub const TABLE1_COUNTS: [usize; 6] = [9, 5, 3, 3, 3, 2];
pub const TABLE2_COUNTS: [usize; 4] = [6, 5, 3, 3];
pub const TABLE3_GS_COUNTS: [usize; 3] = [6, 8, 11];
pub const TABLE3_PATCH_COUNTS: [usize; 3] = [6, 5, 3];

/// Assembled-matrix budget of the smoother comparison; 3D `Q3` on level 5
/// needs about 10⁸ nonzeros.
pub const GS_NNZ_BUDGET: usize = 256_000_000;

impl Preset {
    /// Finest level of the desk-scale slice when none is given.
    pub fn default_levels(self) -> usize {
        match self {
            Preset::Table1 => 6,
            Preset::Table3 => 5,
            Preset::Table2 | Preset::Table4 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetRow {
    pub label: String,
    pub dim: usize,
    pub degree: usize,
    pub level: usize,
    pub iterations: Option<usize>,
    pub expected: Option<usize>,
    /// Allowed deviation from `expected`.
    pub tolerance: usize,
    pub l2_error: Option<f64>,
    pub passed: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetReport {
    pub schema_version: u32,
    pub preset: Preset,
    pub rows: Vec<PresetRow>,
    pub passed: bool,
    pub wall_time: f64,
}

fn count_row(label: &str, cfg: &SolveConfig, expected: Option<usize>, tolerance: usize) -> Result<PresetRow> {
    let mut row = PresetRow {
        label: label.to_string(),
        dim: cfg.dim,
        degree: cfg.degree,
        level: cfg.levels,
        iterations: None,
        expected,
        tolerance,
        l2_error: None,
        passed: false,
        note: None,
    };
    match solve(cfg) {
        Ok(r) => {
            row.iterations = Some(r.iterations);
            row.l2_error = r.l2_error;
            row.passed = expected.map_or(true, |e| r.iterations.abs_diff(e) <= tolerance);
        }
        Err(e @ (Error::Diverged { .. } | Error::BudgetExceeded { .. })) => row.note = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// Runs a desk-scale slice of one published table up to `levels` and marks
/// each entry against the published value.
pub fn run_preset(preset: Preset, levels: Option<usize>, deterministic: bool) -> Result<PresetReport> {
    let start = Instant::now();
    let top = levels.unwrap_or(preset.default_levels());
    let base = SolveConfig { deterministic, ..SolveConfig::default() };
    let mut rows = Vec::new();
    match preset {
        Preset::Table1 | Preset::Table2 => {
            let (dim, counts, first): (usize, &[usize], usize) =
                if preset == Preset::Table1 { (2, &TABLE1_COUNTS, 4) } else { (3, &TABLE2_COUNTS, 3) };
            validate_size(dim, 1, top, false)?;
            for level in first..=top {
                for (i, &count) in counts.iter().enumerate() {
                    let cfg = SolveConfig { dim, degree: i + 1, levels: level, ..base.clone() };
                    // exact at the tabulated level, one step of slack elsewhere
                    let exact = level == 4 || (dim == 3 && level > 4);
                    rows.push(count_row("vertex patch", &cfg, Some(count), usize::from(!exact))?);
                }
            }
        }
        Preset::Table3 => {
            validate_size(3, 1, top, false)?;
            for (i, (&gs, &vp)) in TABLE3_GS_COUNTS.iter().zip(&TABLE3_PATCH_COUNTS).enumerate() {
                let cfg = SolveConfig { dim: 3, degree: i + 1, levels: top, ..base.clone() };
                let gs_cfg = SolveConfig { smoother: SmootherKind::PointGaussSeidel, nnz_budget: GS_NNZ_BUDGET, ..cfg.clone() };
                rows.push(count_row("point gauss-seidel", &gs_cfg, Some(gs), 1)?);
                rows.push(count_row("vertex patch", &cfg, Some(vp), 0)?);
            }
        }
        Preset::Table4 => {
            validate_size(3, 1, top, false)?;
            for degree in [1, 3] {
                let cfg = SolveConfig {
                    dim: 3,
                    degree,
                    levels: top,
                    rhs: RhsKind::SinProd,
                    solver: SolverKind::Gmres,
                    ..base.clone()
                };
                let mut pair = [
                    count_row("f64", &cfg, None, 0)?,
                    count_row("mixed", &SolveConfig { precision: PrecisionMode::Mixed, ..cfg }, None, 0)?,
                ];
                let same = pair[0].iterations.is_some()
                    && pair[0].iterations == pair[1].iterations
                    && matches!((pair[0].l2_error, pair[1].l2_error), (Some(a), Some(b)) if same_digits(a, b, 3));
                for row in &mut pair {
                    row.passed = same;
                }
                rows.extend(pair);
            }
        }
    }
    Ok(PresetReport {
        schema_version: SCHEMA_VERSION,
        preset,
        passed: rows.iter().all(|r| r.passed),
        rows,
        wall_time: if deterministic { 0.0 } else { start.elapsed().as_secs_f64() },
    })
}

/// Whether `a` and `b` agree when rounded to `digits` significant digits.
pub fn same_digits(a: f64, b: f64, digits: usize) -> bool {
    let p = digits.saturating_sub(1);
    format!("{a:.p$e}") == format!("{b:.p$e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub dim: usize,
    pub degree: usize,
    pub levels: Vec<usize>,
    pub repetitions: usize,
    pub deterministic: bool,
    pub allow_large: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { dim: 2, degree: 3, levels: vec![4, 5, 6], repetitions: 3, deterministic: false, allow_large: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub level: usize,
    pub dofs: usize,
    /// `apply` or `smooth`.
    pub operation: String,
    pub variant: Option<SmootherVariant>,
    pub seconds: f64,
    pub dofs_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub config: BenchConfig,
    pub entries: Vec<BenchEntry>,
}

/// Best-of-`repetitions` throughput of the operator apply and of one
/// smoothing step of the separate and fused variants.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.levels.is_empty() || cfg.repetitions == 0 {
        return Err(invalid("bench needs at least one level and one repetition"));
    }
    for &l in &cfg.levels {
        validate_size(cfg.dim, cfg.degree, l, cfg.allow_large)?;
    }
    let mut entries = Vec::new();
    for &l in &cfg.levels {
        let level = CartesianLevel::new(cfg.dim, cfg.degree, l)?;
        let n = level.total_dofs;
        let x = DofVector::<f64>::from_fn(level, |i| i.iter().map(|&v| (v % 7) as f64).sum::<f64>() / 7.0);
        let b = DofVector::<f64>::from_fn(level, |_| 1.0);
        let time = |run: &mut dyn FnMut()| {
            let mut best = f64::INFINITY;
            for _ in 0..cfg.repetitions {
                let t = Instant::now();
                run();
                best = best.min(t.elapsed().as_secs_f64());
            }
            best
        };
        let op = LaplaceOperator::<f64>::new(level, Execution::Parallel)?;
        let mut y = vec![0.0; n];
        let s = time(&mut || op.apply_slice(x.values(), &mut y));
        entries.push(entry(cfg, l, n, "apply", None, s));
        for variant in [SmootherVariant::Separate, SmootherVariant::Fused] {
            let sm = PatchSmoother::<f64>::new(level, variant, LocalSolver::FastDiagonalization, Execution::Parallel)?;
            let mut xs = x.values().to_vec();
            let s = time(&mut || sm.smooth_slice(&mut xs, b.values()));
            entries.push(entry(cfg, l, n, "smooth", Some(variant), s));
        }
    }
    Ok(BenchReport { schema_version: SCHEMA_VERSION, config: cfg.clone(), entries })
}

fn entry(cfg: &BenchConfig, level: usize, dofs: usize, op: &str, variant: Option<SmootherVariant>, seconds: f64) -> BenchEntry {
    let (seconds, rate) = if cfg.deterministic { (0.0, 0.0) } else { (seconds, dofs as f64 / seconds.max(1e-12)) };
    BenchEntry { level, dofs, operation: op.to_string(), variant, seconds, dofs_per_second: rate }
}
