//! Grid transfer between nested levels, the V-cycle and the full multigrid
//! solver.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boxes::{gather_box, scatter_box};
use crate::element::{gauss_lobatto_points, lagrange_value};
use crate::error::{invalid, Error, Result};
use crate::exec::{colored_loop, Execution};
use crate::krylov::SolveStats;
use crate::mesh::{build_hierarchy, CartesianLevel};
use crate::operator::{compute_rhs, LaplaceOperator, DEFAULT_NNZ_BUDGET};
use crate::real::Real;
use crate::smoother::{LocalSolver, PatchSmoother, PointGaussSeidel, SmootherVariant};
use crate::tensor::{contract, Accumulate, DenseMatrix};
use crate::vector::{norm, DofVector};

/// The `(2k+1)×(k+1)` matrix evaluating the coarse cell basis at the nodes
/// of its two fine children.
pub fn interpolation_matrix_1d(k: usize) -> Result<DenseMatrix<f64>> {
    let nodes = gauss_lobatto_points(k)?;
    Ok(DenseMatrix::from_fn(2 * k + 1, k + 1, |l, j| {
        let xi = if l < k { nodes[l] / 2.0 } else { (1.0 + nodes[l - k]) / 2.0 };
        lagrange_value(&nodes, j, xi)
    }))
}

/// Prolongation from `coarse` to `coarse + 1` and its transpose.
#[derive(Debug, Clone)]
pub struct Transfer<T> {
    coarse: CartesianLevel,
    fine: CartesianLevel,
    interp: DenseMatrix<T>,
    weights: Vec<T>,
    cells: Vec<Vec<[usize; 3]>>,
    exec: Execution,
}

impl<T: Real> Transfer<T> {
    pub fn new(coarse: CartesianLevel, exec: Execution) -> Result<Self> {
        let fine = CartesianLevel::new(coarse.dim, coarse.degree, coarse.level + 1)?;
        let k = coarse.degree;
        let n = 2 * k + 1;
        // fine nodes on the faces between the two children of a coarse cell
        // belong to one cell, those on the coarse cell faces are shared
        let w1 = |l: usize| if l == 0 || l == 2 * k { 0.5 } else { 1.0 };
        let weights = (0..n.pow(coarse.dim as u32))
            .map(|p| {
                let mut rest = p;
                let mut w = 1.0;
                for _ in 0..coarse.dim {
                    w *= w1(rest % n);
                    rest /= n;
                }
                T::from_f64(w)
            })
            .collect();
        Ok(Self {
            coarse,
            fine,
            interp: interpolation_matrix_1d(k)?.cast(),
            weights,
            cells: coarse.cells_by_color(),
            exec,
        })
    }

    pub fn coarse(&self) -> &CartesianLevel {
        &self.coarse
    }

    pub fn fine(&self) -> &CartesianLevel {
        &self.fine
    }

    fn fine_box(&self, cell: &[usize; 3]) -> ([isize; 3], [usize; 3]) {
        let k = self.coarse.degree;
        let mut start = [0isize; 3];
        let mut size = [1usize; 3];
        for a in 0..self.coarse.dim {
            start[a] = (2 * cell[a] * k) as isize - 1;
            size[a] = 2 * k + 1;
        }
        (start, size)
    }

    fn fine_len(&self) -> usize {
        (2 * self.coarse.degree + 1).pow(self.coarse.dim as u32)
    }

    fn coarse_len(&self) -> usize {
        (self.coarse.degree + 1).pow(self.coarse.dim as u32)
    }

    /// Contracts `self.interp` (or its transpose) along every direction,
    /// ping-ponging between `a` (input, then result) and `b`.
    fn contract_all(&self, transpose: bool, mut ext: [usize; 3], a: &mut [T], b: &mut [T]) -> [usize; 3] {
        let rows = if transpose { self.interp.cols() } else { self.interp.rows() };
        for dir in 0..self.coarse.dim {
            let mut next = ext;
            next[dir] = rows;
            contract(dir, &self.interp, transpose, a, ext, b, Accumulate::Replace);
            let len: usize = next.iter().product();
            a[..len].copy_from_slice(&b[..len]);
            ext = next;
        }
        ext
    }

    pub(crate) fn prolongate_slice(&self, xc: &[T], xf: &mut [T]) {
        xf.iter_mut().for_each(|v| *v = T::zero());
        let (cext, fext) = (self.coarse.extents3(), self.fine.extents3());
        let nf = self.fine_len();
        let mut buffer = Vec::new();
        colored_loop(
            self.exec,
            &self.cells,
            nf,
            &mut buffer,
            || (vec![T::zero(); nf], vec![T::zero(); nf]),
            |(a, b), cell, out| {
                let (start, size) = self.coarse.cell_box(cell);
                gather_box(xc, cext, start, size, a);
                self.contract_all(false, size, a, b);
                out.iter_mut().zip(&a[..nf]).zip(&self.weights).for_each(|((o, &v), &w)| *o = v * w);
            },
            |cell, local| {
                let (start, size) = self.fine_box(cell);
                scatter_box(local, fext, start, size, xf, true);
            },
        );
    }

    pub(crate) fn restrict_slice(&self, rf: &[T], rc: &mut [T]) {
        rc.iter_mut().for_each(|v| *v = T::zero());
        let (cext, fext) = (self.coarse.extents3(), self.fine.extents3());
        let (nf, nc) = (self.fine_len(), self.coarse_len());
        let mut buffer = Vec::new();
        colored_loop(
            self.exec,
            &self.cells,
            nc,
            &mut buffer,
            || (vec![T::zero(); nf], vec![T::zero(); nf]),
            |(a, b), cell, out| {
                let (start, size) = self.fine_box(cell);
                gather_box(rf, fext, start, size, a);
                a.iter_mut().zip(&self.weights).for_each(|(v, &w)| *v *= w);
                self.contract_all(true, size, a, b);
                out.copy_from_slice(&a[..nc]);
            },
            |cell, local| {
                let (start, size) = self.coarse.cell_box(cell);
                scatter_box(local, cext, start, size, rc, true);
            },
        );
    }

    pub fn prolongate(&self, x: &DofVector<T>) -> Result<DofVector<T>> {
        x.check_level(&self.coarse)?;
        let mut y = vec![T::zero(); self.fine.total_dofs];
        self.prolongate_slice(x.values(), &mut y);
        DofVector::from_values(self.fine, y)
    }

    pub fn restrict(&self, r: &DofVector<T>) -> Result<DofVector<T>> {
        r.check_level(&self.fine)?;
        let mut y = vec![T::zero(); self.coarse.total_dofs];
        self.restrict_slice(r.values(), &mut y);
        DofVector::from_values(self.coarse, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherKind {
    #[default]
    VertexPatch,
    /// Assembled point Gauss–Seidel above the coarsest level.
    PointGaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultigridConfig {
    pub smoother: SmootherKind,
    pub variant: SmootherVariant,
    pub local_solver: LocalSolver,
    pub pre_smoothing: usize,
    pub post_smoothing: usize,
    pub max_iterations: usize,
    pub execution: Execution,
    pub nnz_budget: usize,
}

impl Default for MultigridConfig {
    fn default() -> Self {
        Self {
            smoother: SmootherKind::VertexPatch,
            variant: SmootherVariant::Fused,
            local_solver: LocalSolver::FastDiagonalization,
            pre_smoothing: 1,
            post_smoothing: 1,
            max_iterations: 100,
            execution: Execution::Parallel,
            nnz_budget: DEFAULT_NNZ_BUDGET,
        }
    }
}

#[derive(Debug, Clone)]
enum LevelSmoother<T> {
    Patch(PatchSmoother<T>),
    PointGs(PointGaussSeidel),
}

impl<T: Real> LevelSmoother<T> {
    fn smooth(&self, x: &mut [T], b: &[T]) {
        match self {
            LevelSmoother::Patch(s) => s.smooth_slice(x, b),
            LevelSmoother::PointGs(s) => s.smooth_slice(x, b),
        }
    }
}

#[derive(Debug, Clone)]
struct LevelOps<T> {
    operator: LaplaceOperator<T>,
    smoother: LevelSmoother<T>,
    /// Transfer from the next coarser level.
    transfer: Option<Transfer<T>>,
}

/// Operators, smoothers and transfers of a level hierarchy `1..=L`.
///
/// The coarsest level always uses one vertex-patch sweep, which is an exact
/// solve there because the level consists of a single patch.
#[derive(Debug, Clone)]
pub struct MultigridContext<T> {
    config: MultigridConfig,
    levels: Vec<CartesianLevel>,
    ops: Vec<LevelOps<T>>,
}

impl<T: Real> MultigridContext<T> {
    pub fn new(dim: usize, degree: usize, finest_level: usize, config: MultigridConfig) -> Result<Self> {
        if config.max_iterations == 0 {
            return Err(invalid("max_iterations must be positive"));
        }
        let levels = build_hierarchy(dim, degree, finest_level)?;
        let exec = config.execution;
        let mut ops = Vec::with_capacity(levels.len());
        for (i, &level) in levels.iter().enumerate() {
            let smoother = if i == 0 {
                let variant = match config.smoother {
                    SmootherKind::VertexPatch => config.variant,
                    SmootherKind::PointGaussSeidel => SmootherVariant::Fused,
                };
                LevelSmoother::Patch(PatchSmoother::new(level, variant, config.local_solver, exec)?)
            } else {
                match config.smoother {
                    SmootherKind::VertexPatch => {
                        LevelSmoother::Patch(PatchSmoother::new(level, config.variant, config.local_solver, exec)?)
                    }
                    SmootherKind::PointGaussSeidel => {
                        LevelSmoother::PointGs(PointGaussSeidel::new(level, config.nnz_budget)?)
                    }
                }
            };
            let transfer = if i == 0 { None } else { Some(Transfer::new(levels[i - 1], exec)?) };
            ops.push(LevelOps { operator: LaplaceOperator::new(level, exec)?, smoother, transfer });
        }
        Ok(Self { config, levels, ops })
    }

    pub fn config(&self) -> &MultigridConfig {
        &self.config
    }

    pub fn levels(&self) -> &[CartesianLevel] {
        &self.levels
    }

    pub fn finest(&self) -> &CartesianLevel {
        self.levels.last().expect("hierarchy is never empty")
    }

    fn index(&self, level: usize) -> Result<usize> {
        if level == 0 || level > self.levels.len() {
            return Err(invalid(format!("level {level} outside 1..={}", self.levels.len())));
        }
        Ok(level - 1)
    }

    pub fn operator(&self, level: usize) -> Result<&LaplaceOperator<T>> {
        Ok(&self.ops[self.index(level)?].operator)
    }

    /// Embeds a vector on `level` into `level + 1`.
    pub fn prolongate(&self, level: usize, x: &DofVector<T>) -> Result<DofVector<T>> {
        let i = self.index(level + 1)?;
        self.ops[i].transfer.as_ref().ok_or_else(|| invalid("no finer level"))?.prolongate(x)
    }

    /// Restricts a vector on `level + 1` to `level`.
    pub fn restrict(&self, level: usize, r: &DofVector<T>) -> Result<DofVector<T>> {
        let i = self.index(level + 1)?;
        self.ops[i].transfer.as_ref().ok_or_else(|| invalid("no finer level"))?.restrict(r)
    }

    pub fn smooth(&self, level: usize, x: &mut DofVector<T>, b: &DofVector<T>) -> Result<()> {
        let i = self.index(level)?;
        x.check_level(&self.levels[i])?;
        b.check_level(&self.levels[i])?;
        self.ops[i].smoother.smooth(x.values_mut(), b.values());
        Ok(())
    }

    /// One V-cycle on `level`, updating `x` in place.
    pub fn v_cycle(&self, level: usize, x: &mut DofVector<T>, b: &DofVector<T>) -> Result<()> {
        let i = self.index(level)?;
        x.check_level(&self.levels[i])?;
        b.check_level(&self.levels[i])?;
        self.v_cycle_slice(i, x.values_mut(), b.values());
        Ok(())
    }

    fn coarse_solve(&self, x: &mut [T], b: &[T]) {
        x.iter_mut().for_each(|v| *v = T::zero());
        self.ops[0].smoother.smooth(x, b);
    }

    pub(crate) fn v_cycle_slice(&self, i: usize, x: &mut [T], b: &[T]) {
        if i == 0 {
            self.coarse_solve(x, b);
            return;
        }
        let ops = &self.ops[i];
        for _ in 0..self.config.pre_smoothing {
            ops.smoother.smooth(x, b);
        }
        let mut r = vec![T::zero(); x.len()];
        ops.operator.residual_slice(b, x, &mut r);
        let transfer = ops.transfer.as_ref().expect("levels above the coarsest have a transfer");
        let nc = self.levels[i - 1].total_dofs;
        let mut rc = vec![T::zero(); nc];
        transfer.restrict_slice(&r, &mut rc);
        let mut ec = vec![T::zero(); nc];
        self.v_cycle_slice(i - 1, &mut ec, &rc);
        transfer.prolongate_slice(&ec, &mut r);
        x.iter_mut().zip(&r).for_each(|(xi, &ei)| *xi += ei);
        for _ in 0..self.config.post_smoothing {
            ops.smoother.smooth(x, b);
        }
    }

    fn check_rhs<U: Real>(&self, rhs: &[DofVector<U>]) -> Result<()> {
        if rhs.len() != self.levels.len() {
            return Err(Error::DimensionMismatch { expected: self.levels.len(), got: rhs.len() });
        }
        rhs.iter().zip(&self.levels).try_for_each(|(b, l)| b.check_level(l))
    }

    /// Nested iteration from the coarsest level: coarse solve, then one
    /// V-cycle on each finer level starting from the prolongated solution.
    fn nested_iteration(&self, rhs: &[DofVector<T>]) -> Vec<T> {
        let mut x = vec![T::zero(); self.levels[0].total_dofs];
        self.coarse_solve(&mut x, rhs[0].values());
        for i in 1..self.levels.len() {
            let mut xf = vec![T::zero(); self.levels[i].total_dofs];
            self.ops[i].transfer.as_ref().unwrap().prolongate_slice(&x, &mut xf);
            self.v_cycle_slice(i, &mut xf, rhs[i].values());
            x = xf;
        }
        x
    }

    /// Full multigrid: nested iteration, then V-cycles on the finest level
    /// until `‖b − A x‖ ≤ tol·‖b‖`. `rhs` holds one right-hand side per
    /// level, coarsest first; `iterations` counts the V-cycles after the
    /// nested iteration.
    pub fn full_multigrid(&self, rhs: &[DofVector<T>], tol: f64) -> Result<(DofVector<T>, SolveStats)> {
        check_tol(tol)?;
        self.check_rhs(rhs)?;
        let start = Instant::now();
        let last = self.levels.len() - 1;
        let b = rhs[last].values();
        let mut x = self.nested_iteration(rhs);
        let mut r = vec![T::zero(); x.len()];
        let apply_residual = |x: &[T], r: &mut [T]| {
            self.ops[last].operator.residual_slice(b, x, r);
            norm(r)
        };
        let stats = stationary_loop(b.iter().map(|v| v.as_f64()), self.config.max_iterations, tol, start, |_| {
            self.v_cycle_slice(last, &mut x, b);
            Ok(apply_residual(&x, &mut r))
        })?;
        Ok((DofVector::from_values(self.levels[last], x)?, stats))
    }
}

impl MultigridContext<f32> {
    /// Full multigrid with single-precision V-cycles as an iterative
    /// refinement of a double-precision iterate: the residual, its norm and
    /// the solution update are computed in `f64`.
    pub fn mixed_full_multigrid(&self, rhs: &[DofVector<f64>], tol: f64) -> Result<(DofVector<f64>, SolveStats)> {
        check_tol(tol)?;
        self.check_rhs(rhs)?;
        let start = Instant::now();
        let last = self.levels.len() - 1;
        let finest = self.levels[last];
        let rhs32: Vec<DofVector<f32>> = rhs.iter().map(|b| b.cast()).collect();
        if let Some(b) = rhs32.iter().find(|b| b.values().iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("right-hand side on {} overflows f32", b.level())));
        }
        let mut x: Vec<f64> = self.nested_iteration(&rhs32).iter().map(|&v| v as f64).collect();
        let op64 = LaplaceOperator::<f64>::new(finest, self.config.execution)?;
        let b = rhs[last].values();
        let mut r = vec![0.0; x.len()];
        let mut r32 = vec![0.0f32; x.len()];
        let mut e32 = vec![0.0f32; x.len()];
        op64.residual_slice(b, &x, &mut r);
        let stats = stationary_loop(b.iter().copied(), self.config.max_iterations, tol, start, |_| {
            for (d, &s) in r32.iter_mut().zip(&r) {
                *d = s as f32;
            }
            if r32.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("residual overflows f32".into()));
            }
            e32.iter_mut().for_each(|v| *v = 0.0);
            self.v_cycle_slice(last, &mut e32, &r32);
            x.iter_mut().zip(&e32).for_each(|(xi, &e)| *xi += e as f64);
            op64.residual_slice(b, &x, &mut r);
            Ok(norm(&r))
        })?;
        Ok((DofVector::from_values(finest, x)?, stats))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// The while loop of full multigrid: `step` performs one iteration and
/// returns the new residual norm.
fn stationary_loop(
    b: impl Iterator<Item = f64>,
    max_iterations: usize,
    tol: f64,
    start: Instant,
    mut step: impl FnMut(usize) -> Result<f64>,
) -> Result<SolveStats> {
    let b_norm = b.map(|v| v * v).sum::<f64>().sqrt();
    let mut history = vec![b_norm];
    let mut delta = b_norm;
    let mut iterations = 0;
    while delta > tol * b_norm {
        if iterations == max_iterations || !delta.is_finite() {
            return Err(Error::Diverged {
                iterations,
                relative_residual: delta / b_norm,
                residual_history: history,
            });
        }
        delta = step(iterations)?;
        iterations += 1;
        history.push(delta);
    }
    Ok(SolveStats {
        iterations,
        relative_residual: if b_norm > 0.0 { delta / b_norm } else { 0.0 },
        residual_history: history,
        l2_error: None,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Right-hand sides `∫ f φ_i` on every level of a hierarchy.
pub fn rhs_hierarchy<T: Real, F>(levels: &[CartesianLevel], f: F) -> Result<Vec<DofVector<T>>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    levels.iter().map(|l| compute_rhs(l, &f)).collect()
}

/// Solves with full multigrid in `f64` on levels `1..=finest_level`.
pub fn solve_fmg<F>(
    dim: usize,
    degree: usize,
    finest_level: usize,
    f: F,
    tol: f64,
    config: MultigridConfig,
) -> Result<(DofVector<f64>, SolveStats)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let ctx = MultigridContext::<f64>::new(dim, degree, finest_level, config)?;
    let rhs = rhs_hierarchy(ctx.levels(), f)?;
    ctx.full_multigrid(&rhs, tol)
}
