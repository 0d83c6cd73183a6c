//! Colorized multiplicative vertex-patch smoothing and a point Gauss–Seidel
//! baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fastdiag::{dense_patch_inverse, patch_matrices_1d, FastDiagData, PatchKernels, PatchScratch};
use crate::mesh::CartesianLevel;
use crate::operator::{assemble_sparse, LaplaceOperator};
use crate::patches::{enumerate_patches, Footprint, PatchIndex, PatchSet, ScatterMode};
use crate::real::Real;
use crate::sparse::CsrMatrix;
use crate::tensor::{Accumulate, DenseMatrix};
use crate::vector::DofVector;

/// How the local residuals of one color are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherVariant {
    /// Global residual `b − A x` once per color, then local solves.
    Global,
    /// A residual pass over the color's patches, then a solve pass.
    Separate,
    /// Local residual and solve in one pass per patch.
    Fused,
    /// `x^I ← A_j^{-1}(b^I − A^{IB} x^B)`, reading only the patch boundary.
    Boundary,
}

impl SmootherVariant {
    pub const ALL: [SmootherVariant; 4] =
        [SmootherVariant::Global, SmootherVariant::Separate, SmootherVariant::Fused, SmootherVariant::Boundary];
}

impl fmt::Display for SmootherVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SmootherVariant::Global => "global",
            SmootherVariant::Separate => "separate",
            SmootherVariant::Fused => "fused",
            SmootherVariant::Boundary => "boundary",
        };
        f.write_str(s)
    }
}

impl FromStr for SmootherVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "global" => Ok(SmootherVariant::Global),
            "separate" => Ok(SmootherVariant::Separate),
            "fused" => Ok(SmootherVariant::Fused),
            "boundary" => Ok(SmootherVariant::Boundary),
            other => Err(Error::InvalidArgument(format!("unknown smoother variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalSolver {
    #[default]
    FastDiagonalization,
    /// Stored dense inverse of the interior patch matrix.
    DenseInverse,
}

#[derive(Default)]
struct Scratch<T> {
    u: Vec<T>,
    r: Vec<T>,
    patch: PatchScratch<T>,
}

/// The vertex-patch smoother of one level.
#[derive(Debug, Clone)]
pub struct PatchSmoother<T> {
    level: CartesianLevel,
    patches: PatchSet,
    kernels: PatchKernels<T>,
    dense_inverse: Option<DenseMatrix<T>>,
    variant: SmootherVariant,
    exec: Execution,
    operator: Option<LaplaceOperator<T>>,
}

impl<T: Real> PatchSmoother<T> {
    pub fn new(level: CartesianLevel, variant: SmootherVariant, solver: LocalSolver, exec: Execution) -> Result<Self> {
        if variant == SmootherVariant::Boundary && solver != LocalSolver::FastDiagonalization {
            return Err(Error::Unsupported(
                "the boundary variant needs the exact fast-diagonalization local solver".into(),
            ));
        }
        let pm = patch_matrices_1d(level.degree, level.spacing)?;
        let fd = FastDiagData::new(&pm, level.dim)?;
        let dense_inverse = match solver {
            LocalSolver::FastDiagonalization => None,
            LocalSolver::DenseInverse => Some(dense_patch_inverse(&pm, level.dim)?.cast()),
        };
        let operator = match variant {
            SmootherVariant::Global => Some(LaplaceOperator::new(level, exec)?),
            _ => None,
        };
        Ok(Self {
            level,
            patches: enumerate_patches(&level),
            kernels: PatchKernels::new(&pm, &fd),
            dense_inverse,
            variant,
            exec,
            operator,
        })
    }

    pub fn level(&self) -> &CartesianLevel {
        &self.level
    }

    pub fn variant(&self) -> SmootherVariant {
        self.variant
    }

    #[doc(hidden)]
    pub fn kernels_mut(&mut self) -> &mut PatchKernels<T> {
        &mut self.kernels
    }

    /// One sweep over all colors in ascending order.
    pub fn smooth(&self, x: &mut DofVector<T>, b: &DofVector<T>) -> Result<()> {
        x.check_level(&self.level)?;
        b.check_level(&self.level)?;
        self.smooth_slice(x.values_mut(), b.values());
        Ok(())
    }

    fn solve(&self, r: &[T], v: &mut [T], s: &mut PatchScratch<T>) {
        match &self.dense_inverse {
            None => self.kernels.apply_inverse(r, v, s),
            Some(inv) => {
                let n = inv.rows();
                let data = inv.as_slice();
                for (i, vi) in v[..n].iter_mut().enumerate() {
                    *vi = data[i * n..(i + 1) * n].iter().zip(r).map(|(&a, &b)| a * b).sum();
                }
            }
        }
    }

    fn scratch(&self) -> Scratch<T> {
        let n = self.kernels.closure_len().max(self.kernels.shell().len);
        Scratch { u: vec![T::zero(); n], r: vec![T::zero(); n], patch: PatchScratch::new() }
    }

    /// Local residual `R_j b − Ā_j R̄_j x` into `out`.
    fn local_residual(&self, x: &[T], b: &[T], patch: &PatchIndex, s: &mut Scratch<T>, out: &mut [T]) {
        self.patches.gather_into(x, patch, Footprint::Closure, &mut s.u);
        self.patches.gather_into(b, patch, Footprint::Interior, out);
        self.kernels.apply_operator(&s.u, out, Accumulate::Subtract, &mut s.patch);
    }

    pub(crate) fn smooth_slice(&self, x: &mut [T], b: &[T]) {
        let ni = self.kernels.interior_len();
        let colors = self.patches.colors();
        let total_max = colors.iter().map(Vec::len).max().unwrap_or(0) * ni;
        let mut buffer = vec![T::zero(); total_max];
        let mut global_r = match self.variant {
            SmootherVariant::Global | SmootherVariant::Separate => vec![T::zero(); x.len()],
            _ => Vec::new(),
        };
        let init = || self.scratch();
        for color in colors {
            if color.is_empty() {
                continue;
            }
            let replace = match self.variant {
                SmootherVariant::Fused => {
                    let xr: &[T] = x;
                    self.exec.fill_chunks(color, ni, &mut buffer, init, |s, p, out| {
                        let mut r = std::mem::take(&mut s.r);
                        self.local_residual(xr, b, p, s, &mut r);
                        self.solve(&r, out, &mut s.patch);
                        s.r = r;
                    });
                    false
                }
                SmootherVariant::Separate => {
                    let xr: &[T] = x;
                    self.exec.fill_chunks(color, ni, &mut buffer, init, |s, p, out| {
                        self.local_residual(xr, b, p, s, out);
                    });
                    for (p, local) in color.iter().zip(buffer.chunks(ni)) {
                        self.patches.scatter_interior_unchecked(local, p, &mut global_r, ScatterMode::Replace);
                    }
                    let rr: &[T] = &global_r;
                    self.exec.fill_chunks(color, ni, &mut buffer, init, |s, p, out| {
                        self.patches.gather_into(rr, p, Footprint::Interior, &mut s.r);
                        self.solve(&s.r, out, &mut s.patch);
                    });
                    false
                }
                SmootherVariant::Global => {
                    let op = self.operator.as_ref().expect("global variant keeps its operator");
                    op.residual_slice(b, x, &mut global_r);
                    let rr: &[T] = &global_r;
                    self.exec.fill_chunks(color, ni, &mut buffer, init, |s, p, out| {
                        self.patches.gather_into(rr, p, Footprint::Interior, &mut s.r);
                        self.solve(&s.r, out, &mut s.patch);
                    });
                    false
                }
                SmootherVariant::Boundary => {
                    let xr: &[T] = x;
                    let shell = self.kernels.shell();
                    self.exec.fill_chunks(color, ni, &mut buffer, init, |s, p, out| {
                        self.patches.gather_shell_into(xr, p, shell, &mut s.u);
                        self.patches.gather_into(b, p, Footprint::Interior, &mut s.r);
                        self.kernels.apply_interface(&s.u, &mut s.r, Accumulate::Subtract, &mut s.patch);
                        self.solve(&s.r, out, &mut s.patch);
                    });
                    true
                }
            };
            let mode = if replace { ScatterMode::Replace } else { ScatterMode::Add };
            for (p, local) in color.iter().zip(buffer.chunks(ni)) {
                self.patches.scatter_interior_unchecked(local, p, x, mode);
            }
        }
    }
}

/// Forward lexicographic Gauss–Seidel on the assembled matrix.
#[derive(Debug, Clone)]
pub struct PointGaussSeidel {
    level: CartesianLevel,
    matrix: CsrMatrix,
}

impl PointGaussSeidel {
    pub fn new(level: CartesianLevel, budget: usize) -> Result<Self> {
        Ok(Self { level, matrix: assemble_sparse(&level, budget)? })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub(crate) fn smooth_slice<T: Real>(&self, x: &mut [T], b: &[T]) {
        for i in 0..self.matrix.dim() {
            let mut sum = b[i].as_f64();
            let mut diag = 0.0;
            for (j, v) in self.matrix.row(i) {
                if j == i {
                    diag = v;
                } else {
                    sum -= v * x[j].as_f64();
                }
            }
            x[i] = T::from_f64(sum / diag);
        }
    }

    pub fn smooth<T: Real>(&self, x: &mut DofVector<T>, b: &DofVector<T>) -> Result<()> {
        x.check_level(&self.level)?;
        b.check_level(&self.level)?;
        self.smooth_slice(x.values_mut(), b.values());
        Ok(())
    }
}

/// One Gauss–Seidel sweep with a given assembled matrix.
pub fn point_gauss_seidel(a: &CsrMatrix, x: &mut DofVector<f64>, b: &DofVector<f64>) -> Result<()> {
    a.gauss_seidel_forward(x.values_mut(), b.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{compute_rhs, DEFAULT_NNZ_BUDGET};
    use crate::vector::norm;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(level: CartesianLevel, seed: u64) -> DofVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DofVector::from_fn(level, |_| rng.gen_range(-1.0..1.0))
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        num / b.iter().map(|y| y * y).sum::<f64>().sqrt()
    }

    fn smoothed(l: CartesianLevel, v: SmootherVariant, s: LocalSolver, e: Execution, x: &DofVector<f64>, b: &DofVector<f64>) -> DofVector<f64> {
        let sm = PatchSmoother::new(l, v, s, e).unwrap();
        let mut y = x.clone();
        sm.smooth(&mut y, b).unwrap();
        y
    }

    #[test]
    fn coarsest_level_is_exact() {
        for (d, k) in [(2, 1), (2, 3), (3, 2), (3, 4)] {
            let l = CartesianLevel::new(d, k, 1).unwrap();
            let b: DofVector<f64> = compute_rhs(&l, |_| 1.0).unwrap();
            for v in SmootherVariant::ALL {
                let sm = PatchSmoother::new(l, v, LocalSolver::FastDiagonalization, Execution::Sequential).unwrap();
                let mut x = random(l, 5);
                sm.smooth(&mut x, &b).unwrap();
                let r = LaplaceOperator::new(l, Execution::Sequential).unwrap().residual(&b, &x).unwrap();
                assert!(r.norm() <= 1e-10 * b.norm(), "d={d} k={k} {v}");
            }
        }
    }

    #[test]
    fn variants_agree() {
        for (d, k, lvl) in [(2, 3, 3), (2, 1, 4), (2, 5, 2), (3, 2, 2), (3, 1, 3)] {
            let l = CartesianLevel::new(d, k, lvl).unwrap();
            let x = random(l, 11);
            let b = random(l, 12);
            let reference =
                smoothed(l, SmootherVariant::Fused, LocalSolver::FastDiagonalization, Execution::Sequential, &x, &b);
            for v in SmootherVariant::ALL {
                let y = smoothed(l, v, LocalSolver::FastDiagonalization, Execution::Sequential, &x, &b);
                assert!(rel(y.values(), reference.values()) < 1e-12, "d={d} k={k} {v}");
            }
            let dense = smoothed(l, SmootherVariant::Separate, LocalSolver::DenseInverse, Execution::Sequential, &x, &b);
            assert!(rel(dense.values(), reference.values()) < 1e-11);
        }
    }

    #[test]
    fn execution_modes_are_bitwise_equal() {
        let l = CartesianLevel::new(3, 2, 3).unwrap();
        let x = random(l, 1);
        let b = random(l, 2);
        for v in SmootherVariant::ALL {
            let s = smoothed(l, v, LocalSolver::FastDiagonalization, Execution::Sequential, &x, &b);
            let p = smoothed(l, v, LocalSolver::FastDiagonalization, Execution::Parallel, &x, &b);
            assert_eq!(s, p, "{v}");
        }
    }

    #[test]
    fn boundary_variant_ignores_interior_values() {
        // on the coarsest level every unknown is a patch interior node
        let l = CartesianLevel::new(2, 3, 1).unwrap();
        let b = random(l, 3);
        let sm = PatchSmoother::new(l, SmootherVariant::Boundary, LocalSolver::FastDiagonalization, Execution::Sequential)
            .unwrap();
        let mut poisoned = DofVector::zeros(l);
        poisoned.values_mut().iter_mut().for_each(|v| *v = f64::NAN);
        sm.smooth(&mut poisoned, &b).unwrap();
        let mut clean = DofVector::zeros(l);
        sm.smooth(&mut clean, &b).unwrap();
        assert_eq!(poisoned, clean);

        // on a finer level the shell gather of each patch reads no node the patch writes
        let l = CartesianLevel::new(2, 2, 3).unwrap();
        let sm = PatchSmoother::<f64>::new(l, SmootherVariant::Boundary, LocalSolver::FastDiagonalization, Execution::Sequential)
            .unwrap();
        let shell = sm.kernels.shell().clone();
        for p in sm.patches.iter() {
            let mut x = vec![1.0; l.total_dofs];
            for i in sm.patches.interior_indices(p) {
                x[i] = f64::NAN;
            }
            let mut out = vec![0.0; shell.len];
            sm.patches.gather_shell_into(&x, p, &shell, &mut out);
            assert!(out.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn boundary_rejects_dense_solver() {
        let l = CartesianLevel::new(2, 2, 2).unwrap();
        let err = PatchSmoother::<f64>::new(l, SmootherVariant::Boundary, LocalSolver::DenseInverse, Execution::Sequential);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn smoothing_reduces_energy_error() {
        for (d, k, lvl) in [(2, 2, 3), (2, 4, 2), (3, 1, 3), (3, 2, 2)] {
            let l = CartesianLevel::new(d, k, lvl).unwrap();
            let a = assemble_sparse(&l, DEFAULT_NNZ_BUDGET).unwrap();
            let n = a.dim();
            let dense = DMatrix::from_row_slice(n, n, &a.to_dense());
            let b = random(l, 21);
            let exact = dense.clone().lu().solve(&DVector::from_column_slice(b.values())).unwrap();
            let energy = |x: &DofVector<f64>| {
                let e = &exact - DVector::from_column_slice(x.values());
                (e.transpose() * &dense * &e)[(0, 0)].sqrt()
            };
            for v in [SmootherVariant::Fused, SmootherVariant::Boundary] {
                let sm = PatchSmoother::new(l, v, LocalSolver::FastDiagonalization, Execution::Sequential).unwrap();
                let mut x = random(l, 22);
                let mut prev = energy(&x);
                for _ in 0..3 {
                    sm.smooth(&mut x, &b).unwrap();
                    let now = energy(&x);
                    assert!(now < prev, "d={d} k={k} {v}: {now} >= {prev}");
                    prev = now;
                }
            }
            let gs = PointGaussSeidel::new(l, DEFAULT_NNZ_BUDGET).unwrap();
            let mut x = random(l, 23);
            let before = energy(&x);
            gs.smooth(&mut x, &b).unwrap();
            assert!(energy(&x) < before);
        }
    }

    #[test]
    fn single_precision_smoother_tracks_double() {
        let l = CartesianLevel::new(2, 3, 3).unwrap();
        let x = random(l, 7);
        let b = random(l, 8);
        let y64 = smoothed(l, SmootherVariant::Fused, LocalSolver::FastDiagonalization, Execution::Sequential, &x, &b);
        let sm = PatchSmoother::<f32>::new(l, SmootherVariant::Fused, LocalSolver::FastDiagonalization, Execution::Sequential)
            .unwrap();
        let mut y32 = x.cast::<f32>();
        sm.smooth(&mut y32, &b.cast()).unwrap();
        let back = y32.cast::<f64>();
        assert!(rel(back.values(), y64.values()) < 1e-4);
        assert!(norm(back.values()) > 0.0);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in SmootherVariant::ALL {
            assert_eq!(v.to_string().parse::<SmootherVariant>().unwrap(), v);
        }
        assert!("jacobi".parse::<SmootherVariant>().is_err());
    }
}
