//! Desk-scale oracle suites, one per module, reporting each measured error
//! against its tolerance.

use std::collections::HashSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banksim::{self, BankConfig, Hardware, Indexing, KernelKind};
use crate::driver::SCHEMA_VERSION;
use crate::element::{cell_matrices_1d, gauss_lobatto_points};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::fastdiag::{
    apply_patch_inverse, closure_index_sets, dense_kronecker_sum, dense_patch_inverse, patch_matrices_1d, FastDiagData,
    PatchKernels, PatchScratch,
};
use crate::krylov::{gmres, vcycle_precondition, GmresOptions};
use crate::mesh::CartesianLevel;
use crate::multigrid::{MultigridConfig, MultigridContext, Transfer};
use crate::operator::{assemble_sparse, compute_rhs, l2_error, LaplaceOperator, DEFAULT_NNZ_BUDGET};
use crate::patches::enumerate_patches;
use crate::problem::{sin_product, RhsKind};
use crate::smoother::{LocalSolver, PatchSmoother, SmootherVariant};
use crate::tensor::Accumulate;
use crate::vector::{dot, DofVector};

pub const MODULES: [&str; 9] =
    ["mesh", "element", "operator", "patches", "fastdiag", "smoother", "multigrid", "krylov", "banksim"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub module: String,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Run only this module's suite.
    pub module: Option<String>,
    /// Flip the sign of the patch interface blocks before checking them.
    pub inject_interface_sign_error: bool,
    pub seed: u64,
}

struct Suite {
    module: &'static str,
    checks: Vec<Check>,
}

impl Suite {
    fn new(module: &'static str) -> Self {
        Self { module, checks: Vec::new() }
    }

    /// Passes when `measured ≤ tolerance`; a NaN never passes.
    fn check(&mut self, name: impl Into<String>, measured: f64, tolerance: f64) {
        self.checks.push(Check {
            module: self.module.to_string(),
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        });
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_dofs(rng: &mut ChaCha8Rng, level: CartesianLevel) -> DofVector<f64> {
    DofVector::from_fn(level, |_| rng.gen_range(-1.0..1.0))
}

pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    if let Some(m) = &opts.module {
        if !MODULES.contains(&m.as_str()) {
            return Err(invalid(format!("unknown module '{m}', expected one of {}", MODULES.join(", "))));
        }
    }
    let wanted = |m: &str| opts.module.as_deref().map_or(true, |w| w == m);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();
    type SuiteFn = fn(&mut Suite, &mut ChaCha8Rng, &VerifyOptions) -> Result<()>;
    let suites: [(&'static str, SuiteFn); 9] = [
        ("mesh", mesh_suite),
        ("element", element_suite),
        ("operator", operator_suite),
        ("patches", patches_suite),
        ("fastdiag", fastdiag_suite),
        ("smoother", smoother_suite),
        ("multigrid", multigrid_suite),
        ("krylov", krylov_suite),
        ("banksim", banksim_suite),
    ];
    for (name, run) in suites {
        if wanted(name) {
            let mut s = Suite::new(name);
            run(&mut s, &mut rng, opts)?;
            checks.extend(s.checks);
        }
    }
    Ok(VerifyReport { schema_version: SCHEMA_VERSION, seed: opts.seed, passed: checks.iter().all(|c| c.passed), checks })
}

fn mesh_suite(s: &mut Suite, _: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<()> {
    let mut wrong = 0;
    for dim in [2, 3] {
        for k in 1..=4 {
            for l in 1..=3 {
                let level = CartesianLevel::new(dim, k, l)?;
                let m = (1usize << l) * k - 1;
                wrong += usize::from(level.total_dofs != m.pow(dim as u32));
                for i in [0, level.total_dofs / 2, level.total_dofs - 1] {
                    wrong += usize::from(level.dof_index(&level.multi_index(i))? != i);
                }
            }
        }
    }
    s.check("dof counts and lexicographic round trip", wrong as f64, 0.0);
    Ok(())
}

fn element_suite(s: &mut Suite, _: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<()> {
    let (mut sym, mut mass, mut kernel) = (0.0f64, 0.0f64, 0.0f64);
    for k in 1..=8 {
        let x = gauss_lobatto_points(k)?;
        sym = sym.max(x[0].abs()).max((x[k] - 1.0).abs());
        for i in 0..=k {
            sym = sym.max((x[i] + x[k - i] - 1.0).abs());
        }
        let h = 0.25;
        let c = cell_matrices_1d(k, h)?;
        let total: f64 = c.mass.as_slice().iter().sum();
        mass = mass.max((total - h).abs() / h);
        for i in 0..=k {
            let row: f64 = (0..=k).map(|j| c.stiffness.get(i, j)).sum();
            kernel = kernel.max(row.abs() * h);
        }
    }
    s.check("Gauss-Lobatto nodes symmetric with endpoints", sym, 1e-14);
    s.check("mass integrates the constant", mass, 1e-13);
    s.check("stiffness annihilates constants", kernel, 1e-12);
    Ok(())
}

fn operator_suite(s: &mut Suite, rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<()> {
    for (dim, level, degrees) in [(2, 3, 1..=4), (3, 2, 1..=3)] {
        for k in degrees {
            let l = CartesianLevel::new(dim, k, level)?;
            let x = random_dofs(rng, l);
            let free = LaplaceOperator::<f64>::new(l, Execution::Parallel)?.apply(&x)?;
            let assembled = assemble_sparse(&l, DEFAULT_NNZ_BUDGET)?.matvec(x.values())?;
            s.check(format!("matrix-free vs assembled {dim}D k={k}"), rel(free.values(), &assembled), 1e-12);
        }
    }
    Ok(())
}

fn patches_suite(s: &mut Suite, _: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<()> {
    let mut overlaps = 0;
    let mut count = 0;
    for (dim, k, l) in [(2, 2, 3), (3, 1, 3), (3, 2, 2)] {
        let level = CartesianLevel::new(dim, k, l)?;
        let set = enumerate_patches(&level);
        count += set.len().abs_diff(((1usize << l) - 1).pow(dim as u32));
        // an interior update must not touch what another patch of its color reads
        for color in set.colors() {
            let closures: Vec<HashSet<usize>> = color.iter().map(|p| set.closure_indices(p).into_iter().collect()).collect();
            for (a, p) in color.iter().enumerate() {
                for i in set.interior_indices(p) {
                    overlaps += closures.iter().enumerate().filter(|&(b, c)| b != a && c.contains(&i)).count();
                }
            }
        }
    }
    s.check("one patch per interior vertex", count as f64, 0.0);
    s.check("same-color interiors miss other closures", overlaps as f64, 0.0);
    Ok(())
}

fn fastdiag_suite(s: &mut Suite, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<()> {
    for dim in [2, 3] {
        let mut worst = 0.0f64;
        for k in 1..=6 {
            let p = patch_matrices_1d(k, 1.0 / 16.0)?;
            let fd = FastDiagData::new(&p, dim)?;
            let n = (2 * k - 1).pow(dim as u32);
            let r = random_vec(rng, n);
            let fast = apply_patch_inverse(&p, &fd, &r)?;
            let dense = dense_patch_inverse(&p, dim)?;
            let expect: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dense.get(i, j) * r[j]).sum()).collect();
            worst = worst.max(rel(&fast, &expect));
        }
        s.check(format!("fast diagonalization vs dense inverse {dim}D k<=6"), worst, 1e-11);
    }
    for dim in [2, 3] {
        let mut worst = 0.0f64;
        for k in 1..=4 {
            let p = patch_matrices_1d(k, 0.2)?;
            let fd = FastDiagData::new(&p, dim)?;
            let mut kern = PatchKernels::<f64>::new(&p, &fd);
            if opts.inject_interface_sign_error {
                kern.inject_interface_sign_error();
            }
            let full = dense_kronecker_sum(&p.mass, &p.stiffness, dim);
            let (interior, boundary) = closure_index_sets(dim, k);
            let xb = random_vec(rng, boundary.len());
            let mut got = vec![0.0; interior.len()];
            kern.apply_interface(&xb, &mut got, Accumulate::Replace, &mut PatchScratch::new());
            let expect: Vec<f64> = interior
                .iter()
                .map(|&i| boundary.iter().zip(&xb).map(|(&j, &x)| full[(i, j)] * x).sum())
                .collect();
            worst = worst.max(rel(&got, &expect));

            // block identity A u = A^II u^I + A^IB u^B on the closure
            let u = random_vec(rng, full.ncols());
            let au = &full * DVector::from_vec(u.clone());
            let ui: Vec<f64> = interior.iter().map(|&i| u[i]).collect();
            let ub: Vec<f64> = boundary.iter().map(|&i| u[i]).collect();
            let mut split = vec![0.0; interior.len()];
            let mut scratch = PatchScratch::new();
            kern.apply_interior_operator(&ui, &mut split, Accumulate::Replace, &mut scratch);
            kern.apply_interface(&ub, &mut split, Accumulate::Add, &mut scratch);
            let expect: Vec<f64> = interior.iter().map(|&i| au[i]).collect();
            worst = worst.max(rel(&split, &expect));
        }
        s.check(format!("interface block and block identity {dim}D k<=4"), worst, 1e-12);
    }
    Ok(())
}

fn smoother_suite(s: &mut Suite, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<()> {
    for (dim, k, l) in [(2, 3, 3), (3, 2, 2)] {
        let level = CartesianLevel::new(dim, k, l)?;
        let x0 = random_dofs(rng, level);
        let b = random_dofs(rng, level);
        let mut results = Vec::new();
        for v in SmootherVariant::ALL {
            let mut sm = PatchSmoother::<f64>::new(level, v, LocalSolver::FastDiagonalization, Execution::Parallel)?;
            if opts.inject_interface_sign_error {
                sm.kernels_mut().inject_interface_sign_error();
            }
            let mut x = x0.clone();
            sm.smooth(&mut x, &b)?;
            results.push(x);
        }
        let mut worst = 0.0f64;
        for i in 0..results.len() {
            for j in i + 1..results.len() {
                worst = worst.max(rel(results[i].values(), results[j].values()));
            }
        }
        s.check(format!("variants agree pairwise {dim}D k={k}"), worst, 1e-11);

        let mut seq = x0.clone();
        let mut par = x0.clone();
        PatchSmoother::<f64>::new(level, SmootherVariant::Fused, LocalSolver::FastDiagonalization, Execution::Sequential)?
            .smooth(&mut seq, &b)?;
        PatchSmoother::<f64>::new(level, SmootherVariant::Fused, LocalSolver::FastDiagonalization, Execution::Parallel)?
            .smooth(&mut par, &b)?;
        let differ = seq.values().iter().zip(par.values()).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
        s.check(format!("sequential and parallel bitwise equal {dim}D"), differ as f64, 0.0);
    }
    Ok(())
}

fn multigrid_suite(s: &mut Suite, rng: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<()> {
    for (dim, k, l) in [(2, 3, 2), (3, 2, 2), (2, 1, 4)] {
        let coarse = CartesianLevel::new(dim, k, l)?;
        let t = Transfer::<f64>::new(coarse, Execution::Parallel)?;
        let xc = random_dofs(rng, coarse);
        let rf = random_dofs(rng, *t.fine());
        let lhs = dot(t.prolongate(&xc)?.values(), rf.values());
        let rhs = dot(xc.values(), t.restrict(&rf)?.values());
        s.check(format!("restriction adjoint to prolongation {dim}D k={k}"), (lhs - rhs).abs() / lhs.abs().max(rhs.abs()), 1e-12);
    }
    for dim in [2, 3] {
        let ctx = MultigridContext::<f64>::new(dim, 2, 1, MultigridConfig::default())?;
        let b = random_dofs(rng, *ctx.finest());
        let mut x = DofVector::zeros(*ctx.finest());
        ctx.v_cycle(1, &mut x, &b)?;
        let r = ctx.operator(1)?.residual(&b, &x)?;
        s.check(format!("coarsest level solved exactly {dim}D"), r.norm() / b.norm(), 1e-12);
    }
    for (dim, degrees, levels) in [(2, 1..=3, 3..=5), (3, 1..=2, 2..=4)] {
        for k in degrees {
            let mut errors = Vec::new();
            for l in levels.clone() {
                let (x, _) = crate::multigrid::solve_fmg(dim, k, l, |p| RhsKind::SinProd.source(p), 1e-11, MultigridConfig::default())?;
                errors.push(l2_error(x.level(), &x, sin_product)?);
            }
            let order = errors.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
            // reported as a shortfall so that `measured ≤ tolerance` reads naturally
            s.check(format!("L2 order {dim}D k={k} (k+0.7 minus observed)"), k as f64 + 0.7 - order, 0.0);
        }
    }
    Ok(())
}

fn krylov_suite(s: &mut Suite, _: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<()> {
    for (dim, k, l) in [(2, 2, 4), (3, 2, 3)] {
        let ctx = MultigridContext::<f64>::new(dim, k, l, MultigridConfig::default())?;
        let op = ctx.operator(l)?;
        let b = compute_rhs::<f64, _>(ctx.finest(), |_| 1.0)?;
        let (x, stats) = gmres(
            |x, y| {
                let v = op.apply(&DofVector::from_values(*ctx.finest(), x.to_vec())?)?;
                y.copy_from_slice(v.values());
                Ok(())
            },
            |r, z| vcycle_precondition(&ctx, r, z),
            b.values(),
            GmresOptions::default(),
        )?;
        let r = op.residual(&b, &DofVector::from_values(*ctx.finest(), x)?)?;
        s.check(format!("preconditioned GMRES true residual {dim}D k={k}"), r.norm() / b.norm(), 1e-9);
        s.check(format!("preconditioned GMRES iterations {dim}D k={k}"), stats.iterations as f64, 10.0);
    }
    Ok(())
}

fn banksim_suite(s: &mut Suite, _: &mut ChaCha8Rng, _: &VerifyOptions) -> Result<()> {
    for word in [4, 8] {
        let cfg = BankConfig::with_word_bytes(word);
        for k in 1..=8 {
            let excess: usize = banksim::sweep(KernelKind::ConflictFree, 3, k, &cfg, Indexing::Linear)?
                .iter()
                .map(|r| r.total_excess)
                .sum();
            s.check(format!("conflict-free excess k={k} {word}-byte words"), excess as f64, 0.0);
        }
    }
    let basic = banksim::sweep(KernelKind::Basic, 3, 3, &BankConfig::with_word_bytes(8), Indexing::Masked)?;
    let worst = basic.iter().map(|r| r.max_wavefronts).max().unwrap_or(1);
    // a shortfall below three wavefronts; zero or less means present
    s.check("basic kernel three-way conflict k=3", 3.0 - worst as f64, 0.0);
    s.check("on-chip bandwidth TB/s", (Hardware::A100.bandwidth_tb_per_s() - 17.145).abs(), 5e-4);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fastdiag_suite_passes_and_catches_injection() {
        let clean = verify(&VerifyOptions { module: Some("fastdiag".into()), ..Default::default() }).unwrap();
        assert!(clean.passed, "{:?}", clean.checks);
        assert!(clean.checks.iter().all(|c| c.module == "fastdiag"));
        let broken =
            verify(&VerifyOptions { module: Some("fastdiag".into()), inject_interface_sign_error: true, ..Default::default() })
                .unwrap();
        assert!(!broken.passed);
        assert!(broken.checks.iter().any(|c| c.name.starts_with("interface block") && !c.passed));
    }

    #[test]
    fn injection_also_breaks_variant_agreement() {
        let opts = VerifyOptions { module: Some("smoother".into()), inject_interface_sign_error: true, ..Default::default() };
        assert!(!verify(&opts).unwrap().passed);
        assert!(verify(&VerifyOptions { inject_interface_sign_error: false, ..opts }).unwrap().passed);
    }

    #[test]
    fn unknown_module_rejected() {
        assert!(verify(&VerifyOptions { module: Some("nope".into()), ..Default::default() }).is_err());
    }

    #[test]
    fn cheap_suites_pass() {
        for m in ["mesh", "element", "operator", "patches", "multigrid", "krylov"] {
            let r = verify(&VerifyOptions { module: Some(m.into()), seed: 7, ..Default::default() }).unwrap();
            assert!(r.passed, "{m}: {:?}", r.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        }
    }
}
