//! Restarted GMRES in double precision with right preconditioning, and
//! V-cycle preconditioners in single or double precision.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::multigrid::MultigridContext;
use crate::real::Real;
use crate::vector::{dot, norm};

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Residual norms `‖b − A x‖`, starting with the initial residual.
    pub residual_history: Vec<f64>,
    pub relative_residual: f64,
    pub l2_error: Option<f64>,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-9, restart: 30, max_iterations: 1000 }
    }
}

/// Threshold on `max_i |⟨w, v_i⟩| / ‖w‖` after the first Gram–Schmidt pass
/// above which a second pass is made.
const REORTHOGONALIZE: f64 = 1e-8;

/// Solves `A x = b` from `x = 0` with right-preconditioned restarted GMRES.
///
/// `apply_a(x, y)` and `apply_p(r, z)` overwrite their second argument.
/// Convergence is declared on the true residual `‖b − A x‖ ≤ tol·‖b‖`.
pub fn gmres<A, P>(mut apply_a: A, mut apply_p: P, b: &[f64], opts: GmresOptions) -> Result<(Vec<f64>, SolveStats)>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
    P: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    if !(opts.tol > 0.0) || opts.restart == 0 {
        return Err(invalid("gmres needs tol > 0 and restart ≥ 1"));
    }
    let start = Instant::now();
    let n = b.len();
    let b_norm = norm(b);
    let target = opts.tol * b_norm;
    let mut x = vec![0.0; n];
    let mut history = vec![b_norm];
    let mut iterations = 0;
    let finish = |x: Vec<f64>, iterations, history: Vec<f64>, res: f64| {
        let stats = SolveStats {
            iterations,
            relative_residual: if b_norm > 0.0 { res / b_norm } else { 0.0 },
            residual_history: history,
            l2_error: None,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok((x, stats))
    };
    if b_norm == 0.0 {
        return finish(x, 0, history, 0.0);
    }
    let m = opts.restart;
    let mut r = b.to_vec();
    let mut beta = b_norm;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    // preconditioned directions z_j = P v_j, kept so that an inexact
    // preconditioner still satisfies A Z = V H
    let mut precond: Vec<Vec<f64>> = Vec::new();
    let mut w = vec![0.0; n];
    loop {
        let cycle_start = beta;
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns after rotation, the rotations and the rotated rhs
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut rot: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = vec![beta];
        for j in 0..m {
            if precond.len() == j {
                precond.push(vec![0.0; n]);
            }
            apply_p(&basis[j], &mut precond[j])?;
            apply_a(&precond[j], &mut w)?;
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                w.iter_mut().zip(v).for_each(|(wi, &vi)| *wi -= hij * vi);
            }
            let wn = norm(&w);
            let lost = basis.iter().map(|v| dot(&w, v).abs()).fold(0.0, f64::max);
            if wn > 0.0 && lost > REORTHOGONALIZE * wn {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    col[i] += c;
                    w.iter_mut().zip(v).for_each(|(wi, &vi)| *wi -= c * vi);
                }
            }
            let wn = norm(&w);
            col[j + 1] = wn;
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a, b) = (col[i], col[i + 1]);
                col[i] = c * a + s * b;
                col[i + 1] = -s * a + c * b;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let rr = a.hypot(bb);
            if !rr.is_finite() {
                return Err(Error::NonFinite("gmres Hessenberg entry".into()));
            }
            let (c, s) = if rr == 0.0 { (1.0, 0.0) } else { (a / rr, bb / rr) };
            col[j] = rr;
            col[j + 1] = 0.0;
            rot.push((c, s));
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);
            iterations += 1;
            let estimate = g[j + 1].abs();
            history.push(estimate);
            let breakdown = wn <= 1e-14 * beta;
            if estimate <= target || breakdown || j + 1 == m || iterations == opts.max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution for y, then x += Z y
        let k = h.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|l| h[l][i] * y[l]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, z) in y.iter().zip(&precond) {
            x.iter_mut().zip(z).for_each(|(a, &b)| *a += yi * b);
        }
        apply_a(&x, &mut w)?;
        r.iter_mut().zip(b.iter().zip(&w)).for_each(|(ri, (&bi, &wi))| *ri = bi - wi);
        beta = norm(&r);
        if let Some(last) = history.last_mut() {
            *last = beta;
        }
        if !beta.is_finite() {
            return Err(Error::NonFinite("gmres residual".into()));
        }
        if beta <= target {
            return finish(x, iterations, history, beta);
        }
        // a whole cycle without progress means stagnation
        if iterations >= opts.max_iterations || beta >= cycle_start {
            return Err(Error::Diverged { iterations, relative_residual: beta / b_norm, residual_history: history });
        }
    }
}

/// One V-cycle with zero initial guess on the finest level of `ctx`, applied
/// to an `f64` residual: downcast, cycle, upcast.
pub fn vcycle_precondition<T: Real>(ctx: &MultigridContext<T>, r: &[f64], z: &mut [f64]) -> Result<()> {
    let n = ctx.finest().total_dofs;
    if r.len() != n || z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: r.len().min(z.len()) });
    }
    let rt: Vec<T> = r.iter().map(|&v| T::from_f64(v)).collect();
    if let Some(i) = rt.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("residual entry {i} in {}", T::NAME)));
    }
    let mut e = vec![T::zero(); n];
    ctx.v_cycle_slice(ctx.levels().len() - 1, &mut e, &rt);
    z.iter_mut().zip(&e).for_each(|(zi, ei)| *zi = ei.as_f64());
    Ok(())
}

/// The single-precision V-cycle as a double-precision preconditioner.
pub fn mixed_precision_precondition(ctx: &MultigridContext<f32>, r: &[f64]) -> Result<Vec<f64>> {
    let mut z = vec![0.0; r.len()];
    vcycle_precondition(ctx, r, &mut z)?;
    Ok(z)
}
