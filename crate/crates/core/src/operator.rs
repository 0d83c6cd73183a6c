//! The level Laplacian: matrix-free application by sum factorization, the
//! assembled reference matrix, load vectors and L2 errors.

use crate::boxes::{gather_box, scatter_box};
use crate::element::{cell_matrices_1d, Element1D};
use crate::error::{Error, Result};
use crate::exec::{colored_loop, Execution};
use crate::mesh::CartesianLevel;
use crate::real::Real;
use crate::sparse::CsrMatrix;
use crate::tensor::{contract, kron_sum_apply, Accumulate, DenseMatrix, KronScratch};
use crate::vector::DofVector;

/// Default cap on assembled nonzeros.
pub const DEFAULT_NNZ_BUDGET: usize = 10_000_000;

/// `A_ℓ` applied cell by cell: on each cell the local matrix is the Kronecker
/// sum `Σ_a M ⊗ … ⊗ A ⊗ … ⊗ M` of the 1D cell matrices.
#[derive(Debug, Clone)]
pub struct LaplaceOperator<T> {
    level: CartesianLevel,
    mass: DenseMatrix<T>,
    stiffness: DenseMatrix<T>,
    cells: Vec<Vec<[usize; 3]>>,
    exec: Execution,
}

impl<T: Real> LaplaceOperator<T> {
    pub fn new(level: CartesianLevel, exec: Execution) -> Result<Self> {
        let c = cell_matrices_1d(level.degree, level.spacing)?;
        Ok(Self {
            level,
            mass: c.mass.cast(),
            stiffness: c.stiffness.cast(),
            cells: level.cells_by_color(),
            exec,
        })
    }

    pub fn level(&self) -> &CartesianLevel {
        &self.level
    }

    pub fn apply(&self, x: &DofVector<T>) -> Result<DofVector<T>> {
        x.check_level(&self.level)?;
        let mut y = vec![T::zero(); self.level.total_dofs];
        self.apply_slice(x.values(), &mut y);
        DofVector::from_values(self.level, y)
    }

    /// `y = A x` on raw slices of length `N`.
    pub(crate) fn apply_slice(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        let lvl = &self.level;
        let ext = lvl.extents3();
        let nloc = (lvl.degree + 1).pow(lvl.dim as u32);
        let pair = (&self.mass, &self.stiffness);
        let factors = [pair; 3];
        let factors = &factors[..lvl.dim];
        let mut buffer = Vec::new();
        colored_loop(
            self.exec,
            &self.cells,
            nloc,
            &mut buffer,
            || (vec![T::zero(); nloc], KronScratch::new()),
            |(local, scratch), cell, out| {
                let (start, size) = lvl.cell_box(cell);
                gather_box(x, ext, start, size, local);
                kron_sum_apply(factors, local, size, out, Accumulate::Replace, scratch);
            },
            |cell, local| {
                let (start, size) = lvl.cell_box(cell);
                scatter_box(local, ext, start, size, y, true);
            },
        );
    }

    /// `r = b − A x`.
    pub(crate) fn residual_slice(&self, b: &[T], x: &[T], r: &mut [T]) {
        self.apply_slice(x, r);
        r.iter_mut().zip(b).for_each(|(ri, &bi)| *ri = bi - *ri);
    }

    pub fn residual(&self, b: &DofVector<T>, x: &DofVector<T>) -> Result<DofVector<T>> {
        b.check_level(&self.level)?;
        x.check_level(&self.level)?;
        let mut r = vec![T::zero(); self.level.total_dofs];
        self.residual_slice(b.values(), x.values(), &mut r);
        DofVector::from_values(self.level, r)
    }
}

/// One-shot `A_ℓ x`.
pub fn apply_laplacian<T: Real>(level: &CartesianLevel, x: &DofVector<T>) -> Result<DofVector<T>> {
    LaplaceOperator::new(*level, Execution::default())?.apply(x)
}

/// Element matrix from full gradient quadrature, `(k+1)^d` squared, lexicographic.
fn element_matrix(level: &CartesianLevel) -> Result<Vec<f64>> {
    let (d, k, h) = (level.dim, level.degree, level.spacing);
    let el = Element1D::new(k)?;
    let nq = el.quad_points.len();
    let n1 = k + 1;
    let nloc = n1.pow(d as u32);
    let nqd = nq.pow(d as u32);
    let split = |mut i: usize, base: usize| {
        let mut out = [0usize; 3];
        for o in out.iter_mut().take(d) {
            *o = i % base;
            i /= base;
        }
        out
    };
    let mut grads = vec![0.0; nloc * d];
    let mut ke = vec![0.0; nloc * nloc];
    for q in 0..nqd {
        let qi = split(q, nq);
        let w: f64 = (0..d).map(|a| el.quad_weights[qi[a]] * h).product();
        for i in 0..nloc {
            let ii = split(i, n1);
            for a in 0..d {
                let mut g = el.shape_gradients.get(qi[a], ii[a]) / h;
                for b in (0..d).filter(|&b| b != a) {
                    g *= el.shape_values.get(qi[b], ii[b]);
                }
                grads[i * d + a] = g;
            }
        }
        for i in 0..nloc {
            for j in 0..nloc {
                let gg: f64 = (0..d).map(|a| grads[i * d + a] * grads[j * d + a]).sum();
                ke[i * nloc + j] += w * gg;
            }
        }
    }
    Ok(ke)
}

/// Interior-DoF coupling range `[lo, hi]` along one direction.
fn coupling_ranges(level: &CartesianLevel) -> Vec<(usize, usize)> {
    let (k, m) = (level.degree, level.dofs_per_dim);
    (0..m)
        .map(|i| {
            let g = i + 1;
            let (lo, hi) = if g % k == 0 { (g - k, g + k) } else { (g / k * k, g / k * k + k) };
            (lo.max(1) - 1, hi.min(m) - 1)
        })
        .collect()
}

/// Assembles `A_ℓ` from element matrices; fails if it would exceed `budget` nonzeros.
pub fn assemble_sparse(level: &CartesianLevel, budget: usize) -> Result<CsrMatrix> {
    let d = level.dim;
    let m = level.dofs_per_dim;
    let n = level.total_dofs;
    let ranges = coupling_ranges(level);
    let width_sum: usize = ranges.iter().map(|(lo, hi)| hi - lo + 1).sum();
    let nnz = width_sum.pow(d as u32);
    if nnz > budget {
        return Err(Error::BudgetExceeded { nnz, budget });
    }
    if n > u32::MAX as usize {
        return Err(Error::BudgetExceeded { nnz, budget: u32::MAX as usize });
    }
    let mi3 = |idx: usize| {
        let mut out = [0usize; 3];
        let mut rest = idx;
        for o in out.iter_mut().take(d) {
            *o = rest % m;
            rest /= m;
        }
        out
    };
    let full = (0usize, 0usize);
    let row_ranges = |idx: usize| {
        let mi = mi3(idx);
        let mut r = [full; 3];
        for a in 0..d {
            r[a] = ranges[mi[a]];
        }
        r
    };

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for i in 0..n {
        let r = row_ranges(i);
        for j2 in r[2].0..=r[2].1 {
            for j1 in r[1].0..=r[1].1 {
                for j0 in r[0].0..=r[0].1 {
                    col_idx.push((j0 + m * (j1 + m * j2)) as u32);
                }
            }
        }
        row_ptr.push(col_idx.len());
    }
    let mut a = CsrMatrix::from_parts(n, row_ptr, col_idx, vec![0.0; nnz]);

    let ke = element_matrix(level)?;
    let n1 = level.degree + 1;
    let nloc = n1.pow(d as u32);
    let mut dofs: Vec<Option<(usize, [usize; 3])>> = vec![None; nloc];
    for cell in level.cells_by_color().concat() {
        let (start, _) = level.cell_box(&cell);
        for (l, slot) in dofs.iter_mut().enumerate() {
            let mut mi = [0usize; 3];
            let mut rest = l;
            let mut inside = true;
            for a in 0..d {
                let g = start[a] + (rest % n1) as isize;
                rest /= n1;
                if g < 0 || g >= m as isize {
                    inside = false;
                }
                mi[a] = g.max(0) as usize;
            }
            *slot = inside.then(|| (mi[0] + m * (mi[1] + m * mi[2]), mi));
        }
        for (li, ri) in dofs.iter().enumerate() {
            let Some((row, _)) = ri else { continue };
            let r = row_ranges(*row);
            let w0 = r[0].1 - r[0].0 + 1;
            let w1 = r[1].1 - r[1].0 + 1;
            let base = a.row_start(*row);
            for (lj, cj) in dofs.iter().enumerate() {
                let Some((_, cm)) = cj else { continue };
                let pos = base + ((cm[2] - r[2].0) * w1 + (cm[1] - r[1].0)) * w0 + (cm[0] - r[0].0);
                a.values_mut()[pos] += ke[li * nloc + lj];
            }
        }
    }
    Ok(a)
}

/// Load vector `b_i = ∫ f φ_i` with `k + 2` Gauss points per direction.
pub fn compute_rhs<T: Real, F>(level: &CartesianLevel, f: F) -> Result<DofVector<T>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    compute_rhs_with_quadrature(level, f, level.degree + 2)
}

pub fn compute_rhs_with_quadrature<T: Real, F>(level: &CartesianLevel, f: F, q: usize) -> Result<DofVector<T>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let lvl = *level;
    let (d, k, h) = (lvl.dim, lvl.degree, lvl.spacing);
    let el = Element1D::with_quadrature(k, q)?;
    let shape = &el.shape_values;
    let nqd = q.pow(d as u32);
    let nloc = (k + 1).pow(d as u32);
    let ext = lvl.extents3();
    let mut b = vec![0.0f64; lvl.total_dofs];
    let mut buffer = Vec::new();
    colored_loop(
        Execution::default(),
        &lvl.cells_by_color(),
        nloc,
        &mut buffer,
        || (vec![0.0f64; nqd], vec![0.0f64; nqd.max(nloc) * (k + 2)]),
        |(vals, tmp), cell, out| {
            let mut x = [0.0; 3];
            for (p, v) in vals.iter_mut().enumerate() {
                let mut rest = p;
                let mut w = 1.0;
                for a in 0..d {
                    let qa = rest % q;
                    rest /= q;
                    x[a] = (cell[a] as f64 + el.quad_points[qa]) * h;
                    w *= el.quad_weights[qa] * h;
                }
                *v = w * f(&x[..d]);
            }
            let mut e = [1usize; 3];
            e[..d].iter_mut().for_each(|v| *v = q);
            contract_all(shape, true, d, vals, e, tmp, out);
        },
        |cell, local| {
            let (start, size) = lvl.cell_box(cell);
            scatter_box(local, ext, start, size, &mut b, true);
        },
    );
    DofVector::from_values(lvl, b.iter().map(|&v| T::from_f64(v)).collect())
}

/// Applies `matrix` (or its transpose) along every direction `0..d`.
fn contract_all(
    matrix: &DenseMatrix<f64>,
    transpose: bool,
    d: usize,
    input: &[f64],
    mut ext: [usize; 3],
    tmp: &mut [f64],
    out: &mut [f64],
) {
    let rows = if transpose { matrix.cols() } else { matrix.rows() };
    let mut cur: Vec<f64> = input[..ext.iter().product::<usize>()].to_vec();
    for a in 0..d {
        let mut next = ext;
        next[a] = rows;
        let len: usize = next.iter().product();
        contract(a, matrix, transpose, &cur, ext, &mut tmp[..len], Accumulate::Replace);
        cur.clear();
        cur.extend_from_slice(&tmp[..len]);
        ext = next;
    }
    out[..cur.len()].copy_from_slice(&cur);
}

/// `‖u_h − u‖_{L2}` with `k + 2` Gauss points per direction.
pub fn l2_error<T: Real, F>(level: &CartesianLevel, x: &DofVector<T>, u_exact: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    x.check_level(level)?;
    let lvl = *level;
    let (d, k, h) = (lvl.dim, lvl.degree, lvl.spacing);
    let q = k + 2;
    let el = Element1D::with_quadrature(k, q)?;
    let nqd = q.pow(d as u32);
    let nloc = (k + 1).pow(d as u32);
    let ext = lvl.extents3();
    let xs: Vec<f64> = x.values().iter().map(|v| v.as_f64()).collect();
    let mut total = 0.0;
    let mut buffer = Vec::new();
    colored_loop(
        Execution::default(),
        &lvl.cells_by_color(),
        1,
        &mut buffer,
        || (vec![0.0f64; nloc], vec![0.0f64; nqd], vec![0.0f64; nqd.max(nloc) * q]),
        |(local, vals, tmp), cell, out| {
            let (start, size) = lvl.cell_box(cell);
            gather_box(&xs, ext, start, size, local);
            contract_all(&el.shape_values, false, d, local, size, tmp, vals);
            let mut sum = 0.0;
            let mut pt = [0.0; 3];
            for (p, uh) in vals.iter().enumerate() {
                let mut rest = p;
                let mut w = 1.0;
                for a in 0..d {
                    let qa = rest % q;
                    rest /= q;
                    pt[a] = (cell[a] as f64 + el.quad_points[qa]) * h;
                    w *= el.quad_weights[qa] * h;
                }
                let e = uh - u_exact(&pt[..d]);
                sum += w * e * e;
            }
            out[0] = sum;
        },
        |_, local| total += local[0],
    );
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::dot;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(level: CartesianLevel, seed: u64) -> DofVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DofVector::from_fn(level, |_| rng.gen_range(-1.0..1.0))
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        num / b.iter().map(|y| y * y).sum::<f64>().sqrt()
    }

    fn sinprod(x: &[f64]) -> f64 {
        x.iter().map(|&v| (PI * v).sin()).product()
    }

    #[test]
    fn zero_maps_to_zero() {
        let l = CartesianLevel::new(3, 2, 2).unwrap();
        let y = apply_laplacian(&l, &DofVector::<f64>::zeros(l)).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_node_matrix() {
        let l = CartesianLevel::new(2, 1, 1).unwrap();
        let a = assemble_sparse(&l, DEFAULT_NNZ_BUDGET).unwrap();
        assert_eq!(a.dim(), 1);
        assert!((a.get(0, 0) - 8.0 / 3.0).abs() < 1e-14);
        let x = DofVector::from_values(l, vec![1.0f64]).unwrap();
        let y = apply_laplacian(&l, &x).unwrap();
        assert!((y.values()[0] - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn matches_assembled_matrix() {
        for (d, k, lvl) in [(2, 2, 2), (2, 1, 3), (2, 4, 2), (2, 5, 2), (3, 1, 2), (3, 2, 2), (3, 3, 1)] {
            let l = CartesianLevel::new(d, k, lvl).unwrap();
            let a = assemble_sparse(&l, DEFAULT_NNZ_BUDGET).unwrap();
            let x = random(l, 42);
            let y = apply_laplacian(&l, &x).unwrap();
            let expect = a.matvec(x.values()).unwrap();
            assert!(rel(y.values(), &expect) < 1e-13, "d={d} k={k} l={lvl}");
        }
    }

    #[test]
    fn symmetric_and_positive() {
        let l = CartesianLevel::new(3, 2, 2).unwrap();
        let op = LaplaceOperator::new(l, Execution::Sequential).unwrap();
        let x = random(l, 1);
        let y = random(l, 2);
        let ax = op.apply(&x).unwrap();
        let ay = op.apply(&y).unwrap();
        let (p, q) = (dot(ax.values(), y.values()), dot(x.values(), ay.values()));
        assert!((p - q).abs() <= 1e-13 * p.abs().max(q.abs()));
        assert!(dot(ax.values(), x.values()) > 0.0);

        let a = assemble_sparse(&l, DEFAULT_NNZ_BUDGET).unwrap();
        for i in 0..a.dim() {
            for (j, v) in a.row(i) {
                assert_eq!(v, a.get(j, i));
            }
        }
    }

    #[test]
    fn assembled_matrix_is_spd() {
        for (d, k, lvl) in [(2, 2, 2), (2, 3, 2), (3, 1, 2), (2, 1, 3)] {
            let l = CartesianLevel::new(d, k, lvl).unwrap();
            let a = assemble_sparse(&l, DEFAULT_NNZ_BUDGET).unwrap();
            let n = a.dim();
            let dense = DMatrix::from_row_slice(n, n, &a.to_dense());
            let min = dense.symmetric_eigenvalues().min();
            assert!(min > 0.0, "smallest eigenvalue {min}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let l = CartesianLevel::new(3, 3, 3).unwrap();
        assert!(matches!(assemble_sparse(&l, 1000), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn parallel_and_sequential_are_bitwise_equal() {
        let l = CartesianLevel::new(3, 3, 2).unwrap();
        let x = random(l, 9);
        let a = LaplaceOperator::new(l, Execution::Sequential).unwrap().apply(&x).unwrap();
        let b = LaplaceOperator::new(l, Execution::Parallel).unwrap().apply(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_foreign_vector() {
        let l = CartesianLevel::new(2, 2, 2).unwrap();
        let other = CartesianLevel::new(2, 2, 3).unwrap();
        let op = LaplaceOperator::<f64>::new(l, Execution::Sequential).unwrap();
        assert!(matches!(op.apply(&DofVector::zeros(other)), Err(Error::LevelMismatch { .. })));
    }

    #[test]
    fn rhs_examples() {
        let l = CartesianLevel::new(2, 1, 3).unwrap();
        let zero: DofVector<f64> = compute_rhs(&l, |_| 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let one: DofVector<f64> = compute_rhs(&l, |_| 1.0).unwrap();
        let h2 = l.spacing * l.spacing;
        assert!(one.values().iter().all(|&v| (v - h2).abs() < 1e-15));
    }

    #[test]
    fn rhs_matches_refined_quadrature() {
        // the k+2 rule is only that close once the cells resolve the sine
        for (d, k, lvl) in [(2, 1, 6), (2, 3, 4), (3, 2, 4)] {
            let l = CartesianLevel::new(d, k, lvl).unwrap();
            let b: DofVector<f64> = compute_rhs(&l, sinprod).unwrap();
            let fine: DofVector<f64> = compute_rhs_with_quadrature(&l, sinprod, k + 6).unwrap();
            assert!(rel(b.values(), fine.values()) < 1e-10, "d={d} k={k} level {lvl}");
        }
    }

    #[test]
    fn l2_error_of_zero_interpolant_is_zero() {
        let l = CartesianLevel::new(2, 3, 2).unwrap();
        let e = l2_error(&l, &DofVector::<f64>::zeros(l), |_| 0.0).unwrap();
        assert_eq!(e, 0.0);
        // the unit constant is not representable: error of the zero function
        let e1 = l2_error(&l, &DofVector::<f64>::zeros(l), |_| 1.0).unwrap();
        assert!((e1 - 1.0).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn apply_is_linear(seed in any::<u64>(), alpha in -4.0f64..4.0) {
            let l = CartesianLevel::new(2, 3, 2).unwrap();
            let op = LaplaceOperator::new(l, Execution::Sequential).unwrap();
            let x = random(l, seed);
            let y = random(l, seed.wrapping_add(1));
            let comb = DofVector::from_values(
                l,
                x.values().iter().zip(y.values()).map(|(a, b)| alpha * a + b).collect(),
            ).unwrap();
            let (ax, ay, ac) = (op.apply(&x).unwrap(), op.apply(&y).unwrap(), op.apply(&comb).unwrap());
            let expect: Vec<f64> = ax.values().iter().zip(ay.values()).map(|(a, b)| alpha * a + b).collect();
            prop_assert!(rel(ac.values(), &expect) < 1e-13);
        }
    }
}
