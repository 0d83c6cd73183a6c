//! Patch-local operators: the 1D two-cell matrices, their generalized
//! eigendecomposition, and the separable inverse and forward maps.

use nalgebra::DMatrix;

use crate::element::cell_matrices_1d;
use crate::error::{invalid, Error, Result};
use crate::mesh::check_dim_degree;
use crate::patches::ShellLayout;
use crate::real::Real;
use crate::tensor::{contract, kron_sum_apply, Accumulate, DenseMatrix, KronScratch};

/// 1D mass and stiffness of two adjacent cells and their blocks.
///
/// Local nodes are `0..=2k`; `0` and `2k` are the patch boundary.
#[derive(Debug, Clone)]
pub struct Patch1DMatrices {
    pub degree: usize,
    pub spacing: f64,
    pub mass: DenseMatrix<f64>,
    pub stiffness: DenseMatrix<f64>,
    /// `(2k−1)²` interior blocks.
    pub mass_ii: DenseMatrix<f64>,
    pub stiffness_ii: DenseMatrix<f64>,
    /// `(2k−1)×2`: interior rows, boundary columns `{0, 2k}`.
    pub mass_ib: DenseMatrix<f64>,
    pub stiffness_ib: DenseMatrix<f64>,
    /// `(2k−1)×(2k+1)`: interior rows, all columns.
    pub mass_i: DenseMatrix<f64>,
    pub stiffness_i: DenseMatrix<f64>,
}

pub fn patch_matrices_1d(k: usize, h: f64) -> Result<Patch1DMatrices> {
    let cell = cell_matrices_1d(k, h)?;
    let n = 2 * k + 1;
    let assemble = |local: &DenseMatrix<f64>| {
        let mut full = DenseMatrix::zeros(n, n);
        for c in 0..2 {
            for i in 0..=k {
                for j in 0..=k {
                    let (gi, gj) = (c * k + i, c * k + j);
                    full.set(gi, gj, full.get(gi, gj) + local.get(i, j));
                }
            }
        }
        full
    };
    let mass = assemble(&cell.mass);
    let stiffness = assemble(&cell.stiffness);
    let interior: Vec<usize> = (1..2 * k).collect();
    let boundary = [0, 2 * k];
    let all: Vec<usize> = (0..n).collect();
    Ok(Patch1DMatrices {
        degree: k,
        spacing: h,
        mass_ii: mass.select(&interior, &interior),
        stiffness_ii: stiffness.select(&interior, &interior),
        mass_ib: mass.select(&interior, &boundary),
        stiffness_ib: stiffness.select(&interior, &boundary),
        mass_i: mass.select(&interior, &all),
        stiffness_i: stiffness.select(&interior, &all),
        mass,
        stiffness,
    })
}

fn to_na(m: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

fn from_na(m: &DMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Solves `A S = M S Λ` with `Sᵀ M S = I` by Cholesky reduction.
///
/// Eigenvalues ascend; each eigenvector's first nonzero entry is positive.
pub fn generalized_eigen(a: &DenseMatrix<f64>, m: &DenseMatrix<f64>) -> Result<(DenseMatrix<f64>, Vec<f64>)> {
    let n = a.rows();
    if a.cols() != n || m.rows() != n || m.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.rows().max(a.cols()) });
    }
    let chol = to_na(m).cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite)?;
    let c = &l_inv * to_na(a) * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let s = l_inv.transpose() * &eig.eigenvectors;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut out = DMatrix::zeros(n, n);
    let mut lambda = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        let mut v = s.column(src).into_owned();
        let scale = v.amax();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
            if *first < 0.0 {
                v = -v;
            }
        }
        out.set_column(col, &v);
        lambda.push(eig.eigenvalues[src]);
    }
    Ok((from_na(&out), lambda))
}

/// Per-direction eigenvectors and eigenvalues of the interior pencils.
#[derive(Debug, Clone)]
pub struct FastDiagData {
    pub dim: usize,
    pub eigenvectors: Vec<DenseMatrix<f64>>,
    pub eigenvalues: Vec<Vec<f64>>,
}

impl FastDiagData {
    /// Identical for every patch of a uniform level.
    pub fn new(pm: &Patch1DMatrices, dim: usize) -> Result<Self> {
        check_dim_degree(dim, pm.degree)?;
        let (s, l) = generalized_eigen(&pm.stiffness_ii, &pm.mass_ii)?;
        Ok(Self { dim, eigenvectors: vec![s; dim], eigenvalues: vec![l; dim] })
    }

    /// `1 / Σ_a λ^a_{i_a}` on the interior tensor, direction 0 fastest.
    pub fn inverse_eigenvalue_tensor(&self) -> Vec<f64> {
        let n = self.eigenvalues[0].len();
        let len = n.pow(self.dim as u32);
        (0..len)
            .map(|mut idx| {
                let mut sum = 0.0;
                for a in 0..self.dim {
                    sum += self.eigenvalues[a][idx % n];
                    idx /= n;
                }
                1.0 / sum
            })
            .collect()
    }
}

/// Scratch buffers for [`PatchKernels`].
#[derive(Debug, Clone, Default)]
pub struct PatchScratch<T> {
    a: Vec<T>,
    b: Vec<T>,
    kron: KronScratch<T>,
}

impl<T: Real> PatchScratch<T> {
    pub fn new() -> Self {
        Self { a: Vec::new(), b: Vec::new(), kron: KronScratch::new() }
    }
}

/// The patch operators of one level in working precision.
#[derive(Debug, Clone)]
pub struct PatchKernels<T> {
    dim: usize,
    degree: usize,
    s: Vec<DenseMatrix<T>>,
    inv_eig: Vec<T>,
    mass_i: DenseMatrix<T>,
    stiffness_i: DenseMatrix<T>,
    mass_ii: DenseMatrix<T>,
    stiffness_ii: DenseMatrix<T>,
    mass_ib: DenseMatrix<T>,
    stiffness_ib: DenseMatrix<T>,
    shell: ShellLayout,
}

impl<T: Real> PatchKernels<T> {
    pub fn new(pm: &Patch1DMatrices, fd: &FastDiagData) -> Self {
        Self {
            dim: fd.dim,
            degree: pm.degree,
            s: fd.eigenvectors.iter().map(|s| s.cast()).collect(),
            inv_eig: fd.inverse_eigenvalue_tensor().iter().map(|&v| T::from_f64(v)).collect(),
            mass_i: pm.mass_i.cast(),
            stiffness_i: pm.stiffness_i.cast(),
            mass_ii: pm.mass_ii.cast(),
            stiffness_ii: pm.stiffness_ii.cast(),
            mass_ib: pm.mass_ib.cast(),
            stiffness_ib: pm.stiffness_ib.cast(),
            shell: ShellLayout::new(fd.dim, pm.degree),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shell(&self) -> &ShellLayout {
        &self.shell
    }

    fn ext(&self, n: usize) -> [usize; 3] {
        let mut e = [1; 3];
        e[..self.dim].iter_mut().for_each(|v| *v = n);
        e
    }

    pub fn interior_len(&self) -> usize {
        (2 * self.degree - 1).pow(self.dim as u32)
    }

    pub fn closure_len(&self) -> usize {
        (2 * self.degree + 1).pow(self.dim as u32)
    }

    /// `v = (⊗S) Λ⁻¹ (⊗S)ᵀ r`, the exact interior inverse.
    pub fn apply_inverse(&self, r: &[T], v: &mut [T], scratch: &mut PatchScratch<T>) {
        let len = self.interior_len();
        let ext = self.ext(2 * self.degree - 1);
        let PatchScratch { a, b, .. } = scratch;
        a.clear();
        a.extend_from_slice(&r[..len]);
        b.resize(len, T::zero());
        for dir in 0..self.dim {
            contract(dir, &self.s[dir], true, a, ext, b, Accumulate::Replace);
            std::mem::swap(a, b);
        }
        a.iter_mut().zip(&self.inv_eig).for_each(|(x, &w)| *x *= w);
        for dir in 0..self.dim - 1 {
            contract(dir, &self.s[dir], false, a, ext, b, Accumulate::Replace);
            std::mem::swap(a, b);
        }
        let last = self.dim - 1;
        contract(last, &self.s[last], false, a, ext, &mut v[..len], Accumulate::Replace);
    }

    /// Interior rows of `Ā_j u` for a closure tensor `u`, combined into `out`.
    pub fn apply_operator(&self, u: &[T], out: &mut [T], mode: Accumulate, scratch: &mut PatchScratch<T>) {
        let pair = (&self.mass_i, &self.stiffness_i);
        let factors = [pair; 3];
        let ext = self.ext(2 * self.degree + 1);
        kron_sum_apply(&factors[..self.dim], u, ext, out, mode, &mut scratch.kron);
    }

    /// `A^{II} u^I` for an interior tensor.
    pub fn apply_interior_operator(&self, u: &[T], out: &mut [T], mode: Accumulate, scratch: &mut PatchScratch<T>) {
        let pair = (&self.mass_ii, &self.stiffness_ii);
        let factors = [pair; 3];
        let ext = self.ext(2 * self.degree - 1);
        kron_sum_apply(&factors[..self.dim], u, ext, out, mode, &mut scratch.kron);
    }

    /// `A^{IB} x^B` for a shell vector in [`ShellLayout`] order, combined into `out`.
    pub fn apply_interface(&self, xb: &[T], out: &mut [T], mode: Accumulate, scratch: &mut PatchScratch<T>) {
        let follow = if mode == Accumulate::Subtract { Accumulate::Subtract } else { Accumulate::Add };
        for (a, slab) in self.shell.slabs.iter().enumerate() {
            let pick = |b: usize| {
                if b == a {
                    (&self.mass_ib, &self.stiffness_ib)
                } else if b < a {
                    (&self.mass_i, &self.stiffness_i)
                } else {
                    (&self.mass_ii, &self.stiffness_ii)
                }
            };
            let factors = [pick(0), pick(1), pick(2)];
            let off = self.shell.offsets[a];
            let input = &xb[off..off + slab.len];
            let m = if a == 0 { mode } else { follow };
            kron_sum_apply(&factors[..self.dim], input, slab.extents, out, m, &mut scratch.kron);
        }
    }

    /// Flips the sign of the interface blocks. Used to check that the
    /// verification suite notices a broken `A^{IB}`.
    #[doc(hidden)]
    pub fn inject_interface_sign_error(&mut self) {
        for m in [&mut self.mass_ib, &mut self.stiffness_ib] {
            *m = DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| -m.get(i, j));
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `A_j^{-1} r` by fast diagonalization.
pub fn apply_patch_inverse(pm: &Patch1DMatrices, fd: &FastDiagData, r: &[f64]) -> Result<Vec<f64>> {
    let kern = PatchKernels::<f64>::new(pm, fd);
    check_len(kern.interior_len(), r.len())?;
    let mut v = vec![0.0; r.len()];
    kern.apply_inverse(r, &mut v, &mut PatchScratch::new());
    Ok(v)
}

/// Interior rows of `Ā_j u` for a closure tensor `u`.
pub fn apply_patch_operator(pm: &Patch1DMatrices, dim: usize, u: &[f64]) -> Result<Vec<f64>> {
    let fd = FastDiagData::new(pm, dim)?;
    let kern = PatchKernels::<f64>::new(pm, &fd);
    check_len(kern.closure_len(), u.len())?;
    let mut out = vec![0.0; kern.interior_len()];
    kern.apply_operator(u, &mut out, Accumulate::Replace, &mut PatchScratch::new());
    Ok(out)
}

/// `A^{IB} x^B` for a shell vector in [`ShellLayout`] order.
pub fn apply_interface_operator(pm: &Patch1DMatrices, dim: usize, xb: &[f64]) -> Result<Vec<f64>> {
    let fd = FastDiagData::new(pm, dim)?;
    let kern = PatchKernels::<f64>::new(pm, &fd);
    check_len(kern.shell().len, xb.len())?;
    let mut out = vec![0.0; kern.interior_len()];
    kern.apply_interface(xb, &mut out, Accumulate::Replace, &mut PatchScratch::new());
    Ok(out)
}

/// Dense `Σ_a (⊗ … A_a … ⊗)` from per-direction 1D blocks, direction 0 fastest.
pub fn dense_kronecker_sum(mass: &DenseMatrix<f64>, stiffness: &DenseMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let (m, a) = (to_na(mass), to_na(stiffness));
    let mut total: Option<DMatrix<f64>> = None;
    for dir in 0..dim {
        let pick = |b: usize| if b == dir { &a } else { &m };
        let mut k = pick(0).clone();
        for b in 1..dim {
            k = pick(b).kronecker(&k);
        }
        total = Some(match total {
            None => k,
            Some(t) => t + k,
        });
    }
    total.expect("dim >= 1")
}

/// Dense inverse of the interior patch matrix `A_j`.
pub fn dense_patch_inverse(pm: &Patch1DMatrices, dim: usize) -> Result<DenseMatrix<f64>> {
    let a = dense_kronecker_sum(&pm.mass_ii, &pm.stiffness_ii, dim);
    let inv = a.lu().try_inverse().ok_or_else(|| invalid("singular patch matrix"))?;
    Ok(from_na(&inv))
}

/// Closure-local indices of the interior nodes and of the shell nodes in
/// [`ShellLayout`] order.
pub fn closure_index_sets(dim: usize, k: usize) -> (Vec<usize>, Vec<usize>) {
    let n = 2 * k + 1;
    let flat = |i: usize, j: usize, l: usize| i + n * (j + n * l);
    let mut interior = Vec::new();
    let zr = if dim == 3 { 1..2 * k } else { 0..1 };
    for l in zr {
        for j in 1..2 * k {
            for i in 1..2 * k {
                interior.push(flat(i, j, l));
            }
        }
    }
    let shell = ShellLayout::new(dim, k);
    let mut boundary = Vec::new();
    for slab in &shell.slabs {
        for &l in &slab.lists[2] {
            for &j in &slab.lists[1] {
                for &i in &slab.lists[0] {
                    boundary.push(flat(i, j, l));
                }
            }
        }
    }
    (interior, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        num / b.iter().map(|y| y * y).sum::<f64>().sqrt()
    }

    #[test]
    fn linear_patch_blocks() {
        let h = 0.5;
        let p = patch_matrices_1d(1, h).unwrap();
        assert!((p.stiffness_ii.get(0, 0) - 2.0 / h).abs() < 1e-14);
        assert!((p.mass_ii.get(0, 0) - 2.0 * h / 3.0).abs() < 1e-15);
        for j in 0..2 {
            assert!((p.stiffness_ib.get(0, j) + 1.0 / h).abs() < 1e-14);
            assert!((p.mass_ib.get(0, j) - h / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_cell_assembly_matches_direct_oracle() {
        // 1D assembly over a two-cell mesh with independent indexing
        let (k, h) = (2, 0.3);
        let p = patch_matrices_1d(k, h).unwrap();
        let c = cell_matrices_1d(k, h).unwrap();
        let n = 2 * k + 1;
        let mut direct = vec![vec![0.0; n]; n];
        for cell in 0..2 {
            let dofs: Vec<usize> = (0..=k).map(|i| cell * k + i).collect();
            for (i, &gi) in dofs.iter().enumerate() {
                for (j, &gj) in dofs.iter().enumerate() {
                    direct[gi][gj] += c.stiffness.get(i, j);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_eq!(p.stiffness.get(i, j), direct[i][j]);
            }
        }
        // block extraction consistency
        for i in 0..2 * k - 1 {
            for j in 0..2 * k - 1 {
                assert_eq!(p.stiffness_ii.get(i, j), p.stiffness.get(i + 1, j + 1));
            }
            assert_eq!(p.stiffness_ib.get(i, 0), p.stiffness.get(i + 1, 0));
            assert_eq!(p.stiffness_ib.get(i, 1), p.stiffness.get(i + 1, 2 * k));
        }
    }

    #[test]
    fn eigen_identity_pencil() {
        let p = patch_matrices_1d(3, 0.25).unwrap();
        let (s, l) = generalized_eigen(&p.mass_ii, &p.mass_ii).unwrap();
        assert!(l.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let (s, m) = (to_na(&s), to_na(&p.mass_ii));
        let g = s.transpose() * m * s;
        assert!((g - DMatrix::identity(5, 5)).amax() < 1e-12);
    }

    #[test]
    fn eigen_scalar_pencil() {
        let h = 0.25;
        let p = patch_matrices_1d(1, h).unwrap();
        let (s, l) = generalized_eigen(&p.stiffness_ii, &p.mass_ii).unwrap();
        assert!((l[0] - 3.0 / (h * h)).abs() < 1e-10);
        assert!((s.get(0, 0) - (3.0 / (2.0 * h)).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn eigen_identities_hold_up_to_degree_eight() {
        for k in 1..=8 {
            let p = patch_matrices_1d(k, 0.125).unwrap();
            let (s, l) = generalized_eigen(&p.stiffness_ii, &p.mass_ii).unwrap();
            let (sn, m, a) = (to_na(&s), to_na(&p.mass_ii), to_na(&p.stiffness_ii));
            let n = 2 * k - 1;
            let orth = sn.transpose() * &m * &sn - DMatrix::identity(n, n);
            assert!(orth.amax() < 1e-12, "k={k}: MS orthonormality {}", orth.amax());
            let lam = DMatrix::from_diagonal(&DVector::from_vec(l.clone()));
            let res = &a * &sn - &m * &sn * lam;
            assert!(res.amax() < 1e-11 * a.amax(), "k={k}");
            assert!(l.iter().all(|&v| v > 0.0));
            assert!(l.windows(2).all(|w| w[0] <= w[1]));
            // reconstruction M S Λ Sᵀ M = A
            let recon = &m * &sn * DMatrix::from_diagonal(&DVector::from_vec(l)) * sn.transpose() * &m;
            assert!((recon - &a).amax() < 1e-11 * a.amax());
            for c in 0..n {
                let first = (0..n).map(|r| sn[(r, c)]).find(|v| v.abs() > 1e-12).unwrap();
                assert!(first > 0.0);
            }
        }
    }

    #[test]
    fn eigen_rejects_indefinite_mass() {
        let a = DenseMatrix::identity(2);
        let m = DenseMatrix::from_fn(2, 2, |i, j| if i == j { -1.0 } else { 0.0 });
        assert_eq!(generalized_eigen(&a, &m).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn single_node_inverse() {
        for h in [0.5, 0.1] {
            let p = patch_matrices_1d(1, h).unwrap();
            let fd = FastDiagData::new(&p, 2).unwrap();
            let v = apply_patch_inverse(&p, &fd, &[1.0]).unwrap();
            assert!((v[0] - 3.0 / 8.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fast_inverse_matches_dense_inverse() {
        for dim in [2, 3] {
            for k in 1..=6 {
                let p = patch_matrices_1d(k, 1.0 / 16.0).unwrap();
                let fd = FastDiagData::new(&p, dim).unwrap();
                let n = (2 * k - 1).pow(dim as u32);
                let r = rand_vec(n, (dim * 10 + k) as u64);
                let fast = apply_patch_inverse(&p, &fd, &r).unwrap();
                let dense = dense_patch_inverse(&p, dim).unwrap();
                let expect: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dense.get(i, j) * r[j]).sum()).collect();
                assert!(rel(&fast, &expect) < 1e-11, "dim={dim} k={k}: {}", rel(&fast, &expect));

                // round trip through the forward interior operator
                let kern = PatchKernels::<f64>::new(&p, &fd);
                let mut back = vec![0.0; n];
                kern.apply_interior_operator(&fast, &mut back, Accumulate::Replace, &mut PatchScratch::new());
                assert!(rel(&back, &r) < 1e-10);
            }
        }
    }

    #[test]
    fn patch_operator_matches_dense_patch_matrix() {
        for dim in [2, 3] {
            for k in 1..=4 {
                let p = patch_matrices_1d(k, 0.2).unwrap();
                let full = dense_kronecker_sum(&p.mass, &p.stiffness, dim);
                let u = rand_vec(full.ncols(), 3);
                let (interior, boundary) = closure_index_sets(dim, k);
                let au = &full * DVector::from_vec(u.clone());
                let expect: Vec<f64> = interior.iter().map(|&i| au[i]).collect();
                let got = apply_patch_operator(&p, dim, &u).unwrap();
                assert!(rel(&got, &expect) < 1e-13);
                assert!(apply_patch_operator(&p, dim, &vec![0.0; u.len()]).unwrap().iter().all(|&v| v == 0.0));

                // interface block against dense extraction
                let xb = rand_vec(boundary.len(), 4);
                let ib = apply_interface_operator(&p, dim, &xb).unwrap();
                let expect_ib: Vec<f64> = interior
                    .iter()
                    .map(|&i| boundary.iter().zip(&xb).map(|(&j, &x)| full[(i, j)] * x).sum())
                    .collect();
                assert!(rel(&ib, &expect_ib) < 1e-12, "dim={dim} k={k}");
                assert!(apply_interface_operator(&p, dim, &vec![0.0; xb.len()]).unwrap().iter().all(|&v| v == 0.0));

                // A u = A^II u^I + A^IB u^B
                let fd = FastDiagData::new(&p, dim).unwrap();
                let kern = PatchKernels::<f64>::new(&p, &fd);
                let ui: Vec<f64> = interior.iter().map(|&i| u[i]).collect();
                let ub: Vec<f64> = boundary.iter().map(|&i| u[i]).collect();
                let mut split = vec![0.0; interior.len()];
                let mut s = PatchScratch::new();
                kern.apply_interior_operator(&ui, &mut split, Accumulate::Replace, &mut s);
                kern.apply_interface(&ub, &mut split, Accumulate::Add, &mut s);
                assert!(rel(&split, &got) < 1e-12);
            }
        }
    }

    #[test]
    fn sign_injection_breaks_block_identity() {
        let p = patch_matrices_1d(2, 0.25).unwrap();
        let fd = FastDiagData::new(&p, 2).unwrap();
        let mut kern = PatchKernels::<f64>::new(&p, &fd);
        let xb = rand_vec(kern.shell().len, 1);
        let mut good = vec![0.0; kern.interior_len()];
        let mut bad = good.clone();
        let mut s = PatchScratch::new();
        kern.apply_interface(&xb, &mut good, Accumulate::Replace, &mut s);
        kern.inject_interface_sign_error();
        kern.apply_interface(&xb, &mut bad, Accumulate::Replace, &mut s);
        assert!(rel(&bad, &good) > 1.0);
    }

    #[test]
    fn shape_checks() {
        let p = patch_matrices_1d(2, 0.25).unwrap();
        assert!(apply_patch_operator(&p, 2, &[0.0; 5]).is_err());
        assert!(apply_interface_operator(&p, 3, &[0.0; 5]).is_err());
        let fd = FastDiagData::new(&p, 2).unwrap();
        assert!(apply_patch_inverse(&p, &fd, &[0.0; 4]).is_err());
    }
}
