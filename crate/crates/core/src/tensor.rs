//! Small dense matrices and the sum-factorization kernel: applying a 1D matrix
//! along one direction of a tensor stored with direction 0 fastest.

use crate::error::{Error, Result};
use crate::real::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::default(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    #[inline(always)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline(always)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Sub-block with the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }
}

impl DenseMatrix<f64> {
    pub fn cast<T: Real>(&self) -> DenseMatrix<T> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| T::from_f64(v)).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// How a contraction result is combined with the output buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accumulate {
    Replace,
    Add,
    Subtract,
}

/// Tensor extents padded to three directions; unused directions have extent 1.
pub type Extents = [usize; 3];

#[inline]
pub fn volume(e: Extents) -> usize {
    e[0] * e[1] * e[2]
}

/// Applies `matrix` (or its transpose) along direction `dir` of `input`.
///
/// `input` has extents `extents`; the result has the same extents except
/// along `dir`, where it takes the row count of the (possibly transposed)
/// matrix. Returns the output extents.
pub fn tensor_contract<T: Real>(
    dir: usize,
    matrix: &DenseMatrix<T>,
    transpose: bool,
    input: &[T],
    extents: Extents,
    output: &mut [T],
    mode: Accumulate,
) -> Result<Extents> {
    if dir > 2 {
        return Err(Error::InvalidArgument(format!("contraction direction {dir} out of range")));
    }
    let (rows, cols) = if transpose {
        (matrix.cols, matrix.rows)
    } else {
        (matrix.rows, matrix.cols)
    };
    if extents[dir] != cols {
        return Err(Error::DimensionMismatch { expected: cols, got: extents[dir] });
    }
    if input.len() != volume(extents) {
        return Err(Error::DimensionMismatch { expected: volume(extents), got: input.len() });
    }
    let mut out_ext = extents;
    out_ext[dir] = rows;
    if output.len() != volume(out_ext) {
        return Err(Error::DimensionMismatch { expected: volume(out_ext), got: output.len() });
    }
    contract(dir, matrix, transpose, input, extents, output, mode);
    Ok(out_ext)
}

/// Unchecked kernel behind [`tensor_contract`]; slices may be longer than needed.
#[inline]
pub(crate) fn contract<T: Real>(
    dir: usize,
    matrix: &DenseMatrix<T>,
    transpose: bool,
    input: &[T],
    extents: Extents,
    output: &mut [T],
    mode: Accumulate,
) {
    let (rows, cols) = if transpose {
        (matrix.cols, matrix.rows)
    } else {
        (matrix.rows, matrix.cols)
    };
    debug_assert_eq!(extents[dir], cols);
    let pre: usize = extents[..dir].iter().product();
    let post: usize = extents[dir + 1..].iter().product();
    let mcols = matrix.cols;
    let m = &matrix.data;
    let entry = |i: usize, j: usize| if transpose { m[j * mcols + i] } else { m[i * mcols + j] };

    if pre == 1 {
        for p in 0..post {
            let src = &input[p * cols..(p + 1) * cols];
            let dst = &mut output[p * rows..(p + 1) * rows];
            for (i, d) in dst.iter_mut().enumerate() {
                let mut sum = T::zero();
                for (j, &s) in src.iter().enumerate() {
                    sum += entry(i, j) * s;
                }
                match mode {
                    Accumulate::Replace => *d = sum,
                    Accumulate::Add => *d += sum,
                    Accumulate::Subtract => *d -= sum,
                }
            }
        }
        return;
    }

    for p in 0..post {
        let src_block = &input[p * cols * pre..(p + 1) * cols * pre];
        for i in 0..rows {
            let dst = &mut output[(p * rows + i) * pre..(p * rows + i + 1) * pre];
            if mode == Accumulate::Replace {
                dst.iter_mut().for_each(|d| *d = T::zero());
            }
            for j in 0..cols {
                let mut a = entry(i, j);
                if mode == Accumulate::Subtract {
                    a = -a;
                }
                let src = &src_block[j * pre..(j + 1) * pre];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
    }
}

/// Reusable buffers for [`kron_sum_apply`].
#[derive(Debug, Default, Clone)]
pub struct KronScratch<T> {
    mass_only: Vec<T>,
    next_mass: Vec<T>,
    sum: Vec<T>,
    next_sum: Vec<T>,
}

impl<T: Real> KronScratch<T> {
    pub fn new() -> Self {
        Self { mass_only: Vec::new(), next_mass: Vec::new(), sum: Vec::new(), next_sum: Vec::new() }
    }
}

fn ensure<T: Real>(buf: &mut Vec<T>, len: usize) {
    if buf.len() < len {
        buf.resize(len, T::zero());
    }
}

/// Evaluates `Σ_a (M_{d-1} ⊗ … ⊗ A_a ⊗ … ⊗ M_0) u` by sum factorization,
/// sharing the mass-only partial products between the terms.
///
/// `factors[a] = (mass_a, stiffness_a)` act along direction `a`; they may be
/// rectangular (same shape per direction). The result is combined into
/// `output` according to `mode`. Returns the output extents.
pub fn kron_sum_apply<T: Real>(
    factors: &[(&DenseMatrix<T>, &DenseMatrix<T>)],
    input: &[T],
    extents: Extents,
    output: &mut [T],
    mode: Accumulate,
    scratch: &mut KronScratch<T>,
) -> Extents {
    let dim = factors.len();
    debug_assert!((1..=3).contains(&dim));
    if dim == 1 {
        let (_, a0) = factors[0];
        contract(0, a0, false, input, extents, output, mode);
        let mut e = extents;
        e[0] = a0.rows();
        return e;
    }

    let KronScratch { mass_only, next_mass, sum, next_sum } = scratch;
    let mut ext = extents;

    // direction 0: stiffness term and the shared mass product
    let (m0, a0) = factors[0];
    let mut e0 = ext;
    e0[0] = a0.rows();
    ensure(sum, volume(e0));
    ensure(mass_only, volume(e0));
    contract(0, a0, false, input, ext, sum, Accumulate::Replace);
    contract(0, m0, false, input, ext, mass_only, Accumulate::Replace);
    ext = e0;

    for a in 1..dim {
        let (ma, aa) = factors[a];
        let mut ea = ext;
        ea[a] = aa.rows();
        let last = a + 1 == dim;
        if last {
            let first_mode = mode;
            let second_mode = if mode == Accumulate::Subtract {
                Accumulate::Subtract
            } else {
                Accumulate::Add
            };
            contract(a, ma, false, sum, ext, output, first_mode);
            contract(a, aa, false, mass_only, ext, output, second_mode);
            return ea;
        }
        ensure(next_sum, volume(ea));
        contract(a, ma, false, sum, ext, next_sum, Accumulate::Replace);
        contract(a, aa, false, mass_only, ext, next_sum, Accumulate::Add);
        ensure(next_mass, volume(ea));
        contract(a, ma, false, mass_only, ext, next_mass, Accumulate::Replace);
        std::mem::swap(sum, next_sum);
        std::mem::swap(mass_only, next_mass);
        ext = ea;
    }
    unreachable!()
}
