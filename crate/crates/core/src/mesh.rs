//! Nested Cartesian meshes on the unit square/cube and the lexicographic
//! numbering of interior degrees of freedom.
//!
//! Level `ℓ` has `n = 2^ℓ` cells per direction. With `Q_k` elements the 1D
//! node lattice has `n·k + 1` nodes, of which the two boundary nodes are
//! eliminated (homogeneous Dirichlet), leaving `m = n·k − 1` interior nodes per
//! direction and `N = m^d` unknowns. Direction 0 runs fastest.

use std::fmt;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianLevel {
    pub level: usize,
    pub dim: usize,
    pub degree: usize,
    pub cells_per_dim: usize,
    pub spacing: f64,
    pub dofs_per_dim: usize,
    pub total_dofs: usize,
}

impl fmt::Display for CartesianLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "level {} ({}D, Q{}, N={})", self.level, self.dim, self.degree, self.total_dofs)
    }
}

pub(crate) fn check_dim_degree(dim: usize, degree: usize) -> Result<()> {
    if dim != 2 && dim != 3 {
        return Err(invalid(format!("dimension must be 2 or 3, got {dim}")));
    }
    if degree < 1 {
        return Err(invalid("polynomial degree must be at least 1"));
    }
    Ok(())
}

impl CartesianLevel {
    pub fn new(dim: usize, degree: usize, level: usize) -> Result<Self> {
        check_dim_degree(dim, degree)?;
        if level < 1 {
            return Err(invalid("level must be at least 1 (level 0 has no interior vertex)"));
        }
        if level > 24 {
            return Err(invalid(format!("level {level} is far beyond addressable size")));
        }
        let n = 1usize << level;
        let m = n * degree - 1;
        Ok(Self {
            level,
            dim,
            degree,
            cells_per_dim: n,
            spacing: 1.0 / n as f64,
            dofs_per_dim: m,
            total_dofs: m.pow(dim as u32),
        })
    }

    /// Stride of direction `a` in the lexicographic numbering.
    #[inline]
    pub fn stride(&self, a: usize) -> usize {
        self.dofs_per_dim.pow(a as u32)
    }

    /// Interior-node extents padded to three directions (unused ones are 1).
    #[inline]
    pub fn extents3(&self) -> [usize; 3] {
        let m = self.dofs_per_dim;
        if self.dim == 2 {
            [m, m, 1]
        } else {
            [m, m, m]
        }
    }

    pub fn dof_index(&self, multi_index: &[usize]) -> Result<usize> {
        if multi_index.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: multi_index.len() });
        }
        let m = self.dofs_per_dim;
        if multi_index.iter().any(|&i| i >= m) {
            return Err(Error::IndexOutOfRange { index: multi_index.to_vec(), extent: m });
        }
        Ok(multi_index.iter().rev().fold(0, |acc, &i| acc * m + i))
    }

    /// Inverse of [`dof_index`](Self::dof_index).
    pub fn multi_index(&self, index: usize) -> Vec<usize> {
        let m = self.dofs_per_dim;
        let mut rest = index;
        (0..self.dim)
            .map(|_| {
                let i = rest % m;
                rest /= m;
                i
            })
            .collect()
    }

    /// Coordinate of interior node `i` along one direction.
    pub fn node_coordinate(&self, i: usize, nodes_1d: &[f64]) -> f64 {
        let k = self.degree;
        let g = i + 1;
        let cell = g / k;
        let local = g % k;
        (cell as f64 + nodes_1d[local]) * self.spacing
    }

    /// The next coarser level, if any.
    pub fn coarser(&self) -> Option<Self> {
        (self.level > 1).then(|| Self::new(self.dim, self.degree, self.level - 1).unwrap())
    }

    /// Number of cells, `n^d`.
    pub fn n_cells(&self) -> usize {
        self.cells_per_dim.pow(self.dim as u32)
    }

    /// Cell multi-indices (padded to 3) grouped by parity color `Σ (c_a mod 2)·2^a`.
    pub(crate) fn cells_by_color(&self) -> Vec<Vec<[usize; 3]>> {
        let n = self.cells_per_dim;
        let nz = if self.dim == 3 { n } else { 1 };
        let mut colors = vec![Vec::new(); 1 << self.dim];
        for c2 in 0..nz {
            for c1 in 0..n {
                for c0 in 0..n {
                    let color = (c0 % 2) + 2 * (c1 % 2) + 4 * (c2 % 2);
                    colors[color].push([c0, c1, c2]);
                }
            }
        }
        colors
    }

    /// First interior-DoF position and extents of the `(k+1)^d` node box of a cell.
    pub(crate) fn cell_box(&self, cell: &[usize; 3]) -> ([isize; 3], [usize; 3]) {
        let k = self.degree;
        let mut start = [0isize; 3];
        let mut size = [1usize; 3];
        for a in 0..self.dim {
            start[a] = (cell[a] * k) as isize - 1;
            size[a] = k + 1;
        }
        (start, size)
    }
}

/// Levels `1..=finest_level`, coarsest first.
pub fn build_hierarchy(dim: usize, degree: usize, finest_level: usize) -> Result<Vec<CartesianLevel>> {
    check_dim_degree(dim, degree)?;
    if finest_level < 1 {
        return Err(invalid("finest level must be at least 1"));
    }
    (1..=finest_level).map(|l| CartesianLevel::new(dim, degree, l)).collect()
}
