//! Vertex patches: the `2^d` cells around each interior vertex, their parity
//! coloring, and the gather/scatter maps between global vectors and patch
//! tensors.

use crate::boxes::{gather_box, gather_lists, scatter_box};
use crate::error::{Error, Result};
use crate::mesh::CartesianLevel;
use crate::real::Real;

/// One vertex patch, addressed by the position of its lowest closure node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchIndex {
    /// Vertex lattice coordinates, `1 ≤ v_a ≤ n − 1` (unused directions are 0).
    pub vertex: [usize; 3],
    pub color: usize,
    /// Linear index of the lowest closure node; may lie outside the domain.
    pub first_dof: isize,
    pub strides: [usize; 3],
    /// Multi-index of the lowest closure node.
    pub start: [isize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Footprint {
    /// All `(2k+1)^d` nodes including the patch boundary.
    Closure,
    /// The `(2k−1)^d` nodes strictly inside the patch.
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterMode {
    Replace,
    Add,
}

#[derive(Debug, Clone)]
pub struct PatchSet {
    level: CartesianLevel,
    colors: Vec<Vec<PatchIndex>>,
}

/// All `(n−1)^d` vertex patches, grouped by color `Σ_a (v_a mod 2)·2^a`.
pub fn enumerate_patches(level: &CartesianLevel) -> PatchSet {
    let (d, k, n) = (level.dim, level.degree, level.cells_per_dim);
    let m = level.dofs_per_dim;
    let strides = [1, m, m * m];
    let hi = |a: usize| if a < d { n } else { 2 };
    let mut colors = vec![Vec::new(); 1 << d];
    for v2 in 1..hi(2) {
        for v1 in 1..hi(1) {
            for v0 in 1..hi(0) {
                let mut vertex = [v0, v1, v2];
                let mut start = [0isize; 3];
                let mut color = 0;
                for a in 0..3 {
                    if a < d {
                        start[a] = ((vertex[a] - 1) * k) as isize - 1;
                        color += (vertex[a] % 2) << a;
                    } else {
                        vertex[a] = 0;
                    }
                }
                let first_dof = (0..d).map(|a| start[a] * strides[a] as isize).sum();
                colors[color].push(PatchIndex { vertex, color, first_dof, strides, start });
            }
        }
    }
    PatchSet { level: *level, colors }
}

impl PatchSet {
    pub fn level(&self) -> &CartesianLevel {
        &self.level
    }

    pub fn colors(&self) -> &[Vec<PatchIndex>] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.colors.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &PatchIndex> {
        self.colors.iter().flatten()
    }

    fn extents(&self, n: usize) -> [usize; 3] {
        let mut e = [1; 3];
        e[..self.level.dim].iter_mut().for_each(|v| *v = n);
        e
    }

    pub fn closure_extents(&self) -> [usize; 3] {
        self.extents(2 * self.level.degree + 1)
    }

    pub fn interior_extents(&self) -> [usize; 3] {
        self.extents(2 * self.level.degree - 1)
    }

    pub fn footprint_len(&self, fp: Footprint) -> usize {
        match fp {
            Footprint::Closure => self.closure_extents().iter().product(),
            Footprint::Interior => self.interior_extents().iter().product(),
        }
    }

    fn interior_start(&self, p: &PatchIndex) -> [isize; 3] {
        let mut s = p.start;
        s[..self.level.dim].iter_mut().for_each(|v| *v += 1);
        s
    }

    pub fn gather<T: Real>(&self, x: &[T], patch: &PatchIndex, fp: Footprint) -> Result<Vec<T>> {
        if x.len() != self.level.total_dofs {
            return Err(Error::DimensionMismatch { expected: self.level.total_dofs, got: x.len() });
        }
        let mut out = vec![T::zero(); self.footprint_len(fp)];
        self.gather_into(x, patch, fp, &mut out);
        Ok(out)
    }

    /// Unchecked gather into a buffer of at least the footprint length.
    pub(crate) fn gather_into<T: Real>(&self, x: &[T], patch: &PatchIndex, fp: Footprint, out: &mut [T]) {
        let ext = self.level.extents3();
        match fp {
            Footprint::Closure => gather_box(x, ext, patch.start, self.closure_extents(), out),
            Footprint::Interior => gather_box(x, ext, self.interior_start(patch), self.interior_extents(), out),
        }
    }

    pub fn scatter_interior<T: Real>(
        &self,
        local: &[T],
        patch: &PatchIndex,
        x: &mut [T],
        mode: ScatterMode,
    ) -> Result<()> {
        let need = self.footprint_len(Footprint::Interior);
        if local.len() != need {
            return Err(Error::DimensionMismatch { expected: need, got: local.len() });
        }
        if x.len() != self.level.total_dofs {
            return Err(Error::DimensionMismatch { expected: self.level.total_dofs, got: x.len() });
        }
        self.scatter_interior_unchecked(local, patch, x, mode);
        Ok(())
    }

    pub(crate) fn scatter_interior_unchecked<T: Real>(
        &self,
        local: &[T],
        patch: &PatchIndex,
        x: &mut [T],
        mode: ScatterMode,
    ) {
        let ext = self.level.extents3();
        let add = mode == ScatterMode::Add;
        scatter_box(local, ext, self.interior_start(patch), self.interior_extents(), x, add);
    }

    /// Gathers the boundary shell of the closure in the slab layout of [`ShellLayout`].
    pub(crate) fn gather_shell_into<T: Real>(&self, x: &[T], patch: &PatchIndex, shell: &ShellLayout, out: &mut [T]) {
        let ext = self.level.extents3();
        for (a, slab) in shell.slabs.iter().enumerate() {
            let lists = [&slab.lists[0][..], &slab.lists[1][..], &slab.lists[2][..]];
            let off = shell.offsets[a];
            gather_lists(x, ext, patch.start, lists, &mut out[off..off + slab.len]);
        }
    }

    /// Global indices written by a patch (clipped entries omitted).
    pub fn interior_indices(&self, patch: &PatchIndex) -> Vec<usize> {
        let m = self.level.dofs_per_dim as isize;
        let e = self.interior_extents();
        let s = self.interior_start(patch);
        let mut out = Vec::new();
        for k in 0..e[2] {
            for j in 0..e[1] {
                for i in 0..e[0] {
                    let g = [s[0] + i as isize, s[1] + j as isize, s[2] + k as isize];
                    let d = self.level.dim;
                    if (0..d).all(|a| g[a] >= 0 && g[a] < m) {
                        out.push((g[0] + m * (g[1] + m * g[2])) as usize);
                    }
                }
            }
        }
        out
    }

    /// Global indices read by a patch (clipped entries omitted).
    pub fn closure_indices(&self, patch: &PatchIndex) -> Vec<usize> {
        let m = self.level.dofs_per_dim as isize;
        let e = self.closure_extents();
        let d = self.level.dim;
        let mut out = Vec::new();
        for k in 0..e[2] {
            for j in 0..e[1] {
                for i in 0..e[0] {
                    let g = [patch.start[0] + i as isize, patch.start[1] + j as isize, patch.start[2] + k as isize];
                    if (0..d).all(|a| g[a] >= 0 && g[a] < m) {
                        out.push((g[0] + m * (g[1] + m * g[2])) as usize);
                    }
                }
            }
        }
        out
    }
}

/// One face pair of the patch boundary shell.
#[derive(Debug, Clone)]
pub struct ShellSlab {
    /// Closure-local node lists per direction.
    pub lists: [Vec<usize>; 3],
    pub extents: [usize; 3],
    pub len: usize,
}

/// The closure boundary `(2k+1)^d − (2k−1)^d` split into `d` slabs.
///
/// Slab `a` holds the nodes at local position `0` or `2k` in direction `a`.
/// Nodes on several faces (edges, corners) belong to the slab of the highest
/// such direction: slab `a` spans the full closure in directions `b < a` and
/// only the interior in directions `b > a`.
#[derive(Debug, Clone)]
pub struct ShellLayout {
    pub slabs: Vec<ShellSlab>,
    pub offsets: Vec<usize>,
    pub len: usize,
}

impl ShellLayout {
    pub fn new(dim: usize, degree: usize) -> Self {
        let k = degree;
        let mut slabs = Vec::with_capacity(dim);
        let mut offsets = Vec::with_capacity(dim);
        let mut len = 0;
        for a in 0..dim {
            let lists: [Vec<usize>; 3] = std::array::from_fn(|b| {
                if b >= dim {
                    vec![0]
                } else if b == a {
                    vec![0, 2 * k]
                } else if b < a {
                    (0..=2 * k).collect()
                } else {
                    (1..2 * k).collect()
                }
            });
            let extents = [lists[0].len(), lists[1].len(), lists[2].len()];
            let slab_len = extents.iter().product();
            offsets.push(len);
            len += slab_len;
            slabs.push(ShellSlab { lists, extents, len: slab_len });
        }
        Self { slabs, offsets, len }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn two_d_level_two_colors() {
        let l = CartesianLevel::new(2, 2, 2).unwrap();
        let p = enumerate_patches(&l);
        assert_eq!(p.len(), 9);
        let sizes: Vec<usize> = p.colors().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![1, 2, 2, 4]);
        for (c, patches) in p.colors().iter().enumerate() {
            for patch in patches {
                assert_eq!(patch.color, c);
                assert_eq!(patch.color, (patch.vertex[0] % 2) + 2 * (patch.vertex[1] % 2));
            }
        }
    }

    #[test]
    fn coarsest_three_d() {
        let l = CartesianLevel::new(3, 2, 1).unwrap();
        let p = enumerate_patches(&l);
        assert_eq!(p.len(), 1);
        assert_eq!(p.colors().iter().filter(|c| !c.is_empty()).count(), 1);
        assert!(p.colors().len() <= 8);
        let patch = p.iter().next().unwrap();
        // the single patch covers every unknown
        assert_eq!(p.interior_indices(patch).len(), l.total_dofs);
    }

    #[test]
    fn patch_counts() {
        for (d, k, lvl) in [(2, 1, 3), (3, 2, 2), (2, 3, 4)] {
            let l = CartesianLevel::new(d, k, lvl).unwrap();
            let p = enumerate_patches(&l);
            assert_eq!(p.len(), (l.cells_per_dim - 1).pow(d as u32));
            assert!(p.colors().len() <= 1 << d);
        }
    }

    #[test]
    fn gather_ones_and_boundary_zeros() {
        let l = CartesianLevel::new(2, 2, 3).unwrap();
        let p = enumerate_patches(&l);
        let ones = vec![1.0f64; l.total_dofs];
        let inner = p.iter().find(|q| q.vertex[0] == 3 && q.vertex[1] == 4).unwrap();
        assert!(p.gather(&ones, inner, Footprint::Closure).unwrap().iter().all(|&v| v == 1.0));
        let corner = p.iter().find(|q| q.vertex[0] == 1 && q.vertex[1] == 1).unwrap();
        let g = p.gather(&ones, corner, Footprint::Closure).unwrap();
        let n = 5;
        for j in 0..n {
            for i in 0..n {
                let expect = if i == 0 || j == 0 { 0.0 } else { 1.0 };
                assert_eq!(g[j * n + i], expect);
            }
        }
        assert_eq!(p.gather(&ones, corner, Footprint::Interior).unwrap().len(), 9);
    }

    #[test]
    fn gather_scatter_round_trip() {
        let l = CartesianLevel::new(3, 2, 2).unwrap();
        let p = enumerate_patches(&l);
        let x: Vec<f64> = (0..l.total_dofs).map(|i| i as f64).collect();
        for patch in p.iter() {
            let local = p.gather(&x, patch, Footprint::Interior).unwrap();
            let mut y = x.clone();
            p.scatter_interior(&local, patch, &mut y, ScatterMode::Replace).unwrap();
            assert_eq!(x, y);
            let zero = vec![0.0; local.len()];
            p.scatter_interior(&zero, patch, &mut y, ScatterMode::Add).unwrap();
            assert_eq!(x, y);
        }
        let patch = p.iter().next().unwrap();
        let mut y = x.clone();
        assert!(p.scatter_interior(&[0.0; 3], patch, &mut y, ScatterMode::Add).is_err());
    }

    #[test]
    fn replace_writes_interior_footprint() {
        let l = CartesianLevel::new(2, 3, 3).unwrap();
        let p = enumerate_patches(&l);
        let patch = p.iter().find(|q| q.vertex == [4, 4, 0]).unwrap();
        let local = vec![7.0; 25];
        let mut y = vec![0.0f64; l.total_dofs];
        p.scatter_interior(&local, patch, &mut y, ScatterMode::Replace).unwrap();
        assert_eq!(y.iter().filter(|&&v| v == 7.0).count(), 25);
    }

    #[test]
    fn same_color_patches_are_write_disjoint() {
        for dim in [2, 3] {
            for k in 1..=4 {
                let l = CartesianLevel::new(dim, k, 3).unwrap();
                let p = enumerate_patches(&l);
                for color in p.colors() {
                    let mut written = HashSet::new();
                    for patch in color {
                        for i in p.interior_indices(patch) {
                            assert!(written.insert(i), "dim={dim} k={k}: index {i} written twice");
                        }
                    }
                    // no patch reads what another patch of its color writes
                    for patch in color {
                        let own: HashSet<usize> = p.interior_indices(patch).into_iter().collect();
                        for i in p.closure_indices(patch) {
                            assert!(own.contains(&i) || !written.contains(&i));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn union_of_interiors_covers_all_unknowns() {
        let l = CartesianLevel::new(2, 2, 3).unwrap();
        let p = enumerate_patches(&l);
        let covered: HashSet<usize> = p.iter().flat_map(|q| p.interior_indices(q)).collect();
        assert_eq!(covered.len(), l.total_dofs);
    }

    #[test]
    fn direction_relabeling_preserves_coloring() {
        let l = CartesianLevel::new(2, 2, 4).unwrap();
        let p = enumerate_patches(&l);
        let swapped: HashSet<(usize, usize, usize)> = p
            .iter()
            .map(|q| (q.vertex[1], q.vertex[0], (q.vertex[1] % 2) + 2 * (q.vertex[0] % 2)))
            .collect();
        let direct: HashSet<(usize, usize, usize)> =
            p.iter().map(|q| (q.vertex[0], q.vertex[1], q.color)).collect();
        assert_eq!(swapped, direct);
    }

    #[test]
    fn shell_layout_partitions_boundary() {
        for dim in [2, 3] {
            for k in 1..=4 {
                let s = ShellLayout::new(dim, k);
                let n = 2 * k + 1;
                assert_eq!(s.len, n.pow(dim as u32) - (n - 2).pow(dim as u32));
                let mut seen = HashSet::new();
                for slab in &s.slabs {
                    for &c in &slab.lists[2] {
                        for &b in &slab.lists[1] {
                            for &a in &slab.lists[0] {
                                assert!(seen.insert((a, b, c)));
                            }
                        }
                    }
                }
            }
        }
    }
}
