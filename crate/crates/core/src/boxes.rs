//! Copying axis-aligned boxes between a global lexicographic vector and a
//! dense local tensor. Positions outside the global extents read as zero and
//! are never written.

use crate::real::Real;
use crate::tensor::Extents;

/// Local index range `[lo, hi)` whose global positions `start + i` fall in `[0, ext)`.
#[inline]
fn clip(start: isize, size: usize, ext: usize) -> (usize, usize) {
    let lo = (-start).max(0) as usize;
    let hi = (ext as isize - start).clamp(0, size as isize) as usize;
    (lo.min(hi), hi)
}

#[inline]
fn stride(ext: Extents) -> [usize; 3] {
    [1, ext[0], ext[0] * ext[1]]
}

pub(crate) fn gather_box<T: Real>(x: &[T], ext: Extents, start: [isize; 3], size: Extents, out: &mut [T]) {
    let (x0, x1) = clip(start[0], size[0], ext[0]);
    let (y0, y1) = clip(start[1], size[1], ext[1]);
    let (z0, z1) = clip(start[2], size[2], ext[2]);
    let full = x0 == 0 && x1 == size[0] && y0 == 0 && y1 == size[1] && z0 == 0 && z1 == size[2];
    if !full {
        out[..size[0] * size[1] * size[2]].iter_mut().for_each(|v| *v = T::zero());
    }
    if x0 == x1 || y0 == y1 || z0 == z1 {
        return;
    }
    let s = stride(ext);
    for k in z0..z1 {
        let gz = (start[2] + k as isize) as usize * s[2];
        for j in y0..y1 {
            let gy = gz + (start[1] + j as isize) as usize * s[1];
            let g = (gy as isize + start[0] + x0 as isize) as usize;
            let l = (k * size[1] + j) * size[0];
            out[l + x0..l + x1].copy_from_slice(&x[g..g + x1 - x0]);
        }
    }
}

/// Writes (`add == false`) or adds a local box into `x`, skipping clipped positions.
pub(crate) fn scatter_box<T: Real>(
    local: &[T],
    ext: Extents,
    start: [isize; 3],
    size: Extents,
    x: &mut [T],
    add: bool,
) {
    let (x0, x1) = clip(start[0], size[0], ext[0]);
    let (y0, y1) = clip(start[1], size[1], ext[1]);
    let (z0, z1) = clip(start[2], size[2], ext[2]);
    if x0 == x1 || y0 == y1 || z0 == z1 {
        return;
    }
    let s = stride(ext);
    for k in z0..z1 {
        let gz = (start[2] + k as isize) as usize * s[2];
        for j in y0..y1 {
            let gy = gz + (start[1] + j as isize) as usize * s[1];
            let g = (gy as isize + start[0] + x0 as isize) as usize;
            let l = (k * size[1] + j) * size[0];
            let dst = &mut x[g..g + x1 - x0];
            let src = &local[l + x0..l + x1];
            if add {
                dst.iter_mut().zip(src).for_each(|(d, &v)| *d += v);
            } else {
                dst.copy_from_slice(src);
            }
        }
    }
}

/// Gathers the tensor-product set `start + (lists[0] × lists[1] × lists[2])`.
pub(crate) fn gather_lists<T: Real>(
    x: &[T],
    ext: Extents,
    start: [isize; 3],
    lists: [&[usize]; 3],
    out: &mut [T],
) {
    let s = stride(ext);
    let valid = |a: usize, i: usize| {
        let g = start[a] + i as isize;
        (g >= 0 && (g as usize) < ext[a]).then_some(g as usize)
    };
    let mut o = 0;
    for &k in lists[2] {
        let gz = valid(2, k);
        for &j in lists[1] {
            let gy = valid(1, j);
            for &i in lists[0] {
                out[o] = match (gz, gy, valid(0, i)) {
                    (Some(z), Some(y), Some(xx)) => x[z * s[2] + y * s[1] + xx],
                    _ => T::zero(),
                };
                o += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gather_clips_and_scatter_round_trips() {
        let ext = [4, 3, 1];
        let x: Vec<f64> = (1..=12).map(|v| v as f64).collect();
        let mut out = vec![9.0; 9];
        gather_box(&x, ext, [-1, -1, 0], [3, 3, 1], &mut out);
        assert_eq!(out, vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 5.0, 6.0]);

        let mut y = vec![0.0; 12];
        scatter_box(&out, ext, [-1, -1, 0], [3, 3, 1], &mut y, false);
        assert_eq!(&y[..2], &[1.0, 2.0]);
        assert_eq!(&y[4..6], &[5.0, 6.0]);
        assert_eq!(y.iter().filter(|v| **v != 0.0).count(), 4);

        let mut far = vec![1.0; 4];
        gather_box(&x, ext, [10, 0, 0], [2, 2, 1], &mut far);
        assert!(far.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn list_gather_matches_box_gather() {
        let ext = [5, 5, 5];
        let x: Vec<f64> = (0..125).map(|v| v as f64 * 0.5).collect();
        let all: Vec<usize> = (0..4).collect();
        let mut a = vec![0.0; 64];
        let mut b = vec![0.0; 64];
        gather_box(&x, ext, [2, -1, 3], [4, 4, 4], &mut a);
        gather_lists(&x, ext, [2, -1, 3], [&all, &all, &all], &mut b);
        assert_eq!(a, b);
    }
}
