//! Shared-memory bank-conflict simulation of the patch tensor-contraction
//! kernels, and an on-chip roofline estimate.
//!
//! A kernel invocation contracts a patch tensor with `n` nodes per direction
//! along one direction `dir`. Threads form a 2D `(row, col)` grid (`col`
//! fastest) and each walks the third direction `z`. Every shared-memory
//! access of the contraction loop is replayed per access group (a warp, or a
//! half-warp for 8-byte words) and scored in wavefronts: the largest number
//! of distinct addresses any bank must serve.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::smoother::SmootherVariant;

/// The largest CUDA thread block; the kernel runs `(2k+1)²` threads.
pub const MAX_THREADS_PER_BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Index arithmetic of the straightforward contraction.
    Basic,
    /// Index arithmetic reordered so that stores are contiguous.
    ConflictFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Local residual on the patch closure, `n = 2k+1`.
    Residual,
    /// Local solve on the patch interior, `n = 2k−1`.
    Solver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indexing {
    /// Solver threads keep their closure position; boundary threads idle.
    Masked,
    /// Interior nodes are numbered by the first `(2k−1)²` threads.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Shape,
    Source,
    Destination,
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name $(| $alias)* => Ok($ty::$variant),)+
                    other => Err(invalid(format!(concat!("unknown ", stringify!($ty), " '{}'"), other))),
                }
            }
        }
    };
}

named_enum!(KernelKind { Basic => "basic", ConflictFree => "cf" | "conflict_free" | "conflict-free" });
named_enum!(Stage { Residual => "residual", Solver => "solver" });
named_enum!(Indexing { Masked => "masked", Linear => "linear" });
named_enum!(Access { Shape => "shape", Source => "source", Destination => "destination" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankConfig {
    pub banks: usize,
    pub bank_width_bytes: usize,
    pub word_bytes: usize,
    pub warp_size: usize,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self { banks: 32, bank_width_bytes: 4, word_bytes: 8, warp_size: 32 }
    }
}

impl BankConfig {
    pub fn with_word_bytes(word_bytes: usize) -> Self {
        Self { word_bytes, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.banks.is_power_of_two() || !self.warp_size.is_power_of_two() {
            return Err(invalid("bank count and warp size must be powers of two"));
        }
        if self.word_bytes != 4 && self.word_bytes != 8 {
            return Err(invalid(format!("word size must be 4 or 8 bytes, got {}", self.word_bytes)));
        }
        if self.bank_width_bytes == 0 || self.word_bytes % self.bank_width_bytes != 0 {
            return Err(invalid("word size must be a multiple of the bank width"));
        }
        let span = self.word_bytes / self.bank_width_bytes;
        if self.banks < span || self.warp_size < span {
            return Err(invalid("too few banks or threads for the word size"));
        }
        Ok(())
    }

    /// Banks seen by one word-sized access: 16 for 8-byte words on 32 banks.
    pub fn effective_banks(&self) -> usize {
        self.banks * self.bank_width_bytes / self.word_bytes
    }

    /// Threads served together: a half-warp for 8-byte words.
    pub fn group_size(&self) -> usize {
        self.warp_size * self.bank_width_bytes / self.word_bytes
    }
}

/// The accesses of one instruction by one access group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessGroup {
    pub instruction: usize,
    pub access: Access,
    pub group: usize,
    /// `(thread id, word address)` pairs.
    pub accesses: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessTrace {
    pub kernel: KernelKind,
    pub stage: Stage,
    pub indexing: Indexing,
    pub dim: usize,
    pub dir: usize,
    pub degree: usize,
    pub word_bytes: usize,
    /// Threads in the block, `(2k+1)²`.
    pub threads: usize,
    /// Whether each thread takes part in this stage.
    pub active: Vec<bool>,
    pub groups: Vec<AccessGroup>,
}

/// Closure and stage widths for degree `k`.
fn widths(stage: Stage, k: usize) -> (usize, usize) {
    let big = 2 * k + 1;
    match stage {
        Stage::Residual => (big, big),
        Stage::Solver => (big, 2 * k - 1),
    }
}

/// Logical tensor coordinates `(x0, x1, x2)` of the source and destination
/// entries touched by thread `(row, col)` in layer `z` at loop index `kk`,
/// and the shape-matrix address.
fn listing_indices(kernel: KernelKind, dir: usize, n: usize, row: usize, col: usize, z: usize, kk: usize) -> ([usize; 3], [usize; 3], usize) {
    match kernel {
        KernelKind::Basic => {
            let source = match dir {
                0 => [kk, col, z],
                1 => [col, kk, z],
                _ => [col, z, kk],
            };
            let dest = match dir {
                0 => [row, col, z],
                1 => [col, row, z],
                _ => [col, z, row],
            };
            (source, dest, row * n + kk)
        }
        KernelKind::ConflictFree => {
            let shape = match dir {
                0 => col * n + kk,
                1 => row * n + kk,
                _ => z * n + kk,
            };
            let source = match dir {
                0 => [kk, row, z],
                1 => [col, kk, z],
                _ => [col, row, kk],
            };
            (source, [col, row, z], shape)
        }
    }
}

/// Replays the shared-memory accesses of one contraction.
///
/// The basic kernel keeps the solver-stage tensor inside the closure layout
/// (row stride `2k+1`, offset one node per direction); the conflict-free
/// kernel stores it compactly with stride `2k−1`.
pub fn generate_trace(
    kernel: KernelKind,
    stage: Stage,
    dim: usize,
    dir: usize,
    k: usize,
    config: &BankConfig,
    indexing: Indexing,
) -> Result<AccessTrace> {
    config.validate()?;
    if dim != 2 && dim != 3 {
        return Err(invalid(format!("dimension must be 2 or 3, got {dim}")));
    }
    if dir >= dim {
        return Err(invalid(format!("direction {dir} out of range for {dim}D")));
    }
    if k == 0 {
        return Err(invalid("degree must be at least 1"));
    }
    let (big, n) = widths(stage, k);
    let threads = big * big;
    if threads > MAX_THREADS_PER_BLOCK {
        return Err(Error::Unsupported(format!(
            "degree {k} needs {threads} threads per block, more than {MAX_THREADS_PER_BLOCK}"
        )));
    }

    // (thread id, row, col) of the participating threads
    let mut active = vec![false; threads];
    let mut workers = Vec::new();
    for tid in 0..threads {
        let rc = match (stage, indexing) {
            (Stage::Residual, _) => Some((tid / big, tid % big)),
            (Stage::Solver, Indexing::Masked) => {
                let (r, c) = (tid / big, tid % big);
                (r >= 1 && r <= n && c >= 1 && c <= n).then(|| (r - 1, c - 1))
            }
            (Stage::Solver, Indexing::Linear) => (tid < n * n).then(|| (tid / n, tid % n)),
        };
        if let Some((row, col)) = rc {
            active[tid] = true;
            workers.push((tid, row, col));
        }
    }

    let embedded = kernel == KernelKind::Basic && stage == Stage::Solver;
    let (stride, offset) = if embedded { (big, 1) } else { (n, 0) };
    let address = |x: [usize; 3]| {
        let mut a = 0;
        let mut s = 1;
        for &xi in x.iter().take(dim) {
            a += (xi + offset) * s;
            s *= stride;
        }
        a
    };

    let layers = if dim == 3 { n } else { 1 };
    let group = config.group_size();
    let mut groups = Vec::new();
    let mut push = |instruction: usize, access: Access, items: Vec<(usize, usize)>| {
        let mut by_group: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (tid, addr) in items {
            by_group.entry(tid / group).or_default().push((tid, addr));
        }
        for (g, accesses) in by_group {
            groups.push(AccessGroup { instruction, access, group: g, accesses });
        }
    };
    let mut instruction = 0;
    for z in 0..layers {
        for kk in 0..n {
            let mut shape = Vec::with_capacity(workers.len());
            let mut source = Vec::with_capacity(workers.len());
            for &(tid, row, col) in &workers {
                let (src, _, sh) = listing_indices(kernel, dir, n, row, col, z, kk);
                shape.push((tid, sh));
                source.push((tid, address(src)));
            }
            push(instruction, Access::Shape, shape);
            push(instruction + 1, Access::Source, source);
            instruction += 2;
        }
    }
    for z in 0..layers {
        let dest = workers
            .iter()
            .map(|&(tid, row, col)| (tid, address(listing_indices(kernel, dir, n, row, col, z, 0).1)))
            .collect();
        push(instruction, Access::Destination, dest);
        instruction += 1;
    }

    Ok(AccessTrace {
        kernel,
        stage,
        indexing,
        dim,
        dir,
        degree: k,
        word_bytes: config.word_bytes,
        threads,
        active,
        groups,
    })
}

/// Largest number of distinct addresses mapped to one bank; identical
/// addresses are broadcast and count once.
pub fn wavefronts(accesses: &[(usize, usize)], config: &BankConfig) -> usize {
    let banks = config.effective_banks();
    let mut per_bank: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(_, addr) in accesses {
        per_bank.entry(addr % banks).or_default().insert(addr);
    }
    per_bank.values().map(BTreeSet::len).max().unwrap_or(0).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionReport {
    pub instruction: usize,
    pub access: Access,
    pub group: usize,
    pub wavefronts: usize,
    pub excess: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub kernel: KernelKind,
    pub stage: Stage,
    pub indexing: Indexing,
    pub dim: usize,
    pub dir: usize,
    pub k: usize,
    pub word_bytes: usize,
    pub instructions: Vec<InstructionReport>,
    pub total_excess: usize,
    pub max_wavefronts: usize,
    /// Warps holding both active and idle threads.
    pub divergent_groups: usize,
    /// Most maximal runs of consecutive active threads within one warp.
    pub max_active_runs: usize,
}

/// Divergent warps and the largest number of active runs in one warp.
pub fn divergence(active: &[bool], warp_size: usize) -> (usize, usize) {
    let mut divergent = 0;
    let mut max_runs = 0;
    for warp in active.chunks(warp_size) {
        let on = warp.iter().filter(|&&a| a).count();
        if on > 0 && on < warp.len() {
            divergent += 1;
        }
        let runs = warp.iter().enumerate().filter(|&(i, &a)| a && (i == 0 || !warp[i - 1])).count();
        max_runs = max_runs.max(runs);
    }
    (divergent, max_runs)
}

pub fn count_conflicts(trace: &AccessTrace, config: &BankConfig) -> ConflictReport {
    let instructions: Vec<InstructionReport> = trace
        .groups
        .iter()
        .map(|g| {
            let w = wavefronts(&g.accesses, config);
            InstructionReport { instruction: g.instruction, access: g.access, group: g.group, wavefronts: w, excess: w - 1 }
        })
        .collect();
    let (divergent_groups, max_active_runs) = divergence(&trace.active, config.warp_size);
    ConflictReport {
        kernel: trace.kernel,
        stage: trace.stage,
        indexing: trace.indexing,
        dim: trace.dim,
        dir: trace.dir,
        k: trace.degree,
        word_bytes: trace.word_bytes,
        total_excess: instructions.iter().map(|i| i.excess).sum(),
        max_wavefronts: instructions.iter().map(|i| i.wavefronts).max().unwrap_or(1),
        instructions,
        divergent_groups,
        max_active_runs,
    }
}

/// Trace and score one kernel invocation.
pub fn simulate(
    kernel: KernelKind,
    stage: Stage,
    dim: usize,
    dir: usize,
    k: usize,
    config: &BankConfig,
    indexing: Indexing,
) -> Result<ConflictReport> {
    Ok(count_conflicts(&generate_trace(kernel, stage, dim, dir, k, config, indexing)?, config))
}

/// Every direction and both stages of one kernel.
pub fn sweep(kernel: KernelKind, dim: usize, k: usize, config: &BankConfig, indexing: Indexing) -> Result<Vec<ConflictReport>> {
    let mut out = Vec::new();
    for stage in [Stage::Residual, Stage::Solver] {
        for dir in 0..dim {
            out.push(simulate(kernel, stage, dim, dir, k, config, indexing)?);
        }
    }
    Ok(out)
}

/// Floating point operations and on-chip words moved per patch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Traffic {
    pub flops: f64,
    pub words_read: f64,
    pub words_written: f64,
}

impl Traffic {
    fn contraction(&mut self, rows: usize, cols: usize, input: usize) {
        let output = input / cols * rows;
        self.flops += (2 * rows * input) as f64;
        self.words_read += (input + rows * cols) as f64;
        self.words_written += output as f64;
    }

    /// Mirrors the contraction sequence of the sum-factorized Kronecker sum:
    /// two contractions in the first direction, three in middle directions,
    /// two in the last.
    fn kron_sum(&mut self, shapes: &[(usize, usize)]) {
        let dim = shapes.len();
        let mut ext: Vec<usize> = shapes.iter().map(|s| s.1).collect();
        for (a, &(rows, cols)) in shapes.iter().enumerate() {
            let input: usize = ext.iter().product();
            let count = if a == 0 || a == dim - 1 { 2 } else { 3 };
            for _ in 0..count {
                self.contraction(rows, cols, input);
            }
            ext[a] = rows;
        }
    }

    fn scaling(&mut self, len: usize) {
        self.flops += len as f64;
        self.words_read += len as f64;
        self.words_written += len as f64;
    }
}

/// On-chip traffic model of one patch smoothing step.
///
/// The residual stage is modelled as a Kronecker sum of square `2k+1`
/// factors and the fast-diagonalization solve as `2d` square `2k−1`
/// contractions around an elementwise scaling. The global variant computes
/// its residual outside the patch kernel. The boundary variant replaces the
/// residual by one Kronecker sum per shell slab with the rectangular
/// interface factors.
pub fn shared_traffic_model(variant: SmootherVariant, k: usize, dim: usize, word_bytes: usize) -> Result<(f64, f64, f64)> {
    if k == 0 || !(2..=3).contains(&dim) || (word_bytes != 4 && word_bytes != 8) {
        return Err(invalid("traffic model needs k ≥ 1, d ∈ {2,3} and 4- or 8-byte words"));
    }
    let (big, small) = (2 * k + 1, 2 * k - 1);
    let mut t = Traffic::default();
    match variant {
        SmootherVariant::Global => {}
        SmootherVariant::Separate | SmootherVariant::Fused => t.kron_sum(&vec![(big, big); dim]),
        SmootherVariant::Boundary => {
            for a in 0..dim {
                let shapes: Vec<(usize, usize)> = (0..dim)
                    .map(|b| match b.cmp(&a) {
                        std::cmp::Ordering::Equal => (small, 2),
                        std::cmp::Ordering::Less => (small, big),
                        std::cmp::Ordering::Greater => (small, small),
                    })
                    .collect();
                t.kron_sum(&shapes);
            }
        }
    }
    let len = small.pow(dim as u32);
    for _ in 0..dim {
        t.contraction(small, small, len);
    }
    t.scaling(len);
    for _ in 0..dim {
        t.contraction(small, small, len);
    }
    let w = word_bytes as f64;
    Ok((t.flops, t.words_read * w, t.words_written * w))
}

/// GPU parameters entering the on-chip bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hardware {
    pub sms: usize,
    pub banks: usize,
    /// Bytes per bank and clock.
    pub word_bytes: usize,
    pub clock_ghz: f64,
}

impl Hardware {
    pub const A100: Hardware = Hardware { sms: 108, banks: 32, word_bytes: 4, clock_ghz: 1.27 };

    /// `#SMs × #banks × word length × clock` in bytes per second.
    pub fn bandwidth(&self) -> f64 {
        self.sms as f64 * self.banks as f64 * self.word_bytes as f64 * self.clock_ghz * 1e9
    }

    /// Bandwidth in TB/s with `1 TB = 1024 GB`, the convention behind the
    /// usual 17.145 TB/s quoted for the A100.
    pub fn bandwidth_tb_per_s(&self) -> f64 {
        self.bandwidth() / 1e9 / 1024.0
    }
}

/// Performance bound `B·F/(d_r + d_w)` in flop/s.
pub fn onchip_roofline(flops: f64, bytes_read: f64, bytes_written: f64, hw: &Hardware) -> Result<f64> {
    let traffic = bytes_read + bytes_written;
    if !(traffic > 0.0) {
        return Err(invalid("on-chip traffic must be positive"));
    }
    if !(flops > 0.0) || hw.sms == 0 || hw.banks == 0 || hw.word_bytes == 0 || !(hw.clock_ghz > 0.0) {
        return Err(invalid("roofline inputs must be positive"));
    }
    Ok(hw.bandwidth() * flops / traffic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fp64() -> BankConfig {
        BankConfig::with_word_bytes(8)
    }

    #[test]
    fn broadcast_is_one_wavefront() {
        let acc: Vec<(usize, usize)> = (0..16).map(|t| (t, 42)).collect();
        assert_eq!(wavefronts(&acc, &fp64()), 1);
        let same_bank: Vec<(usize, usize)> = (0..16).map(|t| (t, 16 * t)).collect();
        assert_eq!(wavefronts(&same_bank, &fp64()), 16);
        assert_eq!(wavefronts(&same_bank, &BankConfig::with_word_bytes(4)), 8);
    }

    #[test]
    fn masked_solver_layout_idles_the_boundary() {
        let t = generate_trace(KernelKind::Basic, Stage::Solver, 2, 0, 3, &fp64(), Indexing::Masked).unwrap();
        assert_eq!(t.threads, 49);
        for tid in 0..49 {
            let (r, c) = (tid / 7, tid % 7);
            assert_eq!(t.active[tid], (1..=5).contains(&r) && (1..=5).contains(&c));
        }
        let (_, runs) = divergence(&t.active, 32);
        assert!(runs >= 2);
    }

    #[test]
    fn linear_indexing_two_way_conflict_example() {
        // the 25 interior threads of a Q3 patch address the 7×7 closure
        // layout; thread 0 and thread 12 meet in bank 8
        let t = generate_trace(KernelKind::Basic, Stage::Solver, 2, 1, 3, &fp64(), Indexing::Linear).unwrap();
        let store = t.groups.iter().find(|g| g.access == Access::Destination && g.group == 0).unwrap();
        let addr = |tid: usize| store.accesses.iter().find(|a| a.0 == tid).unwrap().1;
        assert_eq!((addr(0), addr(12)), (8, 24));
        assert_eq!(addr(0) % 16, 8);
        assert_eq!(addr(12) % 16, 8);
        assert_eq!(wavefronts(&store.accesses, &fp64()), 2);
        let (divergent, runs) = divergence(&t.active, 32);
        assert_eq!((divergent, runs), (1, 1));
    }

    #[test]
    fn basic_kernel_has_three_way_conflicts_at_q3() {
        let reports = sweep(KernelKind::Basic, 3, 3, &fp64(), Indexing::Masked).unwrap();
        assert!(reports.iter().any(|r| r.total_excess > 0));
        assert!(reports.iter().any(|r| r.max_wavefronts >= 3));
    }

    #[test]
    fn conflict_free_stores_are_contiguous() {
        for dir in 0..3 {
            let t = generate_trace(KernelKind::ConflictFree, Stage::Residual, 3, dir, 3, &fp64(), Indexing::Linear).unwrap();
            for g in t.groups.iter().filter(|g| g.access == Access::Destination) {
                let addrs: Vec<usize> = g.accesses.iter().map(|a| a.1).collect();
                assert!(addrs.windows(2).all(|w| w[1] == w[0] + 1));
            }
        }
    }

    #[test]
    fn conflict_free_kernel_at_q3() {
        for wb in [4, 8] {
            for indexing in [Indexing::Linear, Indexing::Masked] {
                let cfg = BankConfig::with_word_bytes(wb);
                let total: usize = sweep(KernelKind::ConflictFree, 3, 3, &cfg, indexing).unwrap().iter().map(|r| r.total_excess).sum();
                assert_eq!(total, 0, "word {wb} {indexing}");
            }
        }
    }

    #[test]
    fn argument_checks() {
        assert!(generate_trace(KernelKind::Basic, Stage::Residual, 3, 3, 2, &fp64(), Indexing::Linear).is_err());
        assert!(generate_trace(KernelKind::Basic, Stage::Residual, 3, 0, 16, &fp64(), Indexing::Linear).is_err());
        assert!(generate_trace(KernelKind::Basic, Stage::Residual, 3, 0, 15, &fp64(), Indexing::Linear).is_ok());
        let bad = BankConfig { banks: 24, ..BankConfig::default() };
        assert!(bad.validate().is_err());
        assert_eq!("cf".parse::<KernelKind>().unwrap(), KernelKind::ConflictFree);
        assert_eq!(KernelKind::ConflictFree.to_string(), "cf");
    }

    #[test]
    fn traffic_hand_count_q1_fused() {
        // residual: four 3×3 contractions of a 3×3 tensor; solver: four 1×1
        // contractions of one value and one scaling
        let (f, r, w) = shared_traffic_model(SmootherVariant::Fused, 1, 2, 8).unwrap();
        assert_eq!(f, 4.0 * 54.0 + 4.0 * 2.0 + 1.0);
        assert_eq!(r, 8.0 * (4.0 * 18.0 + 4.0 * 2.0 + 1.0));
        assert_eq!(w, 8.0 * (4.0 * 9.0 + 4.0 + 1.0));
    }

    #[test]
    fn traffic_scaling() {
        for v in SmootherVariant::ALL {
            let (f4, r4, w4) = shared_traffic_model(v, 3, 3, 4).unwrap();
            let (f8, r8, w8) = shared_traffic_model(v, 3, 3, 8).unwrap();
            assert_eq!(f4, f8);
            assert_eq!(r8 + w8, 2.0 * (r4 + w4));
        }
        let f = |k: usize| shared_traffic_model(SmootherVariant::Fused, k, 3, 8).unwrap().0;
        let ratio = f(32) / f(16);
        assert!((ratio - 16.0).abs() < 2.0, "{ratio}");
    }

    #[test]
    fn roofline_bandwidth() {
        let b = Hardware::A100.bandwidth_tb_per_s();
        assert!((b - 17.145).abs() < 5e-4, "{b}");
        let bound = onchip_roofline(100.0, 60.0, 40.0, &Hardware::A100).unwrap();
        assert!((bound - Hardware::A100.bandwidth()).abs() < 1e-3);
        assert!(onchip_roofline(1.0, 0.0, 0.0, &Hardware::A100).is_err());
        let (f, r, w) = shared_traffic_model(SmootherVariant::Fused, 6, 3, 8).unwrap();
        let bound = onchip_roofline(f, r, w, &Hardware::A100).unwrap();
        let intensity = f / (r + w);
        assert!((bound / Hardware::A100.bandwidth() - intensity).abs() < 1e-12);
        assert!(intensity > 0.5 && intensity < 2.0, "{intensity}");
    }

    proptest! {
        #[test]
        fn wavefronts_ignore_thread_order(addrs in proptest::collection::vec(0usize..200, 1..16), seed in 0u64..1000) {
            let acc: Vec<(usize, usize)> = addrs.iter().enumerate().map(|(t, &a)| (t, a)).collect();
            let mut shuffled = acc.clone();
            let n = shuffled.len();
            for i in 0..n {
                let j = (seed as usize * 31 + i * 17) % n;
                shuffled.swap(i, j);
            }
            prop_assert_eq!(wavefronts(&acc, &fp64()), wavefronts(&shuffled, &fp64()));
            prop_assert!(wavefronts(&acc, &fp64()) <= acc.len());
        }
    }
}
