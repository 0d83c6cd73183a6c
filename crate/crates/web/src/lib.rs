//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and strings and returns a JSON string,
//! so the page needs no generated TypeScript types. The `*_json` functions
//! carry the logic and are what the native tests call.

use patchmg::banksim::{self, BankConfig, Hardware, Indexing, KernelKind, Stage};
use patchmg::driver::{self, SolveConfig, SolveReport};
use patchmg::element::gauss_lobatto_points;
use patchmg::{Error, SmootherVariant};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// A page that freezes for more than a few seconds is not a demo.
pub const MAX_BROWSER_LEVEL: usize = 7;
pub const MAX_BROWSER_DEGREE: usize = 6;

#[derive(Debug, Serialize)]
pub struct Field {
    pub report: SolveReport,
    /// Interior nodes per direction.
    pub m: usize,
    /// Node coordinates along either axis.
    pub coords: Vec<f64>,
    /// Row-major values, `values[j * m + i]` at `(coords[i], coords[j])`.
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Serialize)]
pub struct ConflictGrid {
    pub report: banksim::ConflictReport,
    /// Bank of every thread's first access, `None` for idle threads.
    pub banks: Vec<Option<usize>>,
    pub effective_banks: usize,
    pub block_width: usize,
}

#[derive(Debug, Serialize)]
pub struct Roofline {
    pub variant: SmootherVariant,
    pub k: usize,
    pub dim: usize,
    pub flops: f64,
    pub bytes_read: f64,
    pub bytes_written: f64,
    pub intensity: f64,
    pub bandwidth_tb_per_s: f64,
    pub bound_tflops: f64,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn solve_2d_json(degree: usize, levels: usize, rhs: &str, variant: &str) -> Result<String, String> {
    if degree > MAX_BROWSER_DEGREE || levels > MAX_BROWSER_LEVEL {
        return Err(format!("the browser demo stops at degree {MAX_BROWSER_DEGREE} and level {MAX_BROWSER_LEVEL}"));
    }
    // Deterministic: `Instant` is unavailable in the browser, the page times
    // the call itself.
    let cfg = SolveConfig {
        dim: 2,
        degree,
        levels,
        rhs: parse(rhs)?,
        variant: parse(variant)?,
        deterministic: true,
        ..Default::default()
    };
    let (report, x) = driver::solve_with_solution(&cfg).map_err(|e| e.to_string())?;
    let level = *x.level();
    let nodes = gauss_lobatto_points(degree).map_err(|e| e.to_string())?;
    let coords = (0..level.dofs_per_dim).map(|i| level.node_coordinate(i, &nodes)).collect();
    let values = x.into_values();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    to_json(&Field { report, m: level.dofs_per_dim, coords, values, min, max })
}

pub fn bank_conflicts_json(
    kernel: &str,
    stage: &str,
    dim: usize,
    dir: usize,
    k: usize,
    word_bytes: usize,
    indexing: &str,
) -> Result<String, String> {
    let (kernel, stage, indexing): (KernelKind, Stage, Indexing) = (parse(kernel)?, parse(stage)?, parse(indexing)?);
    let cfg = BankConfig::with_word_bytes(word_bytes);
    cfg.validate().map_err(|e| e.to_string())?;
    let trace = banksim::generate_trace(kernel, stage, dim, dir, k, &cfg, indexing).map_err(|e| e.to_string())?;
    let mut banks = vec![None; trace.threads];
    if let Some(first) = trace.groups.iter().map(|g| g.instruction).min() {
        for g in trace.groups.iter().filter(|g| g.instruction == first) {
            for &(t, addr) in &g.accesses {
                banks[t] = Some(addr % cfg.effective_banks());
            }
        }
    }
    let report = banksim::count_conflicts(&trace, &cfg);
    to_json(&ConflictGrid { report, banks, effective_banks: cfg.effective_banks(), block_width: 2 * k + 1 })
}

pub fn roofline_json(variant: &str, k: usize, dim: usize, word_bytes: usize, sms: usize, clock_ghz: f64) -> Result<String, String> {
    let variant: SmootherVariant = parse(variant)?;
    let (flops, bytes_read, bytes_written) =
        banksim::shared_traffic_model(variant, k, dim, word_bytes).map_err(|e| e.to_string())?;
    let hw = Hardware { sms, clock_ghz, ..Hardware::A100 };
    let bound = banksim::onchip_roofline(flops, bytes_read, bytes_written, &hw).map_err(|e| e.to_string())?;
    to_json(&Roofline {
        variant,
        k,
        dim,
        flops,
        bytes_read,
        bytes_written,
        intensity: flops / (bytes_read + bytes_written),
        bandwidth_tb_per_s: hw.bandwidth_tb_per_s(),
        bound_tflops: bound / 1e12,
    })
}

/// Solve `-Δu = f` on the unit square and return the nodal field.
#[wasm_bindgen(js_name = solve2d)]
pub fn solve_2d(degree: usize, levels: usize, rhs: &str, variant: &str) -> Result<String, String> {
    solve_2d_json(degree, levels, rhs, variant)
}

#[wasm_bindgen(js_name = bankConflicts)]
pub fn bank_conflicts(
    kernel: &str,
    stage: &str,
    dim: usize,
    dir: usize,
    k: usize,
    word_bytes: usize,
    indexing: &str,
) -> Result<String, String> {
    bank_conflicts_json(kernel, stage, dim, dir, k, word_bytes, indexing)
}

#[wasm_bindgen]
pub fn roofline(variant: &str, k: usize, dim: usize, word_bytes: usize, sms: usize, clock_ghz: f64) -> Result<String, String> {
    roofline_json(variant, k, dim, word_bytes, sms, clock_ghz)
}
