//! File emission: CSV tables and JSON results, written atomically
//! (temp file in the target directory, then rename).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use zdsc_core::harness::{CurvePoint, SweepRecord};
use zdsc_core::optim::OptimizationTrace;
use zdsc_core::{CostReport, DecoderTable, StructuredEncoder, TabulatedEncoder};

use crate::config::RunConfig;

/// Everything a single run reports back, and where its tables went.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    /// Fully resolved configuration; re-running it reproduces the outputs.
    pub config: RunConfig,
    pub method: String,
    pub lambda: Option<f64>,
    pub cost: Option<CostReport>,
    pub curve: Option<CurvePoint>,
    pub effective_k: Option<usize>,
    pub sweep: Option<Vec<SweepRecord>>,
    pub files: Vec<PathBuf>,
    pub wall_time_s: f64,
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// encoder.csv: one row per source grid point. Deterministic methods carry
/// `x,g_hard,g_avg` (equal columns); annealing runs append
/// `p_k,a_k,b_k` blocks for each local model.
pub fn write_encoder_csv(
    path: &Path,
    hardened: &TabulatedEncoder,
    averaged: Option<&TabulatedEncoder>,
    structured: Option<&StructuredEncoder>,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str("x,g_hard,g_avg");
    if let Some(s) = structured {
        for k in 1..=s.num_models() {
            out.push_str(&format!(",p_{k},a_{k},b_{k}"));
        }
    }
    out.push('\n');
    let xs = hardened.x_grid().values();
    for (i, &x) in xs.iter().enumerate() {
        let hard = hardened.g_values()[i];
        let avg = averaged.map_or(hard, |a| a.g_values()[i]);
        out.push_str(&format!("{x},{hard},{avg}"));
        if let Some(s) = structured {
            for (k, m) in s.models().iter().enumerate() {
                out.push_str(&format!(",{},{},{}", s.assoc()[[k, i]], m.a, m.b));
            }
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// decoder.csv: long form `y,z,xhat`, y-major order.
pub fn write_decoder_csv(path: &Path, dec: &DecoderTable) -> std::io::Result<()> {
    let mut out = String::from("y,z,xhat\n");
    for (j, &y) in dec.y_grid().values().iter().enumerate() {
        for (m, &z) in dec.z_grid().values().iter().enumerate() {
            out.push_str(&format!("{y},{z},{}\n", dec.xhat()[[j, m]]));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// trace.csv: flat per-outer-step cost records.
pub fn write_trace_csv(path: &Path, trace: &OptimizationTrace) -> std::io::Result<()> {
    let mut out = String::from(
        "outer_step,temperature,effective_k,distortion,power,lagrangian,entropy,free_energy,lambda,inner_iters\n",
    );
    for r in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.outer_step,
            r.temperature,
            r.effective_k,
            r.report.distortion,
            r.report.power,
            r.report.lagrangian,
            r.report.entropy,
            r.report.free_energy,
            r.report.lambda,
            r.inner_free_energies.len()
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// sweep.csv: one row per requested (method, csnr, seed).
pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> std::io::Result<()> {
    let mut out = String::from("method,csnr_db,seed,snr_db,lambda,effective_k,status\n");
    for r in records {
        let seed = r.seed.map_or(String::new(), |s| s.to_string());
        match (&r.point, &r.error) {
            (Some(p), _) => out.push_str(&format!(
                "{},{},{seed},{},{},{},ok\n",
                r.method, r.csnr_db, p.snr_db, p.lambda, p.effective_k
            )),
            (None, Some(e)) => out.push_str(&format!(
                "{},{},{seed},,,,\"error: {}\"\n",
                r.method,
                r.csnr_db,
                e.replace('"', "'")
            )),
            (None, None) => out.push_str(&format!("{},{},{seed},,,,missing\n", r.method, r.csnr_db)),
        }
    }
    write_atomic(path, out.as_bytes())
}
