//! Dispatch a validated configuration to the core procedures and emit the
//! result files.

use std::path::PathBuf;
use std::time::Instant;

use zdsc_core::cost::evaluate_tabulated_costs;
use zdsc_core::harness::{
    self, grids_for_run, ncr_schedule, run_da, run_greedy, run_ncr, seeded_init, snr_db,
    CurvePoint, Method, SweepConfig,
};
use zdsc_core::optim::{anneal, greedy_descent, ncr, OptimizationTrace, TraceRecord};
use zdsc_core::Grid1D;

use crate::config::{ConfigError, RunConfig, RunMethod};
use crate::output::{
    write_decoder_csv, write_encoder_csv, write_json, write_sweep_csv, write_trace_csv, RunResult,
};
use crate::plot;

/// Runtime failures carry exit code 3; configuration failures exit 2.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<zdsc_core::Error> for RunError {
    fn from(e: zdsc_core::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Runtime(format!("io: {e}"))
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

struct Emitter<'a> {
    cfg: &'a RunConfig,
    files: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Self {
            cfg,
            files: Vec::new(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn record(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    fn emit_tables(
        &mut self,
        hardened: &zdsc_core::TabulatedEncoder,
        averaged: Option<&zdsc_core::TabulatedEncoder>,
        structured: Option<&zdsc_core::StructuredEncoder>,
        decoder: &zdsc_core::DecoderTable,
        trace: Option<&OptimizationTrace>,
    ) -> Result<(), RunError> {
        let enc_path = self.path("encoder.csv");
        write_encoder_csv(&enc_path, hardened, averaged, structured)?;
        self.record(enc_path);
        let dec_path = self.path("decoder.csv");
        write_decoder_csv(&dec_path, decoder)?;
        self.record(dec_path);
        if let Some(trace) = trace {
            let trace_path = self.path("trace.csv");
            write_trace_csv(&trace_path, trace)?;
            self.record(trace_path);
        }
        if self.cfg.plots {
            let svg = plot::encoder_svg(hardened, averaged, structured);
            let p = self.path("encoder.svg");
            crate::output::write_atomic(&p, svg.as_bytes())?;
            self.record(p);
            let svg = plot::decoder_svg(decoder);
            let p = self.path("decoder.svg");
            crate::output::write_atomic(&p, svg.as_bytes())?;
            self.record(p);
        }
        Ok(())
    }
}

fn curve_point(
    cfg: &RunConfig,
    method: RunMethod,
    distortion: f64,
    lambda: f64,
    effective_k: usize,
) -> Result<CurvePoint, RunError> {
    Ok(CurvePoint {
        method: method.as_str().into(),
        csnr_db: cfg.target_csnr_db(),
        snr_db: snr_db(cfg.sigma_x2, distortion)?,
        lambda,
        effective_k,
    })
}

/// Run the configured method and write `result.json` plus the per-method
/// tables into the output directory.
pub fn execute(cfg: &RunConfig) -> Result<RunResult, RunError> {
    cfg.validate()?;
    let start = Instant::now();
    let method = cfg.method.expect("validated");
    let model = cfg.model();
    let target = cfg.target_power();
    let counts = cfg.grid.counts();
    let auto_y = cfg.grid.auto_refine_y();
    let mut emitter = Emitter::new(cfg);

    let mut lambda = None;
    let mut cost = None;
    let mut curve = None;
    let mut effective_k = None;
    let mut sweep_records = None;

    match method {
        RunMethod::Opta => {
            let d = zdsc_core::optim::opta(&model, target)?;
            curve = Some(curve_point(cfg, method, d, 0.0, 0)?);
        }
        RunMethod::Linear => {
            let grids = grids_for_run(&model, counts, target, None, auto_y)?;
            let (enc, dec, d) = zdsc_core::optim::linear_baseline_on(&model, target, &grids)?;
            let lam = zdsc_core::optim::linear_lambda_for_power(&model, target);
            let report = evaluate_tabulated_costs(&enc, &dec, &model, &grids, lam)?;
            emitter.emit_tables(&enc, None, None, &dec, None)?;
            lambda = Some(lam);
            cost = Some(report);
            curve = Some(curve_point(cfg, method, d, lam, 1)?);
            effective_k = Some(1);
        }
        RunMethod::Da => {
            let (lam, outcome) = match cfg.lambda {
                Some(lam) => {
                    let grids = grids_for_run(&model, counts, 2.2 * target, None, auto_y)?;
                    (lam, anneal(&cfg.anneal, lam, &model, &grids)?)
                }
                None => {
                    let run = run_da(&model, target, &cfg.anneal, counts, auto_y)?;
                    (run.lambda, run.outcome)
                }
            };
            let averaged = outcome.encoder.averaged_encoder();
            emitter.emit_tables(
                &outcome.hardened,
                Some(&averaged),
                Some(&outcome.encoder),
                &outcome.decoder,
                Some(&outcome.trace),
            )?;
            curve = Some(curve_point(
                cfg,
                method,
                outcome.report.distortion,
                lam,
                outcome.effective_k,
            )?);
            lambda = Some(lam);
            cost = Some(outcome.report);
            effective_k = Some(outcome.effective_k);
        }
        RunMethod::Greedy => {
            let seed = cfg.seeds[0];
            let (lam, outcome) = match cfg.lambda {
                Some(lam) => {
                    let x_grid =
                        Grid1D::new(-5.0 * model.sigma_x(), 5.0 * model.sigma_x(), counts.nx)?;
                    let init = seeded_init(&x_grid, &model, target, seed)?;
                    let (lo, hi) = init.output_range();
                    let grids = grids_for_run(
                        &model,
                        counts,
                        2.2 * target,
                        Some(lo.abs().max(hi.abs())),
                        auto_y,
                    )?;
                    let gc = cfg.greedy.with_lambda(lam);
                    (lam, greedy_descent(&init, &gc, &model, &grids)?)
                }
                None => {
                    let run = run_greedy(&model, target, &cfg.greedy.with_lambda(0.1), seed, counts, auto_y)?;
                    (run.lambda, run.outcome)
                }
            };
            let trace = OptimizationTrace {
                records: vec![TraceRecord {
                    outer_step: 0,
                    temperature: 0.0,
                    effective_k: 1,
                    report: outcome.report,
                    inner_free_energies: Vec::new(),
                }],
            };
            emitter.emit_tables(&outcome.encoder, None, None, &outcome.decoder, Some(&trace))?;
            curve = Some(curve_point(cfg, method, outcome.report.distortion, lam, 1)?);
            lambda = Some(lam);
            cost = Some(outcome.report);
            effective_k = Some(1);
        }
        RunMethod::Ncr => {
            let seed = cfg.seeds[0];
            let greedy_cfg = cfg.greedy.with_lambda(0.1);
            let (lam, encoder, decoder, trace) = match cfg.lambda {
                Some(lam) => {
                    let x_grid =
                        Grid1D::new(-5.0 * model.sigma_x(), 5.0 * model.sigma_x(), counts.nx)?;
                    let init = seeded_init(&x_grid, &model, target, seed)?;
                    let (lo, hi) = init.output_range();
                    let grids = grids_for_run(
                        &model,
                        counts,
                        2.2 * target,
                        Some(lo.abs().max(hi.abs())),
                        auto_y,
                    )?;
                    let schedule = ncr_schedule(lam, cfg.ncr_stages, cfg.ncr_start_factor);
                    let (enc, dec, trace) = ncr(&schedule, &greedy_cfg, &init, &model, &grids)?;
                    (lam, enc, dec, trace)
                }
                None => {
                    let run = run_ncr(
                        &model,
                        target,
                        &greedy_cfg,
                        seed,
                        cfg.ncr_stages,
                        cfg.ncr_start_factor,
                        counts,
                        auto_y,
                    )?;
                    (run.lambda, run.encoder, run.decoder, run.trace)
                }
            };
            let report = trace.records.last().expect("stages recorded").report;
            emitter.emit_tables(&encoder, None, None, &decoder, Some(&trace))?;
            curve = Some(curve_point(cfg, method, report.distortion, lam, 1)?);
            lambda = Some(lam);
            cost = Some(report);
            effective_k = Some(1);
        }
        RunMethod::Sweep => {
            let sweep_cfg = SweepConfig {
                methods: cfg.methods.clone().unwrap_or_else(|| {
                    vec![Method::Opta, Method::Linear, Method::Da, Method::Ncr]
                }),
                csnr_points_db: cfg
                    .csnr_points_db
                    .clone()
                    .unwrap_or_else(|| vec![5.0, 8.0, 11.0]),
                seeds: cfg.seeds.clone(),
                anneal: cfg.anneal,
                greedy: cfg.greedy.with_lambda(0.1),
                ncr_stages: cfg.ncr_stages,
                ncr_start_factor: cfg.ncr_start_factor,
                counts,
                auto_refine_y: auto_y,
            };
            let records = harness::sweep(&sweep_cfg, &model);
            let path = emitter.path("sweep.csv");
            write_sweep_csv(&path, &records)?;
            emitter.record(path);
            if cfg.plots {
                let svg = plot::curves_svg(&records);
                let p = emitter.path("curves.svg");
                crate::output::write_atomic(&p, svg.as_bytes())?;
                emitter.record(p);
            }
            sweep_records = Some(records);
        }
    }

    let mut result = RunResult {
        config: cfg.clone(),
        method: method.as_str().into(),
        lambda,
        cost,
        curve,
        effective_k,
        sweep: sweep_records,
        files: emitter.files,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let result_path = cfg.out_dir.join("result.json");
    write_json(&result_path, &result)?;
    result.files.push(result_path);
    Ok(result)
}
