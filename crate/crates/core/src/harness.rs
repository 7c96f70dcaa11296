//! Independent validation and benchmarking: Monte Carlo estimates of
//! distortion and power, dB metric conversions, and sweeps that run every
//! method across a range of channel SNRs.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{DecoderTable, TabulatedEncoder};
use crate::error::{Error, Result};
use crate::gauss::{grids_with_counts, Grid1D, GridCounts, GridSet, SourceChannelModel};
use crate::optim::{
    anneal, greedy_descent, lambda_search, linear_distortion, linear_lambda_for_power, ncr,
    AnnealConfig, AnnealOutcome, GreedyConfig, GreedyOutcome, OptimizationTrace, PowerEval,
};

/// Monte Carlo estimate of distortion and transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub distortion_hat: f64,
    pub power_hat: f64,
    pub distortion_stderr: f64,
    pub power_stderr: f64,
    pub n_samples: usize,
    pub rng_seed: u64,
}

struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Sample (X, Z, N), encode with the table (X clamped to the grid), decode
/// with the clamped bilinear table, and report sample means with standard
/// errors. Deterministic per seed.
pub fn monte_carlo(
    enc: &TabulatedEncoder,
    dec: &DecoderTable,
    model: &SourceChannelModel,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    model.validate()?;
    if n_samples < 100 {
        return Err(Error::invalid("n_samples", "need at least 100 samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sx = model.sigma_x();
    let sz = model.sigma_z();
    let sn = model.sigma_n();
    let rho = model.rho;
    let ortho = (1.0 - rho * rho).sqrt();
    let (x_lo, x_hi) = (enc.x_grid().lo(), enc.x_grid().hi());

    let mut dist = Welford::new();
    let mut power = Welford::new();
    for _ in 0..n_samples {
        let u1: f64 = rng.sample(StandardNormal);
        let u2: f64 = rng.sample(StandardNormal);
        let u3: f64 = rng.sample(StandardNormal);
        let x = sx * u1;
        let z = sz * (rho * u1 + ortho * u2);
        let noise = sn * u3;
        let g = enc.eval(x.clamp(x_lo, x_hi)).expect("clamped into grid");
        let xhat = dec.eval(g + noise, z);
        dist.push((x - xhat) * (x - xhat));
        power.push(g * g);
    }
    Ok(McEstimate {
        distortion_hat: dist.mean,
        power_hat: power.mean,
        distortion_stderr: dist.stderr(),
        power_stderr: power.stderr(),
        n_samples,
        rng_seed: seed,
    })
}

/// Channel SNR in dB: 10 log10(P / sigma_n^2).
pub fn csnr_db(power: f64, sigma_n2: f64) -> Result<f64> {
    if !(power > 0.0) || !(sigma_n2 > 0.0) {
        return Err(Error::invalid("csnr_db", "power and noise variance must be positive"));
    }
    Ok(10.0 * (power / sigma_n2).log10())
}

/// Reconstruction SNR in dB: 10 log10(sigma_x^2 / D).
pub fn snr_db(sigma_x2: f64, distortion: f64) -> Result<f64> {
    if !(sigma_x2 > 0.0) || !(distortion > 0.0) {
        return Err(Error::invalid("snr_db", "variance and distortion must be positive"));
    }
    Ok(10.0 * (sigma_x2 / distortion).log10())
}

/// Transmit power implied by a channel SNR in dB.
pub fn power_for_csnr_db(csnr_db: f64, sigma_n2: f64) -> f64 {
    sigma_n2 * 10f64.powf(csnr_db / 10.0)
}

/// One point on an SNR-vs-CSNR performance curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub csnr_db: f64,
    pub snr_db: f64,
    pub lambda: f64,
    pub effective_k: usize,
}

/// Mapping-design method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Opta,
    Linear,
    Da,
    Greedy,
    Ncr,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Opta => "opta",
            Method::Linear => "linear",
            Method::Da => "da",
            Method::Greedy => "greedy",
            Method::Ncr => "ncr",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid construction for an optimizer run targeting powers up to `p_max`.
///
/// The y span covers the steepest linear encoder the run can visit (slope for
/// power `p_max` over the 5-sigma source range) with 15% headroom, plus any
/// explicitly required amplitude. When `auto_refine_y` is set, the y point
/// count is raised so the spacing stays at or below sigma_N / 5; the x, z,
/// and noise counts are used as given.
pub fn grids_for_run(
    model: &SourceChannelModel,
    counts: GridCounts,
    p_max: f64,
    min_amplitude: Option<f64>,
    auto_refine_y: bool,
) -> Result<GridSet> {
    if !(p_max > 0.0) {
        return Err(Error::invalid("p_max", "must be positive"));
    }
    let mut amplitude = 5.0 * p_max.sqrt() * 1.15;
    if let Some(extra) = min_amplitude {
        amplitude = amplitude.max(extra * 1.02);
    }
    let mut counts = counts;
    if auto_refine_y {
        let span = 2.0 * (amplitude + 5.0 * model.sigma_n());
        let needed = (span / (model.sigma_n() / 5.0)).ceil() as usize + 1;
        let needed = if needed % 2 == 0 { needed + 1 } else { needed };
        counts.ny = counts.ny.max(needed);
    }
    grids_with_counts(model, amplitude, counts)
}

/// Deterministic initial encoder table for greedy/relaxation restarts.
///
/// Seed 0 is the linear mapping at the target power; other seeds add a
/// seeded slope rescale and a smooth sinusoidal fold on top of it.
pub fn seeded_init(
    x_grid: &Grid1D,
    model: &SourceChannelModel,
    target_power: f64,
    seed: u64,
) -> Result<TabulatedEncoder> {
    let a = (target_power / model.sigma_x2).sqrt();
    if seed == 0 {
        return TabulatedEncoder::from_fn(x_grid.clone(), |x| a * x);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 {
        let v: f64 = rng.sample(StandardNormal);
        v.clamp(-2.5, 2.5)
    };
    let (e0, e1, e2) = (draw(), draw(), draw());
    let sqrt_p = target_power.sqrt();
    let x_hi = x_grid.hi();
    TabulatedEncoder::from_fn(x_grid.clone(), |x| {
        a * x * (1.0 + 0.25 * e0)
            + 0.4 * sqrt_p * e1 * (std::f64::consts::PI * x * (1.0 + 0.5 * e2.abs()) / x_hi).sin()
    })
}

fn lambda_bracket(model: &SourceChannelModel, p_lo_power: f64, p_hi_power: f64) -> (f64, f64) {
    // Power decreases in lambda, so the high-power end gives the low lambda.
    (
        linear_lambda_for_power(model, p_lo_power),
        linear_lambda_for_power(model, p_hi_power),
    )
}

/// Result of a lambda-searched annealing run.
#[derive(Debug, Clone)]
pub struct DaRun {
    pub lambda: f64,
    pub outcome: AnnealOutcome,
    pub grids: GridSet,
}

/// Anneal with lambda searched to meet the transmit power target, widening
/// the bracket (and the grids that go with it) if the first one fails.
///
/// The annealed solution's power tracks the linear family's stationary
/// power closely, so the first bracket starts right at the analytic
/// multiplier for the target; most searches finish after one run.
pub fn run_da(
    model: &SourceChannelModel,
    target_power: f64,
    cfg: &AnnealConfig,
    counts: GridCounts,
    auto_refine_y: bool,
) -> Result<DaRun> {
    let mut hi_power = target_power;
    let mut lo_power = 0.45 * target_power;
    let mut grid_power = 1.2 * target_power;
    let mut attempt = 0;
    loop {
        let grids = grids_for_run(model, counts, grid_power, None, auto_refine_y)?;
        let bracket = lambda_bracket(model, hi_power, lo_power);
        let searched = lambda_search(target_power, bracket, |lambda| {
            let outcome = anneal(cfg, lambda, model, &grids)?;
            Ok(PowerEval {
                power: outcome.report.power,
                value: outcome,
            })
        });
        match searched {
            Ok((lambda, outcome)) => {
                return Ok(DaRun {
                    lambda,
                    outcome,
                    grids,
                });
            }
            Err(Error::Bracket { .. }) if attempt < 2 => {
                hi_power = (2.2 + attempt as f64) * target_power;
                lo_power /= 3.0;
                grid_power = 1.2 * hi_power;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Result of a lambda-searched greedy run.
#[derive(Debug, Clone)]
pub struct GreedyRun {
    pub lambda: f64,
    pub outcome: GreedyOutcome,
    pub grids: GridSet,
}

/// Greedy descent from a seeded initial table, lambda searched to the power
/// target.
pub fn run_greedy(
    model: &SourceChannelModel,
    target_power: f64,
    cfg: &GreedyConfig,
    seed: u64,
    counts: GridCounts,
    auto_refine_y: bool,
) -> Result<GreedyRun> {
    let mut hi_power = 2.2 * target_power;
    let mut lo_power = 0.45 * target_power;
    let mut attempt = 0;
    loop {
        let x_grid = Grid1D::new(
            -5.0 * model.sigma_x(),
            5.0 * model.sigma_x(),
            counts.nx,
        )?;
        let init = seeded_init(&x_grid, model, target_power, seed)?;
        let (lo_range, hi_range) = init.output_range();
        let min_amp = lo_range.abs().max(hi_range.abs());
        let grids = grids_for_run(model, counts, hi_power, Some(min_amp), auto_refine_y)?;
        let bracket = lambda_bracket(model, hi_power, lo_power);
        let searched = lambda_search(target_power, bracket, |lambda| {
            let out = greedy_descent(&init, &GreedyConfig { lambda, ..*cfg }, model, &grids)?;
            Ok(PowerEval {
                power: out.report.power,
                value: out,
            })
        });
        match searched {
            Ok((lambda, outcome)) => {
                return Ok(GreedyRun {
                    lambda,
                    outcome,
                    grids,
                });
            }
            Err(Error::Bracket { .. }) if attempt < 2 => {
                hi_power *= 3.0;
                lo_power /= 3.0;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Result of a lambda-searched relaxation run.
#[derive(Debug, Clone)]
pub struct NcrRun {
    pub lambda: f64,
    pub encoder: TabulatedEncoder,
    pub decoder: DecoderTable,
    pub trace: OptimizationTrace,
    pub grids: GridSet,
}

/// Geometric lambda schedule from `start_factor * lambda` down to `lambda`.
pub fn ncr_schedule(lambda: f64, stages: usize, start_factor: f64) -> Vec<f64> {
    if stages <= 1 {
        return vec![lambda];
    }
    let ratio = start_factor.powf(1.0 / (stages - 1) as f64);
    (0..stages)
        .map(|s| lambda * ratio.powi((stages - 1 - s) as i32))
        .collect()
}

/// Noisy-channel relaxation from a seeded initial table, lambda searched to
/// the power target; each candidate lambda gets a fresh geometric schedule.
#[allow(clippy::too_many_arguments)]
pub fn run_ncr(
    model: &SourceChannelModel,
    target_power: f64,
    cfg: &GreedyConfig,
    seed: u64,
    stages: usize,
    start_factor: f64,
    counts: GridCounts,
    auto_refine_y: bool,
) -> Result<NcrRun> {
    let mut hi_power = 2.2 * target_power;
    let mut lo_power = 0.45 * target_power;
    let mut attempt = 0;
    loop {
        let x_grid = Grid1D::new(
            -5.0 * model.sigma_x(),
            5.0 * model.sigma_x(),
            counts.nx,
        )?;
        let init = seeded_init(&x_grid, model, target_power, seed)?;
        let (lo_range, hi_range) = init.output_range();
        let min_amp = lo_range.abs().max(hi_range.abs());
        let grids = grids_for_run(model, counts, hi_power, Some(min_amp), auto_refine_y)?;
        let bracket = lambda_bracket(model, hi_power, lo_power);
        let searched = lambda_search(target_power, bracket, |lambda| {
            let schedule = ncr_schedule(lambda, stages, start_factor);
            let (enc, dec, trace) = ncr(&schedule, cfg, &init, model, &grids)?;
            let power = trace.records.last().expect("stages recorded").report.power;
            Ok(PowerEval {
                power,
                value: (enc, dec, trace),
            })
        });
        match searched {
            Ok((lambda, (encoder, decoder, trace))) => {
                return Ok(NcrRun {
                    lambda,
                    encoder,
                    decoder,
                    trace,
                    grids,
                });
            }
            Err(Error::Bracket { .. }) if attempt < 2 => {
                hi_power *= 3.0;
                lo_power /= 3.0;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Sweep configuration: which methods, which channel SNRs, how many restarts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub csnr_points_db: Vec<f64>,
    /// Restart seeds for greedy and relaxation (annealing runs once).
    pub seeds: Vec<u64>,
    pub anneal: AnnealConfig,
    pub greedy: GreedyConfig,
    pub ncr_stages: usize,
    pub ncr_start_factor: f64,
    pub counts: GridCounts,
    pub auto_refine_y: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Opta, Method::Linear, Method::Da, Method::Ncr],
            csnr_points_db: vec![5.0, 8.0, 11.0],
            seeds: vec![0, 1, 2, 3, 4],
            anneal: AnnealConfig::default(),
            greedy: GreedyConfig::default(),
            ncr_stages: 6,
            ncr_start_factor: 100.0,
            counts: GridCounts::default(),
            auto_refine_y: true,
        }
    }
}

/// One sweep entry: either a curve point or the error that prevented it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: String,
    pub csnr_db: f64,
    pub seed: Option<u64>,
    pub point: Option<CurvePoint>,
    pub error: Option<String>,
}

enum SweepTask {
    Analytic(Method, f64),
    Da(f64),
    Seeded(Method, f64, u64),
}

/// Run every requested (method, CSNR, seed) combination; failures are
/// recorded in place and the sweep continues. Tasks run in parallel on the
/// global thread pool.
pub fn sweep(cfg: &SweepConfig, model: &SourceChannelModel) -> Vec<SweepRecord> {
    let mut tasks = Vec::new();
    for &method in &cfg.methods {
        for &csnr in &cfg.csnr_points_db {
            match method {
                Method::Opta | Method::Linear => tasks.push(SweepTask::Analytic(method, csnr)),
                Method::Da => tasks.push(SweepTask::Da(csnr)),
                Method::Greedy | Method::Ncr => {
                    for &seed in &cfg.seeds {
                        tasks.push(SweepTask::Seeded(method, csnr, seed));
                    }
                }
            }
        }
    }
    tasks
        .par_iter()
        .map(|task| run_sweep_task(task, cfg, model))
        .collect()
}

fn run_sweep_task(
    task: &SweepTask,
    cfg: &SweepConfig,
    base_model: &SourceChannelModel,
) -> SweepRecord {
    let (method, csnr, seed) = match task {
        SweepTask::Analytic(m, c) => (*m, *c, None),
        SweepTask::Da(c) => (Method::Da, *c, None),
        SweepTask::Seeded(m, c, s) => (*m, *c, Some(*s)),
    };
    let target = power_for_csnr_db(csnr, base_model.sigma_n2);
    let model = SourceChannelModel {
        power_limit: target,
        ..*base_model
    };
    let result = (|| -> Result<CurvePoint> {
        match method {
            Method::Opta => {
                let d = crate::optim::opta(&model, target)?;
                Ok(CurvePoint {
                    method: method.as_str().into(),
                    csnr_db: csnr,
                    snr_db: snr_db(model.sigma_x2, d)?,
                    lambda: 0.0,
                    effective_k: 0,
                })
            }
            Method::Linear => {
                let d = linear_distortion(&model, target);
                Ok(CurvePoint {
                    method: method.as_str().into(),
                    csnr_db: csnr,
                    snr_db: snr_db(model.sigma_x2, d)?,
                    lambda: linear_lambda_for_power(&model, target),
                    effective_k: 1,
                })
            }
            Method::Da => {
                let run = run_da(&model, target, &cfg.anneal, cfg.counts, cfg.auto_refine_y)?;
                Ok(CurvePoint {
                    method: method.as_str().into(),
                    csnr_db: csnr,
                    snr_db: snr_db(model.sigma_x2, run.outcome.report.distortion)?,
                    lambda: run.lambda,
                    effective_k: run.outcome.effective_k,
                })
            }
            Method::Greedy => {
                let seed = seed.expect("seeded task");
                let run = run_greedy(
                    &model,
                    target,
                    &cfg.greedy,
                    seed,
                    cfg.counts,
                    cfg.auto_refine_y,
                )?;
                Ok(CurvePoint {
                    method: method.as_str().into(),
                    csnr_db: csnr,
                    snr_db: snr_db(model.sigma_x2, run.outcome.report.distortion)?,
                    lambda: run.lambda,
                    effective_k: 1,
                })
            }
            Method::Ncr => {
                let seed = seed.expect("seeded task");
                let run = run_ncr(
                    &model,
                    target,
                    &cfg.greedy,
                    seed,
                    cfg.ncr_stages,
                    cfg.ncr_start_factor,
                    cfg.counts,
                    cfg.auto_refine_y,
                )?;
                let report = run.trace.records.last().expect("stages recorded").report;
                Ok(CurvePoint {
                    method: method.as_str().into(),
                    csnr_db: csnr,
                    snr_db: snr_db(model.sigma_x2, report.distortion)?,
                    lambda: run.lambda,
                    effective_k: 1,
                })
            }
        }
    })();
    match result {
        Ok(point) => SweepRecord {
            method: method.as_str().into(),
            csnr_db: csnr,
            seed,
            point: Some(point),
            error: None,
        },
        Err(e) => SweepRecord {
            method: method.as_str().into(),
            csnr_db: csnr,
            seed,
            point: None,
            error: Some(e.to_string()),
        },
    }
}

/// Sign changes of the discrete derivative of an encoder table; zero for a
/// monotone mapping, two or more for the folded sawtooth shapes.
pub fn derivative_sign_changes(enc: &TabulatedEncoder) -> usize {
    let diffs: Vec<f64> = enc
        .g_values()
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.abs() > 0.0)
        .collect();
    diffs
        .windows(2)
        .filter(|w| w[0].signum() != w[1].signum())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::linear_baseline;
    use approx::assert_abs_diff_eq;

    fn unit_model(rho: f64, power: f64) -> SourceChannelModel {
        SourceChannelModel::new(1.0, 1.0, rho, 1.0, power).unwrap()
    }

    #[test]
    fn db_conversion_examples() {
        assert_abs_diff_eq!(csnr_db(12.531, 1.0).unwrap(), 10.98, epsilon = 1e-3);
        assert_abs_diff_eq!(snr_db(1.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            snr_db(1.0, 0.001470652166124617).unwrap(),
            28.324900330479124,
            epsilon = 1e-9
        );
        assert!(csnr_db(0.0, 1.0).is_err());
        assert!(snr_db(1.0, -0.1).is_err());
    }

    #[test]
    fn db_conversions_invert_their_ratios() {
        for p in [0.3, 1.0, 12.531] {
            let db = csnr_db(p, 2.0).unwrap();
            assert_abs_diff_eq!(power_for_csnr_db(db, 2.0), p, epsilon = 1e-12 * p);
        }
        for d in [0.5, 0.01593, 1.4707e-3] {
            let db = snr_db(1.0, d).unwrap();
            assert_abs_diff_eq!(10f64.powf(-db / 10.0), d, epsilon = 1e-12);
        }
    }

    #[test]
    fn monte_carlo_zero_mapping() {
        let model = unit_model(0.5, 1.0);
        let grids = grids_with_counts(
            &model,
            1.0,
            GridCounts {
                nx: 21,
                nz: 9,
                ny: 9,
                nn: 9,
            },
        )
        .unwrap();
        let enc = TabulatedEncoder::from_fn(grids.x_grid.clone(), |_| 0.0).unwrap();
        let dec =
            DecoderTable::from_fn(grids.y_grid.clone(), grids.z_grid.clone(), |_, _| 0.0).unwrap();
        let est = monte_carlo(&enc, &dec, &model, 20_000, 3).unwrap();
        assert_eq!(est.power_hat, 0.0);
        assert!((est.distortion_hat - 1.0).abs() < 4.0 * est.distortion_stderr + 0.01);
    }

    #[test]
    fn monte_carlo_deterministic_per_seed() {
        let model = unit_model(0.9, 2.0);
        let (enc, dec, _) = linear_baseline(&model, 2.0).unwrap();
        let a = monte_carlo(&enc, &dec, &model, 5_000, 11).unwrap();
        let b = monte_carlo(&enc, &dec, &model, 5_000, 11).unwrap();
        assert_eq!(a.distortion_hat.to_bits(), b.distortion_hat.to_bits());
        assert_eq!(a.power_hat.to_bits(), b.power_hat.to_bits());
        let c = monte_carlo(&enc, &dec, &model, 5_000, 12).unwrap();
        assert_ne!(a.distortion_hat.to_bits(), c.distortion_hat.to_bits());
    }

    #[test]
    fn monte_carlo_rejects_tiny_sample_counts() {
        let model = unit_model(0.5, 1.0);
        let (enc, dec, _) = linear_baseline(&model, 1.0).unwrap();
        assert!(monte_carlo(&enc, &dec, &model, 99, 0).is_err());
    }

    #[test]
    fn ncr_schedule_shape() {
        let s = ncr_schedule(0.5, 4, 64.0);
        assert_eq!(s.len(), 4);
        assert_abs_diff_eq!(s[3], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s[0], 32.0, epsilon = 1e-12);
        assert!(s.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(ncr_schedule(0.5, 1, 64.0), vec![0.5]);
    }

    #[test]
    fn seeded_init_deterministic_and_linear_at_zero() {
        let model = unit_model(0.99, 12.531);
        let x_grid = Grid1D::new(-5.0, 5.0, 51).unwrap();
        let lin = seeded_init(&x_grid, &model, 12.531, 0).unwrap();
        let a = (12.531f64).sqrt();
        for (&x, &g) in x_grid.values().iter().zip(lin.g_values()) {
            assert_abs_diff_eq!(g, a * x, epsilon = 1e-12);
        }
        let s1 = seeded_init(&x_grid, &model, 12.531, 5).unwrap();
        let s2 = seeded_init(&x_grid, &model, 12.531, 5).unwrap();
        assert_eq!(s1.g_values(), s2.g_values());
        assert_ne!(s1.g_values(), lin.g_values());
    }

    #[test]
    fn sweep_analytic_methods_only() {
        let model = unit_model(0.99, 1.0);
        let cfg = SweepConfig {
            methods: vec![Method::Opta, Method::Linear],
            csnr_points_db: vec![5.0, 11.0],
            seeds: vec![0, 1],
            ..SweepConfig::default()
        };
        let records = sweep(&cfg, &model);
        // One record per (method, csnr): seeds do not multiply analytic methods.
        assert_eq!(records.len(), 4);
        for r in &records {
            assert!(r.error.is_none(), "unexpected error {:?}", r.error);
        }
        for &csnr in &cfg.csnr_points_db {
            let get = |m: &str| {
                records
                    .iter()
                    .find(|r| r.method == m && r.csnr_db == csnr)
                    .and_then(|r| r.point.as_ref())
                    .unwrap()
                    .snr_db
            };
            assert!(get("opta") > get("linear"));
        }
    }

    #[test]
    fn derivative_sign_change_count() {
        let grid = Grid1D::new(-1.0, 1.0, 101).unwrap();
        let monotone = TabulatedEncoder::from_fn(grid.clone(), |x| 2.0 * x).unwrap();
        assert_eq!(derivative_sign_changes(&monotone), 0);
        let folded =
            TabulatedEncoder::from_fn(grid, |x| (3.5 * std::f64::consts::PI * x).sin()).unwrap();
        assert!(derivative_sign_changes(&folded) >= 2);
    }
}
