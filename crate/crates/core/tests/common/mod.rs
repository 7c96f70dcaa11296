//! Shared oracles for the integration and acceptance suites: seeded random
//! instances, kink-aware finite-difference gradient checks, and the
//! stationarity probe of the linear mapping.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zdsc_core::cost::{
    affine_param_gradient, bayes_decoder, evaluate_costs, evaluate_tabulated_costs,
    functional_gradient,
};
use zdsc_core::gauss::{grids_with_counts, GridCounts};
use zdsc_core::optim::{linear_lambda_for_power, linear_mmse_coefficients};
use zdsc_core::{
    AffineModel, DecoderTable, Grid1D, GridSet, SourceChannelModel, StructuredEncoder,
    TabulatedEncoder,
};

pub fn fd_counts() -> GridCounts {
    GridCounts {
        nx: 41,
        nz: 21,
        ny: 161,
        nn: 15,
    }
}

/// Largest finite-difference step (up to `h_max`) for which none of the
/// decoder evaluations crosses a y-grid node. The bilinear table has slope
/// kinks at the nodes; a step straddling one would make the central
/// difference measure a mix of the two segment slopes instead of the
/// one-sided derivative the gradient legitimately returns.
pub fn kink_free_step(
    y_grid: &Grid1D,
    samples: impl Iterator<Item = (f64, f64)>, // (y*, |dy*/d theta|)
    h_max: f64,
) -> Option<f64> {
    let spacing = y_grid.spacing();
    let mut h = h_max;
    for (y, shift) in samples {
        if !y_grid.contains(y) {
            continue;
        }
        let t = (y - y_grid.lo()) / spacing;
        let frac = t - t.floor();
        let dist = frac.min(1.0 - frac) * spacing;
        let allowed = 0.5 * dist / shift.max(1e-12);
        h = h.min(allowed);
    }
    (h > 1e-9 * h_max).then_some(h)
}

pub fn relative_error(actual: f64, expected: f64, floor: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(actual.abs()).max(floor)
}

fn random_instance(seed: u64) -> (SourceChannelModel, GridSet, TabulatedEncoder, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho: f64 = rng.random_range(-0.9..0.9);
    let power: f64 = rng.random_range(0.5..4.0);
    let model = SourceChannelModel::new(1.0, 1.0, rho, 1.0, power).unwrap();
    let amp: f64 = rng.random_range(1.0..3.0);
    let a: f64 = rng.random_range(-1.0..1.0) * amp;
    let b: f64 = rng.random_range(-0.5..0.5);
    let w1: f64 = rng.random_range(0.3..1.2);
    let c1: f64 = rng.random_range(-1.0..1.0) * amp;
    let g = move |x: f64| a * x + b + c1 * (w1 * x).sin();
    // Size the y grid from the realized encoder range so nothing clamps.
    let reach = (0..=100)
        .map(|i| g(-5.0 + 0.1 * i as f64).abs())
        .fold(0.0f64, f64::max);
    let grids = grids_with_counts(&model, reach + 0.5, fd_counts()).unwrap();
    let enc = TabulatedEncoder::from_fn(grids.x_grid.clone(), g).unwrap();
    let lambda: f64 = rng.random_range(0.01..0.5);
    (model, grids, enc, lambda)
}

/// Worst relative error of the encoder-table gradient against central finite
/// differences of the discretized Lagrangian, plus the number of comparable
/// points, for one seeded instance.
pub fn functional_fd_worst_error(seed: u64) -> (f64, usize) {
    let (model, grids, enc, lambda) = random_instance(seed);
    let dec = bayes_decoder((&enc).into(), &model, &grids).unwrap();
    let grad = functional_gradient(&enc, &dec, &model, &grids, lambda).unwrap();
    let weights = grids.x_grid.trapezoid_weights();

    let scale = enc
        .g_values()
        .iter()
        .fold(0.0f64, |m, g| m.max(g.abs()))
        .max(1.0);
    let fd: Vec<Option<f64>> = (0..enc.g_values().len())
        .map(|i| {
            let y0 = enc.g_values()[i];
            let h = kink_free_step(
                &grids.y_grid,
                grids.n_grid.values().iter().map(|&n| (y0 + n, 1.0)),
                1e-4 * scale,
            )?;
            let mut gp = enc.g_values().to_vec();
            gp[i] += h;
            let plus = TabulatedEncoder::new(grids.x_grid.clone(), gp.clone()).unwrap();
            gp[i] -= 2.0 * h;
            let minus = TabulatedEncoder::new(grids.x_grid.clone(), gp).unwrap();
            let jp = evaluate_tabulated_costs(&plus, &dec, &model, &grids, lambda)
                .unwrap()
                .lagrangian;
            let jm = evaluate_tabulated_costs(&minus, &dec, &model, &grids, lambda)
                .unwrap()
                .lagrangian;
            Some((jp - jm) / (2.0 * h))
        })
        .collect();

    let fd_max = fd.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-12 + 1e-4 * fd_max;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for i in 0..fd.len() {
        let Some(expected) = fd[i] else { continue };
        let actual = grad[i] * weights[i];
        if expected.abs() > 1e-3 * fd_max {
            worst = worst.max(relative_error(actual, expected, floor));
            checked += 1;
        }
    }
    (worst, checked)
}

fn random_structured_instance(
    seed: u64,
) -> (SourceChannelModel, GridSet, StructuredEncoder, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let rho: f64 = rng.random_range(-0.9..0.9);
    let power: f64 = rng.random_range(0.5..4.0);
    let model = SourceChannelModel::new(1.0, 1.0, rho, 1.0, power).unwrap();
    let amp: f64 = rng.random_range(1.0..2.0);
    let k = rng.random_range(2..4usize);
    let models: Vec<AffineModel> = (0..k)
        .map(|_| AffineModel {
            a: rng.random_range(-1.0..1.0) * amp,
            b: rng.random_range(-1.0..1.0),
        })
        .collect();
    let reach = models
        .iter()
        .map(|m| m.eval(5.0).abs().max(m.eval(-5.0).abs()))
        .fold(0.0f64, f64::max);
    let grids = grids_with_counts(&model, reach + 0.5, fd_counts()).unwrap();
    let n = grids.x_grid.len();
    let mut assoc = Array2::zeros((k, n));
    for i in 0..n {
        let mut col: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let sum: f64 = col.iter().sum();
        col.iter_mut().for_each(|p| *p /= sum);
        for (ki, &p) in col.iter().enumerate() {
            assoc[[ki, i]] = p;
        }
    }
    let enc = StructuredEncoder::new(models, assoc, grids.x_grid.clone()).unwrap();
    let lambda: f64 = rng.random_range(0.01..0.5);
    let temperature: f64 = rng.random_range(0.001..0.1);
    (model, grids, enc, lambda, temperature)
}

/// Worst relative error of the local-model parameter gradient against
/// central finite differences of the free energy, plus the number of
/// comparable parameters, for one seeded instance.
pub fn affine_fd_worst_error(seed: u64) -> (f64, usize) {
    let (model, grids, enc, lambda, temperature) = random_structured_instance(seed);
    let dec = bayes_decoder((&enc).into(), &model, &grids).unwrap();
    let grads = affine_param_gradient(&enc, &dec, &model, &grids, lambda).unwrap();

    let f_of = |models: Vec<AffineModel>| -> f64 {
        let trial =
            StructuredEncoder::new(models, enc.assoc().clone(), grids.x_grid.clone()).unwrap();
        evaluate_costs(&trial, &dec, &model, &grids, lambda, temperature)
            .unwrap()
            .free_energy
    };

    let scale = enc
        .models()
        .iter()
        .fold(1.0f64, |m, am| m.max(am.a.abs()).max(am.b.abs()));
    let mut fd: Vec<(Option<f64>, Option<f64>)> = Vec::new();
    for k in 0..enc.num_models() {
        let mk = enc.models()[k];
        let mut per_param = (None, None);
        for slot in [0usize, 1] {
            // Perturbing a_k shifts each decoder evaluation by x_i per unit;
            // b_k shifts them uniformly.
            let samples = grids.x_grid.values().iter().flat_map(|&x| {
                grids
                    .n_grid
                    .values()
                    .iter()
                    .map(move |&n| (mk.eval(x) + n, if slot == 0 { x.abs() } else { 1.0 }))
                    .collect::<Vec<_>>()
            });
            let Some(h) = kink_free_step(&grids.y_grid, samples, 1e-4 * scale) else {
                continue;
            };
            let mut plus = enc.models().to_vec();
            let mut minus = enc.models().to_vec();
            if slot == 0 {
                plus[k].a += h;
                minus[k].a -= h;
            } else {
                plus[k].b += h;
                minus[k].b -= h;
            }
            let d = (f_of(plus) - f_of(minus)) / (2.0 * h);
            if slot == 0 {
                per_param.0 = Some(d);
            } else {
                per_param.1 = Some(d);
            }
        }
        fd.push(per_param);
    }

    let fd_max = fd
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-12 + 1e-4 * fd_max;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for k in 0..fd.len() {
        if let Some(v) = fd[k].0 {
            if v.abs() > 1e-3 * fd_max {
                worst = worst.max(relative_error(grads[k].0, v, floor));
                checked += 1;
            }
        }
        if let Some(v) = fd[k].1 {
            if v.abs() > 1e-3 * fd_max {
                worst = worst.max(relative_error(grads[k].1, v, floor));
                checked += 1;
            }
        }
    }
    (worst, checked)
}

/// Max density-weighted gradient of the linear mapping at its analytic
/// multiplier (rho = 0, unit variances, P = 1), using the exact linear MMSE
/// decoder. Zero up to quadrature error when the stationarity holds.
pub fn linear_stationarity_worst_gradient() -> f64 {
    let model = SourceChannelModel::new(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
    let grids = grids_with_counts(
        &model,
        5.0,
        GridCounts {
            nx: 201,
            nz: 65,
            ny: 161,
            nn: 49,
        },
    )
    .unwrap();
    let enc = TabulatedEncoder::from_fn(grids.x_grid.clone(), |x| x).unwrap();
    let lambda = linear_lambda_for_power(&model, 1.0);
    let (by, bz, _) = linear_mmse_coefficients(&model, 1.0);
    let dec = DecoderTable::from_fn(grids.y_grid.clone(), grids.z_grid.clone(), |y, z| {
        by * y + bz * z
    })
    .unwrap();
    let grad = functional_gradient(&enc, &dec, &model, &grids, lambda).unwrap();
    grad.iter().fold(0.0f64, |m, g| m.max(g.abs()))
}
