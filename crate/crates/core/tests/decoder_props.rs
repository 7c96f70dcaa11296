//! Optimality of the Bayes decoder against perturbed alternatives, Gibbs
//! free-energy minimality, and Monte Carlo agreement with quadrature.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zdsc_core::cost::{bayes_decoder, evaluate_costs, evaluate_tabulated_costs, gibbs_probs};
use zdsc_core::gauss::{grids_with_counts, GridCounts};
use zdsc_core::harness::monte_carlo;
use zdsc_core::optim::linear_baseline_on;
use zdsc_core::{DecoderTable, SourceChannelModel, StructuredEncoder, TabulatedEncoder};

#[test]
fn bayes_decoder_never_loses_to_perturbed_tables() {
    let model = SourceChannelModel::new(1.0, 1.0, 0.8, 1.0, 2.0).unwrap();
    let grids = grids_with_counts(
        &model,
        8.5,
        GridCounts {
            nx: 101,
            nz: 33,
            ny: 81,
            nn: 25,
        },
    )
    .unwrap();
    let enc = TabulatedEncoder::from_fn(grids.x_grid.clone(), |x| {
        1.4 * x + 0.5 * (1.3 * x).sin()
    })
    .unwrap();
    let dec = bayes_decoder((&enc).into(), &model, &grids).unwrap();
    let lambda = 0.2;
    let j_bayes = evaluate_tabulated_costs(&enc, &dec, &model, &grids, lambda)
        .unwrap()
        .lagrangian;

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..10 {
        let magnitude = rng.random_range(0.01..0.2);
        let perturbed = Array2::from_shape_fn(dec.xhat().dim(), |(j, m)| {
            dec.xhat()[[j, m]] + magnitude * rng.random_range(-1.0..1.0f64)
        });
        let alt = DecoderTable::new(grids.y_grid.clone(), grids.z_grid.clone(), perturbed).unwrap();
        let j_alt = evaluate_tabulated_costs(&enc, &alt, &model, &grids, lambda)
            .unwrap()
            .lagrangian;
        assert!(
            j_bayes <= j_alt + 1e-6,
            "trial {trial}: Bayes J {j_bayes} exceeds perturbed J {j_alt}"
        );
    }
}

#[test]
fn gibbs_minimizes_free_energy_over_random_associations() {
    let model = SourceChannelModel::new(1.0, 1.0, 0.5, 1.0, 2.0).unwrap();
    let grids = grids_with_counts(
        &model,
        8.0,
        GridCounts {
            nx: 61,
            nz: 25,
            ny: 61,
            nn: 17,
        },
    )
    .unwrap();
    let n = grids.x_grid.len();
    let k = 3;
    let models = vec![
        zdsc_core::AffineModel { a: 1.2, b: 0.0 },
        zdsc_core::AffineModel { a: -0.8, b: 0.4 },
        zdsc_core::AffineModel { a: 0.3, b: -0.6 },
    ];
    let uniform = Array2::from_elem((k, n), 1.0 / k as f64);
    let enc = StructuredEncoder::new(models, uniform, grids.x_grid.clone()).unwrap();
    let dec = bayes_decoder((&enc).into(), &model, &grids).unwrap();
    let lambda = 0.15;
    let temperature = 0.05;
    let costs = zdsc_core::cost::per_model_costs(&enc, &dec, &model, &grids, lambda).unwrap();
    let gibbs = gibbs_probs(&costs, temperature).unwrap();
    let enc_gibbs = enc.with_assoc(gibbs).unwrap();
    let f_gibbs = evaluate_costs(&enc_gibbs, &dec, &model, &grids, lambda, temperature)
        .unwrap()
        .free_energy;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..10 {
        let mut assoc = Array2::zeros((k, n));
        for i in 0..n {
            let mut col: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
            let sum: f64 = col.iter().sum();
            for (ki, p) in col.iter_mut().enumerate() {
                *p /= sum;
                assoc[[ki, i]] = *p;
            }
        }
        let alt = enc.with_assoc(assoc).unwrap();
        let f_alt = evaluate_costs(&alt, &dec, &model, &grids, lambda, temperature)
            .unwrap()
            .free_energy;
        assert!(
            f_gibbs <= f_alt + 1e-10,
            "trial {trial}: Gibbs F {f_gibbs} exceeds alternative F {f_alt}"
        );
    }
}

#[test]
fn monte_carlo_agrees_with_quadrature_on_the_linear_benchmark() {
    let p = 12.531;
    let model = SourceChannelModel::new(1.0, 1.0, 0.99, 1.0, p).unwrap();
    let grids = grids_with_counts(
        &model,
        5.0 * p.sqrt(),
        GridCounts {
            nx: 201,
            nz: 65,
            ny: 257,
            nn: 49,
        },
    )
    .unwrap();
    let (enc, dec, d_closed) = linear_baseline_on(&model, p, &grids).unwrap();
    let report = evaluate_tabulated_costs(&enc, &dec, &model, &grids, 0.0).unwrap();
    let est = monte_carlo(&enc, &dec, &model, 1_000_000, 2024).unwrap();

    assert!(
        (report.distortion - est.distortion_hat).abs() < 3.0 * est.distortion_stderr + 1e-3,
        "quadrature D {} vs Monte Carlo {} (stderr {})",
        report.distortion,
        est.distortion_hat,
        est.distortion_stderr
    );
    assert!(
        (report.power - est.power_hat).abs() < 3.0 * est.power_stderr + 1e-3 * p,
        "quadrature P {} vs Monte Carlo {} (stderr {})",
        report.power,
        est.power_hat,
        est.power_stderr
    );
    // Both estimates sit on the closed form.
    assert!((est.distortion_hat - d_closed).abs() < 3.0 * est.distortion_stderr + 1e-4);
}

#[test]
fn monte_carlo_agrees_with_quadrature_on_a_folded_encoder() {
    let model = SourceChannelModel::new(1.0, 1.0, 0.9, 1.0, 3.0).unwrap();
    let grids = grids_with_counts(
        &model,
        10.0,
        GridCounts {
            nx: 151,
            nz: 49,
            ny: 161,
            nn: 33,
        },
    )
    .unwrap();
    let enc = TabulatedEncoder::from_fn(grids.x_grid.clone(), |x| {
        1.2 * x + 1.1 * (2.0 * x).sin()
    })
    .unwrap();
    let dec = bayes_decoder((&enc).into(), &model, &grids).unwrap();
    let report = evaluate_tabulated_costs(&enc, &dec, &model, &grids, 0.0).unwrap();
    let est = monte_carlo(&enc, &dec, &model, 1_000_000, 7).unwrap();
    assert!(
        (report.distortion - est.distortion_hat).abs() < 3.0 * est.distortion_stderr + 1e-3,
        "quadrature D {} vs Monte Carlo {} (stderr {})",
        report.distortion,
        est.distortion_hat,
        est.distortion_stderr
    );
    assert!((report.power - est.power_hat).abs() < 3.0 * est.power_stderr + 1e-3 * 3.0);
}
