//! Scratch driver for tuning the annealing benchmark point.

use std::time::Instant;

use zdsc_core::gauss::GridCounts;
use zdsc_core::harness::{csnr_db, power_for_csnr_db, run_da, snr_db};
use zdsc_core::optim::{linear_distortion, opta, AnnealConfig};
use zdsc_core::SourceChannelModel;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let rho: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.99);
    let csnr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10.98);
    let scale: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let k_max: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(64);

    let target = power_for_csnr_db(csnr, 1.0);
    let model = SourceChannelModel::new(1.0, 1.0, rho, 1.0, target).unwrap();
    let counts = GridCounts {
        nx: (200.0 * scale) as usize + 1,
        nz: (64.0 * scale) as usize + 1,
        ny: 97,
        nn: (48.0 * scale) as usize + 1,
    };
    let cfg = AnnealConfig {
        k_max,
        ..AnnealConfig::default()
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let run = pool.install(|| run_da(&model, target, &cfg, counts, true)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let r = &run.outcome.report;
    let d_lin = linear_distortion(&model, target);
    let d_opta = opta(&model, target).unwrap();
    println!("rho={rho} csnr_target={csnr} target_power={target:.4}");
    println!(
        "lambda={:.6e}  achieved_power={:.4}  achieved_csnr={:.3} dB",
        run.lambda,
        r.power,
        csnr_db(r.power, 1.0).unwrap()
    );
    println!(
        "D={:.6e}  SNR={:.3} dB   (linear {:.3} dB, opta {:.3} dB)",
        r.distortion,
        snr_db(1.0, r.distortion).unwrap(),
        snr_db(1.0, d_lin).unwrap(),
        snr_db(1.0, d_opta).unwrap()
    );
    println!(
        "effective_k={}  outer_steps={}  elapsed={:.1}s",
        run.outcome.effective_k,
        run.outcome.trace.records.len(),
        elapsed
    );
    let ks: Vec<usize> = run
        .outcome
        .trace
        .records
        .iter()
        .map(|t| t.effective_k)
        .collect();
    println!("k evolution: {ks:?}");
    let tail: Vec<String> = run
        .outcome
        .trace
        .records
        .iter()
        .rev()
        .take(6)
        .map(|t| {
            format!(
                "step {} T={:.3e} K={} H={:.3e} J={:.5e} inner={}",
                t.outer_step,
                t.temperature,
                t.effective_k,
                t.report.entropy,
                t.report.lagrangian,
                t.inner_free_energies.len()
            )
        })
        .collect();
    println!("trace tail:\n  {}", tail.join("\n  "));
    // every5
    let js: Vec<String> = run
        .outcome
        .trace
        .records
        .iter()
        .filter(|t| t.outer_step % 5 == 0)
        .map(|t| format!("{}:{:.8e}", t.outer_step, t.report.lagrangian))
        .collect();
    println!("J every 5: {}", js.join(" "));
    let total_inner: usize = run
        .outcome
        .trace
        .records
        .iter()
        .map(|t| t.inner_free_energies.len())
        .sum();
    println!("total inner iterations: {total_inner}");
    let sign_changes = zdsc_core::harness::derivative_sign_changes(&run.outcome.hardened);
    println!("hardened derivative sign changes: {sign_changes}");
}
