//! Mean AUC of every method on simulated data.
//!
//! `cargo run --release --example benchmark -- [p] [n] [seeds] [k] [c_h] [first_seed]`

use std::time::Instant;

use plaggm::baselines::Method;
use plaggm::evaluation::roc_auc;
use plaggm::kernel::IndicatorSpec;
use plaggm::methods::{fit_method, MethodSettings};
use plaggm::simulation::{simulate, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arg<T: std::str::FromStr>(args: &[String], i: usize, default: T) -> T {
    args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> plaggm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let p: usize = arg(&args, 1, 10);
    let n: usize = arg(&args, 2, 800);
    let seeds: u64 = arg(&args, 3, 10);
    let mut settings = MethodSettings::default();
    if let Some(k) = args.get(4).and_then(|s| s.parse().ok()) {
        settings.indicator = IndicatorSpec::Soft { k };
    }
    settings.bandwidth_constant = arg(&args, 5, settings.bandwidth_constant);
    let first: u64 = arg(&args, 6, 0);

    let start = Instant::now();
    let mut totals = vec![0.0; Method::ALL.len()];
    for seed in first..first + seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, truth) = simulate(&SimConfig::new(p, n), &mut rng)?;
        let line: Vec<String> = Method::ALL
            .iter()
            .enumerate()
            .map(|(m, &method)| {
                let auc = fit_method(method, &data, &settings)
                    .and_then(|fit| roc_auc(&fit.path, &truth.theta0))
                    .map(|roc| roc.auc)
                    .unwrap_or(f64::NAN);
                totals[m] += auc;
                format!("{method}={auc:.3}")
            })
            .collect();
        println!("seed {seed}: {}", line.join(" "));
    }
    for (m, method) in Method::ALL.iter().enumerate() {
        println!("{method}: mean AUC {:.4}", totals[m] / seeds as f64);
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
