//! Support error at the oracle lambda as `n` grows on a fixed-width grid.
//!
//! `cargo run --release --example sparsistency -- [seeds] [first_seed]`

use plaggm::baselines::Method;
use plaggm::evaluation::support_max_error;
use plaggm::methods::{fit_method, MethodSettings};
use plaggm::simulation::{simulate, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> plaggm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let first: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let ns = [400usize, 800, 1600, 3200];
    let settings = MethodSettings::default();
    let mut slopes = Vec::new();
    let mut monotone = 0;
    for seed in first..first + seeds {
        let mut errs = Vec::new();
        for &n in &ns {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let config = SimConfig {
                half_width: Some(400.0),
                ..SimConfig::new(10, n)
            };
            let (data, truth) = simulate(&config, &mut rng)?;
            let fit = fit_method(Method::Pla, &data, &settings)?;
            let best = fit
                .path
                .points
                .iter()
                .map(|pt| support_max_error(&pt.theta, &truth.theta0).unwrap())
                .fold(f64::INFINITY, f64::min);
            errs.push(best);
        }
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let mono = errs.windows(2).all(|w| w[1] < w[0]);
        monotone += mono as usize;
        slopes.push(slope);
        println!("seed {seed}: errors {errs:.4?} slope {slope:.3} monotone {mono}");
    }
    let mut sorted = slopes.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "monotone {monotone}/{seeds}; mean slope {:.3}; median slope {:.3}",
        slopes.iter().sum::<f64>() / slopes.len() as f64,
        sorted[sorted.len() / 2]
    );
    Ok(())
}
