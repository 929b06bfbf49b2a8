//! Sweeps the threshold grid at the default spam proportion and reports
//! the pairs with the lowest traffic ratio and the highest accuracy.
//!
//! ```text
//! cargo run --release --example threshold_sweep -- [step] [sweep.csv]
//! ```

use hybridspam::experiments::{consecutive_seeds, sweep_thresholds, Mode, SweepReport, SweepSpec};

fn main() -> hybridspam::Result<()> {
    let mut args = std::env::args().skip(1);
    let step: f64 = args.next().map_or(0.1, |s| s.parse().expect("step is a number"));
    let out = args.next();

    let spec = SweepSpec {
        grid_step: step,
        proportions: vec![0.1457],
        seeds: consecutive_seeds(0, 10),
        mode: Mode::Empirical,
        ..SweepSpec::default()
    };
    let cells = sweep_thresholds(&spec, 0.1457)?;
    println!("{} cells over {} seeds", cells.len(), spec.seeds.len());

    let mut by_ratio: Vec<_> = cells.iter().filter(|c| c.h1 < c.h2).copied().collect();
    by_ratio.sort_by(|a, b| a.ratio_mean.total_cmp(&b.ratio_mean));
    println!("lowest traffic ratio with a non-empty uncertain band:");
    for c in by_ratio.iter().take(5) {
        println!("  [{:.3}, {:.3})  ratio {:.4}  acc {:.4}", c.h1, c.h2, c.ratio_mean, c.acc_mean);
    }
    let mut by_acc = cells.clone();
    by_acc.sort_by(|a, b| b.acc_mean.total_cmp(&a.acc_mean));
    println!("highest accuracy:");
    for c in by_acc.iter().take(5) {
        println!("  [{:.3}, {:.3})  ratio {:.4}  acc {:.4}", c.h1, c.h2, c.ratio_mean, c.acc_mean);
    }

    if let Some(path) = out {
        let sidecar = SweepReport { spec, cells }.save(&path)?;
        println!("wrote {path} and {}", sidecar.display());
    }
    Ok(())
}
