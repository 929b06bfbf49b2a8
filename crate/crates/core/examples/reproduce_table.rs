//! Spam-proportion table for the four reference threshold pairs,
//! averaged over 50 corpora per cell.
//!
//! ```text
//! cargo run --release --example reproduce_table
//! ```

use hybridspam::experiments::{reference_pairs, spam_proportion_table, SweepSpec};

fn main() -> hybridspam::Result<()> {
    let spec = SweepSpec::reference_table(0);
    let cells = spam_proportion_table(&spec, &reference_pairs())?;
    println!(
        "{:>5} {:>11} {:>10} {:>8} {:>12} {:>8}",
        "q", "thresholds", "TA", "sd", "ratio", "ACC"
    );
    for c in &cells {
        println!(
            "{:>5.1} [{:.1}, {:.1}) {:>10.1} {:>8.1} {:>11.2}% {:>8.4}",
            c.proportion,
            c.h1,
            c.h2,
            c.ta_mean,
            c.ta_std,
            100.0 * c.ratio_mean,
            c.acc_mean
        );
    }
    Ok(())
}
