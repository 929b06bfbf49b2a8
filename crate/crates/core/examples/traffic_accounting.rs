//! Traffic and accuracy for one threshold pair, counted on a corpus and
//! computed from the mixture in closed form, under both accountings of the
//! uncertain region.
//!
//! ```text
//! cargo run --example traffic_accounting -- [h1] [h2] [e1] [e2]
//! ```

use hybridspam::traffic::{analytic_accuracy, analytic_expected_traffic_with, analytic_filtering_only, traffic_ratio_with};
use hybridspam::{generate_corpus, Accounting, MixtureParams, ThresholdPair};

fn main() -> hybridspam::Result<()> {
    let v: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("number")).collect();
    let get = |i: usize, d: f64| v.get(i).copied().unwrap_or(d);
    let t = ThresholdPair::new(get(0, 0.1), get(1, 0.9))?;
    let (e1, e2) = (get(2, 0.1), get(3, 0.1));

    let params = MixtureParams::default();
    let corpus = generate_corpus(&params, 0);
    println!("thresholds [{}, {}), e1 {e1}, e2 {e2}, n {}", t.h1(), t.h2(), params.n());
    println!("{:<10} {:>12} {:>12} {:>10} {:>10}", "accounting", "corpus TA", "analytic TA", "ratio", "acc");
    for accounting in [Accounting::PerTruth, Accounting::Pooled] {
        let b = traffic_ratio_with(&corpus, t, e1, e2, accounting)?;
        let analytic = analytic_expected_traffic_with(&params, t, e1, e2, accounting);
        println!(
            "{:<10} {:>12.1} {:>12.1} {:>10.4} {:>10.4}",
            format!("{accounting:?}"),
            b.hybrid.n_hybrid,
            analytic,
            b.ratio,
            b.confusion.accuracy()?
        );
    }
    println!("filter-only baseline: corpus {:.0}, analytic {:.1}", traffic_ratio_with(&corpus, t, e1, e2, Accounting::PerTruth)?.n_filtering_only, analytic_filtering_only(&params, t.h1()));
    println!("analytic accuracy {:.4}", analytic_accuracy(&params, t, e1, e2));
    Ok(())
}
