//! Binary and ternary classification of a corpus, and the confusion
//! matrices that go with them.
//!
//! ```text
//! cargo run --example classify_regions -- [h1] [h2]
//! ```

use hybridspam::{
    classify_binary, classify_ternary, confusion_filtering, expected_confusion_hybrid, generate_corpus,
    partition_corpus, ClassLabel, MixtureParams, Region, ThresholdPair,
};

fn main() -> hybridspam::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<f64>().expect("threshold is a number"));
    let h1 = args.next().unwrap_or(0.3);
    let h2 = args.next().unwrap_or(0.7);
    let t = ThresholdPair::new(h1, h2)?;

    let corpus = generate_corpus(&MixtureParams::default(), 0);
    for m in corpus.messages.iter().take(5) {
        println!(
            "id {:>2}  truth {:<6}  kappa {:.4}  binary@h1 {:<6}  ternary {:?}",
            m.id,
            m.truth.as_str(),
            m.kappa.value(),
            classify_binary(m.kappa, h1).as_str(),
            classify_ternary(m.kappa, t)
        );
    }

    let counts = partition_corpus(&corpus, t);
    println!("\nregion counts for [{h1}, {h2}):");
    println!("{:>8} {:>8} {:>10} {:>8}", "truth", "normal", "uncertain", "spam");
    for truth in [ClassLabel::Normal, ClassLabel::Spam] {
        let row: Vec<u64> = Region::ALL.iter().map(|&r| counts.get(truth, r)).collect();
        println!("{:>8} {:>8} {:>10} {:>8}", truth.as_str(), row[0], row[1], row[2]);
    }

    let filter = confusion_filtering(&corpus, h1);
    let hybrid = expected_confusion_hybrid(&counts, 0.1, 0.1);
    println!("\nfilter only at h1: {filter:?}  acc {:.4}", filter.accuracy()?);
    println!("hybrid (e1 = e2 = 0.1): {hybrid:?}  acc {:.4}", hybrid.accuracy()?);
    Ok(())
}
