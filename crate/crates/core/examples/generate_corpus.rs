//! Draws a synthetic corpus from the beta mixture and writes it to disk.
//!
//! ```text
//! cargo run --example generate_corpus -- [out.csv] [n] [q]
//! ```

use hybridspam::{generate_corpus, ClassLabel, Corpus, MixtureParams};

fn main() -> hybridspam::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "corpus.csv".into());
    let n: usize = args.next().map_or(Ok(5000), |s| s.parse()).expect("n is an integer");
    let q: f64 = args.next().map_or(Ok(0.1457), |s| s.parse()).expect("q is a number");
    let seed = std::env::var("HYBRIDSPAM_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);

    let params = MixtureParams::default().with_n(n)?.with_spam_proportion(q)?;
    let corpus = generate_corpus(&params, seed);
    corpus.save(&out)?;

    let mean = |label| {
        let ks: Vec<f64> = corpus
            .messages
            .iter()
            .filter(|m| m.truth == label)
            .map(|m| m.kappa.value())
            .collect();
        ks.iter().sum::<f64>() / ks.len().max(1) as f64
    };
    println!("seed {seed}: {} messages to {out}", corpus.len());
    for (label, shape) in [(ClassLabel::Normal, params.normal_shape()), (ClassLabel::Spam, params.spam_shape())] {
        println!(
            "  {:<6} count {:>5}  mean kappa {:.4}  (Beta{:?} mean {:.4})",
            label.as_str(),
            corpus.count(label),
            mean(label),
            shape,
            shape.0 / (shape.0 + shape.1)
        );
    }

    let back = Corpus::load(&out)?;
    assert_eq!(back.len(), corpus.len());
    println!("reloaded {} rows", back.len());
    Ok(())
}
