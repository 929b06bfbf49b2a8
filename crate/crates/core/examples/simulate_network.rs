//! Runs the message-level network simulation and compares the hop count
//! with the closed-form expectation.
//!
//! ```text
//! cargo run --release --example simulate_network -- [p1|p2|p3|p4]
//! ```

use hybridspam::challenge::Protocol;
use hybridspam::{generate_corpus, run_corpus, traffic_ratio, MixtureParams, SimPolicy, ThresholdPair};

fn main() -> hybridspam::Result<()> {
    let protocol: Protocol = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("protocol is p1..p4"))
        .unwrap_or(Protocol::P1);
    let seed = 42;
    let corpus = generate_corpus(&MixtureParams::default(), seed);
    let t = ThresholdPair::new(0.2, 0.8)?;
    let (e1, e2) = (0.1, 0.1);

    let report = run_corpus(&corpus, &SimPolicy::new(t, e1, e2, protocol, seed)?)?;
    let expected = traffic_ratio(&corpus, t, e1, e2)?;

    println!("{protocol} on {} messages, thresholds [{}, {})", corpus.len(), t.h1(), t.h2());
    println!("{}", serde_json::to_string_pretty(&report.pathway_counts).expect("serializes"));
    println!("simulated hops  {}", report.total_hops);
    println!("expected hops   {:.1}", expected.hybrid.n_hybrid);
    println!("filter only     {:.0}", expected.n_filtering_only);
    println!("drops by reason {:?}", report.rejects_by_reason);
    println!("accuracy        {:.4}", report.confusion.accuracy()?);
    Ok(())
}
