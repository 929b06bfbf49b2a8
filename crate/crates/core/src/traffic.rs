//! Traffic accounting.
//!
//! Traffic is counted in hops: one traversal of A→B, B→A or B→C. With the
//! filter alone, a message kept as normal costs 2 hops (A→B→C) and a dropped
//! one costs 1 (A→B). The hybrid scheme adds the uncertain band:
//!
//! | region    | outcome                    | hops |
//! |-----------|----------------------------|------|
//! | Normal    | delivered directly         | 2    |
//! | Uncertain | challenge passed, delivered| 4    |
//! | Uncertain | challenge failed, dropped  | 2    |
//! | Spam      | dropped at the center      | 1    |
//!
//! A legitimate sender fails the challenge with probability `e1`, a spammer
//! passes it with probability `e2`, which gives
//!
//! ```text
//! N_n   = |Normal| · 2
//! N_un  = |Uncertain ∩ normal| · (1-e1) · 4 + |Uncertain ∩ spam| · e2 · 4
//! N_us  = |Uncertain ∩ spam| · (1-e2) · 2 + |Uncertain ∩ normal| · e1 · 2
//! N_s   = |Spam| · 1
//! ```
//!
//! [`Accounting::Pooled`] is an alternative tabulation that skips the
//! ground-truth intersections in `N_un`/`N_us`: every uncertain message is
//! charged `4(1-e1) + 4e2 + 2(1-e2) + 2e1` hops. It is not a physical
//! pathway model (the simulator never produces it) but it is the accounting
//! behind the reference threshold table reproduced by
//! [`crate::experiments::SweepSpec::reference_table`].

use serde::{Deserialize, Serialize};

use crate::classifier::{
    classify_binary, expected_confusion_hybrid, partition_corpus, ConfusionMatrix, Region,
    RegionCounts, RegionMass, ThresholdPair,
};
use crate::corpus::{ClassLabel, Corpus, MixtureParams};
use crate::special::beta_cdf;
use crate::{Error, Result};

pub const HOPS_DIRECT_NORMAL: u32 = 2;
pub const HOPS_CHALLENGED_DELIVERED: u32 = 4;
pub const HOPS_CHALLENGED_DROPPED: u32 = 2;
pub const HOPS_DIRECT_SPAM: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accounting {
    /// Uncertain cells split by ground truth, matching the pathway model.
    #[default]
    PerTruth,
    /// Uncertain cells charged for both truths at once.
    Pooled,
}

impl Accounting {
    /// Expected hop cost of one uncertain message of the given truth.
    pub fn uncertain_cost(self, truth: ClassLabel, e1: f64, e2: f64) -> f64 {
        match self {
            Accounting::PerTruth => match truth {
                ClassLabel::Normal => 4.0 * (1.0 - e1) + 2.0 * e1,
                ClassLabel::Spam => 4.0 * e2 + 2.0 * (1.0 - e2),
            },
            Accounting::Pooled => 4.0 * (1.0 - e1) + 4.0 * e2 + 2.0 * (1.0 - e2) + 2.0 * e1,
        }
    }
}

/// The four traffic terms and their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HybridTraffic {
    pub n_n: f64,
    pub n_un: f64,
    pub n_us: f64,
    pub n_s: f64,
    pub n_hybrid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficBreakdown {
    #[serde(flatten)]
    pub hybrid: HybridTraffic,
    /// Filter-only traffic at the lower threshold.
    pub n_filtering_only: f64,
    pub ratio: f64,
    /// Expected hybrid confusion (normal = positive).
    pub confusion: ConfusionMatrix,
}

/// `2·|κ ≥ h| + 1·|κ < h|`.
pub fn traffic_filtering_only(corpus: &Corpus, h: f64) -> f64 {
    corpus
        .messages
        .iter()
        .map(|m| match classify_binary(m.kappa, h) {
            ClassLabel::Normal => f64::from(HOPS_DIRECT_NORMAL),
            ClassLabel::Spam => f64::from(HOPS_DIRECT_SPAM),
        })
        .sum()
}

pub fn traffic_hybrid_expected(counts: &RegionCounts, e1: f64, e2: f64) -> HybridTraffic {
    traffic_hybrid_expected_with(counts, e1, e2, Accounting::PerTruth)
}

pub fn traffic_hybrid_expected_with(
    counts: &RegionCounts,
    e1: f64,
    e2: f64,
    accounting: Accounting,
) -> HybridTraffic {
    hybrid_from_mass(&counts.mass(), e1, e2, accounting)
}

pub fn hybrid_from_mass(mass: &RegionMass, e1: f64, e2: f64, accounting: Accounting) -> HybridTraffic {
    let un_n = mass.get(ClassLabel::Normal, Region::Uncertain);
    let un_s = mass.get(ClassLabel::Spam, Region::Uncertain);
    let (un_normal_weight, un_spam_weight) = match accounting {
        Accounting::PerTruth => (un_n, un_s),
        Accounting::Pooled => {
            let all = un_n + un_s;
            (all, all)
        }
    };
    let n_n = mass.region_total(Region::Normal) * 2.0;
    let n_un = un_normal_weight * (1.0 - e1) * 4.0 + un_spam_weight * e2 * 4.0;
    let n_us = un_spam_weight * (1.0 - e2) * 2.0 + un_normal_weight * e1 * 2.0;
    let n_s = mass.region_total(Region::Spam);
    HybridTraffic {
        n_n,
        n_un,
        n_us,
        n_s,
        n_hybrid: n_n + n_un + n_us + n_s,
    }
}

/// Full breakdown from a tabulation. The filter-only baseline at `h1` is
/// `2·(n − |Spam|) + |Spam|`, read off the same counts.
pub fn breakdown_from_counts(
    counts: &RegionCounts,
    e1: f64,
    e2: f64,
    accounting: Accounting,
) -> Result<TrafficBreakdown> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::domain("traffic ratio of an empty corpus"));
    }
    let below = counts.region_total(Region::Spam);
    let baseline = (2 * (total - below) + below) as f64;
    let hybrid = traffic_hybrid_expected_with(counts, e1, e2, accounting);
    Ok(TrafficBreakdown {
        hybrid,
        n_filtering_only: baseline,
        ratio: hybrid.n_hybrid / baseline,
        confusion: expected_confusion_hybrid(counts, e1, e2),
    })
}

/// Hybrid traffic against the filter-only baseline at `h = h1`.
pub fn traffic_ratio(corpus: &Corpus, t: ThresholdPair, e1: f64, e2: f64) -> Result<TrafficBreakdown> {
    traffic_ratio_with(corpus, t, e1, e2, Accounting::PerTruth)
}

pub fn traffic_ratio_with(
    corpus: &Corpus,
    t: ThresholdPair,
    e1: f64,
    e2: f64,
    accounting: Accounting,
) -> Result<TrafficBreakdown> {
    if corpus.is_empty() {
        return Err(Error::domain("traffic ratio of an empty corpus"));
    }
    let counts = partition_corpus(corpus, t);
    let hybrid = traffic_hybrid_expected_with(&counts, e1, e2, accounting);
    let baseline = traffic_filtering_only(corpus, t.h1());
    Ok(TrafficBreakdown {
        hybrid,
        n_filtering_only: baseline,
        ratio: hybrid.n_hybrid / baseline,
        confusion: expected_confusion_hybrid(&counts, e1, e2),
    })
}

/// Class-conditional probabilities of each region under the mixture:
/// `Pr(κ < h1)`, `Pr(h1 ≤ κ < h2)`, `Pr(κ ≥ h2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandProbabilities {
    pub below: f64,
    pub between: f64,
    pub above: f64,
}

impl BandProbabilities {
    pub fn new(shape: (f64, f64), t: ThresholdPair) -> Self {
        let lo = beta_cdf(t.h1(), shape.0, shape.1);
        let hi = beta_cdf(t.h2(), shape.0, shape.1);
        BandProbabilities {
            below: lo,
            between: hi - lo,
            above: 1.0 - hi,
        }
    }
}

/// Expected `N_hybrid` under the mixture model itself, with region
/// cardinalities replaced by `n·p·Pr(band | normal)` and `n·q·Pr(band | spam)`.
pub fn analytic_expected_traffic(params: &MixtureParams, t: ThresholdPair, e1: f64, e2: f64) -> f64 {
    analytic_expected_traffic_with(params, t, e1, e2, Accounting::PerTruth)
}

pub fn analytic_expected_traffic_with(
    params: &MixtureParams,
    t: ThresholdPair,
    e1: f64,
    e2: f64,
    accounting: Accounting,
) -> f64 {
    let n = params.n() as f64;
    [(ClassLabel::Normal, params.p()), (ClassLabel::Spam, params.q())]
        .into_iter()
        .map(|(truth, weight)| {
            let b = BandProbabilities::new(params.shape(truth), t);
            let per_message = b.above * 2.0
                + b.between * accounting.uncertain_cost(truth, e1, e2)
                + b.below * 1.0;
            n * weight * per_message
        })
        .sum()
}

/// Expected filter-only traffic at threshold `h`.
pub fn analytic_filtering_only(params: &MixtureParams, h: f64) -> f64 {
    let n = params.n() as f64;
    let below = params.p() * beta_cdf(h, params.normal_shape().0, params.normal_shape().1)
        + params.q() * beta_cdf(h, params.spam_shape().0, params.spam_shape().1);
    n * (2.0 * (1.0 - below) + below)
}

/// Expected hybrid accuracy under the mixture model.
pub fn analytic_accuracy(params: &MixtureParams, t: ThresholdPair, e1: f64, e2: f64) -> f64 {
    let normal = BandProbabilities::new(params.normal_shape(), t);
    let spam = BandProbabilities::new(params.spam_shape(), t);
    params.p() * (normal.above + normal.between * (1.0 - e1))
        + params.q() * (spam.below + spam.between * (1.0 - e2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_corpus;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tp(h1: f64, h2: f64) -> ThresholdPair {
        ThresholdPair::new(h1, h2).unwrap()
    }

    fn hand_corpus() -> Corpus {
        use ClassLabel::{Normal as N, Spam as S};
        Corpus::from_scores(
            MixtureParams::default(),
            0,
            [(S, 0.05), (S, 0.3), (N, 0.5), (N, 0.7), (N, 0.95)],
        )
        .unwrap()
    }

    #[test]
    fn filtering_only_examples() {
        let c = hand_corpus();
        assert_eq!(traffic_filtering_only(&c, 0.0), 10.0);
        assert_eq!(traffic_filtering_only(&c, 1.0), 5.0);
        assert_eq!(traffic_filtering_only(&c, 0.5), 8.0);
    }

    #[test]
    fn direct_substitution() {
        let counts = RegionCounts::from_cells([0, 10, 0], [0, 5, 0]);
        let t = traffic_hybrid_expected(&counts, 0.0, 0.0);
        assert_eq!(t.n_un, 40.0);
        assert_eq!(t.n_us, 10.0);
        assert_eq!(t.n_hybrid, 50.0);

        let t = traffic_hybrid_expected_with(&counts, 0.0, 0.0, Accounting::Pooled);
        assert_eq!(t.n_un, 60.0);
        assert_eq!(t.n_us, 30.0);
    }

    #[test]
    fn pooled_cost_at_reference_error_rates() {
        let cost = Accounting::Pooled.uncertain_cost(ClassLabel::Spam, 0.02, 0.01);
        assert_relative_eq!(cost, 5.98, max_relative = 1e-12);
        let counts = RegionCounts::from_cells([0, 1, 0], [0, 0, 0]);
        let t = traffic_hybrid_expected_with(&counts, 0.02, 0.01, Accounting::Pooled);
        assert_relative_eq!(t.n_hybrid, 5.98, max_relative = 1e-12);
    }

    #[test]
    fn collapsed_ratio_is_one() {
        let c = generate_corpus(&MixtureParams::default().with_n(400).unwrap(), 2);
        for h in [0.0, 0.3, 0.5, 1.0] {
            for acc in [Accounting::PerTruth, Accounting::Pooled] {
                let b = traffic_ratio_with(&c, ThresholdPair::collapsed(h).unwrap(), 0.02, 0.01, acc).unwrap();
                assert_eq!(b.ratio, 1.0);
                assert_eq!(b.hybrid.n_hybrid, traffic_filtering_only(&c, h));
            }
        }
    }

    #[test]
    fn empty_corpus_ratio_is_a_domain_error() {
        let c = Corpus::from_scores(MixtureParams::default(), 0, []).unwrap();
        assert!(matches!(
            traffic_ratio(&c, tp(0.1, 0.9), 0.02, 0.01),
            Err(Error::Domain(_))
        ));
        assert!(breakdown_from_counts(&RegionCounts::default(), 0.0, 0.0, Accounting::PerTruth).is_err());
    }

    #[test]
    fn breakdown_from_counts_matches_corpus_route() {
        let c = generate_corpus(&MixtureParams::default().with_n(1000).unwrap(), 17);
        for (h1, h2) in [(0.1, 0.2), (0.1, 0.9), (0.4, 0.6), (0.8, 0.9)] {
            let t = tp(h1, h2);
            let direct = traffic_ratio(&c, t, 0.02, 0.01).unwrap();
            let via = breakdown_from_counts(&partition_corpus(&c, t), 0.02, 0.01, Accounting::PerTruth).unwrap();
            assert_eq!(direct, via);
        }
    }

    #[test]
    fn analytic_examples() {
        let p = MixtureParams::default();
        assert_eq!(analytic_expected_traffic(&p, tp(0.0, 0.0), 0.02, 0.01), 2.0 * 5000.0);

        let uniform = MixtureParams::new(0.0, 1.0, 1.0, 1.0, 1.0, 1000).unwrap();
        let v = analytic_expected_traffic(&uniform, tp(0.2, 0.8), 0.0, 0.0);
        assert_relative_eq!(v, 3.0 * 1000.0, max_relative = 1e-12);
    }

    #[test]
    fn analytic_agrees_with_reference_cell() {
        // default mixture, (0.1, 0.2): reference tabulation reports 10218.8
        let p = MixtureParams::default();
        let v = analytic_expected_traffic(&p, tp(0.1, 0.2), 0.02, 0.01);
        assert!((v / 10218.8 - 1.0).abs() < 0.03, "{v}");
    }

    #[test]
    fn analytic_accuracy_matches_confusion_of_expected_mass() {
        let p = MixtureParams::default();
        let t = tp(0.3, 0.7);
        let n = BandProbabilities::new(p.normal_shape(), t);
        let s = BandProbabilities::new(p.spam_shape(), t);
        let scale = p.n() as f64;
        let mass = RegionMass::from_cells(
            [n.above * p.p() * scale, n.between * p.p() * scale, n.below * p.p() * scale],
            [s.above * p.q() * scale, s.between * p.q() * scale, s.below * p.q() * scale],
        );
        let cm = crate::classifier::expected_confusion_from_mass(&mass, 0.02, 0.01);
        assert_relative_eq!(
            cm.accuracy().unwrap(),
            analytic_accuracy(&p, t, 0.02, 0.01),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            hybrid_from_mass(&mass, 0.02, 0.01, Accounting::PerTruth).n_hybrid,
            analytic_expected_traffic(&p, t, 0.02, 0.01),
            max_relative = 1e-12
        );
    }

    #[test]
    fn analytic_filtering_only_bounds() {
        let p = MixtureParams::default();
        assert_eq!(analytic_filtering_only(&p, 0.0), 10_000.0);
        assert_eq!(analytic_filtering_only(&p, 1.0), 5_000.0);
        assert_relative_eq!(
            analytic_filtering_only(&p, 0.3),
            analytic_expected_traffic(&p, ThresholdPair::collapsed(0.3).unwrap(), 0.02, 0.01),
            max_relative = 1e-12
        );
    }

    proptest! {
        #[test]
        fn terms_sum_and_bounds(
            cells in proptest::array::uniform6(0u64..500),
            e1 in 0.0..=1.0f64,
            e2 in 0.0..=1.0f64,
        ) {
            let counts = RegionCounts::from_cells([cells[0], cells[1], cells[2]], [cells[3], cells[4], cells[5]]);
            let n = counts.total() as f64;
            let t = traffic_hybrid_expected(&counts, e1, e2);
            let sum = t.n_n + t.n_un + t.n_us + t.n_s;
            prop_assert!((t.n_hybrid - sum).abs() <= 1e-9 * sum.max(1.0));
            prop_assert!(t.n_hybrid >= n - 1e-9 && t.n_hybrid <= 4.0 * n + 1e-9);
        }
    }
}
