//! Hop-counting simulation of the hybrid pipeline over sender A, message
//! center B and receiver C.
//!
//! ```text
//! DirectNormal         A → B → C              2 hops
//! ChallengedDelivered  A → B → A → B → C      4 hops
//! ChallengedDropped    A → B → A              2 hops
//! DirectSpam           A → B                  1 hop
//! ```
//!
//! Uncertain messages run the selected challenge protocol for real. Whether
//! the sender solves the CAPTCHA is drawn once per message from its own
//! substream, so results do not depend on evaluation order or thread count.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::challenge::trace::{Harness, Outcome, RECIPIENT};
use crate::challenge::{AbortReason, CenterConfig, Protocol, RejectReason, StoredSubmission};
use crate::classifier::{classify_ternary, ConfusionMatrix, Region, ThresholdPair};
use crate::corpus::{ClassLabel, Corpus, Message, SenderKind};
use crate::Error;
use crate::rng::{mix64, substream, Domain};
use crate::traffic::{HOPS_CHALLENGED_DELIVERED, HOPS_CHALLENGED_DROPPED, HOPS_DIRECT_NORMAL, HOPS_DIRECT_SPAM};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPolicy {
    pub thresholds: ThresholdPair,
    /// Probability a human fails the challenge.
    pub e1: f64,
    /// Probability a bot passes it.
    pub e2: f64,
    pub protocol: Protocol,
    pub seed: u64,
}

impl SimPolicy {
    pub fn new(thresholds: ThresholdPair, e1: f64, e2: f64, protocol: Protocol, seed: u64) -> Result<Self> {
        let p = SimPolicy {
            thresholds,
            e1,
            e2,
            protocol,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e1", self.e1), ("e2", self.e2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Humans pass with probability `1 − e1`, bots with probability `e2`.
pub fn respond<R: Rng + ?Sized>(rng: &mut R, kind: SenderKind, policy: &SimPolicy) -> bool {
    let u: f64 = rng.random();
    match kind {
        SenderKind::Human => u >= policy.e1,
        SenderKind::Bot => u < policy.e2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pathway {
    DirectNormal,
    ChallengedDelivered,
    ChallengedDropped,
    DirectSpam,
}

impl Pathway {
    pub const ALL: [Pathway; 4] = [
        Pathway::DirectNormal,
        Pathway::ChallengedDelivered,
        Pathway::ChallengedDropped,
        Pathway::DirectSpam,
    ];

    pub fn hops(self) -> u32 {
        match self {
            Pathway::DirectNormal => HOPS_DIRECT_NORMAL,
            Pathway::ChallengedDelivered => HOPS_CHALLENGED_DELIVERED,
            Pathway::ChallengedDropped => HOPS_CHALLENGED_DROPPED,
            Pathway::DirectSpam => HOPS_DIRECT_SPAM,
        }
    }

    pub fn delivered(self) -> bool {
        matches!(self, Pathway::DirectNormal | Pathway::ChallengedDelivered)
    }
}

/// Why a challenged message was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "by", content = "reason")]
pub enum DropReason {
    Sender(AbortReason),
    Center(RejectReason),
}

impl DropReason {
    pub fn key(&self) -> String {
        match self {
            DropReason::Sender(r) => format!("abort: {r}"),
            DropReason::Center(r) => format!("reject: {r}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryOutcome {
    pub id: u64,
    pub truth: ClassLabel,
    pub region: Region,
    pub pathway: Pathway,
    pub hops: u32,
    pub delivered: bool,
    /// What C effectively sees: Normal when delivered.
    pub final_label: ClassLabel,
    pub dropped_because: Option<DropReason>,
}

impl DeliveryOutcome {
    fn new(msg: &Message, region: Region, pathway: Pathway, dropped_because: Option<DropReason>) -> Self {
        let delivered = pathway.delivered();
        DeliveryOutcome {
            id: msg.id,
            truth: msg.truth,
            region,
            pathway,
            hops: pathway.hops(),
            delivered,
            final_label: if delivered { ClassLabel::Normal } else { ClassLabel::Spam },
            dropped_because,
        }
    }
}

/// Runs one message with its own substream `(policy.seed, msg.id)`.
pub fn run_message(msg: &Message, policy: &SimPolicy) -> DeliveryOutcome {
    let mut rng = substream(policy.seed, Domain::Simulation, msg.id);
    run_message_with(msg, policy, &mut rng)
}

pub fn run_message_with<R: Rng + ?Sized>(msg: &Message, policy: &SimPolicy, rng: &mut R) -> DeliveryOutcome {
    let region = classify_ternary(msg.kappa, policy.thresholds);
    match region {
        Region::Normal => return DeliveryOutcome::new(msg, region, Pathway::DirectNormal, None),
        Region::Spam => return DeliveryOutcome::new(msg, region, Pathway::DirectSpam, None),
        Region::Uncertain => {}
    }

    let kind = msg.sender_kind();
    let solved = respond(rng, kind, policy);
    let world = mix64(policy.seed ^ mix64(msg.id ^ 0x0051_574e_4554));
    let mut h = Harness::toy(world, CenterConfig::default());
    h.record = false;
    let agent = h.agent(kind);
    let stored = StoredSubmission {
        recipient: RECIPIENT,
        payload: msg.payload.to_vec(),
    };
    let (outcome, _) = h.exchange(policy.protocol, &agent, &stored, solved);
    let (pathway, why) = match outcome {
        Outcome::Delivered { .. } => (Pathway::ChallengedDelivered, None),
        Outcome::Aborted { reason } => (Pathway::ChallengedDropped, Some(DropReason::Sender(reason))),
        Outcome::Rejected { reason } => (Pathway::ChallengedDropped, Some(DropReason::Center(reason))),
        Outcome::Challenged => (Pathway::ChallengedDropped, None),
    };
    debug_assert!(
        why.is_some() || h.hops == pathway.hops(),
        "protocol used {} hops on {pathway:?}",
        h.hops
    );
    DeliveryOutcome::new(msg, region, pathway, why)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct PathwayCounts {
    pub direct_normal: u64,
    pub challenged_delivered: u64,
    pub challenged_dropped: u64,
    pub direct_spam: u64,
}

impl PathwayCounts {
    pub fn get(&self, p: Pathway) -> u64 {
        match p {
            Pathway::DirectNormal => self.direct_normal,
            Pathway::ChallengedDelivered => self.challenged_delivered,
            Pathway::ChallengedDropped => self.challenged_dropped,
            Pathway::DirectSpam => self.direct_spam,
        }
    }

    fn bump(&mut self, p: Pathway) {
        *match p {
            Pathway::DirectNormal => &mut self.direct_normal,
            Pathway::ChallengedDelivered => &mut self.challenged_delivered,
            Pathway::ChallengedDropped => &mut self.challenged_dropped,
            Pathway::DirectSpam => &mut self.direct_spam,
        } += 1;
    }

    pub fn total(&self) -> u64 {
        Pathway::ALL.iter().map(|&p| self.get(p)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: SimPolicy,
    pub seed: u64,
    pub total_hops: u64,
    pub pathway_counts: PathwayCounts,
    pub confusion: ConfusionMatrix,
    pub rejects_by_reason: BTreeMap<String, u64>,
    #[serde(skip)]
    pub outcomes: Vec<DeliveryOutcome>,
}

impl SimReport {
    pub fn delivered_ids(&self) -> Vec<u64> {
        self.outcomes.iter().filter(|o| o.delivered).map(|o| o.id).collect()
    }

    pub fn delivered(&self) -> u64 {
        self.pathway_counts.direct_normal + self.pathway_counts.challenged_delivered
    }
}

/// Runs every message of `corpus` in parallel; the report does not depend
/// on the thread count.
pub fn run_corpus(corpus: &Corpus, policy: &SimPolicy) -> Result<SimReport> {
    policy.validate()?;
    let outcomes: Vec<DeliveryOutcome> = corpus.messages.par_iter().map(|m| run_message(m, policy)).collect();

    let mut report = SimReport {
        policy: *policy,
        seed: policy.seed,
        total_hops: 0,
        pathway_counts: PathwayCounts::default(),
        confusion: ConfusionMatrix::default(),
        rejects_by_reason: BTreeMap::new(),
        outcomes: Vec::new(),
    };
    for o in &outcomes {
        report.total_hops += u64::from(o.hops);
        report.pathway_counts.bump(o.pathway);
        report.confusion.record(o.truth, o.final_label);
        if let Some(why) = o.dropped_because {
            *report.rejects_by_reason.entry(why.key()).or_default() += 1;
        }
    }
    report.outcomes = outcomes;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{partition_corpus, tests::hand_corpus};
    use crate::corpus::{generate_corpus, Kappa, MixtureParams};
    use crate::traffic::{traffic_filtering_only, traffic_hybrid_expected};
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn policy(h1: f64, h2: f64, e1: f64, e2: f64, protocol: Protocol, seed: u64) -> SimPolicy {
        SimPolicy::new(ThresholdPair::new(h1, h2).unwrap(), e1, e2, protocol, seed).unwrap()
    }

    fn message(id: u64, truth: ClassLabel, kappa: f64) -> Message {
        Message {
            id,
            truth,
            kappa: Kappa::new(kappa).unwrap(),
            payload: [7; crate::corpus::PAYLOAD_LEN],
        }
    }

    #[test]
    fn respond_extremes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p0 = policy(0.2, 0.8, 0.0, 0.0, Protocol::P1, 0);
        for _ in 0..10_000 {
            assert!(respond(&mut rng, SenderKind::Human, &p0));
            assert!(!respond(&mut rng, SenderKind::Bot, &p0));
        }
        let p1 = policy(0.2, 0.8, 1.0, 1.0, Protocol::P1, 0);
        for _ in 0..10_000 {
            assert!(!respond(&mut rng, SenderKind::Human, &p1));
            assert!(respond(&mut rng, SenderKind::Bot, &p1));
        }
    }

    #[test]
    fn human_pass_rate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p = policy(0.2, 0.8, 0.02, 0.01, Protocol::P1, 0);
        let n = 100_000;
        let pass = (0..n).filter(|_| respond(&mut rng, SenderKind::Human, &p)).count();
        let rate = pass as f64 / n as f64;
        assert!((rate - 0.98).abs() < 0.003, "{rate}");
    }

    #[test]
    fn pathway_examples() {
        let p = policy(0.2, 0.8, 0.0, 0.0, Protocol::P2, 3);
        let o = run_message(&message(0, ClassLabel::Normal, 0.9), &p);
        assert_eq!((o.pathway, o.hops, o.delivered), (Pathway::DirectNormal, 2, true));
        let o = run_message(&message(1, ClassLabel::Spam, 0.1), &p);
        assert_eq!((o.pathway, o.hops, o.delivered), (Pathway::DirectSpam, 1, false));
        let o = run_message(&message(2, ClassLabel::Normal, 0.5), &p);
        assert_eq!((o.pathway, o.hops, o.delivered), (Pathway::ChallengedDelivered, 4, true));
        let o = run_message(&message(3, ClassLabel::Spam, 0.5), &p);
        assert_eq!((o.pathway, o.hops, o.delivered), (Pathway::ChallengedDropped, 2, false));
        assert_eq!(o.dropped_because, Some(DropReason::Sender(AbortReason::CannotDecode)));
    }

    #[test]
    fn every_protocol_walks_the_same_hops() {
        for protocol in Protocol::ALL {
            for (truth, e) in [(ClassLabel::Normal, 0.0), (ClassLabel::Spam, 1.0)] {
                let msg = message(5, truth, 0.5);
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
                let p = policy(0.2, 0.8, e, e, protocol, 9);
                let region = classify_ternary(msg.kappa, p.thresholds);
                assert_eq!(region, Region::Uncertain);
                let mut h = Harness::toy(1, CenterConfig::default());
                let agent = h.agent(msg.sender_kind());
                let stored = StoredSubmission {
                    recipient: RECIPIENT,
                    payload: msg.payload.to_vec(),
                };
                let solved = respond(&mut rng, msg.sender_kind(), &p);
                h.exchange(protocol, &agent, &stored, solved);
                assert_eq!(h.hops, 4, "{protocol} {truth}");
            }
        }
    }

    #[test]
    fn collapse_matches_filter_only() {
        let c = hand_corpus();
        for h in [0.0, 0.3, 0.5, 0.96, 1.0] {
            let r = run_corpus(&c, &policy(h, h, 0.02, 0.01, Protocol::P1, 5)).unwrap();
            assert_eq!(r.total_hops as f64, traffic_filtering_only(&c, h));
            assert_eq!(r.pathway_counts.challenged_delivered + r.pathway_counts.challenged_dropped, 0);
        }
    }

    #[test]
    fn perfect_responders_deliver_exactly_the_normals_in_the_band() {
        let c = generate_corpus(&MixtureParams::default().with_n(400).unwrap(), 8);
        let p = policy(0.0, 1.0, 0.0, 0.0, Protocol::P4, 8);
        let r = run_corpus(&c, &p).unwrap();
        let expected: Vec<u64> = c
            .messages
            .iter()
            .filter(|m| m.truth == ClassLabel::Normal || m.kappa.value() >= 1.0)
            .map(|m| m.id)
            .collect();
        assert_eq!(r.delivered_ids(), expected);
    }

    #[test]
    fn report_json_shape() {
        let c = hand_corpus();
        let r = run_corpus(&c, &policy(0.2, 0.8, 0.0, 0.0, Protocol::P3, 1)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["policy", "seed", "total_hops", "pathway_counts", "confusion", "rejects_by_reason"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["pathway_counts"].get("ChallengedDelivered").is_some());
    }

    #[test]
    fn invalid_policy_rejected() {
        let t = ThresholdPair::new(0.2, 0.8).unwrap();
        assert!(SimPolicy::new(t, -0.1, 0.0, Protocol::P1, 0).is_err());
        assert!(SimPolicy::new(t, 0.0, 1.5, Protocol::P1, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn report_invariants(seed in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0, proto in 0usize..4) {
            let (h1, h2) = if a <= b { (a, b) } else { (b, a) };
            let c = generate_corpus(&MixtureParams::default().with_n(120).unwrap(), seed);
            let p = policy(h1, h2, 0.3, 0.3, Protocol::ALL[proto], seed);
            let r = run_corpus(&c, &p).unwrap();
            let n = c.len() as u64;
            prop_assert_eq!(r.total_hops, r.outcomes.iter().map(|o| u64::from(o.hops)).sum::<u64>());
            prop_assert!(n <= r.total_hops && r.total_hops <= 4 * n);
            prop_assert_eq!(r.confusion.total(), n as f64);
            prop_assert_eq!(r.pathway_counts.total(), n);
            prop_assert!(r.outcomes.iter().all(|o| [1, 2, 4].contains(&o.hops)));
            let counts = partition_corpus(&c, p.thresholds);
            prop_assert_eq!(
                r.pathway_counts.challenged_delivered + r.pathway_counts.challenged_dropped,
                counts.region_total(Region::Uncertain)
            );
        }

        #[test]
        fn protocol_agnostic(seed in any::<u64>()) {
            let c = generate_corpus(&MixtureParams::default().with_n(150).unwrap(), seed);
            let runs: Vec<_> = Protocol::ALL
                .iter()
                .map(|&pr| run_corpus(&c, &policy(0.2, 0.8, 0.2, 0.2, pr, seed)).unwrap())
                .collect();
            for r in &runs[1..] {
                prop_assert_eq!(r.total_hops, runs[0].total_hops);
                prop_assert_eq!(r.delivered_ids(), runs[0].delivered_ids());
            }
        }
    }

    #[test]
    fn mean_hops_converge_to_expected() {
        let c = generate_corpus(&MixtureParams::default().with_n(1000).unwrap(), 4);
        let t = ThresholdPair::new(0.1, 0.9).unwrap();
        let expected = traffic_hybrid_expected(&partition_corpus(&c, t), 0.3, 0.2).n_hybrid;
        let runs = 40;
        let mean = (0..runs)
            .map(|s| run_corpus(&c, &policy(0.1, 0.9, 0.3, 0.2, Protocol::P1, s)).unwrap().total_hops as f64)
            .sum::<f64>()
            / runs as f64;
        assert!((mean - expected).abs() / expected < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn parallel_equals_sequential() {
        let c = generate_corpus(&MixtureParams::default().with_n(300).unwrap(), 12);
        let p = policy(0.3, 0.7, 0.1, 0.1, Protocol::P2, 12);
        let par = run_corpus(&c, &p).unwrap();
        let seq: Vec<_> = c.messages.iter().map(|m| run_message(m, &p)).collect();
        assert_eq!(par.outcomes, seq);
    }
}
