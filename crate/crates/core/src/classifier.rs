//! Threshold classification and confusion accounting.
//!
//! `Normal` is the positive class throughout: a true positive is a legitimate
//! message that reaches the receiver.

use serde::{Deserialize, Serialize};

use crate::corpus::{ClassLabel, Corpus, Kappa};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Normal,
    Uncertain,
    Spam,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Normal, Region::Uncertain, Region::Spam];

    fn index(self) -> usize {
        match self {
            Region::Normal => 0,
            Region::Uncertain => 1,
            Region::Spam => 2,
        }
    }
}

fn truth_index(label: ClassLabel) -> usize {
    match label {
        ClassLabel::Normal => 0,
        ClassLabel::Spam => 1,
    }
}

/// Lower and upper threshold. Scores in `[h1, h2)` are uncertain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct ThresholdPair {
    h1: f64,
    h2: f64,
}

impl ThresholdPair {
    pub fn new(h1: f64, h2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&h1) || !(0.0..=1.0).contains(&h2) {
            return Err(Error::param(format!(
                "thresholds ({h1}, {h2}) must lie in [0, 1]"
            )));
        }
        if h1 > h2 {
            return Err(Error::param(format!("h1={h1} exceeds h2={h2}")));
        }
        Ok(ThresholdPair { h1, h2 })
    }

    /// `h1 = h2 = h`: no uncertain band.
    pub fn collapsed(h: f64) -> Result<Self> {
        ThresholdPair::new(h, h)
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }
}

impl TryFrom<(f64, f64)> for ThresholdPair {
    type Error = Error;

    fn try_from((h1, h2): (f64, f64)) -> Result<Self> {
        ThresholdPair::new(h1, h2)
    }
}

impl From<ThresholdPair> for (f64, f64) {
    fn from(t: ThresholdPair) -> Self {
        (t.h1, t.h2)
    }
}

/// Single-threshold filter: normal iff `κ ≥ h`.
pub fn classify_binary(kappa: Kappa, h: f64) -> ClassLabel {
    if kappa.value() >= h {
        ClassLabel::Normal
    } else {
        ClassLabel::Spam
    }
}

pub fn classify_ternary(kappa: Kappa, t: ThresholdPair) -> Region {
    let k = kappa.value();
    if k >= t.h2 {
        Region::Normal
    } else if k < t.h1 {
        Region::Spam
    } else {
        Region::Uncertain
    }
}

/// Truth × region tabulation of a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionCounts {
    cells: [[u64; 3]; 2],
}

impl RegionCounts {
    pub fn from_cells(normal: [u64; 3], spam: [u64; 3]) -> Self {
        RegionCounts {
            cells: [normal, spam],
        }
    }

    pub fn get(&self, truth: ClassLabel, region: Region) -> u64 {
        self.cells[truth_index(truth)][region.index()]
    }

    pub fn add(&mut self, truth: ClassLabel, region: Region) {
        self.cells[truth_index(truth)][region.index()] += 1;
    }

    /// Both truths combined.
    pub fn region_total(&self, region: Region) -> u64 {
        self.cells[0][region.index()] + self.cells[1][region.index()]
    }

    pub fn truth_total(&self, truth: ClassLabel) -> u64 {
        self.cells[truth_index(truth)].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn mass(&self) -> RegionMass {
        let f = |row: [u64; 3]| row.map(|c| c as f64);
        RegionMass {
            cells: [f(self.cells[0]), f(self.cells[1])],
        }
    }
}

/// Fractional truth × region masses: either exact counts or expected counts
/// under the mixture model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionMass {
    cells: [[f64; 3]; 2],
}

impl RegionMass {
    pub fn from_cells(normal: [f64; 3], spam: [f64; 3]) -> Self {
        RegionMass {
            cells: [normal, spam],
        }
    }

    pub fn get(&self, truth: ClassLabel, region: Region) -> f64 {
        self.cells[truth_index(truth)][region.index()]
    }

    pub fn region_total(&self, region: Region) -> f64 {
        self.cells[0][region.index()] + self.cells[1][region.index()]
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().flatten().sum()
    }
}

impl From<RegionCounts> for RegionMass {
    fn from(c: RegionCounts) -> Self {
        c.mass()
    }
}

pub fn partition_corpus(corpus: &Corpus, t: ThresholdPair) -> RegionCounts {
    let mut counts = RegionCounts::default();
    for m in &corpus.messages {
        counts.add(m.truth, classify_ternary(m.kappa, t));
    }
    counts
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: f64,
    pub tn: f64,
    pub fp: f64,
    pub fn_: f64,
}

impl ConfusionMatrix {
    pub fn new(tp: f64, tn: f64, fp: f64, fn_: f64) -> Self {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> f64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Tallies one outcome; `predicted` is what the receiver effectively saw.
    pub fn record(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        match (truth, predicted) {
            (ClassLabel::Normal, ClassLabel::Normal) => self.tp += 1.0,
            (ClassLabel::Normal, ClassLabel::Spam) => self.fn_ += 1.0,
            (ClassLabel::Spam, ClassLabel::Spam) => self.tn += 1.0,
            (ClassLabel::Spam, ClassLabel::Normal) => self.fp += 1.0,
        }
    }

    pub fn accuracy(&self) -> Result<f64> {
        accuracy(self)
    }
}

/// Expected confusion of the hybrid scheme: uncertain legitimate senders
/// fail the challenge with probability `e1`, uncertain spammers pass it with
/// probability `e2`.
pub fn expected_confusion_hybrid(counts: &RegionCounts, e1: f64, e2: f64) -> ConfusionMatrix {
    expected_confusion_from_mass(&counts.mass(), e1, e2)
}

pub fn expected_confusion_from_mass(mass: &RegionMass, e1: f64, e2: f64) -> ConfusionMatrix {
    use ClassLabel::{Normal as N, Spam as S};
    let g = |t, r| mass.get(t, r);
    ConfusionMatrix {
        tp: g(N, Region::Normal) + g(N, Region::Uncertain) * (1.0 - e1),
        fn_: g(N, Region::Spam) + g(N, Region::Uncertain) * e1,
        tn: g(S, Region::Spam) + g(S, Region::Uncertain) * (1.0 - e2),
        fp: g(S, Region::Normal) + g(S, Region::Uncertain) * e2,
    }
}

/// Confusion of the filter alone at threshold `h`.
pub fn confusion_filtering(corpus: &Corpus, h: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for m in &corpus.messages {
        cm.record(m.truth, classify_binary(m.kappa, h));
    }
    cm
}

/// `(TP + TN) / (TP + TN + FP + FN)`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total <= 0.0 {
        return Err(Error::domain("accuracy of an empty confusion matrix"));
    }
    Ok((cm.tp + cm.tn) / total)
}
