//! Threshold sweeps and spam-proportion tables.
//!
//! A sweep evaluates every threshold pair `h1 ≤ h2` on a uniform grid over
//! `[0, 1]`, for one or more spam proportions, across a list of seeds, and
//! reduces each cell to mean and sample standard deviation of TA
//! (`N_hybrid`), the filter-only ratio and ACC.
//!
//! Three evaluation modes:
//!
//! - `Analytic`: expectations under the mixture model, one run per cell.
//! - `Empirical`: region counts of a generated corpus per seed.
//! - `MonteCarlo`: full pathway simulation per seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::challenge::Protocol;
use crate::classifier::{expected_confusion_from_mass, Region, RegionCounts, RegionMass, ThresholdPair};
use crate::corpus::{generate_corpus, ClassLabel, Corpus, MixtureParams};
use crate::simnet::{run_corpus, SimPolicy};
use crate::traffic::{
    breakdown_from_counts, hybrid_from_mass, traffic_filtering_only, Accounting, BandProbabilities,
};
use crate::{Error, Result};

pub const DEFAULT_GRID_STEP: f64 = 1.0 / 30.0;
pub const DEFAULT_E1: f64 = 0.02;
pub const DEFAULT_E2: f64 = 0.01;
pub const DEFAULT_RUNS: usize = 50;

/// Threshold pairs of the reference table.
pub const REFERENCE_PAIRS: [(f64, f64); 4] = [(0.1, 0.2), (0.1, 0.9), (0.4, 0.6), (0.8, 0.9)];

/// Spam proportions of the reference table.
pub const REFERENCE_PROPORTIONS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Analytic,
    #[default]
    Empirical,
    MonteCarlo,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "analytic" => Ok(Mode::Analytic),
            "empirical" => Ok(Mode::Empirical),
            "monte-carlo" | "montecarlo" | "mc" => Ok(Mode::MonteCarlo),
            _ => Err(format!("unknown mode {s:?} (expected analytic, empirical or monte-carlo)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub grid_step: f64,
    pub proportions: Vec<f64>,
    pub e1: f64,
    pub e2: f64,
    pub seeds: Vec<u64>,
    pub n: usize,
    pub mode: Mode,
    pub accounting: Accounting,
    /// Only used by `MonteCarlo`.
    pub protocol: Protocol,
    /// Mixture shapes `(α₀, β₀, α₁, β₁)`.
    pub shapes: (f64, f64, f64, f64),
}

impl Default for SweepSpec {
    fn default() -> Self {
        let d = MixtureParams::default();
        SweepSpec {
            grid_step: DEFAULT_GRID_STEP,
            proportions: (1..=9).map(|i| f64::from(i) / 10.0).collect(),
            e1: DEFAULT_E1,
            e2: DEFAULT_E2,
            seeds: consecutive_seeds(0, DEFAULT_RUNS),
            n: d.n(),
            mode: Mode::Empirical,
            accounting: Accounting::PerTruth,
            protocol: Protocol::P1,
            shapes: (d.spam_shape().0, d.spam_shape().1, d.normal_shape().0, d.normal_shape().1),
        }
    }
}

pub fn consecutive_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

impl SweepSpec {
    /// The reference spam-proportion table: five proportions, pooled
    /// uncertain-band accounting.
    pub fn reference_table(base_seed: u64) -> Self {
        SweepSpec {
            proportions: REFERENCE_PROPORTIONS.to_vec(),
            seeds: consecutive_seeds(base_seed, DEFAULT_RUNS),
            accounting: Accounting::Pooled,
            ..SweepSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_points()?;
        for (name, v) in [("e1", self.e1), ("e2", self.e2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("{name}={v} outside [0, 1]")));
            }
        }
        if self.seeds.is_empty() && self.mode != Mode::Analytic {
            return Err(Error::param("at least one seed is required"));
        }
        for &q in &self.proportions {
            self.params(q)?;
        }
        Ok(())
    }

    pub fn params(&self, proportion: f64) -> Result<MixtureParams> {
        let (a0, b0, a1, b1) = self.shapes;
        MixtureParams::new(proportion, a0, b0, a1, b1, self.n)
    }

    /// `{0, step, 2·step, …, 1}`; the step must divide 1.
    pub fn grid_points(&self) -> Result<Vec<f64>> {
        let step = self.grid_step;
        if !(step.is_finite() && step > 0.0 && step <= 1.0) {
            return Err(Error::param(format!("grid step {step} must lie in (0, 1]")));
        }
        let intervals = (1.0 / step).round();
        if ((1.0 / step) - intervals).abs() > 1e-9 * intervals.max(1.0) {
            return Err(Error::param(format!("grid step {step} does not divide [0, 1] evenly")));
        }
        let intervals = intervals as u32;
        Ok((0..=intervals).map(|i| f64::from(i) / f64::from(intervals)).collect())
    }

    /// Every `h1 ≤ h2` on the grid, row-major in `h1`.
    pub fn grid_pairs(&self) -> Result<Vec<ThresholdPair>> {
        let pts = self.grid_points()?;
        let mut out = Vec::with_capacity(pts.len() * (pts.len() + 1) / 2);
        for (i, &h1) in pts.iter().enumerate() {
            for &h2 in &pts[i..] {
                out.push(ThresholdPair::new(h1, h2)?);
            }
        }
        Ok(out)
    }
}

/// One evaluation of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub ta: f64,
    pub baseline: f64,
    pub ratio: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub proportion: f64,
    pub h1: f64,
    pub h2: f64,
    pub ta_mean: f64,
    pub ta_std: f64,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    pub ratio_mean: f64,
    pub ratio_std: f64,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub runs: usize,
}

#[derive(Serialize)]
struct CsvRow {
    proportion: f64,
    h1: f64,
    h2: f64,
    ta_mean: f64,
    ta_std: f64,
    ratio_mean: f64,
    ratio_std: f64,
    acc_mean: f64,
    acc_std: f64,
    runs: usize,
}

/// Mean and sample standard deviation, independent of input order.
fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    (mean, (dev.iter().sum::<f64>() / (n - 1.0)).sqrt())
}

/// Reduces the runs of one cell.
pub fn aggregate(proportion: f64, t: ThresholdPair, runs: &[CellRun]) -> Result<SweepCell> {
    if runs.is_empty() {
        return Err(Error::domain("cannot aggregate zero runs"));
    }
    let (ta_mean, ta_std) = mean_std(runs.iter().map(|r| r.ta));
    let (baseline_mean, baseline_std) = mean_std(runs.iter().map(|r| r.baseline));
    let (ratio_mean, ratio_std) = mean_std(runs.iter().map(|r| r.ratio));
    let (acc_mean, acc_std) = mean_std(runs.iter().map(|r| r.acc));
    Ok(SweepCell {
        proportion,
        h1: t.h1(),
        h2: t.h2(),
        ta_mean,
        ta_std,
        baseline_mean,
        baseline_std,
        ratio_mean,
        ratio_std,
        acc_mean,
        acc_std,
        runs: runs.len(),
    })
}

/// Scores split by truth and sorted, so region counts for any threshold
/// pair are two binary searches per class.
pub struct SortedScores {
    normal: Vec<f64>,
    spam: Vec<f64>,
}

impl SortedScores {
    pub fn new(corpus: &Corpus) -> Self {
        let mut normal = Vec::new();
        let mut spam = Vec::new();
        for m in &corpus.messages {
            match m.truth {
                ClassLabel::Normal => normal.push(m.kappa.value()),
                ClassLabel::Spam => spam.push(m.kappa.value()),
            }
        }
        normal.sort_by(f64::total_cmp);
        spam.sort_by(f64::total_cmp);
        SortedScores { normal, spam }
    }

    fn cells(scores: &[f64], t: ThresholdPair) -> [u64; 3] {
        let below = scores.partition_point(|&k| k < t.h1());
        let below_h2 = scores.partition_point(|&k| k < t.h2());
        [
            (scores.len() - below_h2) as u64,
            (below_h2 - below) as u64,
            below as u64,
        ]
    }

    /// Same result as [`crate::classifier::partition_corpus`].
    pub fn counts(&self, t: ThresholdPair) -> RegionCounts {
        RegionCounts::from_cells(Self::cells(&self.normal, t), Self::cells(&self.spam, t))
    }
}

fn empirical_run(scores: &SortedScores, t: ThresholdPair, spec: &SweepSpec) -> Result<CellRun> {
    let b = breakdown_from_counts(&scores.counts(t), spec.e1, spec.e2, spec.accounting)?;
    Ok(CellRun {
        ta: b.hybrid.n_hybrid,
        baseline: b.n_filtering_only,
        ratio: b.ratio,
        acc: b.confusion.accuracy()?,
    })
}

/// Expected cell under the mixture itself.
pub fn analytic_run(params: &MixtureParams, t: ThresholdPair, e1: f64, e2: f64, accounting: Accounting) -> Result<CellRun> {
    let n = params.n() as f64;
    let band = |label: ClassLabel, weight: f64| {
        let b = BandProbabilities::new(params.shape(label), t);
        [n * weight * b.above, n * weight * b.between, n * weight * b.below]
    };
    let mass = RegionMass::from_cells(band(ClassLabel::Normal, params.p()), band(ClassLabel::Spam, params.q()));
    let hybrid = hybrid_from_mass(&mass, e1, e2, accounting);
    let below = mass.region_total(Region::Spam);
    let baseline = 2.0 * (mass.total() - below) + below;
    Ok(CellRun {
        ta: hybrid.n_hybrid,
        baseline,
        ratio: hybrid.n_hybrid / baseline,
        acc: expected_confusion_from_mass(&mass, e1, e2).accuracy()?,
    })
}

fn monte_carlo_run(corpus: &Corpus, t: ThresholdPair, spec: &SweepSpec, seed: u64) -> Result<CellRun> {
    let policy = SimPolicy::new(t, spec.e1, spec.e2, spec.protocol, seed)?;
    let r = run_corpus(corpus, &policy)?;
    let baseline = traffic_filtering_only(corpus, t.h1());
    let ta = r.total_hops as f64;
    Ok(CellRun {
        ta,
        baseline,
        ratio: ta / baseline,
        acc: r.confusion.accuracy()?,
    })
}

/// Evaluates `pairs` at one proportion, one aggregated cell per pair.
pub fn evaluate_pairs(spec: &SweepSpec, proportion: f64, pairs: &[ThresholdPair]) -> Result<Vec<SweepCell>> {
    spec.validate()?;
    let params = spec.params(proportion)?;
    let per_seed: Vec<Vec<CellRun>> = match spec.mode {
        Mode::Analytic => vec![pairs
            .iter()
            .map(|&t| analytic_run(&params, t, spec.e1, spec.e2, spec.accounting))
            .collect::<Result<_>>()?],
        Mode::Empirical => spec
            .seeds
            .par_iter()
            .map(|&seed| {
                let scores = SortedScores::new(&generate_corpus(&params, seed));
                pairs.iter().map(|&t| empirical_run(&scores, t, spec)).collect()
            })
            .collect::<Result<_>>()?,
        Mode::MonteCarlo => spec
            .seeds
            .par_iter()
            .map(|&seed| {
                let corpus = generate_corpus(&params, seed);
                pairs.iter().map(|&t| monte_carlo_run(&corpus, t, spec, seed)).collect()
            })
            .collect::<Result<_>>()?,
    };
    pairs
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let runs: Vec<CellRun> = per_seed.iter().map(|row| row[i]).collect();
            aggregate(proportion, t, &runs)
        })
        .collect()
}

/// Full grid at one proportion; `T(T+1)/2` cells for `T` grid points.
pub fn sweep_thresholds(spec: &SweepSpec, proportion: f64) -> Result<Vec<SweepCell>> {
    evaluate_pairs(spec, proportion, &spec.grid_pairs()?)
}

/// One row per `(proportion, pair)`, proportions outermost.
pub fn spam_proportion_table(spec: &SweepSpec, pairs: &[ThresholdPair]) -> Result<Vec<SweepCell>> {
    if spec.proportions.is_empty() {
        return Err(Error::param("at least one spam proportion is required"));
    }
    let mut out = Vec::new();
    for &q in &spec.proportions {
        out.extend(evaluate_pairs(spec, q, pairs)?);
    }
    Ok(out)
}

pub fn reference_pairs() -> Vec<ThresholdPair> {
    REFERENCE_PAIRS
        .iter()
        .map(|&(a, b)| ThresholdPair::new(a, b).expect("reference pairs are ordered"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for c in &self.cells {
            w.serialize(CsvRow {
                proportion: c.proportion,
                h1: c.h1,
                h2: c.h2,
                ta_mean: c.ta_mean,
                ta_std: c.ta_std,
                ratio_mean: c.ratio_mean,
                ratio_std: c.ratio_std,
                acc_mean: c.acc_mean,
                acc_std: c.acc_std,
                runs: c.runs,
            })?;
        }
        if self.cells.is_empty() {
            w.write_record([
                "proportion", "h1", "h2", "ta_mean", "ta_std", "ratio_mean", "ratio_std", "acc_mean", "acc_std", "runs",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Writes the CSV to `path` and the spec to the `.json` sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        let path = path.as_ref();
        self.write_csv(BufWriter::new(File::create(path)?))?;
        let sidecar = path.with_extension("json");
        let mut f = BufWriter::new(File::create(&sidecar)?);
        serde_json::to_writer_pretty(&mut f, &self.spec)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(sidecar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::partition_corpus;
    use crate::traffic::analytic_expected_traffic_with;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn small_spec(mode: Mode) -> SweepSpec {
        SweepSpec {
            seeds: consecutive_seeds(3, 4),
            n: 300,
            mode,
            ..SweepSpec::default()
        }
    }

    fn tp(a: f64, b: f64) -> ThresholdPair {
        ThresholdPair::new(a, b).unwrap()
    }

    #[test]
    fn half_step_grid() {
        let spec = SweepSpec {
            grid_step: 0.5,
            ..SweepSpec::default()
        };
        let cells: Vec<(f64, f64)> = spec.grid_pairs().unwrap().into_iter().map(Into::into).collect();
        assert_eq!(
            cells,
            vec![(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        );
    }

    #[test]
    fn default_grid_has_496_cells() {
        let spec = SweepSpec::default();
        assert_eq!(spec.grid_points().unwrap().len(), 31);
        assert_eq!(spec.grid_pairs().unwrap().len(), 496);
    }

    #[test]
    fn bad_steps_rejected() {
        for step in [0.0, -0.1, 0.3, 1.5, f64::NAN] {
            let spec = SweepSpec {
                grid_step: step,
                ..SweepSpec::default()
            };
            assert!(spec.grid_points().is_err(), "{step}");
        }
    }

    #[test]
    fn aggregate_examples() {
        let t = tp(0.1, 0.2);
        let run = |v: f64| CellRun {
            ta: v,
            baseline: v,
            ratio: v,
            acc: v,
        };
        let one = aggregate(0.1, t, &[run(3.0)]).unwrap();
        assert_eq!((one.ta_mean, one.ta_std, one.runs), (3.0, 0.0, 1));
        let two = aggregate(0.1, t, &[run(10.0), run(20.0)]).unwrap();
        assert_eq!(two.ta_mean, 15.0);
        assert_relative_eq!(two.ta_std, 50f64.sqrt(), epsilon = 1e-12);
        assert!(aggregate(0.1, t, &[]).is_err());
    }

    proptest! {
        #[test]
        fn aggregate_is_order_independent(mut v in prop::collection::vec(0.0f64..1e5, 1..30), k in 0usize..30) {
            let t = tp(0.2, 0.4);
            let runs = |v: &[f64]| v.iter().map(|&x| CellRun { ta: x, baseline: x, ratio: x, acc: x }).collect::<Vec<_>>();
            let a = aggregate(0.3, t, &runs(&v)).unwrap();
            let len = v.len();
            v.rotate_left(k % len);
            v.reverse();
            let b = aggregate(0.3, t, &runs(&v)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn sorted_counts_match_partition(seed in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (h1, h2) = if a <= b { (a, b) } else { (b, a) };
            let c = generate_corpus(&MixtureParams::default().with_n(200).unwrap(), seed);
            let t = tp(h1, h2);
            prop_assert_eq!(SortedScores::new(&c).counts(t), partition_corpus(&c, t));
        }
    }

    #[test]
    fn diagonal_ratio_is_one() {
        let spec = SweepSpec {
            grid_step: 0.1,
            ..small_spec(Mode::Empirical)
        };
        for cell in sweep_thresholds(&spec, 0.3).unwrap() {
            if cell.h1 == cell.h2 {
                assert_eq!(cell.ratio_mean, 1.0);
                assert_eq!(cell.ratio_std, 0.0);
            }
        }
    }

    #[test]
    fn analytic_mode_has_zero_std_and_matches_traffic_oracle() {
        let spec = SweepSpec {
            grid_step: 0.25,
            ..small_spec(Mode::Analytic)
        };
        let params = spec.params(0.4).unwrap();
        for cell in sweep_thresholds(&spec, 0.4).unwrap() {
            assert_eq!((cell.runs, cell.ta_std, cell.acc_std), (1, 0.0, 0.0));
            let t = tp(cell.h1, cell.h2);
            let oracle = analytic_expected_traffic_with(&params, t, spec.e1, spec.e2, spec.accounting);
            assert_relative_eq!(cell.ta_mean, oracle, max_relative = 1e-12);
        }
    }

    #[test]
    fn ta_non_increasing_along_h1_slice() {
        let spec = small_spec(Mode::Empirical);
        let pts = spec.grid_points().unwrap();
        let h2 = pts[22];
        let pairs: Vec<_> = pts.iter().filter(|&&h| h <= h2).map(|&h| tp(h, h2)).collect();
        let cells = evaluate_pairs(&spec, 0.1457, &pairs).unwrap();
        for w in cells.windows(2) {
            assert!(w[1].ta_mean <= w[0].ta_mean + 1e-9);
        }
    }

    #[test]
    fn no_spam_perfect_humans() {
        let spec = SweepSpec {
            e1: 0.0,
            ..small_spec(Mode::Empirical)
        };
        let cells = evaluate_pairs(&spec, 0.0, &[tp(0.0, 1.0)]).unwrap();
        assert_eq!(cells[0].acc_mean, 1.0);
        // Everything but κ = 1 is challenged and delivered.
        assert!(cells[0].ta_mean > 4.0 * 300.0 - 1.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let spec = SweepSpec {
            grid_step: 0.2,
            proportions: vec![0.2, 0.5],
            ..small_spec(Mode::Empirical)
        };
        let make = || {
            let mut cells = Vec::new();
            for &q in &spec.proportions {
                cells.extend(sweep_thresholds(&spec, q).unwrap());
            }
            SweepReport {
                spec: spec.clone(),
                cells,
            }
            .csv_string()
            .unwrap()
        };
        let a = make();
        assert_eq!(a, make());
        assert!(a.starts_with("proportion,h1,h2,ta_mean,ta_std,ratio_mean,ratio_std,acc_mean,acc_std,runs\n"));
    }

    #[test]
    fn table_layout() {
        let spec = SweepSpec {
            proportions: REFERENCE_PROPORTIONS.to_vec(),
            ..small_spec(Mode::Analytic)
        };
        let rows = spam_proportion_table(&spec, &reference_pairs()).unwrap();
        assert_eq!(rows.len(), 20);
        assert_eq!((rows[0].proportion, rows[0].h1, rows[0].h2), (0.1, 0.1, 0.2));
        assert_eq!((rows[19].proportion, rows[19].h1, rows[19].h2), (0.5, 0.8, 0.9));
    }

    #[test]
    fn save_writes_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec {
            grid_step: 0.5,
            ..small_spec(Mode::Analytic)
        };
        let report = SweepReport {
            cells: sweep_thresholds(&spec, 0.2).unwrap(),
            spec,
        };
        let sidecar = report.save(dir.path().join("sweep.csv")).unwrap();
        let echoed: SweepSpec = serde_json::from_reader(File::open(sidecar).unwrap()).unwrap();
        assert_eq!(echoed, report.spec);
        let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn monte_carlo_mode_runs() {
        let spec = SweepSpec {
            seeds: consecutive_seeds(0, 2),
            n: 100,
            mode: Mode::MonteCarlo,
            ..SweepSpec::default()
        };
        let cells = evaluate_pairs(&spec, 0.2, &[tp(0.3, 0.3), tp(0.2, 0.8)]).unwrap();
        assert_eq!(cells[0].ratio_mean, 1.0);
        assert!(cells[1].ratio_mean > 1.0);
    }
}
