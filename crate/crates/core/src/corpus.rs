//! Synthetic message corpora.
//!
//! Each message gets a ground-truth class `c ~ Bernoulli(p)` and a filter
//! score `κ ~ Beta(α₁, β₁)` for normal messages or `κ ~ Beta(α₀, β₀)` for
//! spam. The score stands in for the output of a real content filter; no
//! message text is ever produced.
//!
//! Beta variates use the two-gamma construction `X / (X + Y)` with
//! `X ~ Γ(α, 1)`, `Y ~ Γ(β, 1)`. Gamma variates come from `rand_distr::Gamma`
//! (Marsaglia–Tsang squeeze, with the `α < 1` boost), driven by the per-message
//! ChaCha8 substream from [`crate::rng`].

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::rng::{self, Domain};
use crate::{Error, Result};

pub const DEFAULT_SPAM_PROPORTION: f64 = 0.1457;
pub const DEFAULT_N: usize = 5000;
pub const DEFAULT_SPAM_ALPHA: f64 = 3.0;
pub const DEFAULT_SPAM_BETA: f64 = 5.0;
pub const DEFAULT_NORMAL_ALPHA: f64 = 5.0;
pub const DEFAULT_NORMAL_BETA: f64 = 2.0;

pub const PAYLOAD_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Normal,
    Spam,
}

impl ClassLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Normal => "normal",
            ClassLabel::Spam => "spam",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(ClassLabel::Normal),
            "spam" => Ok(ClassLabel::Spam),
            other => Err(Error::param(format!("unknown class label {other:?}"))),
        }
    }
}

/// Who is behind a message: legitimate senders are people, spam comes from
/// programs. Only matters when a message is challenged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenderKind {
    Human,
    Bot,
}

/// Filter posterior `Pr(normal | message)`, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Kappa(f64);

impl Kappa {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Kappa(value))
        } else {
            Err(Error::param(format!("kappa {value} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Kappa {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Kappa::new(value)
    }
}

impl From<Kappa> for f64 {
    fn from(k: Kappa) -> f64 {
        k.0
    }
}

/// Mixture hyper-parameters.
///
/// The spam proportion `q` is the stored quantity; `p` is always `1 - q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixtureParams")]
pub struct MixtureParams {
    p: f64,
    q: f64,
    alpha0: f64,
    beta0: f64,
    alpha1: f64,
    beta1: f64,
    n: usize,
}

#[derive(Deserialize)]
struct RawMixtureParams {
    q: f64,
    alpha0: f64,
    beta0: f64,
    alpha1: f64,
    beta1: f64,
    n: usize,
}

impl TryFrom<RawMixtureParams> for MixtureParams {
    type Error = Error;

    fn try_from(raw: RawMixtureParams) -> Result<Self> {
        // A corpus loaded from an empty file legitimately has n = 0.
        let params = MixtureParams::new(
            raw.q,
            raw.alpha0,
            raw.beta0,
            raw.alpha1,
            raw.beta1,
            raw.n.max(1),
        )?;
        Ok(MixtureParams { n: raw.n, ..params })
    }
}

impl Default for MixtureParams {
    fn default() -> Self {
        MixtureParams::new(
            DEFAULT_SPAM_PROPORTION,
            DEFAULT_SPAM_ALPHA,
            DEFAULT_SPAM_BETA,
            DEFAULT_NORMAL_ALPHA,
            DEFAULT_NORMAL_BETA,
            DEFAULT_N,
        )
        .expect("default mixture parameters are valid")
    }
}

impl MixtureParams {
    /// `q` is the spam proportion; `(alpha0, beta0)` shape the spam scores and
    /// `(alpha1, beta1)` the normal scores.
    pub fn new(
        q: f64,
        alpha0: f64,
        beta0: f64,
        alpha1: f64,
        beta1: f64,
        n: usize,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param(format!(
                "spam proportion q={q} outside [0, 1]"
            )));
        }
        for (name, v) in [
            ("alpha0", alpha0),
            ("beta0", beta0),
            ("alpha1", alpha1),
            ("beta1", beta1),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name}={v} must be positive")));
            }
        }
        if n == 0 {
            return Err(Error::param("corpus size n must be at least 1"));
        }
        Ok(MixtureParams {
            p: 1.0 - q,
            q,
            alpha0,
            beta0,
            alpha1,
            beta1,
            n,
        })
    }

    pub fn with_spam_proportion(self, q: f64) -> Result<Self> {
        MixtureParams::new(q, self.alpha0, self.beta0, self.alpha1, self.beta1, self.n)
    }

    pub fn with_n(self, n: usize) -> Result<Self> {
        MixtureParams::new(self.q, self.alpha0, self.beta0, self.alpha1, self.beta1, n)
    }

    pub fn with_spam_shape(self, alpha0: f64, beta0: f64) -> Result<Self> {
        MixtureParams::new(self.q, alpha0, beta0, self.alpha1, self.beta1, self.n)
    }

    pub fn with_normal_shape(self, alpha1: f64, beta1: f64) -> Result<Self> {
        MixtureParams::new(self.q, self.alpha0, self.beta0, alpha1, beta1, self.n)
    }

    /// Normal proportion.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Spam proportion.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `(α₀, β₀)`.
    pub fn spam_shape(&self) -> (f64, f64) {
        (self.alpha0, self.beta0)
    }

    /// `(α₁, β₁)`.
    pub fn normal_shape(&self) -> (f64, f64) {
        (self.alpha1, self.beta1)
    }

    pub fn shape(&self, label: ClassLabel) -> (f64, f64) {
        match label {
            ClassLabel::Normal => self.normal_shape(),
            ClassLabel::Spam => self.spam_shape(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: u64,
    pub truth: ClassLabel,
    pub kappa: Kappa,
    /// Opaque synthetic content. Only the protocol layer hashes it.
    pub payload: [u8; PAYLOAD_LEN],
}

impl Message {
    pub fn sender_kind(&self) -> SenderKind {
        match self.truth {
            ClassLabel::Normal => SenderKind::Human,
            ClassLabel::Spam => SenderKind::Bot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub params: MixtureParams,
    pub seed: u64,
    pub messages: Vec<Message>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.messages.iter().filter(|m| m.truth == label).count()
    }

    pub fn metadata(&self) -> CorpusMetadata {
        CorpusMetadata {
            params: self.params,
            seed: self.seed,
            rng_algorithm: rng::RNG_ALGORITHM.to_string(),
        }
    }

    /// Build a corpus from explicit `(truth, κ)` pairs, assigning dense ids in
    /// order. Payloads are derived from `seed` exactly as in generation.
    pub fn from_scores(
        params: MixtureParams,
        seed: u64,
        scores: impl IntoIterator<Item = (ClassLabel, f64)>,
    ) -> Result<Self> {
        let messages = scores
            .into_iter()
            .enumerate()
            .map(|(i, (truth, k))| {
                Ok(Message {
                    id: i as u64,
                    truth,
                    kappa: Kappa::new(k)?,
                    payload: payload_for(seed, i as u64),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = MixtureParams {
            n: messages.len(),
            ..params
        };
        Ok(Corpus {
            params,
            seed,
            messages,
        })
    }

    /// Writes `path` (CSV) and its JSON sidecar (see [`metadata_path`]).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path)?);
        write_corpus(self, &mut w)?;
        w.flush()?;
        let meta = BufWriter::new(File::create(metadata_path(path))?);
        serde_json::to_writer_pretty(meta, &self.metadata())?;
        Ok(())
    }

    /// Reads `path` and, when present, its JSON sidecar.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = BufReader::new(File::open(path)?);
        let meta_path = metadata_path(path);
        if meta_path.exists() {
            let meta: CorpusMetadata = serde_json::from_reader(BufReader::new(File::open(meta_path)?))?;
            read_corpus_with_metadata(file, &meta)
        } else {
            read_corpus(file)
        }
    }
}

/// Sidecar document describing how a corpus file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetadata {
    pub params: MixtureParams,
    pub seed: u64,
    pub rng_algorithm: String,
}

/// `corpus.csv` → `corpus.meta.json`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// One Bernoulli draw: spam with probability `q`. Consumes exactly one `u64`.
pub fn sample_class<R: RngCore + ?Sized>(rng: &mut R, params: &MixtureParams) -> ClassLabel {
    let u: f64 = rng.random();
    if u < params.q() {
        ClassLabel::Spam
    } else {
        ClassLabel::Normal
    }
}

pub fn sample_kappa<R: RngCore + ?Sized>(
    rng: &mut R,
    label: ClassLabel,
    params: &MixtureParams,
) -> Kappa {
    let (a, b) = params.shape(label);
    Kappa(sample_beta(rng, a, b))
}

fn sample_beta<R: RngCore + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let ga = Gamma::new(a, 1.0).expect("shape validated at construction");
    let gb = Gamma::new(b, 1.0).expect("shape validated at construction");
    loop {
        let x = ga.sample(rng);
        let y = gb.sample(rng);
        let s = x + y;
        // Both variates can underflow to zero for tiny shapes; redraw.
        if s > 0.0 && s.is_finite() {
            return (x / s).clamp(0.0, 1.0);
        }
    }
}

fn payload_for(seed: u64, id: u64) -> [u8; PAYLOAD_LEN] {
    let mut payload = [0u8; PAYLOAD_LEN];
    rng::substream(seed, Domain::CorpusPayload, id).fill_bytes(&mut payload);
    payload
}

/// Message `i` depends only on `(seed, i)`.
pub fn generate_message(params: &MixtureParams, seed: u64, id: u64) -> Message {
    let mut rng = rng::substream(seed, Domain::CorpusMessage, id);
    let truth = sample_class(&mut rng, params);
    let kappa = sample_kappa(&mut rng, truth, params);
    Message {
        id,
        truth,
        kappa,
        payload: payload_for(seed, id),
    }
}

pub fn generate_corpus(params: &MixtureParams, seed: u64) -> Corpus {
    let messages = (0..params.n() as u64)
        .map(|id| generate_message(params, seed, id))
        .collect();
    Corpus {
        params: *params,
        seed,
        messages,
    }
}

const HEADER: [&str; 3] = ["id", "truth", "kappa"];

/// At least nine significant digits and an exact round trip.
fn format_kappa(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') {
        s.push('.');
    }
    let significant = s
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count();
    let significant = if v == 0.0 { 1 } else { significant };
    for _ in significant..9 {
        s.push('0');
    }
    s
}

/// Writes the `id,truth,kappa` CSV body. Metadata goes to a separate sidecar.
pub fn write_corpus<W: Write>(corpus: &Corpus, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(HEADER)?;
    for m in &corpus.messages {
        w.write_record([
            m.id.to_string(),
            m.truth.as_str().to_string(),
            format_kappa(m.kappa.value()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a corpus CSV without a sidecar: parameters default to the standard
/// mixture with `n` set to the row count, and the seed to 0.
pub fn read_corpus<R: Read>(source: R) -> Result<Corpus> {
    let messages = parse_rows(source, 0)?;
    let params = MixtureParams {
        n: messages.len(),
        ..MixtureParams::default()
    };
    Ok(Corpus {
        params,
        seed: 0,
        messages,
    })
}

pub fn read_corpus_with_metadata<R: Read>(source: R, meta: &CorpusMetadata) -> Result<Corpus> {
    let messages = parse_rows(source, meta.seed)?;
    if meta.params.n() != messages.len() {
        return Err(Error::Metadata(format!(
            "sidecar declares n={} but the file has {} rows",
            meta.params.n(),
            messages.len()
        )));
    }
    Ok(Corpus {
        params: meta.params,
        seed: meta.seed,
        messages,
    })
}

fn parse_rows<R: Read>(source: R, seed: u64) -> Result<Vec<Message>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();

    match records.next() {
        Some(Ok(rec)) if rec.iter().eq(HEADER) => {}
        Some(Ok(_)) => return Err(Error::parse(1, "malformed header, expected id,truth,kappa")),
        Some(Err(e)) => return Err(Error::parse(1, format!("malformed header: {e}"))),
        None => return Err(Error::parse(1, "missing header")),
    }

    let mut messages = Vec::new();
    let mut seen = HashSet::new();
    let mut lines = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::parse(line, format!("expected 3 fields, found {}", rec.len())));
        }
        let id: u64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("non-numeric id {:?}", &rec[0])))?;
        let truth: ClassLabel = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("unknown truth label {:?}", &rec[1])))?;
        let raw: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("non-numeric kappa {:?}", &rec[2])))?;
        let kappa = Kappa::new(raw).map_err(|_| Error::parse(line, "kappa out of range"))?;
        if !seen.insert(id) {
            return Err(Error::parse(line, format!("duplicate id {id}")));
        }
        messages.push(Message {
            id,
            truth,
            kappa,
            payload: payload_for(seed, id),
        });
        lines.push(line);
    }

    let n = messages.len() as u64;
    if let Some(pos) = messages.iter().position(|m| m.id >= n) {
        return Err(Error::parse(
            lines[pos],
            format!("id {} outside dense range 0..{n}", messages[pos].id),
        ));
    }
    messages.sort_by_key(|m| m.id);
    Ok(messages)
}
