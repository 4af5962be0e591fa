//! Point-membership verification: marker specs, yes/no probability
//! aggregation, oracles and the early-stopping query loop.

mod mask;
mod remote;

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{compare_by_entropy, Origin, ScoredPoint};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::sampler::CandidateSet;

pub use mask::{mask_oracle, MaskOracle};
pub use remote::{
    parse_vqa_response, render_prompt, RemoteVqaClient, PROMPT_TEMPLATE, VQA_PATH, VQA_URL_ENV,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerShape {
    Star,
    Circle,
    Hexagon,
}

impl MarkerShape {
    pub fn name(self) -> &'static str {
        match self {
            MarkerShape::Star => "star",
            MarkerShape::Circle => "circle",
            MarkerShape::Hexagon => "hexagon",
        }
    }
}

impl FromStr for MarkerShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "star" => Ok(MarkerShape::Star),
            "circle" => Ok(MarkerShape::Circle),
            "hexagon" => Ok(MarkerShape::Hexagon),
            other => Err(Error::InvalidParameter(format!(
                "unknown marker shape {other:?}"
            ))),
        }
    }
}

pub const PALETTE: [&str; 8] = [
    "red", "green", "blue", "yellow", "orange", "purple", "cyan", "magenta",
];
pub const MARKER_SIZE_RANGE: (u32, u32) = (6, 24);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerSpec {
    pub shape: MarkerShape,
    pub color: String,
    pub size_px: u32,
}

impl MarkerSpec {
    pub fn new(shape: MarkerShape, color: &str, size_px: u32) -> Result<Self> {
        let spec = Self {
            shape,
            color: color.to_owned(),
            size_px,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !PALETTE.contains(&self.color.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "marker color {:?} not in palette",
                self.color
            )));
        }
        let (lo, hi) = MARKER_SIZE_RANGE;
        if !(lo..=hi).contains(&self.size_px) {
            return Err(Error::InvalidParameter(format!(
                "marker size {} px outside [{lo}, {hi}]",
                self.size_px
            )));
        }
        Ok(())
    }
}

/// How markers are drawn for each query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarkerSettings {
    pub shapes: Vec<MarkerShape>,
    pub size_px: u32,
}

impl Default for MarkerSettings {
    fn default() -> Self {
        Self {
            shapes: vec![MarkerShape::Star],
            size_px: 16,
        }
    }
}

impl MarkerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one marker shape is required".into(),
            ));
        }
        MarkerSpec::new(self.shapes[0], PALETTE[0], self.size_px).map(|_| ())
    }
}

/// Hands out palette colors without repetition until the palette is used up,
/// then starts over with a fresh shuffle.
#[derive(Debug, Clone)]
pub struct MarkerDeck {
    settings: MarkerSettings,
    remaining: Vec<&'static str>,
}

impl MarkerDeck {
    pub fn new(settings: MarkerSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            settings,
            remaining: Vec::new(),
        })
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> MarkerSpec {
        if self.remaining.is_empty() {
            self.remaining = PALETTE.to_vec();
            self.remaining.shuffle(rng);
        }
        let color = self.remaining.pop().expect("palette is non-empty");
        let shape = *self
            .settings
            .shapes
            .choose(rng)
            .expect("validated non-empty");
        MarkerSpec {
            shape,
            color: color.to_owned(),
            size_px: self.settings.size_px,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleQuery {
    pub image_ref: String,
    pub expression: String,
    pub point: Point2,
    pub marker: MarkerSpec,
    pub top_k: usize,
}

impl OracleQuery {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        if !self.point.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "query point ({}, {}) is not finite",
                self.point.x, self.point.y
            )));
        }
        self.marker.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProb {
    pub text: String,
    pub prob: f64,
}

impl TokenProb {
    pub fn new(text: impl Into<String>, prob: f64) -> Self {
        Self {
            text: text.into(),
            prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub confidence: f64,
    pub p_yes: f64,
    pub p_no: f64,
    pub raw_tokens: Vec<TokenProb>,
}

impl Verdict {
    /// Aggregates yes/no mass and takes the argmax; a tie is negative.
    pub fn from_tokens(tokens: Vec<TokenProb>) -> Result<Self> {
        let (p_yes, p_no) = aggregate_token_probabilities(&tokens)?;
        let label = if p_yes > p_no {
            Label::Positive
        } else {
            Label::Negative
        };
        Ok(Self {
            label,
            confidence: p_yes.max(p_no),
            p_yes,
            p_no,
            raw_tokens: tokens,
        })
    }

    pub fn is_positive(&self) -> bool {
        self.label == Label::Positive
    }
}

const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Sums the probability of tokens reading "yes" and "no" after trimming and
/// lowercasing. Other tokens are ignored.
pub fn aggregate_token_probabilities(tokens: &[TokenProb]) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let (mut p_yes, mut p_no) = (0.0, 0.0);
    for t in tokens {
        if !(0.0..=1.0).contains(&t.prob) {
            return Err(Error::Protocol(format!(
                "token {:?} has probability {}",
                t.text, t.prob
            )));
        }
        total += t.prob;
        match t.text.trim().to_lowercase().as_str() {
            "yes" => p_yes += t.prob,
            "no" => p_no += t.prob,
            _ => {}
        }
    }
    if total > 1.0 + PROB_SUM_TOLERANCE {
        return Err(Error::Protocol(format!(
            "token probabilities sum to {total}"
        )));
    }
    Ok((p_yes, p_no))
}

/// A membership oracle answering one query at a time.
pub trait Oracle {
    fn query(&mut self, query: &OracleQuery) -> Result<Verdict>;
}

/// An oracle that may be called from several threads at once.
pub trait SharedOracle: Sync {
    fn query_shared(&self, query: &OracleQuery) -> Result<Verdict>;
}

impl<S: SharedOracle + ?Sized> Oracle for &S {
    fn query(&mut self, query: &OracleQuery) -> Result<Verdict> {
        self.query_shared(query)
    }
}

/// Makes any [`Oracle`] shareable by serializing calls through a mutex.
#[derive(Debug)]
pub struct Serialized<O>(Mutex<O>);

impl<O> Serialized<O> {
    pub fn new(oracle: O) -> Self {
        Self(Mutex::new(oracle))
    }

    pub fn into_inner(self) -> O {
        self.0.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

impl<O: Oracle + Send> SharedOracle for Serialized<O> {
    fn query_shared(&self, query: &OracleQuery) -> Result<Verdict> {
        let mut guard = self.0.lock().unwrap_or_else(|e| e.into_inner());
        guard.query(query)
    }
}

/// Adapts a closure into an [`Oracle`].
pub struct FnOracle<F>(pub F);

impl<F: FnMut(&OracleQuery) -> Result<Verdict>> Oracle for FnOracle<F> {
    fn query(&mut self, query: &OracleQuery) -> Result<Verdict> {
        (self.0)(query)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOrder {
    /// External, internal, external, ...; a drained queue yields to the other.
    #[default]
    Alternate,
    ExternalFirst,
    InternalFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EarlyStopPolicy {
    pub pos_target: usize,
    pub neg_target: usize,
    pub eta: f64,
    /// `None` means one query per candidate.
    pub max_queries: Option<usize>,
    pub order: QueryOrder,
}

impl Default for EarlyStopPolicy {
    fn default() -> Self {
        Self {
            pos_target: 2,
            neg_target: 1,
            eta: 0.6,
            max_queries: None,
            order: QueryOrder::Alternate,
        }
    }
}

impl EarlyStopPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.pos_target == 0 && self.neg_target == 0 {
            return Err(Error::InvalidParameter(
                "positive and negative targets cannot both be zero".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if self.max_queries == Some(0) {
            return Err(Error::InvalidParameter(
                "max_queries must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn retains(&self, verdict_confidence: f64) -> bool {
        verdict_confidence > self.eta
    }
}

/// Per-run query fields that do not depend on the candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryContext {
    pub image_ref: String,
    pub expression: String,
    pub top_k: usize,
    pub markers: MarkerSettings,
}

impl QueryContext {
    pub fn new(image_ref: impl Into<String>, expression: impl Into<String>) -> Self {
        Self {
            image_ref: image_ref.into(),
            expression: expression.into(),
            top_k: 5,
            markers: MarkerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub point: Point2,
    pub p: f64,
    pub entropy: f64,
    pub origin: Origin,
    pub verdict_label: Label,
    pub confidence: f64,
    pub query_index: usize,
}

/// Queries issued so far and the verdicts that cleared the threshold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationOutcome {
    pub accepted: Vec<(ScoredPoint, Verdict)>,
    pub trace: Vec<TraceEntry>,
}

/// What a run that ran out of budget had gathered.
pub type PartialVerification = VerificationOutcome;

impl VerificationOutcome {
    pub fn positives(&self) -> impl Iterator<Item = &(ScoredPoint, Verdict)> {
        self.accepted
            .iter()
            .filter(|(_, v)| v.label == Label::Positive)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &(ScoredPoint, Verdict)> {
        self.accepted
            .iter()
            .filter(|(_, v)| v.label == Label::Negative)
    }

    fn targets_met(&self, policy: &EarlyStopPolicy) -> bool {
        self.positives().count() >= policy.pos_target
            && self.negatives().count() >= policy.neg_target
    }
}

/// Candidates in the order they will be queried.
pub fn query_order(candidates: &CandidateSet, order: QueryOrder) -> Vec<ScoredPoint> {
    let mut ext = candidates.external.clone();
    let mut int = candidates.internal.clone();
    ext.sort_by(compare_by_entropy);
    int.sort_by(compare_by_entropy);
    match order {
        QueryOrder::ExternalFirst => ext.into_iter().chain(int).collect(),
        QueryOrder::InternalFirst => int.into_iter().chain(ext).collect(),
        QueryOrder::Alternate => {
            let mut out = Vec::with_capacity(ext.len() + int.len());
            let (mut e, mut i) = (ext.into_iter(), int.into_iter());
            loop {
                match (e.next(), i.next()) {
                    (None, None) => break,
                    (a, b) => out.extend(a.into_iter().chain(b)),
                }
            }
            out
        }
    }
}

/// Queries candidates one by one until the policy's targets are met.
///
/// Fails with [`Error::InsufficientEvidence`] carrying the partial outcome
/// when the budget or the candidates run out first. Oracle failures are
/// returned as is.
pub fn run_verification_loop<O: Oracle + ?Sized, R: Rng + ?Sized>(
    candidates: &CandidateSet,
    oracle: &mut O,
    policy: &EarlyStopPolicy,
    context: &QueryContext,
    rng: &mut R,
) -> Result<VerificationOutcome> {
    policy.validate()?;
    if candidates.is_empty() {
        return Err(Error::InsufficientData("no candidates to verify".into()));
    }
    let max_queries = policy.max_queries.unwrap_or(candidates.len());
    let mut deck = MarkerDeck::new(context.markers.clone())?;
    let mut outcome = VerificationOutcome::default();

    for (query_index, cand) in query_order(candidates, policy.order)
        .into_iter()
        .take(max_queries)
        .enumerate()
    {
        let query = OracleQuery {
            image_ref: context.image_ref.clone(),
            expression: context.expression.clone(),
            point: cand.point,
            marker: deck.draw(rng),
            top_k: context.top_k,
        };
        query.validate()?;
        let verdict = oracle.query(&query)?;
        outcome.trace.push(TraceEntry {
            point: cand.point,
            p: cand.p,
            entropy: cand.entropy,
            origin: cand.origin,
            verdict_label: verdict.label,
            confidence: verdict.confidence,
            query_index,
        });
        if policy.retains(verdict.confidence) {
            outcome.accepted.push((cand, verdict));
            if outcome.targets_met(policy) {
                return Ok(outcome);
            }
        }
    }
    Err(Error::InsufficientEvidence(Box::new(outcome)))
}

/// Queries every candidate in order without stopping early. Because the
/// oracle sees the same queries in the same order, an early-stopping run is a
/// prefix of this sweep.
pub fn sweep_candidates<O: Oracle + ?Sized, R: Rng + ?Sized>(
    candidates: &CandidateSet,
    oracle: &mut O,
    order: QueryOrder,
    context: &QueryContext,
    rng: &mut R,
) -> Result<Vec<(ScoredPoint, TraceEntry)>> {
    let mut deck = MarkerDeck::new(context.markers.clone())?;
    query_order(candidates, order)
        .into_iter()
        .enumerate()
        .map(|(query_index, cand)| {
            let query = OracleQuery {
                image_ref: context.image_ref.clone(),
                expression: context.expression.clone(),
                point: cand.point,
                marker: deck.draw(rng),
                top_k: context.top_k,
            };
            query.validate()?;
            let verdict = oracle.query(&query)?;
            Ok((
                cand,
                TraceEntry {
                    point: cand.point,
                    p: cand.p,
                    entropy: cand.entropy,
                    origin: cand.origin,
                    verdict_label: verdict.label,
                    confidence: verdict.confidence,
                    query_index,
                },
            ))
        })
        .collect()
}

/// Number of queries an early-stopping run would issue on this verdict
/// stream, or `None` if it would run out of budget.
pub fn halting_length(trace: &[TraceEntry], policy: &EarlyStopPolicy) -> Option<usize> {
    let budget = policy.max_queries.unwrap_or(trace.len()).min(trace.len());
    let (mut pos, mut neg) = (0, 0);
    for (i, t) in trace[..budget].iter().enumerate() {
        if policy.retains(t.confidence) {
            match t.verdict_label {
                Label::Positive => pos += 1,
                Label::Negative => neg += 1,
            }
            if pos >= policy.pos_target && neg >= policy.neg_target {
                return Some(i + 1);
            }
        }
    }
    None
}

/// Positive and negative points an early-stopping run would emit, if it
/// reaches its targets.
pub fn emitted_points(
    trace: &[TraceEntry],
    policy: &EarlyStopPolicy,
) -> Option<(Vec<Point2>, Vec<Point2>)> {
    let n = halting_length(trace, policy)?;
    let retained = || trace[..n].iter().filter(|t| policy.retains(t.confidence));
    let pick = |label, k| {
        retained()
            .filter(|t| t.verdict_label == label)
            .take(k)
            .map(|t| t.point)
            .collect()
    };
    Some((
        pick(Label::Positive, policy.pos_target),
        pick(Label::Negative, policy.neg_target),
    ))
}
