//! Calibrated Bernoulli membership probability over a box and its Shannon
//! entropy.

use std::cmp::Ordering;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormalizedDistances, Point2};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Base2,
}

impl LogBase {
    /// Entropy of a fair coin in this base.
    pub fn max_entropy(self) -> f64 {
        match self {
            LogBase::Natural => LN_2,
            LogBase::Base2 => 1.0,
        }
    }
}

/// Logistic calibration `p = sigmoid(a - b * d_c + c * d_e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(default)]
    pub log_base: LogBase,
}

impl Default for EntropyParams {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 2.2,
            c: 2.2,
            log_base: LogBase::Natural,
        }
    }
}

impl EntropyParams {
    pub fn validate(&self) -> Result<()> {
        if ![self.a, self.b, self.c].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "entropy parameters must be finite".into(),
            ));
        }
        if self.b < 0.0 || self.c < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "entropy weights b and c must be non-negative, got b={} c={}",
                self.b, self.c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Center-proximal candidate.
    Internal,
    /// Boundary-proximal candidate.
    External,
    /// Produced by the axis-ray construction.
    Ray,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Internal => "internal",
            Origin::External => "external",
            Origin::Ray => "ray",
        }
    }
}

/// A candidate point annotated with its membership probability and entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint {
    pub point: Point2,
    pub p: f64,
    pub entropy: f64,
    pub origin: Origin,
    pub sequence_index: usize,
}

impl ScoredPoint {
    pub fn score(
        point: Point2,
        nd: NormalizedDistances,
        params: &EntropyParams,
        origin: Origin,
        sequence_index: usize,
    ) -> Self {
        let p = membership_probability(nd, params);
        Self {
            point,
            p,
            entropy: shannon_entropy(p, params.log_base),
            origin,
            sequence_index,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn membership_probability(nd: NormalizedDistances, params: &EntropyParams) -> f64 {
    sigmoid(params.a - params.b * nd.d_c_norm + params.c * nd.d_e_norm)
}

/// Binary entropy with the `0 log 0 = 0` convention. Inputs are clamped to
/// `[0, 1]`; NaN propagates.
pub fn shannon_entropy(p: f64, base: LogBase) -> f64 {
    if p.is_nan() {
        return f64::NAN;
    }
    let p = p.clamp(0.0, 1.0);
    let q = 1.0 - p;
    let term = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let h = -(term(p) + term(q));
    // -(0 + 0) is -0.0
    let h = h.max(0.0);
    match base {
        LogBase::Natural => h,
        LogBase::Base2 => h / LN_2,
    }
}

/// Top-`k` by entropy, descending; ties keep ascending `sequence_index`.
pub fn rank_by_entropy(points: &[ScoredPoint], k: usize) -> Result<Vec<ScoredPoint>> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "candidate budget must be at least 1".into(),
        ));
    }
    let mut ranked = points.to_vec();
    ranked.sort_by(compare_by_entropy);
    ranked.truncate(k);
    Ok(ranked)
}

pub(crate) fn compare_by_entropy(x: &ScoredPoint, y: &ScoredPoint) -> Ordering {
    y.entropy
        .total_cmp(&x.entropy)
        .then(x.sequence_index.cmp(&y.sequence_index))
}
