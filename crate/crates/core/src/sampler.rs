//! Adaptive arc-length sampling along a spiral and separation of the samples
//! into boundary-proximal (external) and center-proximal (internal) sets.
//!
//! Step lengths are `beta * k_i` where `beta` is the larger box extent and
//! `k_i` is a per-vertex coefficient derived from the normalized radial growth
//! rate. Two alternative candidate generators live here as well: the
//! axis-ray construction and uniform random points (the benchmark baseline).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{EntropyParams, Origin, ScoredPoint};
use crate::error::{Error, Result};
use crate::geometry::{normalized_distances, BBox, NormalizedDistances, Point2};
use crate::spiral::{RadialProfile, SpiralPath};

/// How normalized growth maps onto the step coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMapping {
    /// `k = k_max` at zero growth, `k_min` at maximal growth: fast radial
    /// growth gets short steps and therefore dense samples.
    #[default]
    Inverse,
    /// `k = k_min + (k_max - k_min) * g_norm`.
    Literal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Spiral,
    Ray,
    Random,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Spiral => "spiral",
            Strategy::Ray => "ray",
            Strategy::Random => "random",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spiral" => Ok(Strategy::Spiral),
            "ray" => Ok(Strategy::Ray),
            "random" => Ok(Strategy::Random),
            other => Err(Error::InvalidParameter(format!(
                "unknown strategy {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub epsilon: f64,
    pub budget_k: usize,
    pub density_mapping: DensityMapping,
    pub seed: u64,
    #[serde(default)]
    pub strategy: Strategy,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            k_min: 0.5,
            k_max: 1.5,
            epsilon: 0.2,
            budget_k: 4,
            density_mapping: DensityMapping::Inverse,
            seed: 0,
            strategy: Strategy::Spiral,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_min > 0.0 && self.k_min <= self.k_max && self.k_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < k_min <= k_max, got [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "perturbation factor must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if self.budget_k == 0 {
            return Err(Error::InvalidParameter(
                "candidate budget must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One recorded sampling step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub arc_position: f64,
    pub step_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub external: Vec<ScoredPoint>,
    pub internal: Vec<ScoredPoint>,
    pub sample_trace: Vec<TraceStep>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.external.len() + self.internal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &ScoredPoint> {
        self.external.iter().chain(self.internal.iter())
    }
}

/// A sample placed on the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub point: Point2,
    /// Perturbed, clamped arc position the point was interpolated at.
    pub arc_position: f64,
    /// Arc position before perturbation.
    pub nominal_arc: f64,
    /// Coefficient that produced the step leaving `nominal_arc`.
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSamples {
    /// Ordered by `arc_position`, ascending.
    pub samples: Vec<Sample>,
    /// Base step actually used (halved on each retry).
    pub beta: f64,
    pub bias: f64,
    pub retries: u32,
}

const MAX_RETRIES: u32 = 3;

/// Maps the normalized growth profile onto step coefficients in
/// `[k_min, k_max]`.
pub fn dynamic_coefficients(profile: &RadialProfile, config: &SamplerConfig) -> Vec<f64> {
    profile
        .g_norm
        .iter()
        .map(|&g| {
            let g = g.clamp(0.0, 1.0);
            let w = match config.density_mapping {
                DensityMapping::Literal => g,
                DensityMapping::Inverse => 1.0 - g,
            };
            lerp_exact(config.k_min, config.k_max, w).clamp(config.k_min, config.k_max)
        })
        .collect()
}

/// Linear interpolation that returns `lo` at `w = 0` and `hi` at `w = 1`
/// without rounding drift.
fn lerp_exact(lo: f64, hi: f64, w: f64) -> f64 {
    lo * (1.0 - w) + hi * w
}

/// Index of the path vertex whose arc position is closest to `s`; ties go to
/// the lower index.
pub fn nearest_arc_index(cumulative: &[f64], s: f64) -> usize {
    let pos = cumulative.partition_point(|&v| v < s);
    if pos == 0 {
        return 0;
    }
    if pos >= cumulative.len() {
        return cumulative.len() - 1;
    }
    if s - cumulative[pos - 1] <= cumulative[pos] - s {
        pos - 1
    } else {
        pos
    }
}

/// Point at arc position `s`, linearly interpolated between the bracketing
/// vertices.
pub fn interpolate_at(points: &[Point2], cumulative: &[f64], s: f64) -> Point2 {
    debug_assert_eq!(points.len(), cumulative.len());
    let n = points.len();
    if n == 1 || s <= cumulative[0] {
        return points[0];
    }
    if s >= cumulative[n - 1] {
        return points[n - 1];
    }
    // first vertex strictly beyond s
    let hi = cumulative.partition_point(|&v| v <= s).min(n - 1);
    let lo = hi - 1;
    let seg = cumulative[hi] - cumulative[lo];
    if seg <= 0.0 {
        return points[lo];
    }
    points[lo].lerp(points[hi], (s - cumulative[lo]) / seg)
}

pub fn adaptive_sample<R: Rng + ?Sized>(
    path: &SpiralPath,
    coeffs: &[f64],
    bbox: &BBox,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<AdaptiveSamples> {
    config.validate()?;
    bbox.validate()?;
    if path.points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "sampling needs a path of at least 2 points, got {}",
            path.points.len()
        )));
    }
    if coeffs.len() != path.points.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for a {}-point path",
            coeffs.len(),
            path.points.len()
        )));
    }
    let total = path.total_length();
    let needed = 2 * config.budget_k;
    let base = bbox.width().max(bbox.height());

    let mut got = 0;
    for retry in 0..=MAX_RETRIES {
        let beta = base / f64::from(1u32 << retry);
        let bias = rng.gen_range(0.0..=beta);

        let mut nominal = Vec::new();
        let mut s = bias;
        while s <= total {
            let k = coeffs[nearest_arc_index(&path.cumulative_arc, s)];
            nominal.push((s, k));
            s += beta * k;
        }

        let spread = config.epsilon * beta;
        let mut samples: Vec<Sample> = nominal
            .into_iter()
            .map(|(s, k)| {
                let delta = if spread > 0.0 {
                    rng.gen_range(-spread..=spread)
                } else {
                    0.0
                };
                let arc = (s + delta).clamp(0.0, total);
                Sample {
                    point: interpolate_at(&path.points, &path.cumulative_arc, arc),
                    arc_position: arc,
                    nominal_arc: s,
                    coefficient: k,
                }
            })
            .collect();
        samples.sort_by(|a, b| a.arc_position.total_cmp(&b.arc_position));

        got = samples.len();
        if got >= needed {
            return Ok(AdaptiveSamples {
                samples,
                beta,
                bias,
                retries: retry,
            });
        }
    }
    Err(Error::InsufficientSamples { needed, got })
}

/// Splits arc-ordered samples into the `K` farthest from the center
/// (external) and the `K` nearest (internal).
///
/// Both sets come from one total order on (normalized center distance,
/// sequence index), so they are disjoint whenever at least `2K` samples are
/// supplied.
pub fn split_internal_external(
    samples: &AdaptiveSamples,
    bbox: &BBox,
    config: &SamplerConfig,
    params: &EntropyParams,
) -> Result<CandidateSet> {
    let k = config.budget_k;
    let n = samples.samples.len();
    if k == 0 || n < 2 * k {
        return Err(Error::InsufficientSamples {
            needed: 2 * k,
            got: n,
        });
    }
    let mut scored = Vec::with_capacity(n);
    for (i, s) in samples.samples.iter().enumerate() {
        let nd = normalized_distances(s.point, bbox)?;
        scored.push((nd, i));
    }
    scored.sort_by(|x, y| x.0.d_c_norm.total_cmp(&y.0.d_c_norm).then(x.1.cmp(&y.1)));

    let make = |&(nd, i): &(NormalizedDistances, usize), origin| {
        ScoredPoint::score(samples.samples[i].point, nd, params, origin, i)
    };
    let internal: Vec<ScoredPoint> = scored[..k]
        .iter()
        .map(|e| make(e, Origin::Internal))
        .collect();
    let mut farthest = scored[n - k..].to_vec();
    // largest distance first; equal distances keep ascending sequence order
    farthest.sort_by(|x, y| y.0.d_c_norm.total_cmp(&x.0.d_c_norm).then(x.1.cmp(&y.1)));
    let external: Vec<ScoredPoint> = farthest.iter().map(|e| make(e, Origin::External)).collect();

    let sample_trace = samples
        .samples
        .iter()
        .map(|s| TraceStep {
            arc_position: s.arc_position,
            step_coefficient: s.coefficient,
        })
        .collect();
    Ok(CandidateSet {
        external,
        internal,
        sample_trace,
    })
}

/// Axis-ray candidates: boundary-proximal points stepping inward from the
/// four edge midpoints, and center-proximal points stepping outward from the
/// center along the horizontal and vertical axes.
///
/// Steps are a quarter of the box extent along the ray's axis. Edge rays are
/// visited top, bottom, left, right; center rays right, left, down, up; the
/// `j`-th candidate of a set sits `floor(j / 4) + 1` steps out.
pub fn ray_based_candidates(
    bbox: &BBox,
    config: &SamplerConfig,
    params: &EntropyParams,
) -> Result<CandidateSet> {
    config.validate()?;
    let (c, _, _) = bbox.center_and_axes()?;
    let k = config.budget_k;
    let (sx, sy) = (bbox.width() / 4.0, bbox.height() / 4.0);
    // edge rays reach the opposite edge after 4 steps, center rays the edge after 2
    let (max_edge_rounds, max_center_rounds) = (4, 2);
    let rounds = k.div_ceil(4);
    if rounds > max_center_rounds {
        return Err(Error::InsufficientSamples {
            needed: k,
            got: 4 * max_center_rounds,
        });
    }
    debug_assert!(rounds <= max_edge_rounds);

    let mut external = Vec::with_capacity(k);
    let mut internal = Vec::with_capacity(k);
    for j in 0..k {
        let m = (j / 4 + 1) as f64;
        let edge = match j % 4 {
            0 => Point2::new(c.x, bbox.y_min + m * sy),
            1 => Point2::new(c.x, bbox.y_max - m * sy),
            2 => Point2::new(bbox.x_min + m * sx, c.y),
            _ => Point2::new(bbox.x_max - m * sx, c.y),
        };
        let center = match j % 4 {
            0 => Point2::new(c.x + m * sx, c.y),
            1 => Point2::new(c.x - m * sx, c.y),
            2 => Point2::new(c.x, c.y + m * sy),
            _ => Point2::new(c.x, c.y - m * sy),
        };
        // the outermost steps land on the boundary; keep rounding inside
        let (edge, center) = (clamp_into(edge, bbox), clamp_into(center, bbox));
        external.push(ScoredPoint::score(
            edge,
            normalized_distances(edge, bbox)?,
            params,
            Origin::Ray,
            j,
        ));
        internal.push(ScoredPoint::score(
            center,
            normalized_distances(center, bbox)?,
            params,
            Origin::Ray,
            k + j,
        ));
    }
    Ok(CandidateSet {
        external,
        internal,
        sample_trace: Vec::new(),
    })
}

fn clamp_into(p: Point2, bbox: &BBox) -> Point2 {
    Point2::new(
        p.x.clamp(bbox.x_min, bbox.x_max),
        p.y.clamp(bbox.y_min, bbox.y_max),
    )
}

/// Uniform random points in the box; the first `K` draws form the external
/// set and the next `K` the internal set, with no geometric selection.
pub fn random_candidates<R: Rng + ?Sized>(
    bbox: &BBox,
    config: &SamplerConfig,
    params: &EntropyParams,
    rng: &mut R,
) -> Result<CandidateSet> {
    config.validate()?;
    bbox.validate()?;
    let k = config.budget_k;
    let mut draw = |i: usize, origin| -> Result<ScoredPoint> {
        let p = Point2::new(
            rng.gen_range(bbox.x_min..=bbox.x_max),
            rng.gen_range(bbox.y_min..=bbox.y_max),
        );
        Ok(ScoredPoint::score(
            p,
            normalized_distances(p, bbox)?,
            params,
            origin,
            i,
        ))
    };
    let external = (0..k)
        .map(|i| draw(i, Origin::External))
        .collect::<Result<Vec<_>>>()?;
    let internal = (k..2 * k)
        .map(|i| draw(i, Origin::Internal))
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSet {
        external,
        internal,
        sample_trace: Vec::new(),
    })
}

/// Full spiral route: coefficients, adaptive sampling, separation.
pub fn spiral_candidates<R: Rng + ?Sized>(
    path: &SpiralPath,
    config: &SamplerConfig,
    params: &EntropyParams,
    rng: &mut R,
) -> Result<CandidateSet> {
    let coeffs = dynamic_coefficients(&path.radial, config);
    let samples = adaptive_sample(path, &coeffs, &path.bbox, config, rng)?;
    split_internal_external(&samples, &path.bbox, config, params)
}
