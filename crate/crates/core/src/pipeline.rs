//! End-to-end prompt discovery: box intake, spiral, sampling, entropy
//! annotation and verification, ending in a [`PromptBundle`].

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::EntropyParams;
use crate::error::{Error, PipelineError, Result, Stage, StageExt};
use crate::geometry::{BBox, BBoxInput, ImageDims, Point2};
use crate::json;
use crate::sampler::{
    random_candidates, ray_based_candidates, spiral_candidates, CandidateSet, SamplerConfig,
    Strategy,
};
use crate::scene::Scene;
use crate::spiral::{generate_spiral, SpiralConfig, SpiralSettings};
use crate::verification::{
    run_verification_loop, EarlyStopPolicy, MarkerSettings, MaskOracle, Oracle, QueryContext,
    RemoteVqaClient, TraceEntry, VerificationOutcome,
};

/// Random stream indices under the run seed.
pub(crate) const STREAM_SPIRAL: u64 = 0;
pub(crate) const STREAM_SAMPLING: u64 = 1;
pub(crate) const STREAM_MARKERS: u64 = 2;
pub(crate) const STREAM_ORACLE: u64 = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    #[default]
    Mask,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub top_k: usize,
    /// Label flip probability of the mask oracle.
    pub noise: f64,
    pub endpoint: Option<String>,
    pub timeout_s: f64,
    pub max_in_flight: usize,
    pub markers: MarkerSettings,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Mask,
            top_k: 5,
            noise: 0.0,
            endpoint: None,
            timeout_s: 30.0,
            max_in_flight: 4,
            markers: MarkerSettings::default(),
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidParameter(format!(
                "oracle noise must lie in [0, 1], got {}",
                self.noise
            )));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "timeout must be positive, got {}",
                self.timeout_s
            )));
        }
        if self.max_in_flight == 0 {
            return Err(Error::InvalidParameter(
                "max_in_flight must be at least 1".into(),
            ));
        }
        self.markers.validate()
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }

    /// Remote client honoring `EPD_VQA_URL`.
    pub fn remote_client(&self) -> Result<RemoteVqaClient> {
        RemoteVqaClient::from_env_or(self.endpoint.as_deref(), self.timeout(), self.max_in_flight)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub spiral: SpiralSettings,
    pub sampler: SamplerConfig,
    pub entropy: EntropyParams,
    pub policy: EarlyStopPolicy,
    pub oracle: OracleConfig,
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spiral: SpiralSettings::default(),
            sampler: SamplerConfig::default(),
            entropy: EntropyParams::default(),
            policy: EarlyStopPolicy::default(),
            oracle: OracleConfig::default(),
            alpha: 1000.0,
        }
    }
}

impl RunConfig {
    /// Parses and validates a config document.
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_by_stage().map_err(|e| e.source)
    }

    /// Like [`validate`](Self::validate), tagging each problem with the
    /// stage that owns the parameter.
    pub fn validate_by_stage(&self) -> std::result::Result<(), PipelineError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(PipelineError::new(
                Stage::Geometry,
                Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)),
            ));
        }
        self.spiral
            .resolve(&mut ChaCha8Rng::seed_from_u64(0))
            .validate()
            .stage(Stage::Spiral)?;
        self.sampler.validate().stage(Stage::Sampling)?;
        self.entropy.validate().stage(Stage::Sampling)?;
        self.policy.validate().stage(Stage::Verification)?;
        self.oracle.validate().stage(Stage::Verification)
    }

    pub fn seed(&self) -> u64 {
        self.sampler.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sampler.seed = seed;
        self
    }

    /// Lowercase hex SHA-256 over the sorted-key, fixed-precision form.
    pub fn digest(&self) -> Result<String> {
        json::digest(self)
    }
}

/// Output of a successful run: the box plus verified point prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptBundle {
    pub bbox: BBox,
    pub positive_points: Vec<Point2>,
    pub negative_points: Vec<Point2>,
    pub trace: Vec<TraceEntry>,
    pub seed: u64,
    pub config_digest: String,
}

impl PromptBundle {
    /// Compact JSON, floats with six fractional digits.
    pub fn to_json(&self) -> Result<String> {
        json::to_fixed_string(self)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        json::to_fixed_string_pretty(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Everything about one instance that is not configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptRequest {
    pub bbox: BBoxInput,
    pub dims: ImageDims,
    pub expression: String,
    pub image_ref: String,
}

impl PromptRequest {
    pub fn new(bbox: BBoxInput, dims: ImageDims, expression: impl Into<String>) -> Self {
        Self {
            bbox,
            dims,
            expression: expression.into(),
            image_ref: String::new(),
        }
    }

    pub fn with_image_ref(mut self, image_ref: impl Into<String>) -> Self {
        self.image_ref = image_ref.into();
        self
    }
}

/// Candidate points for `bbox` under the configured strategy, plus the
/// spiral configuration actually used.
pub fn generate_candidates(
    bbox: &BBox,
    config: &RunConfig,
) -> std::result::Result<(SpiralConfig, CandidateSet), PipelineError> {
    let seed = config.seed();
    let spiral_cfg = resolve_spiral(config);
    let mut rng = json::stream_rng(seed, &[STREAM_SAMPLING]);
    let set = match config.sampler.strategy {
        Strategy::Spiral => {
            let path = generate_spiral(bbox, &spiral_cfg).stage(Stage::Spiral)?;
            spiral_candidates(&path, &config.sampler, &config.entropy, &mut rng)
        }
        Strategy::Ray => ray_based_candidates(bbox, &config.sampler, &config.entropy),
        Strategy::Random => random_candidates(bbox, &config.sampler, &config.entropy, &mut rng),
    }
    .stage(Stage::Sampling)?;
    Ok((spiral_cfg, set))
}

/// Spiral configuration a run with this config uses, with any random
/// orientation drawn from the spiral stream.
pub fn resolve_spiral(config: &RunConfig) -> SpiralConfig {
    config
        .spiral
        .resolve(&mut json::stream_rng(config.seed(), &[STREAM_SPIRAL]))
}

pub(crate) fn query_context(request: &PromptRequest, config: &RunConfig) -> QueryContext {
    QueryContext {
        image_ref: request.image_ref.clone(),
        expression: request.expression.clone(),
        top_k: config.oracle.top_k,
        markers: config.oracle.markers.clone(),
    }
}

pub(crate) fn marker_rng(config: &RunConfig) -> ChaCha8Rng {
    json::stream_rng(config.seed(), &[STREAM_MARKERS])
}

/// Random stream a mask oracle should use for a run with this config.
pub fn oracle_rng(config: &RunConfig) -> ChaCha8Rng {
    json::stream_rng(config.seed(), &[STREAM_ORACLE])
}

/// Builds a bundle from a finished verification.
pub fn assemble_bundle(
    bbox: BBox,
    outcome: &VerificationOutcome,
    config: &RunConfig,
) -> Result<PromptBundle> {
    let take = |it: &mut dyn Iterator<Item = &(crate::entropy::ScoredPoint, _)>,
                n|
     -> Vec<Point2> { it.take(n).map(|(sp, _)| sp.point).collect() };
    Ok(PromptBundle {
        bbox,
        positive_points: take(&mut outcome.positives(), config.policy.pos_target),
        negative_points: take(&mut outcome.negatives(), config.policy.neg_target),
        trace: outcome.trace.clone(),
        seed: config.seed(),
        config_digest: config.digest()?,
    })
}

/// Runs the whole chain against `oracle`. Errors carry the stage they came
/// from; running out of budget yields [`Error::InsufficientEvidence`] with the
/// partial trace.
pub fn discover_prompts<O: Oracle + ?Sized>(
    request: &PromptRequest,
    config: &RunConfig,
    oracle: &mut O,
) -> std::result::Result<PromptBundle, PipelineError> {
    config.validate_by_stage()?;
    let bbox = request.bbox.resolve(request.dims).stage(Stage::Geometry)?;
    bbox.center_and_axes().stage(Stage::Geometry)?;
    let (_, candidates) = generate_candidates(&bbox, config)?;
    let outcome = run_verification_loop(
        &candidates,
        oracle,
        &config.policy,
        &query_context(request, config),
        &mut marker_rng(config),
    )
    .stage(Stage::Verification)?;
    assemble_bundle(bbox, &outcome, config).stage(Stage::Verification)
}

/// [`discover_prompts`] with a mask oracle over `scene`, seeded from the
/// config.
pub fn discover_with_scene(
    request: &PromptRequest,
    config: &RunConfig,
    scene: &Scene,
) -> std::result::Result<PromptBundle, PipelineError> {
    let mut oracle = MaskOracle::new(scene, config.oracle.noise, oracle_rng(config))
        .stage(Stage::Verification)?;
    discover_prompts(request, config, &mut oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Shape;
    use crate::verification::Label;

    fn ellipse_scene() -> Scene {
        let d = ImageDims::new(200, 150).unwrap();
        let shape = Shape::Ellipse {
            center: Point2::new(100.0, 75.0),
            rx: 60.0,
            ry: 40.0,
        };
        Scene::from_bitmap("e", d, shape.rasterize(d), "the ellipse").unwrap()
    }

    fn request(scene: &Scene) -> PromptRequest {
        PromptRequest::new(
            BBoxInput::absolute(scene.gt_bbox),
            scene.dims,
            scene.expression.clone(),
        )
    }

    #[test]
    fn default_config_values() {
        let v = serde_json::to_value(RunConfig::default()).unwrap();
        assert_eq!(v["spiral"]["n_turns"], 8);
        assert_eq!(v["spiral"]["n_points"], 3000);
        assert_eq!(v["spiral"]["exponent_n"], 5.0);
        assert_eq!(v["sampler"]["budget_k"], 4);
        assert_eq!(v["policy"]["eta"], 0.6);
        assert_eq!(v["oracle"]["top_k"], 5);
        assert_eq!(v["alpha"], 1000.0);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(RunConfig::from_json(r#"{"alpha": 1000, "bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"policy": {"eta": 0.7, "extra": 1}}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"policy": {"eta": 0.7}}"#).unwrap();
        assert_eq!(cfg.policy.eta, 0.7);
        assert_eq!(cfg.policy.pos_target, 2);
        assert!(RunConfig::from_json(r#"{"alpha": -1}"#).is_err());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = RunConfig::default();
        assert_eq!(a.digest().unwrap(), a.clone().digest().unwrap());
        assert_ne!(
            a.digest().unwrap(),
            a.clone().with_seed(1).digest().unwrap()
        );
        let round: RunConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(round.digest().unwrap(), a.digest().unwrap());
    }

    #[test]
    fn noiseless_run_emits_correct_points() {
        let scene = ellipse_scene();
        let cfg = RunConfig::default().with_seed(11);
        let bundle = discover_with_scene(&request(&scene), &cfg, &scene).unwrap();
        assert_eq!(bundle.positive_points.len(), 2);
        assert_eq!(bundle.negative_points.len(), 1);
        for p in &bundle.positive_points {
            assert!(scene.contains(*p).unwrap());
            assert!(bundle.bbox.contains(*p));
        }
        for p in &bundle.negative_points {
            assert!(!scene.contains(*p).unwrap());
        }
        assert!(bundle
            .trace
            .windows(2)
            .all(|w| w[0].query_index < w[1].query_index));
        assert_eq!(bundle.seed, 11);
    }

    #[test]
    fn same_seed_same_bytes() {
        let scene = ellipse_scene();
        let cfg = RunConfig::default().with_seed(5);
        let a = discover_with_scene(&request(&scene), &cfg, &scene)
            .unwrap()
            .to_json()
            .unwrap();
        let b = discover_with_scene(&request(&scene), &cfg, &scene)
            .unwrap()
            .to_json()
            .unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(
            r#"{"bbox":[40.000000,35.000000,160.000000,115.000000],"positive_points":[["#
        ));
        let back = PromptBundle::from_json(&a).unwrap();
        assert_eq!(back.to_json().unwrap(), a);
    }

    #[test]
    fn degenerate_box_fails_in_geometry() {
        let scene = ellipse_scene();
        let mut req = request(&scene);
        req.bbox = BBoxInput::absolute(BBox::from([10.0, 10.0, 10.0, 50.0]));
        let err = discover_with_scene(&req, &RunConfig::default(), &scene).unwrap_err();
        assert_eq!(err.stage, Stage::Geometry);
        assert!(matches!(err.source, Error::InvalidGeometry(_)));
        assert!(err.to_string().starts_with("stage=geometry"));
    }

    #[test]
    fn unreachable_targets_report_partial_trace() {
        let scene = ellipse_scene();
        let mut cfg = RunConfig::default();
        cfg.policy.neg_target = 9;
        let err = discover_with_scene(&request(&scene), &cfg, &scene).unwrap_err();
        assert_eq!(err.stage, Stage::Verification);
        match err.source {
            Error::InsufficientEvidence(p) => assert_eq!(p.trace.len(), 8),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn relative_boxes_are_converted() {
        let scene = ellipse_scene();
        let mut req = request(&scene);
        // 40/200*1000 = 200, 35/150*1000 = 233.33..
        req.bbox = BBoxInput::relative(
            BBox::from([200.0, 35.0 / 150.0 * 1000.0, 800.0, 115.0 / 150.0 * 1000.0]),
            1000.0,
        );
        let bundle = discover_with_scene(&req, &RunConfig::default(), &scene).unwrap();
        assert!(
            (bundle.bbox.y_min - 35.0).abs() < 1e-9 && (bundle.bbox.x_max - 160.0).abs() < 1e-9
        );
    }

    #[test]
    fn every_strategy_runs() {
        let scene = ellipse_scene();
        for strategy in [Strategy::Spiral, Strategy::Ray, Strategy::Random] {
            let mut cfg = RunConfig::default().with_seed(3);
            cfg.sampler.strategy = strategy;
            cfg.policy.pos_target = 1;
            let res = discover_with_scene(&request(&scene), &cfg, &scene);
            if let Ok(b) = res {
                assert!(b
                    .trace
                    .iter()
                    .all(|t| t.verdict_label == Label::Positive
                        || t.verdict_label == Label::Negative));
            }
        }
    }
}
