//! Robustness benchmark: candidate strategies under box perturbation,
//! scored against ground-truth masks.

use std::fmt::Write as _;
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{perturb_bbox, BBoxInput, PerturbationRegime};
use crate::json::{derive_seed, stream_rng};
use crate::pipeline::{
    generate_candidates, marker_rng, oracle_rng, query_context, PromptRequest, RunConfig,
};
use crate::sampler::Strategy;
use crate::scene::Scene;
use crate::verification::{emitted_points, sweep_candidates, Label, MaskOracle, TraceEntry};

pub const DEFAULT_ETAS: [f64; 4] = [0.0, 0.6, 0.7, 0.8];

/// Stream tag for the per-instance pipeline seed, kept apart from the
/// regime indices used for perturbation streams.
const STREAM_RUN: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub run: RunConfig,
    pub strategies: Vec<Strategy>,
    pub regimes: Vec<PerturbationRegime>,
    pub etas: Vec<f64>,
    pub seeds_per_scene: usize,
    pub master_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            run: RunConfig::default(),
            strategies: vec![Strategy::Spiral, Strategy::Random],
            regimes: PerturbationRegime::ALL.to_vec(),
            etas: DEFAULT_ETAS.to_vec(),
            seeds_per_scene: 20,
            master_seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.strategies.is_empty() || self.regimes.is_empty() || self.etas.is_empty() {
            return Err(Error::InvalidParameter(
                "strategies, regimes and etas must be non-empty".into(),
            ));
        }
        if let Some(eta) = self.etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::InvalidParameter(format!("eta {eta} outside [0, 1]")));
        }
        if self.seeds_per_scene == 0 {
            return Err(Error::InvalidParameter(
                "seeds_per_scene must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Full verdict sweep of one (scene, seed) instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTrace {
    pub scene_index: usize,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted_positive: bool, truly_positive: bool) {
        match (predicted_positive, truly_positive) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Point-level classification metrics over retained verdicts. When nothing is
/// retained all rates are NaN and `defined` is false.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMetrics {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean retained points per instance.
    pub available: f64,
    pub n_instances: usize,
    pub defined: bool,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

impl PointMetrics {
    pub fn from_confusion(confusion: Confusion, n_instances: usize) -> Self {
        let c = confusion;
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision.is_nan() || recall.is_nan() {
            f64::NAN
        } else if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let available = if n_instances == 0 {
            f64::NAN
        } else {
            c.total() as f64 / n_instances as f64
        };
        Self {
            confusion,
            accuracy: ratio(c.tp + c.tn, c.total()),
            precision,
            recall,
            f1,
            available,
            n_instances,
            defined: c.total() > 0,
        }
    }
}

/// Scores the verdicts retained at `eta` against mask containment.
pub fn point_metrics(traces: &[InstanceTrace], scenes: &[Scene], eta: f64) -> Result<PointMetrics> {
    let mut confusion = Confusion::default();
    for inst in traces {
        let scene = scenes.get(inst.scene_index).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "trace refers to scene {} of {}",
                inst.scene_index,
                scenes.len()
            ))
        })?;
        for t in inst.trace.iter().filter(|t| t.confidence > eta) {
            confusion.add(t.verdict_label == Label::Positive, scene.contains(t.point)?);
        }
    }
    Ok(PointMetrics::from_confusion(confusion, traces.len()))
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub regime: PerturbationRegime,
    pub eta: f64,
    pub metrics: PointMetrics,
    /// Fraction of emitted positive prompts that fall inside the mask.
    pub hit_rate: f64,
    /// Instances whose early-stopping run reached its targets.
    pub completed: usize,
    /// `hit_rate` minus the tight-box hit rate of the same strategy and eta.
    pub delta_vs_tight: f64,
}

fn run_instance(
    scene: &Scene,
    scene_index: usize,
    seed_index: usize,
    strategy: Strategy,
    regime: PerturbationRegime,
    config: &BenchConfig,
) -> Result<InstanceTrace> {
    let (i, j) = (scene_index as u64, seed_index as u64);
    let regime_tag = PerturbationRegime::ALL
        .iter()
        .position(|r| *r == regime)
        .unwrap_or(0) as u64;
    let bbox = perturb_bbox(
        &scene.gt_bbox,
        regime,
        scene.dims,
        &mut stream_rng(config.master_seed, &[i, j, regime_tag]),
    )?;
    let mut run = config
        .run
        .clone()
        .with_seed(derive_seed(config.master_seed, &[i, j, STREAM_RUN]));
    run.sampler.strategy = strategy;
    let request = PromptRequest::new(
        BBoxInput::absolute(bbox),
        scene.dims,
        scene.expression.clone(),
    )
    .with_image_ref(scene.scene_id.clone());
    let (_, candidates) = generate_candidates(&bbox, &run).map_err(|e| e.source)?;
    let mut oracle = MaskOracle::new(scene, run.oracle.noise, oracle_rng(&run))?;
    let sweep = sweep_candidates(
        &candidates,
        &mut oracle,
        run.policy.order,
        &query_context(&request, &run),
        &mut marker_rng(&run),
    )?;
    Ok(InstanceTrace {
        scene_index,
        trace: sweep.into_iter().map(|(_, t)| t).collect(),
    })
}

fn hit_rate(
    traces: &[InstanceTrace],
    scenes: &[Scene],
    config: &BenchConfig,
    eta: f64,
) -> Result<(f64, usize)> {
    let policy = crate::verification::EarlyStopPolicy {
        eta,
        ..config.run.policy
    };
    let (mut hits, mut emitted, mut completed) = (0u64, 0u64, 0usize);
    for inst in traces {
        if let Some((pos, _)) = emitted_points(&inst.trace, &policy) {
            completed += 1;
            for p in pos {
                emitted += 1;
                if scenes[inst.scene_index].contains(p)? {
                    hits += 1;
                }
            }
        }
    }
    Ok((ratio(hits, emitted), completed))
}

/// Runs every (strategy, regime) cell over all scenes and seeds. Each
/// instance draws from its own stream derived from the master seed and its
/// indices, so results do not depend on `jobs`. All strategies see the same
/// perturbed boxes.
pub fn run_comparison(
    scenes: &[Scene],
    config: &BenchConfig,
    jobs: Option<usize>,
) -> Result<Vec<MetricsReport>> {
    config.validate()?;
    if scenes.is_empty() {
        return Err(Error::InvalidParameter("no scenes to benchmark".into()));
    }
    let cells: Vec<(Strategy, PerturbationRegime)> = config
        .strategies
        .iter()
        .flat_map(|&s| config.regimes.iter().map(move |&r| (s, r)))
        .collect();
    let tasks: Vec<(usize, usize, usize)> = (0..cells.len())
        .flat_map(|c| {
            (0..scenes.len()).flat_map(move |i| (0..config.seeds_per_scene).map(move |j| (c, i, j)))
        })
        .collect();

    let run_all = || -> Result<Vec<InstanceTrace>> {
        tasks
            .par_iter()
            .map(|&(c, i, j)| run_instance(&scenes[i], i, j, cells[c].0, cells[c].1, config))
            .collect()
    };
    let traces = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start {n} workers: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };

    let per_cell = scenes.len() * config.seeds_per_scene;
    let mut reports = Vec::with_capacity(cells.len() * config.etas.len());
    for (c, &(strategy, regime)) in cells.iter().enumerate() {
        let cell = &traces[c * per_cell..(c + 1) * per_cell];
        for &eta in &config.etas {
            let (hit, completed) = hit_rate(cell, scenes, config, eta)?;
            reports.push(MetricsReport {
                strategy,
                regime,
                eta,
                metrics: point_metrics(cell, scenes, eta)?,
                hit_rate: hit,
                completed,
                delta_vs_tight: f64::NAN,
            });
        }
    }
    let tight: Vec<(Strategy, f64, f64)> = reports
        .iter()
        .filter(|r| r.regime == PerturbationRegime::Tight)
        .map(|r| (r.strategy, r.eta, r.hit_rate))
        .collect();
    for r in &mut reports {
        if let Some(&(_, _, base)) = tight
            .iter()
            .find(|(s, e, _)| *s == r.strategy && *e == r.eta)
        {
            r.delta_vs_tight = r.hit_rate - base;
        }
    }
    Ok(reports)
}

pub const CSV_HEADER: [&str; 10] = [
    "strategy",
    "regime",
    "eta",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "available",
    "hit_rate",
    "delta_vs_tight",
];

fn cell(v: f64) -> String {
    if v.is_nan() {
        "NA".to_owned()
    } else {
        format!("{v:.6}")
    }
}

fn row(r: &MetricsReport) -> [String; 10] {
    let m = &r.metrics;
    [
        r.strategy.name().to_owned(),
        r.regime.name().to_owned(),
        format!("{}", r.eta),
        cell(m.accuracy),
        cell(m.precision),
        cell(m.recall),
        cell(m.f1),
        cell(m.available),
        cell(r.hit_rate),
        cell(r.delta_vs_tight),
    ]
}

pub fn write_csv<W: io::Write>(reports: &[MetricsReport], writer: W) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("empty report table".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(reports: &[MetricsReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Space-aligned text table with the same columns as the CSV.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let rows: Vec<[String; 10]> = reports.iter().map(row).collect();
    let widths: Vec<usize> = (0..10)
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([CSV_HEADER[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&CSV_HEADER);
    for r in &rows {
        line(&r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::Origin;
    use crate::geometry::{ImageDims, Point2};
    use crate::scene::{generate_synthetic_scenes, ShapeKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenes(n: usize, seed: u64) -> Vec<Scene> {
        let d = ImageDims::new(120, 90).unwrap();
        generate_synthetic_scenes(n, &ShapeKind::ALL, d, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap()
    }

    fn entry(x: f64, y: f64, label: Label, confidence: f64) -> TraceEntry {
        TraceEntry {
            point: Point2::new(x, y),
            p: 0.5,
            entropy: 0.6,
            origin: Origin::External,
            verdict_label: label,
            confidence,
            query_index: 0,
        }
    }

    fn small_config() -> BenchConfig {
        BenchConfig {
            seeds_per_scene: 2,
            master_seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn metric_identities_match_a_recount() {
        let c = Confusion {
            tp: 5,
            fp: 2,
            tn: 7,
            fn_: 1,
        };
        let m = PointMetrics::from_confusion(c, 3);
        assert_eq!(m.accuracy, 12.0 / 15.0);
        assert_eq!(m.precision, 5.0 / 7.0);
        assert_eq!(m.recall, 5.0 / 6.0);
        assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
        assert_eq!(m.available, 5.0);
        let empty = PointMetrics::from_confusion(Confusion::default(), 3);
        assert!(!empty.defined && empty.accuracy.is_nan() && empty.f1.is_nan());
        assert_eq!(empty.available, 0.0);
    }

    #[test]
    fn point_metrics_count_retained_only() {
        let s = scenes(1, 1);
        let inside = s[0].gt_bbox.center();
        let traces = vec![InstanceTrace {
            scene_index: 0,
            trace: vec![
                entry(0.0, 0.0, Label::Negative, 0.9),
                entry(inside.x, inside.y, Label::Positive, 0.65),
            ],
        }];
        let all = point_metrics(&traces, &s, 0.0).unwrap();
        let strict = point_metrics(&traces, &s, 0.7).unwrap();
        assert_eq!(all.available, 2.0);
        assert_eq!(strict.available, 1.0);
        let none = point_metrics(&traces, &s, 1.0).unwrap();
        assert!(!none.defined && none.available == 0.0);
        let bad = vec![InstanceTrace {
            scene_index: 5,
            trace: vec![],
        }];
        assert!(point_metrics(&bad, &s, 0.0).is_err());
    }

    #[test]
    fn noiseless_comparison_is_exact() {
        let s = scenes(6, 2);
        let reports = run_comparison(&s, &small_config(), Some(2)).unwrap();
        assert_eq!(reports.len(), 2 * 3 * 4);
        for r in &reports {
            assert!(r.metrics.defined);
            assert_eq!(r.metrics.accuracy, 1.0, "{r:?}");
            if r.regime == PerturbationRegime::Tight {
                assert!(r.hit_rate.is_nan() || r.hit_rate == 1.0);
                assert!(r.delta_vs_tight == 0.0 || r.delta_vs_tight.is_nan());
            }
        }
        // availability never rises with eta
        for w in reports.windows(2) {
            if w[0].strategy == w[1].strategy && w[0].regime == w[1].regime {
                assert!(w[1].metrics.available <= w[0].metrics.available);
            }
        }
    }

    #[test]
    fn comparison_ignores_worker_count() {
        let s = scenes(4, 3);
        let a = to_csv_string(&run_comparison(&s, &small_config(), Some(1)).unwrap()).unwrap();
        let b = to_csv_string(&run_comparison(&s, &small_config(), Some(4)).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_layout_and_na_cells() {
        let m = PointMetrics::from_confusion(Confusion::default(), 2);
        let r = MetricsReport {
            strategy: Strategy::Spiral,
            regime: PerturbationRegime::Tight,
            eta: 1.0,
            metrics: m,
            hit_rate: f64::NAN,
            completed: 0,
            delta_vs_tight: f64::NAN,
        };
        let csv = to_csv_string(std::slice::from_ref(&r)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "strategy,regime,eta,accuracy,precision,recall,f1,available,hit_rate,delta_vs_tight"
        );
        assert_eq!(lines[1], "spiral,tight,1,NA,NA,NA,NA,0.000000,NA,NA");
        assert!(to_csv_string(&[]).is_err());
        let table = format_table(&[r]);
        assert_eq!(table.lines().count(), 2);
        assert!(table.lines().next().unwrap().starts_with("strategy"));
    }

    #[test]
    fn bad_bench_configs_are_rejected() {
        let s = scenes(1, 1);
        let mut c = small_config();
        c.etas = vec![1.5];
        assert!(run_comparison(&s, &c, None).is_err());
        let c = BenchConfig {
            strategies: vec![],
            ..small_config()
        };
        assert!(run_comparison(&s, &c, None).is_err());
        assert!(run_comparison(&[], &small_config(), None).is_err());
    }
}
