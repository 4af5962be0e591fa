use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use epd_core::geometry::{BBox, ImageDims, PerturbationRegime};
use epd_core::sampler::Strategy;
use epd_core::scene::ShapeKind;
use epd_core::spiral::{Direction, Terminal};
use epd_core::viz::Aspect;

#[derive(Debug, Parser)]
#[command(name = "epd", version, about = "Entropy-guided point-prompt discovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the spiral path for a box and print it as JSON.
    Spiral(SpiralArgs),
    /// Sample internal and external candidates for a box.
    Sample(SampleArgs),
    /// Discover verified point prompts for a box.
    Verify(VerifyArgs),
    /// Compare sampling strategies under box perturbation.
    Bench(BenchArgs),
    /// Render spiral panels as SVG.
    Viz(VizArgs),
    /// Convert a box between relative and absolute coordinates.
    Convert(ConvertArgs),
}

/// `--seed` value: a number, or `random` to draw one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedArg {
    Fixed(u64),
    Random,
}

impl FromStr for SeedArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "random" {
            return Ok(SeedArg::Random);
        }
        s.parse()
            .map(SeedArg::Fixed)
            .map_err(|_| format!("expected an unsigned integer or `random`, got {s:?}"))
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON with spiral, sampler, entropy, policy, oracle, alpha).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoxArgs {
    /// Box as x_min,y_min,x_max,y_max.
    #[arg(long, allow_hyphen_values = true)]
    pub bbox: BBox,
    /// The box is in relative coordinates scaled by the configured alpha.
    #[arg(long, requires = "dims")]
    pub relative: bool,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long)]
    pub dims: Option<ImageDims>,
}

#[derive(Debug, Args)]
pub struct SpiralArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub bbox: BoxArgs,
    /// Seed for orientations configured as random.
    #[arg(long, default_value = "0")]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub bbox: BoxArgs,
    #[arg(long, default_value = "0")]
    pub seed: SeedArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleArg {
    Mask,
    Remote,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub bbox: BoxArgs,
    /// Referring expression.
    #[arg(long)]
    pub expression: String,
    /// Oracle to query; defaults to the configured one.
    #[arg(long)]
    pub oracle: Option<OracleArg>,
    /// Scene file (JSON list of scenes) for the mask oracle.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Scene to use when the file holds several.
    #[arg(long)]
    pub scene_id: Option<String>,
    /// Image reference sent to a remote oracle.
    #[arg(long)]
    pub image_uri: Option<String>,
    /// Run seed, or `random`.
    #[arg(long)]
    pub seed: SeedArg,
    /// Indent the bundle JSON.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Run configuration used for every instance.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scene file; synthetic scenes are generated when omitted.
    #[arg(long, conflicts_with_all = ["synthetic", "shapes", "dims"])]
    pub scenes: Option<PathBuf>,
    /// Number of synthetic scenes.
    #[arg(long, default_value_t = 50)]
    pub synthetic: usize,
    /// Synthetic shape kinds.
    #[arg(long, value_delimiter = ',', default_value = "ellipse,rectangle,blob")]
    pub shapes: Vec<ShapeKind>,
    /// Synthetic frame size.
    #[arg(long, default_value = "160x120")]
    pub dims: ImageDims,
    #[arg(long, value_delimiter = ',', default_value = "spiral,random")]
    pub strategies: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "tight,mild,severe")]
    pub regimes: Vec<PerturbationRegime>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.6,0.7,0.8")]
    pub etas: Vec<f64>,
    /// Perturbation seeds per scene.
    #[arg(long, default_value_t = 20)]
    pub seeds_per_scene: usize,
    /// Master seed, or `random`.
    #[arg(long)]
    pub seed: SeedArg,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// CSV report path; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write an aligned text table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Render the full 3 x 8 grid.
    #[arg(long, conflicts_with_all = ["aspect", "direction", "terminal"])]
    pub grid: bool,
    /// Box aspect of a single panel: 1:2, 1:1.5 or 1:1.
    #[arg(long, default_value = "1:1")]
    pub aspect: Aspect,
    /// Spiral direction of a single panel: cw or ccw.
    #[arg(long, default_value = "cw")]
    pub direction: Direction,
    /// Terminal side of a single panel.
    #[arg(long, default_value = "top")]
    pub terminal: Terminal,
    /// Leave out candidate glyphs.
    #[arg(long)]
    pub no_candidates: bool,
    /// Panel side in pixels.
    #[arg(long, default_value_t = epd_core::viz::DEFAULT_CANVAS)]
    pub canvas: f64,
    #[arg(long, default_value = "0")]
    pub seed: SeedArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvertTarget {
    Absolute,
    Relative,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub bbox: BBox,
    #[arg(long)]
    pub dims: ImageDims,
    #[arg(long, default_value_t = 1000.0)]
    pub alpha: f64,
    #[arg(long, value_enum)]
    pub to: ConvertTarget,
}
