mod args;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use epd_core::bench::{self, BenchConfig};
use epd_core::geometry::{self, BBox, BBoxInput};
use epd_core::json;
use epd_core::pipeline::{self, OracleKind, PromptRequest, RunConfig};
use epd_core::scene::{self, Scene};
use epd_core::spiral::{generate_spiral, Orientation};
use epd_core::verification::MaskOracle;
use epd_core::viz::{self, GridOptions, PanelSpec};

use args::{
    BenchArgs, BoxArgs, Cli, Command, ConvertArgs, ConvertTarget, OracleArg, SampleArgs, SeedArg,
    SpiralArgs, VerifyArgs, VizArgs,
};

/// Stream tag for synthetic scene generation, apart from per-instance streams.
const STREAM_SYNTHETIC: u64 = 1 << 33;

/// Bad flag combination detected after parsing; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed downstream pipe (e.g. `| head`) is not a failure
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}", render_chain(&e));
            ExitCode::from(1)
        }
    }
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn render_chain(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spiral(a) => spiral(a),
        Command::Sample(a) => sample(a),
        Command::Verify(a) => verify(a),
        Command::Bench(a) => bench(a),
        Command::Viz(a) => viz(a),
        Command::Convert(a) => convert(a),
    }
}

fn resolve_seed(seed: SeedArg) -> u64 {
    match seed {
        SeedArg::Fixed(s) => s,
        SeedArg::Random => {
            let s = rand::random();
            eprintln!("seed: {s}");
            s
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let config = match path {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            RunConfig::from_json(&text)
                .with_context(|| format!("parsing config {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    config.validate_by_stage().context("invalid config")?;
    Ok(config)
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(stdout.flush()?)
        }
    }
}

fn box_input(b: &BoxArgs, alpha: f64) -> BBoxInput {
    if b.relative {
        BBoxInput::relative(b.bbox, alpha)
    } else {
        BBoxInput::absolute(b.bbox)
    }
}

fn absolute_box(b: &BoxArgs, alpha: f64) -> Result<BBox> {
    match (b.relative, b.dims) {
        (true, Some(d)) => Ok(geometry::convert_relative_to_absolute(&b.bbox, d, alpha)?),
        (true, None) => Err(usage("--relative needs --dims")),
        (false, _) => {
            b.bbox.validate()?;
            Ok(b.bbox)
        }
    }
}

fn spiral(a: SpiralArgs) -> Result<()> {
    let config = load_config(a.common.config.as_deref())?.with_seed(resolve_seed(a.seed));
    let bbox = absolute_box(&a.bbox, config.alpha)?;
    let path = generate_spiral(&bbox, &pipeline::resolve_spiral(&config))?;
    write_output(a.common.out.as_ref(), &json::to_fixed_string(&path)?)
}

fn sample(a: SampleArgs) -> Result<()> {
    let config = load_config(a.common.config.as_deref())?.with_seed(resolve_seed(a.seed));
    let bbox = absolute_box(&a.bbox, config.alpha)?;
    let (_, candidates) = pipeline::generate_candidates(&bbox, &config)?;
    write_output(a.common.out.as_ref(), &json::to_fixed_string(&candidates)?)
}

fn load_scenes(path: &Path) -> Result<Vec<Scene>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading scenes {}", path.display()))?;
    scene::parse_scenes(&text).with_context(|| format!("parsing scenes {}", path.display()))
}

fn pick_scene(scenes: Vec<Scene>, id: Option<&str>) -> Result<Scene> {
    match id {
        Some(id) => scenes
            .into_iter()
            .find(|s| s.scene_id == id)
            .ok_or_else(|| anyhow::anyhow!("no scene with id {id:?}")),
        None if scenes.len() == 1 => Ok(scenes.into_iter().next().expect("one scene")),
        None => Err(usage(format!(
            "--scene holds {} scenes; pick one with --scene-id",
            scenes.len()
        ))),
    }
}

fn verify(a: VerifyArgs) -> Result<()> {
    let mut config = load_config(a.common.config.as_deref())?.with_seed(resolve_seed(a.seed));
    if let Some(o) = a.oracle {
        config.oracle.kind = match o {
            OracleArg::Mask => OracleKind::Mask,
            OracleArg::Remote => OracleKind::Remote,
        };
    }
    let scene = match (&a.scene, config.oracle.kind) {
        (Some(p), _) => Some(pick_scene(load_scenes(p)?, a.scene_id.as_deref())?),
        (None, OracleKind::Mask) => return Err(usage("--oracle mask needs --scene")),
        (None, OracleKind::Remote) => None,
    };
    let dims = match (a.bbox.dims, &scene) {
        (Some(d), _) => d,
        (None, Some(s)) => s.dims,
        (None, None) => return Err(usage("--dims is required without --scene")),
    };
    let mut request = PromptRequest::new(box_input(&a.bbox, config.alpha), dims, a.expression);
    if let Some(uri) = a.image_uri {
        request = request.with_image_ref(uri);
    }
    let bundle = match config.oracle.kind {
        OracleKind::Mask => {
            let scene = scene.expect("mask oracle has a scene");
            let mut oracle =
                MaskOracle::new(&scene, config.oracle.noise, pipeline::oracle_rng(&config))?;
            pipeline::discover_prompts(&request, &config, &mut oracle)?
        }
        OracleKind::Remote => {
            let mut client = config.oracle.remote_client()?;
            pipeline::discover_prompts(&request, &config, &mut client)?
        }
    };
    let text = if a.pretty {
        bundle.to_json_pretty()?
    } else {
        bundle.to_json()?
    };
    write_output(a.common.out.as_ref(), &text)
}

fn bench(a: BenchArgs) -> Result<()> {
    let master_seed = resolve_seed(a.seed);
    let run = load_config(a.config.as_deref())?;
    let scenes = match &a.scenes {
        Some(p) => load_scenes(p)?,
        None => {
            let mut rng = json::stream_rng(master_seed, &[STREAM_SYNTHETIC]);
            scene::generate_synthetic_scenes(a.synthetic, &a.shapes, a.dims, &mut rng)?
        }
    };
    if a.jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    let config = BenchConfig {
        run,
        strategies: a.strategies,
        regimes: a.regimes,
        etas: a.etas,
        seeds_per_scene: a.seeds_per_scene,
        master_seed,
    };
    let reports = bench::run_comparison(&scenes, &config, a.jobs)?;
    if let Some(p) = &a.table {
        fs::write(p, bench::format_table(&reports))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    write_output(a.out.as_ref(), &bench::to_csv_string(&reports)?)
}

fn viz(a: VizArgs) -> Result<()> {
    let config = load_config(a.common.config.as_deref())?;
    let seed = resolve_seed(a.seed);
    let options = GridOptions {
        // orientation comes from each panel
        spiral: pipeline::resolve_spiral(&config.clone().with_seed(seed)),
        sampler: config.sampler,
        entropy: config.entropy,
        seed,
        show_candidates: !a.no_candidates,
    };
    let svg = if a.grid {
        let specs: Vec<PanelSpec> = viz::figure_grid_specs()
            .into_iter()
            .map(|s| PanelSpec {
                canvas: a.canvas,
                ..s
            })
            .collect();
        viz::render_grid(&specs, &options)?
    } else {
        let orientation = Orientation {
            direction: a.direction,
            terminal: a.terminal,
        };
        let spec = PanelSpec {
            aspect: a.aspect,
            orientation,
            canvas: a.canvas,
        };
        let (path, candidates) = viz::build_panel(&spec, &options, 0)?;
        viz::render_panel(&path, candidates.as_ref(), &spec)?
    };
    write_output(a.common.out.as_ref(), &svg)
}

fn convert(a: ConvertArgs) -> Result<()> {
    let out = match a.to {
        ConvertTarget::Absolute => {
            geometry::convert_relative_to_absolute(&a.bbox, a.dims, a.alpha)?
        }
        ConvertTarget::Relative => {
            geometry::convert_absolute_to_relative(&a.bbox, a.dims, a.alpha)?
        }
    };
    write_output(None, &out.to_string())
}
