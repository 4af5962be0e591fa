//! SVG rendering of spiral paths and their candidate sets, one panel per
//! (aspect, orientation), assembled into a 3 x 8 grid.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entropy::EntropyParams;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::json::stream_rng;
use crate::sampler::{spiral_candidates, CandidateSet, SamplerConfig};
use crate::spiral::{generate_spiral, Orientation, SpiralConfig, SpiralPath, ALL_ORIENTATIONS};

/// Box width to height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aspect {
    /// 1:2, elongated.
    #[serde(rename = "1:2")]
    Elongated,
    /// 1:1.5, moderately tall.
    #[serde(rename = "1:1.5")]
    Tall,
    /// 1:1.
    #[serde(rename = "1:1")]
    Square,
}

impl Aspect {
    /// Grid row order, top to bottom.
    pub const ROWS: [Aspect; 3] = [Aspect::Elongated, Aspect::Tall, Aspect::Square];

    /// Height per unit width.
    pub fn height_ratio(self) -> f64 {
        match self {
            Aspect::Elongated => 2.0,
            Aspect::Tall => 1.5,
            Aspect::Square => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Aspect::Elongated => "1:2",
            Aspect::Tall => "1:1.5",
            Aspect::Square => "1:1",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Aspect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1:2" => Ok(Aspect::Elongated),
            "1:1.5" => Ok(Aspect::Tall),
            "1:1" => Ok(Aspect::Square),
            other => Err(Error::InvalidParameter(format!(
                "unsupported aspect {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub aspect: Aspect,
    pub orientation: Orientation,
    /// Side of the square panel in pixels.
    pub canvas: f64,
}

pub const DEFAULT_CANVAS: f64 = 240.0;
const MARGIN: f64 = 12.0;
const LEGEND_HEIGHT: f64 = 28.0;
const GLYPH: f64 = 3.5;

impl PanelSpec {
    pub fn new(aspect: Aspect, orientation: Orientation) -> Self {
        Self {
            aspect,
            orientation,
            canvas: DEFAULT_CANVAS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.canvas.is_finite() && self.canvas >= 4.0 * (MARGIN + LEGEND_HEIGHT)) {
            return Err(Error::InvalidParameter(format!(
                "canvas {} px is too small",
                self.canvas
            )));
        }
        Ok(())
    }

    /// Box of the panel's aspect, centered in the drawing area above the
    /// legend.
    pub fn bbox(&self) -> BBox {
        let avail_w = self.canvas - 2.0 * MARGIN;
        let avail_h = self.canvas - 2.0 * MARGIN - LEGEND_HEIGHT;
        let r = self.aspect.height_ratio();
        let (w, h) = if avail_h / avail_w >= r {
            (avail_w, avail_w * r)
        } else {
            (avail_h / r, avail_h)
        };
        let (cx, cy) = (self.canvas / 2.0, MARGIN + avail_h / 2.0);
        BBox {
            x_min: cx - w / 2.0,
            y_min: cy - h / 2.0,
            x_max: cx + w / 2.0,
            y_max: cy + h / 2.0,
        }
    }
}

/// The 24 panels in grid order.
pub fn figure_grid_specs() -> Vec<PanelSpec> {
    Aspect::ROWS
        .iter()
        .flat_map(|&a| ALL_ORIENTATIONS.iter().map(move |&o| PanelSpec::new(a, o)))
        .collect()
}

fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_owned()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const STYLE: &str = ".bbox{fill:none;stroke:#444;stroke-width:1}\
.spiral{fill:none;stroke:#1f77b4;stroke-width:0.6}\
.external{fill:#d62728}\
.internal{fill:#2ca02c}\
.legend{font-family:monospace;font-size:10px;fill:#222}";

fn panel_body(
    out: &mut String,
    path: &SpiralPath,
    candidates: Option<&CandidateSet>,
    spec: &PanelSpec,
) {
    let b = &path.bbox;
    let _ = writeln!(
        out,
        r#"<rect class="bbox" x="{}" y="{}" width="{}" height="{}"/>"#,
        num(b.x_min),
        num(b.y_min),
        num(b.width()),
        num(b.height())
    );
    let pts: Vec<String> = path
        .points
        .iter()
        .map(|p| format!("{},{}", num(p.x), num(p.y)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="spiral" points="{}"/>"#,
        pts.join(" ")
    );
    if let Some(c) = candidates {
        for p in &c.external {
            let _ = writeln!(
                out,
                r#"<circle class="external" cx="{}" cy="{}" r="{}"/>"#,
                num(p.point.x),
                num(p.point.y),
                num(GLYPH)
            );
        }
        for p in &c.internal {
            let _ = writeln!(
                out,
                r#"<rect class="internal" x="{}" y="{}" width="{}" height="{}"/>"#,
                num(p.point.x - GLYPH),
                num(p.point.y - GLYPH),
                num(2.0 * GLYPH),
                num(2.0 * GLYPH)
            );
        }
    }
    let legend = format!(
        "{} {} N={}",
        spec.aspect,
        path.orientation,
        path.points.len()
    );
    let _ = writeln!(
        out,
        r#"<text class="legend" x="{}" y="{}">{}</text>"#,
        num(MARGIN),
        num(spec.canvas - MARGIN),
        escape(&legend)
    );
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
<style>{STYLE}</style>\n{body}</svg>\n",
        w = num(width),
        h = num(height),
    )
}

/// One panel as a standalone SVG document.
pub fn render_panel(
    path: &SpiralPath,
    candidates: Option<&CandidateSet>,
    spec: &PanelSpec,
) -> Result<String> {
    spec.validate()?;
    let mut body = String::new();
    panel_body(&mut body, path, candidates, spec);
    Ok(document(spec.canvas, spec.canvas, &body))
}

/// Algorithm settings shared by every grid panel.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    pub spiral: SpiralConfig,
    pub sampler: SamplerConfig,
    pub entropy: EntropyParams,
    pub seed: u64,
    pub show_candidates: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            spiral: SpiralConfig::default(),
            sampler: SamplerConfig::default(),
            entropy: EntropyParams::default(),
            seed: 0,
            show_candidates: true,
        }
    }
}

/// Path and, if requested, candidates for one panel.
pub fn build_panel(
    spec: &PanelSpec,
    options: &GridOptions,
    stream: u64,
) -> Result<(SpiralPath, Option<CandidateSet>)> {
    spec.validate()?;
    let cfg = options.spiral.with_orientation(spec.orientation);
    let path = generate_spiral(&spec.bbox(), &cfg)?;
    let candidates = if options.show_candidates {
        let mut rng = stream_rng(options.seed, &[stream]);
        Some(spiral_candidates(
            &path,
            &options.sampler,
            &options.entropy,
            &mut rng,
        )?)
    } else {
        None
    };
    Ok((path, candidates))
}

/// 3 x 8 grid: rows by aspect (1:2, 1:1.5, 1:1), columns by orientation
/// (clockwise top, bottom, left, right, then counterclockwise). Exactly one
/// spec per cell is required.
pub fn render_grid(specs: &[PanelSpec], options: &GridOptions) -> Result<String> {
    let expected = Aspect::ROWS.len() * ALL_ORIENTATIONS.len();
    if specs.len() != expected {
        return Err(Error::InvalidParameter(format!(
            "grid needs {expected} panel specs, got {}",
            specs.len()
        )));
    }
    let mut cells: Vec<Option<&PanelSpec>> = vec![None; expected];
    for spec in specs {
        spec.validate()?;
        let row = Aspect::ROWS
            .iter()
            .position(|a| *a == spec.aspect)
            .expect("aspect is one of ROWS");
        let col = ALL_ORIENTATIONS
            .iter()
            .position(|o| *o == spec.orientation)
            .expect("orientation is one of eight");
        let slot = &mut cells[row * ALL_ORIENTATIONS.len() + col];
        if slot.is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate panel {} {}",
                spec.aspect, spec.orientation
            )));
        }
        *slot = Some(spec);
    }
    let canvas = specs[0].canvas;
    if specs.iter().any(|s| s.canvas != canvas) {
        return Err(Error::InvalidParameter(
            "grid panels must share one canvas size".into(),
        ));
    }
    let mut body = String::new();
    for (i, spec) in cells.iter().enumerate() {
        let spec = spec.expect("all cells filled");
        let (row, col) = (i / ALL_ORIENTATIONS.len(), i % ALL_ORIENTATIONS.len());
        let (path, candidates) = build_panel(spec, options, i as u64)?;
        let _ = writeln!(
            body,
            r#"<g class="panel" data-row="{row}" data-col="{col}" transform="translate({},{})">"#,
            num(col as f64 * canvas),
            num(row as f64 * canvas)
        );
        panel_body(&mut body, &path, candidates.as_ref(), spec);
        body.push_str("</g>\n");
    }
    Ok(document(
        canvas * ALL_ORIENTATIONS.len() as f64,
        canvas * Aspect::ROWS.len() as f64,
        &body,
    ))
}
