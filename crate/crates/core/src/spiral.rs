//! Superellipse spiral inside a bounding box.
//!
//! The radius follows a logistic schedule `r(t) = sigmoid(k (t - t0))` over
//! the normalized index `t`, and each vertex is pushed onto the superellipse
//! contour of exponent `n` at that radius, so the superellipse radius of every
//! vertex equals `r(t)` exactly up to rounding.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::sigmoid;
use crate::error::{Error, Result};
use crate::geometry::{BBox, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Clockwise,
    Counterclockwise,
}

impl Direction {
    /// Sign applied to the angle. Image coordinates have `y` pointing down,
    /// so increasing angle is clockwise on screen.
    fn sign(self) -> f64 {
        match self {
            Direction::Clockwise => 1.0,
            Direction::Counterclockwise => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Clockwise => "clockwise",
            Direction::Counterclockwise => "counterclockwise",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Direction::Clockwise => "CW",
            Direction::Counterclockwise => "CCW",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Top,
    Bottom,
    Left,
    Right,
}

impl Terminal {
    /// Angle (y down) pointing from the center at this side.
    fn angle(self) -> f64 {
        match self {
            Terminal::Right => 0.0,
            Terminal::Bottom => FRAC_PI_2,
            Terminal::Left => PI,
            Terminal::Top => 3.0 * FRAC_PI_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Terminal::Top => "top",
            Terminal::Bottom => "bottom",
            Terminal::Left => "left",
            Terminal::Right => "right",
        }
    }
}

/// A (direction, terminal side) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Orientation {
    pub direction: Direction,
    pub terminal: Terminal,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.direction.short(), self.terminal.name())
    }
}

/// All eight orientations: four clockwise (top, bottom, left, right) then the
/// same four counterclockwise.
pub const ALL_ORIENTATIONS: [Orientation; 8] = {
    use Direction::*;
    use Terminal::*;
    [
        Orientation {
            direction: Clockwise,
            terminal: Top,
        },
        Orientation {
            direction: Clockwise,
            terminal: Bottom,
        },
        Orientation {
            direction: Clockwise,
            terminal: Left,
        },
        Orientation {
            direction: Clockwise,
            terminal: Right,
        },
        Orientation {
            direction: Counterclockwise,
            terminal: Top,
        },
        Orientation {
            direction: Counterclockwise,
            terminal: Bottom,
        },
        Orientation {
            direction: Counterclockwise,
            terminal: Left,
        },
        Orientation {
            direction: Counterclockwise,
            terminal: Right,
        },
    ]
};

/// Uniform draw over the eight orientations.
pub fn choose_configuration<R: Rng + ?Sized>(rng: &mut R) -> Orientation {
    ALL_ORIENTATIONS[rng.gen_range(0..ALL_ORIENTATIONS.len())]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionChoice {
    Clockwise,
    Counterclockwise,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalChoice {
    Top,
    Bottom,
    Left,
    Right,
    Random,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clockwise" | "cw" => Ok(Direction::Clockwise),
            "counterclockwise" | "ccw" => Ok(Direction::Counterclockwise),
            other => Err(Error::InvalidParameter(format!(
                "unknown direction {other:?}"
            ))),
        }
    }
}

impl FromStr for Terminal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "top" => Ok(Terminal::Top),
            "bottom" => Ok(Terminal::Bottom),
            "left" => Ok(Terminal::Left),
            "right" => Ok(Terminal::Right),
            other => Err(Error::InvalidParameter(format!(
                "unknown terminal side {other:?}"
            ))),
        }
    }
}

/// Spiral parameters as they appear in a run configuration; direction and
/// terminal side may be left to a seeded draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralSettings {
    pub n_turns: u32,
    pub n_points: usize,
    pub exponent_n: f64,
    pub k_sigmoid: f64,
    pub t0: f64,
    pub direction: DirectionChoice,
    pub terminal: TerminalChoice,
}

impl Default for SpiralSettings {
    fn default() -> Self {
        let c = SpiralConfig::default();
        Self {
            n_turns: c.n_turns,
            n_points: c.n_points,
            exponent_n: c.exponent_n,
            k_sigmoid: c.k_sigmoid,
            t0: c.t0,
            direction: DirectionChoice::Random,
            terminal: TerminalChoice::Random,
        }
    }
}

impl SpiralSettings {
    /// Fixes direction and terminal, drawing whichever is `random`. The RNG is
    /// consumed once whenever either field is random.
    pub fn resolve<R: Rng + ?Sized>(&self, rng: &mut R) -> SpiralConfig {
        let needs_draw =
            self.direction == DirectionChoice::Random || self.terminal == TerminalChoice::Random;
        let drawn = if needs_draw {
            Some(choose_configuration(rng))
        } else {
            None
        };
        let direction = match self.direction {
            DirectionChoice::Clockwise => Direction::Clockwise,
            DirectionChoice::Counterclockwise => Direction::Counterclockwise,
            DirectionChoice::Random => drawn.map(|o| o.direction).unwrap_or(Direction::Clockwise),
        };
        let terminal = match self.terminal {
            TerminalChoice::Top => Terminal::Top,
            TerminalChoice::Bottom => Terminal::Bottom,
            TerminalChoice::Left => Terminal::Left,
            TerminalChoice::Right => Terminal::Right,
            TerminalChoice::Random => drawn.map(|o| o.terminal).unwrap_or(Terminal::Top),
        };
        SpiralConfig {
            n_turns: self.n_turns,
            n_points: self.n_points,
            exponent_n: self.exponent_n,
            k_sigmoid: self.k_sigmoid,
            t0: self.t0,
            direction,
            terminal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralConfig {
    pub n_turns: u32,
    pub n_points: usize,
    pub exponent_n: f64,
    pub k_sigmoid: f64,
    pub t0: f64,
    pub direction: Direction,
    pub terminal: Terminal,
}

impl Default for SpiralConfig {
    fn default() -> Self {
        Self {
            n_turns: 8,
            n_points: 3000,
            exponent_n: 5.0,
            k_sigmoid: 8.0,
            t0: 0.5,
            direction: Direction::Clockwise,
            terminal: Terminal::Top,
        }
    }
}

impl SpiralConfig {
    pub fn with_orientation(mut self, o: Orientation) -> Self {
        self.direction = o.direction;
        self.terminal = o.terminal;
        self
    }

    pub fn orientation(&self) -> Orientation {
        Orientation {
            direction: self.direction,
            terminal: self.terminal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_turns < 1 {
            return bad("spiral needs at least one turn".into());
        }
        if self.n_points < 2 {
            return bad(format!(
                "spiral needs at least 2 points, got {}",
                self.n_points
            ));
        }
        if !(self.exponent_n.is_finite() && self.exponent_n >= 2.0) {
            return bad(format!(
                "superellipse exponent must be >= 2, got {}",
                self.exponent_n
            ));
        }
        if !(self.k_sigmoid.is_finite() && self.k_sigmoid > 0.0) {
            return bad(format!(
                "sigmoid steepness must be positive, got {}",
                self.k_sigmoid
            ));
        }
        if !(self.t0 > 0.0 && self.t0 < 1.0) {
            return bad(format!(
                "sigmoid midpoint must lie in (0, 1), got {}",
                self.t0
            ));
        }
        Ok(())
    }

    /// Logistic radial schedule.
    pub fn radius(&self, t: f64) -> f64 {
        sigmoid(self.k_sigmoid * (t - self.t0))
    }

    fn t(&self, i: usize) -> f64 {
        i as f64 / (self.n_points - 1) as f64
    }
}

/// Center distances and their growth rates along a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub d: Vec<f64>,
    pub d_norm: Vec<f64>,
    pub g: Vec<f64>,
    pub g_norm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiralPath {
    pub bbox: BBox,
    pub orientation: Orientation,
    pub points: Vec<Point2>,
    pub cumulative_arc: Vec<f64>,
    pub radial: RadialProfile,
}

impl SpiralPath {
    pub fn total_length(&self) -> f64 {
        self.cumulative_arc.last().copied().unwrap_or(0.0)
    }
}

/// Superellipse radius `((|dx|/a)^n + (|dy|/b)^n)^(1/n)` of `pt` about `center`.
pub fn superellipse_radius(pt: Point2, center: Point2, a: f64, b: f64, n: f64) -> f64 {
    let xn = ((pt.x - center.x) / a).abs();
    let yn = ((pt.y - center.y) / b).abs();
    (xn.powf(n) + yn.powf(n)).powf(1.0 / n)
}

/// Ratio by which an ellipse point at angle `theta` is scaled to land on the
/// superellipse contour of the same radius.
pub fn superellipse_scale(theta: f64, n: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    1.0 / (c.abs().powf(n) + s.abs().powf(n)).powf(1.0 / n)
}

pub fn generate_spiral(bbox: &BBox, config: &SpiralConfig) -> Result<SpiralPath> {
    config.validate()?;
    let (center, a, b) = bbox.center_and_axes()?;
    let n = config.exponent_n;
    let sign = config.direction.sign();
    let phase = config.terminal.angle();
    let sweep = TAU * f64::from(config.n_turns);

    let points: Vec<Point2> = (0..config.n_points)
        .map(|i| {
            let t = config.t(i);
            let theta = sign * sweep * t + phase;
            let r = config.radius(t);
            let (sin, cos) = theta.sin_cos();
            // preliminary ellipse point
            let x_ell = a * r * cos;
            let y_ell = b * r * sin;
            // superellipse norm of the ellipse point
            let x_norm = (x_ell / a).abs();
            let y_norm = (y_ell / b).abs();
            let phi = (x_norm.powf(n) + y_norm.powf(n)).powf(1.0 / n);
            // rescale onto the contour of radius r
            let scale = r / phi;
            Point2::new(center.x + x_ell * scale, center.y + y_ell * scale)
        })
        .collect();

    let cumulative_arc = cumulative_arc_length(&points);
    let radial = radial_profile(&points, bbox)?;
    Ok(SpiralPath {
        bbox: *bbox,
        orientation: config.orientation(),
        points,
        cumulative_arc,
        radial,
    })
}

pub fn cumulative_arc_length(points: &[Point2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            total += points[i - 1].distance(*p);
        }
        out.push(total);
    }
    out
}

pub fn radial_profile(points: &[Point2], bbox: &BBox) -> Result<RadialProfile> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "radial profile needs at least 3 points, got {}",
            points.len()
        )));
    }
    let center = bbox.center();
    let d: Vec<f64> = points.iter().map(|p| p.distance(center)).collect();
    let d_norm = min_max_normalize(&d);
    let dt = 1.0 / (points.len() - 1) as f64;
    let g = growth_rates(&d_norm, dt);
    let g_norm = min_max_normalize(&g);
    Ok(RadialProfile {
        d,
        d_norm,
        g,
        g_norm,
    })
}

/// Numerical derivative: central differences inside, one-sided at the ends.
pub fn growth_rates(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (values[1] - values[0]) / dt
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) / dt
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Rescales to `[0, 1]`. Input that is constant up to rounding noise maps to
/// all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let scale = lo.abs().max(hi.abs()).max(1.0);
    if !span.is_finite() || span <= 1e-12 * scale {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|v| ((v - lo) / span).clamp(0.0, 1.0))
        .collect()
}
