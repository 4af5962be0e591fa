//! Box and point primitives in absolute pixel space.
//!
//! Boxes are closed: a point on an edge is inside. Distances used by the
//! membership calibration are normalized so that the center maps to
//! `(d_c, d_e) = (0, 1)` and a corner to `(1, 0)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned rectangle `[x_min, y_min, x_max, y_max]`.
///
/// Deserialization accepts any four numbers; call [`BBox::validate`] (or use
/// [`BBox::new`]) before relying on the ordering invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x_min, y_min, x_max, y_max]: [f64; 4]) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry(format!("non-finite box {coords:?}")));
        }
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::InvalidGeometry(format!("zero-area box {coords:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    /// Center and the two semi-axes (half-width, half-height).
    pub fn center_and_axes(&self) -> Result<(Point2, f64, f64)> {
        self.validate()?;
        Ok((self.center(), self.width() / 2.0, self.height() / 2.0))
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }

    /// Intersection with the image frame `[0, width] x [0, height]`.
    pub fn clip_to(&self, dims: ImageDims) -> BBox {
        let (w, h) = (f64::from(dims.width), f64::from(dims.height));
        BBox {
            x_min: self.x_min.clamp(0.0, w),
            y_min: self.y_min.clamp(0.0, h),
            x_max: self.x_max.clamp(0.0, w),
            y_max: self.y_max.clamp(0.0, h),
        }
    }

    pub fn frame(dims: ImageDims) -> BBox {
        BBox {
            x_min: 0.0,
            y_min: 0.0,
            x_max: f64::from(dims.width),
            y_max: f64::from(dims.height),
        }
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{},{},{},{}]",
            self.x_min, self.y_min, self.x_max, self.y_max
        )
    }
}

impl FromStr for BBox {
    type Err = Error;

    /// Parses `x_min,y_min,x_max,y_max`. Brackets and whitespace are tolerated.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('[').trim_end_matches(']');
        let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Malformed(format!(
                "expected 4 comma-separated numbers, got {:?}",
                s
            )));
        }
        let mut v = [0.0; 4];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part
                .parse::<f64>()
                .map_err(|e| Error::Malformed(format!("box coordinate {part:?}: {e}")))?;
        }
        let b = BBox::from(v);
        b.validate()?;
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

impl fmt::Display for ImageDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for ImageDims {
    type Err = Error;

    /// Parses `WIDTHxHEIGHT`, e.g. `640x480`.
    fn from_str(s: &str) -> Result<Self> {
        let (w, h) = s
            .trim()
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Malformed(format!("expected WIDTHxHEIGHT, got {s:?}")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|e| Error::Malformed(format!("image dimension {t:?}: {e}")))
        };
        ImageDims::new(parse(w)?, parse(h)?)
    }
}

/// Normalized center distance and nearest-edge distance, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedDistances {
    pub d_c_norm: f64,
    pub d_e_norm: f64,
}

/// `d_c` is divided by the half-diagonal, `d_e` by the smaller semi-axis.
pub fn normalized_distances(pt: Point2, bbox: &BBox) -> Result<NormalizedDistances> {
    let (center, a, b) = bbox.center_and_axes()?;
    if !pt.is_finite() || !bbox.contains(pt) {
        return Err(Error::OutOfRegion {
            x: pt.x,
            y: pt.y,
            region: bbox.to_string(),
        });
    }
    let d_c = pt.distance(center) / a.hypot(b);
    let d_e = (pt.x - bbox.x_min)
        .min(bbox.x_max - pt.x)
        .min(pt.y - bbox.y_min)
        .min(bbox.y_max - pt.y)
        / a.min(b);
    Ok(NormalizedDistances {
        d_c_norm: d_c.clamp(0.0, 1.0),
        d_e_norm: d_e.clamp(0.0, 1.0),
    })
}

/// Maps a box expressed on a `[0, alpha]` scale onto absolute pixels, clipped
/// to the image frame.
pub fn convert_relative_to_absolute(bbox_rel: &BBox, dims: ImageDims, alpha: f64) -> Result<BBox> {
    check_alpha(alpha)?;
    bbox_rel.validate()?;
    // multiply before dividing so integral inputs round once
    let (w, h) = (f64::from(dims.width), f64::from(dims.height));
    let abs = BBox {
        x_min: bbox_rel.x_min * w / alpha,
        y_min: bbox_rel.y_min * h / alpha,
        x_max: bbox_rel.x_max * w / alpha,
        y_max: bbox_rel.y_max * h / alpha,
    }
    .clip_to(dims);
    abs.validate()?;
    Ok(abs)
}

/// Forward mapping: absolute pixels onto the `[0, alpha]` scale.
pub fn convert_absolute_to_relative(bbox: &BBox, dims: ImageDims, alpha: f64) -> Result<BBox> {
    check_alpha(alpha)?;
    bbox.validate()?;
    let (w, h) = (f64::from(dims.width), f64::from(dims.height));
    Ok(BBox {
        x_min: bbox.x_min * alpha / w,
        y_min: bbox.y_min * alpha / h,
        x_max: bbox.x_max * alpha / w,
        y_max: bbox.y_max * alpha / h,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scaling factor alpha must be positive, got {alpha}"
        )));
    }
    Ok(())
}

/// Scale accompanying a box given in relative form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeScale {
    pub alpha: f64,
}

/// The JSON box form: `{"bbox": [..], "relative": {"alpha": 1000}}`, with
/// `relative` omitted for absolute boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBoxInput {
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative: Option<RelativeScale>,
}

impl BBoxInput {
    pub fn absolute(bbox: BBox) -> Self {
        Self {
            bbox,
            relative: None,
        }
    }

    pub fn relative(bbox: BBox, alpha: f64) -> Self {
        Self {
            bbox,
            relative: Some(RelativeScale { alpha }),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let input: BBoxInput = serde_json::from_str(s)?;
        input.bbox.validate()?;
        Ok(input)
    }

    /// Absolute box in pixels.
    pub fn resolve(&self, dims: ImageDims) -> Result<BBox> {
        match self.relative {
            Some(RelativeScale { alpha }) => convert_relative_to_absolute(&self.bbox, dims, alpha),
            None => {
                self.bbox.validate()?;
                Ok(self.bbox)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Top,
    Right,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Top, Side::Right, Side::Bottom];
}

/// Bounding-box noise model used by the robustness benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationRegime {
    /// The box is used unchanged.
    Tight,
    /// One uniformly chosen side moves outward by 10% of the box extent.
    MildOneSide,
    /// Every side moves outward by an independent U[5%, 15%] of the extent.
    SeverePerSide,
}

impl PerturbationRegime {
    pub const ALL: [PerturbationRegime; 3] = [
        PerturbationRegime::Tight,
        PerturbationRegime::MildOneSide,
        PerturbationRegime::SeverePerSide,
    ];

    pub const MILD_FRACTION: f64 = 0.10;
    pub const SEVERE_RANGE: (f64, f64) = (0.05, 0.15);

    pub fn name(&self) -> &'static str {
        match self {
            PerturbationRegime::Tight => "tight",
            PerturbationRegime::MildOneSide => "mild_one_side",
            PerturbationRegime::SeverePerSide => "severe_per_side",
        }
    }

    /// Draws the per-side expansion fractions for this regime.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Expansion {
        match self {
            PerturbationRegime::Tight => Expansion::default(),
            PerturbationRegime::MildOneSide => {
                let side = Side::ALL[rng.gen_range(0..4)];
                Expansion::one_side(side, Self::MILD_FRACTION)
            }
            PerturbationRegime::SeverePerSide => {
                let (lo, hi) = Self::SEVERE_RANGE;
                Expansion {
                    left: rng.gen_range(lo..=hi),
                    top: rng.gen_range(lo..=hi),
                    right: rng.gen_range(lo..=hi),
                    bottom: rng.gen_range(lo..=hi),
                }
            }
        }
    }
}

impl fmt::Display for PerturbationRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbationRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tight" => Ok(Self::Tight),
            "mild" | "mild_one_side" => Ok(Self::MildOneSide),
            "severe" | "severe_per_side" => Ok(Self::SeverePerSide),
            other => Err(Error::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

/// Outward expansion of each side as a fraction of the box extent along
/// that side's normal.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Expansion {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl Expansion {
    pub fn one_side(side: Side, fraction: f64) -> Self {
        let mut e = Expansion::default();
        match side {
            Side::Left => e.left = fraction,
            Side::Top => e.top = fraction,
            Side::Right => e.right = fraction,
            Side::Bottom => e.bottom = fraction,
        }
        e
    }

    /// Expanded box before clipping to the image frame.
    pub fn expand(&self, bbox: &BBox) -> BBox {
        let (w, h) = (bbox.width(), bbox.height());
        BBox {
            x_min: bbox.x_min - self.left * w,
            y_min: bbox.y_min - self.top * h,
            x_max: bbox.x_max + self.right * w,
            y_max: bbox.y_max + self.bottom * h,
        }
    }

    pub fn apply(&self, bbox: &BBox, dims: ImageDims) -> BBox {
        self.expand(bbox).clip_to(dims)
    }
}

pub fn perturb_bbox<R: Rng + ?Sized>(
    bbox: &BBox,
    regime: PerturbationRegime,
    dims: ImageDims,
    rng: &mut R,
) -> Result<BBox> {
    bbox.validate()?;
    if !BBox::frame(dims).contains_box(bbox) {
        return Err(Error::InvalidGeometry(format!(
            "box {bbox} does not fit inside a {dims} image"
        )));
    }
    Ok(regime.sample(rng).apply(bbox, dims))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims(w: u32, h: u32) -> ImageDims {
        ImageDims::new(w, h).unwrap()
    }

    #[test]
    fn center_and_axes_examples() {
        let (c, a, b) = BBox::from([0.0, 0.0, 200.0, 100.0])
            .center_and_axes()
            .unwrap();
        assert_eq!((c.x, c.y, a, b), (100.0, 50.0, 100.0, 50.0));

        let (c, a, b) = BBox::from([160.0, 120.0, 480.0, 360.0])
            .center_and_axes()
            .unwrap();
        assert_eq!((c.x, c.y, a, b), (320.0, 240.0, 160.0, 120.0));

        let err = BBox::from([10.0, 10.0, 10.0, 50.0])
            .center_and_axes()
            .unwrap_err();
        assert!(matches!(err, Error::InvalidGeometry(_)));
    }

    #[test]
    fn normalized_distance_extremes() {
        let b = BBox::from([0.0, 0.0, 100.0, 60.0]);
        let nd = normalized_distances(b.center(), &b).unwrap();
        assert_eq!((nd.d_c_norm, nd.d_e_norm), (0.0, 1.0));
        let nd = normalized_distances(Point2::new(100.0, 0.0), &b).unwrap();
        assert_eq!((nd.d_c_norm, nd.d_e_norm), (1.0, 0.0));
        let nd = normalized_distances(Point2::new(30.0, 60.0), &b).unwrap();
        assert_eq!(nd.d_e_norm, 0.0);
    }

    #[test]
    fn normalized_distance_square_example() {
        let b = BBox::from([0.0, 0.0, 100.0, 100.0]);
        let nd = normalized_distances(Point2::new(75.0, 50.0), &b).unwrap();
        assert_abs_diff_eq!(nd.d_c_norm, 0.35355339059327373, epsilon = 1e-12);
        assert_abs_diff_eq!(nd.d_e_norm, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn outside_point_is_rejected() {
        let b = BBox::from([0.0, 0.0, 10.0, 10.0]);
        let err = normalized_distances(Point2::new(10.5, 3.0), &b).unwrap_err();
        assert!(matches!(err, Error::OutOfRegion { .. }));
    }

    #[test]
    fn relative_conversion_examples() {
        let abs = convert_relative_to_absolute(
            &BBox::from([250.0, 250.0, 750.0, 750.0]),
            dims(640, 480),
            1000.0,
        )
        .unwrap();
        assert_eq!(abs, BBox::from([160.0, 120.0, 480.0, 360.0]));

        let full = convert_relative_to_absolute(
            &BBox::from([0.0, 0.0, 1000.0, 1000.0]),
            dims(333, 77),
            1000.0,
        )
        .unwrap();
        assert_eq!(full, BBox::frame(dims(333, 77)));

        let err = convert_relative_to_absolute(&full, dims(10, 10), 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn relative_round_trip_on_large_frame() {
        let d = dims(4096, 4096);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let x0 = rng.gen_range(0..4000) as f64;
            let y0 = rng.gen_range(0..4000) as f64;
            let b = BBox::from([
                x0,
                y0,
                x0 + rng.gen_range(1..=96) as f64,
                y0 + rng.gen_range(1..=96) as f64,
            ]);
            let rel = convert_absolute_to_relative(&b, d, 1000.0).unwrap();
            let back = convert_relative_to_absolute(&rel, d, 1000.0).unwrap();
            for (u, v) in <[f64; 4]>::from(b)
                .iter()
                .zip(<[f64; 4]>::from(back).iter())
            {
                worst = worst.max((u - v).abs());
            }
        }
        assert!(worst <= 0.5, "worst round-trip error {worst}");
    }

    #[test]
    fn bbox_input_json_forms() {
        let abs = BBoxInput::from_json(r#"{"bbox": [1, 2, 3, 4]}"#).unwrap();
        assert_eq!(
            abs.resolve(dims(10, 10)).unwrap(),
            BBox::from([1.0, 2.0, 3.0, 4.0])
        );
        let rel =
            BBoxInput::from_json(r#"{"bbox": [250,250,750,750], "relative": {"alpha": 1000}}"#)
                .unwrap();
        assert_eq!(
            rel.resolve(dims(640, 480)).unwrap(),
            BBox::from([160.0, 120.0, 480.0, 360.0])
        );
        assert!(BBoxInput::from_json(r#"{"bbox": [1, 2, 3, 4], "extra": 1}"#).is_err());
        assert!(BBoxInput::from_json(r#"{"bbox": [1, 2, 3]}"#).is_err());
    }

    #[test]
    fn parse_cli_forms() {
        assert_eq!(
            "10,10,110,110".parse::<BBox>().unwrap(),
            BBox::from([10.0, 10.0, 110.0, 110.0])
        );
        assert!("10,10,10,110".parse::<BBox>().is_err());
        assert_eq!("640x480".parse::<ImageDims>().unwrap(), dims(640, 480));
        assert!("640x0".parse::<ImageDims>().is_err());
    }

    #[test]
    fn perturbation_examples() {
        let b = BBox::from([10.0, 10.0, 110.0, 110.0]);
        let d = dims(640, 480);
        let mild = Expansion::one_side(Side::Left, PerturbationRegime::MILD_FRACTION).apply(&b, d);
        assert_eq!(mild, BBox::from([0.0, 10.0, 110.0, 110.0]));

        assert_eq!(Expansion::default().apply(&b, d), b);

        let severe = Expansion {
            left: 0.05,
            top: 0.10,
            right: 0.15,
            bottom: 0.10,
        }
        .apply(&b, d);
        assert_abs_diff_eq!(severe.x_min, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(severe.y_min, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(severe.x_max, 125.0, epsilon = 1e-12);
        assert_abs_diff_eq!(severe.y_max, 120.0, epsilon = 1e-12);
    }

    #[test]
    fn tight_regime_is_identity() {
        let b = BBox::from([10.0, 10.0, 110.0, 110.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = perturb_bbox(&b, PerturbationRegime::Tight, dims(640, 480), &mut rng).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn mild_regime_moves_exactly_one_side() {
        let d = dims(1000, 1000);
        let b = BBox::from([200.0, 300.0, 500.0, 450.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = [false; 4];
        for _ in 0..200 {
            let out = perturb_bbox(&b, PerturbationRegime::MildOneSide, d, &mut rng).unwrap();
            let moved: Vec<usize> = <[f64; 4]>::from(out)
                .iter()
                .zip(<[f64; 4]>::from(b).iter())
                .enumerate()
                .filter(|(_, (u, v))| u != v)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(moved.len(), 1);
            seen[moved[0]] = true;
            assert!(out.contains_box(&b));
        }
        assert_eq!(seen, [true; 4]);
    }

    #[test]
    fn box_outside_frame_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = perturb_bbox(
            &BBox::from([10.0, 10.0, 700.0, 20.0]),
            PerturbationRegime::Tight,
            dims(640, 480),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidGeometry(_)));
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (
            -500.0..500.0f64,
            -500.0..500.0f64,
            0.01..400.0f64,
            0.01..400.0f64,
        )
            .prop_map(|(x, y, w, h)| BBox::from([x, y, x + w, y + h]))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn normalized_distances_stay_in_unit_range(b in arb_box(), u in 0.0..=1.0f64, v in 0.0..=1.0f64) {
            let p = Point2::new(b.x_min + u * b.width(), b.y_min + v * b.height());
            let p = Point2::new(p.x.clamp(b.x_min, b.x_max), p.y.clamp(b.y_min, b.y_max));
            let nd = normalized_distances(p, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&nd.d_c_norm));
            prop_assert!((0.0..=1.0).contains(&nd.d_e_norm));
        }

        #[test]
        fn severe_perturbation_contains_input(
            x in 0.0..300.0f64, y in 0.0..300.0f64, w in 1.0..300.0f64, h in 1.0..300.0f64, seed in any::<u64>()
        ) {
            let d = ImageDims::new(640, 640).unwrap();
            let b = BBox::from([x, y, x + w, y + h]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = PerturbationRegime::SeverePerSide.sample(&mut rng);
            let raw = e.expand(&b);
            prop_assert!(raw.x_min < b.x_min && raw.y_min < b.y_min);
            prop_assert!(raw.x_max > b.x_max && raw.y_max > b.y_max);
            prop_assert!(e.apply(&b, d).contains_box(&b));
            for f in [e.left, e.top, e.right, e.bottom] {
                prop_assert!((0.05..=0.15).contains(&f));
            }
        }

        #[test]
        fn relative_conversion_is_monotone(
            a in 0.0..1000.0f64, b in 0.0..1000.0f64, w in 1u32..5000, h in 1u32..5000
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let d = ImageDims::new(w, h).unwrap();
            let s = f64::from(w) / 1000.0;
            prop_assert!(lo * s <= hi * s);
            let bx = BBox::from([lo, lo, hi + 1.0, hi + 1.0]);
            if let Ok(abs) = convert_relative_to_absolute(&bx, d, 1000.0) {
                prop_assert!(abs.x_min <= abs.x_max);
                prop_assert!(BBox::frame(d).contains_box(&abs));
            }
        }
    }
}
