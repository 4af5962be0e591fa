//! Benchmark scenes: binary masks stored as run-length encodings, their tight
//! boxes, and a seeded synthetic scene generator.
//!
//! Masks use row-major runs starting with a (possibly empty) background run.
//! Pixel `(col, row)` covers `[col, col + 1) x [row, row + 1)`, so the tight
//! box of a mask is `[min_col, min_row, max_col + 1, max_row + 1]`.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, ImageDims, Point2};

/// Row-major run-length encoded binary mask, `{"size": [H, W], "counts": [..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rle {
    pub size: [u32; 2],
    pub counts: Vec<u64>,
}

impl Rle {
    pub fn height(&self) -> u32 {
        self.size[0]
    }

    pub fn width(&self) -> u32 {
        self.size[1]
    }

    fn pixel_count(&self) -> u64 {
        u64::from(self.size[0]) * u64::from(self.size[1])
    }

    /// Encodes a row-major bitmap of `height * width` pixels.
    pub fn encode(bitmap: &[bool], height: u32, width: u32) -> Result<Self> {
        let n = u64::from(height) * u64::from(width);
        if bitmap.len() as u64 != n {
            return Err(Error::Malformed(format!(
                "bitmap has {} pixels, expected {height}x{width}",
                bitmap.len()
            )));
        }
        Ok(Rle {
            size: [height, width],
            counts: runs(bitmap.iter().copied()),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut total: u64 = 0;
        for &c in &self.counts {
            total = total
                .checked_add(c)
                .ok_or_else(|| Error::Malformed("run lengths overflow".into()))?;
        }
        if total != self.pixel_count() {
            return Err(Error::Malformed(format!(
                "runs cover {total} pixels, mask is {}x{} = {}",
                self.size[0],
                self.size[1],
                self.pixel_count()
            )));
        }
        Ok(())
    }

    /// Row-major bitmap.
    pub fn decode(&self) -> Result<Vec<bool>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.pixel_count() as usize);
        let mut value = false;
        for &c in &self.counts {
            out.extend(std::iter::repeat_n(value, c as usize));
            value = !value;
        }
        Ok(out)
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }

    /// Tight pixel-extent box of the foreground, `None` when empty.
    pub fn tight_bbox(&self) -> Result<Option<BBox>> {
        self.validate()?;
        let w = u64::from(self.width());
        let (mut c0, mut r0, mut c1, mut r1) = (u64::MAX, u64::MAX, 0u64, 0u64);
        let mut any = false;
        let mut idx = 0u64;
        for (i, &c) in self.counts.iter().enumerate() {
            if i % 2 == 1 && c > 0 {
                any = true;
                let (first, last) = (idx, idx + c - 1);
                let (fr, lr) = (first / w, last / w);
                r0 = r0.min(fr);
                r1 = r1.max(lr);
                if fr != lr {
                    c0 = 0;
                    c1 = w - 1;
                } else {
                    c0 = c0.min(first % w);
                    c1 = c1.max(last % w);
                }
            }
            idx += c;
        }
        Ok(any.then(|| BBox {
            x_min: c0 as f64,
            y_min: r0 as f64,
            x_max: (c1 + 1) as f64,
            y_max: (r1 + 1) as f64,
        }))
    }

    /// Builds from column-major runs (the COCO layout).
    pub fn from_coco_counts(height: u32, width: u32, counts: &[u64]) -> Result<Self> {
        let col_major = Rle {
            size: [height, width],
            counts: counts.to_vec(),
        };
        let bits = col_major.decode()?;
        let (h, w) = (height as usize, width as usize);
        let row_major: Vec<bool> = (0..h * w).map(|i| bits[(i % w) * h + i / w]).collect();
        Rle::encode(&row_major, height, width)
    }

    /// Column-major runs (the COCO layout).
    pub fn to_coco_counts(&self) -> Result<Vec<u64>> {
        let bits = self.decode()?;
        let (h, w) = (self.height() as usize, self.width() as usize);
        Ok(runs((0..h * w).map(|i| bits[(i % h) * w + i / h])))
    }
}

fn runs(bits: impl Iterator<Item = bool>) -> Vec<u64> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for b in bits {
        if b != current {
            counts.push(run);
            run = 0;
            current = b;
        }
        run += 1;
    }
    counts.push(run);
    counts
}

/// Compact ASCII form of COCO run counts (delta-coded 5-bit groups offset by
/// 48), as produced by the reference mask API.
pub fn coco_string_encode(counts: &[u64]) -> String {
    let mut out = String::new();
    for (i, &c) in counts.iter().enumerate() {
        let mut x = c as i64;
        if i > 2 {
            x -= counts[i - 2] as i64;
        }
        loop {
            let mut ch = (x & 0x1f) as u8;
            x >>= 5;
            let more = if ch & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                ch |= 0x20;
            }
            out.push(char::from(ch + 48));
            if !more {
                break;
            }
        }
    }
    out
}

pub fn coco_string_decode(s: &str) -> Result<Vec<u64>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<u64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0u32;
        loop {
            let byte = *bytes
                .get(p)
                .ok_or_else(|| Error::Malformed("truncated run-length string".into()))?;
            if !(48..48 + 64).contains(&byte) {
                return Err(Error::Malformed(format!(
                    "invalid run-length character {byte:#x}"
                )));
            }
            if k >= 12 {
                return Err(Error::Malformed("run-length group too long".into()));
            }
            let c = i64::from(byte - 48);
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        let m = counts.len();
        if m > 2 {
            x = x
                .checked_add(counts[m - 2] as i64)
                .ok_or_else(|| Error::Malformed("run length overflow".into()))?;
        }
        if x < 0 {
            return Err(Error::Malformed(format!("negative run length {x}")));
        }
        counts.push(x as u64);
    }
    Ok(counts)
}

/// One benchmark instance: image size, ground-truth mask, its tight box and
/// the referring expression.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub scene_id: String,
    pub dims: ImageDims,
    pub mask: Rle,
    pub gt_bbox: BBox,
    pub expression: String,
    #[serde(skip)]
    bitmap: OnceLock<Vec<bool>>,
}

impl PartialEq for Scene {
    fn eq(&self, other: &Self) -> bool {
        self.scene_id == other.scene_id
            && self.dims == other.dims
            && self.mask == other.mask
            && self.gt_bbox == other.gt_bbox
            && self.expression == other.expression
    }
}

impl Scene {
    /// Builds a scene from a row-major bitmap; the ground-truth box is
    /// computed from the mask.
    pub fn from_bitmap(
        scene_id: impl Into<String>,
        dims: ImageDims,
        bitmap: Vec<bool>,
        expression: impl Into<String>,
    ) -> Result<Self> {
        let mask = Rle::encode(&bitmap, dims.height, dims.width)?;
        let gt_bbox = mask
            .tight_bbox()?
            .ok_or_else(|| Error::Malformed("scene mask has no foreground".into()))?;
        let scene = Scene {
            scene_id: scene_id.into(),
            dims,
            mask,
            gt_bbox,
            expression: expression.into(),
            bitmap: OnceLock::new(),
        };
        let _ = scene.bitmap.set(bitmap);
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.width == 0 || self.dims.height == 0 {
            return Err(Error::Malformed(format!(
                "scene {}: empty image",
                self.scene_id
            )));
        }
        if self.mask.size != [self.dims.height, self.dims.width] {
            return Err(Error::Malformed(format!(
                "scene {}: mask size {:?} does not match image {}",
                self.scene_id, self.mask.size, self.dims
            )));
        }
        let tight = self.mask.tight_bbox()?.ok_or_else(|| {
            Error::Malformed(format!("scene {}: mask has no foreground", self.scene_id))
        })?;
        if tight != self.gt_bbox {
            return Err(Error::Malformed(format!(
                "scene {}: gt_bbox {} is not the tight mask box {}",
                self.scene_id, self.gt_bbox, tight
            )));
        }
        Ok(())
    }

    fn bitmap(&self) -> Result<&Vec<bool>> {
        if let Some(b) = self.bitmap.get() {
            return Ok(b);
        }
        let decoded = self.mask.decode()?;
        Ok(self.bitmap.get_or_init(|| decoded))
    }

    /// Mask value at the pixel containing `pt`. Points on the right or bottom
    /// frame edge map to the last column or row.
    pub fn contains(&self, pt: Point2) -> Result<bool> {
        let (w, h) = (self.dims.width, self.dims.height);
        if !pt.is_finite() || !BBox::frame(self.dims).contains(pt) {
            return Err(Error::OutOfRegion {
                x: pt.x,
                y: pt.y,
                region: format!("image {}", self.dims),
            });
        }
        let col = (pt.x.floor() as u32).min(w - 1) as usize;
        let row = (pt.y.floor() as u32).min(h - 1) as usize;
        Ok(self.bitmap()?[row * w as usize + col])
    }
}

/// Parses and validates a scene file (a JSON list of scenes).
pub fn parse_scenes(json: &str) -> Result<Vec<Scene>> {
    let scenes: Vec<Scene> = serde_json::from_str(json)?;
    for s in &scenes {
        s.validate()?;
    }
    Ok(scenes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Ellipse,
    Rectangle,
    BlobPolygon,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [
        ShapeKind::Ellipse,
        ShapeKind::Rectangle,
        ShapeKind::BlobPolygon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::Rectangle => "rectangle",
            ShapeKind::BlobPolygon => "blob",
        }
    }
}

impl std::str::FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipse" => Ok(ShapeKind::Ellipse),
            "rectangle" => Ok(ShapeKind::Rectangle),
            "blob" | "blob-polygon" | "blob_polygon" => Ok(ShapeKind::BlobPolygon),
            other => Err(Error::InvalidParameter(format!("unknown shape {other:?}"))),
        }
    }
}

/// A concrete filled shape in image coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Ellipse {
        center: Point2,
        rx: f64,
        ry: f64,
    },
    /// Pixel range `[x0, x1) x [y0, y1)`.
    Rectangle {
        x0: u32,
        y0: u32,
        x1: u32,
        y1: u32,
    },
    Polygon {
        vertices: Vec<Point2>,
    },
}

impl Shape {
    pub fn kind(&self) -> ShapeKind {
        match self {
            Shape::Ellipse { .. } => ShapeKind::Ellipse,
            Shape::Rectangle { .. } => ShapeKind::Rectangle,
            Shape::Polygon { .. } => ShapeKind::BlobPolygon,
        }
    }

    /// Whether the pixel `(col, row)` belongs to the shape, judged at the
    /// pixel center.
    pub fn covers(&self, col: u32, row: u32) -> bool {
        let (x, y) = (f64::from(col) + 0.5, f64::from(row) + 0.5);
        match self {
            Shape::Ellipse { center, rx, ry } => {
                let (u, v) = ((x - center.x) / rx, (y - center.y) / ry);
                u * u + v * v <= 1.0
            }
            Shape::Rectangle { x0, y0, x1, y1 } => {
                col >= *x0 && col < *x1 && row >= *y0 && row < *y1
            }
            Shape::Polygon { vertices } => point_in_polygon(Point2::new(x, y), vertices),
        }
    }

    pub fn rasterize(&self, dims: ImageDims) -> Vec<bool> {
        let mut out = Vec::with_capacity(dims.area() as usize);
        for row in 0..dims.height {
            for col in 0..dims.width {
                out.push(self.covers(col, row));
            }
        }
        out
    }
}

/// Even-odd rule.
fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub const AREA_FRACTION_RANGE: (f64, f64) = (0.05, 0.60);

fn random_shape<R: Rng + ?Sized>(kind: ShapeKind, dims: ImageDims, rng: &mut R) -> Shape {
    let (w, h) = (f64::from(dims.width), f64::from(dims.height));
    match kind {
        ShapeKind::Ellipse => {
            let rx = rng.gen_range(0.10 * w..=0.45 * w);
            let ry = rng.gen_range(0.10 * h..=0.45 * h);
            let center = Point2::new(rng.gen_range(rx..=w - rx), rng.gen_range(ry..=h - ry));
            Shape::Ellipse { center, rx, ry }
        }
        ShapeKind::Rectangle => {
            let rw = rng
                .gen_range((0.15 * w).ceil() as u32..=(0.9 * w) as u32)
                .max(1);
            let rh = rng
                .gen_range((0.15 * h).ceil() as u32..=(0.9 * h) as u32)
                .max(1);
            let x0 = rng.gen_range(0..=dims.width - rw);
            let y0 = rng.gen_range(0..=dims.height - rh);
            Shape::Rectangle {
                x0,
                y0,
                x1: x0 + rw,
                y1: y0 + rh,
            }
        }
        ShapeKind::BlobPolygon => {
            let radius = rng.gen_range(0.2..=0.48) * w.min(h);
            let center = Point2::new(
                rng.gen_range(radius..=w - radius),
                rng.gen_range(radius..=h - radius),
            );
            let m = rng.gen_range(8..=16);
            let vertices = (0..m)
                .map(|i| {
                    let theta = TAU * (i as f64 + rng.gen_range(-0.3..=0.3)) / m as f64;
                    let r = radius * rng.gen_range(0.45..=1.0);
                    Point2::new(center.x + r * theta.cos(), center.y + r * theta.sin())
                })
                .collect();
            Shape::Polygon { vertices }
        }
    }
}

fn describe(kind: ShapeKind, bbox: &BBox, dims: ImageDims) -> String {
    let c = bbox.center();
    let horiz = match c.x / f64::from(dims.width) {
        f if f < 1.0 / 3.0 => "left",
        f if f < 2.0 / 3.0 => "center",
        _ => "right",
    };
    let vert = match c.y / f64::from(dims.height) {
        f if f < 1.0 / 3.0 => "top",
        f if f < 2.0 / 3.0 => "middle",
        _ => "bottom",
    };
    format!("the {} at the {vert} {horiz}", kind.name())
}

/// Draws a shape of an allowed kind whose filled area is within
/// [`AREA_FRACTION_RANGE`] of the frame.
pub fn random_scene_shape<R: Rng + ?Sized>(
    shapes: &[ShapeKind],
    dims: ImageDims,
    rng: &mut R,
) -> Result<(Shape, Vec<bool>)> {
    let kind = *shapes
        .choose(rng)
        .ok_or_else(|| Error::InvalidParameter("no scene shapes selected".into()))?;
    let (lo, hi) = AREA_FRACTION_RANGE;
    for _ in 0..1000 {
        let shape = random_shape(kind, dims, rng);
        let bitmap = shape.rasterize(dims);
        let frac = bitmap.iter().filter(|&&b| b).count() as f64 / dims.area() as f64;
        if (lo..=hi).contains(&frac) {
            return Ok((shape, bitmap));
        }
    }
    Err(Error::InvalidParameter(format!(
        "could not place a {} covering 5-60% of a {dims} frame",
        kind.name()
    )))
}

pub fn generate_synthetic_scenes<R: Rng + ?Sized>(
    count: usize,
    shapes: &[ShapeKind],
    dims: ImageDims,
    rng: &mut R,
) -> Result<Vec<Scene>> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "scene count must be at least 1".into(),
        ));
    }
    if dims.width < 8 || dims.height < 8 {
        return Err(Error::InvalidParameter(format!(
            "frame {dims} too small for synthetic scenes"
        )));
    }
    (0..count)
        .map(|i| {
            let (shape, bitmap) = random_scene_shape(shapes, dims, rng)?;
            let mut scene =
                Scene::from_bitmap(format!("scene-{i:04}"), dims, bitmap, String::new())?;
            scene.expression = describe(shape.kind(), &scene.gt_bbox, dims);
            Ok(scene)
        })
        .collect()
}
