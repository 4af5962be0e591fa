use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Label, Oracle, OracleQuery, TokenProb, Verdict};
use crate::error::{Error, Result};
use crate::scene::Scene;

/// Upper bound of the synthetic "wrong answer" mass.
const MAX_DOUBT: f64 = 0.2;

/// Answers from a ground-truth mask. With probability `noise` the answer is
/// flipped. Confidence is `1 - u` with `u ~ U[0, 0.2]`, which is synthetic
/// and carries no information.
pub fn mask_oracle<R: Rng + ?Sized>(
    query: &OracleQuery,
    scene: &Scene,
    noise: f64,
    rng: &mut R,
) -> Result<Verdict> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidParameter(format!(
            "noise must lie in [0, 1], got {noise}"
        )));
    }
    let inside = scene.contains(query.point)?;
    let flip = rng.gen::<f64>() < noise;
    let u = rng.gen_range(0.0..=MAX_DOUBT);
    let label = if inside != flip {
        Label::Positive
    } else {
        Label::Negative
    };
    let (p_yes, p_no) = match label {
        Label::Positive => (1.0 - u, u),
        Label::Negative => (u, 1.0 - u),
    };
    Ok(Verdict {
        label,
        confidence: 1.0 - u,
        p_yes,
        p_no,
        raw_tokens: vec![TokenProb::new("yes", p_yes), TokenProb::new("no", p_no)],
    })
}

/// [`mask_oracle`] bound to a scene with its own random stream.
#[derive(Debug, Clone)]
pub struct MaskOracle<'s> {
    scene: &'s Scene,
    noise: f64,
    rng: ChaCha8Rng,
}

impl<'s> MaskOracle<'s> {
    pub fn new(scene: &'s Scene, noise: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::InvalidParameter(format!(
                "noise must lie in [0, 1], got {noise}"
            )));
        }
        Ok(Self { scene, noise, rng })
    }
}

impl Oracle for MaskOracle<'_> {
    fn query(&mut self, query: &OracleQuery) -> Result<Verdict> {
        mask_oracle(query, self.scene, self.noise, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ImageDims, Point2};
    use crate::scene::Shape;
    use crate::verification::{MarkerShape, MarkerSpec};
    use rand::SeedableRng;

    fn scene() -> Scene {
        let d = ImageDims::new(40, 30).unwrap();
        let rect = Shape::Rectangle {
            x0: 10,
            y0: 10,
            x1: 30,
            y1: 20,
        };
        Scene::from_bitmap("s", d, rect.rasterize(d), "the box").unwrap()
    }

    fn query(x: f64, y: f64) -> OracleQuery {
        OracleQuery {
            image_ref: "mem://s".into(),
            expression: "the box".into(),
            point: Point2::new(x, y),
            marker: MarkerSpec::new(MarkerShape::Star, "red", 16).unwrap(),
            top_k: 5,
        }
    }

    #[test]
    fn noiseless_containment() {
        let s = scene();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let v = mask_oracle(&query(15.5, 12.0), &s, 0.0, &mut rng).unwrap();
            assert_eq!(v.label, Label::Positive);
            assert!(v.confidence >= 0.8 && v.confidence <= 1.0);
            assert_eq!(v.confidence, v.p_yes);
            let v = mask_oracle(&query(2.0, 2.0), &s, 0.0, &mut rng).unwrap();
            assert_eq!(v.label, Label::Negative);
            assert!(v.p_yes + v.p_no <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn full_noise_always_flips() {
        let s = scene();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            assert_eq!(
                mask_oracle(&query(15.5, 12.0), &s, 1.0, &mut rng)
                    .unwrap()
                    .label,
                Label::Negative
            );
            assert_eq!(
                mask_oracle(&query(2.0, 2.0), &s, 1.0, &mut rng)
                    .unwrap()
                    .label,
                Label::Positive
            );
        }
    }

    #[test]
    fn rejects_points_off_the_image_and_bad_noise() {
        let s = scene();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(matches!(
            mask_oracle(&query(41.0, 2.0), &s, 0.0, &mut rng),
            Err(Error::OutOfRegion { .. })
        ));
        assert!(mask_oracle(&query(1.0, 2.0), &s, 1.5, &mut rng).is_err());
        assert!(MaskOracle::new(&s, -0.1, ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
