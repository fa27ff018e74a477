//! Random affine augmentation of square images.
//!
//! A transform is a shift, then a rotation about the image center, then a
//! horizontal shear. Output pixels are resampled from the source with bilinear
//! interpolation; samples falling outside the source read as zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub max_shift_px: u32,
    pub max_rotation_deg: f64,
    pub max_shear: f64,
    pub copies_per_sample: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            max_shift_px: 2,
            max_rotation_deg: 15.0,
            max_shear: 0.1,
            copies_per_sample: 1,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// No transform and no copies.
    pub fn disabled() -> Self {
        AugmentConfig {
            max_shift_px: 0,
            max_rotation_deg: 0.0,
            max_shear: 0.0,
            copies_per_sample: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.max_rotation_deg) || !ok(self.max_shear) {
            return Err(Error::invalid(
                "rotation and shear bounds must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// One concrete transform.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Affine {
    pub shift_x: f64,
    pub shift_y: f64,
    pub rotation_rad: f64,
    pub shear: f64,
}

impl Affine {
    fn sample<R: Rng + ?Sized>(config: &AugmentConfig, rng: &mut R) -> Self {
        let mut sym = |bound: f64| {
            if bound > 0.0 {
                rng.random_range(-bound..=bound)
            } else {
                0.0
            }
        };
        let shift = f64::from(config.max_shift_px);
        Affine {
            shift_x: sym(shift),
            shift_y: sym(shift),
            rotation_rad: sym(config.max_rotation_deg).to_radians(),
            shear: sym(config.max_shear),
        }
    }

    /// Resamples a `side × side` row-major image under this transform.
    pub fn apply(&self, image: &[f64], side: usize) -> Vec<f64> {
        let center = (side as f64 - 1.0) / 2.0;
        let (sin, cos) = self.rotation_rad.sin_cos();
        let mut out = vec![0.0; side * side];
        for row in 0..side {
            for col in 0..side {
                // invert shear, then rotation, then shift
                let y = row as f64 - center;
                let x = col as f64 - center - self.shear * y;
                let (xr, yr) = (cos * x + sin * y, -sin * x + cos * y);
                let sx = xr - self.shift_x + center;
                let sy = yr - self.shift_y + center;
                out[row * side + col] = bilinear(image, side, sx, sy).clamp(0.0, 1.0);
            }
        }
        out
    }
}

fn bilinear(image: &[f64], side: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let at = |r: f64, c: f64| -> f64 {
        if r < 0.0 || c < 0.0 || r >= side as f64 || c >= side as f64 {
            0.0
        } else {
            image[r as usize * side + c as usize]
        }
    };
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1.0) * fx;
    let bottom = at(y0 + 1.0, x0) * (1.0 - fx) + at(y0 + 1.0, x0 + 1.0) * fx;
    top * (1.0 - fy) + bottom * fy
}

fn square_side(len: usize) -> Result<usize> {
    let side = (len as f64).sqrt().round() as usize;
    if side * side == len {
        Ok(side)
    } else {
        Err(Error::invalid(format!("feature length {len} is not a square image")))
    }
}

/// Applies one randomly drawn transform to a square-image sample.
pub fn augment<R: Rng + ?Sized>(sample: &Sample, config: &AugmentConfig, rng: &mut R) -> Result<Sample> {
    let side = square_side(sample.features.len())?;
    let t = Affine::sample(config, rng);
    Ok(Sample::new(t.apply(&sample.features, side), sample.label))
}

/// Originals followed by `copies_per_sample` augmented copies of each sample.
/// Copy `k` of sample `i` draws from its own stream seeded by `(seed, i, k)`.
pub fn build_augmented_dataset(data: &Dataset, config: &AugmentConfig) -> Result<Dataset> {
    config.validate()?;
    if config.copies_per_sample == 0 {
        return Ok(data.clone());
    }
    square_side(data.feature_dim())?;
    let mut samples = data.samples().to_vec();
    samples.reserve(data.len() * config.copies_per_sample);
    for (i, s) in data.iter().enumerate() {
        for k in 0..config.copies_per_sample {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, i as u64, k as u64));
            samples.push(augment(s, config, &mut rng)?);
        }
    }
    Dataset::new(samples, data.feature_dim(), data.class_count())
}
