//! Seeded image perturbations for robustness checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::IntensityImage;

/// Adds uniform noise in `[0, fraction · max)` to every pixel.
pub fn add_uniform_noise(img: &IntensityImage, fraction: f64, seed: u64) -> Result<IntensityImage> {
    if !(fraction >= 0.0 && fraction.is_finite()) {
        return Err(Error::invalid(format!("noise fraction must be non-negative, got {fraction}")));
    }
    if fraction == 0.0 {
        return Ok(img.clone());
    }
    let amp = fraction * img.max();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = img.vals().iter().map(|v| v + amp * rng.gen::<f64>()).collect();
    IntensityImage::new(img.grid(), vals)
}

/// Circularly shifts the image by `dx` columns and `dy` rows.
pub fn shift_image(img: &IntensityImage, dx: i64, dy: i64) -> IntensityImage {
    let n = img.grid().n() as i64;
    let v = img.vals();
    let mut out = vec![0.0; v.len()];
    for j in 0..n {
        for i in 0..n {
            let si = (i - dx).rem_euclid(n);
            let sj = (j - dy).rem_euclid(n);
            out[(j * n + i) as usize] = v[(sj * n + si) as usize];
        }
    }
    IntensityImage::new(img.grid(), out).expect("a shift keeps pixels valid")
}
