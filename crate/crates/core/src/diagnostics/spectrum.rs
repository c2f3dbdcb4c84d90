use std::f64::consts::TAU;

use num_complex::Complex64;

use super::filter::median;
use crate::error::{Error, Result};
use crate::fft;
use crate::field::{bilinear, moments, to_intensity, ComplexField, IntensityImage};
use crate::par;

/// Central-dip ratio below which an image counts as a doughnut.
pub const DOUGHNUT_DIP: f64 = 0.1;

/// Power fraction per azimuthal order.
///
/// `weights[k]` belongs to ℓ = k − max_order. Orders outside the window are
/// lumped into `outside`, so `Σ weights + outside = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OamSpectrum {
    pub max_order: i32,
    pub weights: Vec<f64>,
    pub outside: f64,
}

impl OamSpectrum {
    pub fn weight(&self, ell: i32) -> f64 {
        if ell.abs() > self.max_order {
            return 0.0;
        }
        self.weights[(ell + self.max_order) as usize]
    }

    /// Strongest order; near-ties go to the smaller |ℓ|, then to the positive sign.
    pub fn dominant(&self) -> i32 {
        let mut best = 0;
        let mut bw = self.weight(0);
        for m in 1..=self.max_order {
            for ell in [m, -m] {
                let w = self.weight(ell);
                if w > bw * (1.0 + 1e-9) {
                    best = ell;
                    bw = w;
                }
            }
        }
        best
    }
}

fn spectrum_about(f: &ComplexField, max_order: i32, centre: (f64, f64)) -> OamSpectrum {
    let g = f.grid();
    let n = g.n();
    let pitch = g.pitch_mm();
    let rings = n / 2 - 1;
    let r_max = (rings as f64 - 0.5) * pitch;
    let na = ((TAU * r_max / pitch).ceil() as usize).next_power_of_two().max(256);
    let src = f.amp();
    let mut samples = vec![Complex64::new(0.0, 0.0); rings * na];
    par::for_each_row(&mut samples, na, |k, row| {
        let r = (k as f64 + 0.5) * pitch;
        for (q, v) in row.iter_mut().enumerate() {
            let phi = TAU * q as f64 / na as f64;
            let fi = g.index_of(centre.0 + r * phi.cos());
            let fj = g.index_of(centre.1 + r * phi.sin());
            *v = bilinear(src, n, fi, fj);
        }
    });
    fft::rows_forward(&mut samples, na);
    let width = 2 * max_order as usize + 1;
    // per-ring: in-window weights then the ring total, each scaled by r
    let per_ring = par::map_indices(rings, |k| {
        let r = (k as f64 + 0.5) * pitch;
        let row = &samples[k * na..(k + 1) * na];
        let norm = 1.0 / (na * na) as f64;
        let mut w = vec![0.0; width + 1];
        for ell in -max_order..=max_order {
            let bin = ell.rem_euclid(na as i32) as usize;
            w[(ell + max_order) as usize] = row[bin].norm_sqr() * norm * r;
        }
        w[width] = row.iter().map(|c| c.norm_sqr()).sum::<f64>() * norm * r;
        w
    });
    let mut acc = vec![0.0; width + 1];
    for w in &per_ring {
        for (a, b) in acc.iter_mut().zip(w) {
            *a += b;
        }
    }
    let total = acc[width];
    if total == 0.0 {
        return OamSpectrum { max_order, weights: vec![0.0; width], outside: 0.0 };
    }
    let weights: Vec<f64> = acc[..width].iter().map(|w| w / total).collect();
    let outside = (1.0 - weights.iter().sum::<f64>()).max(0.0);
    OamSpectrum { max_order, weights, outside }
}

fn centroid(f: &ComplexField) -> Option<(f64, f64)> {
    let img = to_intensity(f);
    moments(img.grid(), img.vals()).map(|m| (m[0], m[1]))
}

/// Azimuthal-order decomposition about the grid centre.
pub fn oam_spectrum(f: &ComplexField, max_order: i32) -> Result<OamSpectrum> {
    if max_order < 1 {
        return Err(Error::invalid(format!("max_order must be at least 1, got {max_order}")));
    }
    if let Some((cx, cy)) = centroid(f) {
        let off = cx.hypot(cy);
        if off > 0.05 * f.grid().extent_mm() {
            return Err(Error::invalid(format!(
                "field centroid is {off:.4} mm off axis; recentre before projecting"
            )));
        }
    }
    Ok(spectrum_about(f, max_order, (0.0, 0.0)))
}

/// Dominant azimuthal order about the field's own centroid.
pub fn dominant_charge(f: &ComplexField) -> i32 {
    match centroid(f) {
        Some(c) => spectrum_about(f, 8, c).dominant(),
        None => 0,
    }
}

/// Mean of the 2×2 pixels at the beam centre over the image maximum.
///
/// The centre is the centroid of the intensity standing more than 10 % of
/// the peak above the median background, so a ring's own hole is sampled
/// even when the beam is a few pixels off the grid centre. For a centred
/// beam these are the four central pixels of the grid.
pub fn central_dip(img: &IntensityImage) -> Result<f64> {
    let max = img.max();
    if max <= 0.0 {
        return Err(Error::DegenerateImage("image is all zero".into()));
    }
    let n = img.grid().n();
    let v = img.vals();
    let bg = median(v);
    let cut = bg + 0.1 * (max - bg);
    let (mut s, mut si, mut sj) = (0.0, 0.0, 0.0);
    for (k, &x) in v.iter().enumerate() {
        let w = (x - cut).max(0.0);
        s += w;
        si += w * (k % n) as f64;
        sj += w * (k / n) as f64;
    }
    let corner = |c: f64| ((c - 0.5).round().max(0.0) as usize).min(n - 2);
    let (i, j) = if s > 0.0 { (corner(si / s), corner(sj / s)) } else { (n / 2 - 1, n / 2 - 1) };
    let c = (img.at(i, j) + img.at(i + 1, j) + img.at(i, j + 1) + img.at(i + 1, j + 1)) / 4.0;
    Ok(c / max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_grid;
    use crate::sources::{apply_spiral_mask, gaussian, lg_mode, staircase_purity, BeamSpec, MaskModel, MaskVariant};

    fn grid() -> crate::field::GridSpec {
        make_grid(256, 8.0).unwrap()
    }

    #[test]
    fn lg_and_gaussian_purity() {
        let g = gaussian(grid(), BeamSpec::new(1.0, 780.0, 0)).unwrap();
        let s = oam_spectrum(&g, 8).unwrap();
        assert!(s.weight(0) >= 0.9999);
        assert!((s.weights.iter().sum::<f64>() + s.outside - 1.0).abs() < 1e-9);
        let l = lg_mode(grid(), BeamSpec::new(1.0, 780.0, 1)).unwrap();
        assert!(oam_spectrum(&l, 8).unwrap().weight(1) >= 0.999);
        let l = lg_mode(grid(), BeamSpec::new(1.0, 780.0, -2)).unwrap();
        assert!(oam_spectrum(&l, 8).unwrap().weight(-2) >= 0.999);
        assert_eq!(dominant_charge(&l), -2);
    }

    #[test]
    fn masked_gaussians() {
        let g = gaussian(grid(), BeamSpec::new(1.0, 780.0, 0)).unwrap();
        let ideal = apply_spiral_mask(&g, MaskModel::new(MaskVariant::IdealRamp, 1)).unwrap();
        assert!(oam_spectrum(&ideal, 8).unwrap().weight(1) >= 0.999);
        let oct = apply_spiral_mask(&g, MaskModel::new(MaskVariant::Octants(8), 1)).unwrap();
        let w = oam_spectrum(&oct, 8).unwrap().weight(1);
        assert!((w - staircase_purity(8, 1)).abs() < 0.01, "{w}");
    }

    #[test]
    fn staircase_purity_increases_with_steps() {
        let g = gaussian(grid(), BeamSpec::new(1.0, 780.0, 0)).unwrap();
        let ws: Vec<f64> = [4, 8, 16, 64]
            .iter()
            .map(|&n| {
                let m = apply_spiral_mask(&g, MaskModel::new(MaskVariant::Octants(n), 1)).unwrap();
                oam_spectrum(&m, 8).unwrap().weight(1)
            })
            .collect();
        assert!(ws.windows(2).all(|w| w[1] > w[0]), "{ws:?}");
    }

    #[test]
    fn bad_order_and_offset_field() {
        let g = gaussian(grid(), BeamSpec::new(1.0, 780.0, 0)).unwrap();
        assert!(oam_spectrum(&g, 0).is_err());
        let shifted = ComplexField::from_fn(grid(), 780.0, |x, y| {
            Complex64::new((-((x - 1.5).powi(2) + y * y)).exp(), 0.0)
        })
        .unwrap();
        assert!(oam_spectrum(&shifted, 4).is_err());
        assert_eq!(dominant_charge(&shifted), 0);
    }

    #[test]
    fn ties_prefer_small_then_positive() {
        let s = OamSpectrum { max_order: 2, weights: vec![0.25, 0.0, 0.0, 0.25, 0.25], outside: 0.25 };
        assert_eq!(s.dominant(), 1);
        let s = OamSpectrum { max_order: 2, weights: vec![0.3, 0.0, 0.1, 0.0, 0.3], outside: 0.3 };
        assert_eq!(s.dominant(), 2);
    }

    #[test]
    fn dip_values() {
        // the central samples sit half a pixel off axis, so the null needs fine sampling
        let l = to_intensity(&lg_mode(make_grid(512, 8.0).unwrap(), BeamSpec::new(1.0, 780.0, 1)).unwrap());
        assert!(central_dip(&l).unwrap() < 1e-3);
        let g = to_intensity(&gaussian(grid(), BeamSpec::new(1.0, 780.0, 0)).unwrap());
        assert!(central_dip(&g).unwrap() >= 0.99);
        let moved = crate::diagnostics::shift_image(&l, 3, -3);
        assert!(central_dip(&moved).unwrap() < 1e-3);
        let z = IntensityImage::new(grid(), vec![0.0; 256 * 256]).unwrap();
        assert!(matches!(central_dip(&z), Err(Error::DegenerateImage(_))));
    }
}
