//! Pump beams, phase masks and magnified copies.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{bilinear, normalize_power, ComplexField, GridSpec};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    pub waist_mm: f64,
    pub wavelength_nm: f64,
    pub ell: i32,
    pub radial_index: u32,
}

impl BeamSpec {
    pub fn new(waist_mm: f64, wavelength_nm: f64, ell: i32) -> Self {
        BeamSpec { waist_mm, wavelength_nm, ell, radial_index: 0 }
    }

    fn check(&self) -> Result<()> {
        if !(self.waist_mm > 0.0 && self.waist_mm.is_finite()) {
            return Err(Error::invalid(format!("waist must be positive, got {}", self.waist_mm)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskVariant {
    IdealRamp,
    Octants(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskModel {
    pub variant: MaskVariant,
    pub charge: i32,
    /// Rotation of the mask about the beam axis, degrees counter-clockwise.
    pub rotation_deg: f64,
}

impl MaskModel {
    pub fn new(variant: MaskVariant, charge: i32) -> Self {
        MaskModel { variant, charge, rotation_deg: 0.0 }
    }

    fn check(&self) -> Result<()> {
        if self.charge == 0 {
            return Err(Error::invalid("mask charge must be nonzero"));
        }
        if let MaskVariant::Octants(n) = self.variant {
            if n < 2 {
                return Err(Error::invalid(format!("a stepped mask needs at least 2 steps, got {n}")));
            }
        }
        Ok(())
    }

    /// Phase imposed at azimuth `phi` (radians from +x).
    pub fn phase(&self, phi: f64) -> f64 {
        let p = (phi - self.rotation_deg.to_radians()).rem_euclid(TAU);
        let ell = self.charge as f64;
        match self.variant {
            MaskVariant::IdealRamp => ell * p,
            MaskVariant::Octants(n) => {
                let n = n as f64;
                // rem_euclid can round up to TAU itself
                let step = (n * p / TAU).floor().min(n - 1.0);
                ell * (TAU / n) * step
            }
        }
    }
}

fn warn_if_cramped(grid: &GridSpec, waist_mm: f64) {
    if grid.extent_mm() < 6.0 * waist_mm {
        log::warn!(
            "grid extent {} mm is under 6 waists ({} mm); the beam will be clipped",
            grid.extent_mm(),
            waist_mm
        );
    }
}

pub fn gaussian(grid: GridSpec, spec: BeamSpec) -> Result<ComplexField> {
    if spec.ell != 0 {
        return Err(Error::invalid(format!("a Gaussian has no charge, got ell = {}", spec.ell)));
    }
    spec.check()?;
    warn_if_cramped(&grid, spec.waist_mm);
    let w2 = spec.waist_mm * spec.waist_mm;
    let f = ComplexField::from_fn(grid, spec.wavelength_nm, |x, y| {
        Complex64::new((-(x * x + y * y) / w2).exp(), 0.0)
    })?;
    normalize_power(&f, 1.0)
}

/// Generalized Laguerre polynomial L_p^a(x) by the three-term recurrence.
pub fn laguerre(p: u32, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..p {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

pub fn lg_mode(grid: GridSpec, spec: BeamSpec) -> Result<ComplexField> {
    spec.check()?;
    warn_if_cramped(&grid, spec.waist_mm);
    let w = spec.waist_mm;
    let m = spec.ell.unsigned_abs() as i32;
    let ell = spec.ell as f64;
    let f = ComplexField::from_fn(grid, spec.wavelength_nm, |x, y| {
        let r2 = x * x + y * y;
        let rho = (2.0 * r2).sqrt() / w;
        let radial = rho.powi(m) * laguerre(spec.radial_index, m as f64, 2.0 * r2 / (w * w)) * (-r2 / (w * w)).exp();
        Complex64::from_polar(radial, ell * y.atan2(x))
    })?;
    normalize_power(&f, 1.0)
}

pub fn apply_spiral_mask(f: &ComplexField, mask: MaskModel) -> Result<ComplexField> {
    mask.check()?;
    Ok(f.map_xy(|x, y, a| a * Complex64::from_polar(1.0, mask.phase(y.atan2(x)))))
}

pub fn apply_axicon(f: &ComplexField, cone_phase_per_mm: f64) -> Result<ComplexField> {
    if !(cone_phase_per_mm >= 0.0 && cone_phase_per_mm.is_finite()) {
        return Err(Error::invalid(format!("cone phase must be non-negative, got {cone_phase_per_mm}")));
    }
    if cone_phase_per_mm == 0.0 {
        return Ok(f.clone());
    }
    Ok(f.map_xy(|x, y, a| a * Complex64::from_polar(1.0, cone_phase_per_mm * x.hypot(y))))
}

/// Resamples so transverse coordinates scale by `m` about the grid centre, amplitude / m.
pub fn magnify(f: &ComplexField, m: f64) -> Result<ComplexField> {
    magnify_about(f, m, (0.0, 0.0))
}

/// As `magnify`, but about the point `centre_mm`, which stays fixed.
pub fn magnify_about(f: &ComplexField, m: f64, centre_mm: (f64, f64)) -> Result<ComplexField> {
    if !(m >= 1.0 && m.is_finite()) {
        return Err(Error::invalid(format!("magnification must be at least 1, got {m}")));
    }
    if m == 1.0 && centre_mm == (0.0, 0.0) {
        return Ok(f.clone());
    }
    let grid = f.grid();
    let n = grid.n();
    let (cx, cy) = centre_mm;
    let src = f.amp();
    let mut amp = vec![Complex64::new(0.0, 0.0); grid.len()];
    par::for_each_row(&mut amp, n, |j, row| {
        let fj = grid.index_of(cy + (grid.coord(j) - cy) / m);
        for (i, a) in row.iter_mut().enumerate() {
            let fi = grid.index_of(cx + (grid.coord(i) - cx) / m);
            *a = bilinear(src, n, fi, fj) / m;
        }
    });
    Ok(f.with_amp(amp))
}

/// Analytic purity of the charge-`ell` component behind an `n`-step staircase mask of charge `ell`.
pub fn staircase_purity(n: u32, ell: i32) -> f64 {
    let x = PI * ell as f64 / n as f64;
    (x.sin() / x).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_grid, overlap, power, second_moment_radius, to_intensity};

    fn grid() -> GridSpec {
        make_grid(256, 8.0).unwrap()
    }

    #[test]
    fn gaussian_peak_centred_and_normalized() {
        let g = gaussian(grid(), BeamSpec::new(1.0, 780.0, 0)).unwrap();
        assert!((power(&g) - 1.0).abs() < 1e-12);
        let img = to_intensity(&g);
        let c = (img.at(127, 127) + img.at(128, 127) + img.at(127, 128) + img.at(128, 128)) / 4.0;
        assert!(c >= img.max() - 1e-15);
        assert!(gaussian(grid(), BeamSpec::new(1.0, 780.0, 1)).is_err());
    }

    #[test]
    fn laguerre_matches_closed_forms() {
        let x = 0.7;
        assert_eq!(laguerre(0, 2.0, x), 1.0);
        assert!((laguerre(1, 2.0, x) - (3.0 - x)).abs() < 1e-14);
        let l2 = (x * x - 2.0 * (2.0 + 2.0) * x + (2.0 + 1.0) * (2.0 + 2.0)) / 2.0;
        assert!((laguerre(2, 2.0, x) - l2).abs() < 1e-13);
    }

    #[test]
    fn lg_ring_peak_radius() {
        let w = 1.0;
        let g = grid();
        let f = lg_mode(g, BeamSpec::new(w, 780.0, 1)).unwrap();
        // scan along the row nearest y = 0 for the intensity peak
        let img = to_intensity(&f);
        let j = 128;
        let i = (128..256).max_by(|&a, &b| img.at(a, j).total_cmp(&img.at(b, j))).unwrap();
        let r = g.coord(i).hypot(g.coord(j));
        assert!((r - w / 2f64.sqrt()).abs() <= g.pitch_mm());
    }

    #[test]
    fn lg_zero_is_gaussian() {
        let a = lg_mode(grid(), BeamSpec::new(0.9, 780.0, 0)).unwrap();
        let b = gaussian(grid(), BeamSpec::new(0.9, 780.0, 0)).unwrap();
        assert!(overlap(&a, &b).unwrap().norm() >= 0.9999);
    }

    #[test]
    fn lg_conjugate_pair() {
        let a = lg_mode(grid(), BeamSpec::new(1.0, 780.0, 2)).unwrap();
        let b = lg_mode(grid(), BeamSpec::new(1.0, 780.0, -2)).unwrap();
        for (x, y) in a.amp().iter().zip(b.amp()) {
            assert!((x.norm_sqr() - y.norm_sqr()).abs() <= 1e-10);
            assert!((x.conj() - y).norm() <= 1e-10);
        }
    }

    #[test]
    fn masks_and_axicon_keep_power() {
        let g = gaussian(grid(), BeamSpec::new(1.0, 780.0, 0)).unwrap();
        for m in [
            MaskModel::new(MaskVariant::IdealRamp, 1),
            MaskModel::new(MaskVariant::Octants(8), -3),
            MaskModel { variant: MaskVariant::Octants(4), charge: 2, rotation_deg: 30.0 },
        ] {
            let out = apply_spiral_mask(&g, m).unwrap();
            assert!((power(&out) - 1.0).abs() < 1e-12);
        }
        assert!((power(&apply_axicon(&g, 5.0).unwrap()) - 1.0).abs() < 1e-12);
        assert_eq!(apply_axicon(&g, 0.0).unwrap(), g);
        assert!(apply_axicon(&g, -1.0).is_err());
        assert!(apply_spiral_mask(&g, MaskModel::new(MaskVariant::IdealRamp, 0)).is_err());
        assert!(apply_spiral_mask(&g, MaskModel::new(MaskVariant::Octants(1), 1)).is_err());
    }

    #[test]
    fn octant_phase_steps() {
        let m = MaskModel::new(MaskVariant::Octants(8), 1);
        assert_eq!(m.phase(0.1), 0.0);
        assert!((m.phase(PI / 4.0 + 0.01) - PI / 4.0).abs() < 1e-15);
        assert!((m.phase(-0.01) - 7.0 * PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn staircase_series() {
        assert!((staircase_purity(8, 1) - 0.9496).abs() < 1e-4);
        let seq: Vec<f64> = [4, 8, 16, 64].iter().map(|&n| staircase_purity(n, 1)).collect();
        assert!(seq.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn magnify_identity_and_width() {
        // 43 samples per waist keeps the bilinear loss well under 1e-3
        let g = gaussian(make_grid(1024, 24.0).unwrap(), BeamSpec::new(1.0, 780.0, 0)).unwrap();
        assert_eq!(magnify(&g, 1.0).unwrap(), g);
        let m = magnify(&g, 4.0).unwrap();
        let w = second_moment_radius(&m);
        assert!((w / 4.0 - 1.0).abs() < 0.02, "w = {w}");
        assert!((power(&m) - 1.0).abs() < 1e-3);
        assert!(magnify(&g, 0.5).is_err());
    }
}
