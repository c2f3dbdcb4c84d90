//! Free-space propagation and lens transforms.
//!
//! Lengths on grids are in mm; distances and focal lengths in the public
//! API are in metres.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::{moments, to_intensity, ComplexField, GridSpec, IntensityImage};
use crate::par;

/// Fraction of power allowed outside the support used by the sampling checks.
pub const SUPPORT_TAIL: f64 = 1e-12;

/// Power fraction the lens and propagation checks let through undersampled.
///
/// Sharp features such as an axicon tip or mask steps scatter a small
/// power-law tail to the edge of any band, so `SUPPORT_TAIL` would reject
/// every grid size there.
pub const ALIAS_TAIL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSpec {
    pub focal_m: f64,
    pub tilt_deg: f64,
}

impl LensSpec {
    pub fn new(focal_m: f64, tilt_deg: f64) -> Result<Self> {
        let l = LensSpec { focal_m, tilt_deg };
        l.check()?;
        Ok(l)
    }

    pub fn check(&self) -> Result<()> {
        if self.focal_m == 0.0 || !self.focal_m.is_finite() {
            return Err(Error::invalid(format!("focal length must be finite and nonzero, got {}", self.focal_m)));
        }
        if !(0.0..90.0).contains(&self.tilt_deg) {
            return Err(Error::invalid(format!("tilt must lie in [0, 90) degrees, got {}", self.tilt_deg)));
        }
        Ok(())
    }

    /// (tangential, sagittal) focal lengths in metres.
    pub fn focal_pair(&self) -> (f64, f64) {
        let c = self.tilt_deg.to_radians().cos();
        (self.focal_m * c, self.focal_m / c)
    }

    /// Distance to the plane between the two line foci, metres.
    pub fn focus_distance(&self) -> f64 {
        let (fx, fy) = self.focal_pair();
        self.focal_m.signum() * (fx * fy).sqrt()
    }

    /// Input waist that a tilted lens converts most completely into a
    /// Hermite-Gaussian pattern at `focus_distance`, mm.
    ///
    /// At this waist the two transverse axes pick up a Gouy phase difference
    /// of pi/2 at the observation plane.
    pub fn conversion_waist_mm(&self, wavelength_nm: f64) -> Option<f64> {
        let th = self.tilt_deg.to_radians();
        if th == 0.0 {
            return None;
        }
        let f_mm = self.focal_m.abs() * 1e3;
        let lam = wavelength_nm * 1e-6;
        Some((2.0 * lam * f_mm * th.cos() / (PI * th.sin().powi(2))).sqrt())
    }
}

/// Smallest radius containing all but `tail` of `weights`.
fn support_radius<F>(n: usize, weights: &[f64], tail_frac: f64, radius_of: F) -> f64
where
    F: Fn(usize, usize) -> f64,
{
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            pairs.push((radius_of(i, j), weights[j * n + i]));
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tail = 0.0;
    for (r, w) in pairs {
        tail += w;
        if tail > tail_frac * total {
            return r;
        }
    }
    0.0
}

/// Radius of the spectral band holding the field's power, cycles/mm.
pub fn spectral_support(f: &ComplexField) -> f64 {
    let g = f.grid();
    let n = g.n();
    let spec: Vec<f64> = fft::forward(f.amp(), n).iter().map(|a| a.norm_sqr()).collect();
    let l = g.extent_mm();
    support_radius(n, &spec, SUPPORT_TAIL, |i, j| fft::freq(i, n, l).hypot(fft::freq(j, n, l)))
}

/// Radius of the spatial region holding the field's power, mm.
pub fn spatial_support(f: &ComplexField) -> f64 {
    let g = f.grid();
    let img = to_intensity(f);
    support_radius(g.n(), img.vals(), SUPPORT_TAIL, |i, j| g.coord(i).hypot(g.coord(j)))
}

pub fn angular_spectrum(f: &ComplexField, distance_m: f64) -> Result<ComplexField> {
    if !distance_m.is_finite() {
        return Err(Error::invalid("propagation distance must be finite"));
    }
    if distance_m == 0.0 {
        return Ok(f.clone());
    }
    let g = f.grid();
    let n = g.n();
    let l = g.extent_mm();
    let lam = f.wavelength_mm();
    let d = distance_m * 1e3;
    let k2 = 1.0 / (lam * lam);

    let mut spec = fft::forward(f.amp(), n);
    let power_spec: Vec<f64> = spec.iter().map(|a| a.norm_sqr()).collect();
    let nu = support_radius(n, &power_spec, ALIAS_TAIL, |i, j| fft::freq(i, n, l).hypot(fft::freq(j, n, l)));
    let step = if nu * nu >= k2 {
        f64::INFINITY
    } else {
        2.0 * PI * d.abs() * nu / (l * (k2 - nu * nu).sqrt())
    };
    if step > PI {
        return Err(Error::AliasingRisk { what: "angular-spectrum transfer function", step });
    }

    par::for_each_row(&mut spec, n, |j, row| {
        let ny = fft::freq(j, n, l);
        for (i, a) in row.iter_mut().enumerate() {
            let nx = fft::freq(i, n, l);
            let arg = k2 - nx * nx - ny * ny;
            *a = if arg > 0.0 { *a * Complex64::from_polar(1.0, 2.0 * PI * d * arg.sqrt()) } else { Complex64::new(0.0, 0.0) };
        }
    });
    Ok(f.with_amp(fft::inverse(&spec, n)))
}

fn quadratic_phase(f: &ComplexField, fx_m: f64, fy_m: f64, what: &'static str) -> Result<ComplexField> {
    let g = f.grid();
    let lam = f.wavelength_mm();
    let (fx, fy) = (fx_m * 1e3, fy_m * 1e3);
    let img = to_intensity(f);
    let r = support_radius(g.n(), img.vals(), ALIAS_TAIL, |i, j| g.coord(i).hypot(g.coord(j)));
    let step = 2.0 * PI * r * g.pitch_mm() / (lam * fx.abs().min(fy.abs()));
    if step > PI {
        return Err(Error::AliasingRisk { what, step });
    }
    Ok(f.map_xy(|x, y, a| a * Complex64::from_polar(1.0, -PI * (x * x / fx + y * y / fy) / lam)))
}

pub fn thin_lens(f: &ComplexField, lens: LensSpec) -> Result<ComplexField> {
    lens.check()?;
    if lens.tilt_deg != 0.0 {
        return Err(Error::invalid("thin_lens takes an untilted lens; use tilted_lens"));
    }
    quadratic_phase(f, lens.focal_m, lens.focal_m, "lens phase")
}

pub fn tilted_lens(f: &ComplexField, lens: LensSpec) -> Result<ComplexField> {
    lens.check()?;
    let (fx, fy) = lens.focal_pair();
    quadratic_phase(f, fx, fy, "tilted-lens phase")
}

/// Intensity at the geometric-mean focus behind a tilted lens.
pub fn astigmatic_focus_image(f: &ComplexField, lens: LensSpec) -> Result<IntensityImage> {
    astigmatic_image_at(f, lens, lens.focus_distance())
}

/// As `astigmatic_focus_image` with an explicit lens-to-screen distance.
pub fn astigmatic_image_at(f: &ComplexField, lens: LensSpec, distance_m: f64) -> Result<IntensityImage> {
    let a = tilted_lens(f, lens)?;
    Ok(to_intensity(&angular_spectrum(&a, distance_m)?))
}

/// Field in the back focal plane of a lens of focal length `focal_m`,
/// sampled on `out`, by a direct matrix Fourier transform.
///
/// The output grid is independent of the input grid, which lets a focused
/// spot be resolved without padding.
pub fn fourier_focus(f: &ComplexField, focal_m: f64, out: GridSpec) -> Result<ComplexField> {
    if focal_m == 0.0 || !focal_m.is_finite() {
        return Err(Error::invalid(format!("focal length must be finite and nonzero, got {focal_m}")));
    }
    let gi = f.grid();
    let (ni, no) = (gi.n(), out.n());
    let lf = f.wavelength_mm() * focal_m * 1e3;
    // a[o * ni + i] = exp(-2 pi i x_o x_i / (lambda f))
    let a = par::map_indices(no * ni, |k| {
        let (o, i) = (k / ni, k % ni);
        Complex64::from_polar(1.0, -2.0 * PI * out.coord(o) * gi.coord(i) / lf)
    });
    let src = f.amp();
    // b = U · Aᵀ: each input row transformed along x
    let mut b = vec![Complex64::new(0.0, 0.0); ni * no];
    par::for_each_row(&mut b, no, |j, row| {
        let u = &src[j * ni..(j + 1) * ni];
        for (o, v) in row.iter_mut().enumerate() {
            let ar = &a[o * ni..(o + 1) * ni];
            *v = u.iter().zip(ar).map(|(x, y)| x * y).sum();
        }
    });
    let scale = Complex64::new(0.0, -1.0) * (gi.pitch_mm() * gi.pitch_mm() / lf);
    let mut amp = vec![Complex64::new(0.0, 0.0); no * no];
    par::for_each_row(&mut amp, no, |jo, row| {
        let ar = &a[jo * ni..(jo + 1) * ni];
        for (j, aj) in ar.iter().enumerate() {
            let brow = &b[j * no..(j + 1) * no];
            for (v, bv) in row.iter_mut().zip(brow) {
                *v += aj * bv;
            }
        }
        row.iter_mut().for_each(|v| *v *= scale);
    });
    ComplexField::new(out, f.wavelength_nm(), amp)
}

/// Embedded-Gaussian waist and beam quality factor of a field: (w_e mm, M²).
///
/// Uses second moments in both the spatial and the spectral domain;
/// `w_e = 2 sqrt(σxσy) / sqrt(M²)` is the waist of the Gaussian with the
/// same divergence-to-size ratio as a perfect beam.
pub fn embedded_waist(f: &ComplexField) -> Result<(f64, f64)> {
    let g = f.grid();
    let n = g.n();
    let img = to_intensity(f);
    let m = moments(g, img.vals()).ok_or_else(|| Error::DegenerateField("zero field has no waist".into()))?;
    let spec: Vec<f64> = fft::forward(f.amp(), n).iter().map(|a| a.norm_sqr()).collect();
    let l = g.extent_mm();
    let tot: f64 = spec.iter().sum();
    let (mut mx, mut my) = (0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let q = spec[j * n + i];
            mx += q * fft::freq(i, n, l);
            my += q * fft::freq(j, n, l);
        }
    }
    mx /= tot;
    my /= tot;
    let (mut vx, mut vy) = (0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let q = spec[j * n + i];
            vx += q * (fft::freq(i, n, l) - mx).powi(2);
            vy += q * (fft::freq(j, n, l) - my).powi(2);
        }
    }
    vx /= tot;
    vy /= tot;
    let m2 = 4.0 * PI * (m[2] * m[3] * vx * vy).sqrt().sqrt();
    let we = 2.0 * (m[2] * m[3]).sqrt().sqrt() / m2.sqrt();
    Ok((we, m2))
}

/// Reinterprets the grid scale so the embedded waist becomes `target_mm`.
///
/// Models an ideal relay telescope: sample values are kept, the pitch changes,
/// and amplitudes are rescaled so power is unchanged.
pub fn relay_to_waist(f: &ComplexField, target_mm: f64) -> Result<ComplexField> {
    if !(target_mm > 0.0 && target_mm.is_finite()) {
        return Err(Error::invalid(format!("relay waist must be positive, got {target_mm}")));
    }
    let (we, _) = embedded_waist(f)?;
    f.rescaled(f.grid().extent_mm() * target_mm / we)
}
