use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{to_intensity, ComplexField, IntensityImage};
use crate::propagate::angular_spectrum;
use crate::sources::magnify_about;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfInterference {
    pub magnification: f64,
    /// Peak amplitude of the reference relative to the peak of the signal.
    pub ratio: f64,
    pub defocus_m: f64,
}

impl Default for SelfInterference {
    fn default() -> Self {
        SelfInterference { magnification: 8.0, ratio: 0.5, defocus_m: 0.5 }
    }
}

/// Radius of the brightest ring of the azimuthally averaged intensity, mm.
pub fn radial_peak(f: &ComplexField) -> f64 {
    let g = f.grid();
    let n = g.n();
    let p = g.pitch_mm();
    let nb = n; // radii up to the grid corner
    let (mut sum, mut cnt) = (vec![0.0; nb], vec![0usize; nb]);
    let img = to_intensity(f);
    for j in 0..n {
        for i in 0..n {
            let b = ((g.coord(i).hypot(g.coord(j)) / p) as usize).min(nb - 1);
            sum[b] += img.at(i, j);
            cnt[b] += 1;
        }
    }
    let mut best = (0, f64::NEG_INFINITY);
    for b in 0..nb {
        if cnt[b] > 0 {
            let m = sum[b] / cnt[b] as f64;
            if m > best.1 {
                best = (b, m);
            }
        }
    }
    (best.0 as f64 + 0.5) * p
}

/// Interferes a defocused copy of `f` with a magnified reference copy.
///
/// The reference is magnified about a point just outside the beam's bright
/// ring, on the +x axis, so the vortex core of the magnified copy lands
/// outside the signal and the reference wavefront is locally flat across it.
pub fn self_interference(f: &ComplexField, si: SelfInterference) -> Result<IntensityImage> {
    if !(si.magnification > 1.0 && si.magnification.is_finite()) {
        return Err(Error::invalid(format!("magnification must exceed 1, got {}", si.magnification)));
    }
    if !(si.ratio > 0.0 && si.ratio <= 1.0) {
        return Err(Error::invalid(format!("reference ratio must lie in (0, 1], got {}", si.ratio)));
    }
    let m = si.magnification;
    // the reference arm length is free; match it to the signal on axis
    let piston = Complex64::from_polar(1.0, -TAU * si.defocus_m * 1e3 / f.wavelength_mm());
    let signal = angular_spectrum(f, si.defocus_m)?.scale(piston);
    let c = radial_peak(f) / (1.0 - 1.0 / m);
    let reference = magnify_about(f, m, (c, 0.0))?;
    let peak = |a: &ComplexField| a.amp().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (ps, pr) = (peak(&signal), peak(&reference));
    if ps == 0.0 || pr == 0.0 {
        return Err(Error::DegenerateField("nothing to interfere".into()));
    }
    let k = si.ratio * ps / pr;
    let amp = signal.amp().iter().zip(reference.amp()).map(|(s, r)| s + r * k).collect();
    Ok(to_intensity(&signal.with_amp(amp)))
}
