//! Charge from the dark stripes of an astigmatically focused beam.
//!
//! A charge-ℓ vortex focused by a tilted lens becomes a Hermite-Gaussian
//! pattern of |ℓ| + 1 lobes in a row along one diagonal, separated by |ℓ|
//! dark stripes. The row's diagonal gives the sign.

use std::f64::consts::PI;

use super::filter::median;
use super::{ChargeVerdict, Method, Sign};
use crate::error::{Error, Result};
use crate::field::{make_grid, IntensityImage};
use crate::propagate::{astigmatic_focus_image, LensSpec};
use crate::sources::{lg_mode, BeamSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripeParams {
    /// A minimum counts as a stripe when it is below this fraction of its neighbouring maxima.
    pub depth: f64,
    /// Images rounder than this (major/minor axis ratio) hold no lobe row.
    pub min_anisotropy: f64,
    /// Largest allowed deviation of the lobe row from a diagonal, degrees.
    pub max_skew_deg: f64,
}

impl Default for StripeParams {
    fn default() -> Self {
        StripeParams { depth: 0.3, min_anisotropy: 1.3, max_skew_deg: 20.0 }
    }
}

pub fn stripe_count(img: &IntensityImage, lens: LensSpec) -> Result<ChargeVerdict> {
    stripe_count_with(img, lens, &StripeParams::default())
}

/// Sign of ℓ for a lobe row along +45°, from the lens geometry.
///
/// A converging tilted lens rotates LG ℓ = +1 into lobes along −45°
/// (checked against the pipeline by `calibrate_stripe_sign`).
fn plus_diagonal_sign(lens: LensSpec) -> i32 {
    if lens.focal_m > 0.0 {
        -1
    } else {
        1
    }
}

/// Runs LG ℓ = +1 through `lens` and reports the sign that a lobe row
/// along +45° stands for.
pub fn calibrate_stripe_sign(lens: LensSpec) -> Result<i32> {
    let w = lens
        .conversion_waist_mm(420.0)
        .ok_or_else(|| Error::invalid("an untilted lens makes no stripes"))?;
    let g = make_grid(512, 16.0 * w)?;
    let f = lg_mode(g, BeamSpec::new(w, 420.0, 1))?;
    let img = astigmatic_focus_image(&f, lens)?;
    let row = lobe_row(&img, &StripeParams::default())?.ok_or_else(|| Error::NoSignal("no lobe row".into()))?;
    Ok(if row.diagonal > 0.0 { 1 } else { -1 })
}

struct LobeRow {
    diagonal: f64,
    profile: Vec<f64>,
}

/// Orientation guard outcome: `None` when the image is not a diagonal lobe row.
fn lobe_row(img: &IntensityImage, p: &StripeParams) -> Result<Option<LobeRow>> {
    Ok(match analyse(img, p)? {
        Shape::Row(r) => Some(r),
        Shape::Round(_) => None,
    })
}

enum Shape {
    Row(LobeRow),
    /// Not a lobe row; carries how clearly so (0..1).
    Round(f64),
}

fn analyse(img: &IntensityImage, p: &StripeParams) -> Result<Shape> {
    let n = img.grid().n();
    let v = img.vals();
    let peak = img.max();
    if !(peak > 0.0) {
        return Err(Error::NoSignal("image is dark".into()));
    }
    let bg = median(v);
    let j: Vec<f64> = v.iter().map(|x| (x - bg).max(0.0)).collect();
    let jmax = j.iter().cloned().fold(0.0, f64::max);
    if jmax <= 1e-9 * peak {
        return Err(Error::NoSignal("no structure above the background".into()));
    }
    let k: Vec<f64> = j.iter().map(|x| (x - 0.1 * jmax).max(0.0)).collect();
    let c = |i: usize| i as f64 - n as f64 / 2.0 + 0.5;

    let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (idx, w) in k.iter().enumerate() {
        s += w;
        sx += w * c(idx % n);
        sy += w * c(idx / n);
    }
    let (cx, cy) = (sx / s, sy / s);
    let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
    for (idx, w) in k.iter().enumerate() {
        let (x, y) = (c(idx % n) - cx, c(idx / n) - cy);
        xx += w * x * x;
        yy += w * y * y;
        xy += w * x * y;
    }
    let (xx, yy, xy) = (xx / s, yy / s, xy / s);
    let alpha = 0.5 * (2.0 * xy).atan2(xx - yy).to_degrees();
    let tr = xx + yy;
    let disc = (tr * tr / 4.0 - (xx * yy - xy * xy)).max(0.0).sqrt();
    let (l1, l2) = (tr / 2.0 + disc, (tr / 2.0 - disc).max(1e-300));
    let aniso = (l1 / l2).sqrt();
    let diag = if alpha > 0.0 { 45.0 } else { -45.0 };
    let skew = (alpha - diag).abs();
    if aniso < p.min_anisotropy || skew > p.max_skew_deg {
        let margin = if aniso < p.min_anisotropy {
            (p.min_anisotropy - aniso) / (p.min_anisotropy - 1.0)
        } else {
            (skew - p.max_skew_deg) / (45.0 - p.max_skew_deg)
        };
        return Ok(Shape::Round(margin.clamp(0.0, 1.0)));
    }

    let d = diag * PI / 180.0;
    let (cs, sn) = (d.cos(), d.sin());
    let (su, sv) = (l1.sqrt(), l2.sqrt());
    let half = (3.5 * su).ceil() as i64;
    let mut prof = vec![0.0; (2 * half + 1) as usize];
    // a narrow band across the row: the stripes bend away from it at the flanks
    for (idx, w) in j.iter().enumerate() {
        let (x, y) = (c(idx % n) - cx, c(idx / n) - cy);
        let u = x * cs + y * sn;
        let vv = -x * sn + y * cs;
        if u.abs() < 3.5 * su && vv.abs() < 1.5 * sv {
            prof[(u.round() as i64 + half) as usize] += w;
        }
    }
    // 3-tap running mean, zero beyond the ends
    let sm: Vec<f64> = (0..prof.len())
        .map(|i| {
            let a = if i > 0 { prof[i - 1] } else { 0.0 };
            let b = prof.get(i + 1).cloned().unwrap_or(0.0);
            (a + prof[i] + b) / 3.0
        })
        .collect();
    Ok(Shape::Row(LobeRow { diagonal: diag, profile: sm }))
}

pub fn stripe_count_with(img: &IntensityImage, lens: LensSpec, p: &StripeParams) -> Result<ChargeVerdict> {
    lens.check()?;
    let row = match analyse(img, p)? {
        Shape::Row(r) => r,
        Shape::Round(conf) => {
            return Ok(ChargeVerdict { magnitude: 0, sign: Sign::Unknown, confidence: conf, method: Method::TiltedLens })
        }
    };
    let pr = &row.profile;
    let top = pr.iter().cloned().fold(0.0, f64::max);
    let maxima: Vec<usize> = (1..pr.len().saturating_sub(1))
        .filter(|&i| pr[i] >= pr[i - 1] && pr[i] > pr[i + 1] && pr[i] > 0.1 * top)
        .collect();
    let mut count = 0u32;
    let mut counted_margin = f64::INFINITY;
    let mut shallow_margin = f64::INFINITY;
    for w in maxima.windows(2) {
        let low = pr[w[0]..=w[1]].iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = low / (0.5 * (pr[w[0]] + pr[w[1]]));
        if ratio < p.depth {
            count += 1;
            counted_margin = counted_margin.min((p.depth - ratio) / p.depth);
        } else {
            shallow_margin = shallow_margin.min((ratio - p.depth) / (1.0 - p.depth));
        }
    }
    if count == 0 {
        let conf = if shallow_margin.is_finite() { shallow_margin.clamp(0.0, 1.0) } else { 1.0 };
        return Ok(ChargeVerdict { magnitude: 0, sign: Sign::Unknown, confidence: conf, method: Method::TiltedLens });
    }
    let s = plus_diagonal_sign(lens) * if row.diagonal > 0.0 { 1 } else { -1 };
    Ok(ChargeVerdict {
        magnitude: count,
        sign: Sign::of(s as f64),
        confidence: counted_margin.clamp(0.0, 1.0),
        method: Method::TiltedLens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{apply_axicon, gaussian};

    fn lens() -> LensSpec {
        LensSpec::new(1.0, 45.0).unwrap()
    }

    fn image(ell: i32, n: usize) -> IntensityImage {
        let w = lens().conversion_waist_mm(420.0).unwrap();
        let g = make_grid(n, 16.0 * w).unwrap();
        let spec = BeamSpec::new(w, 420.0, ell);
        let f = if ell == 0 { gaussian(g, spec) } else { lg_mode(g, spec) }.unwrap();
        astigmatic_focus_image(&f, lens()).unwrap()
    }

    #[test]
    fn calibration_agrees_with_geometry() {
        assert_eq!(calibrate_stripe_sign(lens()).unwrap(), plus_diagonal_sign(lens()));
        let l = LensSpec::new(0.5, 30.0).unwrap();
        assert_eq!(calibrate_stripe_sign(l).unwrap(), plus_diagonal_sign(l));
    }

    #[test]
    fn counts_and_signs() {
        for ell in [-2, -1, 0, 1, 2] {
            let v = stripe_count(&image(ell, 512), lens()).unwrap();
            assert_eq!(v.magnitude, ell.unsigned_abs(), "{ell}: {v:?}");
            if ell != 0 {
                assert_eq!(v.sign.value(), Some(ell.signum()));
                assert!(v.confidence >= 0.8, "{v:?}");
            }
        }
    }

    #[test]
    fn axicon_ring_has_no_stripes() {
        let w = lens().conversion_waist_mm(420.0).unwrap();
        let g = make_grid(1024, 16.0 * w).unwrap();
        let f = apply_axicon(&gaussian(g, BeamSpec::new(w, 420.0, 0)).unwrap(), 8.0 / w).unwrap();
        let v = stripe_count(&astigmatic_focus_image(&f, lens()).unwrap(), lens()).unwrap();
        assert_eq!((v.magnitude, v.sign), (0, Sign::Unknown));
    }

    #[test]
    fn dark_image_is_no_signal() {
        let g = make_grid(32, 1.0).unwrap();
        let img = IntensityImage::new(g, vec![0.0; 1024]).unwrap();
        assert!(matches!(stripe_count(&img, lens()), Err(Error::NoSignal(_))));
    }
}
