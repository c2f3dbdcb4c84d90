//! Charge from a self-interference spiral.
//!
//! The analysis centre is found by maximizing how strongly a single
//! azimuthal harmonic dominates the annular intensity; an m-armed spiral
//! concentrates its azimuthal energy in harmonic m only when sampled about
//! its own axis.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::filter::{box_filter, median, unwrap, weighted_slope};
use super::{ChargeVerdict, Method, Sign};
use crate::error::{Error, Result};
use crate::fft;
use crate::field::{bilinear, IntensityImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralParams {
    pub annuli: usize,
    pub azimuths: usize,
    pub max_harmonic: usize,
    /// Median harmonic-to-background ratio below which no spiral is reported.
    pub min_ratio: f64,
    pub min_visibility: f64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        SpiralParams { annuli: 24, azimuths: 256, max_harmonic: 6, min_ratio: 0.1, min_visibility: 0.2 }
    }
}

struct Img<'a> {
    v: &'a [f64],
    n: usize,
}

impl Img<'_> {
    /// Value at pixel-unit coordinates measured from the grid centre.
    fn at(&self, x: f64, y: f64) -> f64 {
        let h = self.n as f64 / 2.0 - 0.5;
        bilinear(self.v, self.n, x + h, y + h)
    }

    fn coord(&self, k: usize) -> f64 {
        k as f64 - self.n as f64 / 2.0 + 0.5
    }
}

/// Annulus radii and their azimuthal harmonics `c[k][m]`, m = 0..=max.
fn harmonics(img: &Img, c: (f64, f64), r_max: f64, p: &SpiralParams) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let na = p.azimuths;
    let radii: Vec<f64> = (0..p.annuli).map(|k| (k as f64 + 0.5) / p.annuli as f64 * r_max).collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); p.annuli * na];
    for (k, r) in radii.iter().enumerate() {
        for q in 0..na {
            let phi = TAU * q as f64 / na as f64;
            buf[k * na + q] = img.at(c.0 + r * phi.cos(), c.1 + r * phi.sin()).into();
        }
    }
    fft::rows_forward(&mut buf, na);
    let harm = (0..p.annuli).map(|k| (0..=p.max_harmonic).map(|m| buf[k * na + m] / na as f64).collect()).collect();
    (radii, harm)
}

fn concentration(img: &Img, c: (f64, f64), r_max: f64, p: &SpiralParams) -> f64 {
    let (radii, h) = harmonics(img, c, r_max, p);
    let (mut num, mut den) = (0.0, 0.0);
    for (r, row) in radii.iter().zip(&h) {
        let e: Vec<f64> = row[1..].iter().map(|v| v.norm_sqr()).collect();
        num += r * e.iter().cloned().fold(0.0, f64::max);
        den += r * e.iter().sum::<f64>();
    }
    num / (den + 1e-300)
}

/// Centre and radius of the fringe region from band-passed energy.
fn fringe_centre(img: &[f64], n: usize) -> Option<(f64, f64, f64)> {
    let a = box_filter(img, n, 5);
    let b = box_filter(img, n, 31);
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).collect();
    let im = Img { v: &d, n };
    let weighted = |cx: f64, cy: f64, lim: f64| {
        let (mut s, mut sx, mut sy, mut sr) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            let y = im.coord(j);
            for i in 0..n {
                let x = im.coord(i);
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                if r2 < lim * lim {
                    let w = d[j * n + i];
                    s += w;
                    sx += w * x;
                    sy += w * y;
                    sr += w * r2;
                }
            }
        }
        (s, sx, sy, sr)
    };
    let (s, sx, sy, _) = weighted(0.0, 0.0, f64::INFINITY);
    if s <= 0.0 {
        return None;
    }
    let (mut cx, mut cy) = (sx / s, sy / s);
    let (s, _, _, sr) = weighted(cx, cy, f64::INFINITY);
    let mut rr = (sr / s).sqrt();
    for _ in 0..20 {
        let (s, sx, sy, _) = weighted(cx, cy, 1.5 * rr);
        if s <= 0.0 {
            break;
        }
        cx = sx / s;
        cy = sy / s;
        let (s, _, _, sr) = weighted(cx, cy, 1.5 * rr);
        if s <= 0.0 {
            break;
        }
        rr = (sr / s).sqrt();
    }
    Some((cx, cy, rr))
}

pub fn spiral_count(img: &IntensityImage) -> Result<ChargeVerdict> {
    spiral_count_with(img, &SpiralParams::default())
}

pub fn spiral_count_with(img: &IntensityImage, p: &SpiralParams) -> Result<ChargeVerdict> {
    let n = img.grid().n();
    if img.max() <= 0.0 {
        return Err(Error::DegenerateImage("image is all zero".into()));
    }
    let (mut cx, mut cy, rr) =
        fringe_centre(img.vals(), n).ok_or_else(|| Error::NoSignal("no fringe structure".into()))?;
    let r_max = 1.5 * rr;
    let smooth = box_filter(img.vals(), n, 5);
    let im = Img { v: &smooth, n };

    // Visibility over twice the analysis disk about the seed, before the search
    // can drift. The seed radius tracks fine fringes, so on a ringless blob it
    // shrinks inside the bright core.
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for j in 0..n {
        for i in 0..n {
            if (im.coord(i) - cx).hypot(im.coord(j) - cy) < 2.0 * r_max {
                let v = smooth[j * n + i];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    let vis = if hi > 0.0 { (hi - lo) / (hi + lo) } else { 0.0 };
    if vis < p.min_visibility {
        return Err(Error::LowVisibility(vis));
    }

    for (step, span) in [(4.0, 6i32), (1.0, 4), (0.25, 4)] {
        let mut best = (f64::NEG_INFINITY, cx, cy);
        for a in -span..=span {
            for b in -span..=span {
                let (x, y) = (cx + a as f64 * step, cy + b as f64 * step);
                let s = concentration(&im, (x, y), r_max, p);
                if s > best.0 {
                    best = (s, x, y);
                }
            }
        }
        cx = best.1;
        cy = best.2;
    }

    let (radii, h) = harmonics(&im, (cx, cy), r_max, p);
    let rel: Vec<Vec<f64>> = h
        .iter()
        .map(|row| {
            let bg = row[0].norm();
            row[1..].iter().map(|c| if bg > 0.0 { c.norm() / bg } else { 0.0 }).collect()
        })
        .collect();
    let med: Vec<f64> = (0..p.max_harmonic).map(|m| median(&rel.iter().map(|r| r[m]).collect::<Vec<_>>())).collect();
    let (mi, mv) = med.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let argmax = |r: &Vec<f64>| r.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });

    if mv < p.min_ratio {
        let quiet = rel.iter().filter(|r| argmax(r).1 < p.min_ratio).count();
        return Ok(ChargeVerdict {
            magnitude: 0,
            sign: Sign::Unknown,
            confidence: quiet as f64 / rel.len() as f64,
            method: Method::SelfInterference,
        });
    }
    let m = mi + 1;
    let agree = rel.iter().filter(|r| argmax(r).0 == mi).count() as f64 / rel.len() as f64;
    let phase: Vec<f64> = h.iter().map(|row| row[m].arg()).collect();
    let w: Vec<f64> = h.iter().map(|row| row[m].norm()).collect();
    let slope = weighted_slope(&radii, &unwrap(&phase), &w);
    Ok(ChargeVerdict { magnitude: m as u32, sign: Sign::of(slope), confidence: agree, method: Method::SelfInterference })
}
