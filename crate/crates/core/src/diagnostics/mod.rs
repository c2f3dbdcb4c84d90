//! Charge measurement: the field-level spectrum oracle, the two
//! intensity-only analyzers and the process classifier.
//!
//! The analyzers (`spiral_count`, `stripe_count`) take an
//! [`IntensityImage`](crate::field::IntensityImage) and never see phase.

use std::fmt;

mod classify;
mod filter;
mod interfere;
mod perturb;
mod spectrum;
mod spiral;
mod stripes;

pub use classify::{classify_process, FieldSupport, ProcessVerdict, Verdict};
pub use interfere::{radial_peak, self_interference, SelfInterference};
pub use perturb::{add_uniform_noise, shift_image};
pub use spectrum::{central_dip, dominant_charge, oam_spectrum, OamSpectrum, DOUGHNUT_DIP};
pub use spiral::{spiral_count, spiral_count_with, SpiralParams};
pub use stripes::{calibrate_stripe_sign, stripe_count, stripe_count_with, StripeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
    Unknown,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Plus
        } else if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Unknown
        }
    }

    pub fn value(self) -> Option<i32> {
        match self {
            Sign::Plus => Some(1),
            Sign::Minus => Some(-1),
            Sign::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    TiltedLens,
    SelfInterference,
    Spectrum,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TiltedLens => "tilted_lens",
            Method::SelfInterference => "self_interference",
            Method::Spectrum => "spectrum",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeVerdict {
    pub magnitude: u32,
    pub sign: Sign,
    pub confidence: f64,
    pub method: Method,
}

impl ChargeVerdict {
    /// Signed charge, or `None` when a nonzero magnitude has no sign.
    pub fn signed(&self) -> Option<i32> {
        if self.magnitude == 0 {
            return Some(0);
        }
        self.sign.value().map(|s| s * self.magnitude as i32)
    }

    /// Exact verdict for a known charge, as produced by the spectrum oracle.
    pub fn from_charge(ell: i32, confidence: f64, method: Method) -> Self {
        let sign = if ell == 0 { Sign::Unknown } else { Sign::of(ell as f64) };
        ChargeVerdict { magnitude: ell.unsigned_abs(), sign, confidence, method }
    }
}

impl fmt::Display for ChargeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match (self.magnitude, self.sign) {
            (0, _) => "0".to_string(),
            (m, Sign::Plus) => format!("+{m}"),
            (m, Sign::Minus) => format!("-{m}"),
            (m, Sign::Unknown) => format!("±{m}"),
        };
        write!(f, "{s} (confidence {:.2}, {})", self.confidence, self.method)
    }
}
