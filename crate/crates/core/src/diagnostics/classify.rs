use std::fmt;

use super::ChargeVerdict;
use crate::error::{Error, Result};
use crate::process::PumpOam;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Fwm,
    Swm,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Fwm => "fwm",
            Verdict::Swm => "swm",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSupport {
    pub field: &'static str,
    pub measured: i32,
    pub fwm: i32,
    pub swm: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessVerdict {
    pub verdict: Verdict,
    pub supporting: Vec<FieldSupport>,
}

fn signed(v: &ChargeVerdict, field: &str) -> Result<i32> {
    if !(v.confidence > 0.0) {
        return Err(Error::invalid(format!("{field} verdict has zero confidence")));
    }
    v.signed().ok_or_else(|| Error::UnsignedInput(format!("{field} charge {} has no sign", v.magnitude)))
}

pub fn classify_process(pumps: &PumpOam, blue: &ChargeVerdict, ir: &ChargeVerdict) -> Result<ProcessVerdict> {
    let l780 = *pumps.get(&780).ok_or(Error::MissingPumpOam(780.0))?;
    let l776 = *pumps.get(&776).ok_or(Error::MissingPumpOam(776.0))?;
    let (b, i) = (signed(blue, "blue")?, signed(ir, "IR")?);
    let sum = l780 + l776;
    let supporting = vec![
        FieldSupport { field: "blue", measured: b, fwm: sum, swm: sum },
        FieldSupport { field: "ir", measured: i, fwm: l776, swm: 0 },
    ];
    let fits = |pick: fn(&FieldSupport) -> i32| supporting.iter().all(|s| s.measured == pick(s));
    let verdict = match (fits(|s| s.fwm), fits(|s| s.swm)) {
        (true, false) => Verdict::Fwm,
        (false, true) => Verdict::Swm,
        _ => Verdict::Inconclusive,
    };
    Ok(ProcessVerdict { verdict, supporting })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{Method, Sign};
    use crate::process::pump_oam;
    use proptest::prelude::*;

    fn v(ell: i32) -> ChargeVerdict {
        ChargeVerdict::from_charge(ell, 1.0, Method::TiltedLens)
    }

    #[test]
    fn paper_cases() {
        assert_eq!(classify_process(&pump_oam(0, -1), &v(-1), &v(-1)).unwrap().verdict, Verdict::Fwm);
        assert_eq!(classify_process(&pump_oam(1, 0), &v(1), &v(0)).unwrap().verdict, Verdict::Inconclusive);
        assert_eq!(classify_process(&pump_oam(1, 1), &v(2), &v(1)).unwrap().verdict, Verdict::Fwm);
        assert_eq!(classify_process(&pump_oam(1, 1), &v(2), &v(0)).unwrap().verdict, Verdict::Swm);
        assert_eq!(classify_process(&pump_oam(1, 1), &v(1), &v(1)).unwrap().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn unsigned_nonzero_is_rejected() {
        let u = ChargeVerdict { magnitude: 1, sign: Sign::Unknown, confidence: 0.9, method: Method::TiltedLens };
        assert!(matches!(classify_process(&pump_oam(0, 1), &u, &v(1)), Err(Error::UnsignedInput(_))));
        let z = ChargeVerdict { confidence: 0.0, ..v(1) };
        assert!(classify_process(&pump_oam(0, 1), &z, &v(1)).is_err());
    }

    proptest! {
        #[test]
        fn sign_flip_symmetry(a in -3i32..=3, b in -3i32..=3, mb in -4i32..=4, mi in -3i32..=3) {
            let x = classify_process(&pump_oam(a, b), &v(mb), &v(mi)).unwrap().verdict;
            let y = classify_process(&pump_oam(-a, -b), &v(-mb), &v(-mi)).unwrap().verdict;
            prop_assert_eq!(x, y);
        }

        #[test]
        fn coincident_hypotheses_are_inconclusive(a in -3i32..=3, mb in -4i32..=4, mi in -3i32..=3) {
            let x = classify_process(&pump_oam(a, 0), &v(mb), &v(mi)).unwrap().verdict;
            prop_assert_eq!(x, Verdict::Inconclusive);
        }
    }
}
