//! Field-level generation of the 420 nm and 1370 nm outputs from the two pumps.

use crate::error::{Error, Result};
use crate::field::{normalize_power, ComplexField};
use crate::process::{builtin, predict_oam, pump_oam, Hypothesis, OamLedger, ProcessLoop};

pub const BLUE_NM: f64 = 420.0;
pub const IR_NM: f64 = 1370.0;
pub const PUMP780_NM: f64 = 780.0;
pub const PUMP776_NM: f64 = 776.0;

#[derive(Debug, Clone)]
pub struct MixingScenario {
    pub pump780: ComplexField,
    pub pump776: ComplexField,
    /// Charges the pumps were built with; used only for the ledgers.
    pub ell780: i32,
    pub ell776: i32,
    pub hypothesis: Hypothesis,
    pub loop_blue: ProcessLoop,
    pub loop_ir: ProcessLoop,
    pub gain: f64,
}

impl MixingScenario {
    /// Scenario with the builtin loops for `hypothesis`.
    pub fn new(pump780: ComplexField, pump776: ComplexField, ell780: i32, ell776: i32, hypothesis: Hypothesis) -> Self {
        let ir = match hypothesis {
            Hypothesis::Fwm => "ir_fwm",
            Hypothesis::Swm => "ir_swm",
        };
        MixingScenario {
            pump780,
            pump776,
            ell780,
            ell776,
            hypothesis,
            loop_blue: builtin("blue_fwm").unwrap(),
            loop_ir: builtin(ir).unwrap(),
            gain: 1.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.pump780.grid() != self.pump776.grid() {
            return Err(Error::GridMismatch("pump fields must share one grid".into()));
        }
        if self.pump780.wavelength_nm() != PUMP780_NM || self.pump776.wavelength_nm() != PUMP776_NM {
            return Err(Error::invalid(format!(
                "pumps must be at 780 and 776 nm, got {} and {}",
                self.pump780.wavelength_nm(),
                self.pump776.wavelength_nm()
            )));
        }
        if !(self.gain.is_finite() && self.gain != 0.0) {
            return Err(Error::invalid("gain must be finite and nonzero"));
        }
        Ok(())
    }
}

fn finish(f: ComplexField, wavelength_nm: f64, what: &str) -> Result<ComplexField> {
    if f.amp().iter().all(|a| a.norm_sqr() == 0.0) {
        return Err(Error::DegenerateField(format!("{what} product is identically zero")));
    }
    normalize_power(&f.with_wavelength(wavelength_nm)?, 1.0)
}

pub fn generate_blue(s: &MixingScenario) -> Result<ComplexField> {
    s.check()?;
    let a = s.pump776.amp();
    let f = s.pump780.with_amp(s.pump780.amp().iter().zip(a).map(|(x, y)| s.gain * x * y).collect());
    finish(f, BLUE_NM, "blue")
}

pub fn generate_ir(s: &MixingScenario) -> Result<ComplexField> {
    s.check()?;
    let a = s.pump776.amp();
    let amp = s.pump780.amp().iter().zip(a);
    let f = match s.hypothesis {
        // 780 only populates the intermediate level: its phase never reaches the IR
        Hypothesis::Fwm => amp.map(|(x, y)| s.gain * x.norm_sqr() * y).collect(),
        Hypothesis::Swm => amp.map(|(x, y)| (s.gain * (x * y).norm()).into()).collect(),
    };
    finish(s.pump780.with_amp(f), IR_NM, "IR")
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub blue: ComplexField,
    pub ir: ComplexField,
    pub ledger_blue: OamLedger,
    pub ledger_ir: OamLedger,
}

pub fn generate_all(s: &MixingScenario) -> Result<Generated> {
    let pumps = pump_oam(s.ell780, s.ell776);
    Ok(Generated {
        blue: generate_blue(s)?,
        ir: generate_ir(s)?,
        ledger_blue: predict_oam(&s.loop_blue, s.hypothesis, &pumps)?,
        ledger_ir: predict_oam(&s.loop_ir, s.hypothesis, &pumps)?,
    })
}
