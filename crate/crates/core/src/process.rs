//! Atomic process loops, their photon-energy closure and OAM bookkeeping.
//!
//! Loop text format, one loop per line group:
//!
//! ```text
//! loop ir_fwm: 5P3/2 -(absorb 776nm, pump)-> 5D5/2 -(emit 5230nm)-> 6P3/2
//!     -(emit 2730nm)-> 6S1/2 -(emit 1370nm, detect)-> 5P3/2
//! ```
//!
//! `#` starts a comment. A bare builtin name (`blue_fwm`, `ir_fwm`,
//! `ir_swm`) parses to that builtin.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

pub const ENERGY_TOLERANCE: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Absorb,
    Emit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Pump,
    Generated,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    Fwm,
    Swm,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::Fwm => "fwm",
            Hypothesis::Swm => "swm",
        })
    }
}

impl std::str::FromStr for Hypothesis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fwm" => Ok(Hypothesis::Fwm),
            "swm" => Ok(Hypothesis::Swm),
            other => Err(Error::invalid(format!("unknown hypothesis {other:?} (expected fwm or swm)"))),
        }
    }
}

/// Pump wavelength in whole nanometres to topological charge.
pub type PumpOam = BTreeMap<u32, i32>;

pub fn pump_oam(l780: i32, l776: i32) -> PumpOam {
    BTreeMap::from([(780, l780), (776, l776)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub upper: String,
    pub lower: String,
    pub wavelength_nm: f64,
    pub direction: Direction,
    pub role: Role,
    /// Marks the field the experiment records.
    pub detect: bool,
}

impl Transition {
    pub fn from_level(&self) -> &str {
        match self.direction {
            Direction::Absorb => &self.lower,
            Direction::Emit => &self.upper,
        }
    }

    pub fn to_level(&self) -> &str {
        match self.direction {
            Direction::Absorb => &self.upper,
            Direction::Emit => &self.lower,
        }
    }

    fn key(&self) -> u32 {
        self.wavelength_nm.round() as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessLoop {
    pub name: String,
    pub steps: Vec<Transition>,
    pub pump_oam: PumpOam,
}

impl ProcessLoop {
    pub fn detected(&self) -> Option<usize> {
        self.steps.iter().position(|t| t.detect)
    }

    pub fn pumps(&self) -> impl Iterator<Item = &Transition> {
        self.steps.iter().filter(|t| t.role == Role::Pump)
    }

    fn validate(&self) -> Result<()> {
        let first = self.steps.first().ok_or_else(|| Error::Closure("loop has no steps".into()))?;
        for w in self.steps.windows(2) {
            if w[0].to_level() != w[1].from_level() {
                return Err(Error::Closure(format!(
                    "step into {} is followed by a step out of {}",
                    w[0].to_level(),
                    w[1].from_level()
                )));
            }
        }
        let last = self.steps.last().unwrap();
        if last.to_level() != first.from_level() {
            return Err(Error::Closure(format!(
                "loop {} ends on {} instead of its start level {}",
                self.name,
                last.to_level(),
                first.from_level()
            )));
        }
        let has = |d| self.steps.iter().any(|t| t.direction == d);
        if !has(Direction::Absorb) || !has(Direction::Emit) {
            return Err(Error::Closure("a loop needs at least one absorption and one emission".into()));
        }
        let r = energy_residual(self);
        if r > ENERGY_TOLERANCE {
            return Err(Error::Energy { residual: r, limit: ENERGY_TOLERANCE });
        }
        Ok(())
    }
}

pub fn render(p: &ProcessLoop) -> String {
    let mut s = format!("loop {}: {}", p.name, p.steps.first().map(|t| t.from_level()).unwrap_or(""));
    for t in &p.steps {
        let dir = match t.direction {
            Direction::Absorb => "absorb",
            Direction::Emit => "emit",
        };
        s.push_str(&format!(" -({dir} {}nm", t.wavelength_nm));
        if t.role == Role::Pump {
            s.push_str(", pump");
        }
        if t.detect {
            s.push_str(", detect");
        }
        s.push_str(&format!(")-> {}", t.to_level()));
    }
    s
}

impl fmt::Display for ProcessLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

const BLUE_FWM: &str = "loop blue_fwm: 5S1/2 -(absorb 780nm, pump)-> 5P3/2 -(absorb 776nm, pump)-> 5D5/2 \
    -(emit 5230nm)-> 6P3/2 -(emit 420nm, detect)-> 5S1/2";
const IR_FWM: &str = "loop ir_fwm: 5P3/2 -(absorb 776nm, pump)-> 5D5/2 -(emit 5230nm)-> 6P3/2 \
    -(emit 2730nm)-> 6S1/2 -(emit 1370nm, detect)-> 5P3/2";
const IR_SWM: &str = "loop ir_swm: 5S1/2 -(absorb 780nm, pump)-> 5P3/2 -(absorb 776nm, pump)-> 5D5/2 \
    -(emit 5230nm)-> 6P3/2 -(emit 2730nm)-> 6S1/2 -(emit 1370nm, detect)-> 5P3/2 -(emit 780nm)-> 5S1/2";

pub const BUILTINS: [&str; 3] = ["blue_fwm", "ir_fwm", "ir_swm"];

pub fn builtin(name: &str) -> Option<ProcessLoop> {
    let text = match name {
        "blue_fwm" => BLUE_FWM,
        "ir_fwm" => IR_FWM,
        "ir_swm" => IR_SWM,
        _ => return None,
    };
    Some(parse_loop(text).expect("builtin loops are valid"))
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn location(&self, pos: usize) -> (usize, usize) {
        let before = &self.src[..pos];
        let line = before.matches('\n').count() + 1;
        let col = before.rsplit('\n').next().unwrap().chars().count() + 1;
        (line, col)
    }

    fn err_at(&self, pos: usize, msg: impl Into<String>) -> Error {
        let (line, column) = self.location(pos);
        Error::Parse { line, column, msg: msg.into() }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        self.err_at(self.pos, msg)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        loop {
            let r = self.rest();
            let t = r.trim_start();
            self.pos += r.len() - t.len();
            if t.starts_with('#') {
                self.pos += t.find('\n').unwrap_or(t.len());
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<()> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(self.err(format!("expected {lit:?}")))
        }
    }

    fn word<F: Fn(char) -> bool>(&mut self, ok: F, what: &str) -> Result<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        let len = self.rest().find(|c: char| !ok(c)).unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.err(format!("expected {what}")));
        }
        self.pos += len;
        Ok((start, &self.src[start..start + len]))
    }

    fn level(&mut self) -> Result<String> {
        let is_label = |c: char| c.is_ascii_alphanumeric() || matches!(c, '/' | '_' | '.' | '\'' | '+');
        self.word(is_label, "a level label").map(|(_, s)| s.to_string())
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }
}

pub fn parse_loop(text: &str) -> Result<ProcessLoop> {
    let trimmed = text.trim();
    if !trimmed.starts_with("loop") {
        if let Some(b) = builtin(trimmed) {
            return Ok(b);
        }
    }
    let mut c = Cursor { src: text, pos: 0 };
    let (kpos, kw) = c.word(|ch| ch.is_ascii_alphanumeric() || ch == '_', "the keyword \"loop\"")?;
    if kw != "loop" {
        return Err(c.err_at(kpos, format!("expected \"loop\" or a builtin name, found {kw:?}")));
    }
    let (_, name) = c.word(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-', "a loop name")?;
    c.expect(":")?;
    let mut level = c.level()?;
    let mut steps = Vec::new();
    while !c.at_end() {
        c.expect("-(")?;
        let (dpos, dir) = c.word(|ch| ch.is_ascii_alphabetic(), "absorb or emit")?;
        let direction = match dir {
            "absorb" => Direction::Absorb,
            "emit" => Direction::Emit,
            _ => return Err(c.err_at(dpos, format!("expected absorb or emit, found {dir:?}"))),
        };
        let (wpos, num) = c.word(|ch| ch.is_ascii_digit() || ch == '.' || ch == 'e' || ch == 'E', "a wavelength")?;
        let wavelength_nm: f64 = num.parse().map_err(|_| c.err_at(wpos, format!("bad wavelength {num:?}")))?;
        if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
            return Err(c.err_at(wpos, "wavelength must be positive"));
        }
        if !c.rest().starts_with("nm") {
            return Err(c.err("expected \"nm\" right after the wavelength"));
        }
        c.pos += 2;
        let (mut pump, mut detect) = (false, false);
        while c.eat(",") {
            let (opos, opt) = c.word(|ch| ch.is_ascii_alphabetic(), "pump or detect")?;
            match opt {
                "pump" if !pump => pump = true,
                "detect" if !detect => detect = true,
                "pump" | "detect" => return Err(c.err_at(opos, format!("{opt} given twice"))),
                _ => return Err(c.err_at(opos, format!("unknown step option {opt:?}"))),
            }
        }
        c.expect(")->")?;
        let lpos = c.pos;
        let next = c.level()?;
        if pump && direction == Direction::Emit {
            return Err(c.err_at(lpos, "a pump step must be an absorption"));
        }
        let role = if pump {
            Role::Pump
        } else if detect {
            Role::Generated
        } else {
            Role::Internal
        };
        let (upper, lower) = match direction {
            Direction::Absorb => (next.clone(), level.clone()),
            Direction::Emit => (level.clone(), next.clone()),
        };
        steps.push(Transition { upper, lower, wavelength_nm, direction, role, detect });
        level = next;
    }
    if steps.is_empty() {
        return Err(c.err("a loop needs at least one step"));
    }
    if steps.iter().filter(|t| t.detect).count() > 1 {
        return Err(Error::Closure("at most one step may be marked detect".into()));
    }
    let p = ProcessLoop { name: name.to_string(), steps, pump_oam: PumpOam::new() };
    p.validate()?;
    Ok(p)
}

pub fn energy_residual(p: &ProcessLoop) -> f64 {
    let sum = |d| p.steps.iter().filter(|t| t.direction == d).map(|t| 1.0 / t.wavelength_nm).sum::<f64>();
    let a = sum(Direction::Absorb);
    if a == 0.0 {
        return f64::INFINITY;
    }
    (a - sum(Direction::Emit)).abs() / a
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OamLedger {
    /// Charge carried by each step of the loop, in step order.
    pub assigned: Vec<i32>,
    pub detected: Option<usize>,
    wavelengths: Vec<u32>,
}

impl OamLedger {
    /// Charge on the first step at `wavelength_nm` (rounded to whole nm).
    pub fn ell(&self, wavelength_nm: f64) -> Option<i32> {
        let k = wavelength_nm.round() as u32;
        self.wavelengths.iter().position(|&w| w == k).map(|i| self.assigned[i])
    }

    pub fn detected_ell(&self) -> Option<i32> {
        self.detected.map(|i| self.assigned[i])
    }
}

/// Step that receives the pumps' OAM under `hyp`.
///
/// FWM sends it to the detected field. SWM sends it to the undetected
/// emission nearest in wavelength to a pump (the re-emission most similar to
/// the pump modes), when the loop has one within 1 %.
fn receiver(p: &ProcessLoop, hyp: Hypothesis) -> Result<usize> {
    let detected = p.detected();
    if hyp == Hypothesis::Swm {
        let pumps: Vec<f64> = p.pumps().map(|t| t.wavelength_nm).collect();
        let near = |t: &Transition| {
            pumps.iter().map(|w| (t.wavelength_nm - w).abs() / w).fold(f64::INFINITY, f64::min)
        };
        let re = p
            .steps
            .iter()
            .enumerate()
            .filter(|(_, t)| t.direction == Direction::Emit && !t.detect && near(t) < 0.01)
            .min_by(|a, b| near(a.1).total_cmp(&near(b.1)));
        if let Some((i, _)) = re {
            return Ok(i);
        }
    }
    detected
        .or_else(|| p.steps.iter().position(|t| t.direction == Direction::Emit))
        .ok_or_else(|| Error::Closure("loop has no emission to carry OAM".into()))
}

pub fn predict_oam(p: &ProcessLoop, hyp: Hypothesis, pump_oam: &PumpOam) -> Result<OamLedger> {
    let mut assigned = vec![0i32; p.steps.len()];
    let mut total = 0;
    for (i, t) in p.steps.iter().enumerate() {
        if t.role == Role::Pump {
            let l = *pump_oam.get(&t.key()).ok_or(Error::MissingPumpOam(t.wavelength_nm))?;
            assigned[i] = l;
            total += l;
        }
    }
    // non-pump absorptions carry no OAM, so all pump charge goes to one emission
    assigned[receiver(p, hyp)?] = total;
    let ledger = OamLedger { assigned, detected: p.detected(), wavelengths: p.steps.iter().map(|t| t.key()).collect() };
    debug_assert_eq!(net_oam(p, &ledger), 0);
    Ok(ledger)
}

/// Σ absorbed ℓ − Σ emitted ℓ; zero for every ledger `predict_oam` returns.
pub fn net_oam(p: &ProcessLoop, ledger: &OamLedger) -> i64 {
    p.steps
        .iter()
        .zip(&ledger.assigned)
        .map(|(t, &l)| match t.direction {
            Direction::Absorb => l as i64,
            Direction::Emit => -(l as i64),
        })
        .sum()
}
