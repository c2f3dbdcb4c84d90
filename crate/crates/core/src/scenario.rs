//! Scenario configs, the figure presets and the end-to-end run.
//!
//! Config grammar: one `key = value` per line under `[section]` headers.
//! `#` starts a comment; blank lines are ignored; keys may appear in any
//! order and missing keys keep their defaults. Unknown sections or keys,
//! duplicates and malformed values are errors that name the line.
//!
//! ```text
//! [grid]          n, extent_mm              mask-plane grid (cell grid is derived)
//! [pumps]         waist_mm, focus_m, power780_mw, power776_mw, l780, l776
//! [mask]          model = ideal | octants<N>, rotation_deg
//! [process]       hypothesis = fwm | swm
//! [lens]          focal_m, tilt_deg
//! [diagnostics]   tilted_lens, self_interference, spectrum (bools), stripe_depth, doughnut_dip
//! [self_interference]  magnification, ratio, defocus_m
//! [noise]         amplitude, seed, shift_x_px, shift_y_px
//! [medium]        atom_density_cm3
//! [source]        conical (bool), cone_per_waist
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::diagnostics::{
    add_uniform_noise, central_dip, classify_process, dominant_charge, oam_spectrum, self_interference, shift_image,
    spiral_count, stripe_count_with, ChargeVerdict, Method, ProcessVerdict, SelfInterference, StripeParams, Verdict,
};
use crate::error::{Error, Result, StageExt};
use crate::field::{make_grid, ComplexField, IntensityImage};
use crate::io;
use crate::mixing::{generate_all, MixingScenario, PUMP776_NM, PUMP780_NM};
use crate::process::{builtin, predict_oam, pump_oam, Hypothesis};
use crate::propagate::{astigmatic_focus_image, fourier_focus, relay_to_waist, LensSpec};
use crate::sources::{apply_axicon, apply_spiral_mask, gaussian, BeamSpec, MaskModel, MaskVariant};

/// Atom densities the experiment covered, cm⁻³.
pub const DENSITY_RANGE: (f64, f64) = (3e11, 1.5e12);

pub const PRESETS: [&str; 5] = ["fig1", "fig3", "fig4ab", "fig4cd", "fig5"];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    /// Mask-plane grid extent, mm.
    pub extent_mm: f64,
    pub pump_waist_mm: f64,
    /// Lens that focuses the masked pumps into the cell, m.
    pub pump_focus_m: f64,
    pub power780_mw: f64,
    pub power776_mw: f64,
    pub ell780: i32,
    pub ell776: i32,
    pub mask: MaskVariant,
    pub mask_rotation_deg: f64,
    pub hypothesis: Hypothesis,
    pub lens: LensSpec,
    pub tilted_lens: bool,
    pub self_interference: bool,
    pub spectrum: bool,
    pub stripe_depth: f64,
    pub doughnut_dip: f64,
    pub si: SelfInterference,
    /// Uniform image noise as a fraction of each image's peak.
    pub noise: f64,
    pub seed: u64,
    /// Recentring error applied to analyzed images, pixels.
    pub shift_px: (i64, i64),
    pub atom_density_cm3: f64,
    /// Replace the detected blue field by a conical (axicon) ring.
    pub conical: bool,
    /// Cone phase in radians per embedded waist.
    pub cone_per_waist: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 512,
            extent_mm: 8.0,
            pump_waist_mm: 0.5,
            pump_focus_m: 0.2,
            power780_mw: 5.0,
            power776_mw: 3.0,
            ell780: 0,
            ell776: 0,
            mask: MaskVariant::Octants(8),
            mask_rotation_deg: 0.0,
            hypothesis: Hypothesis::Fwm,
            lens: LensSpec { focal_m: 1.0, tilt_deg: 45.0 },
            tilted_lens: true,
            self_interference: false,
            spectrum: true,
            stripe_depth: StripeParams::default().depth,
            doughnut_dip: crate::diagnostics::DOUGHNUT_DIP,
            si: SelfInterference::default(),
            noise: 0.0,
            seed: 1,
            shift_px: (0, 0),
            atom_density_cm3: 1e12,
            conical: false,
            cone_per_waist: 8.0,
        }
    }
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn parse_mask(v: &str) -> Option<MaskVariant> {
    let v = v.to_ascii_lowercase();
    if v == "ideal" || v == "ideal_ramp" {
        return Some(MaskVariant::IdealRamp);
    }
    v.strip_prefix("octants").and_then(|k| k.parse().ok()).map(MaskVariant::Octants)
}

fn mask_name(m: MaskVariant) -> String {
    match m {
        MaskVariant::IdealRamp => "ideal".into(),
        MaskVariant::Octants(k) => format!("octants{k}"),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        let mut c = ScenarioConfig::default();
        let mut section: Option<String> = None;
        let mut seen = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.split('#').next().unwrap().trim();
            if s.is_empty() {
                continue;
            }
            if let Some(name) = s.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| cfg_err(line, "unclosed section header"))?.trim();
                if !SECTIONS.contains(&name) {
                    return Err(cfg_err(line, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let sec = section.as_deref().ok_or_else(|| cfg_err(line, "key before any [section]"))?;
            let (key, val) = s.split_once('=').ok_or_else(|| cfg_err(line, format!("expected `key = value`, got {s:?}")))?;
            let (key, val) = (key.trim(), val.trim());
            if let Some(prev) = seen.insert(format!("{sec}.{key}"), line) {
                return Err(cfg_err(line, format!("{key} already set on line {prev}")));
            }
            c.set(sec, key, val).map_err(|msg| cfg_err(line, msg))?;
        }
        Ok(c)
    }

    fn set(&mut self, sec: &str, key: &str, v: &str) -> std::result::Result<(), String> {
        let f = || v.parse::<f64>().map_err(|_| format!("{key}: expected a number, got {v:?}"));
        let i = || v.parse::<i64>().map_err(|_| format!("{key}: expected an integer, got {v:?}"));
        let b = || parse_bool(v).ok_or_else(|| format!("{key}: expected true or false, got {v:?}"));
        let small = |x: i64| i32::try_from(x).map_err(|_| format!("{key}: {x} is out of range"));
        match (sec, key) {
            ("grid", "n") => self.n = usize::try_from(i()?).map_err(|_| format!("n must be positive, got {v}"))?,
            ("grid", "extent_mm") => self.extent_mm = f()?,
            ("pumps", "waist_mm") => self.pump_waist_mm = f()?,
            ("pumps", "focus_m") => self.pump_focus_m = f()?,
            ("pumps", "power780_mw") => self.power780_mw = f()?,
            ("pumps", "power776_mw") => self.power776_mw = f()?,
            ("pumps", "l780") => self.ell780 = small(i()?)?,
            ("pumps", "l776") => self.ell776 = small(i()?)?,
            ("mask", "model") => self.mask = parse_mask(v).ok_or_else(|| format!("unknown mask model {v:?}"))?,
            ("mask", "rotation_deg") => self.mask_rotation_deg = f()?,
            ("process", "hypothesis") => self.hypothesis = v.parse().map_err(|e: Error| e.to_string())?,
            ("lens", "focal_m") => self.lens.focal_m = f()?,
            ("lens", "tilt_deg") => self.lens.tilt_deg = f()?,
            ("diagnostics", "tilted_lens") => self.tilted_lens = b()?,
            ("diagnostics", "self_interference") => self.self_interference = b()?,
            ("diagnostics", "spectrum") => self.spectrum = b()?,
            ("diagnostics", "stripe_depth") => self.stripe_depth = f()?,
            ("diagnostics", "doughnut_dip") => self.doughnut_dip = f()?,
            ("self_interference", "magnification") => self.si.magnification = f()?,
            ("self_interference", "ratio") => self.si.ratio = f()?,
            ("self_interference", "defocus_m") => self.si.defocus_m = f()?,
            ("noise", "amplitude") => self.noise = f()?,
            ("noise", "seed") => self.seed = v.parse().map_err(|_| format!("seed: expected an unsigned integer, got {v:?}"))?,
            ("noise", "shift_x_px") => self.shift_px.0 = i()?,
            ("noise", "shift_y_px") => self.shift_px.1 = i()?,
            ("medium", "atom_density_cm3") => self.atom_density_cm3 = f()?,
            ("source", "conical") => self.conical = b()?,
            ("source", "cone_per_waist") => self.cone_per_waist = f()?,
            _ => return Err(format!("unknown key {key:?} in [{sec}]")),
        }
        Ok(())
    }

    /// Canonical text; `parse(render(c)) == c`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut sec = |name: &str, kv: &[(&str, String)]| {
            writeln!(s, "[{name}]").unwrap();
            for (k, v) in kv {
                writeln!(s, "{k} = {v}").unwrap();
            }
            s.push('\n');
        };
        sec("grid", &[("n", self.n.to_string()), ("extent_mm", self.extent_mm.to_string())]);
        sec(
            "pumps",
            &[
                ("waist_mm", self.pump_waist_mm.to_string()),
                ("focus_m", self.pump_focus_m.to_string()),
                ("power780_mw", self.power780_mw.to_string()),
                ("power776_mw", self.power776_mw.to_string()),
                ("l780", self.ell780.to_string()),
                ("l776", self.ell776.to_string()),
            ],
        );
        sec("mask", &[("model", mask_name(self.mask)), ("rotation_deg", self.mask_rotation_deg.to_string())]);
        sec("process", &[("hypothesis", self.hypothesis.to_string())]);
        sec("lens", &[("focal_m", self.lens.focal_m.to_string()), ("tilt_deg", self.lens.tilt_deg.to_string())]);
        sec(
            "diagnostics",
            &[
                ("tilted_lens", self.tilted_lens.to_string()),
                ("self_interference", self.self_interference.to_string()),
                ("spectrum", self.spectrum.to_string()),
                ("stripe_depth", self.stripe_depth.to_string()),
                ("doughnut_dip", self.doughnut_dip.to_string()),
            ],
        );
        sec(
            "self_interference",
            &[
                ("magnification", self.si.magnification.to_string()),
                ("ratio", self.si.ratio.to_string()),
                ("defocus_m", self.si.defocus_m.to_string()),
            ],
        );
        sec(
            "noise",
            &[
                ("amplitude", self.noise.to_string()),
                ("seed", self.seed.to_string()),
                ("shift_x_px", self.shift_px.0.to_string()),
                ("shift_y_px", self.shift_px.1.to_string()),
            ],
        );
        sec("medium", &[("atom_density_cm3", self.atom_density_cm3.to_string())]);
        sec("source", &[("conical", self.conical.to_string()), ("cone_per_waist", self.cone_per_waist.to_string())]);
        s.pop();
        s
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        Sha256::digest(self.render().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every parameter; returns warnings for values that are legal but unusual.
    pub fn validate(&self) -> Result<Vec<String>> {
        make_grid(self.n, self.extent_mm)?;
        let pos = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {x}")))
            }
        };
        pos(self.pump_waist_mm, "pump waist")?;
        pos(self.pump_focus_m, "pump focal length")?;
        pos(self.power780_mw, "780 nm pump power")?;
        pos(self.power776_mw, "776 nm pump power")?;
        pos(self.atom_density_cm3, "atom density")?;
        self.lens.check()?;
        if self.tilted_lens && self.lens.tilt_deg == 0.0 {
            return Err(Error::invalid("the tilted-lens diagnostic needs a nonzero tilt"));
        }
        if let MaskVariant::Octants(k) = self.mask {
            if k < 2 {
                return Err(Error::invalid(format!("a stepped mask needs at least 2 steps, got {k}")));
            }
        }
        if !(self.si.magnification > 1.0 && self.si.magnification.is_finite()) {
            return Err(Error::invalid(format!("magnification must exceed 1, got {}", self.si.magnification)));
        }
        if !(self.si.ratio > 0.0 && self.si.ratio <= 1.0) {
            return Err(Error::invalid(format!("reference ratio must lie in (0, 1], got {}", self.si.ratio)));
        }
        pos(self.si.defocus_m, "self-interference defocus")?;
        if !(self.stripe_depth > 0.0 && self.stripe_depth < 1.0) {
            return Err(Error::invalid(format!("stripe depth must lie in (0, 1), got {}", self.stripe_depth)));
        }
        if !(self.doughnut_dip > 0.0 && self.doughnut_dip < 1.0) {
            return Err(Error::invalid(format!("doughnut dip must lie in (0, 1), got {}", self.doughnut_dip)));
        }
        if !(self.noise >= 0.0 && self.noise < 1.0) {
            return Err(Error::invalid(format!("noise amplitude must lie in [0, 1), got {}", self.noise)));
        }
        if !(self.cone_per_waist >= 0.0 && self.cone_per_waist.is_finite()) {
            return Err(Error::invalid(format!("cone phase must be non-negative, got {}", self.cone_per_waist)));
        }
        if self.conical && self.cone_per_waist == 0.0 {
            return Err(Error::invalid("a conical source needs a nonzero cone phase"));
        }
        let mut warnings = Vec::new();
        let (lo, hi) = DENSITY_RANGE;
        if !(lo..=hi).contains(&self.atom_density_cm3) {
            warnings.push(format!(
                "atom density {:e} cm^-3 lies outside the measured range {lo:e} to {hi:e}",
                self.atom_density_cm3
            ));
        }
        if self.shift_px.0.unsigned_abs().max(self.shift_px.1.unsigned_abs()) as usize * 8 > self.n {
            warnings.push(format!("recentring error {:?} px is large for an {}-sample grid", self.shift_px, self.n));
        }
        Ok(warnings)
    }
}

const SECTIONS: [&str; 10] =
    ["grid", "pumps", "mask", "process", "lens", "diagnostics", "self_interference", "noise", "medium", "source"];

/// Config for one of the figure scenarios. `fig3cd` is accepted for `fig3`.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let base = ScenarioConfig::default();
    let c = match name.to_ascii_lowercase().as_str() {
        "fig1" => ScenarioConfig { ell776: 1, self_interference: true, ..base },
        "fig3" | "fig3cd" => ScenarioConfig { conical: true, ..base },
        "fig4ab" => ScenarioConfig { ell780: 1, ..base },
        "fig4cd" => ScenarioConfig { ell776: -1, ..base },
        "fig5" => ScenarioConfig { ell780: 1, ell776: 1, self_interference: true, ..base },
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldReport {
    pub name: &'static str,
    pub wavelength_nm: f64,
    /// Dominant order of the complex field, which no camera could see.
    pub oracle: i32,
    pub verdicts: Vec<ChargeVerdict>,
    /// Central dip of the untilted focus image.
    pub central_dip: f64,
    pub predicted_fwm: i32,
    pub predicted_swm: i32,
    /// Intensity relative to the reference pump powers and density.
    pub relative_intensity: f64,
}

impl FieldReport {
    pub fn verdict(&self, m: Method) -> Option<&ChargeVerdict> {
        self.verdicts.iter().find(|v| v.method == m)
    }

    /// Verdict the classification uses: tilted lens, then self-interference, then spectrum.
    pub fn preferred(&self) -> Option<&ChargeVerdict> {
        [Method::TiltedLens, Method::SelfInterference, Method::Spectrum].iter().find_map(|&m| self.verdict(m))
    }

    pub fn is_doughnut(&self, threshold: f64) -> bool {
        self.central_dip < threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub ell780: i32,
    pub ell776: i32,
    pub hypothesis: Hypothesis,
    pub conical: bool,
    pub fields: Vec<FieldReport>,
    pub process: ProcessVerdict,
    /// Why the classification fell back to inconclusive, if it did.
    pub note: Option<String>,
    pub warnings: Vec<String>,
    pub config_hash: String,
    pub version: String,
}

fn charge_str(v: &ChargeVerdict) -> String {
    match v.signed() {
        Some(l) => l.to_string(),
        None => format!("?{}", v.magnitude),
    }
}

impl RunReport {
    pub fn field(&self, name: &str) -> Option<&FieldReport> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn verdict(&self) -> Verdict {
        self.process.verdict
    }

    /// Human-readable text followed by a `[summary]` block of `key = value` lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        writeln!(w, "oamtrace {} run report", self.version).unwrap();
        writeln!(w, "config sha256 {}", self.config_hash).unwrap();
        let src = if self.conical { ", conical source" } else { "" };
        writeln!(
            w,
            "pumps: l780 = {:+}, l776 = {:+}; simulated process {}{src}",
            self.ell780, self.ell776, self.hypothesis
        )
        .unwrap();
        for warn in &self.warnings {
            writeln!(w, "warning: {warn}").unwrap();
        }
        for f in &self.fields {
            writeln!(w).unwrap();
            writeln!(w, "{} ({} nm)", f.name, f.wavelength_nm).unwrap();
            writeln!(w, "  field charge       {:+}", f.oracle).unwrap();
            for v in &f.verdicts {
                writeln!(w, "  {:<18} {v}", v.method.name()).unwrap();
            }
            writeln!(w, "  central dip        {:.4}", f.central_dip).unwrap();
            writeln!(w, "  expected if fwm    {:+}", f.predicted_fwm).unwrap();
            writeln!(w, "  expected if swm    {:+}", f.predicted_swm).unwrap();
            writeln!(w, "  relative intensity {:.4e}", f.relative_intensity).unwrap();
        }
        writeln!(w).unwrap();
        writeln!(w, "verdict: {}", self.process.verdict).unwrap();
        if let Some(n) = &self.note {
            writeln!(w, "  ({n})").unwrap();
        }
        for sup in &self.process.supporting {
            writeln!(w, "  {} measured {:+}, fwm predicts {:+}, swm predicts {:+}", sup.field, sup.measured, sup.fwm, sup.swm)
                .unwrap();
        }

        writeln!(w).unwrap();
        writeln!(w, "[summary]").unwrap();
        let mut kv = |k: &str, v: String| writeln!(w, "{k} = {v}").unwrap();
        kv("version", self.version.clone());
        kv("config_sha256", self.config_hash.clone());
        kv("l780", self.ell780.to_string());
        kv("l776", self.ell776.to_string());
        kv("hypothesis", self.hypothesis.to_string());
        kv("conical", self.conical.to_string());
        for f in &self.fields {
            let p = f.name;
            kv(&format!("{p}.oracle"), f.oracle.to_string());
            for v in &f.verdicts {
                kv(&format!("{p}.{}", v.method.name()), charge_str(v));
                kv(&format!("{p}.{}.magnitude", v.method.name()), v.magnitude.to_string());
                kv(&format!("{p}.{}.confidence", v.method.name()), format!("{:.4}", v.confidence));
            }
            kv(&format!("{p}.central_dip"), format!("{:.6}", f.central_dip));
            kv(&format!("{p}.predicted.fwm"), f.predicted_fwm.to_string());
            kv(&format!("{p}.predicted.swm"), f.predicted_swm.to_string());
            kv(&format!("{p}.relative_intensity"), format!("{:.6e}", f.relative_intensity));
        }
        kv("verdict", self.process.verdict.to_string());
        s
    }
}

/// The `[summary]` block of a rendered report as a map.
pub fn parse_summary(report: &str) -> BTreeMap<String, String> {
    report
        .lines()
        .skip_while(|l| l.trim() != "[summary]")
        .skip(1)
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect()
}

/// A file a run produces, before it is written.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Field(ComplexField),
    Image(IntensityImage),
}

/// Report plus named artifacts, in a fixed order.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub report: RunReport,
    pub artifacts: Vec<(String, Artifact)>,
}

/// Pump at the cell: mask-plane Gaussian, spiral mask, then a 2f focus.
pub fn pump_at_cell(cfg: &ScenarioConfig, ell: i32, wavelength_nm: f64) -> Result<ComplexField> {
    let g = make_grid(cfg.n, cfg.extent_mm)?;
    let mut f = gaussian(g, BeamSpec::new(cfg.pump_waist_mm, wavelength_nm, 0))?;
    if ell != 0 {
        let mask = MaskModel { variant: cfg.mask, charge: ell, rotation_deg: cfg.mask_rotation_deg };
        f = apply_spiral_mask(&f, mask)?;
    }
    fourier_focus(&f, cfg.pump_focus_m, cell_grid(cfg)?)
}

/// Cell grid: 16 focused 780 nm spot radii across, shared by both pumps.
fn cell_grid(cfg: &ScenarioConfig) -> Result<crate::field::GridSpec> {
    let spot = PUMP780_NM * 1e-6 * cfg.pump_focus_m * 1e3 / (std::f64::consts::PI * cfg.pump_waist_mm);
    make_grid(cfg.n, 16.0 * spot)
}

/// Waist at which the self-interference defocus equals the Rayleigh range, mm.
pub fn self_interference_waist_mm(si: SelfInterference, wavelength_nm: f64) -> f64 {
    (wavelength_nm * 1e-6 * si.defocus_m * 1e3 / std::f64::consts::PI).sqrt()
}

struct Camera<'a> {
    cfg: &'a ScenarioConfig,
    next_seed: u64,
}

impl Camera<'_> {
    /// Applies the configured recentring error and noise.
    fn capture(&mut self, img: IntensityImage) -> Result<IntensityImage> {
        let (dx, dy) = self.cfg.shift_px;
        let img = if (dx, dy) == (0, 0) { img } else { shift_image(&img, dx, dy) };
        let seed = self.cfg.seed.wrapping_add(self.next_seed);
        self.next_seed += 1;
        add_uniform_noise(&img, self.cfg.noise, seed)
    }
}

/// Runs the pipeline in memory.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Simulation> {
    let warnings = cfg.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let p780 = pump_at_cell(cfg, cfg.ell780, PUMP780_NM).stage("780 nm pump")?;
    let p776 = pump_at_cell(cfg, cfg.ell776, PUMP776_NM).stage("776 nm pump")?;
    let scen = MixingScenario::new(p780.clone(), p776.clone(), cfg.ell780, cfg.ell776, cfg.hypothesis);
    let gen = generate_all(&scen).stage("mixing")?;
    let pumps = pump_oam(cfg.ell780, cfg.ell776);
    let other = match cfg.hypothesis {
        Hypothesis::Fwm => Hypothesis::Swm,
        Hypothesis::Swm => Hypothesis::Fwm,
    };
    let other_ir = predict_oam(&builtin(if other == Hypothesis::Fwm { "ir_fwm" } else { "ir_swm" }).unwrap(), other, &pumps)?;
    let (ir_fwm, ir_swm) = match cfg.hypothesis {
        Hypothesis::Fwm => (gen.ledger_ir.detected_ell(), other_ir.detected_ell()),
        Hypothesis::Swm => (other_ir.detected_ell(), gen.ledger_ir.detected_ell()),
    };
    let blue_pred = gen.ledger_blue.detected_ell().unwrap_or(0);
    let p_rel = (cfg.power780_mw / 5.0, cfg.power776_mw / 3.0);
    let density = cfg.atom_density_cm3 / 1e12;
    let ir_scale = match cfg.hypothesis {
        Hypothesis::Fwm => p_rel.0 * p_rel.0 * p_rel.1,
        Hypothesis::Swm => p_rel.0 * p_rel.1,
    };

    let mut artifacts = vec![
        ("pump780.oamf".to_string(), Artifact::Field(p780)),
        ("pump776.oamf".to_string(), Artifact::Field(p776)),
    ];
    let mut cam = Camera { cfg, next_seed: 0 };
    let stripe_params = StripeParams { depth: cfg.stripe_depth, ..StripeParams::default() };
    let mut fields = Vec::new();
    let blue_wl = gen.blue.wavelength_nm();
    for (name, field, pred, scale) in [
        ("blue", gen.blue, (blue_pred, blue_pred), p_rel.0 * p_rel.1 * density),
        ("ir", gen.ir, (ir_fwm.unwrap_or(0), ir_swm.unwrap_or(0)), ir_scale * density),
    ] {
        let lam = field.wavelength_nm();
        let stage = |what: &str| format!("{name} {what}");
        // the camera arm: relay to the waist the tilted lens converts best
        let w_conv = cfg
            .lens
            .conversion_waist_mm(lam)
            .unwrap_or_else(|| self_interference_waist_mm(cfg.si, lam));
        let mut at_lens = relay_to_waist(&field, w_conv).stage(&stage("relay"))?;
        let conical = cfg.conical && name == "blue";
        if conical {
            at_lens = apply_axicon(&at_lens, cfg.cone_per_waist / w_conv)?;
        }
        let detected = if conical { at_lens.clone() } else { field.clone() };
        artifacts.push((format!("{name}.oamf"), Artifact::Field(detected.clone())));
        let oracle = dominant_charge(&detected);

        // A zero border keeps the focusing spectrum inside the band when
        // mask scatter spreads the beam over most of the grid.
        let n = at_lens.grid().n();
        let padded = at_lens.padded(2 * n)?;
        let focus_image = |lens: LensSpec, what: &str| -> Result<IntensityImage> {
            astigmatic_focus_image(&padded, lens).and_then(|img| img.cropped(n)).stage(&stage(what))
        };

        let mut verdicts = Vec::new();
        if cfg.tilted_lens {
            let img = focus_image(cfg.lens, "tilted lens")?;
            let img = cam.capture(img)?;
            verdicts.push(stripe_count_with(&img, cfg.lens, &stripe_params).stage(&stage("stripe count"))?);
            artifacts.push((format!("{name}_tilted"), Artifact::Image(img)));
        }
        // too faint at 1370 nm for the self-interference arm, as in the experiment
        if cfg.self_interference && lam == blue_wl {
            let w = self_interference_waist_mm(cfg.si, lam);
            let src = if conical { at_lens.rescaled(at_lens.grid().extent_mm() * w / w_conv)? } else { relay_to_waist(&field, w)? };
            let img = self_interference(&src, cfg.si).stage(&stage("self-interference"))?;
            let img = cam.capture(img)?;
            verdicts.push(spiral_count(&img).stage(&stage("spiral count"))?);
            artifacts.push((format!("{name}_selfint"), Artifact::Image(img)));
        }
        if cfg.spectrum {
            let s = oam_spectrum(&detected, 8).stage(&stage("spectrum"))?;
            let l = s.dominant();
            verdicts.push(ChargeVerdict::from_charge(l, s.weight(l), Method::Spectrum));
        }
        let untilted = LensSpec { focal_m: cfg.lens.focal_m, tilt_deg: 0.0 };
        let focus = focus_image(untilted, "focus")?;
        let dip = central_dip(&focus)?;
        artifacts.push((format!("{name}_focus"), Artifact::Image(focus)));
        fields.push(FieldReport {
            name,
            wavelength_nm: lam,
            oracle,
            verdicts,
            central_dip: dip,
            predicted_fwm: pred.0,
            predicted_swm: pred.1,
            relative_intensity: scale,
        });
    }

    let none = ChargeVerdict { magnitude: 0, sign: crate::diagnostics::Sign::Unknown, confidence: 0.0, method: Method::Spectrum };
    let (b, i) = (fields[0].preferred().copied(), fields[1].preferred().copied());
    let (process, note) = match classify_process(&pumps, &b.unwrap_or(none), &i.unwrap_or(none)) {
        Ok(p) => (p, None),
        Err(e) if b.is_none() || i.is_none() => (inconclusive(), Some(format!("no diagnostic enabled: {e}"))),
        Err(e @ (Error::UnsignedInput(_) | Error::InvalidArgument(_))) => (inconclusive(), Some(e.to_string())),
        Err(e) => return Err(e).stage("classification"),
    };
    let report = RunReport {
        ell780: cfg.ell780,
        ell776: cfg.ell776,
        hypothesis: cfg.hypothesis,
        conical: cfg.conical,
        fields,
        process,
        note,
        warnings,
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(Simulation { report, artifacts })
}

fn inconclusive() -> ProcessVerdict {
    ProcessVerdict { verdict: Verdict::Inconclusive, supporting: Vec::new() }
}

/// Runs the pipeline and writes fields (`.oamf`), images (`.oami` and
/// `.pgm`), `config.txt` and `report.txt` into `out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport> {
    let sim = simulate(cfg)?;
    fs::create_dir_all(out_dir).map_err(Error::from).stage("output directory")?;
    for (name, a) in &sim.artifacts {
        match a {
            Artifact::Field(f) => io::write_field(f, &out_dir.join(name)),
            Artifact::Image(img) => {
                io::write_image(img, &out_dir.join(format!("{name}.oami")))?;
                io::write_pgm(img, &out_dir.join(format!("{name}.pgm")))
            }
        }
        .stage("writing artifacts")?;
    }
    fs::write(out_dir.join("config.txt"), cfg.render()).map_err(Error::from).stage("writing config")?;
    fs::write(out_dir.join("report.txt"), sim.report.render()).map_err(Error::from).stage("writing report")?;
    Ok(sim.report)
}

/// Loads a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::parse(&fs::read_to_string(path)?)
}
