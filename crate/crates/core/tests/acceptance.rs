//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Expected values are computed here from first principles (charge
//! arithmetic, the staircase Fourier series, photon-energy sums) rather than
//! taken from the library.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use oamtrace::diagnostics::{
    calibrate_stripe_sign, central_dip, classify_process, dominant_charge, oam_spectrum, stripe_count, ChargeVerdict,
    Method, Verdict,
};
use oamtrace::io::{decode_field, encode_field};
use oamtrace::mixing::{generate_blue, generate_ir, MixingScenario};
use oamtrace::process::{builtin, energy_residual, pump_oam, Hypothesis};
use oamtrace::propagate::{angular_spectrum, astigmatic_focus_image, LensSpec};
use oamtrace::scenario::{preset, pump_at_cell, run_scenario, simulate, ScenarioConfig};
use oamtrace::sources::{apply_axicon, apply_spiral_mask, gaussian, lg_mode, BeamSpec, MaskModel, MaskVariant};
use oamtrace::{make_grid, overlap, power, ComplexField};

const ELLS: [i32; 5] = [-2, -1, 0, 1, 2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Pump pair perturbations for the robustness run.
#[derive(Clone, Copy)]
struct Perturb {
    /// Scale on pump power before mixing.
    power: f64,
    noise: f64,
    shift: (i64, i64),
}

const CLEAN: Perturb = Perturb { power: 1.0, noise: 0.0, shift: (0, 0) };
const ROUGH: Perturb = Perturb { power: 0.5, noise: 0.02, shift: (3, -3) };

struct Pumps {
    p780: Vec<ComplexField>,
    p776: Vec<ComplexField>,
}

fn pumps(scale: f64) -> Pumps {
    let cfg = ScenarioConfig::default();
    let k = Complex64::new(scale.sqrt(), 0.0);
    let make = |nm: f64| ELLS.iter().map(|&l| pump_at_cell(&cfg, l, nm).unwrap().scale(k)).collect();
    Pumps { p780: make(780.0), p776: make(776.0) }
}

fn scen(p: &Pumps, a: usize, b: usize, h: Hypothesis) -> MixingScenario {
    MixingScenario::new(p.p780[a].clone(), p.p776[b].clone(), ELLS[a], ELLS[b], h)
}

fn c1_sum_rule(p: &Pumps) -> Outcome {
    let t = Instant::now();
    let mut bad = Vec::new();
    for a in 0..5 {
        for b in 0..5 {
            let got = dominant_charge(&generate_blue(&scen(p, a, b, Hypothesis::Fwm)).unwrap());
            if got != ELLS[a] + ELLS[b] {
                bad.push(format!("({},{})->{got}", ELLS[a], ELLS[b]));
            }
        }
    }
    let el = t.elapsed();
    let pass = bad.is_empty() && el <= Duration::from_secs(60);
    outcome(pass, format!("25 pairs at n=512, {} mismatches {:?}, {:.1} s for mixing and projection", bad.len(), bad, el.as_secs_f64()))
}

fn c2_ir_rule(p: &Pumps) -> Outcome {
    let mut bad = Vec::new();
    for a in 0..5 {
        for b in 0..5 {
            for (h, want) in [(Hypothesis::Fwm, ELLS[b]), (Hypothesis::Swm, 0)] {
                let got = dominant_charge(&generate_ir(&scen(p, a, b, h)).unwrap());
                if got != want {
                    bad.push(format!("{h}({},{})->{got}", ELLS[a], ELLS[b]));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("50 cases, {} mismatches {:?}", bad.len(), bad))
}

fn lens() -> LensSpec {
    LensSpec::new(1.0, 45.0).unwrap()
}

fn camera(img: oamtrace::IntensityImage, q: Perturb, seed: u64) -> oamtrace::IntensityImage {
    let img = oamtrace::diagnostics::shift_image(&img, q.shift.0, q.shift.1);
    oamtrace::diagnostics::add_uniform_noise(&img, q.noise, seed).unwrap()
}

fn c3_tilted_lens(q: Perturb) -> Outcome {
    let cal = calibrate_stripe_sign(lens()).unwrap();
    let w = lens().conversion_waist_mm(420.0).unwrap();
    let g = make_grid(1024, 16.0 * w).unwrap();
    let mut bad = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut min_conf = f64::INFINITY;
    for ell in -3i32..=3 {
        let t = Instant::now();
        let spec = BeamSpec::new(w, 420.0, ell);
        let f = if ell == 0 { gaussian(g, spec) } else { lg_mode(g, spec) }.unwrap();
        let img = camera(astigmatic_focus_image(&f, lens()).unwrap(), q, (100 + ell) as u64);
        let v = stripe_count(&img, lens()).unwrap();
        slowest = slowest.max(t.elapsed());
        let sign_ok = ell == 0 || v.sign.value() == Some(ell.signum());
        if ell != 0 {
            min_conf = min_conf.min(v.confidence);
        }
        if v.magnitude != ell.unsigned_abs() || !sign_ok || (ell != 0 && v.confidence < 0.8) {
            bad.push(format!("{ell}->{v}"));
        }
    }
    let pass = bad.is_empty() && slowest <= Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "l=-3..3 at n=1024, calibration sign {cal:+}, min confidence {min_conf:.2}, slowest {:.2} s, failures {bad:?}",
            slowest.as_secs_f64()
        ),
    )
}

fn c4_conical(q: Perturb) -> Outcome {
    let w = lens().conversion_waist_mm(420.0).unwrap();
    let g = make_grid(1024, 16.0 * w).unwrap();
    let flat = LensSpec::new(1.0, 0.0).unwrap();
    let axi = apply_axicon(&gaussian(g, BeamSpec::new(w, 420.0, 0)).unwrap(), 8.0 / w).unwrap();
    let lg = lg_mode(g, BeamSpec::new(w, 420.0, 1)).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, f, want) in [("axicon", &axi, 0u32), ("LG1", &lg, 1)] {
        let dip = central_dip(&camera(astigmatic_focus_image(f, flat).unwrap(), q, 7)).unwrap();
        let v = stripe_count(&camera(astigmatic_focus_image(f, lens()).unwrap(), q, 8), lens()).unwrap();
        pass &= dip <= 0.1 && v.magnitude == want;
        parts.push(format!("{name}: dip {dip:.3}, stripes {}", v.magnitude));
    }
    outcome(pass, parts.join("; "))
}

fn with(cfg: ScenarioConfig, q: Perturb) -> ScenarioConfig {
    ScenarioConfig {
        power780_mw: cfg.power780_mw * q.power,
        power776_mw: cfg.power776_mw * q.power,
        noise: q.noise,
        shift_px: q.shift,
        ..cfg
    }
}

fn c5_fig5(q: Perturb) -> Outcome {
    let r = match simulate(&with(preset("fig5").unwrap(), q)) {
        Ok(s) => s.report,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let b = r.field("blue").unwrap();
    let i = r.field("ir").unwrap();
    let mag = |f: &oamtrace::scenario::FieldReport, m| f.verdict(m).map(|v: &ChargeVerdict| v.magnitude);
    let (bt, bs, it) = (mag(b, Method::TiltedLens), mag(b, Method::SelfInterference), mag(i, Method::TiltedLens));
    let pass = bt == Some(2) && bs == Some(2) && it == Some(1) && r.verdict() == Verdict::Fwm;
    outcome(pass, format!("blue stripes {bt:?}, blue spiral {bs:?}, IR stripes {it:?}, verdict {}", r.verdict()))
}

fn expected_verdict(l776: i32, h: Hypothesis) -> Verdict {
    match (l776, h) {
        (0, _) => Verdict::Inconclusive,
        (_, Hypothesis::Fwm) => Verdict::Fwm,
        (_, Hypothesis::Swm) => Verdict::Swm,
    }
}

fn c6_decision_table(q: Perturb) -> Outcome {
    let mut bad = Vec::new();
    for h in [Hypothesis::Fwm, Hypothesis::Swm] {
        for a in ELLS {
            for b in ELLS {
                let cfg = ScenarioConfig {
                    ell780: a,
                    ell776: b,
                    hypothesis: h,
                    spectrum: false,
                    self_interference: false,
                    ..ScenarioConfig::default()
                };
                let got = match simulate(&with(cfg, q)) {
                    Ok(s) => {
                        let r = s.report;
                        let v = |n: &str| *r.field(n).unwrap().verdict(Method::TiltedLens).unwrap();
                        match classify_process(&pump_oam(a, b), &v("blue"), &v("ir")) {
                            Ok(p) => p.verdict.to_string(),
                            Err(e) => format!("error {e}"),
                        }
                    }
                    Err(e) => format!("error {e}"),
                };
                if got != expected_verdict(b, h).to_string() {
                    bad.push(format!("{h}({a},{b})->{got}"));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("50 tilted-lens runs, {} wrong: {bad:?}", bad.len()))
}

fn c7_energy() -> Outcome {
    let blue = energy_residual(&builtin("blue_fwm").unwrap());
    let ir = energy_residual(&builtin("ir_fwm").unwrap());
    let a: f64 = 1.0 / 780.0 + 1.0 / 776.0;
    let blue_ref = (a - 1.0 / 5230.0 - 1.0 / 420.0).abs() / a;
    let b: f64 = 1.0 / 776.0;
    let ir_ref = (b - 1.0 / 5230.0 - 1.0 / 2730.0 - 1.0 / 1370.0).abs() / b;
    let pass = blue <= 1e-3 && ir <= 2e-3 && (blue - blue_ref).abs() < 1e-12 && (ir - ir_ref).abs() < 1e-12;
    outcome(pass, format!("blue_fwm {blue:.3e} (hand sum {blue_ref:.3e}), ir_fwm {ir:.3e} (hand sum {ir_ref:.3e})"))
}

fn c8_numerics() -> Outcome {
    let g = make_grid(256, 8.0).unwrap();
    let beams: Vec<ComplexField> = (-3..=3).map(|l| lg_mode(g, BeamSpec::new(1.0, 780.0, l)).unwrap()).collect();
    let mut drift: f64 = 0.0;
    let mut rms: f64 = 0.0;
    for f in &beams {
        let p = angular_spectrum(f, 0.5).unwrap();
        drift = drift.max((power(&p) / power(f) - 1.0).abs());
        let back = angular_spectrum(&p, -0.5).unwrap();
        let e = f.amp().iter().zip(back.amp()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / g.len() as f64;
        rms = rms.max(e.sqrt());
    }
    let (mut off, mut diag): (f64, f64) = (0.0, 0.0);
    for (i, a) in beams.iter().enumerate() {
        for (j, b) in beams.iter().enumerate() {
            let o = overlap(a, b).unwrap().norm();
            if i == j {
                diag = diag.max((o - 1.0).abs());
            } else {
                off = off.max(o);
            }
        }
    }
    let pass = drift <= 1e-6 && rms <= 1e-8 && off <= 1e-6 && diag <= 1e-4;
    outcome(pass, format!("power drift {drift:.1e}, round-trip rms {rms:.1e}, LG off-diagonal {off:.1e}, diagonal {diag:.1e}"))
}

fn c9_octants() -> Outcome {
    let g = gaussian(make_grid(256, 8.0).unwrap(), BeamSpec::new(1.0, 780.0, 0)).unwrap();
    let f = apply_spiral_mask(&g, MaskModel::new(MaskVariant::Octants(8), 1)).unwrap();
    let w = oam_spectrum(&f, 8).unwrap().weight(1);
    // staircase of 8 equal steps: the l = 1 coefficient is sinc(pi/8)
    let x = PI / 8.0;
    let oracle = (x.sin() / x).powi(2);
    let pass = (w - 0.9496).abs() <= 0.01 && (oracle - 0.9496).abs() < 1e-4;
    outcome(pass, format!("weight {w:.4}, series {oracle:.4}"))
}

fn c11_determinism() -> Outcome {
    let f = lg_mode(make_grid(64, 5.0).unwrap(), BeamSpec::new(0.7, 776.0, 2)).unwrap();
    let back = decode_field(&encode_field(&f)).unwrap();
    let bits = |f: &ComplexField| f.amp().iter().flat_map(|a| [a.re.to_bits(), a.im.to_bits()]).collect::<Vec<_>>();
    let exact = bits(&f) == bits(&back) && f.wavelength_nm().to_bits() == back.wavelength_nm().to_bits();
    let cfg = with(preset("fig4cd").unwrap(), ROUGH);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_scenario(&cfg, d.path()).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let same = names
        .iter()
        .all(|n| std::fs::read(dirs[0].path().join(n)).unwrap() == std::fs::read(dirs[1].path().join(n)).unwrap());
    let count = std::fs::read_dir(dirs[1].path()).unwrap().count();
    outcome(exact && same && count == names.len(), format!("field round trip bit-exact {exact}; {} files byte-identical {same}", names.len()))
}

fn c10_robustness(p_half: &Pumps) -> Outcome {
    let parts = [
        ("1", c1_sum_rule(p_half)),
        ("2", c2_ir_rule(p_half)),
        ("3", c3_tilted_lens(ROUGH)),
        ("4", c4_conical(ROUGH)),
        ("5", c5_fig5(ROUGH)),
        ("6", c6_decision_table(ROUGH)),
    ];
    let failed: Vec<String> = parts.iter().filter(|(_, o)| !o.pass).map(|(k, o)| format!("{k}: {}", o.detail)).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            "criteria 1-6 hold at half pump power, 2% noise and a (3,-3) px shift".to_string()
        } else {
            format!("changed: {}", failed.join(" | "))
        },
    )
}

fn main() {
    let t0 = Instant::now();
    let clean = pumps(1.0);
    let results = vec![
        (1, c1_sum_rule(&clean)),
        (2, c2_ir_rule(&clean)),
        (3, c3_tilted_lens(CLEAN)),
        (4, c4_conical(CLEAN)),
        (5, c5_fig5(CLEAN)),
        (6, c6_decision_table(CLEAN)),
        (7, c7_energy()),
        (8, c8_numerics()),
        (9, c9_octants()),
        (10, c10_robustness(&pumps(0.5))),
        (11, c11_determinism()),
    ];
    let mut failed = 0;
    for (k, o) in &results {
        println!("criterion {k:>2}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} passed in {:.0} s", results.len() - failed, results.len(), t0.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
