//! `oamtrace`: run scenarios and presets, and analyze saved fields and images.
//!
//! Exit status is 0 on success, 2 when an analysis or a run is inconclusive,
//! and 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use oamtrace::diagnostics::{dominant_charge, oam_spectrum, spiral_count, stripe_count_with, ChargeVerdict, StripeParams, Verdict};
use oamtrace::io::{load_image, read_field};
use oamtrace::process::Hypothesis;
use oamtrace::propagate::LensSpec;
use oamtrace::scenario::{load_config, preset, run_scenario, RunReport};
use oamtrace::Error;

#[derive(Parser)]
#[command(name = "oamtrace", version, about = "OAM transfer in two-pump wave mixing: simulate and measure")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario config and write its fields, images and report.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one of the built-in figure scenarios.
    Preset {
        /// fig1, fig3, fig4ab, fig4cd or fig5
        name: String,
        #[arg(long, allow_hyphen_values = true)]
        l780: Option<i32>,
        #[arg(long, allow_hyphen_values = true)]
        l776: Option<i32>,
        /// fwm or swm
        #[arg(long)]
        hypothesis: Option<Hypothesis>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure the charge in a saved image (tilted-lens, spiral) or field (spectrum).
    Analyze {
        #[arg(long, value_enum)]
        method: AnalyzeMethod,
        file: PathBuf,
        /// Focal length of the tilted lens that made the image, m.
        #[arg(long, default_value_t = 1.0)]
        focal: f64,
        /// Tilt of that lens, degrees.
        #[arg(long, default_value_t = 45.0)]
        tilt: f64,
        /// Physical width of a PGM image, mm (raw images carry their own).
        #[arg(long, default_value_t = 1.0)]
        extent_mm: f64,
        /// Spectrum verdicts below this weight are inconclusive.
        #[arg(long, default_value_t = 0.5)]
        min_weight: f64,
        /// Image verdicts below this confidence are inconclusive.
        #[arg(long, default_value_t = 0.5)]
        min_confidence: f64,
    },
    /// Topological charge of a saved field, from its OAM spectrum.
    Charge { field: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzeMethod {
    TiltedLens,
    Spiral,
    Spectrum,
}

enum Outcome {
    Done,
    Inconclusive,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(cli.cmd) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Inconclusive) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<Outcome, Error> {
    match cmd {
        Cmd::Run { config, out } => report_run(run_scenario(&load_config(&config)?, &out)?, &out),
        Cmd::Preset { name, l780, l776, hypothesis, out } => {
            let mut cfg = preset(&name)?;
            if let Some(l) = l780 {
                cfg.ell780 = l;
            }
            if let Some(l) = l776 {
                cfg.ell776 = l;
            }
            if let Some(h) = hypothesis {
                cfg.hypothesis = h;
            }
            report_run(run_scenario(&cfg, &out)?, &out)
        }
        Cmd::Analyze { method, file, focal, tilt, extent_mm, min_weight, min_confidence } => match method {
            AnalyzeMethod::TiltedLens => {
                let img = load_image(&file, extent_mm)?;
                let lens = LensSpec { focal_m: focal, tilt_deg: tilt };
                image_verdict(stripe_count_with(&img, lens, &StripeParams::default()), min_confidence)
            }
            AnalyzeMethod::Spiral => image_verdict(spiral_count(&load_image(&file, extent_mm)?), min_confidence),
            AnalyzeMethod::Spectrum => spectrum(&file, min_weight),
        },
        Cmd::Charge { field } => {
            let f = read_field(&field)?;
            println!("charge = {}", dominant_charge(&f));
            Ok(Outcome::Done)
        }
    }
}

fn report_run(report: RunReport, out: &Path) -> Result<Outcome, Error> {
    print!("{}", report.render());
    log::info!("artifacts in {}", out.display());
    Ok(if report.verdict() == Verdict::Inconclusive { Outcome::Inconclusive } else { Outcome::Done })
}

fn image_verdict(v: oamtrace::Result<ChargeVerdict>, min_confidence: f64) -> Result<Outcome, Error> {
    let v = match v {
        Ok(v) => v,
        // the image holds nothing to count: not a failure of the tool
        Err(e @ (Error::LowVisibility(_) | Error::NoSignal(_))) => {
            println!("inconclusive: {e}");
            return Ok(Outcome::Inconclusive);
        }
        Err(e) => return Err(e),
    };
    println!("magnitude = {}", v.magnitude);
    println!("sign = {}", v.sign.value().map_or("unknown".to_string(), |s| s.to_string()));
    println!("confidence = {:.4}", v.confidence);
    println!("method = {}", v.method);
    match v.signed() {
        Some(_) if v.confidence >= min_confidence => {
            println!("charge = {}", v.signed().unwrap_or(0));
            Ok(Outcome::Done)
        }
        _ => Ok(Outcome::Inconclusive),
    }
}

fn spectrum(file: &Path, min_weight: f64) -> Result<Outcome, Error> {
    let s = oam_spectrum(&read_field(file)?, 8)?;
    for ell in -s.max_order..=s.max_order {
        println!("weight[{ell}] = {:.6}", s.weight(ell));
    }
    println!("outside = {:.6}", s.outside);
    let l = s.dominant();
    println!("charge = {l}");
    Ok(if s.weight(l) >= min_weight { Outcome::Done } else { Outcome::Inconclusive })
}
