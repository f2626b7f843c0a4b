//! `uscal` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "uscal",
    version,
    about = "Ultrasound image calibration against a depth camera"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the image-to-probe intrinsic from point pairs and a known extrinsic.
    Calibrate(CalibrateArgs),
    /// Map one image pixel to depth-camera coordinates.
    #[command(allow_negative_numbers = true)]
    Apply(ApplyArgs),
    /// Score a calibration against point pairs (CR and TRE).
    Evaluate(EvaluateArgs),
    /// Find the needle tip in a binary segmentation mask.
    LocateTip(LocateTipArgs),
    /// Generate synthetic pairs, needle masks and noise sweeps.
    Simulate(SimulateArgs),
    /// Reproduce the reference calibration table and method comparison.
    ReproducePaper,
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Pair CSV with header `u,v,x,y,z`.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Extrinsic transform JSON (4x4).
    #[arg(long)]
    pub extrinsic: PathBuf,
    /// 1-based rows of the pair file to fit, e.g. `1,3,4`. Defaults to all.
    #[arg(long, value_delimiter = ',', value_parser = parse_index)]
    pub fit_indices: Option<Vec<usize>>,
    /// Project the solution onto the planar structure (row 3 zero, row 4 = [0 0 1]).
    #[arg(long)]
    pub enforce_planar: bool,
    /// Relative singular-value cutoff of the pseudo-inverse.
    #[arg(long, default_value_t = uscal::linalg::DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    /// Directory for `intrinsic.json` and `total.json`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub intrinsic: PathBuf,
    #[arg(long)]
    pub extrinsic: PathBuf,
    pub u: f64,
    pub v: f64,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub intrinsic: PathBuf,
    #[arg(long)]
    pub extrinsic: PathBuf,
    /// Write the report CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Residual scatter plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args)]
pub struct LocateTipArgs {
    /// PGM mask (P2 or P4); nonzero pixels are needle.
    #[arg(long)]
    pub mask: PathBuf,
    /// Insertion direction in pixels, `du,dv`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pair)]
    pub direction: (f64, f64),
    /// Fit the line to RANSAC inliers only.
    #[arg(long)]
    pub ransac: bool,
    #[arg(long, default_value_t = uscal::needle::DEFAULT_MIN_PIXELS)]
    pub min_pixels: usize,
    /// Depth at the tip, mm. Requires the camera intrinsics.
    #[arg(long, requires_all = ["fx", "fy", "cx", "cy"])]
    pub depth: Option<f64>,
    #[arg(long, requires = "depth")]
    pub fx: Option<f64>,
    #[arg(long, requires = "depth")]
    pub fy: Option<f64>,
    #[arg(long, requires = "depth")]
    pub cx: Option<f64>,
    #[arg(long, requires = "depth")]
    pub cy: Option<f64>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10, value_parser = parse_n_points)]
    pub n_points: usize,
    /// Pixel noise standard deviation, px.
    #[arg(long, default_value_t = 0.0)]
    pub pixel_noise: f64,
    /// Per-axis world noise standard deviation, mm.
    #[arg(long, default_value_t = 0.0)]
    pub world_noise: f64,
    /// `u_min,u_max,v_min,v_max`.
    #[arg(long, allow_hyphen_values = true, default_value = "-200,200,0,400", value_parser = parse_range)]
    pub pixel_range: [f64; 4],
    /// Ground-truth intrinsic JSON. Drawn at random from the seed if absent.
    #[arg(long)]
    pub intrinsic: Option<PathBuf>,
    /// Extrinsic JSON. Drawn at random from the seed if absent.
    #[arg(long)]
    pub extrinsic: Option<PathBuf>,
    /// Number of needle masks to render.
    #[arg(long, default_value_t = 0)]
    pub masks: usize,
    #[arg(long, default_value_t = 160)]
    pub mask_width: usize,
    #[arg(long, default_value_t = 120)]
    pub mask_height: usize,
    /// Needle thickness, px.
    #[arg(long, default_value_t = 3.0)]
    pub thickness: f64,
    /// World-noise levels for a sweep, mm, e.g. `0,0.25,0.5,1`.
    #[arg(long, value_delimiter = ',')]
    pub sweep_sigmas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200, value_parser = parse_trials)]
    pub trials: usize,
}

fn parse_at_least(s: &str, min: usize, what: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if n < min {
        return Err(format!("{what} must be at least {min}"));
    }
    Ok(n)
}

fn parse_index(s: &str) -> Result<usize, String> {
    parse_at_least(s, 1, "indices are 1-based and")
}

fn parse_n_points(s: &str) -> Result<usize, String> {
    parse_at_least(s, 3, "n-points")
}

fn parse_trials(s: &str) -> Result<usize, String> {
    parse_at_least(s, 1, "trials")
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", vals.len()));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(vals)
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_range(s: &str) -> Result<[f64; 4], String> {
    let v = parse_floats(s, 4)?;
    Ok([v[0], v[1], v[2], v[3]])
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            eprintln!("E_USAGE: missing subcommand or arguments, see `uscal --help`");
            return ExitCode::from(2);
        }
        Err(e) => {
            let text = e.to_string();
            let msg: Vec<&str> = text
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            eprintln!("E_USAGE: {}", msg.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Apply(a) => commands::apply(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::LocateTip(a) => commands::locate_tip(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::ReproducePaper => commands::reproduce_paper(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.exit_code())
        }
    }
}
