use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uscal::calib::{map_image_to_world, solve_intrinsic, DEFAULT_STRUCTURE_TOL_MM};
use uscal::io::{
    fixed6, pairs_to_csv, read_pairs_csv, read_pgm, report_to_csv, residual_svg, sweep_to_csv, write_pgm_p4,
    TransformFile, TransformKind,
};
use uscal::metrics::{compute_report, cr_tre, point_error};
use uscal::needle::{back_project_depth, fit_needle_line_with, select_tip, LineFitMethod, LineFitOptions};
use uscal::synth::{
    generate_pairs, noise_sweep, render_needle_mask, sample_rigid_extrinsic, sample_structured_intrinsic, PixelRange,
};
use uscal::{
    published, Calibration, Error, ExtrinsicTransform, ImagePoint, IntrinsicMatrix, LineSegment2D, PinholeIntrinsics,
    PointPairSet, ScenarioSpec, SolveOptions, WorldPoint,
};

use crate::{ApplyArgs, CalibrateArgs, EvaluateArgs, LocateTipArgs, SimulateArgs};

// streams of the seed reserved for scene parameters and masks; sweep
// trials use the low streams
const PARAMS_STREAM: u64 = u64::MAX;
const MASK_STREAM: u64 = u64::MAX - 1;
const MASK_MIN_LENGTH: f64 = 40.0;
const ROW_TOL_MM: f64 = 0.05;

pub enum Failure {
    Usage(String),
    Lib { err: Error, context: Option<String> },
}

impl Failure {
    pub fn line(&self) -> String {
        match self {
            Failure::Usage(msg) => format!("E_USAGE: {msg}"),
            Failure::Lib { err, context: Some(c) } => format!("{}: {c}: {err}", err.code()),
            Failure::Lib { err, context: None } => format!("{}: {err}", err.code()),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Lib { err, .. } if err.is_numerical() => 4,
            Failure::Lib { .. } => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure::Lib { err, context: None }
    }
}

type CmdResult = Result<(), Failure>;

fn at(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |err| Failure::Lib {
        err,
        context: Some(path.display().to_string()),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| at(path)(e.into()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, contents).map_err(|e| at(path)(e.into()))
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| at(path)(e.into()))
}

fn load_pairs(path: &Path) -> Result<PointPairSet, Failure> {
    read_pairs_csv(read_bytes(path)?.as_slice()).map_err(at(path))
}

fn load_transform(path: &Path) -> Result<TransformFile, Failure> {
    let text = String::from_utf8(read_bytes(path)?).map_err(|e| at(path)(Error::Io(e.to_string())))?;
    TransformFile::parse(&text).map_err(at(path))
}

fn load_extrinsic(path: &Path) -> Result<ExtrinsicTransform, Failure> {
    load_transform(path)?.to_extrinsic().map_err(at(path))
}

fn load_intrinsic(path: &Path) -> Result<IntrinsicMatrix, Failure> {
    load_transform(path)?.to_intrinsic().map_err(at(path))
}

fn fmt_point(p: &WorldPoint) -> String {
    format!("{} {} {}", fixed6(p.x), fixed6(p.y), fixed6(p.z))
}

fn fmt_matrix(out: &mut String, m: &uscal::Mat) {
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&x| format!("{:>14}", fixed6(x))).collect();
        let _ = writeln!(out, "  {}", row.join(""));
    }
}

pub fn calibrate(args: &CalibrateArgs) -> CmdResult {
    let all = load_pairs(&args.pairs)?;
    let extrinsic = load_extrinsic(&args.extrinsic)?;
    let fit = match &args.fit_indices {
        None => all.clone(),
        Some(idx) => {
            if let Some(&bad) = idx.iter().find(|&&i| i > all.len()) {
                return Err(Failure::Usage(format!(
                    "fit index {bad} is out of range 1..={} for {}",
                    all.len(),
                    args.pairs.display()
                )));
            }
            let zero_based: Vec<usize> = idx.iter().map(|&i| i - 1).collect();
            all.subset(&zero_based)?
        }
    };
    let opts = SolveOptions {
        rank_tol: args.rank_tol,
        enforce_planar: args.enforce_planar,
    };
    let cal = solve_intrinsic(&fit, &extrinsic, &opts)?;
    let diag = cal.diagnostics().expect("solver records diagnostics");
    let structure = cal.intrinsic().structure_report(DEFAULT_STRUCTURE_TOL_MM);

    create_dir(&args.out_dir)?;
    let intrinsic_path = args.out_dir.join("intrinsic.json");
    let total_path = args.out_dir.join("total.json");
    write_file(
        &intrinsic_path,
        TransformFile::from_mat(TransformKind::Intrinsic, cal.intrinsic().matrix())?.to_json(),
    )?;
    write_file(
        &total_path,
        TransformFile::from_mat(TransformKind::Total, cal.total())?.to_json(),
    )?;

    let mut out = String::new();
    let _ = writeln!(out, "fit pairs: {} of {}", fit.len(), all.len());
    let _ = writeln!(out, "rank: {}", diag.rank);
    let _ = writeln!(out, "condition: {:.6e}", diag.condition);
    let _ = writeln!(out, "residual_frobenius: {:.6e}", diag.residual_frobenius);
    let _ = writeln!(
        out,
        "structure: row3 max {:.3e}, row4 dev {:.3e}, {} (tol {} mm)",
        structure.row3_max_abs,
        structure.row4_max_dev,
        if structure.compliant { "planar" } else { "not planar" },
        structure.tol_mm
    );
    let _ = writeln!(out, "intrinsic:");
    fmt_matrix(&mut out, cal.intrinsic().matrix());
    let _ = writeln!(out, "wrote {}", intrinsic_path.display());
    let _ = writeln!(out, "wrote {}", total_path.display());
    print!("{out}");
    Ok(())
}

pub fn apply(args: &ApplyArgs) -> CmdResult {
    let cal = Calibration::from_parts(load_extrinsic(&args.extrinsic)?, load_intrinsic(&args.intrinsic)?);
    let p = map_image_to_world(&cal, &ImagePoint::new(args.u, args.v))?;
    println!("world: {}", fmt_point(&p));
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let pairs = load_pairs(&args.pairs)?;
    let cal = Calibration::from_parts(load_extrinsic(&args.extrinsic)?, load_intrinsic(&args.intrinsic)?);
    let report = compute_report(&cal, &pairs)?;
    let csv = report_to_csv(&pairs, &report);
    if let Some(svg) = &args.svg {
        write_file(svg, residual_svg(&report))?;
    }
    match &args.out {
        Some(path) => {
            write_file(path, csv)?;
            println!("pairs: {}", report.n());
            println!("CR: {} mm", fixed6(report.cr_mm));
            println!("TRE: {} mm", fixed6(report.tre_mm));
        }
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn locate_tip(args: &LocateTipArgs) -> CmdResult {
    let mask = read_pgm(&read_bytes(&args.mask)?).map_err(at(&args.mask))?;
    let opts = LineFitOptions {
        min_pixels: args.min_pixels,
        method: if args.ransac {
            LineFitMethod::ransac_default()
        } else {
            LineFitMethod::PrincipalAxis
        },
    };
    let seg: LineSegment2D = fit_needle_line_with(&mask, &opts)?;
    let tip = select_tip(&seg, args.direction)?;
    println!("tip: {} {}", fixed6(tip.u), fixed6(tip.v));
    if let (Some(depth), Some(fx), Some(fy), Some(cx), Some(cy)) = (args.depth, args.fx, args.fy, args.cx, args.cy) {
        let intr = PinholeIntrinsics::new(fx, fy, cx, cy)?;
        let p = back_project_depth((tip.u, tip.v), depth, &intr)?;
        println!("world: {}", fmt_point(&p));
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let mut params = ChaCha8Rng::seed_from_u64(args.seed);
    params.set_stream(PARAMS_STREAM);
    let intrinsic = match &args.intrinsic {
        Some(p) => load_intrinsic(p)?,
        None => sample_structured_intrinsic(&mut params),
    };
    let extrinsic = match &args.extrinsic {
        Some(p) => load_extrinsic(p)?,
        None => sample_rigid_extrinsic(&mut params),
    };
    let [u_min, u_max, v_min, v_max] = args.pixel_range;
    let spec = ScenarioSpec {
        ground_truth_intrinsic: intrinsic,
        extrinsic,
        n_points: args.n_points,
        pixel_noise_sigma: args.pixel_noise,
        world_noise_sigma: args.world_noise,
        pixel_range: PixelRange::new(u_min, u_max, v_min, v_max),
        seed: args.seed,
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(sigmas) = &args.sweep_sigmas {
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Failure::Usage("sweep sigmas must be finite and nonnegative".into()));
        }
    }
    if args.masks > 0 && !(args.thickness >= 1.0) {
        return Err(Failure::Usage(format!(
            "thickness must be at least 1, got {}",
            args.thickness
        )));
    }

    let (pairs, truth) = generate_pairs(&spec)?;
    create_dir(&args.out_dir)?;
    let mut written = Vec::new();
    let mut emit = |name: String, contents: Vec<u8>| -> CmdResult {
        let path = args.out_dir.join(&name);
        write_file(&path, contents)?;
        written.push(path);
        Ok(())
    };
    emit("pairs.csv".into(), pairs_to_csv(&pairs).into_bytes())?;
    emit(
        "intrinsic_truth.json".into(),
        TransformFile::from_mat(TransformKind::Intrinsic, truth.intrinsic().matrix())?
            .to_json()
            .into_bytes(),
    )?;
    emit(
        "extrinsic.json".into(),
        TransformFile::from_mat(TransformKind::Extrinsic, truth.extrinsic().matrix())?
            .to_json()
            .into_bytes(),
    )?;

    if args.masks > 0 {
        let (w, h) = (args.mask_width, args.mask_height);
        let (wf, hf) = (w as f64, h as f64);
        let min_len = MASK_MIN_LENGTH.min(0.5 * wf.hypot(hf));
        let margin = (args.thickness * 0.5 + 1.0).min(0.25 * wf.min(hf));
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        rng.set_stream(MASK_STREAM);
        let mut index = String::from("mask,a_u,a_v,b_u,b_v,thickness\n");
        for k in 0..args.masks {
            let seg = loop {
                let mut pt = || {
                    ImagePoint::new(
                        rng.random_range(margin..=wf - margin),
                        rng.random_range(margin..=hf - margin),
                    )
                };
                let (a, b) = (pt(), pt());
                if a.distance(&b) >= min_len {
                    break LineSegment2D::new(a, b)?;
                }
            };
            let name = format!("mask_{k:03}.pgm");
            let mask = render_needle_mask(&seg, w, h, args.thickness)?;
            let _ = writeln!(
                index,
                "{name},{},{},{},{},{}",
                fixed6(seg.a.u),
                fixed6(seg.a.v),
                fixed6(seg.b.u),
                fixed6(seg.b.v),
                fixed6(args.thickness)
            );
            emit(name, write_pgm_p4(&mask))?;
        }
        emit("masks.csv".into(), index.into_bytes())?;
    }

    if let Some(sigmas) = &args.sweep_sigmas {
        let rows = noise_sweep(&spec, sigmas, args.trials)?;
        emit("sweep.csv".into(), sweep_to_csv(&rows).into_bytes())?;
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn reproduce_paper() -> CmdResult {
    let cal: Calibration = published::calibration();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Calibration table (reference extrinsic and intrinsic applied to each pixel)"
    );
    let _ = writeln!(
        out,
        "{:>3} {:>7} {:>7} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7}",
        "No", "u", "v", "x", "y", "z", "cal_x", "cal_y", "cal_z", "error", "ref"
    );
    let mut mapped_errors = Vec::new();
    let mut reference_errors = Vec::new();
    let mut flagged = Vec::new();
    for row in &published::TABLE {
        let [x, y, z] = row.measured;
        let measured = WorldPoint::new(x, y, z);
        let p = map_image_to_world(&cal, &ImagePoint::new(row.u, row.v))?;
        let err = point_error(&p, &measured);
        let [rx, ry, rz] = row.calibrated;
        reference_errors.push(point_error(&WorldPoint::new(rx, ry, rz), &measured));
        mapped_errors.push(err);
        let dev = [p.x - rx, p.y - ry, p.z - rz, err - row.error_mm]
            .iter()
            .fold(0.0f64, |a, d| a.max(d.abs()));
        let mark = if dev > ROW_TOL_MM {
            flagged.push(row.no);
            " *"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "{:>3} {:>7.1} {:>7.1} {:>8.2} {:>8.2} {:>8.2} {:>8.3} {:>8.3} {:>8.3} {:>7.4} {:>7.4}{mark}",
            row.no, row.u, row.v, x, y, z, p.x, p.y, p.z, err, row.error_mm
        );
    }
    if !flagged.is_empty() {
        let rows: Vec<String> = flagged.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(
            out,
            "* row {} differs from its reference calibrated point by more than {ROW_TOL_MM} mm",
            rows.join(", ")
        );
    }
    let (cr, tre) = cr_tre(&mapped_errors)?;
    let (ref_cr, ref_tre) = cr_tre(&reference_errors)?;
    let _ = writeln!(out, "mapped points:    CR {cr:.4} mm, TRE {tre:.4} mm");
    let _ = writeln!(out, "reference points: CR {ref_cr:.4} mm, TRE {ref_tre:.4} mm");
    let _ = writeln!(out);
    let _ = writeln!(out, "Method comparison (mm)");
    let _ = writeln!(out, "{:<20} {:>5} {:>5}", "method", "CR", "TRE");
    for (name, c, t) in published::COMPARISON.iter().filter(|r| r.0 != "proposed") {
        let _ = writeln!(out, "{name:<20} {c:>5.2} {t:>5.2}");
    }
    let _ = writeln!(out, "proposed: CR {ref_cr:.2} TRE {ref_tre:.2}");
    print!("{out}");
    Ok(())
}
