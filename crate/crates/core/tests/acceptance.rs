//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use uscal::calib::{build_point_matrices, map_image_to_world, solve_intrinsic};
use uscal::metrics::cr_tre;
use uscal::needle::{fit_needle_line, select_tip, DEFAULT_MIN_PIXELS};
use uscal::synth::{
    generate_pairs, noise_sweep, render_needle_mask, sample_rigid_extrinsic, sample_structured_intrinsic, PixelRange,
};
use uscal::{
    published, Calibration, Error, ExtrinsicTransform, ImagePoint, IntrinsicMatrix, LineSegment2D, Mat, PointPair,
    PointPairSet, ScenarioSpec, SolveOptions, WorldPoint,
};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn scenario(intrinsic: IntrinsicMatrix, extrinsic: ExtrinsicTransform, n_points: usize, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        ground_truth_intrinsic: intrinsic,
        extrinsic,
        n_points,
        pixel_noise_sigma: 0.0,
        world_noise_sigma: 0.0,
        pixel_range: PixelRange::new(-200.0, 200.0, 0.0, 400.0),
        seed,
    }
}

fn rel_frobenius(a: &Mat, b: &Mat) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
}

fn probe_residual(pairs: &PointPairSet, extrinsic: &ExtrinsicTransform, intrinsic: &Mat) -> f64 {
    let (world, image) = build_point_matrices(pairs).unwrap();
    let probe = extrinsic.inverse().matmul(&world).unwrap();
    probe.sub(&intrinsic.matmul(&image).unwrap()).unwrap().frobenius_norm()
}

fn table_forward_map() -> Outcome {
    let cal: Calibration = published::calibration();
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for row in &published::TABLE {
        let p = map_image_to_world(&cal, &ImagePoint::new(row.u, row.v)).unwrap();
        let got = [p.x, p.y, p.z];
        let [x, y, z] = row.measured;
        let err = p.distance(&WorldPoint::new(x, y, z));
        let dev = got
            .iter()
            .zip(row.calibrated)
            .map(|(g, c)| (g - c).abs())
            .fold((err - row.error_mm).abs(), f64::max);
        worst = worst.max(dev);
        if dev > 0.05 {
            bad.push(format!(
                "row {} ({:.3}, {:.3}, {:.3}) err {:.4} vs ({:.3}, {:.3}, {:.3}) err {:.4}",
                row.no,
                got[0],
                got[1],
                got[2],
                err,
                row.calibrated[0],
                row.calibrated[1],
                row.calibrated[2],
                row.error_mm
            ));
        }
    }
    let detail = if bad.is_empty() {
        format!("max deviation {worst:.4} mm over 10 rows (tol 0.05)")
    } else {
        format!("{} of 10 rows outside 0.05 mm: {}", bad.len(), bad.join("; "))
    };
    Outcome::new(bad.is_empty(), detail)
}

fn table_metrics() -> Outcome {
    let errors: Vec<f64> = published::TABLE.iter().map(|r| r.error_mm).collect();
    let (cr, tre) = cr_tre(&errors).unwrap();
    let pass = (cr - published::REPORTED_CR_MM).abs() <= 0.01 && (tre - published::REPORTED_TRE_MM).abs() <= 0.01;
    Outcome::new(
        pass,
        format!(
            "CR {cr:.4} (ref {:.4}), TRE {tre:.4} (ref {:.4})",
            published::REPORTED_CR_MM,
            published::REPORTED_TRE_MM
        ),
    )
}

fn exact_recovery() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for k in 0..100u64 {
        let truth: IntrinsicMatrix = sample_structured_intrinsic(&mut rng);
        let extrinsic: ExtrinsicTransform = sample_rigid_extrinsic(&mut rng);
        for n in [3, 4, 10, 50] {
            let spec = scenario(truth.clone(), extrinsic.clone(), n, k * 64 + n as u64);
            let outcome = generate_pairs(&spec)
                .and_then(|(pairs, _)| solve_intrinsic(&pairs, &extrinsic, &SolveOptions::default()));
            match outcome {
                Ok(cal) => worst = worst.max(rel_frobenius(cal.intrinsic().matrix(), truth.matrix())),
                Err(_) => failures += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures == 0 && worst <= 1e-9 && elapsed < Duration::from_secs(5);
    Outcome::new(
        pass,
        format!("400 solves, max rel error {worst:.2e} (tol 1e-9), {failures} errors, {elapsed:.2?} (limit 5 s)"),
    )
}

fn least_squares_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut min_gain = f64::INFINITY;
    for k in 0..50u64 {
        let truth: IntrinsicMatrix = sample_structured_intrinsic(&mut rng);
        let extrinsic: ExtrinsicTransform = sample_rigid_extrinsic(&mut rng);
        let spec = ScenarioSpec {
            pixel_noise_sigma: 0.5,
            world_noise_sigma: 0.5,
            ..scenario(truth, extrinsic.clone(), 20, 400 + k)
        };
        let (pairs, _) = generate_pairs(&spec).unwrap();
        let cal = solve_intrinsic(&pairs, &extrinsic, &SolveOptions::default()).unwrap();
        let solved = cal.intrinsic().matrix();
        let base = probe_residual(&pairs, &extrinsic, solved);
        for _ in 0..20 {
            let dir: Vec<f64> = (0..12).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            let delta = Mat::new(4, 3, dir.iter().map(|d| d / norm * 1e-3).collect()).unwrap();
            let r = probe_residual(&pairs, &extrinsic, &solved.add(&delta).unwrap());
            min_gain = min_gain.min(r - base);
            if r <= base {
                violations += 1;
            }
        }
    }
    Outcome::new(
        violations == 0,
        format!("1000 perturbations of norm 1e-3, {violations} non-increasing, min increase {min_gain:.3e}"),
    )
}

fn structure_emergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut row3, mut row4) = (0.0f64, 0.0f64);
    for k in 0..50u64 {
        let truth: IntrinsicMatrix = sample_structured_intrinsic(&mut rng);
        let extrinsic: ExtrinsicTransform = sample_rigid_extrinsic(&mut rng);
        // pixel noise only: world points stay on the image plane
        let spec = ScenarioSpec {
            pixel_noise_sigma: 1.0,
            ..scenario(truth, extrinsic.clone(), 12, 500 + k)
        };
        let (pairs, _) = generate_pairs(&spec).unwrap();
        let cal = solve_intrinsic(&pairs, &extrinsic, &SolveOptions::default()).unwrap();
        let m = cal.intrinsic().matrix();
        for j in 0..3 {
            row3 = row3.max(m[(2, j)].abs());
            row4 = row4.max((m[(3, j)] - if j == 2 { 1.0 } else { 0.0 }).abs());
        }
    }
    Outcome::new(
        row3 <= 1e-9 && row4 <= 1e-9,
        format!("50 coplanar scenarios, max |row 3| {row3:.2e}, max |row 4 - [0,0,1]| {row4:.2e} (tol 1e-9)"),
    )
}

fn degeneracy() -> Outcome {
    let world = WorldPoint::new(0.0, 0.0, 0.0);
    let layouts: [&[(f64, f64)]; 5] = [
        &[(0.0, 10.0), (5.0, 10.0), (20.0, 10.0), (-30.0, 10.0)],
        &[(7.0, 0.0), (7.0, 50.0), (7.0, 300.0)],
        &[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (100.0, 100.0), (-40.0, -40.0)],
        &[(12.0, 34.0), (12.0, 34.0), (12.0, 34.0)],
        &[(-142.0, 303.0), (-71.0, 228.0), (0.0, 153.0), (71.0, 78.0)],
    ];
    let mut silent = Vec::new();
    for (k, layout) in layouts.iter().enumerate() {
        let pairs: PointPairSet = layout
            .iter()
            .map(|&(u, v)| PointPair::new(ImagePoint::new(u, v), world))
            .collect();
        let extrinsic: ExtrinsicTransform = published::extrinsic();
        match solve_intrinsic(&pairs, &extrinsic, &SolveOptions::default()) {
            Err(Error::RankDeficient { .. }) => {}
            other => silent.push(format!("layout {k}: {:?}", other.map(|_| "solved"))),
        }
    }
    let detail = if silent.is_empty() {
        format!("{} collinear layouts all rejected with RankDeficient", layouts.len())
    } else {
        silent.join("; ")
    };
    Outcome::new(silent.is_empty(), detail)
}

fn tip_localization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (w, h) = (160usize, 120usize);
    let (mut worst, mut misses, mut flips) = (0.0f64, 0, 0);
    for _ in 0..100 {
        let seg = loop {
            let a = ImagePoint::new(rng.random_range(4.0..156.0), rng.random_range(4.0..116.0));
            let b = ImagePoint::new(rng.random_range(4.0..156.0), rng.random_range(4.0..116.0));
            if a.distance(&b) >= 40.0 {
                break LineSegment2D::new(a, b).unwrap();
            }
        };
        let thickness = rng.random_range(1..=5) as f64;
        let mask = render_needle_mask(&seg, w, h, thickness).unwrap();
        let fit: LineSegment2D = fit_needle_line(&mask, DEFAULT_MIN_PIXELS).unwrap();
        let dir = (seg.b.u - seg.a.u, seg.b.v - seg.a.v);
        let tip = select_tip(&fit, dir).unwrap();
        let back = select_tip(&fit, (-dir.0, -dir.1)).unwrap();
        let d = tip.distance(&seg.b);
        worst = worst.max(d).max(back.distance(&seg.a));
        if d > 1.5 || back.distance(&seg.a) > 1.5 {
            misses += 1;
        }
        if back.distance(&seg.a) < back.distance(&seg.b) && tip != back {
            flips += 1;
        }
    }
    Outcome::new(
        misses == 0 && flips == 100,
        format!("100 masks, max endpoint error {worst:.3} px (tol 1.5), {misses} misses, flip correct {flips}/100"),
    )
}

fn metric_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut order, mut equality, mut oracle) = (0, 0, 0);
    for k in 0..1000 {
        let n = rng.random_range(1..=30);
        let errors: Vec<f64> = if k % 10 == 0 {
            vec![rng.random_range(0.0..10.0); n]
        } else {
            (0..n).map(|_| rng.random_range(0.0..10.0)).collect()
        };
        let (cr, tre) = cr_tre(&errors).unwrap();
        let mean = errors.iter().sum::<f64>() / n as f64;
        let rms = (errors.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
        if (cr - mean).abs() > 1e-12 * mean.max(1.0) || (tre - rms).abs() > 1e-12 * rms.max(1.0) {
            oracle += 1;
        }
        if cr > tre {
            order += 1;
        }
        let all_equal = errors.iter().all(|&e| (e - errors[0]).abs() <= 1e-12);
        if ((tre - cr).abs() <= 1e-12) != all_equal {
            equality += 1;
        }
    }
    Outcome::new(
        order + equality + oracle == 0,
        format!("1000 vectors, {order} with cr > tre, {equality} equality mismatches, {oracle} oracle mismatches"),
    )
}

fn noise_monotonicity() -> Outcome {
    let start = Instant::now();
    let template = scenario(published::intrinsic(), published::extrinsic(), 10, 9);
    let rows = noise_sweep(&template, &[0.0, 0.25, 0.5, 1.0], 200).unwrap();
    let elapsed = start.elapsed();
    let zero = rows[0].mean_cr.abs() <= 1e-9 && rows[0].mean_tre.abs() <= 1e-9;
    let monotone = rows.windows(2).all(|w| w[1].mean_cr >= 0.95 * w[0].mean_cr);
    let crs: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}", r.sigma, r.mean_cr)).collect();
    Outcome::new(
        zero && monotone && elapsed < Duration::from_secs(30),
        format!(
            "mean CR by sigma [{}], sigma 0 TRE {:.1e}, {elapsed:.2?} (limit 30 s)",
            crs.join(", "),
            rows[0].mean_tre
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("table forward map", table_forward_map),
        ("table metrics", table_metrics),
        ("exact recovery", exact_recovery),
        ("least-squares optimality", least_squares_optimality),
        ("structure emergence", structure_emergence),
        ("degeneracy handling", degeneracy),
        ("tip localization", tip_localization),
        ("metric inequality", metric_inequality),
        ("noise monotonicity", noise_monotonicity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] C{} {name}: {}", i + 1, outcome.detail);
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
