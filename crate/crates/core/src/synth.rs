//! Synthetic scenes with known ground truth.
//!
//! Every random draw comes from a ChaCha8 stream seeded by the scenario's
//! 64-bit seed. Sweep trial `k` uses stream `k` of the same seed, so sweep
//! results do not depend on thread scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::calib::{
    build_point_matrices, solve_intrinsic, Calibration, ExtrinsicTransform, ImagePoint, IntrinsicMatrix, PointPair,
    PointPairSet, SolveOptions, WorldPoint,
};
use crate::error::{Error, Result};
use crate::linalg::{rank_and_condition, DEFAULT_RANK_TOL};
use crate::metrics::compute_report;
use crate::needle::{BinaryMask, LineSegment2D};
use crate::scalar::Scalar;

const MAX_RANK_ATTEMPTS: usize = 100;

/// Pixel sampling window, inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRange<T> {
    pub u_min: T,
    pub u_max: T,
    pub v_min: T,
    pub v_max: T,
}

impl<T: Scalar> PixelRange<T> {
    pub fn new(u_min: T, u_max: T, v_min: T, v_max: T) -> Self {
        Self {
            u_min,
            u_max,
            v_min,
            v_max,
        }
    }
}

/// Everything needed to generate one synthetic calibration data set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec<T> {
    pub ground_truth_intrinsic: IntrinsicMatrix<T>,
    pub extrinsic: ExtrinsicTransform<T>,
    pub n_points: usize,
    pub pixel_noise_sigma: T,
    /// Per-axis standard deviation of the world-point noise, mm.
    pub world_noise_sigma: T,
    pub pixel_range: PixelRange<T>,
    pub seed: u64,
}

impl<T: Scalar> ScenarioSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 3 {
            return Err(Error::InvalidScenario(format!(
                "n_points must be at least 3, got {}",
                self.n_points
            )));
        }
        let sigmas = [self.pixel_noise_sigma, self.world_noise_sigma];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= T::zero())) {
            return Err(Error::InvalidScenario(
                "noise sigmas must be finite and nonnegative".into(),
            ));
        }
        let r = &self.pixel_range;
        let bounds = [r.u_min, r.u_max, r.v_min, r.v_max];
        if bounds.iter().any(|b| !b.is_finite()) || r.u_min > r.u_max || r.v_min > r.v_max {
            return Err(Error::InvalidScenario("pixel range is empty".into()));
        }
        Ok(())
    }
}

/// Random planar intrinsic: scales in [0.2, 0.5] mm/px, cross terms in
/// [-0.02, 0.02], offsets in [-50, 50] mm.
pub fn sample_structured_intrinsic<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> IntrinsicMatrix<T> {
    let mut draw = |lo: f64, hi: f64| T::lit(rng.random_range(lo..=hi));
    let (sx, kx, ox) = (draw(0.2, 0.5), draw(-0.02, 0.02), draw(-50.0, 50.0));
    let (ky, sy, oy) = (draw(-0.02, 0.02), draw(0.2, 0.5), draw(-50.0, 50.0));
    IntrinsicMatrix::planar([sx, kx, ox], [ky, sy, oy])
}

/// Random rigid transform: rotation from a normalised random quaternion,
/// translation in [-100, 100]^2 x [200, 500] mm.
pub fn sample_rigid_extrinsic<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> ExtrinsicTransform<T> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let q: Vec<f64> = (0..4).map(|_| normal.sample(rng)).collect();
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    let r = [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ];
    let rot = r.map(|row| row.map(T::lit));
    let t = [
        T::lit(rng.random_range(-100.0..=100.0)),
        T::lit(rng.random_range(-100.0..=100.0)),
        T::lit(rng.random_range(200.0..=500.0)),
    ];
    ExtrinsicTransform::from_rotation_translation(rot, t).expect("quaternion rotation is orthonormal")
}

/// Generates correspondences from `spec` using its seed.
pub fn generate_pairs<T: Scalar>(spec: &ScenarioSpec<T>) -> Result<(PointPairSet<T>, Calibration<T>)> {
    generate_pairs_with_rng(spec, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

/// Generates correspondences drawing from `rng`.
///
/// Pixels are uniform in the range and redrawn until they span rank 3.
/// World points are the exact forward map plus world noise; pixel noise is
/// added to the pixels afterwards, so it corrupts the measurement and not
/// the geometry.
pub fn generate_pairs_with_rng<T: Scalar, R: Rng + ?Sized>(
    spec: &ScenarioSpec<T>,
    rng: &mut R,
) -> Result<(PointPairSet<T>, Calibration<T>)> {
    spec.validate()?;
    let truth = Calibration::from_parts(spec.extrinsic.clone(), spec.ground_truth_intrinsic.clone());
    let r = spec.pixel_range;
    let (u0, u1, v0, v1) = (r.u_min.as_f64(), r.u_max.as_f64(), r.v_min.as_f64(), r.v_max.as_f64());

    let mut pixels = None;
    for _ in 0..MAX_RANK_ATTEMPTS {
        let cand: Vec<ImagePoint<T>> = (0..spec.n_points)
            .map(|_| ImagePoint::new(T::lit(rng.random_range(u0..=u1)), T::lit(rng.random_range(v0..=v1))))
            .collect();
        let set: PointPairSet<T> = cand.iter().map(|&p| PointPair::new(p, WorldPoint::default())).collect();
        let (_, image) = build_point_matrices(&set)?;
        if rank_and_condition(&image, T::lit(DEFAULT_RANK_TOL))?.rank == 3 {
            pixels = Some(cand);
            break;
        }
    }
    let pixels = pixels.ok_or(Error::RankNotAchieved {
        attempts: MAX_RANK_ATTEMPTS,
    })?;

    let world_noise = normal(spec.world_noise_sigma)?;
    let pixel_noise = normal(spec.pixel_noise_sigma)?;
    let mut pairs = Vec::with_capacity(pixels.len());
    for p in pixels {
        let w = truth.map(&p)?;
        let world = WorldPoint::new(
            w.x + sample(&world_noise, rng),
            w.y + sample(&world_noise, rng),
            w.z + sample(&world_noise, rng),
        );
        let image = ImagePoint::new(p.u + sample(&pixel_noise, rng), p.v + sample(&pixel_noise, rng));
        pairs.push(PointPair::new(image, world));
    }
    Ok((PointPairSet::new(pairs), truth))
}

fn normal<T: Scalar>(sigma: T) -> Result<Option<Normal<f64>>> {
    if sigma == T::zero() {
        return Ok(None);
    }
    Normal::new(0.0, sigma.as_f64())
        .map(Some)
        .map_err(|e| Error::InvalidScenario(e.to_string()))
}

fn sample<T: Scalar, R: Rng + ?Sized>(dist: &Option<Normal<f64>>, rng: &mut R) -> T {
    // zero sigma draws nothing, so noiseless data is exact
    dist.as_ref().map_or(T::zero(), |d| T::lit(d.sample(rng)))
}

/// Rasterizes a needle: every pixel whose centre lies within
/// `thickness / 2` of the segment is set.
pub fn render_needle_mask<T: Scalar>(
    seg: &LineSegment2D<T>,
    width: usize,
    height: usize,
    thickness: T,
) -> Result<BinaryMask> {
    if !(thickness >= T::one()) {
        return Err(Error::InvalidScenario(format!(
            "thickness must be at least 1, got {thickness}"
        )));
    }
    let (w, h) = (
        T::from_usize(width).expect("width fits scalar"),
        T::from_usize(height).expect("height fits scalar"),
    );
    let inside = |p: &ImagePoint<T>| p.u >= T::zero() && p.u <= w && p.v >= T::zero() && p.v <= h;
    if !inside(&seg.a) || !inside(&seg.b) {
        return Err(Error::SegmentOutOfBounds { width, height });
    }
    let half = thickness * T::lit(0.5);
    let reach = half + T::one();
    let clamp = |x: T, hi: usize| x.max(T::zero()).to_usize().unwrap_or(0).min(hi);
    let x_lo = clamp(seg.a.u.min(seg.b.u) - reach, width);
    let x_hi = clamp((seg.a.u.max(seg.b.u) + reach).ceil(), width);
    let y_lo = clamp(seg.a.v.min(seg.b.v) - reach, height);
    let y_hi = clamp((seg.a.v.max(seg.b.v) + reach).ceil(), height);

    let mut mask = BinaryMask::empty(width, height);
    let c = |k: usize| T::from_usize(k).expect("index fits scalar") + T::lit(0.5);
    for y in y_lo..y_hi {
        for x in x_lo..x_hi {
            if seg.distance_to(&ImagePoint::new(c(x), c(y))) <= half {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

/// One row of a noise sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow<T> {
    pub sigma: T,
    pub mean_cr: T,
    pub mean_tre: T,
    /// Mean relative Frobenius error of the solved intrinsic.
    pub mean_intrinsic_error: T,
}

/// Repeats generate, solve and score for each world-noise level.
///
/// Trial `k` of every sigma uses stream `k` of the template seed, so rows
/// share their random draws and differ only in noise amplitude.
pub fn noise_sweep<T: Scalar>(template: &ScenarioSpec<T>, sigmas: &[T], trials: usize) -> Result<Vec<SweepRow<T>>> {
    if trials == 0 {
        return Err(Error::InvalidScenario("trials must be at least 1".into()));
    }
    template.validate()?;
    let mut sigmas = sigmas.to_vec();
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= T::zero())) {
        return Err(Error::InvalidScenario(
            "sweep sigmas must be finite and nonnegative".into(),
        ));
    }
    sigmas.sort_by(|a, b| a.partial_cmp(b).expect("finite sigmas"));

    let truth_norm = template.ground_truth_intrinsic.matrix().frobenius_norm();
    let n = T::from_usize(trials).expect("trial count fits scalar");
    sigmas
        .iter()
        .map(|&sigma| {
            let spec = ScenarioSpec {
                world_noise_sigma: sigma,
                ..template.clone()
            };
            let outcomes = (0..trials)
                .into_par_iter()
                .map(|k| run_trial(&spec, k as u64, truth_norm))
                .collect::<Result<Vec<_>>>()?;
            // summed in trial order for schedule-independent results
            let (cr, tre, ie) = outcomes.iter().fold((T::zero(), T::zero(), T::zero()), |a, o| {
                (a.0 + o.0, a.1 + o.1, a.2 + o.2)
            });
            Ok(SweepRow {
                sigma,
                mean_cr: cr / n,
                mean_tre: tre / n,
                mean_intrinsic_error: ie / n,
            })
        })
        .collect()
}

fn run_trial<T: Scalar>(spec: &ScenarioSpec<T>, stream: u64, truth_norm: T) -> Result<(T, T, T)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let (pairs, truth) = generate_pairs_with_rng(spec, &mut rng)?;
    let cal = solve_intrinsic(&pairs, truth.extrinsic(), &SolveOptions::default())?;
    let report = compute_report(&cal, &pairs)?;
    let err = cal
        .intrinsic()
        .matrix()
        .sub(truth.intrinsic().matrix())?
        .frobenius_norm()
        / truth_norm;
    Ok((report.cr_mm, report.tre_mm, err))
}
