//! Needle-tip localization in binary segmentation masks, and pinhole
//! back-projection of a marked depth-camera pixel.
//!
//! Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`; its centre is
//! `(i + 0.5, j + 0.5)`. All fitted coordinates use that convention.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calib::{ImagePoint, WorldPoint};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_MIN_PIXELS: usize = 10;

/// Row-major boolean image; `true` marks needle pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} mask needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `(x, y)` indices of foreground pixels in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k % self.width, k / self.width))
    }
}

/// Fitted needle segment, endpoints in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment2D<T> {
    pub a: ImagePoint<T>,
    pub b: ImagePoint<T>,
}

impl<T: Scalar> LineSegment2D<T> {
    pub fn new(a: ImagePoint<T>, b: ImagePoint<T>) -> Result<Self> {
        if a == b {
            return Err(Error::DegenerateSegment);
        }
        Ok(Self { a, b })
    }

    pub fn length(&self) -> T {
        self.a.distance(&self.b)
    }

    pub fn midpoint(&self) -> ImagePoint<T> {
        let h = T::lit(0.5);
        ImagePoint::new((self.a.u + self.b.u) * h, (self.a.v + self.b.v) * h)
    }

    /// Distance from `p` to the closest point of the segment.
    pub fn distance_to(&self, p: &ImagePoint<T>) -> T {
        let (dx, dy) = (self.b.u - self.a.u, self.b.v - self.a.v);
        let len2 = dx * dx + dy * dy;
        let t = (((p.u - self.a.u) * dx + (p.v - self.a.v) * dy) / len2)
            .max(T::zero())
            .min(T::one());
        let (cx, cy) = (self.a.u + t * dx, self.a.v + t * dy);
        (p.u - cx).hypot(p.v - cy)
    }
}

/// Line estimator used by [`fit_needle_line_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineFitMethod {
    /// Principal axis of all foreground pixel centres.
    PrincipalAxis,
    /// Two-point RANSAC followed by a principal-axis refit on the inliers.
    Ransac {
        inlier_threshold_px: f64,
        iterations: usize,
        seed: u64,
    },
}

impl LineFitMethod {
    pub fn ransac_default() -> Self {
        LineFitMethod::Ransac {
            inlier_threshold_px: 2.0,
            iterations: 200,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFitOptions {
    pub min_pixels: usize,
    pub method: LineFitMethod,
}

impl Default for LineFitOptions {
    fn default() -> Self {
        Self {
            min_pixels: DEFAULT_MIN_PIXELS,
            method: LineFitMethod::PrincipalAxis,
        }
    }
}

/// Total-least-squares segment through the mask's foreground.
pub fn fit_needle_line<T: Scalar>(mask: &BinaryMask, min_pixels: usize) -> Result<LineSegment2D<T>> {
    fit_needle_line_with(
        mask,
        &LineFitOptions {
            min_pixels,
            ..LineFitOptions::default()
        },
    )
}

pub fn fit_needle_line_with<T: Scalar>(mask: &BinaryMask, opts: &LineFitOptions) -> Result<LineSegment2D<T>> {
    let found = mask.count();
    if found < opts.min_pixels.max(1) {
        return Err(Error::TooFewPixels {
            found,
            min: opts.min_pixels.max(1),
        });
    }
    let h = T::lit(0.5);
    let centres: Vec<(T, T)> = mask
        .foreground()
        .map(|(x, y)| {
            let f = |k: usize| T::from_usize(k).expect("pixel index fits scalar") + h;
            (f(x), f(y))
        })
        .collect();
    match opts.method {
        LineFitMethod::PrincipalAxis => principal_segment(&centres),
        LineFitMethod::Ransac {
            inlier_threshold_px,
            iterations,
            seed,
        } => {
            let inliers = ransac_inliers(&centres, T::lit(inlier_threshold_px), iterations, seed);
            principal_segment(&inliers)
        }
    }
}

struct Axis<T> {
    mean: (T, T),
    dir: (T, T),
}

fn principal_axis<T: Scalar>(pts: &[(T, T)]) -> Result<Axis<T>> {
    let n = T::from_usize(pts.len()).expect("count fits scalar");
    let (sx, sy) = pts.iter().fold((T::zero(), T::zero()), |a, p| (a.0 + p.0, a.1 + p.1));
    let mean = (sx / n, sy / n);
    let (mut cxx, mut cxy, mut cyy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in pts {
        let (dx, dy) = (x - mean.0, y - mean.1);
        cxx = cxx + dx * dx;
        cxy = cxy + dx * dy;
        cyy = cyy + dy * dy;
    }
    // largest eigenvalue of the 2x2 scatter matrix
    let half_trace = (cxx + cyy) * T::lit(0.5);
    let disc = ((cxx - cyy) * T::lit(0.5)).hypot(cxy);
    let lambda = half_trace + disc;
    if !(lambda > T::epsilon() * n) {
        return Err(Error::DegenerateCloud);
    }
    let theta = T::lit(0.5) * (cxy + cxy).atan2(cxx - cyy);
    Ok(Axis {
        mean,
        dir: (theta.cos(), theta.sin()),
    })
}

/// Endpoints from the extreme axial projections, pulled inward by the
/// estimated half-width so round end caps of thick masks do not overshoot.
fn principal_segment<T: Scalar>(pts: &[(T, T)]) -> Result<LineSegment2D<T>> {
    let Axis { mean, dir } = principal_axis(pts)?;
    let (mut lo, mut hi, mut half_width) = (T::infinity(), T::neg_infinity(), T::zero());
    for &(x, y) in pts {
        let (dx, dy) = (x - mean.0, y - mean.1);
        let t = dx * dir.0 + dy * dir.1;
        lo = lo.min(t);
        hi = hi.max(t);
        half_width = half_width.max((dy * dir.0 - dx * dir.1).abs());
    }
    let inset = half_width.min((hi - lo) * T::lit(0.25));
    let (lo, hi) = (lo + inset, hi - inset);
    let at = |t: T| ImagePoint::new(mean.0 + t * dir.0, mean.1 + t * dir.1);
    LineSegment2D::new(at(lo), at(hi)).map_err(|_| Error::DegenerateCloud)
}

fn ransac_inliers<T: Scalar>(pts: &[(T, T)], threshold: T, iterations: usize, seed: u64) -> Vec<(T, T)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inliers_of = |p: (T, T), q: (T, T)| -> Vec<(T, T)> {
        let (dx, dy) = (q.0 - p.0, q.1 - p.1);
        let len = dx.hypot(dy);
        pts.iter()
            .copied()
            .filter(|r| ((r.0 - p.0) * dy - (r.1 - p.1) * dx).abs() / len <= threshold)
            .collect()
    };
    let mut best: Vec<(T, T)> = Vec::new();
    for _ in 0..iterations {
        let i = rng.random_range(0..pts.len());
        let j = rng.random_range(0..pts.len());
        if pts[i] == pts[j] {
            continue;
        }
        let cand = inliers_of(pts[i], pts[j]);
        if cand.len() > best.len() {
            best = cand;
        }
    }
    if best.len() < 2 {
        pts.to_vec()
    } else {
        best
    }
}

/// Picks the endpoint that leads along `insertion_direction` (largest
/// projection). Exact ties go to the larger `v`, then the larger `u`.
pub fn select_tip<T: Scalar>(seg: &LineSegment2D<T>, insertion_direction: (T, T)) -> Result<ImagePoint<T>> {
    let (du, dv) = insertion_direction;
    if !(du.is_finite() && dv.is_finite()) || (du == T::zero() && dv == T::zero()) {
        return Err(Error::ZeroDirection);
    }
    let pa = seg.a.u * du + seg.a.v * dv;
    let pb = seg.b.u * du + seg.b.v * dv;
    let tie_tol = T::lit(4.0) * T::epsilon() * pa.abs().max(pb.abs()).max(T::one());
    if (pa - pb).abs() > tie_tol {
        return Ok(if pa > pb { seg.a } else { seg.b });
    }
    let a_wins = seg.a.v > seg.b.v || (seg.a.v == seg.b.v && seg.a.u > seg.b.u);
    Ok(if a_wins { seg.a } else { seg.b })
}

/// Depth-camera pinhole model, pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

impl<T: Scalar> PinholeIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T) -> Result<Self> {
        if !(fx > T::zero() && fy > T::zero()) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive, got {fx}, {fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidIntrinsics("principal point must be finite".into()));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Projects a camera-frame point (z > 0) to a pixel.
    pub fn project(&self, p: &WorldPoint<T>) -> Result<(T, T)> {
        if !(p.z > T::zero()) {
            return Err(Error::NonPositiveDepth(p.z.as_f64()));
        }
        Ok((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }
}

/// Lifts a pixel with known depth (mm along the optical axis) into the
/// depth-camera frame.
pub fn back_project_depth<T: Scalar>(pixel: (T, T), depth_mm: T, intr: &PinholeIntrinsics<T>) -> Result<WorldPoint<T>> {
    if !(depth_mm > T::zero()) || !depth_mm.is_finite() {
        return Err(Error::NonPositiveDepth(depth_mm.as_f64()));
    }
    Ok(WorldPoint::new(
        (pixel.0 - intr.cx) * depth_mm / intr.fx,
        (pixel.1 - intr.cy) * depth_mm / intr.fy,
        depth_mm,
    ))
}
