//! Calibration model for a tracked ultrasound image.
//!
//! Three frames are involved: the depth camera `R` (world, optical centre at
//! the origin), the ultrasound probe `U`, and the ultrasound image `I`
//! (origin at the top of the image centre-line). A homogeneous pixel
//! `[u, v, 1]` maps to the world through
//!
//! ```text
//! P_R = T_U^R · T_I^U · P_I
//! ```
//!
//! where `T_U^R` is the 4x4 rigid extrinsic of the probe and `T_I^U` is the
//! 4x3 intrinsic matrix with columns `I_x`, `I_y`, `I_0`. Given `n >= 3`
//! correspondences the intrinsic is recovered by least squares:
//!
//! ```text
//! T_I^U = (T_U^R)^-1 · P_R' · pinv(P_I')
//! ```

use crate::error::{Error, Result};
use crate::linalg::{generalized_inverse, rank_and_condition, Mat, DEFAULT_RANK_TOL};
use crate::scalar::Scalar;

/// Default tolerance, in mm, for the planar structure check of an intrinsic.
pub const DEFAULT_STRUCTURE_TOL_MM: f64 = 0.1;

/// Allowed deviation of the mapped homogeneous coordinate from 1.
pub const HOMOGENEOUS_TOL: f64 = 1e-6;

/// Pixel position in the ultrasound image. `u` may be negative: the image
/// origin sits on the centre-line.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImagePoint<T> {
    pub u: T,
    pub v: T,
}

impl<T: Scalar> ImagePoint<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    pub fn homogeneous(&self) -> [T; 3] {
        [self.u, self.v, T::one()]
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Point in the depth-camera frame, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldPoint<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> WorldPoint<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn homogeneous(&self) -> [T; 4] {
        [self.x, self.y, self.z, T::one()]
    }

    pub fn distance(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Rigid probe-to-camera transform `T_U^R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrinsicTransform<T> {
    matrix: Mat<T>,
}

impl<T: Scalar> ExtrinsicTransform<T> {
    /// Validates a 4x4 matrix: bottom row exactly `[0, 0, 0, 1]` and an
    /// orthonormal rotation block (tolerance 1e-9, floored at the scalar's
    /// resolution).
    pub fn new(matrix: Mat<T>) -> Result<Self> {
        if matrix.shape() != (4, 4) {
            return Err(Error::InvalidTransform(format!(
                "extrinsic must be 4x4, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let bottom = matrix.row(3);
        if bottom[..3].iter().any(|&x| x != T::zero()) || bottom[3] != T::one() {
            return Err(Error::InvalidTransform(
                "extrinsic bottom row must be [0, 0, 0, 1]".into(),
            ));
        }
        let tol = T::tol_floor(1e-9);
        for a in 0..3 {
            for b in 0..3 {
                let d = (0..3).fold(T::zero(), |acc, k| acc + matrix.get(k, a) * matrix.get(k, b));
                let want = if a == b { T::one() } else { T::zero() };
                if (d - want).abs() > tol {
                    return Err(Error::InvalidTransform(format!(
                        "rotation block is not orthonormal (RᵀR[{a}][{b}] = {d})"
                    )));
                }
            }
        }
        Ok(Self { matrix })
    }

    /// Pure translation, the layout of a bracket-mounted probe.
    pub fn from_translation(x: T, y: T, z: T) -> Self {
        Self::from_rotation_translation(identity3(), [x, y, z]).expect("identity rotation is orthonormal")
    }

    pub fn from_rotation_translation(rotation: [[T; 3]; 3], translation: [T; 3]) -> Result<Self> {
        let z = T::zero();
        let rows = [
            [rotation[0][0], rotation[0][1], rotation[0][2], translation[0]],
            [rotation[1][0], rotation[1][1], rotation[1][2], translation[1]],
            [rotation[2][0], rotation[2][1], rotation[2][2], translation[2]],
            [z, z, z, T::one()],
        ];
        Self::new(Mat::from_rows(&rows)?)
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn translation(&self) -> [T; 3] {
        [self.matrix.get(0, 3), self.matrix.get(1, 3), self.matrix.get(2, 3)]
    }

    /// Closed-form rigid inverse `[Rᵀ | -Rᵀt]`.
    pub fn inverse(&self) -> Mat<T> {
        let t = self.translation();
        let mut rows = [[T::zero(); 4]; 4];
        for (i, row) in rows.iter_mut().take(3).enumerate() {
            for (j, r) in row.iter_mut().take(3).enumerate() {
                *r = self.matrix.get(j, i);
            }
            row[3] = -(0..3).fold(T::zero(), |acc, k| acc + self.matrix.get(k, i) * t[k]);
        }
        rows[3][3] = T::one();
        Mat::from_rows(&rows).expect("inverse of a finite rigid transform is finite")
    }

    fn apply_homogeneous(&self, p: &[T; 4]) -> [T; 4] {
        let mut out = [T::zero(); 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).fold(T::zero(), |acc, k| acc + self.matrix.get(i, k) * p[k]);
        }
        out
    }
}

fn identity3<T: Scalar>() -> [[T; 3]; 3] {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

/// Image-to-probe intrinsic `T_I^U = [I_x, I_y, I_0]`, a 4x3 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicMatrix<T> {
    matrix: Mat<T>,
}

/// Result of checking the planar structure of an intrinsic matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureReport<T> {
    /// Largest magnitude in row 3 (should be 0).
    pub row3_max_abs: T,
    /// Largest deviation of row 4 from `[0, 0, 1]`.
    pub row4_max_dev: T,
    pub tol_mm: T,
    pub compliant: bool,
}

impl<T: Scalar> IntrinsicMatrix<T> {
    pub fn new(matrix: Mat<T>) -> Result<Self> {
        if matrix.shape() != (4, 3) {
            return Err(Error::InvalidTransform(format!(
                "intrinsic must be 4x3, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { matrix })
    }

    /// Planar intrinsic from its first two rows; rows 3 and 4 are set to
    /// `[0, 0, 0]` and `[0, 0, 1]`.
    pub fn planar(row_x: [T; 3], row_y: [T; 3]) -> Self {
        let (z, o) = (T::zero(), T::one());
        let m = Mat::from_rows(&[row_x, row_y, [z, z, z], [z, z, o]]).expect("finite planar intrinsic");
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn structure_report(&self, tol_mm: T) -> StructureReport<T> {
        validate_intrinsic_structure(self, tol_mm)
    }

    /// Copy with row 3 zeroed and row 4 set to `[0, 0, 1]`.
    pub fn enforce_planar(&self) -> Self {
        let r0 = self.matrix.row(0);
        let r1 = self.matrix.row(1);
        Self::planar([r0[0], r0[1], r0[2]], [r1[0], r1[1], r1[2]])
    }

    fn apply(&self, p: &ImagePoint<T>) -> [T; 4] {
        let h = p.homogeneous();
        let mut out = [T::zero(); 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).fold(T::zero(), |acc, k| acc + self.matrix.get(i, k) * h[k]);
        }
        out
    }
}

/// Reports how far rows 3 and 4 of `m` are from `[0,0,0]` and `[0,0,1]`.
pub fn validate_intrinsic_structure<T: Scalar>(m: &IntrinsicMatrix<T>, tol_mm: T) -> StructureReport<T> {
    let row3_max_abs = m.matrix.row(2).iter().fold(T::zero(), |a, x| a.max(x.abs()));
    let r4 = m.matrix.row(3);
    let row4_max_dev = r4[0].abs().max(r4[1].abs()).max((r4[2] - T::one()).abs());
    StructureReport {
        row3_max_abs,
        row4_max_dev,
        tol_mm,
        compliant: row3_max_abs <= tol_mm && row4_max_dev <= tol_mm,
    }
}

/// One correspondence: the same needle tip seen in both sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPair<T> {
    pub image: ImagePoint<T>,
    pub world: WorldPoint<T>,
}

impl<T: Scalar> PointPair<T> {
    pub fn new(image: ImagePoint<T>, world: WorldPoint<T>) -> Self {
        Self { image, world }
    }
}

/// Ordered list of correspondences.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointPairSet<T> {
    pairs: Vec<PointPair<T>>,
}

impl<T: Scalar> PointPairSet<T> {
    pub fn new(pairs: Vec<PointPair<T>>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[PointPair<T>] {
        &self.pairs
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PointPair<T>> {
        self.pairs.iter()
    }

    /// Pairs at the given zero-based indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let pairs = indices
            .iter()
            .map(|&i| {
                self.pairs.get(i).copied().ok_or_else(|| {
                    Error::DimensionMismatch(format!("pair index {} out of range (have {})", i + 1, self.pairs.len()))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { pairs })
    }

    /// Pairs whose zero-based index is not listed.
    pub fn complement(&self, indices: &[usize]) -> Self {
        let pairs = self
            .pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| !indices.contains(i))
            .map(|(_, p)| *p)
            .collect();
        Self { pairs }
    }
}

impl<T: Scalar> FromIterator<PointPair<T>> for PointPairSet<T> {
    fn from_iter<I: IntoIterator<Item = PointPair<T>>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Stacks the pairs into `P_R'` (4 x n) and `P_I'` (3 x n), column `k`
/// holding pair `k`.
pub fn build_point_matrices<T: Scalar>(pairs: &PointPairSet<T>) -> Result<(Mat<T>, Mat<T>)> {
    if pairs.is_empty() {
        return Err(Error::TooFewPairs { got: 0, min: 1 });
    }
    let world: Vec<[T; 4]> = pairs.iter().map(|p| p.world.homogeneous()).collect();
    let image: Vec<[T; 3]> = pairs.iter().map(|p| p.image.homogeneous()).collect();
    Ok((Mat::from_columns(&world)?, Mat::from_columns(&image)?))
}

/// Conditioning of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics<T> {
    /// Numerical rank of `P_I'`.
    pub rank: usize,
    /// Condition number of `P_I'`.
    pub condition: T,
    /// `‖(T_U^R)^-1 P_R' - T_I^U P_I'‖_F`, mm.
    pub residual_frobenius: T,
}

/// A solved (or supplied) image-to-world calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<T> {
    extrinsic: ExtrinsicTransform<T>,
    intrinsic: IntrinsicMatrix<T>,
    total: Mat<T>,
    diagnostics: Option<Diagnostics<T>>,
}

impl<T: Scalar> Calibration<T> {
    /// Composes a calibration from known matrices (no diagnostics).
    pub fn from_parts(extrinsic: ExtrinsicTransform<T>, intrinsic: IntrinsicMatrix<T>) -> Self {
        let total = extrinsic
            .matrix()
            .matmul(intrinsic.matrix())
            .expect("4x4 times 4x3 of finite matrices");
        Self {
            extrinsic,
            intrinsic,
            total,
            diagnostics: None,
        }
    }

    pub fn extrinsic(&self) -> &ExtrinsicTransform<T> {
        &self.extrinsic
    }

    pub fn intrinsic(&self) -> &IntrinsicMatrix<T> {
        &self.intrinsic
    }

    /// `T = T_U^R · T_I^U`.
    pub fn total(&self) -> &Mat<T> {
        &self.total
    }

    pub fn diagnostics(&self) -> Option<&Diagnostics<T>> {
        self.diagnostics.as_ref()
    }

    pub fn map(&self, p: &ImagePoint<T>) -> Result<WorldPoint<T>> {
        map_image_to_world(self, p)
    }
}

/// Options for [`solve_intrinsic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions<T> {
    /// Relative singular-value cutoff for the pseudo-inverse and rank test.
    pub rank_tol: T,
    /// Overwrite rows 3 and 4 with `[0,0,0]` and `[0,0,1]` after solving.
    pub enforce_planar: bool,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            rank_tol: T::lit(DEFAULT_RANK_TOL),
            enforce_planar: false,
        }
    }
}

/// Least-squares intrinsic from correspondences and a known extrinsic.
///
/// For exactly three non-collinear pixels the result interpolates the data;
/// for more it minimises `‖(T_U^R)^-1 P_R' - X P_I'‖_F` over 4x3 `X`.
/// Collinear pixels give [`Error::RankDeficient`].
pub fn solve_intrinsic<T: Scalar>(
    pairs: &PointPairSet<T>,
    extrinsic: &ExtrinsicTransform<T>,
    opts: &SolveOptions<T>,
) -> Result<Calibration<T>> {
    if pairs.len() < 3 {
        return Err(Error::TooFewPairs {
            got: pairs.len(),
            min: 3,
        });
    }
    let (world, image) = build_point_matrices(pairs)?;
    let rc = rank_and_condition(&image, opts.rank_tol)?;
    if rc.rank < 3 {
        return Err(Error::RankDeficient { rank: rc.rank });
    }
    let probe = extrinsic.inverse().matmul(&world)?;
    let mut intrinsic = IntrinsicMatrix::new(probe.matmul(&generalized_inverse(&image, opts.rank_tol)?)?)?;
    if opts.enforce_planar {
        intrinsic = intrinsic.enforce_planar();
    }
    let residual = probe.sub(&intrinsic.matrix().matmul(&image)?)?.frobenius_norm();
    let mut cal = Calibration::from_parts(extrinsic.clone(), intrinsic);
    cal.diagnostics = Some(Diagnostics {
        rank: rc.rank,
        condition: rc.condition,
        residual_frobenius: residual,
    });
    Ok(cal)
}

/// Maps a pixel to the depth-camera frame: `T_U^R · (T_I^U · [u, v, 1])`.
///
/// Fails if the homogeneous coordinate of the result is not 1 within
/// [`HOMOGENEOUS_TOL`].
pub fn map_image_to_world<T: Scalar>(cal: &Calibration<T>, p: &ImagePoint<T>) -> Result<WorldPoint<T>> {
    let probe = cal.intrinsic.apply(p);
    let w = cal.extrinsic.apply_homogeneous(&probe);
    if !w.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    if (w[3] - T::one()).abs() > T::tol_floor(HOMOGENEOUS_TOL) {
        return Err(Error::HomogeneousMismatch { w: w[3].as_f64() });
    }
    Ok(WorldPoint::new(w[0], w[1], w[2]))
}
