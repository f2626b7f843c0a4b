//! Published reference calibration: the bracket extrinsic, the reported
//! intrinsic, the ten needle-tip correspondences with their reported
//! calibrated coordinates and errors, and the literature comparison values.
//!
//! The same data ships as files under `data/paper/`.

use crate::calib::{Calibration, ExtrinsicTransform, ImagePoint, IntrinsicMatrix, PointPair, PointPairSet, WorldPoint};
use crate::scalar::Scalar;

/// One tabulated correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub no: usize,
    pub u: f64,
    pub v: f64,
    /// Physically measured tip position, mm.
    pub measured: [f64; 3],
    /// Reported calibrated position, mm.
    pub calibrated: [f64; 3],
    /// Reported `|P_R - P_W|`, mm.
    pub error_mm: f64,
}

const fn row(no: usize, u: f64, v: f64, m: [f64; 3], c: [f64; 3], e: f64) -> ReferenceRow {
    ReferenceRow {
        no,
        u,
        v,
        measured: m,
        calibrated: c,
        error_mm: e,
    }
}

pub const TABLE: [ReferenceRow; 10] = [
    row(1, 88.0, 234.0, [66.40, 59.94, 349.0], [66.488, 59.764, 349.0], 0.1968),
    row(2, 91.0, 291.0, [68.70, 77.60, 349.0], [67.933, 79.719, 349.0], 2.2535),
    row(3, 79.0, 153.0, [62.18, 33.07, 349.0], [62.817, 31.420, 349.0], 1.7686),
    row(4, 43.0, 162.0, [49.51, 35.52, 349.0], [51.604, 34.654, 349.0], 2.2660),
    row(5, 28.0, 155.0, [44.14, 33.45, 349.0], [45.400, 32.247, 349.0], 1.7421),
    row(6, 10.0, 251.0, [39.46, 64.71, 349.0], [39.955, 65.912, 349.0], 1.2999),
    row(7, -49.0, 224.0, [18.41, 56.87, 349.0], [19.591, 56.603, 349.0], 1.2108),
    row(8, -72.0, 73.0, [9.97, 3.96, 349.0], [10.619, 3.778, 349.0], 0.6740),
    row(
        9,
        -142.0,
        303.0,
        [-11.91, 84.29, 349.0],
        [-11.613, 84.501, 349.0],
        0.3643,
    ),
    row(10, -62.0, 154.0, [14.58, 29.23, 349.0], [14.633, 32.121, 349.0], 2.8915),
];

/// Extrinsic translation `(x_u, y_u, z_u)`, mm.
pub const EXTRINSIC_TRANSLATION: [f64; 3] = [35.31, -50.24, 349.00];

/// Reported intrinsic, rows 1 and 2 (rows 3 and 4 are `[0,0,0]`, `[0,0,1]`).
pub const INTRINSIC_ROWS: [[f64; 3]; 2] = [[0.3418, 0.0074, -0.6193], [-0.0025, 0.3502, 28.2740]];

pub const REPORTED_CR_MM: f64 = 1.4668;
pub const REPORTED_TRE_MM: f64 = 1.6887;

/// Comparison rows `(method, CR, TRE)` in mm.
pub const COMPARISON: [(&str, f64, f64); 3] = [
    ("N-wire phantom", 1.97, 2.06),
    ("Multi-wedge phantom", 1.58, 1.80),
    ("proposed", 1.47, 1.69),
];

pub fn extrinsic<T: Scalar>() -> ExtrinsicTransform<T> {
    let [x, y, z] = EXTRINSIC_TRANSLATION.map(T::lit);
    ExtrinsicTransform::from_translation(x, y, z)
}

pub fn intrinsic<T: Scalar>() -> IntrinsicMatrix<T> {
    IntrinsicMatrix::planar(INTRINSIC_ROWS[0].map(T::lit), INTRINSIC_ROWS[1].map(T::lit))
}

pub fn calibration<T: Scalar>() -> Calibration<T> {
    Calibration::from_parts(extrinsic(), intrinsic())
}

/// Pixel / measured-point pairs in table order.
pub fn pairs<T: Scalar>() -> PointPairSet<T> {
    TABLE
        .iter()
        .map(|r| {
            let [x, y, z] = r.measured.map(T::lit);
            PointPair::new(ImagePoint::new(T::lit(r.u), T::lit(r.v)), WorldPoint::new(x, y, z))
        })
        .collect()
}

/// Reported calibrated points in table order.
pub fn calibrated_points<T: Scalar>() -> Vec<WorldPoint<T>> {
    TABLE
        .iter()
        .map(|r| {
            let [x, y, z] = r.calibrated.map(T::lit);
            WorldPoint::new(x, y, z)
        })
        .collect()
}
