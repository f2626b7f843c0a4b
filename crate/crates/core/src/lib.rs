//! Ultrasound image calibration against a depth camera.
//!
//! Needle-tip correspondences observed as ultrasound pixels and as
//! depth-camera points determine the 4x3 image-to-probe intrinsic through a
//! pseudo-inverse solve; the crate also scores calibrations (CR/TRE),
//! localizes needle tips in segmentation masks and generates synthetic
//! scenes with known ground truth.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`; [`single`] has the `f32` set.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod needle;
pub mod published;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use needle::BinaryMask;
pub use scalar::Scalar;

pub type Mat = linalg::Mat<f64>;
pub type ImagePoint = calib::ImagePoint<f64>;
pub type WorldPoint = calib::WorldPoint<f64>;
pub type ExtrinsicTransform = calib::ExtrinsicTransform<f64>;
pub type IntrinsicMatrix = calib::IntrinsicMatrix<f64>;
pub type PointPair = calib::PointPair<f64>;
pub type PointPairSet = calib::PointPairSet<f64>;
pub type Calibration = calib::Calibration<f64>;
pub type SolveOptions = calib::SolveOptions<f64>;
pub type ErrorReport = metrics::ErrorReport<f64>;
pub type LineSegment2D = needle::LineSegment2D<f64>;
pub type PinholeIntrinsics = needle::PinholeIntrinsics<f64>;
pub type ScenarioSpec = synth::ScenarioSpec<f64>;
pub type SweepRow = synth::SweepRow<f64>;

/// `f32` aliases.
pub mod single {
    pub type Mat = crate::linalg::Mat<f32>;
    pub type ImagePoint = crate::calib::ImagePoint<f32>;
    pub type WorldPoint = crate::calib::WorldPoint<f32>;
    pub type ExtrinsicTransform = crate::calib::ExtrinsicTransform<f32>;
    pub type IntrinsicMatrix = crate::calib::IntrinsicMatrix<f32>;
    pub type PointPairSet = crate::calib::PointPairSet<f32>;
    pub type Calibration = crate::calib::Calibration<f32>;
    pub type LineSegment2D = crate::needle::LineSegment2D<f32>;
}
