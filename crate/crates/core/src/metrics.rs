//! Accuracy metrics: per-point error, calibration reproducibility (CR, the
//! mean Euclidean error) and target registration error (TRE, the RMS of the
//! same errors).

use crate::calib::{map_image_to_world, Calibration, PointPairSet, WorldPoint};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Euclidean distance between a mapped point and its measurement, mm.
pub fn point_error<T: Scalar>(predicted: &WorldPoint<T>, measured: &WorldPoint<T>) -> T {
    predicted.distance(measured)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointError<T> {
    /// Zero-based position in the evaluation set.
    pub index: usize,
    pub predicted: WorldPoint<T>,
    pub measured: WorldPoint<T>,
    pub error_mm: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport<T> {
    pub per_point: Vec<PointError<T>>,
    pub cr_mm: T,
    pub tre_mm: T,
}

impl<T: Scalar> ErrorReport<T> {
    pub fn n(&self) -> usize {
        self.per_point.len()
    }

    pub fn errors(&self) -> Vec<T> {
        self.per_point.iter().map(|p| p.error_mm).collect()
    }
}

/// CR and TRE of a list of nonnegative errors: `(mean, sqrt(mean of squares))`.
pub fn cr_tre<T: Scalar>(errors: &[T]) -> Result<(T, T)> {
    if errors.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let n = T::from_usize(errors.len()).expect("count fits scalar");
    let cr = errors.iter().fold(T::zero(), |a, &e| a + e) / n;
    let tre = (errors.iter().fold(T::zero(), |a, &e| a + e * e) / n).sqrt();
    // mean <= rms holds exactly; rounding can flip equal values by an ulp
    Ok((cr, tre.max(cr)))
}

/// Maps every evaluation pixel through `cal` and scores it against its
/// measured world point.
pub fn compute_report<T: Scalar>(cal: &Calibration<T>, eval_pairs: &PointPairSet<T>) -> Result<ErrorReport<T>> {
    if eval_pairs.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let per_point = eval_pairs
        .iter()
        .enumerate()
        .map(|(index, pair)| {
            let predicted = map_image_to_world(cal, &pair.image)?;
            Ok(PointError {
                index,
                predicted,
                measured: pair.world,
                error_mm: point_error(&predicted, &pair.world),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<T> = per_point.iter().map(|p| p.error_mm).collect();
    let (cr_mm, tre_mm) = cr_tre(&errors)?;
    Ok(ErrorReport {
        per_point,
        cr_mm,
        tre_mm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::{ExtrinsicTransform, ImagePoint, IntrinsicMatrix, PointPair};
    use proptest::prelude::*;

    #[test]
    fn published_point_errors() {
        let e: f64 = point_error(
            &WorldPoint::new(66.488, 59.764, 349.0),
            &WorldPoint::new(66.40, 59.94, 349.0),
        );
        assert!((e - 0.1968).abs() <= 0.0005, "{e}");
        let e: f64 = point_error(
            &WorldPoint::new(14.633, 32.121, 349.0),
            &WorldPoint::new(14.58, 29.23, 349.0),
        );
        assert!((e - 2.8915).abs() <= 0.0005, "{e}");
        let p = WorldPoint::new(1.0, 2.0, 3.0);
        assert_eq!(point_error(&p, &p), 0.0);
    }

    #[test]
    fn published_cr_and_tre() {
        let errors: [f64; 10] = [
            0.1968, 2.2535, 1.7686, 2.2660, 1.7421, 1.2999, 1.2108, 0.6740, 0.3643, 2.8915,
        ];
        let (cr, tre) = cr_tre(&errors).unwrap();
        assert!((cr - 1.4668).abs() <= 0.0005, "{cr}");
        assert!((tre - 1.6887).abs() <= 0.0005, "{tre}");
    }

    #[test]
    fn hand_arithmetic() {
        let (cr, tre) = cr_tre(&[3.0, 4.0]).unwrap();
        assert_eq!(cr, 3.5);
        assert!((tre - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(cr_tre(&[0.0, 0.0, 0.0]).unwrap(), (0.0, 0.0));
        assert_eq!(cr_tre::<f64>(&[]), Err(Error::EmptyEvaluation));
    }

    #[test]
    fn report_over_exact_pairs_is_zero() {
        let cal = Calibration::from_parts(
            ExtrinsicTransform::from_translation(1.0, 2.0, 3.0),
            IntrinsicMatrix::planar([0.3, 0.0, 1.0], [0.0, 0.3, 2.0]),
        );
        let pairs: PointPairSet<f64> = [(0.0, 0.0), (10.0, 5.0), (-7.0, 40.0)]
            .iter()
            .map(|&(u, v)| {
                let p = ImagePoint::new(u, v);
                PointPair::new(p, cal.map(&p).unwrap())
            })
            .collect();
        let r = compute_report(&cal, &pairs).unwrap();
        assert_eq!(r.n(), 3);
        assert_eq!((r.cr_mm, r.tre_mm), (0.0, 0.0));
        assert_eq!(r.per_point[2].index, 2);
        assert!(compute_report(&cal, &PointPairSet::default()).is_err());
    }

    proptest! {
        #[test]
        fn mean_never_exceeds_rms(errors in prop::collection::vec(0.0f64..10.0, 1..40)) {
            let (cr, tre) = cr_tre(&errors).unwrap();
            prop_assert!(cr >= 0.0 && cr <= tre);
        }

        #[test]
        fn permutation_and_scaling(mut errors in prop::collection::vec(0.0f64..10.0, 1..40), s in 0.01f64..100.0) {
            let (cr, tre) = cr_tre(&errors).unwrap();
            errors.reverse();
            let (cr2, tre2) = cr_tre(&errors).unwrap();
            prop_assert!((cr - cr2).abs() <= 1e-12 * cr.max(1.0));
            prop_assert!((tre - tre2).abs() <= 1e-12 * tre.max(1.0));
            let scaled: Vec<f64> = errors.iter().map(|e| e * s).collect();
            let (cr3, tre3) = cr_tre(&scaled).unwrap();
            prop_assert!((cr3 - s * cr).abs() <= 1e-12 * (s * cr).max(1.0));
            prop_assert!((tre3 - s * tre).abs() <= 1e-12 * (s * tre).max(1.0));
        }
    }
}
