//! Semi-metrics of the form scale * ||x - y||_inf ^ exponent.
//!
//! These measure how fast an objective can fall off around its maximum.
//! Symmetry and vanishing at x = y hold by construction; the triangle
//! inequality is deliberately not required (exponents above 1 break it),
//! which is why this is a semi-metric and not a metric.

use crate::error::{Error, Result};

/// Norm underlying the semi-metric. Only the max-norm is used; the enum
/// leaves room for alternatives without changing call sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Max,
}

/// distance(x, y) = scale * ||x - y||_inf ^ exponent, scale >= 0, exponent > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiMetric {
    scale: f64,
    exponent: f64,
    norm: Norm,
}

impl SemiMetric {
    pub fn new(scale: f64, exponent: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::InvalidParams(format!(
                "semi-metric scale must be finite and nonnegative, got {scale}"
            )));
        }
        if !exponent.is_finite() || exponent <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "semi-metric exponent must be finite and positive, got {exponent}"
            )));
        }
        Ok(Self {
            scale,
            exponent,
            norm: Norm::Max,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len(), "points must share a dimension");
        let max_diff = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        self.scale * max_diff.powf(self.exponent)
    }

    /// Max-norm separation equivalent to a semi-metric distance of `d`:
    /// the smallest ||x - y||_inf with distance(x, y) >= d. Infinite when
    /// the metric is degenerate (scale 0) and d > 0.
    pub fn norm_separation(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return 0.0;
        }
        if self.scale == 0.0 {
            return f64::INFINITY;
        }
        (d / self.scale).powf(1.0 / self.exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn distance_matches_closed_form() {
        let l1 = SemiMetric::new(12.0, 1.0).unwrap();
        assert_relative_eq!(l1.distance(&[0.25], &[0.75]), 6.0, max_relative = 1e-15);

        let l2 = SemiMetric::new(144.0, 2.0).unwrap();
        assert_relative_eq!(l2.distance(&[0.0], &[0.5]), 36.0, max_relative = 1e-15);
    }

    #[test]
    fn max_norm_takes_largest_coordinate_gap() {
        let m = SemiMetric::new(1.0, 1.0).unwrap();
        assert_relative_eq!(
            m.distance(&[0.0, 0.0], &[0.1, 0.4]),
            0.4,
            max_relative = 1e-15
        );
    }

    #[test]
    fn zero_at_identical_points_and_symmetric() {
        let m = SemiMetric::new(3.0, 0.5).unwrap();
        assert_eq!(m.distance(&[0.3], &[0.3]), 0.0);
        let a = [0.12];
        let b = [0.91];
        assert_eq!(m.distance(&a, &b), m.distance(&b, &a));
    }

    #[test]
    fn norm_separation_inverts_distance() {
        let m = SemiMetric::new(12.0, 1.0).unwrap();
        assert_relative_eq!(m.norm_separation(6.0), 0.5, max_relative = 1e-15);

        let sq = SemiMetric::new(144.0, 2.0).unwrap();
        let sep = sq.norm_separation(1.0);
        assert_relative_eq!(sq.distance(&[0.0], &[sep]), 1.0, max_relative = 1e-12);

        let degenerate = SemiMetric::new(0.0, 1.0).unwrap();
        assert!(degenerate.norm_separation(0.1).is_infinite());
        assert_eq!(degenerate.norm_separation(0.0), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SemiMetric::new(-1.0, 1.0).is_err());
        assert!(SemiMetric::new(f64::NAN, 1.0).is_err());
        assert!(SemiMetric::new(1.0, 0.0).is_err());
        assert!(SemiMetric::new(1.0, -2.0).is_err());
        assert!(SemiMetric::new(1.0, f64::INFINITY).is_err());
        assert!(SemiMetric::new(0.0, 1.0).is_ok());
    }
}
