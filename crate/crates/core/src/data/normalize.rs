use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Ranges narrower than this are treated as constant columns.
const CONSTANT_RANGE: f64 = 1e-12;

/// Scaled values computed with stored parameters are clamped to this range.
pub const CLAMP_RANGE: (f64, f64) = (-0.5, 1.5);

/// Per-feature min/max fitted on one client's own rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormalizationParams {
    pub fn fit(features: &Matrix) -> Self {
        let cols = features.cols();
        let mut mins = vec![f64::INFINITY; cols];
        let mut maxs = vec![f64::NEG_INFINITY; cols];
        for row in features.iter_rows() {
            for ((v, lo), hi) in row.iter().zip(&mut mins).zip(&mut maxs) {
                *lo = lo.min(*v);
                *hi = hi.max(*v);
            }
        }
        // no rows: identity-like params that map everything to 0
        for (lo, hi) in mins.iter_mut().zip(&mut maxs) {
            if !lo.is_finite() || !hi.is_finite() {
                *lo = 0.0;
                *hi = 0.0;
            }
        }
        Self { mins, maxs }
    }

    pub fn len(&self) -> usize {
        self.mins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mins.is_empty()
    }

    fn scale(&self, features: &Matrix, clamp: bool) -> Result<Matrix> {
        if features.cols() != self.len() {
            return Err(Error::Shape(format!(
                "{} feature columns, normalization fitted on {}",
                features.cols(),
                self.len()
            )));
        }
        let mut out = features.clone();
        let cols = self.len();
        for row in 0..out.rows() {
            let r = out.row_mut(row);
            for c in 0..cols {
                let range = self.maxs[c] - self.mins[c];
                r[c] = if range < CONSTANT_RANGE {
                    0.0
                } else {
                    let s = (r[c] - self.mins[c]) / range;
                    if clamp {
                        s.clamp(CLAMP_RANGE.0, CLAMP_RANGE.1)
                    } else {
                        s
                    }
                };
            }
        }
        Ok(out)
    }

    /// Maps scaled values back to the original units. Constant columns map to their min.
    pub fn denormalize(&self, scaled: &Matrix) -> Result<Matrix> {
        if scaled.cols() != self.len() {
            return Err(Error::Shape("column count mismatch".into()));
        }
        let mut out = scaled.clone();
        for row in 0..out.rows() {
            let r = out.row_mut(row);
            for c in 0..self.len() {
                r[c] = self.mins[c] + r[c] * (self.maxs[c] - self.mins[c]);
            }
        }
        Ok(out)
    }
}

/// Min-max scales `features` to `[0, 1]` per column.
///
/// Without `params`, the statistics are fitted on `features` itself. With
/// stored `params`, values are scaled by those and clamped to [`CLAMP_RANGE`].
/// Constant columns map to 0 either way.
pub fn normalize(
    features: &Matrix,
    params: Option<&NormalizationParams>,
) -> Result<(Matrix, NormalizationParams)> {
    match params {
        Some(p) => Ok((p.scale(features, true)?, p.clone())),
        None => {
            let p = NormalizationParams::fit(features);
            Ok((p.scale(features, false)?, p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_scales_to_unit_interval() {
        let m = Matrix::column(&[2.0, 4.0, 6.0]);
        let (s, p) = normalize(&m, None).unwrap();
        assert_eq!(s.as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!((p.mins[0], p.maxs[0]), (2.0, 6.0));
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let m = Matrix::from_rows(&[[3.0, 1.0], [3.0, 2.0]]).unwrap();
        let (s, _) = normalize(&m, None).unwrap();
        assert_eq!(s.column_values(0), vec![0.0, 0.0]);
        assert_eq!(s.column_values(1), vec![0.0, 1.0]);
    }

    #[test]
    fn stored_params_clamp() {
        let (_, p) = normalize(&Matrix::column(&[0.0, 10.0]), None).unwrap();
        let (s, _) = normalize(&Matrix::column(&[-20.0, 5.0, 30.0]), Some(&p)).unwrap();
        assert_eq!(s.as_slice(), &[-0.5, 0.5, 1.5]);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let (_, p) = normalize(&Matrix::zeros(2, 3), None).unwrap();
        assert!(normalize(&Matrix::zeros(2, 2), Some(&p)).is_err());
    }
}
