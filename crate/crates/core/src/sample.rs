//! Paired circular covariate and response observations.

use std::f64::consts::TAU;

use crate::error::{CircError, Result};
use crate::family::Family;

/// Reduces an angle to `[0, 2π)`.
#[inline]
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A sample `{(Θ_i, Y_i)}` with angles stored in `[0, 2π)`.
///
/// An optional per-observation offset is added to the local predictor in
/// every fit; partially linear models use it to carry the parametric part.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularSample {
    angles: Vec<f64>,
    responses: Vec<f64>,
    offset: Option<Vec<f64>>,
}

impl CircularSample {
    /// Builds a sample, reducing angles modulo 2π. Responses are not checked
    /// against any family here; see [`CircularSample::for_family`].
    pub fn new(angles: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(CircError::InvalidArgument("sample is empty".into()));
        }
        if angles.len() != responses.len() {
            return Err(CircError::InvalidArgument(format!(
                "{} angles but {} responses",
                angles.len(),
                responses.len()
            )));
        }
        if let Some(i) = angles.iter().position(|a| !a.is_finite()) {
            return Err(CircError::InvalidResponse {
                row: i,
                reason: format!("angle {} is not finite", angles[i]),
            });
        }
        Ok(CircularSample {
            angles: angles.into_iter().map(wrap_angle).collect(),
            responses,
            offset: None,
        })
    }

    /// Builds a sample and validates every response for `family`.
    pub fn for_family(angles: Vec<f64>, responses: Vec<f64>, family: Family) -> Result<Self> {
        let s = Self::new(angles, responses)?;
        s.validate(family)?;
        Ok(s)
    }

    /// Builds a sample from `(angle, response)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (a, y) = pairs.iter().copied().unzip();
        Self::new(a, y)
    }

    pub fn validate(&self, family: Family) -> Result<()> {
        for (row, &y) in self.responses.iter().enumerate() {
            family
                .check_response(y)
                .map_err(|reason| CircError::InvalidResponse { row, reason })?;
        }
        Ok(())
    }

    /// Attaches a fixed offset to the predictor of every observation.
    pub fn with_offset(mut self, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != self.len() {
            return Err(CircError::InvalidArgument(format!(
                "offset has length {} but sample has {}",
                offset.len(),
                self.len()
            )));
        }
        if offset.iter().any(|v| !v.is_finite()) {
            return Err(CircError::InvalidArgument("offset must be finite".into()));
        }
        self.offset = Some(offset);
        Ok(self)
    }

    pub fn without_offset(mut self) -> Self {
        self.offset = None;
        self
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn offset(&self) -> Option<&[f64]> {
        self.offset.as_deref()
    }

    #[inline]
    pub(crate) fn offset_at(&self, i: usize) -> f64 {
        match &self.offset {
            Some(o) => o[i],
            None => 0.0,
        }
    }

    /// The sample with observation `i` removed.
    pub fn without(&self, i: usize) -> CircularSample {
        let drop = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, x)| *x)
                .collect()
        };
        CircularSample {
            angles: drop(&self.angles),
            responses: drop(&self.responses),
            offset: self.offset.as_deref().map(drop),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_are_wrapped() {
        let s = CircularSample::new(vec![-0.5, 7.0, TAU], vec![0.0; 3]).unwrap();
        assert!((s.angles()[0] - (TAU - 0.5)).abs() < 1e-15);
        assert!((s.angles()[1] - (7.0 - TAU)).abs() < 1e-15);
        assert_eq!(s.angles()[2], 0.0);
        assert!(s.angles().iter().all(|a| (0.0..TAU).contains(a)));
        assert_eq!(wrap_angle(-1e-20), 0.0);
    }

    #[test]
    fn rejects_bad_shapes_and_responses() {
        assert!(CircularSample::new(vec![], vec![]).is_err());
        assert!(CircularSample::new(vec![0.0], vec![1.0, 2.0]).is_err());
        let err = CircularSample::for_family(vec![0.0, 1.0], vec![1.0, 2.0], Family::Bernoulli)
            .unwrap_err();
        assert!(matches!(err, CircError::InvalidResponse { row: 1, .. }));
        assert!(CircularSample::for_family(vec![0.0], vec![1.5], Family::Poisson).is_err());
        assert!(CircularSample::for_family(vec![0.0], vec![0.0], Family::Gamma).is_err());
        assert!(CircularSample::for_family(vec![0.0], vec![f64::NAN], Family::Normal).is_err());
    }

    #[test]
    fn leave_one_out_keeps_offset_aligned() {
        let s = CircularSample::new(vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0])
            .unwrap()
            .with_offset(vec![10.0, 20.0, 30.0])
            .unwrap();
        let t = s.without(1);
        assert_eq!(t.responses(), &[1.0, 3.0]);
        assert_eq!(t.offset().unwrap(), &[10.0, 30.0]);
    }
}
