//! Turning longitudinal measurements into basis-expanded functions.

use crate::basis::{design_matrix, BasisSpec};
use crate::error::{Error, Result};
use crate::linalg::{min_norm_lsq, Vector};

/// One subject's `(time, value)` measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalSample {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl LongitudinalSample {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("sample needs at least one measurement"));
        }
        if times.len() != values.len() {
            return Err(Error::invalid(format!(
                "sample has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample contains non-finite entries"));
        }
        Ok(LongitudinalSample { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A fitted function `x(t) = w^T φ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDatum {
    spec: BasisSpec,
    coefficients: Vector,
}

impl FunctionalDatum {
    pub fn new(spec: BasisSpec, coefficients: Vector) -> Result<Self> {
        if coefficients.len() != spec.k() {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                spec.k(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients contain non-finite entries"));
        }
        Ok(FunctionalDatum { spec, coefficients })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn coefficients(&self) -> &Vector {
        &self.coefficients
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        evaluate(self, t)
    }
}

/// Minimum-norm interpolator `w = Φ+ x`.
///
/// When `K >= M` and the design has full row rank the fit passes through every
/// point; otherwise it is the least-squares fit of smallest norm.
pub fn fit_coefficients(sample: &LongitudinalSample, spec: &BasisSpec) -> Result<FunctionalDatum> {
    let phi = design_matrix(spec, sample.times())?;
    let x = Vector::from_column_slice(sample.values());
    let w = min_norm_lsq(&phi, &x)?;
    FunctionalDatum::new(*spec, w)
}

pub fn evaluate(datum: &FunctionalDatum, t: f64) -> Result<f64> {
    let mut phi = vec![0.0; datum.spec.k()];
    datum.spec.eval_into(t, &mut phi)?;
    Ok(phi.iter().zip(datum.coefficients.iter()).map(|(a, b)| a * b).sum())
}

/// Residual sum of squares of a fitted datum against its sample.
pub fn residual_sum_of_squares(datum: &FunctionalDatum, sample: &LongitudinalSample) -> Result<f64> {
    let phi = design_matrix(datum.spec(), sample.times())?;
    let fitted = phi * datum.coefficients();
    Ok(fitted
        .iter()
        .zip(sample.values())
        .map(|(f, x)| (x - f).powi(2))
        .sum())
}
