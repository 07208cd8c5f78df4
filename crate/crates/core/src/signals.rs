//! Input signals used by the benchmark experiments.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    /// `(1 + sin πt) e^{−t/5}`
    CiU1,
    /// `25 (1 + sin πt)`
    CiU2,
    /// `[50 (sin 2πt − 1), 1]`
    FhnI0Sin,
    /// `[5·10⁴ t³ e^{−15t}, 1]`
    FhnI0Bump,
    Constant(Vec<f64>),
    /// Piecewise linear through `(times[i], values[i])`, held constant
    /// outside the table.
    Table { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl InputSignal {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ci_u1" => Ok(InputSignal::CiU1),
            "ci_u2" => Ok(InputSignal::CiU2),
            "fhn_i0_sin" => Ok(InputSignal::FhnI0Sin),
            "fhn_i0_bump" => Ok(InputSignal::FhnI0Bump),
            _ => Err(Error::Parse(format!("unknown input signal `{name}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InputSignal::CiU1 => "ci_u1",
            InputSignal::CiU2 => "ci_u2",
            InputSignal::FhnI0Sin => "fhn_i0_sin",
            InputSignal::FhnI0Bump => "fhn_i0_bump",
            InputSignal::Constant(_) => "constant",
            InputSignal::Table { .. } => "table",
        }
    }

    pub fn table(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Invalid("input table needs matching, non-empty times and values".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("input table times must increase strictly".into()));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::Invalid("input table rows differ in length".into()));
        }
        Ok(InputSignal::Table { times, values })
    }

    /// Number of input channels.
    pub fn m(&self) -> usize {
        match self {
            InputSignal::CiU1 | InputSignal::CiU2 => 1,
            InputSignal::FhnI0Sin | InputSignal::FhnI0Bump => 2,
            InputSignal::Constant(v) => v.len(),
            InputSignal::Table { values, .. } => values[0].len(),
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            InputSignal::CiU1 => DVector::from_element(1, (1.0 + (PI * t).sin()) * (-t / 5.0).exp()),
            InputSignal::CiU2 => DVector::from_element(1, 25.0 * (1.0 + (PI * t).sin())),
            InputSignal::FhnI0Sin => DVector::from_vec(vec![50.0 * ((2.0 * PI * t).sin() - 1.0), 1.0]),
            InputSignal::FhnI0Bump => DVector::from_vec(vec![5e4 * t.powi(3) * (-15.0 * t).exp(), 1.0]),
            InputSignal::Constant(v) => DVector::from_column_slice(v),
            InputSignal::Table { times, values } => {
                let last = times.len() - 1;
                if t <= times[0] {
                    return DVector::from_column_slice(&values[0]);
                }
                if t >= times[last] {
                    return DVector::from_column_slice(&values[last]);
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let s = (t - times[i]) / (times[i + 1] - times[i]);
                DVector::from_iterator(values[i].len(), values[i].iter().zip(&values[i + 1]).map(|(a, b)| a + s * (b - a)))
            }
        }
    }
}
