use crate::{Error, Result};

/// Tolerance on `||v||_2 = 1` accepted by [`quantize`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Quantization steps used throughout the evaluation.
pub const STANDARD_STEPS: [f64; 3] = [0.1, 0.01, 0.0025];

/// A unit feature vector rounded to integer multiples of `delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedTemplate {
    values: Vec<i64>,
    delta: f64,
}

impl QuantizedTemplate {
    /// Wrap already-quantized integers, checking the magnitude bound implied
    /// by a unit source vector.
    pub fn new(values: Vec<i64>, delta: f64) -> Result<Self> {
        check_step(delta)?;
        let bound = max_magnitude(delta) + 1;
        if let Some(v) = values.iter().find(|v| v.unsigned_abs() as i64 > bound) {
            return Err(Error::Domain(format!(
                "quantized value {v} exceeds {bound} at step {delta}"
            )));
        }
        Ok(Self { values, delta })
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Exact integer inner product with another template.
    pub fn dot(&self, other: &Self) -> Result<i128> {
        if self.dim() != other.dim() {
            return Err(Error::ParameterMismatch(format!(
                "dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(integer_dot(&self.values, &other.values))
    }
}

pub fn integer_dot(a: &[i64], b: &[i64]) -> i128 {
    a.iter().zip(b).map(|(&x, &y)| x as i128 * y as i128).sum()
}

fn check_step(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantization step {delta} outside (0, 1]"
        )));
    }
    Ok(())
}

/// `ceil(1/delta)`, tolerant of the representation error in steps like 0.1.
pub fn max_magnitude(delta: f64) -> i64 {
    (1.0 / delta - 1e-9).ceil() as i64
}

/// Round half away from zero; values within `1e-9` of a half are treated as
/// exact halves so that e.g. `-0.005 / 0.01` rounds to `-1`.
fn round_half_away(x: f64) -> i64 {
    let mag = x.abs();
    let floor = mag.floor();
    let rounded = if mag - floor >= 0.5 - 1e-9 {
        floor + 1.0
    } else {
        floor
    };
    if x < 0.0 {
        -(rounded as i64)
    } else {
        rounded as i64
    }
}

/// `value_i = round(v_i / delta)` for a unit vector `v`.
pub fn quantize(v: &[f64], delta: f64) -> Result<QuantizedTemplate> {
    check_step(delta)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite feature".into()));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::Domain(format!(
            "feature vector norm {norm} is not 1"
        )));
    }
    let values = v.iter().map(|&x| round_half_away(x / delta)).collect();
    Ok(QuantizedTemplate { values, delta })
}

/// `1 - delta^2 * s`.
pub fn dequantize_score(s: i128, delta: f64) -> f64 {
    1.0 - delta * delta * s as f64
}

/// Worst-case gap between the quantized and exact dissimilarity of two unit
/// vectors of dimension `d`: `delta*sqrt(d) + delta^2*d/4`.
pub fn quantization_error_bound(delta: f64, d: usize) -> f64 {
    let d = d as f64;
    delta * d.sqrt() + delta * delta * d / 4.0
}

/// Whether scores at step `delta` fit in the symmetric range of `t` with a 5%
/// margin: `t > 2 * (ceil(1/delta) + 1)^2 * 1.05`.
pub fn score_range_fits(delta: f64, t: u128) -> bool {
    let m = (max_magnitude(delta) + 1) as f64;
    t as f64 > 2.0 * m * m * 1.05
}

/// Reject a step that could wrap the score modulo `t`.
pub fn check_score_range(delta: f64, t: u128) -> Result<()> {
    check_step(delta)?;
    if score_range_fits(delta, t) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "plaintext modulus {t} too small for quantization step {delta}; \
             use the two-prime parameter set"
        )))
    }
}
