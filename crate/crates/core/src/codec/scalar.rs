//! Signed base-`w` integer encoding: `a = sign(a) * sum_i a_i w^i` becomes the
//! polynomial `sign(a) * sum_i a_i x^i`; evaluating at `x = w` decodes.

use std::sync::Arc;

use crate::fv::{FvContext, Plaintext};
use crate::{Error, Result};

pub const DEFAULT_SCALAR_BASE: u64 = 10;

/// Signed digit polynomial of one integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarEncoding {
    coeffs: Vec<i64>,
    w: u64,
}

impl ScalarEncoding {
    /// Coefficients, lowest degree first, trailing zeros trimmed.
    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn base(&self) -> u64 {
        self.w
    }

    pub fn to_plaintext(&self, ctx: &Arc<FvContext>) -> Result<Plaintext> {
        let values: Vec<i128> = self.coeffs.iter().map(|&c| c as i128).collect();
        Plaintext::from_signed(ctx, &values)
    }
}

/// `w^n - 1`, saturating.
fn max_encodable(w: u64, n: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..n {
        match acc.checked_mul(w as u128) {
            Some(v) => acc = v,
            None => return u128::MAX,
        }
    }
    acc - 1
}

pub fn encode_scalar(a: i128, w: u64, n: usize) -> Result<ScalarEncoding> {
    if w < 2 {
        return Err(Error::InvalidParameter(format!("scalar base {w}")));
    }
    let mag = a.unsigned_abs();
    if mag > max_encodable(w, n) {
        return Err(Error::Overflow(format!(
            "{a} needs more than {n} base-{w} digits"
        )));
    }
    let sign = if a < 0 { -1 } else { 1 };
    let mut coeffs = Vec::new();
    let mut rest = mag;
    while rest > 0 {
        coeffs.push(sign * (rest % w as u128) as i64);
        rest /= w as u128;
    }
    Ok(ScalarEncoding { coeffs, w })
}

/// Evaluate the centred plaintext polynomial at `x = w`.
pub fn decode_scalar(pt: &Plaintext, w: u64) -> Result<i128> {
    let coeffs = pt.centered();
    let w = w as i128;
    let mut acc: i128 = 0;
    for &c in coeffs.iter().rev() {
        acc = acc
            .checked_mul(w)
            .and_then(|v| v.checked_add(c))
            .ok_or_else(|| Error::Overflow("decoded scalar exceeds 128 bits".into()))?;
    }
    Ok(acc)
}

/// Largest plaintext coefficient an inner product of two `d`-dimensional
/// vectors with `||x||_2, ||y||_2 <= norm` can reach in this encoding (any
/// base `w >= 2`): the constant term dominates and is at most `norm^2`.
pub fn inner_product_coefficient_bound(norm: f64) -> f64 {
    norm * norm
}
