use super::template::{EncryptedTemplate, MatchPath, TemplateForm};
use crate::codec::DEFAULT_SCALAR_BASE;
use crate::codec::{decode_scalar, decode_slots, dequantize_score, QuantizedTemplate};
use crate::fv::{
    decrypt, hom_add, hom_multiply, sum_slots, Ciphertext, EvaluationKey, GaloisKeySet, SecretKey,
};
use crate::{Error, Result};

/// Homomorphic operations performed by one scoring call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCount {
    pub multiplies: usize,
    pub additions: usize,
    pub rotations: usize,
}

fn check_pair(ex: &EncryptedTemplate, ey: &EncryptedTemplate) -> Result<()> {
    if ex.path() != ey.path() {
        return Err(Error::ParameterMismatch(format!(
            "{} template against {} template",
            ex.path().name(),
            ey.path().name()
        )));
    }
    if ex.dim() != ey.dim() || ex.delta() != ey.delta() {
        return Err(Error::ParameterMismatch(format!(
            "templates of shape ({}, {}) and ({}, {})",
            ex.dim(),
            ex.delta(),
            ey.dim(),
            ey.delta()
        )));
    }
    if ex.params_id() != ey.params_id() {
        return Err(Error::ParameterMismatch(
            "templates from different parameter sets".into(),
        ));
    }
    if ex.key_id() != ey.key_id() {
        return Err(Error::KeyMismatch(format!(
            "templates under keys {} and {}",
            ex.key_id(),
            ey.key_id()
        )));
    }
    Ok(())
}

/// Slot-wise product followed by a rotate-and-add reduction: every slot of
/// the result, slot 0 in particular, holds `sum_i x_i y_i mod t`.
pub fn encrypted_inner_product_batched(
    ex: &EncryptedTemplate,
    ey: &EncryptedTemplate,
    ek: &EvaluationKey,
    gks: &GaloisKeySet,
) -> Result<Ciphertext> {
    check_pair(ex, ey)?;
    match (ex.form(), ey.form()) {
        (TemplateForm::Batched(x), TemplateForm::Batched(y)) => {
            let prod = hom_multiply(x, y, ek)?;
            sum_slots(&prod, gks)
        }
        _ => Err(Error::ParameterMismatch(
            "batched inner product of element-wise templates".into(),
        )),
    }
}

/// `sum_i E(x_i) * E(y_i)`: `d` multiplications and `d - 1` additions.
pub fn encrypted_inner_product_elementwise(
    ex: &EncryptedTemplate,
    ey: &EncryptedTemplate,
    ek: &EvaluationKey,
) -> Result<Ciphertext> {
    elementwise_with_ops(ex, ey, ek).map(|(ct, _)| ct)
}

pub fn elementwise_with_ops(
    ex: &EncryptedTemplate,
    ey: &EncryptedTemplate,
    ek: &EvaluationKey,
) -> Result<(Ciphertext, OpCount)> {
    check_pair(ex, ey)?;
    let (xs, ys) = match (ex.form(), ey.form()) {
        (TemplateForm::Elementwise(x), TemplateForm::Elementwise(y)) => (x, y),
        _ => {
            return Err(Error::ParameterMismatch(
                "element-wise inner product of batched templates".into(),
            ))
        }
    };
    let mut ops = OpCount::default();
    let mut acc: Option<Ciphertext> = None;
    for (x, y) in xs.iter().zip(ys) {
        let p = hom_multiply(x, y, ek)?;
        ops.multiplies += 1;
        acc = Some(match acc {
            None => p,
            Some(a) => {
                ops.additions += 1;
                hom_add(&a, &p)?
            }
        });
    }
    let ct = acc.ok_or_else(|| Error::Domain("empty template".into()))?;
    Ok((ct, ops))
}

/// Encrypted inner product for either template layout. Galois keys are only
/// needed for the batched layout.
pub fn score(
    ex: &EncryptedTemplate,
    ey: &EncryptedTemplate,
    ek: &EvaluationKey,
    gks: Option<&GaloisKeySet>,
) -> Result<Ciphertext> {
    match ex.path() {
        MatchPath::Batched => {
            let gks = gks.ok_or_else(|| {
                Error::InvalidParameter("batched scoring needs galois keys".into())
            })?;
            encrypted_inner_product_batched(ex, ey, ek, gks)
        }
        MatchPath::Elementwise => encrypted_inner_product_elementwise(ex, ey, ek),
    }
}

/// A decrypted score: the integer inner product and `1 - delta^2 * raw`
/// clamped to the cosine range `[0, 2]`. Use `dequantize_score` for the
/// unclamped value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchScore {
    pub raw: i128,
    pub dissimilarity: f64,
}

impl MatchScore {
    pub fn from_raw(raw: i128, delta: f64) -> Self {
        Self {
            raw,
            dissimilarity: dequantize_score(raw, delta).clamp(0.0, 2.0),
        }
    }
}

/// Decrypt the integer inner product in `ct`.
pub fn decrypt_raw_score(ct: &Ciphertext, sk: &SecretKey, path: MatchPath) -> Result<i128> {
    let pt = decrypt(ct, sk)?;
    match path {
        MatchPath::Batched => Ok(decode_slots(&pt, ct.context())?[0]),
        MatchPath::Elementwise => decode_scalar(&pt, DEFAULT_SCALAR_BASE),
    }
}

pub fn decrypt_score(
    ct: &Ciphertext,
    sk: &SecretKey,
    path: MatchPath,
    delta: f64,
) -> Result<MatchScore> {
    Ok(MatchScore::from_raw(
        decrypt_raw_score(ct, sk, path)?,
        delta,
    ))
}

/// The same score computed in the clear.
pub fn plaintext_score(qx: &QuantizedTemplate, qy: &QuantizedTemplate) -> Result<MatchScore> {
    if qx.delta() != qy.delta() {
        return Err(Error::ParameterMismatch("quantization steps differ".into()));
    }
    Ok(MatchScore::from_raw(qx.dot(qy)?, qx.delta()))
}
