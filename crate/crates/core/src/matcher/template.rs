use std::sync::Arc;

use rand::CryptoRng;

use crate::codec::{
    check_score_range, encode_scalar, encode_template, max_magnitude, QuantizedTemplate,
    DEFAULT_SCALAR_BASE,
};
use crate::fv::{encrypt, key_switch, Ciphertext, FvContext, KeyId, KeySwitchKey, PublicKey};
use crate::fv::{Reader, Writer};
use crate::{Error, Result};

const TEMPLATE_MAGIC: [u8; 4] = *b"HEFT";

/// How a template is laid out in ciphertexts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatchPath {
    /// All features packed into the slots of one ciphertext.
    Batched,
    /// One ciphertext per feature, each a base-10 scalar encoding.
    Elementwise,
}

impl MatchPath {
    pub fn name(self) -> &'static str {
        match self {
            Self::Batched => "batched",
            Self::Elementwise => "elementwise",
        }
    }

    fn code(self) -> u8 {
        match self {
            Self::Batched => 1,
            Self::Elementwise => 2,
        }
    }

    fn from_code(b: u8) -> Result<Self> {
        match b {
            1 => Ok(Self::Batched),
            2 => Ok(Self::Elementwise),
            _ => Err(Error::Decode(format!("unknown template form {b}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateForm {
    Batched(Ciphertext),
    Elementwise(Vec<Ciphertext>),
}

/// An encrypted quantized feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedTemplate {
    form: TemplateForm,
    dim: usize,
    delta: f64,
}

/// Largest score coefficient the element-wise path can produce is bounded by
/// `(ceil(1/delta) + sqrt(d)/2)^2`; it has to stay inside `(-t/2, t/2)`.
pub fn elementwise_fits(delta: f64, dim: usize, t: u128) -> bool {
    let norm = max_magnitude(delta) as f64 + (dim as f64).sqrt() / 2.0;
    norm * norm < t as f64 / 2.0
}

pub fn check_elementwise_range(delta: f64, dim: usize, t: u128) -> Result<()> {
    if elementwise_fits(delta, dim, t) {
        Ok(())
    } else {
        Err(Error::Overflow(format!(
            "element-wise scores at step {delta}, dimension {dim} can exceed t = {t}"
        )))
    }
}

/// Check the capacity and range rules for encrypting templates of this shape.
pub fn check_template_params(
    ctx: &FvContext,
    path: MatchPath,
    delta: f64,
    dim: usize,
) -> Result<()> {
    let t = ctx.params().t().value();
    match path {
        MatchPath::Batched => {
            if !ctx.supports_batching() {
                return Err(Error::Unsupported(
                    "batched templates need batching parameters".into(),
                ));
            }
            if dim > ctx.n() {
                return Err(Error::Capacity(format!(
                    "dimension {dim} exceeds {} slots",
                    ctx.n()
                )));
            }
            check_score_range(delta, t)
        }
        MatchPath::Elementwise => check_elementwise_range(delta, dim, t),
    }
}

pub fn encrypt_template<R: CryptoRng + ?Sized>(
    q: &QuantizedTemplate,
    pk: &PublicKey,
    path: MatchPath,
    rng: &mut R,
) -> Result<EncryptedTemplate> {
    let ctx = pk.context();
    check_template_params(ctx, path, q.delta(), q.dim())?;
    let form = match path {
        MatchPath::Batched => {
            let pt = encode_template(q, ctx)?;
            TemplateForm::Batched(encrypt(&pt, pk, rng)?)
        }
        MatchPath::Elementwise => {
            let cts = q
                .values()
                .iter()
                .map(|&v| {
                    let pt = encode_scalar(v as i128, DEFAULT_SCALAR_BASE, ctx.n())?
                        .to_plaintext(ctx)?;
                    encrypt(&pt, pk, rng)
                })
                .collect::<Result<Vec<_>>>()?;
            TemplateForm::Elementwise(cts)
        }
    };
    Ok(EncryptedTemplate {
        form,
        dim: q.dim(),
        delta: q.delta(),
    })
}

impl EncryptedTemplate {
    pub fn form(&self) -> &TemplateForm {
        &self.form
    }

    pub fn path(&self) -> MatchPath {
        match self.form {
            TemplateForm::Batched(_) => MatchPath::Batched,
            TemplateForm::Elementwise(_) => MatchPath::Elementwise,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn ciphertexts(&self) -> &[Ciphertext] {
        match &self.form {
            TemplateForm::Batched(ct) => std::slice::from_ref(ct),
            TemplateForm::Elementwise(cts) => cts,
        }
    }

    fn first(&self) -> &Ciphertext {
        &self.ciphertexts()[0]
    }

    pub fn context(&self) -> &Arc<FvContext> {
        self.first().context()
    }

    pub fn params_id(&self) -> [u8; 32] {
        self.first().params_id()
    }

    pub fn key_id(&self) -> KeyId {
        self.first().key_id()
    }

    /// Re-encrypt every ciphertext under the switch key's target.
    pub fn key_switch(&self, ksk: &KeySwitchKey) -> Result<Self> {
        let form = match &self.form {
            TemplateForm::Batched(ct) => TemplateForm::Batched(key_switch(ct, ksk)?),
            TemplateForm::Elementwise(cts) => TemplateForm::Elementwise(
                cts.iter()
                    .map(|ct| key_switch(ct, ksk))
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Self {
            form,
            dim: self.dim,
            delta: self.delta,
        })
    }

    /// `"HEFT" | form u8 | dim u32 | delta f64 | count u32 | (len u32, ciphertext)*`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&TEMPLATE_MAGIC);
        w.u8(self.path().code());
        w.u32(self.dim as u32);
        w.u64(self.delta.to_bits());
        let cts = self.ciphertexts();
        w.u32(cts.len() as u32);
        for ct in cts {
            let bytes = ct.to_bytes();
            w.u32(bytes.len() as u32);
            w.bytes(&bytes);
        }
        w.finish()
    }

    pub fn encoded_len(&self) -> usize {
        4 + 1
            + 4
            + 8
            + 4
            + self
                .ciphertexts()
                .iter()
                .map(|c| 4 + c.encoded_len())
                .sum::<usize>()
    }

    pub fn from_bytes(ctx: &Arc<FvContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != TEMPLATE_MAGIC {
            return Err(Error::Decode("bad template magic".into()));
        }
        let path = MatchPath::from_code(r.u8()?)?;
        let dim = r.u32()? as usize;
        let delta = f64::from_bits(r.u64()?);
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Decode(format!("quantization step {delta}")));
        }
        let count = r.u32()? as usize;
        let expected = match path {
            MatchPath::Batched => 1,
            MatchPath::Elementwise => dim,
        };
        if count != expected || dim == 0 {
            return Err(Error::Decode(format!(
                "{count} ciphertexts for a {} template of dimension {dim}",
                path.name()
            )));
        }
        if path == MatchPath::Batched && dim > ctx.n() {
            return Err(Error::Decode(format!("dimension {dim} exceeds slot count")));
        }
        // Each ciphertext needs at least its two polynomials; bound the
        // allocation by what the input can actually hold.
        let min_ct = 2 * ctx.n() * ctx.params().q().byte_width();
        let mut cts = Vec::with_capacity(count.min(r.remaining() / min_ct + 1));
        for _ in 0..count {
            let len = r.u32()? as usize;
            cts.push(Ciphertext::from_bytes(ctx, r.take(len)?)?);
        }
        r.finish()?;
        let key = cts[0].key_id();
        if cts.iter().any(|c| c.key_id() != key) {
            return Err(Error::Decode("template mixes encryption keys".into()));
        }
        let form = match path {
            MatchPath::Batched => TemplateForm::Batched(cts.pop().expect("one ciphertext")),
            MatchPath::Elementwise => TemplateForm::Elementwise(cts),
        };
        Ok(Self { form, dim, delta })
    }
}
