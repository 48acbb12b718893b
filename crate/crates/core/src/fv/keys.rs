use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{CryptoRng, Rng};

use super::context::FvContext;
use super::galois::{galois_exponent, row_swap_exponent};
use crate::ring::{
    base_decompose, sample_binary, sample_noise, sample_uniform, NttElement, RingElement,
};
use crate::{Error, Result};

/// Identifier attached to a key pair and every ciphertext encrypted under it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct KeyId(pub [u8; 16]);

impl fmt::Debug for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyId({self})")
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Binary secret key `s`, kept lifted into `R_q`.
#[derive(Clone)]
pub struct SecretKey {
    pub(crate) ctx: Arc<FvContext>,
    pub(crate) id: KeyId,
    pub(crate) bits: Vec<u8>,
    pub(crate) s: RingElement,
    pub(crate) s_ntt: NttElement,
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey({}, <redacted>)", self.id)
    }
}

impl SecretKey {
    pub(crate) fn from_bits(ctx: &Arc<FvContext>, id: KeyId, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != ctx.n() || bits.iter().any(|&b| b > 1) {
            return Err(Error::Decode(
                "secret key must be n binary coefficients".into(),
            ));
        }
        let signed: Vec<i128> = bits.iter().map(|&b| b as i128).collect();
        let s = RingElement::from_signed(ctx.q_ring(), &signed)?;
        let s_ntt = s.to_ntt()?;
        Ok(Self {
            ctx: ctx.clone(),
            id,
            bits,
            s,
            s_ntt,
        })
    }

    pub fn id(&self) -> KeyId {
        self.id
    }

    pub fn context(&self) -> &Arc<FvContext> {
        &self.ctx
    }

    /// Coefficients in `{0, 1}`.
    pub fn coefficients(&self) -> &[u8] {
        &self.bits
    }
}

/// `(p0, p1) = (-(a*s + e), a)`.
#[derive(Clone)]
pub struct PublicKey {
    pub(crate) ctx: Arc<FvContext>,
    pub(crate) id: KeyId,
    pub(crate) p0: RingElement,
    pub(crate) p1: RingElement,
    pub(crate) p0_ntt: NttElement,
    pub(crate) p1_ntt: NttElement,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.id)
    }
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.p0 == other.p0 && self.p1 == other.p1
    }
}

impl PublicKey {
    pub(crate) fn from_parts(
        ctx: &Arc<FvContext>,
        id: KeyId,
        p0: RingElement,
        p1: RingElement,
    ) -> Result<Self> {
        let p0_ntt = p0.to_ntt()?;
        let p1_ntt = p1.to_ntt()?;
        Ok(Self {
            ctx: ctx.clone(),
            id,
            p0,
            p1,
            p0_ntt,
            p1_ntt,
        })
    }

    pub fn id(&self) -> KeyId {
        self.id
    }

    pub fn context(&self) -> &Arc<FvContext> {
        &self.ctx
    }

    pub fn parts(&self) -> (&RingElement, &RingElement) {
        (&self.p0, &self.p1)
    }
}

/// Base-`w` encryptions of `w^i * source` under a target secret:
/// `k0_i = -(a_i*s + e_i) + w^i * source`, `k1_i = a_i`.
#[derive(Clone)]
pub(crate) struct SwitchingPairs {
    pub(crate) pairs: Vec<(RingElement, RingElement)>,
    ntt: Vec<(NttElement, NttElement)>,
    w: u128,
}

impl PartialEq for SwitchingPairs {
    fn eq(&self, other: &Self) -> bool {
        self.pairs == other.pairs && self.w == other.w
    }
}

impl SwitchingPairs {
    fn generate<R: CryptoRng + ?Sized>(
        source: &RingElement,
        target: &SecretKey,
        rng: &mut R,
    ) -> Result<Self> {
        let ctx = &target.ctx;
        let q = ctx.params().q();
        let w = ctx.params().w() as u128;
        let mut power = 1u128;
        let mut pairs = Vec::with_capacity(ctx.decomposition_len());
        for _ in 0..ctx.decomposition_len() {
            let a = sample_uniform(ctx.q_ring(), rng);
            let e = noise_element(ctx, rng)?;
            let a_s = a.to_ntt()?.mul(&target.s_ntt)?.to_coeff();
            let k0 = a_s.add(&e)?.neg().add(&source.scalar_mul(power))?;
            pairs.push((k0, a));
            power = q.mul(power, w % q.value());
        }
        Self::from_pairs(pairs, w)
    }

    pub(crate) fn from_pairs(pairs: Vec<(RingElement, RingElement)>, w: u128) -> Result<Self> {
        let ntt = pairs
            .iter()
            .map(|(k0, k1)| Ok((k0.to_ntt()?, k1.to_ntt()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pairs, ntt, w })
    }

    /// `(sum_i d_i * k0_i, sum_i d_i * k1_i)` for the digits `d_i` of `x`.
    pub(crate) fn apply(&self, x: &RingElement) -> Result<(RingElement, RingElement)> {
        let digits = base_decompose(x, self.w)?;
        debug_assert_eq!(digits.len(), self.ntt.len());
        let mut acc0 = NttElement::zero(x.context());
        let mut acc1 = NttElement::zero(x.context());
        for (d, (k0, k1)) in digits.iter().zip(&self.ntt) {
            let d = d.to_ntt()?;
            acc0.mul_acc(&d, k0)?;
            acc1.mul_acc(&d, k1)?;
        }
        Ok((acc0.to_coeff(), acc1.to_coeff()))
    }
}

/// Relinearization key: switching pairs for `s^2` under `s`.
#[derive(Clone)]
pub struct EvaluationKey {
    pub(crate) ctx: Arc<FvContext>,
    pub(crate) key_id: KeyId,
    pub(crate) inner: SwitchingPairs,
}

impl fmt::Debug for EvaluationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EvaluationKey({}, {} pairs)", self.key_id, self.len())
    }
}

impl PartialEq for EvaluationKey {
    fn eq(&self, other: &Self) -> bool {
        self.key_id == other.key_id && self.inner == other.inner
    }
}

impl EvaluationKey {
    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn context(&self) -> &Arc<FvContext> {
        &self.ctx
    }

    /// Number of `(k0, k1)` pairs: `floor(log_w q) + 1`.
    pub fn len(&self) -> usize {
        self.inner.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(RingElement, RingElement)] {
        &self.inner.pairs
    }
}

/// Re-encrypts ciphertexts from the `source` secret to the `target` secret.
#[derive(Clone)]
pub struct KeySwitchKey {
    pub(crate) ctx: Arc<FvContext>,
    pub(crate) source_id: KeyId,
    pub(crate) target_id: KeyId,
    pub(crate) inner: SwitchingPairs,
}

impl fmt::Debug for KeySwitchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeySwitchKey({} -> {})", self.source_id, self.target_id)
    }
}

impl PartialEq for KeySwitchKey {
    fn eq(&self, other: &Self) -> bool {
        self.source_id == other.source_id
            && self.target_id == other.target_id
            && self.inner == other.inner
    }
}

impl KeySwitchKey {
    pub fn source_id(&self) -> KeyId {
        self.source_id
    }

    pub fn target_id(&self) -> KeyId {
        self.target_id
    }

    pub fn context(&self) -> &Arc<FvContext> {
        &self.ctx
    }

    pub fn len(&self) -> usize {
        self.inner.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.pairs.is_empty()
    }
}

/// Key-switch keys for substitutions `x -> x^g`, keyed by `g`.
#[derive(Clone)]
pub struct GaloisKeySet {
    pub(crate) ctx: Arc<FvContext>,
    pub(crate) key_id: KeyId,
    pub(crate) keys: BTreeMap<usize, KeySwitchKey>,
}

impl fmt::Debug for GaloisKeySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaloisKeySet")
            .field("key_id", &self.key_id)
            .field("exponents", &self.keys.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl PartialEq for GaloisKeySet {
    fn eq(&self, other: &Self) -> bool {
        self.key_id == other.key_id && self.keys == other.keys
    }
}

impl GaloisKeySet {
    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn context(&self) -> &Arc<FvContext> {
        &self.ctx
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn exponents(&self) -> impl Iterator<Item = usize> + '_ {
        self.keys.keys().copied()
    }

    pub fn get(&self, exponent: usize) -> Option<&KeySwitchKey> {
        self.keys.get(&exponent)
    }
}

fn noise_element<R: CryptoRng + ?Sized>(ctx: &FvContext, rng: &mut R) -> Result<RingElement> {
    let e: Vec<i128> = sample_noise(ctx.n(), ctx.params().noise(), rng)
        .into_iter()
        .map(i128::from)
        .collect();
    RingElement::from_signed(ctx.q_ring(), &e)
}

pub(crate) fn sample_error<R: CryptoRng + ?Sized>(
    ctx: &FvContext,
    rng: &mut R,
) -> Result<RingElement> {
    noise_element(ctx, rng)
}

/// Sample a binary secret key.
pub fn gen_secret_key<R: CryptoRng + ?Sized>(
    ctx: &Arc<FvContext>,
    rng: &mut R,
) -> Result<SecretKey> {
    let mut id = [0u8; 16];
    rng.fill(&mut id);
    let bits = sample_binary(ctx.n(), rng);
    SecretKey::from_bits(ctx, KeyId(id), bits)
}

pub fn gen_public_key<R: CryptoRng + ?Sized>(sk: &SecretKey, rng: &mut R) -> Result<PublicKey> {
    let ctx = &sk.ctx;
    let a = sample_uniform(ctx.q_ring(), rng);
    let e = noise_element(ctx, rng)?;
    let a_s = a.to_ntt()?.mul(&sk.s_ntt)?.to_coeff();
    let p0 = a_s.add(&e)?.neg();
    PublicKey::from_parts(ctx, sk.id, p0, a)
}

pub fn gen_evaluation_key<R: CryptoRng + ?Sized>(
    sk: &SecretKey,
    rng: &mut R,
) -> Result<EvaluationKey> {
    let s2 = sk.s_ntt.mul(&sk.s_ntt)?.to_coeff();
    Ok(EvaluationKey {
        ctx: sk.ctx.clone(),
        key_id: sk.id,
        inner: SwitchingPairs::generate(&s2, sk, rng)?,
    })
}

/// Switch key from `from`'s secret to `to`'s secret. Both secrets are needed,
/// so only a party holding both key pairs can produce it.
pub fn gen_key_switch_key<R: CryptoRng + ?Sized>(
    from: &SecretKey,
    to: &SecretKey,
    rng: &mut R,
) -> Result<KeySwitchKey> {
    if from.ctx.params_id() != to.ctx.params_id() {
        return Err(Error::ParameterMismatch(
            "switch key across parameter sets".into(),
        ));
    }
    Ok(KeySwitchKey {
        ctx: to.ctx.clone(),
        source_id: from.id,
        target_id: to.id,
        inner: SwitchingPairs::generate(&from.s, to, rng)?,
    })
}

fn galois_key<R: CryptoRng + ?Sized>(
    sk: &SecretKey,
    exponent: usize,
    rng: &mut R,
) -> Result<KeySwitchKey> {
    let rotated = sk.s.automorphism(exponent)?;
    Ok(KeySwitchKey {
        ctx: sk.ctx.clone(),
        source_id: sk.id,
        target_id: sk.id,
        inner: SwitchingPairs::generate(&rotated, sk, rng)?,
    })
}

/// Galois keys for each requested row-rotation step plus the row swap.
pub fn gen_galois_keys<R: CryptoRng + ?Sized>(
    sk: &SecretKey,
    steps: &[i64],
    rng: &mut R,
) -> Result<GaloisKeySet> {
    if steps.is_empty() {
        return Err(Error::InvalidParameter(
            "no rotation steps requested".into(),
        ));
    }
    let n = sk.ctx.n();
    let mut exponents: Vec<usize> = steps.iter().map(|&s| galois_exponent(s, n)).collect();
    exponents.push(row_swap_exponent(n));
    exponents.sort_unstable();
    exponents.dedup();
    let mut keys = BTreeMap::new();
    for g in exponents {
        if g == 1 {
            continue;
        }
        keys.insert(g, galois_key(sk, g, rng)?);
    }
    Ok(GaloisKeySet {
        ctx: sk.ctx.clone(),
        key_id: sk.id,
        keys,
    })
}
