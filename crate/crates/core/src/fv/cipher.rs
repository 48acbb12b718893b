use std::fmt;
use std::sync::Arc;

use rand::CryptoRng;

use super::context::FvContext;
use super::keys::{sample_error, EvaluationKey, KeyId, KeySwitchKey, PublicKey, SecretKey};
use crate::ring::wide::{div_rem_wide, mul_wide};
use crate::ring::{sample_binary, RingElement};
use crate::{Error, Result};

/// Element of `R_t`, `t` being the product of all plaintext moduli.
#[derive(Clone, PartialEq, Eq)]
pub struct Plaintext {
    pub(crate) ctx: Arc<FvContext>,
    pub(crate) poly: RingElement,
}

impl fmt::Debug for Plaintext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Plaintext")
            .field(&self.poly.coeffs())
            .finish()
    }
}

impl Plaintext {
    /// Coefficients must already lie in `[0, t)`.
    pub fn new(ctx: &Arc<FvContext>, coeffs: Vec<u128>) -> Result<Self> {
        if coeffs.len() != ctx.n() {
            return Err(Error::Domain(format!(
                "plaintext needs {} coefficients, got {}",
                ctx.n(),
                coeffs.len()
            )));
        }
        let poly = RingElement::from_coeffs(ctx.t_ring(), coeffs)?;
        Ok(Self {
            ctx: ctx.clone(),
            poly,
        })
    }

    /// Signed coefficients reduced into `[0, t)`.
    pub fn from_signed(ctx: &Arc<FvContext>, values: &[i128]) -> Result<Self> {
        if values.len() > ctx.n() {
            return Err(Error::Capacity(format!(
                "{} coefficients exceed ring degree {}",
                values.len(),
                ctx.n()
            )));
        }
        let mut padded = values.to_vec();
        padded.resize(ctx.n(), 0);
        let poly = RingElement::from_signed(ctx.t_ring(), &padded)?;
        Ok(Self {
            ctx: ctx.clone(),
            poly,
        })
    }

    pub fn from_poly(ctx: &Arc<FvContext>, poly: RingElement) -> Result<Self> {
        if !Arc::ptr_eq(poly.context(), ctx.t_ring()) && **poly.context() != **ctx.t_ring() {
            return Err(Error::ParameterMismatch("plaintext ring".into()));
        }
        Ok(Self {
            ctx: ctx.clone(),
            poly,
        })
    }

    pub fn constant(ctx: &Arc<FvContext>, c: u128) -> Result<Self> {
        let mut coeffs = vec![0u128; ctx.n()];
        coeffs[0] = c;
        Self::new(ctx, coeffs)
    }

    pub fn zero(ctx: &Arc<FvContext>) -> Self {
        Self {
            ctx: ctx.clone(),
            poly: RingElement::zero(ctx.t_ring()),
        }
    }

    pub fn context(&self) -> &Arc<FvContext> {
        &self.ctx
    }

    pub fn poly(&self) -> &RingElement {
        &self.poly
    }

    pub fn coeffs(&self) -> &[u128] {
        self.poly.coeffs()
    }

    /// Coefficients in `[-t/2, t/2)`.
    pub fn centered(&self) -> Vec<i128> {
        self.poly.centered()
    }

    /// The polynomial reduced modulo each plaintext prime.
    pub fn residues(&self) -> Vec<RingElement> {
        self.ctx
            .slot_rings()
            .iter()
            .map(|ring| {
                let m = ring.modulus();
                let coeffs = self.poly.coeffs().iter().map(|&c| m.reduce(c)).collect();
                RingElement::from_raw(ring, coeffs)
            })
            .collect()
    }
}

/// Two-part FV ciphertext.
#[derive(Clone)]
pub struct Ciphertext {
    pub(crate) ctx: Arc<FvContext>,
    pub(crate) key_id: KeyId,
    pub(crate) parts: [RingElement; 2],
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext(key {}, n {})", self.key_id, self.ctx.n())
    }
}

impl PartialEq for Ciphertext {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.params_id() == other.ctx.params_id()
            && self.key_id == other.key_id
            && self.parts == other.parts
    }
}

impl Eq for Ciphertext {}

impl Ciphertext {
    pub(crate) fn from_parts(
        ctx: &Arc<FvContext>,
        key_id: KeyId,
        c0: RingElement,
        c1: RingElement,
    ) -> Self {
        Self {
            ctx: ctx.clone(),
            key_id,
            parts: [c0, c1],
        }
    }

    pub fn context(&self) -> &Arc<FvContext> {
        &self.ctx
    }

    pub fn params_id(&self) -> [u8; 32] {
        self.ctx.params_id()
    }

    pub fn key_id(&self) -> KeyId {
        self.key_id
    }

    pub fn parts(&self) -> &[RingElement; 2] {
        &self.parts
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.params_id() != other.params_id() {
            return Err(Error::ParameterMismatch(
                "ciphertexts from different parameter sets".into(),
            ));
        }
        if self.key_id != other.key_id {
            return Err(Error::KeyMismatch(format!(
                "ciphertexts under keys {} and {}",
                self.key_id, other.key_id
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        hom_add(self, other)
    }
}

/// Encrypt with fresh `u` in `R_2` and noise `e1`, `e2`:
/// `(Δ·m + p0·u + e1, p1·u + e2)`.
pub fn encrypt<R: CryptoRng + ?Sized>(
    pt: &Plaintext,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<Ciphertext> {
    let ctx = &pk.ctx;
    if pt.ctx.params_id() != ctx.params_id() {
        return Err(Error::ParameterMismatch("plaintext vs public key".into()));
    }
    let q = ctx.q_ring();
    let qm = *q.modulus();
    let u: Vec<i128> = sample_binary(ctx.n(), rng)
        .into_iter()
        .map(i128::from)
        .collect();
    let u = RingElement::from_signed(q, &u)?.to_ntt()?;
    let e1 = sample_error(ctx, rng)?;
    let e2 = sample_error(ctx, rng)?;
    let delta = qm.reduce(ctx.delta());
    let scaled: Vec<u128> = pt.coeffs().iter().map(|&m| qm.mul(delta, m)).collect();
    let scaled = RingElement::from_raw(q, scaled);
    let c0 = pk.p0_ntt.mul(&u)?.to_coeff().add(&e1)?.add(&scaled)?;
    let c1 = pk.p1_ntt.mul(&u)?.to_coeff().add(&e2)?;
    Ok(Ciphertext::from_parts(ctx, pk.id, c0, c1))
}

fn check_key(ct: &Ciphertext, sk: &SecretKey) -> Result<()> {
    if ct.params_id() != sk.ctx.params_id() {
        return Err(Error::ParameterMismatch("ciphertext vs secret key".into()));
    }
    if ct.key_id != sk.id {
        return Err(Error::KeyMismatch(format!(
            "ciphertext under {} but secret key {}",
            ct.key_id, sk.id
        )));
    }
    Ok(())
}

/// `c0 + c1·s mod q`.
fn phase(ct: &Ciphertext, sk: &SecretKey) -> Result<RingElement> {
    let c1s = ct.parts[1].to_ntt()?.mul(&sk.s_ntt)?.to_coeff();
    ct.parts[0].add(&c1s)
}

/// `[round(t/q · [c0 + c1·s]_q)]_t`.
pub fn decrypt(ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext> {
    check_key(ct, sk)?;
    let v = phase(ct, sk)?;
    let q = ct.ctx.params().q().value();
    let t = ct.ctx.params().t().value();
    let coeffs = v
        .coeffs()
        .iter()
        .map(|&x| {
            // v < q, so t·v / q < t and the quotient fits.
            let (lo, hi) = mul_wide(t, x);
            let (quot, rem) = if hi == 0 {
                (lo / q, lo % q)
            } else {
                div_rem_wide(lo, hi, q)
            };
            let rounded = if rem >= q - rem { quot + 1 } else { quot };
            rounded % t
        })
        .collect();
    Plaintext::new(&ct.ctx, coeffs)
}

/// Remaining bits of headroom before decryption fails:
/// `floor(log2(q/2) - log2 ||[t·(c0 + c1·s)]_q||_inf)`, clamped at zero.
pub fn noise_budget(ct: &Ciphertext, sk: &SecretKey) -> Result<u32> {
    check_key(ct, sk)?;
    let v = phase(ct, sk)?;
    let qm = *ct.ctx.params().q();
    let t = qm.reduce(ct.ctx.params().t().value());
    let worst = v
        .coeffs()
        .iter()
        .map(|&x| qm.center(qm.mul(t, x)).unsigned_abs())
        .max()
        .unwrap_or(0);
    let half_q = (qm.value() as f64 / 2.0).log2();
    if worst == 0 {
        return Ok(half_q.floor() as u32);
    }
    let budget = half_q - (worst as f64).log2();
    Ok(budget.floor().max(0.0) as u32)
}

pub fn hom_add(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    a.check_compatible(b)?;
    Ok(Ciphertext::from_parts(
        &a.ctx,
        a.key_id,
        a.parts[0].add(&b.parts[0])?,
        a.parts[1].add(&b.parts[1])?,
    ))
}

pub fn hom_sub(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    a.check_compatible(b)?;
    Ok(Ciphertext::from_parts(
        &a.ctx,
        a.key_id,
        a.parts[0].sub(&b.parts[0])?,
        a.parts[1].sub(&b.parts[1])?,
    ))
}

/// Tensor, rescale by `t/q`, and relinearize back to two parts.
pub fn hom_multiply(a: &Ciphertext, b: &Ciphertext, ek: &EvaluationKey) -> Result<Ciphertext> {
    a.check_compatible(b)?;
    if ek.key_id != a.key_id || ek.ctx.params_id() != a.params_id() {
        return Err(Error::KeyMismatch(format!(
            "evaluation key {} does not match ciphertext key {}",
            ek.key_id, a.key_id
        )));
    }
    let ctx = &a.ctx;
    let [c0, c1, c2] = ctx.tensor.scaled_tensor(
        (&a.parts[0], &a.parts[1]),
        (&b.parts[0], &b.parts[1]),
        ctx.params().t().value(),
    )?;
    let (r0, r1) = ek.inner.apply(&c2)?;
    Ok(Ciphertext::from_parts(
        ctx,
        a.key_id,
        c0.add(&r0)?,
        c1.add(&r1)?,
    ))
}

/// Re-encrypt under the switch key's target secret.
pub fn key_switch(ct: &Ciphertext, ksk: &KeySwitchKey) -> Result<Ciphertext> {
    if ct.params_id() != ksk.ctx.params_id() {
        return Err(Error::ParameterMismatch("key switch key".into()));
    }
    if ct.key_id != ksk.source_id {
        return Err(Error::KeyMismatch(format!(
            "ciphertext under {} but switch key from {}",
            ct.key_id, ksk.source_id
        )));
    }
    let (r0, r1) = ksk.inner.apply(&ct.parts[1])?;
    Ok(Ciphertext::from_parts(
        &ct.ctx,
        ksk.target_id,
        ct.parts[0].add(&r0)?,
        r1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv::{
        gen_evaluation_key, gen_key_switch_key, gen_public_key, gen_secret_key, EncryptionParams,
        SecurityLevel,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    struct Setup {
        ctx: Arc<FvContext>,
        sk: SecretKey,
        pk: PublicKey,
        ek: EvaluationKey,
        rng: ChaCha20Rng,
    }

    fn setup(n: usize, log_q: u32, seed: u64) -> Setup {
        let params =
            EncryptionParams::with_prime_q(n, log_q, &[40961], SecurityLevel::Bits128).unwrap();
        let ctx = FvContext::new(params).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let sk = gen_secret_key(&ctx, &mut rng).unwrap();
        let pk = gen_public_key(&sk, &mut rng).unwrap();
        let ek = gen_evaluation_key(&sk, &mut rng).unwrap();
        Setup {
            ctx,
            sk,
            pk,
            ek,
            rng,
        }
    }

    fn random_pt(ctx: &Arc<FvContext>, rng: &mut ChaCha20Rng) -> Plaintext {
        let t = ctx.params().t().value();
        let coeffs = (0..ctx.n()).map(|_| rng.random_range(0..t)).collect();
        Plaintext::new(ctx, coeffs).unwrap()
    }

    #[test]
    fn small_integers() {
        let mut s = setup(64, 110, 1);
        let enc = |s: &mut Setup, v| {
            encrypt(&Plaintext::constant(&s.ctx, v).unwrap(), &s.pk, &mut s.rng).unwrap()
        };
        let (c2, c3, c4) = (enc(&mut s, 2), enc(&mut s, 3), enc(&mut s, 4));
        let prod = hom_multiply(&c2, &c3, &s.ek).unwrap();
        assert_eq!(decrypt(&prod, &s.sk).unwrap().coeffs()[0], 6);
        let sum = hom_add(&c3, &c4).unwrap();
        assert_eq!(decrypt(&sum, &s.sk).unwrap().coeffs()[0], 7);
        let zero = enc(&mut s, 0);
        assert_eq!(decrypt(&zero, &s.sk).unwrap(), Plaintext::zero(&s.ctx));
        assert_ne!(enc(&mut s, 5), enc(&mut s, 5));
    }

    #[test]
    fn public_key_unwinds_to_noise() {
        let s = setup(128, 110, 2);
        let (p0, p1) = s.pk.parts();
        let e = p0.add(&p1.mul(&s.sk.s).unwrap()).unwrap();
        let bound = s.ctx.params().noise().truncation_bound() as i128;
        assert!(e.centered().iter().all(|c| c.abs() <= bound));
    }

    #[test]
    fn multiply_matches_ring_product() {
        let mut s = setup(128, 110, 3);
        for _ in 0..5 {
            let a = random_pt(&s.ctx, &mut s.rng);
            let b = random_pt(&s.ctx, &mut s.rng);
            let ca = encrypt(&a, &s.pk, &mut s.rng).unwrap();
            let cb = encrypt(&b, &s.pk, &mut s.rng).unwrap();
            let prod = hom_multiply(&ca, &cb, &s.ek).unwrap();
            let expect = a.poly().mul_schoolbook(b.poly()).unwrap();
            assert_eq!(decrypt(&prod, &s.sk).unwrap().poly(), &expect);
            // ab + c
            let c = random_pt(&s.ctx, &mut s.rng);
            let cc = encrypt(&c, &s.pk, &mut s.rng).unwrap();
            let got = decrypt(&hom_add(&prod, &cc).unwrap(), &s.sk).unwrap();
            assert_eq!(got.poly(), &expect.add(c.poly()).unwrap());
        }
    }

    #[test]
    fn budget_positive_and_decreasing() {
        let mut s = setup(1024, 110, 4);
        let pt = random_pt(&s.ctx, &mut s.rng);
        let ct = encrypt(&pt, &s.pk, &mut s.rng).unwrap();
        let fresh = noise_budget(&ct, &s.sk).unwrap();
        assert!(fresh > 60, "fresh budget {fresh}");
        let prod = hom_multiply(&ct, &ct, &s.ek).unwrap();
        let after = noise_budget(&prod, &s.sk).unwrap();
        assert!(after < fresh && after >= 1, "{fresh} -> {after}");
    }

    #[test]
    fn key_switch_between_independent_keys() {
        let mut s = setup(256, 110, 5);
        let other = gen_secret_key(&s.ctx, &mut s.rng).unwrap();
        let ksk = gen_key_switch_key(&s.sk, &other, &mut s.rng).unwrap();
        let pt = random_pt(&s.ctx, &mut s.rng);
        let ct = encrypt(&pt, &s.pk, &mut s.rng).unwrap();
        let switched = key_switch(&ct, &ksk).unwrap();
        assert_eq!(switched.key_id(), other.id());
        assert_eq!(decrypt(&switched, &other).unwrap(), pt);
        assert!(matches!(
            decrypt(&switched, &s.sk),
            Err(Error::KeyMismatch(_))
        ));
        assert!(key_switch(&switched, &ksk).is_err());
        let same = gen_key_switch_key(&s.sk, &s.sk, &mut s.rng).unwrap();
        assert_eq!(
            decrypt(&key_switch(&ct, &same).unwrap(), &s.sk).unwrap(),
            pt
        );
    }

    #[test]
    fn mismatched_keys_rejected() {
        let mut s = setup(64, 110, 6);
        let sk2 = gen_secret_key(&s.ctx, &mut s.rng).unwrap();
        let pk2 = gen_public_key(&sk2, &mut s.rng).unwrap();
        let pt = Plaintext::constant(&s.ctx, 1).unwrap();
        let a = encrypt(&pt, &s.pk, &mut s.rng).unwrap();
        let b = encrypt(&pt, &pk2, &mut s.rng).unwrap();
        assert!(hom_add(&a, &b).is_err());
        assert!(hom_multiply(&b, &b, &s.ek).is_err());
    }

    #[test]
    fn out_of_range_plaintext_rejected() {
        let s = setup(64, 110, 7);
        let mut coeffs = vec![0u128; 64];
        coeffs[3] = 40961;
        assert!(matches!(
            Plaintext::new(&s.ctx, coeffs),
            Err(Error::Domain(_))
        ));
    }
}
