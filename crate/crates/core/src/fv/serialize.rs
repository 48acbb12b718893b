//! Binary encoding of parameters, keys, plaintexts and ciphertexts.
//!
//! Every object starts with the same header:
//!
//! ```text
//! "HEFM" | version u8 | tag u8 | params digest [32]
//! n u32 | q length u16, q bytes | plain count u8, each u64 | w u64
//! ```
//!
//! followed by a tag-specific body. Integers are little-endian; ring
//! coefficients use a fixed width of `ceil(bits(q) / 8)` bytes (`bits(t)` for
//! plaintexts).

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::cipher::{Ciphertext, Plaintext};
use super::context::FvContext;
use super::keys::{
    EvaluationKey, GaloisKeySet, KeyId, KeySwitchKey, PublicKey, SecretKey, SwitchingPairs,
};
use super::params::{EncryptionParams, SecurityLevel};
use crate::ring::{NoiseDistribution, RingContext, RingElement};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"HEFM";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ObjectTag {
    Params = 1,
    PublicKey = 2,
    SecretKey = 3,
    EvaluationKey = 4,
    GaloisKeys = 5,
    Ciphertext = 6,
    Plaintext = 7,
    KeySwitchKey = 8,
}

impl ObjectTag {
    pub fn from_u8(b: u8) -> Result<Self> {
        Ok(match b {
            1 => Self::Params,
            2 => Self::PublicKey,
            3 => Self::SecretKey,
            4 => Self::EvaluationKey,
            5 => Self::GaloisKeys,
            6 => Self::Ciphertext,
            7 => Self::Plaintext,
            8 => Self::KeySwitchKey,
            _ => return Err(Error::Decode(format!("unknown object tag {b}"))),
        })
    }
}

/// Decoded common header.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub tag: ObjectTag,
    pub digest: [u8; 32],
    pub n: u32,
    pub q: u128,
    pub plain_moduli: Vec<u64>,
    pub w: u64,
}

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub(crate) fn new() -> Self {
        Self { buf: Vec::new() }
    }

    pub(crate) fn with_header(params: &EncryptionParams, digest: [u8; 32], tag: ObjectTag) -> Self {
        let mut w = Self::new();
        w.bytes(&MAGIC);
        w.u8(FORMAT_VERSION);
        w.u8(tag as u8);
        w.bytes(&digest);
        w.u32(params.n() as u32);
        let q = params.q();
        let qb = q.value().to_le_bytes();
        let len = q.byte_width();
        w.u16(len as u16);
        w.bytes(&qb[..len]);
        w.u8(params.plain_moduli().len() as u8);
        for t in params.plain_moduli() {
            w.u64(t.value() as u64);
        }
        w.u64(params.w());
        w
    }

    pub(crate) fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub(crate) fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub(crate) fn poly(&mut self, p: &RingElement) {
        let width = p.modulus().byte_width();
        self.buf.reserve(width * p.n());
        for &c in p.coeffs() {
            self.buf.extend_from_slice(&c.to_le_bytes()[..width]);
        }
    }

    pub(crate) fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.buf.len() < len {
            return Err(Error::Decode(format!(
                "truncated: wanted {len} bytes, {} left",
                self.buf.len()
            )));
        }
        let (head, rest) = self.buf.split_at(len);
        self.buf = rest;
        Ok(head)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn key_id(&mut self) -> Result<KeyId> {
        Ok(KeyId(self.take(16)?.try_into().unwrap()))
    }

    pub(crate) fn poly(&mut self, ring: &Arc<RingContext>) -> Result<RingElement> {
        let width = ring.modulus().byte_width();
        let raw = self.take(width * ring.n())?;
        let coeffs = raw
            .chunks_exact(width)
            .map(|chunk| {
                let mut b = [0u8; 16];
                b[..width].copy_from_slice(chunk);
                u128::from_le_bytes(b)
            })
            .collect();
        RingElement::from_coeffs(ring, coeffs)
            .map_err(|_| Error::Decode("coefficient not reduced".into()))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Decode(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

type Observer = Arc<dyn Fn(ObjectTag) + Send + Sync>;

thread_local! {
    static OBSERVER: RefCell<Option<Observer>> = const { RefCell::new(None) };
}

/// Run `f` with `observer` called on the tag of every object header parsed on
/// this thread.
pub fn with_decode_observer<T>(observer: Observer, f: impl FnOnce() -> T) -> T {
    struct Restore(Option<Observer>);
    impl Drop for Restore {
        fn drop(&mut self) {
            let prev = self.0.take();
            OBSERVER.with(|o| *o.borrow_mut() = prev);
        }
    }
    let prev = OBSERVER.with(|o| o.borrow_mut().replace(observer));
    let _restore = Restore(prev);
    f()
}

fn notify(tag: ObjectTag) {
    OBSERVER.with(|o| {
        if let Some(obs) = o.borrow().as_ref() {
            obs(tag);
        }
    });
}

fn read_header_from(r: &mut Reader<'_>) -> Result<Header> {
    if r.take(4)? != MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::Decode(format!(
            "unsupported format version {version}"
        )));
    }
    let tag = ObjectTag::from_u8(r.u8()?)?;
    notify(tag);
    let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    let n = r.u32()?;
    let qlen = r.u16()? as usize;
    if qlen == 0 || qlen > 16 {
        return Err(Error::Decode(format!("modulus length {qlen}")));
    }
    let mut qb = [0u8; 16];
    qb[..qlen].copy_from_slice(r.take(qlen)?);
    let q = u128::from_le_bytes(qb);
    let count = r.u8()? as usize;
    let plain_moduli = (0..count).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    let w = r.u64()?;
    Ok(Header {
        tag,
        digest,
        n,
        q,
        plain_moduli,
        w,
    })
}

/// Parse the common header and return it with the remaining body.
pub fn read_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    let mut r = Reader::new(bytes);
    let h = read_header_from(&mut r)?;
    Ok((h, r.buf))
}

/// Reader positioned after a header that was checked against `ctx`.
fn open<'a>(bytes: &'a [u8], ctx: &FvContext, tag: ObjectTag) -> Result<Reader<'a>> {
    let mut r = Reader::new(bytes);
    let h = read_header_from(&mut r)?;
    if h.tag != tag {
        return Err(Error::Decode(format!(
            "expected {tag:?}, found {:?}",
            h.tag
        )));
    }
    let p = ctx.params();
    let moduli_match = h.plain_moduli.len() == p.plain_moduli().len()
        && h.plain_moduli
            .iter()
            .zip(p.plain_moduli())
            .all(|(&a, b)| a as u128 == b.value());
    if h.digest != ctx.params_id()
        || h.n as usize != p.n()
        || h.q != p.q().value()
        || h.w != p.w()
        || !moduli_match
    {
        return Err(Error::ParameterMismatch(
            "object encoded under different parameters".into(),
        ));
    }
    Ok(r)
}

fn write_pairs(w: &mut Writer, pairs: &[(RingElement, RingElement)]) {
    w.u16(pairs.len() as u16);
    for (k0, k1) in pairs {
        w.poly(k0);
        w.poly(k1);
    }
}

fn read_pairs(r: &mut Reader<'_>, ctx: &FvContext) -> Result<SwitchingPairs> {
    let count = r.u16()? as usize;
    if count != ctx.decomposition_len() {
        return Err(Error::Decode(format!(
            "expected {} switching pairs, found {count}",
            ctx.decomposition_len()
        )));
    }
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let k0 = r.poly(ctx.q_ring())?;
        let k1 = r.poly(ctx.q_ring())?;
        pairs.push((k0, k1));
    }
    SwitchingPairs::from_pairs(pairs, ctx.params().w() as u128)
}

impl EncryptionParams {
    /// Header plus noise parameters and security label.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(self, self.digest(), ObjectTag::Params);
        w.u64(self.noise().sigma().to_bits());
        w.u32(self.noise().truncation_bound());
        w.u16(self.security().bits());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let h = read_header_from(&mut r)?;
        if h.tag != ObjectTag::Params {
            return Err(Error::Decode(format!("expected Params, found {:?}", h.tag)));
        }
        let sigma = f64::from_bits(r.u64()?);
        let bound = r.u32()?;
        let security = SecurityLevel::from_bits(r.u16()?)?;
        r.finish()?;
        let plain: Vec<u128> = h.plain_moduli.iter().map(|&t| t as u128).collect();
        let noise = NoiseDistribution::new(sigma, bound)?;
        let params = Self::new(h.n as usize, h.q, &plain, h.w, noise, security)?;
        if params.digest() != h.digest {
            return Err(Error::Integrity("parameter digest does not match".into()));
        }
        Ok(params)
    }
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(
            self.ctx.params(),
            self.ctx.params_id(),
            ObjectTag::PublicKey,
        );
        w.bytes(&self.id.0);
        w.poly(&self.p0);
        w.poly(&self.p1);
        w.finish()
    }

    pub fn from_bytes(ctx: &Arc<FvContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, ctx, ObjectTag::PublicKey)?;
        let id = r.key_id()?;
        let p0 = r.poly(ctx.q_ring())?;
        let p1 = r.poly(ctx.q_ring())?;
        r.finish()?;
        Self::from_parts(ctx, id, p0, p1)
    }
}

/// The only way to serialize a secret key. Never sent over the wire.
pub fn export_secret_key(sk: &SecretKey) -> Vec<u8> {
    let mut w = Writer::with_header(sk.ctx.params(), sk.ctx.params_id(), ObjectTag::SecretKey);
    w.bytes(&sk.id.0);
    let mut packed = vec![0u8; sk.bits.len().div_ceil(8)];
    for (i, &b) in sk.bits.iter().enumerate() {
        packed[i / 8] |= b << (i % 8);
    }
    w.bytes(&packed);
    w.finish()
}

pub fn import_secret_key(ctx: &Arc<FvContext>, bytes: &[u8]) -> Result<SecretKey> {
    let mut r = open(bytes, ctx, ObjectTag::SecretKey)?;
    let id = r.key_id()?;
    let packed = r.take(ctx.n().div_ceil(8))?;
    r.finish()?;
    let bits = (0..ctx.n())
        .map(|i| (packed[i / 8] >> (i % 8)) & 1)
        .collect();
    SecretKey::from_bits(ctx, id, bits)
}

impl EvaluationKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(
            self.ctx.params(),
            self.ctx.params_id(),
            ObjectTag::EvaluationKey,
        );
        w.bytes(&self.key_id.0);
        write_pairs(&mut w, &self.inner.pairs);
        w.finish()
    }

    pub fn from_bytes(ctx: &Arc<FvContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, ctx, ObjectTag::EvaluationKey)?;
        let key_id = r.key_id()?;
        let inner = read_pairs(&mut r, ctx)?;
        r.finish()?;
        Ok(Self {
            ctx: ctx.clone(),
            key_id,
            inner,
        })
    }
}

impl KeySwitchKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(
            self.ctx.params(),
            self.ctx.params_id(),
            ObjectTag::KeySwitchKey,
        );
        w.bytes(&self.source_id.0);
        w.bytes(&self.target_id.0);
        write_pairs(&mut w, &self.inner.pairs);
        w.finish()
    }

    pub fn from_bytes(ctx: &Arc<FvContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, ctx, ObjectTag::KeySwitchKey)?;
        let source_id = r.key_id()?;
        let target_id = r.key_id()?;
        let inner = read_pairs(&mut r, ctx)?;
        r.finish()?;
        Ok(Self {
            ctx: ctx.clone(),
            source_id,
            target_id,
            inner,
        })
    }
}

impl GaloisKeySet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(
            self.ctx.params(),
            self.ctx.params_id(),
            ObjectTag::GaloisKeys,
        );
        w.bytes(&self.key_id.0);
        w.u16(self.keys.len() as u16);
        for (&g, key) in &self.keys {
            w.u32(g as u32);
            write_pairs(&mut w, &key.inner.pairs);
        }
        w.finish()
    }

    pub fn from_bytes(ctx: &Arc<FvContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, ctx, ObjectTag::GaloisKeys)?;
        let key_id = r.key_id()?;
        let count = r.u16()? as usize;
        let two_n = 2 * ctx.n();
        let mut keys = BTreeMap::new();
        for _ in 0..count {
            let g = r.u32()? as usize;
            if g.is_multiple_of(2) || g >= two_n || g == 1 {
                return Err(Error::Decode(format!("invalid galois exponent {g}")));
            }
            let inner = read_pairs(&mut r, ctx)?;
            let key = KeySwitchKey {
                ctx: ctx.clone(),
                source_id: key_id,
                target_id: key_id,
                inner,
            };
            if keys.insert(g, key).is_some() {
                return Err(Error::Decode(format!("duplicate galois exponent {g}")));
            }
        }
        r.finish()?;
        Ok(Self {
            ctx: ctx.clone(),
            key_id,
            keys,
        })
    }
}

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(
            self.ctx.params(),
            self.ctx.params_id(),
            ObjectTag::Ciphertext,
        );
        w.bytes(&self.key_id.0);
        w.poly(&self.parts[0]);
        w.poly(&self.parts[1]);
        w.finish()
    }

    pub fn from_bytes(ctx: &Arc<FvContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, ctx, ObjectTag::Ciphertext)?;
        let key_id = r.key_id()?;
        let c0 = r.poly(ctx.q_ring())?;
        let c1 = r.poly(ctx.q_ring())?;
        r.finish()?;
        Ok(Self::from_parts(ctx, key_id, c0, c1))
    }

    /// Encoded size without building the buffer.
    pub fn encoded_len(&self) -> usize {
        let p = self.ctx.params();
        4 + 1
            + 1
            + 32
            + 4
            + 2
            + p.q().byte_width()
            + 1
            + 8 * p.plain_moduli().len()
            + 8
            + 16
            + 2 * p.n() * p.q().byte_width()
    }
}

impl Plaintext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(
            self.ctx.params(),
            self.ctx.params_id(),
            ObjectTag::Plaintext,
        );
        w.poly(&self.poly);
        w.finish()
    }

    pub fn from_bytes(ctx: &Arc<FvContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, ctx, ObjectTag::Plaintext)?;
        let poly = r.poly(ctx.t_ring())?;
        r.finish()?;
        Plaintext::from_poly(ctx, poly)
    }
}
