use std::sync::Arc;

use rand::CryptoRng;

use crate::fv::{
    gen_evaluation_key, gen_galois_keys, gen_public_key, gen_secret_key, power_of_two_steps,
    EvaluationKey, FvContext, GaloisKeySet, KeyId, PublicKey, SecretKey,
};
use crate::fv::{Reader, Writer};
use crate::{Error, Result};

const BUNDLE_MAGIC: [u8; 4] = *b"HEFB";

/// Everything a server needs to evaluate on one client's ciphertexts: the
/// public key, the relinearization key and (for batching) the rotation keys.
#[derive(Clone, Debug, PartialEq)]
pub struct PublicBundle {
    pub pk: PublicKey,
    pub ek: EvaluationKey,
    pub gks: Option<GaloisKeySet>,
}

impl PublicBundle {
    pub fn key_id(&self) -> KeyId {
        self.pk.id()
    }

    /// `"HEFB" | pk blob | ek blob | galois blob (empty when absent)`, each
    /// prefixed by a u32 length.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&BUNDLE_MAGIC);
        for blob in [
            self.pk.to_bytes(),
            self.ek.to_bytes(),
            self.gks
                .as_ref()
                .map(GaloisKeySet::to_bytes)
                .unwrap_or_default(),
        ] {
            w.u32(blob.len() as u32);
            w.bytes(&blob);
        }
        w.finish()
    }

    pub fn from_bytes(ctx: &Arc<FvContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != BUNDLE_MAGIC {
            return Err(Error::Decode("bad key bundle magic".into()));
        }
        let mut blob = || -> Result<&[u8]> {
            let len = r.u32()? as usize;
            r.take(len)
        };
        let pk = PublicKey::from_bytes(ctx, blob()?)?;
        let ek = EvaluationKey::from_bytes(ctx, blob()?)?;
        let g = blob()?;
        let gks = if g.is_empty() {
            None
        } else {
            Some(GaloisKeySet::from_bytes(ctx, g)?)
        };
        r.finish()?;
        let id = pk.id();
        if ek.key_id() != id || gks.as_ref().is_some_and(|g| g.key_id() != id) {
            return Err(Error::KeyMismatch("bundle mixes key pairs".into()));
        }
        Ok(Self { pk, ek, gks })
    }
}

/// A client's complete key material. The secret key never leaves this type
/// except through an explicit export.
#[derive(Clone, Debug)]
pub struct ClientKeys {
    sk: SecretKey,
    bundle: PublicBundle,
}

impl ClientKeys {
    /// Fresh keys; rotation keys are included whenever the parameters batch.
    pub fn generate<R: CryptoRng + ?Sized>(ctx: &Arc<FvContext>, rng: &mut R) -> Result<Self> {
        let sk = gen_secret_key(ctx, rng)?;
        let pk = gen_public_key(&sk, rng)?;
        let ek = gen_evaluation_key(&sk, rng)?;
        let gks = if ctx.supports_batching() {
            Some(gen_galois_keys(&sk, &power_of_two_steps(ctx.n()), rng)?)
        } else {
            None
        };
        Ok(Self {
            sk,
            bundle: PublicBundle { pk, ek, gks },
        })
    }

    pub fn from_parts(sk: SecretKey, bundle: PublicBundle) -> Result<Self> {
        if sk.id() != bundle.key_id() {
            return Err(Error::KeyMismatch(
                "secret key does not match bundle".into(),
            ));
        }
        Ok(Self { sk, bundle })
    }

    pub fn context(&self) -> &Arc<FvContext> {
        self.sk.context()
    }

    pub fn key_id(&self) -> KeyId {
        self.sk.id()
    }

    pub fn secret_key(&self) -> &SecretKey {
        &self.sk
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.bundle.pk
    }

    pub fn bundle(&self) -> &PublicBundle {
        &self.bundle
    }
}
