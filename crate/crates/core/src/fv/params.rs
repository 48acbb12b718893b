use std::fmt;

use sha2::{Digest, Sha256};

use crate::ring::prime::{is_prime, largest_prime_congruent_one};
use crate::ring::{Modulus, NoiseDistribution};
use crate::{Error, Result};

/// Nominal security level of a parameter set. Descriptive only; no lattice
/// estimation is performed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SecurityLevel {
    Bits128,
    Bits192,
}

impl SecurityLevel {
    pub fn bits(self) -> u16 {
        match self {
            SecurityLevel::Bits128 => 128,
            SecurityLevel::Bits192 => 192,
        }
    }

    pub fn from_bits(bits: u16) -> Result<Self> {
        match bits {
            128 => Ok(SecurityLevel::Bits128),
            192 => Ok(SecurityLevel::Bits192),
            other => Err(Error::InvalidParameter(format!(
                "unknown security level {other}"
            ))),
        }
    }
}

pub const DEFAULT_PLAIN_MODULUS: u128 = 40961;
pub const SECOND_PLAIN_MODULUS: u128 = 65537;
pub const DEFAULT_DECOMPOSITION_BASE: u64 = 1 << 32;

/// Encryption parameters: ring degree, ciphertext modulus, plaintext moduli
/// (their product is the effective plaintext modulus), relinearization base
/// and noise distribution.
#[derive(Clone, PartialEq)]
pub struct EncryptionParams {
    n: usize,
    q: Modulus,
    plain_moduli: Vec<Modulus>,
    t: Modulus,
    w: u64,
    noise: NoiseDistribution,
    security: SecurityLevel,
}

impl fmt::Debug for EncryptionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EncryptionParams")
            .field("n", &self.n)
            .field("log2_q", &self.q.bit_length())
            .field("plain_moduli", &self.plain_moduli)
            .field("w", &self.w)
            .field("security", &self.security.bits())
            .finish()
    }
}

impl EncryptionParams {
    pub fn new(
        n: usize,
        q: u128,
        plain_moduli: &[u128],
        w: u64,
        noise: NoiseDistribution,
        security: SecurityLevel,
    ) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "ring degree {n} is not a power of two"
            )));
        }
        if plain_moduli.is_empty() {
            return Err(Error::InvalidParameter("no plaintext modulus".into()));
        }
        if w < 2 {
            return Err(Error::InvalidParameter(format!("decomposition base {w}")));
        }
        let q = Modulus::new(q)?;
        let mut t: u128 = 1;
        let mut plain = Vec::with_capacity(plain_moduli.len());
        for (i, &ti) in plain_moduli.iter().enumerate() {
            if plain_moduli[..i].contains(&ti) {
                return Err(Error::InvalidParameter(format!(
                    "plaintext modulus {ti} repeated"
                )));
            }
            if plain_moduli.len() > 1 && !is_prime(ti) {
                return Err(Error::InvalidParameter(format!(
                    "composite plaintext factor {ti} is not prime"
                )));
            }
            t = t.checked_mul(ti).ok_or_else(|| {
                Error::InvalidParameter("plaintext modulus product exceeds 128 bits".into())
            })?;
            plain.push(Modulus::new(ti)?);
        }
        let t = Modulus::new(t)?;
        if q.bit_length() < t.bit_length() + 20 {
            return Err(Error::InvalidParameter(format!(
                "ciphertext modulus of {} bits too small for {}-bit plaintext modulus",
                q.bit_length(),
                t.bit_length()
            )));
        }
        Ok(Self {
            n,
            q,
            plain_moduli: plain,
            t,
            w,
            noise,
            security,
        })
    }

    /// `q` = largest prime below `2^log_q` congruent to 1 mod `2n`.
    pub fn with_prime_q(
        n: usize,
        log_q: u32,
        plain_moduli: &[u128],
        security: SecurityLevel,
    ) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() || !(24..=128).contains(&log_q) {
            return Err(Error::InvalidParameter(format!(
                "unsupported (n={n}, log2 q={log_q})"
            )));
        }
        let q = largest_prime_congruent_one(log_q, 2 * n as u128).ok_or_else(|| {
            Error::InvalidParameter(format!("no prime below 2^{log_q} for n={n}"))
        })?;
        Self::new(
            n,
            q,
            plain_moduli,
            DEFAULT_DECOMPOSITION_BASE,
            NoiseDistribution::default(),
            security,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &Modulus {
        &self.q
    }

    pub fn plain_moduli(&self) -> &[Modulus] {
        &self.plain_moduli
    }

    /// Effective plaintext modulus (product of the plaintext moduli).
    pub fn t(&self) -> &Modulus {
        &self.t
    }

    pub fn w(&self) -> u64 {
        self.w
    }

    pub fn noise(&self) -> &NoiseDistribution {
        &self.noise
    }

    pub fn security(&self) -> SecurityLevel {
        self.security
    }

    /// Number of SIMD slots when batching is available.
    pub fn slot_count(&self) -> usize {
        self.n
    }

    /// Every plaintext modulus is a prime congruent to 1 mod `2n`.
    pub fn supports_batching(&self) -> bool {
        let two_n = 2 * self.n as u128;
        self.plain_moduli
            .iter()
            .all(|t| t.value() % two_n == 1 && is_prime(t.value()))
    }

    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"hematch-params-v1");
        h.update((self.n as u32).to_le_bytes());
        h.update(self.q.value().to_le_bytes());
        h.update([self.plain_moduli.len() as u8]);
        for t in &self.plain_moduli {
            h.update(t.value().to_le_bytes());
        }
        h.update(self.w.to_le_bytes());
        h.update(self.noise.sigma().to_bits().to_le_bytes());
        h.update(self.noise.truncation_bound().to_le_bytes());
        h.update(self.security.bits().to_le_bytes());
        h.finalize().into()
    }
}

/// A named parameter set from the benchmark table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Preset {
    pub security: SecurityLevel,
    /// Feature dimension this row is sized for.
    pub dim: usize,
    pub n: usize,
    pub log_q: u32,
    pub two_prime_plaintext: bool,
}

impl Preset {
    pub const fn new(security: SecurityLevel, dim: usize, n: usize, log_q: u32) -> Self {
        Self {
            security,
            dim,
            n,
            log_q,
            two_prime_plaintext: false,
        }
    }

    pub fn name(&self) -> String {
        format!(
            "l{}-n{}{}",
            self.security.bits(),
            self.n,
            if self.two_prime_plaintext { "-t2" } else { "" }
        )
    }

    /// Plaintext moduli: `[40961]`, or `[40961, 65537]` for the
    /// high-precision variant.
    pub fn plain_moduli(&self) -> Vec<u128> {
        if self.two_prime_plaintext {
            vec![DEFAULT_PLAIN_MODULUS, SECOND_PLAIN_MODULUS]
        } else {
            vec![DEFAULT_PLAIN_MODULUS]
        }
    }

    /// The high-precision variant. Its 31-bit plaintext modulus leaves no
    /// noise budget for a multiply and slot sum under the table's moduli, so
    /// the ciphertext modulus grows to `TWO_PRIME_LOG_Q` bits.
    pub fn two_prime(mut self) -> Self {
        self.two_prime_plaintext = true;
        self.log_q = self.log_q.max(TWO_PRIME_LOG_Q);
        self
    }

    pub fn params(&self) -> Result<EncryptionParams> {
        EncryptionParams::with_prime_q(self.n, self.log_q, &self.plain_moduli(), self.security)
    }

    /// Look up `l128-n1024`, `l192-n4096-t2`, ...
    pub fn by_name(name: &str) -> Option<Preset> {
        let (base, two) = match name.strip_suffix("-t2") {
            Some(b) => (b, true),
            None => (name, false),
        };
        let p = TABLE_PRESETS.iter().find(|p| p.name() == base)?;
        Some(if two { p.two_prime() } else { *p })
    }
}

/// Ciphertext modulus size for the two-prime plaintext variants.
pub const TWO_PRIME_LOG_Q: u32 = 126;

/// Rows of the timing table: (security, d, n, log2 q), t = 40961.
pub const TABLE_PRESETS: [Preset; 10] = [
    Preset::new(SecurityLevel::Bits128, 64, 128, 110),
    Preset::new(SecurityLevel::Bits128, 128, 256, 110),
    Preset::new(SecurityLevel::Bits128, 512, 1024, 110),
    Preset::new(SecurityLevel::Bits128, 1024, 2048, 110),
    Preset::new(SecurityLevel::Bits128, 1024, 4096, 110),
    Preset::new(SecurityLevel::Bits192, 64, 128, 77),
    Preset::new(SecurityLevel::Bits192, 128, 256, 77),
    Preset::new(SecurityLevel::Bits192, 512, 1024, 77),
    Preset::new(SecurityLevel::Bits192, 1024, 2048, 77),
    Preset::new(SecurityLevel::Bits192, 1024, 4096, 77),
];
