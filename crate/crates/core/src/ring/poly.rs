use std::fmt;
use std::sync::Arc;

use super::{Modulus, NttTables};
use crate::{Error, Result};

/// Shared description of the ring `Z_m[x]/(x^n + 1)`, with transform tables
/// when `m` is an NTT-friendly prime.
pub struct RingContext {
    n: usize,
    modulus: Modulus,
    ntt: Option<NttTables>,
}

impl fmt::Debug for RingContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingContext")
            .field("n", &self.n)
            .field("modulus", &self.modulus)
            .field("ntt", &self.ntt.is_some())
            .finish()
    }
}

impl RingContext {
    pub fn new(n: usize, modulus: Modulus) -> Result<Arc<Self>> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "ring degree must be a power of two >= 2, got {n}"
            )));
        }
        let ntt = NttTables::new(n, modulus);
        Ok(Arc::new(Self { n, modulus, ntt }))
    }

    /// Same ring but never uses the transform; multiplication is schoolbook.
    pub fn new_schoolbook(n: usize, modulus: Modulus) -> Result<Arc<Self>> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "ring degree must be a power of two >= 2, got {n}"
            )));
        }
        Ok(Arc::new(Self {
            n,
            modulus,
            ntt: None,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn ntt(&self) -> Option<&NttTables> {
        self.ntt.as_ref()
    }

    pub fn supports_ntt(&self) -> bool {
        self.ntt.is_some()
    }

    fn same_ring(&self, other: &RingContext) -> bool {
        self.n == other.n && self.modulus == other.modulus
    }
}

impl PartialEq for RingContext {
    fn eq(&self, other: &Self) -> bool {
        self.same_ring(other)
    }
}

impl Eq for RingContext {}

fn check_same(a: &Arc<RingContext>, b: &Arc<RingContext>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.same_ring(b) {
        Ok(())
    } else {
        Err(Error::ParameterMismatch(format!(
            "ring (n={}, m={}) vs (n={}, m={})",
            a.n, a.modulus, b.n, b.modulus
        )))
    }
}

/// Element of `Z_m[x]/(x^n + 1)` in coefficient form, canonical `[0, m)`.
#[derive(Clone)]
pub struct RingElement {
    ctx: Arc<RingContext>,
    coeffs: Vec<u128>,
}

impl PartialEq for RingElement {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.same_ring(&other.ctx) && self.coeffs == other.coeffs
    }
}

impl Eq for RingElement {}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown = self.coeffs.len().min(8);
        write!(
            f,
            "RingElement(n={}, m={}, {:?}{})",
            self.ctx.n,
            self.ctx.modulus,
            &self.coeffs[..shown],
            if shown < self.coeffs.len() {
                ", .."
            } else {
                ""
            }
        )
    }
}

impl RingElement {
    pub fn zero(ctx: &Arc<RingContext>) -> Self {
        Self {
            ctx: ctx.clone(),
            coeffs: vec![0; ctx.n],
        }
    }

    pub fn from_coeffs(ctx: &Arc<RingContext>, coeffs: Vec<u128>) -> Result<Self> {
        if coeffs.len() != ctx.n {
            return Err(Error::ParameterMismatch(format!(
                "expected {} coefficients, got {}",
                ctx.n,
                coeffs.len()
            )));
        }
        let m = ctx.modulus.value();
        if let Some(bad) = coeffs.iter().find(|&&c| c >= m) {
            return Err(Error::Domain(format!(
                "coefficient {bad} not reduced modulo {m}"
            )));
        }
        Ok(Self {
            ctx: ctx.clone(),
            coeffs,
        })
    }

    /// Lift signed coefficients into `[0, m)`. Shorter inputs are zero-padded.
    pub fn from_signed(ctx: &Arc<RingContext>, values: &[i128]) -> Result<Self> {
        if values.len() > ctx.n {
            return Err(Error::Capacity(format!(
                "{} coefficients exceed ring degree {}",
                values.len(),
                ctx.n
            )));
        }
        let mut coeffs = vec![0; ctx.n];
        for (c, &v) in coeffs.iter_mut().zip(values) {
            *c = ctx.modulus.reduce_i128(v);
        }
        Ok(Self {
            ctx: ctx.clone(),
            coeffs,
        })
    }

    pub fn constant(ctx: &Arc<RingContext>, c: u128) -> Self {
        let mut e = Self::zero(ctx);
        e.coeffs[0] = ctx.modulus.reduce(c);
        e
    }

    /// `c * x^k` for `k < n`.
    pub fn monomial(ctx: &Arc<RingContext>, k: usize, c: u128) -> Self {
        let mut e = Self::zero(ctx);
        e.coeffs[k] = ctx.modulus.reduce(c);
        e
    }

    pub(crate) fn from_raw(ctx: &Arc<RingContext>, coeffs: Vec<u128>) -> Self {
        debug_assert_eq!(coeffs.len(), ctx.n);
        Self {
            ctx: ctx.clone(),
            coeffs,
        }
    }

    pub fn context(&self) -> &Arc<RingContext> {
        &self.ctx
    }

    pub fn n(&self) -> usize {
        self.ctx.n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.ctx.modulus
    }

    pub fn coeffs(&self) -> &[u128] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u128> {
        self.coeffs
    }

    /// Coefficients in the symmetric interval `[-m/2, m/2)`.
    pub fn centered(&self) -> Vec<i128> {
        self.coeffs
            .iter()
            .map(|&c| self.ctx.modulus.center(c))
            .collect()
    }

    /// Largest absolute value of the centered coefficients.
    pub fn inf_norm(&self) -> u128 {
        self.coeffs
            .iter()
            .map(|&c| self.ctx.modulus.center(c).unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(&self.ctx, &other.ctx)?;
        let m = &self.ctx.modulus;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| m.add(a, b))
            .collect();
        Ok(Self::from_raw(&self.ctx, coeffs))
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        check_same(&self.ctx, &other.ctx)?;
        let m = self.ctx.modulus;
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = m.add(*a, b);
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same(&self.ctx, &other.ctx)?;
        let m = &self.ctx.modulus;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| m.sub(a, b))
            .collect();
        Ok(Self::from_raw(&self.ctx, coeffs))
    }

    pub fn neg(&self) -> Self {
        let m = &self.ctx.modulus;
        Self::from_raw(&self.ctx, self.coeffs.iter().map(|&a| m.neg(a)).collect())
    }

    pub fn scalar_mul(&self, c: u128) -> Self {
        let m = &self.ctx.modulus;
        let c = m.reduce(c);
        Self::from_raw(
            &self.ctx,
            self.coeffs.iter().map(|&a| m.mul(a, c)).collect(),
        )
    }

    /// Negacyclic product; uses the transform when available.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_same(&self.ctx, &other.ctx)?;
        if self.ctx.supports_ntt() {
            let a = self.to_ntt()?;
            let b = other.to_ntt()?;
            Ok(a.mul(&b)?.to_coeff())
        } else {
            self.mul_schoolbook(other)
        }
    }

    /// `O(n^2)` negacyclic convolution.
    pub fn mul_schoolbook(&self, other: &Self) -> Result<Self> {
        check_same(&self.ctx, &other.ctx)?;
        let n = self.ctx.n;
        let m = &self.ctx.modulus;
        let mut out = vec![0u128; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                let p = m.mul(a, b);
                let k = i + j;
                if k < n {
                    out[k] = m.add(out[k], p);
                } else {
                    out[k - n] = m.sub(out[k - n], p);
                }
            }
        }
        Ok(Self::from_raw(&self.ctx, out))
    }

    /// The substitution `x -> x^g` for odd `g`.
    pub fn automorphism(&self, g: usize) -> Result<Self> {
        let n = self.ctx.n;
        if g.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "automorphism exponent {g} must be odd"
            )));
        }
        let two_n = 2 * n;
        let m = &self.ctx.modulus;
        let mut out = vec![0u128; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            let k = (i * g) % two_n;
            if k < n {
                out[k] = c;
            } else {
                out[k - n] = m.neg(c);
            }
        }
        Ok(Self::from_raw(&self.ctx, out))
    }

    pub fn to_ntt(&self) -> Result<NttElement> {
        let tables = self.ctx.ntt.as_ref().ok_or_else(|| {
            Error::Unsupported(format!(
                "modulus {} is not NTT-friendly for n={}",
                self.ctx.modulus, self.ctx.n
            ))
        })?;
        let mut values = self.coeffs.clone();
        tables.forward(&mut values);
        Ok(NttElement {
            ctx: self.ctx.clone(),
            values,
        })
    }
}

/// Element in evaluation (transform) form.
#[derive(Clone, PartialEq, Eq)]
pub struct NttElement {
    ctx: Arc<RingContext>,
    values: Vec<u128>,
}

impl fmt::Debug for NttElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NttElement(n={}, m={})", self.ctx.n, self.ctx.modulus)
    }
}

impl NttElement {
    pub fn zero(ctx: &Arc<RingContext>) -> Self {
        Self {
            ctx: ctx.clone(),
            values: vec![0; ctx.n],
        }
    }

    pub fn values(&self) -> &[u128] {
        &self.values
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_same(&self.ctx, &other.ctx)?;
        let m = &self.ctx.modulus;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| m.mul(a, b))
            .collect();
        Ok(Self {
            ctx: self.ctx.clone(),
            values,
        })
    }

    /// `self += a * b`, pointwise.
    pub fn mul_acc(&mut self, a: &Self, b: &Self) -> Result<()> {
        check_same(&self.ctx, &a.ctx)?;
        check_same(&self.ctx, &b.ctx)?;
        let m = self.ctx.modulus;
        for ((acc, &x), &y) in self.values.iter_mut().zip(&a.values).zip(&b.values) {
            *acc = m.add(*acc, m.mul(x, y));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(&self.ctx, &other.ctx)?;
        let m = &self.ctx.modulus;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| m.add(a, b))
            .collect();
        Ok(Self {
            ctx: self.ctx.clone(),
            values,
        })
    }

    pub fn to_coeff(&self) -> RingElement {
        let tables = self.ctx.ntt.as_ref().expect("ntt element without tables");
        let mut coeffs = self.values.clone();
        tables.inverse(&mut coeffs);
        RingElement::from_raw(&self.ctx, coeffs)
    }
}

/// Coefficient-wise `(a + b) mod m`.
pub fn ring_add(a: &RingElement, b: &RingElement) -> Result<RingElement> {
    a.add(b)
}

/// Negacyclic product modulo `x^n + 1` and `m`.
pub fn ring_mul(a: &RingElement, b: &RingElement) -> Result<RingElement> {
    a.mul(b)
}
