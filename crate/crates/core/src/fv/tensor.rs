//! Exact ciphertext tensoring followed by the `t/q` rescale.
//!
//! The products of centred ciphertext components are computed over the
//! integers through an auxiliary basis of word-sized NTT primes large enough
//! that no coefficient wraps, then reconstructed with Garner's algorithm.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::ToPrimitive;

use crate::ring::prime::primes_congruent_one;
use crate::ring::{Modulus, NttElement, RingContext, RingElement};
use crate::Result;

pub(crate) struct TensorBasis {
    rings: Vec<Arc<RingContext>>,
    /// `garner[i][j] = p_j^{-1} mod p_i` for `j < i`.
    garner: Vec<Vec<u128>>,
    product: BigUint,
    half_product: BigUint,
}

impl TensorBasis {
    pub(crate) fn new(n: usize, q: &Modulus) -> Result<Self> {
        // |coefficient| <= n * q^2 / 2 for the cross term; reconstruct with
        // headroom for the sign.
        let needed_bits = 2 * q.bit_length() + n.trailing_zeros() + 2;
        let count = (needed_bits as usize).div_ceil(61);
        let primes = primes_congruent_one(62, 2 * n as u128, count);
        let mut rings = Vec::with_capacity(count);
        for &p in &primes {
            rings.push(RingContext::new(n, Modulus::new(p)?)?);
        }
        let garner = primes
            .iter()
            .enumerate()
            .map(|(i, &pi)| {
                let mi = Modulus::new(pi).expect("prime");
                primes[..i]
                    .iter()
                    .map(|&pj| mi.inv(pj % pi).expect("distinct primes"))
                    .collect()
            })
            .collect();
        let product: BigUint = primes.iter().map(|&p| BigUint::from(p)).product();
        let half_product = &product >> 1u32;
        Ok(Self {
            rings,
            garner,
            product,
            half_product,
        })
    }

    fn lift(&self, a: &RingElement, ring: &Arc<RingContext>) -> Result<NttElement> {
        let q = a.modulus();
        let p = ring.modulus();
        let coeffs = a
            .coeffs()
            .iter()
            .map(|&c| p.reduce_i128(q.center(c)))
            .collect();
        RingElement::from_coeffs(ring, coeffs)?.to_ntt()
    }

    /// Returns `round(t/q * (a0*b0, a0*b1 + a1*b0, a1*b1)) mod q` with the
    /// products taken over `Z[x]/(x^n + 1)`.
    pub(crate) fn scaled_tensor(
        &self,
        a: (&RingElement, &RingElement),
        b: (&RingElement, &RingElement),
        t: u128,
    ) -> Result<[RingElement; 3]> {
        let q_ring = a.0.context().clone();
        let q = *q_ring.modulus();
        let n = q_ring.n();

        // residues[k][j] = coefficients of product k modulo prime j
        let mut residues: [Vec<Vec<u128>>; 3] = Default::default();
        for ring in &self.rings {
            let a0 = self.lift(a.0, ring)?;
            let a1 = self.lift(a.1, ring)?;
            let b0 = self.lift(b.0, ring)?;
            let b1 = self.lift(b.1, ring)?;
            let c0 = a0.mul(&b0)?;
            let mut c1 = a0.mul(&b1)?;
            c1.mul_acc(&a1, &b0)?;
            let c2 = a1.mul(&b1)?;
            for (k, c) in [c0, c1, c2].into_iter().enumerate() {
                residues[k].push(c.to_coeff().into_coeffs());
            }
        }

        let q_big = BigInt::from(q.value());
        let two_q = &q_big << 1u32;
        let t_big = BigInt::from(t);
        let mut digits = vec![0u128; self.rings.len()];
        let out = residues.map(|per_prime| {
            let coeffs = (0..n)
                .map(|i| {
                    let x = self.reconstruct(&per_prime, i, &mut digits);
                    let num = ((&x * &t_big) << 1u32) + &q_big;
                    let rounded = num.div_floor(&two_q);
                    let r = rounded.mod_floor(&q_big);
                    r.to_u128().expect("reduced below q")
                })
                .collect();
            RingElement::from_raw(&q_ring, coeffs)
        });
        Ok(out)
    }

    /// Signed integer with the given residues at coefficient `i`.
    fn reconstruct(&self, per_prime: &[Vec<u128>], i: usize, digits: &mut [u128]) -> BigInt {
        for (k, ring) in self.rings.iter().enumerate() {
            let m = ring.modulus();
            let mut v = per_prime[k][i];
            for (j, &d) in digits[..k].iter().enumerate() {
                v = m.mul(m.sub(v, d % m.value()), self.garner[k][j]);
            }
            digits[k] = v;
        }
        let mut acc = BigUint::from(0u32);
        for k in (0..self.rings.len()).rev() {
            acc *= self.rings[k].modulus().value() as u64;
            acc += digits[k] as u64;
        }
        if acc > self.half_product {
            BigInt::from_biguint(Sign::Minus, &self.product - acc)
        } else {
            BigInt::from_biguint(Sign::Plus, acc)
        }
    }
}
