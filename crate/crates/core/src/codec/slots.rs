//! CRT slot packing.
//!
//! For each plaintext prime `t_i = 1 mod 2n` the ring `Z_{t_i}[x]/(x^n + 1)`
//! splits into `n` copies of `Z_{t_i}`, one per odd power of a primitive
//! `2n`-th root. Slots are ordered as two rows of `n/2`: row 0 slot `j` sits at
//! root exponent `3^j mod 2n` and row 1 slot `j` at `-3^j`, so the substitution
//! `x -> x^3` rotates each row by one.

use std::sync::Arc;

use super::quantize::QuantizedTemplate;
use crate::fv::{FvContext, Plaintext};
use crate::ring::{Modulus, RingContext};
use crate::{Error, Result};

/// NTT index holding slot `i` for ring degree `n`.
fn slot_exponent(i: usize, n: usize) -> usize {
    let half = n / 2;
    let two_n = 2 * n;
    let (row, j) = (i / half, i % half);
    let mut e = 1usize;
    for _ in 0..j {
        e = e * 3 % two_n;
    }
    if row == 0 {
        e
    } else {
        two_n - e
    }
}

/// Slot-to-transform-index permutation for one ring.
fn slot_positions(ring: &RingContext) -> Vec<usize> {
    let ntt = ring.ntt().expect("slot ring supports NTT");
    let n = ring.n();
    (0..n)
        .map(|i| ntt.index_of_exponent(slot_exponent(i, n)))
        .collect()
}

/// Recombines residues modulo pairwise coprime moduli (Garner).
pub(crate) struct Crt {
    moduli: Vec<Modulus>,
    /// `inv[k] = (m_0 * ... * m_{k-1})^{-1} mod m_k`
    inv: Vec<u128>,
    /// `prefix[k] = m_0 * ... * m_{k-1}`
    prefix: Vec<u128>,
}

impl Crt {
    pub(crate) fn new(moduli: &[Modulus]) -> Self {
        let mut prefix = Vec::with_capacity(moduli.len());
        let mut inv = Vec::with_capacity(moduli.len());
        let mut acc = 1u128;
        for m in moduli {
            prefix.push(acc);
            inv.push(m.inv(m.reduce(acc)).expect("coprime moduli"));
            acc = acc.wrapping_mul(m.value());
        }
        Self {
            moduli: moduli.to_vec(),
            inv,
            prefix,
        }
    }

    pub(crate) fn combine(&self, residues: &[u128]) -> u128 {
        let mut x = 0u128;
        for (k, m) in self.moduli.iter().enumerate() {
            let diff = m.sub(residues[k], m.reduce(x));
            let coef = m.mul(diff, self.inv[k]);
            x += coef * self.prefix[k];
        }
        x
    }
}

/// Pack up to `n` signed values into a plaintext whose slots hold them
/// (unused slots are zero).
pub fn encode_slots(values: &[i128], ctx: &Arc<FvContext>) -> Result<Plaintext> {
    if !ctx.supports_batching() {
        return Err(Error::Unsupported(
            "plaintext moduli do not support batching for this ring degree".into(),
        ));
    }
    let n = ctx.n();
    if values.len() > n {
        return Err(Error::Capacity(format!(
            "{} values exceed {n} slots",
            values.len()
        )));
    }
    let rings = ctx.slot_rings();
    let mut per_prime = Vec::with_capacity(rings.len());
    for ring in rings {
        let m = ring.modulus();
        let mut eval = vec![0u128; n];
        for (&pos, &v) in slot_positions(ring).iter().zip(values) {
            eval[pos] = m.reduce_i128(v);
        }
        ring.ntt().expect("slot ring").inverse(&mut eval);
        per_prime.push(eval);
    }
    let moduli: Vec<Modulus> = rings.iter().map(|r| *r.modulus()).collect();
    let crt = Crt::new(&moduli);
    let mut residues = vec![0u128; rings.len()];
    let coeffs = (0..n)
        .map(|i| {
            for (k, r) in per_prime.iter().enumerate() {
                residues[k] = r[i];
            }
            crt.combine(&residues)
        })
        .collect();
    Plaintext::new(ctx, coeffs)
}

pub fn encode_template(q: &QuantizedTemplate, ctx: &Arc<FvContext>) -> Result<Plaintext> {
    let values: Vec<i128> = q.values().iter().map(|&v| v as i128).collect();
    encode_slots(&values, ctx)
}

/// All `n` slot values, recombined modulo `t` and centred in `[-t/2, t/2)`.
pub fn decode_slots(pt: &Plaintext, ctx: &Arc<FvContext>) -> Result<Vec<i128>> {
    if !ctx.supports_batching() {
        return Err(Error::Unsupported(
            "plaintext moduli do not support batching for this ring degree".into(),
        ));
    }
    if pt.context().params_id() != ctx.params_id() {
        return Err(Error::ParameterMismatch(
            "plaintext from other parameters".into(),
        ));
    }
    let n = ctx.n();
    let rings = ctx.slot_rings();
    let mut per_prime = Vec::with_capacity(rings.len());
    for (ring, residue) in rings.iter().zip(pt.residues()) {
        let mut eval = residue.into_coeffs();
        ring.ntt().expect("slot ring").forward(&mut eval);
        let slots: Vec<u128> = slot_positions(ring).iter().map(|&p| eval[p]).collect();
        per_prime.push(slots);
    }
    let moduli: Vec<Modulus> = rings.iter().map(|r| *r.modulus()).collect();
    let crt = Crt::new(&moduli);
    let t = ctx.params().t();
    let mut residues = vec![0u128; rings.len()];
    Ok((0..n)
        .map(|i| {
            for (k, r) in per_prime.iter().enumerate() {
                residues[k] = r[i];
            }
            t.center(crt.combine(&residues))
        })
        .collect())
}
