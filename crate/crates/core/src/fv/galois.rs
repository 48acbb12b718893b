//! Slot rotations through the automorphisms `x -> x^g`.
//!
//! Slots form two rows of `n/2`. Row 0 slot `j` is the evaluation at the root
//! with exponent `3^j mod 2n`, row 1 slot `j` the one with exponent `-3^j`.
//! Substituting `x -> x^(3^k)` rotates both rows left by `k`; `x -> x^(2n-1)`
//! swaps the rows.

use super::cipher::Ciphertext;
use super::keys::{GaloisKeySet, KeySwitchKey};
use crate::{Error, Result};

/// Automorphism exponent realizing a left row rotation by `step`.
pub fn galois_exponent(step: i64, n: usize) -> usize {
    let two_n = 2 * n as u64;
    let half = (n / 2) as i64;
    let k = step.rem_euclid(half.max(1)) as u64;
    let mut g = 1u64;
    for _ in 0..k {
        g = g * 3 % two_n;
    }
    g as usize
}

pub fn row_swap_exponent(n: usize) -> usize {
    2 * n - 1
}

/// The steps `1, 2, 4, ..., n/4` that together reach every row rotation.
pub fn power_of_two_steps(n: usize) -> Vec<i64> {
    let mut steps = Vec::new();
    let mut s = 1usize;
    while s < n / 2 {
        steps.push(s as i64);
        s <<= 1;
    }
    steps
}

fn apply_automorphism(ct: &Ciphertext, g: usize, key: &KeySwitchKey) -> Result<Ciphertext> {
    let c0 = ct.parts[0].automorphism(g)?;
    let c1 = ct.parts[1].automorphism(g)?;
    let (r0, r1) = key.inner.apply(&c1)?;
    Ok(Ciphertext {
        ctx: ct.ctx.clone(),
        key_id: ct.key_id,
        parts: [c0.add(&r0)?, r1],
    })
}

fn check(ct: &Ciphertext, gks: &GaloisKeySet) -> Result<()> {
    if ct.ctx.params_id() != gks.ctx.params_id() {
        return Err(Error::ParameterMismatch("galois keys".into()));
    }
    if ct.key_id != gks.key_id {
        return Err(Error::KeyMismatch(format!(
            "ciphertext under {} but galois keys for {}",
            ct.key_id, gks.key_id
        )));
    }
    if !ct.ctx.supports_batching() {
        return Err(Error::Unsupported(
            "slot rotation needs batching parameters".into(),
        ));
    }
    Ok(())
}

/// Rotate both slot rows left by `step` (modulo `n/2`). Uses a direct key when
/// one exists, otherwise composes the available power-of-two keys.
pub fn rotate_slots(ct: &Ciphertext, step: i64, gks: &GaloisKeySet) -> Result<Ciphertext> {
    check(ct, gks)?;
    let n = ct.ctx.n();
    let half = n / 2;
    let k = step.rem_euclid(half as i64) as usize;
    if k == 0 {
        return Ok(ct.clone());
    }
    let g = galois_exponent(k as i64, n);
    if let Some(key) = gks.get(g) {
        return apply_automorphism(ct, g, key);
    }
    let mut plan = Vec::new();
    let mut bit = 1usize;
    while bit < half {
        if k & bit != 0 {
            let g = galois_exponent(bit as i64, n);
            let key = gks.get(g).ok_or(Error::MissingGaloisKey(k))?;
            plan.push((g, key));
        }
        bit <<= 1;
    }
    let mut out = ct.clone();
    for (g, key) in plan {
        out = apply_automorphism(&out, g, key)?;
    }
    Ok(out)
}

/// Exchange the two slot rows.
pub fn row_swap(ct: &Ciphertext, gks: &GaloisKeySet) -> Result<Ciphertext> {
    check(ct, gks)?;
    let g = row_swap_exponent(ct.ctx.n());
    let key = gks.get(g).ok_or(Error::MissingGaloisKey(g))?;
    apply_automorphism(ct, g, key)
}

/// Rotate-and-add over every power-of-two step, then fold the two rows, so
/// every slot (in particular slot 0) holds the sum of all input slots.
pub fn sum_slots(ct: &Ciphertext, gks: &GaloisKeySet) -> Result<Ciphertext> {
    check(ct, gks)?;
    let mut acc = ct.clone();
    for step in power_of_two_steps(ct.ctx.n()) {
        let rotated = rotate_slots(&acc, step, gks)?;
        acc = acc.add(&rotated)?;
    }
    let swapped = row_swap(&acc, gks)?;
    acc.add(&swapped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents() {
        assert_eq!(galois_exponent(0, 16), 1);
        assert_eq!(galois_exponent(1, 16), 3);
        assert_eq!(galois_exponent(2, 16), 9);
        // step -1 == step 7 for rows of 8
        assert_eq!(galois_exponent(-1, 16), galois_exponent(7, 16));
        // 3 has order n/2 modulo 2n
        assert_eq!(galois_exponent(8, 16), 1);
        assert_eq!(row_swap_exponent(16), 31);
    }

    #[test]
    fn power_steps_count() {
        assert_eq!(power_of_two_steps(1024).len(), 9);
        assert_eq!(power_of_two_steps(16), vec![1, 2, 4]);
    }

    mod encrypted {
        use super::super::*;
        use crate::codec::{decode_slots, encode_slots};
        use crate::fv::{
            decrypt, encrypt, gen_galois_keys, gen_public_key, gen_secret_key, EncryptionParams,
            FvContext, Plaintext, SecurityLevel,
        };
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha20Rng;

        #[test]
        fn rotations_match_plaintext_oracle() {
            let n = 64;
            let ctx = FvContext::new(
                EncryptionParams::with_prime_q(n, 110, &[40961], SecurityLevel::Bits128).unwrap(),
            )
            .unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(9);
            let sk = gen_secret_key(&ctx, &mut rng).unwrap();
            let pk = gen_public_key(&sk, &mut rng).unwrap();
            let gks = gen_galois_keys(&sk, &power_of_two_steps(n), &mut rng).unwrap();
            assert_eq!(gks.len(), (n / 2).trailing_zeros() as usize + 1);

            let slots: Vec<i128> = (0..n).map(|_| rng.random_range(-20000..20000)).collect();
            let ct = encrypt(&encode_slots(&slots, &ctx).unwrap(), &pk, &mut rng).unwrap();
            let half = n / 2;
            let dec = |c: &Ciphertext| decode_slots(&decrypt(c, &sk).unwrap(), &ctx).unwrap();
            for step in [1i64, 2, 4, 8, 16, 3, 31, -1, -5] {
                let got = dec(&rotate_slots(&ct, step, &gks).unwrap());
                let k = step.rem_euclid(half as i64) as usize;
                for (i, &g) in got.iter().enumerate() {
                    let (row, j) = (i / half, i % half);
                    assert_eq!(
                        g,
                        slots[row * half + (j + k) % half],
                        "step {step} slot {i}"
                    );
                }
                let back = rotate_slots(&rotate_slots(&ct, step, &gks).unwrap(), -step, &gks);
                assert_eq!(dec(&back.unwrap()), slots);
            }
            let swapped = dec(&row_swap(&ct, &gks).unwrap());
            assert_eq!(&swapped[..half], &slots[half..]);

            let ones = encrypt(&Plaintext::constant(&ctx, 1).unwrap(), &pk, &mut rng).unwrap();
            let total = dec(&sum_slots(&ones, &gks).unwrap());
            assert!(total.iter().all(|&s| s == n as i128));
        }

        #[test]
        fn missing_key_reported() {
            let n = 32;
            let ctx = FvContext::new(
                EncryptionParams::with_prime_q(n, 110, &[40961], SecurityLevel::Bits128).unwrap(),
            )
            .unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(10);
            let sk = gen_secret_key(&ctx, &mut rng).unwrap();
            let pk = gen_public_key(&sk, &mut rng).unwrap();
            let gks = gen_galois_keys(&sk, &[1], &mut rng).unwrap();
            let ct = encrypt(&Plaintext::constant(&ctx, 1).unwrap(), &pk, &mut rng).unwrap();
            assert!(rotate_slots(&ct, 1, &gks).is_ok());
            assert!(matches!(
                rotate_slots(&ct, 2, &gks),
                Err(Error::MissingGaloisKey(2))
            ));
        }
    }
}
