use super::RingElement;
use crate::{Error, Result};

/// `l + 1` where `l = floor(log_w q)`.
pub fn digit_count(q: u128, w: u128) -> usize {
    assert!(w >= 2);
    let mut l = 0;
    let mut power: u128 = 1;
    while let Some(next) = power.checked_mul(w) {
        if next > q {
            break;
        }
        power = next;
        l += 1;
    }
    l + 1
}

/// Coefficient-wise base-`w` digits: returns `l + 1` elements `a_i` with
/// coefficients in `[0, w)` such that `sum a_i * w^i = a`.
pub fn base_decompose(a: &RingElement, w: u128) -> Result<Vec<RingElement>> {
    if w < 2 {
        return Err(Error::InvalidParameter(format!(
            "decomposition base must be >= 2, got {w}"
        )));
    }
    let count = digit_count(a.modulus().value(), w);
    let n = a.n();
    let mut digits = vec![vec![0u128; n]; count];
    for (j, &c) in a.coeffs().iter().enumerate() {
        let mut rest = c;
        for digit in digits.iter_mut() {
            digit[j] = rest % w;
            rest /= w;
        }
        debug_assert_eq!(rest, 0);
    }
    Ok(digits
        .into_iter()
        .map(|d| RingElement::from_raw(a.context(), d))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{Modulus, RingContext};
    use proptest::prelude::*;

    #[test]
    fn binary_expansion_of_thirteen() {
        let ctx = RingContext::new(2, Modulus::new(15).unwrap()).unwrap();
        let a = RingElement::from_coeffs(&ctx, vec![13, 0]).unwrap();
        let digits: Vec<u128> = base_decompose(&a, 2)
            .unwrap()
            .iter()
            .map(|d| d.coeffs()[0])
            .collect();
        assert_eq!(digits, vec![1, 0, 1, 1]);
    }

    #[test]
    fn digit_count_from_bit_length() {
        let q = (1u128 << 110) - 1;
        assert_eq!(digit_count(q, 1 << 32), 110 / 32 + 1);
        let q77 = (1u128 << 77) - 1;
        assert_eq!(digit_count(q77, 1 << 32), 77 / 32 + 1);
        assert_eq!(digit_count(1 << 64, 1 << 32), 3);
        assert_eq!(digit_count(u128::MAX, 1 << 64), 2);
    }

    proptest! {
        #[test]
        fn recomposition_is_exact(
            coeffs in prop::collection::vec(any::<u128>(), 8),
            w in prop_oneof![Just(2u128), Just(10), Just(1 << 16), Just(1 << 32)],
        ) {
            let q = (1u128 << 109) - 1;
            let ctx = RingContext::new(8, Modulus::new(q).unwrap()).unwrap();
            let a = RingElement::from_coeffs(&ctx, coeffs.into_iter().map(|c| c % q).collect()).unwrap();
            let digits = base_decompose(&a, w).unwrap();
            prop_assert_eq!(digits.len(), digit_count(q, w));
            let mut acc = RingElement::zero(&ctx);
            let mut power = 1u128;
            for d in &digits {
                prop_assert!(d.coeffs().iter().all(|&c| c < w));
                acc = acc.add(&d.scalar_mul(power))?;
                power = power.wrapping_mul(w) % q;
            }
            prop_assert_eq!(acc, a);
        }
    }
}
