use std::fmt;
use std::hash::{Hash, Hasher};

use super::wide::{mul_wide, rem_wide};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
enum Reducer {
    /// Odd modulus: Montgomery arithmetic with R = 2^128.
    Montgomery { neg_inv: u128, r2: u128 },
    /// Even modulus below 2^64: products fit a `u128`.
    Small,
    /// Even modulus of 64 bits or more.
    Wide,
}

/// An integer modulus `m >= 2` of up to 128 bits with precomputed reduction
/// constants.
#[derive(Clone, Copy)]
pub struct Modulus {
    value: u128,
    bits: u32,
    reducer: Reducer,
}

impl PartialEq for Modulus {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl Eq for Modulus {}

impl Hash for Modulus {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.value.hash(state);
    }
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Modulus({})", self.value)
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Modulus {
    pub fn new(value: u128) -> Result<Self> {
        if value < 2 {
            return Err(Error::InvalidParameter(format!(
                "modulus must be at least 2, got {value}"
            )));
        }
        let bits = 128 - (value - 1).leading_zeros();
        let reducer = if value & 1 == 1 {
            // Newton iteration for m^{-1} mod 2^128; m*m = 1 mod 8 seeds 3 bits.
            let mut inv = value;
            for _ in 0..6 {
                inv = inv.wrapping_mul(2u128.wrapping_sub(value.wrapping_mul(inv)));
            }
            debug_assert_eq!(value.wrapping_mul(inv), 1);
            let r1 = (u128::MAX % value + 1) % value;
            let (lo, hi) = mul_wide(r1, r1);
            let r2 = rem_wide(lo, hi, value);
            Reducer::Montgomery {
                neg_inv: inv.wrapping_neg(),
                r2,
            }
        } else if value < 1 << 64 {
            Reducer::Small
        } else {
            Reducer::Wide
        };
        Ok(Self {
            value,
            bits,
            reducer,
        })
    }

    #[inline]
    pub fn value(&self) -> u128 {
        self.value
    }

    /// `ceil(log2(value))`.
    #[inline]
    pub fn bit_length(&self) -> u32 {
        self.bits
    }

    /// Bytes needed to store one reduced residue.
    pub fn byte_width(&self) -> usize {
        (self.bits as usize).div_ceil(8).max(1)
    }

    pub fn is_odd(&self) -> bool {
        matches!(self.reducer, Reducer::Montgomery { .. })
    }

    #[inline]
    pub fn reduce(&self, x: u128) -> u128 {
        x % self.value
    }

    /// Reduce a signed integer into `[0, m)`.
    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u128 {
        if self.value > i128::MAX as u128 {
            if x >= 0 {
                x as u128
            } else {
                self.value - x.unsigned_abs()
            }
        } else {
            x.rem_euclid(self.value as i128) as u128
        }
    }

    /// Symmetric representative in `[-m/2, m/2)`; an exact `m/2` maps to `-m/2`.
    #[inline]
    pub fn center(&self, x: u128) -> i128 {
        debug_assert!(x < self.value);
        let threshold = self.value / 2 + (self.value & 1);
        if x >= threshold {
            -((self.value - x) as i128)
        } else {
            x as i128
        }
    }

    #[inline]
    pub fn add(&self, a: u128, b: u128) -> u128 {
        let (s, overflow) = a.overflowing_add(b);
        if overflow || s >= self.value {
            s.wrapping_sub(self.value)
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u128, b: u128) -> u128 {
        if a >= b {
            a - b
        } else {
            self.value - (b - a)
        }
    }

    #[inline]
    pub fn neg(&self, a: u128) -> u128 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u128, b: u128) -> u128 {
        match self.reducer {
            Reducer::Montgomery { r2, .. } => self.mont_mul(self.mont_mul(a, b), r2),
            Reducer::Small => (a * b) % self.value,
            Reducer::Wide => {
                let (lo, hi) = mul_wide(a, b);
                rem_wide(lo, hi, self.value)
            }
        }
    }

    /// Montgomery product `a * b * 2^-128 mod m`. Odd moduli only.
    #[inline]
    pub(crate) fn mont_mul(&self, a: u128, b: u128) -> u128 {
        let Reducer::Montgomery { neg_inv, .. } = self.reducer else {
            unreachable!("montgomery product on even modulus");
        };
        let (lo, hi) = mul_wide(a, b);
        let u = lo.wrapping_mul(neg_inv);
        let (ul, uh) = mul_wide(u, self.value);
        let carry = lo.overflowing_add(ul).1 as u128;
        let (r, o1) = hi.overflowing_add(uh);
        let (r, o2) = r.overflowing_add(carry);
        if o1 || o2 || r >= self.value {
            r.wrapping_sub(self.value)
        } else {
            r
        }
    }

    /// Map into Montgomery form `a * 2^128 mod m`. Odd moduli only.
    #[inline]
    pub(crate) fn to_mont(self, a: u128) -> u128 {
        let Reducer::Montgomery { r2, .. } = self.reducer else {
            unreachable!("montgomery form on even modulus");
        };
        self.mont_mul(a, r2)
    }

    pub fn pow(&self, base: u128, mut exp: u128) -> u128 {
        let mut acc = 1 % self.value;
        let mut b = base % self.value;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse, if `gcd(a, m) = 1`.
    pub fn inv(&self, a: u128) -> Option<u128> {
        use num_bigint::BigInt;
        use num_integer::Integer;
        let m = BigInt::from(self.value);
        let a = BigInt::from(a % self.value);
        let egcd = a.extended_gcd(&m);
        if egcd.gcd != BigInt::from(1) {
            return None;
        }
        let x = egcd.x.mod_floor(&m);
        Some(u128::try_from(x).expect("inverse below modulus"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    #[test]
    fn bit_length_is_ceil_log2() {
        assert_eq!(Modulus::new(2).unwrap().bit_length(), 1);
        assert_eq!(Modulus::new(3).unwrap().bit_length(), 2);
        assert_eq!(Modulus::new(16).unwrap().bit_length(), 4);
        assert_eq!(Modulus::new(17).unwrap().bit_length(), 5);
        assert_eq!(Modulus::new(40961).unwrap().bit_length(), 16);
        assert_eq!(Modulus::new(u128::MAX).unwrap().bit_length(), 128);
    }

    #[test]
    fn rejects_tiny_modulus() {
        assert!(Modulus::new(0).is_err());
        assert!(Modulus::new(1).is_err());
    }

    #[test]
    fn center_tie_goes_negative() {
        let m = Modulus::new(8).unwrap();
        assert_eq!(m.center(4), -4);
        assert_eq!(m.center(3), 3);
        assert_eq!(m.center(7), -1);
        let m = Modulus::new(7).unwrap();
        assert_eq!(m.center(3), 3);
        assert_eq!(m.center(4), -3);
    }

    #[test]
    fn inverse_of_unit() {
        let m = Modulus::new(40961).unwrap();
        let x = m.inv(12345).unwrap();
        assert_eq!(m.mul(x, 12345), 1);
        assert!(Modulus::new(12).unwrap().inv(4).is_none());
    }

    fn modulus_strategy() -> impl Strategy<Value = u128> {
        prop_oneof![
            2u128..1 << 20,
            2u128..1 << 64,
            (1u128 << 64)..u128::MAX,
            Just(u128::MAX)
        ]
    }

    proptest! {
        #[test]
        fn mul_matches_bigint(m in modulus_strategy(), a in any::<u128>(), b in any::<u128>()) {
            let md = Modulus::new(m).unwrap();
            let (a, b) = (a % m, b % m);
            let expect = (BigUint::from(a) * BigUint::from(b)) % BigUint::from(m);
            prop_assert_eq!(BigUint::from(md.mul(a, b)), expect);
        }

        #[test]
        fn add_sub_roundtrip(m in modulus_strategy(), a in any::<u128>(), b in any::<u128>()) {
            let md = Modulus::new(m).unwrap();
            let (a, b) = (a % m, b % m);
            prop_assert_eq!(md.sub(md.add(a, b), b), a);
            prop_assert_eq!(md.add(a, md.neg(a)), 0);
        }

        #[test]
        fn center_then_reduce_is_identity(m in modulus_strategy(), a in any::<u128>()) {
            let md = Modulus::new(m).unwrap();
            let a = a % m;
            prop_assert_eq!(md.reduce_i128(md.center(a)), a);
        }
    }
}
