//! 256-bit helpers for products of two `u128` values.

/// Full 128x128 product returned as `(lo, hi)`.
#[inline]
pub(crate) fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    let (a0, a1) = (a as u64 as u128, a >> 64);
    let (b0, b1) = (b as u64 as u128, b >> 64);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 as u64 as u128) + (p10 as u64 as u128);
    let lo = (p00 as u64 as u128) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (lo, hi)
}

/// `(hi * 2^128 + lo) mod m` by shift-subtract long division. Slow; only used
/// for precomputation and for even moduli above 64 bits.
pub(crate) fn rem_wide(lo: u128, hi: u128, m: u128) -> u128 {
    debug_assert!(m >= 2);
    let mut r = hi % m;
    for bit in (0..128).rev() {
        let carry = r >> 127;
        r = (r << 1) | ((lo >> bit) & 1);
        if carry == 1 || r >= m {
            r = r.wrapping_sub(m);
        }
    }
    r
}

/// Quotient and remainder of `(hi * 2^128 + lo) / d`; requires `hi < d` so the
/// quotient fits in 128 bits.
pub(crate) fn div_rem_wide(lo: u128, hi: u128, d: u128) -> (u128, u128) {
    debug_assert!(hi < d);
    let mut r = hi;
    let mut quot = 0u128;
    for bit in (0..128).rev() {
        let carry = r >> 127;
        r = (r << 1) | ((lo >> bit) & 1);
        quot <<= 1;
        if carry == 1 || r >= d {
            r = r.wrapping_sub(d);
            quot |= 1;
        }
    }
    (quot, r)
}
