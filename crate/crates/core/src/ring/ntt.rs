use super::prime::{is_prime, primitive_root_of_unity};
use super::Modulus;

fn bit_reverse(x: usize, log_n: u32) -> usize {
    if log_n == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - log_n)
    }
}

/// Negacyclic number-theoretic transform over `Z_p[x]/(x^n + 1)`.
///
/// Forward output index `i` holds the evaluation at `psi^(2*bitrev(i) + 1)`,
/// where `psi` is the primitive `2n`-th root chosen by
/// [`primitive_root_of_unity`].
#[derive(Clone, Debug)]
pub struct NttTables {
    n: usize,
    log_n: u32,
    modulus: Modulus,
    psi: u128,
    psi_rev_mont: Vec<u128>,
    psi_inv_rev_mont: Vec<u128>,
    n_inv_mont: u128,
}

impl NttTables {
    /// Builds tables when `p` is prime and `p = 1 (mod 2n)`; `None` otherwise.
    pub fn new(n: usize, modulus: Modulus) -> Option<Self> {
        let p = modulus.value();
        if !n.is_power_of_two() || n < 2 || !(p - 1).is_multiple_of(2 * n as u128) || !is_prime(p) {
            return None;
        }
        let psi = primitive_root_of_unity(&modulus, 2 * n as u128)?;
        let psi_inv = modulus.inv(psi)?;
        let log_n = n.trailing_zeros();
        let mut psi_rev_mont = vec![0; n];
        let mut psi_inv_rev_mont = vec![0; n];
        let (mut pw, mut pw_inv) = (1u128, 1u128);
        for i in 0..n {
            let r = bit_reverse(i, log_n);
            psi_rev_mont[r] = modulus.to_mont(pw);
            psi_inv_rev_mont[r] = modulus.to_mont(pw_inv);
            pw = modulus.mul(pw, psi);
            pw_inv = modulus.mul(pw_inv, psi_inv);
        }
        let n_inv = modulus.inv(n as u128)?;
        Some(Self {
            n,
            log_n,
            modulus,
            psi,
            psi_rev_mont,
            psi_inv_rev_mont,
            n_inv_mont: modulus.to_mont(n_inv),
        })
    }

    pub fn psi(&self) -> u128 {
        self.psi
    }

    /// Exponent `e` (odd, `< 2n`) such that forward index `i` is the
    /// evaluation at `psi^e`.
    pub fn evaluation_exponent(&self, i: usize) -> usize {
        2 * bit_reverse(i, self.log_n) + 1
    }

    /// Inverse of [`Self::evaluation_exponent`].
    pub fn index_of_exponent(&self, e: usize) -> usize {
        debug_assert!(e % 2 == 1 && e < 2 * self.n);
        bit_reverse((e - 1) / 2, self.log_n)
    }

    pub fn forward(&self, a: &mut [u128]) {
        debug_assert_eq!(a.len(), self.n);
        let md = &self.modulus;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let s = self.psi_rev_mont[m + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = md.mont_mul(*y, s);
                    *x = md.add(u, v);
                    *y = md.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u128]) {
        debug_assert_eq!(a.len(), self.n);
        let md = &self.modulus;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let s = self.psi_inv_rev_mont[h + i];
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    *x = md.add(u, v);
                    *y = md.mont_mul(md.sub(u, v), s);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = md.mont_mul(*x, self.n_inv_mont);
        }
    }
}
