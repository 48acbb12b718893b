use super::Modulus;

const SMALL_PRIMES: [u128; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Miller-Rabin with the first 24 prime bases. Deterministic below 3.3e24;
/// error probability below 4^-24 above that.
pub fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for p in SMALL_PRIMES {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let m = Modulus::new(n).expect("n >= 2");
    let mut d = n - 1;
    let s = d.trailing_zeros();
    d >>= s;
    'witness: for a in SMALL_PRIMES {
        let mut x = m.pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = m.mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Largest prime `p < 2^bits` with `p = 1 (mod step)`.
pub fn largest_prime_congruent_one(bits: u32, step: u128) -> Option<u128> {
    assert!((2..=128).contains(&bits));
    let bound = if bits == 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    };
    let mut k = (bound - 1) / step;
    while k > 0 {
        let candidate = k * step + 1;
        if is_prime(candidate) {
            return Some(candidate);
        }
        k -= 1;
    }
    None
}

/// The `count` largest primes below `2^bits` congruent to 1 mod `step`, in
/// descending order.
pub fn primes_congruent_one(bits: u32, step: u128, count: usize) -> Vec<u128> {
    let mut out = Vec::with_capacity(count);
    let mut k = ((1u128 << bits) - 2) / step;
    while out.len() < count && k > 0 {
        let candidate = k * step + 1;
        if is_prime(candidate) {
            out.push(candidate);
        }
        k -= 1;
    }
    out
}

/// Smallest `x >= 2` such that `x^((p-1)/order)` has multiplicative order
/// exactly `order`; returns that power. `order` must be a power of two
/// dividing `p - 1`.
pub fn primitive_root_of_unity(p: &Modulus, order: u128) -> Option<u128> {
    let pv = p.value();
    if order < 2 || !order.is_power_of_two() || !(pv - 1).is_multiple_of(order) {
        return None;
    }
    let cofactor = (pv - 1) / order;
    (2..pv.min(1 << 20)).find_map(|x| {
        let root = p.pow(x, cofactor);
        (p.pow(root, order / 2) == pv - 1).then_some(root)
    })
}
