//! Exact arithmetic in `Z_m[x]/(x^n + 1)` for moduli up to 128 bits, plus the
//! samplers and digit decomposition the scheme is built from.

mod decompose;
mod modulus;
mod ntt;
mod poly;
pub mod prime;
mod sample;
pub(crate) mod wide;

pub use decompose::{base_decompose, digit_count};
pub use modulus::Modulus;
pub use ntt::NttTables;
pub use poly::{ring_add, ring_mul, NttElement, RingContext, RingElement};
pub use sample::{sample_binary, sample_noise, sample_uniform, NoiseDistribution};
