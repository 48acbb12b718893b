//! The FV homomorphic encryption scheme over `R_q = Z_q[x]/(x^n + 1)`.

mod cipher;
mod context;
mod galois;
mod keys;
mod params;
mod serialize;
mod tensor;

pub use cipher::{
    decrypt, encrypt, hom_add, hom_multiply, hom_sub, key_switch, noise_budget, Ciphertext,
    Plaintext,
};
pub use context::FvContext;
pub use galois::{
    galois_exponent, power_of_two_steps, rotate_slots, row_swap, row_swap_exponent, sum_slots,
};
pub use keys::{
    gen_evaluation_key, gen_galois_keys, gen_key_switch_key, gen_public_key, gen_secret_key,
    EvaluationKey, GaloisKeySet, KeyId, KeySwitchKey, PublicKey, SecretKey,
};
pub use params::{
    EncryptionParams, Preset, SecurityLevel, DEFAULT_DECOMPOSITION_BASE, DEFAULT_PLAIN_MODULUS,
    SECOND_PLAIN_MODULUS, TABLE_PRESETS, TWO_PRIME_LOG_Q,
};
pub use serialize::{
    export_secret_key, import_secret_key, read_header, with_decode_observer, Header, ObjectTag,
};
pub(crate) use serialize::{Reader, Writer};
