use std::fmt;
use std::sync::Arc;

use super::params::EncryptionParams;
use super::tensor::TensorBasis;
use crate::ring::{digit_count, RingContext};
use crate::Result;

/// Precomputed state for one parameter set. Shared read-only by every key and
/// evaluation routine.
pub struct FvContext {
    params: EncryptionParams,
    digest: [u8; 32],
    q_ring: Arc<RingContext>,
    t_ring: Arc<RingContext>,
    slot_rings: Vec<Arc<RingContext>>,
    delta: u128,
    digits: usize,
    pub(crate) tensor: TensorBasis,
}

impl fmt::Debug for FvContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FvContext")
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl PartialEq for FvContext {
    fn eq(&self, other: &Self) -> bool {
        self.params_id() == other.params_id()
    }
}

impl Eq for FvContext {}

impl FvContext {
    pub fn new(params: EncryptionParams) -> Result<Arc<Self>> {
        let n = params.n();
        let q_ring = RingContext::new(n, *params.q())?;
        let t_ring = RingContext::new(n, *params.t())?;
        let slot_rings = if params.supports_batching() {
            params
                .plain_moduli()
                .iter()
                .map(|t| RingContext::new(n, *t))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let delta = params.q().value() / params.t().value();
        let digits = digit_count(params.q().value(), params.w() as u128);
        let tensor = TensorBasis::new(n, params.q())?;
        Ok(Arc::new(Self {
            digest: params.digest(),
            params,
            q_ring,
            t_ring,
            slot_rings,
            delta,
            digits,
            tensor,
        }))
    }

    pub fn params(&self) -> &EncryptionParams {
        &self.params
    }

    pub fn params_id(&self) -> [u8; 32] {
        self.digest
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    /// Ciphertext ring `R_q`.
    pub fn q_ring(&self) -> &Arc<RingContext> {
        &self.q_ring
    }

    /// Plaintext ring `R_t` for the composite `t`.
    pub fn t_ring(&self) -> &Arc<RingContext> {
        &self.t_ring
    }

    /// One NTT-capable ring per plaintext prime; empty without batching.
    pub fn slot_rings(&self) -> &[Arc<RingContext>] {
        &self.slot_rings
    }

    pub fn supports_batching(&self) -> bool {
        !self.slot_rings.is_empty()
    }

    /// `floor(q / t)`.
    pub fn delta(&self) -> u128 {
        self.delta
    }

    /// Number of base-`w` digits of `q`, i.e. `floor(log_w q) + 1`.
    pub fn decomposition_len(&self) -> usize {
        self.digits
    }
}
