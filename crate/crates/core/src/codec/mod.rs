//! Real feature vectors to plaintexts and back: quantization, CRT slot
//! packing, and signed base-`w` scalar encoding.

mod quantize;
mod scalar;
mod slots;

pub use quantize::{
    check_score_range, dequantize_score, integer_dot, max_magnitude, quantization_error_bound,
    quantize, score_range_fits, QuantizedTemplate, STANDARD_STEPS, UNIT_NORM_TOLERANCE,
};
pub use scalar::{
    decode_scalar, encode_scalar, inner_product_coefficient_bound, ScalarEncoding,
    DEFAULT_SCALAR_BASE,
};
pub use slots::{decode_slots, encode_slots, encode_template};
