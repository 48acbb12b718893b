//! Encrypted cosine-dissimilarity scoring, its plaintext reference, PCA
//! reduction and verification metrics.

mod dataset;
mod inner_product;
mod metrics;
mod pca;
mod synthetic;
mod template;

pub use dataset::{Dataset, IndexPair};
pub use inner_product::{
    decrypt_raw_score, decrypt_score, elementwise_with_ops, encrypted_inner_product_batched,
    encrypted_inner_product_elementwise, plaintext_score, score, MatchScore, OpCount,
};
pub use metrics::{
    cosine_dissimilarity, dot, evaluate_tar_far, normalize, OperatingPoint, VerificationReport,
    FAR_POINTS,
};
pub use pca::{pca_fit, pca_project, pca_transform, PcaModel};
pub use synthetic::SyntheticSpec;
pub use template::{
    check_elementwise_range, check_template_params, elementwise_fits, encrypt_template,
    EncryptedTemplate, MatchPath, TemplateForm,
};
