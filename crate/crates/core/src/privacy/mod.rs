//! Defenses: standardisation and Gaussian noise on joined features, masked
//! aggregation of model updates, and authenticated encryption of embeddings.

mod aead;
mod keys;
mod masking;
mod noise;

pub use aead::{decode_f64s, encode_f64s, open_embeddings, seal_embeddings, Opener, Sealer, NONCE_LEN, TAG_LEN};
pub use keys::{Identity, KeyMaterial, PublicShare, KEY_LEN};
pub use masking::{dequantize, mask_update, quantize, unmask_sum, MaskedUpdate, FRAC_BITS};
pub use noise::{add_gaussian_noise, noise_metrics, normalize_standard, NoiseMetrics, NoiseSpec, NormStats};
