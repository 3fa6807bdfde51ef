//! Watermarked generation: logit processors, sampling and the decode loop.

mod generate;
mod processor;
mod sampler;
mod scheme;

pub use generate::{generate, timed_generate, GenerationRecord, LogitSource};
pub use processor::{apply_hard, apply_scheme, apply_soft, scheme_green_list, LogitVector};
pub use sampler::{filtered_distribution, sample};
pub use scheme::{
    Family, Provenance, SamplerConfig, SchemeDocument, WatermarkScheme, DEFAULT_Z_THRESHOLD,
};

pub use scheme::hex_digest;
