//! Green-list watermarking for token-level language models, with z-test
//! detection, strength calibration, and a benchmark harness that reports
//! detection (TP/TN) and generation quality (GM) side by side.

pub mod bench;
pub mod calibrate;
pub mod detect;
pub mod error;
pub mod greenlist;
pub mod judge;
pub mod manifest;
pub mod rng;
pub mod toy_lm;
pub mod wmgen;

pub use error::{Error, Result};
pub use greenlist::{TokenId, Vocabulary};
pub use manifest::RunManifest;
