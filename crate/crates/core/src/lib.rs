//! Micro-Doppler spectrogram reconstruction from irregularly sampled
//! channel impulse responses.
//!
//! The processing chain is:
//!
//! 1. [`signal`]: radio parameters, synthetic CIR streams, traffic traces.
//! 2. [`resample`]: slotted resampling onto a regular `T_c` grid and
//!    half-overlapping windowing.
//! 3. [`recovery`]: per-path Doppler spectrum recovery with iterative hard
//!    thresholding over a partial inverse DFT, plus the zero-filled STFT
//!    baseline.
//! 4. [`aggregate`]: path selection, multi-path aggregation, normalization,
//!    spectrogram assembly and RMSE scoring.
//!
//! [`injection`] schedules standalone sensing units when communication
//! traffic is too sparse and accounts for the resulting overhead.
//! [`pipeline`] wires everything together for the CLI and the C bindings.

pub mod aggregate;
pub mod error;
pub mod injection;
pub mod pipeline;
pub mod recovery;
pub mod resample;
pub mod signal;

pub use error::{Error, Result};
pub use num_complex::Complex64;
