//! Deterministic signal processing shared by training and inference:
//! standard scaling, sliding windows, the 2D DFT feeding the frequency
//! path and the per-sensor statistics consumed by the decoder.

mod fft;
mod scaler;
mod stats;
mod window;

pub use fft::{dft2d, fft2d_magnitude, Spectrum};
pub use scaler::Scaler;
pub use stats::{engineer_decoder_features, fit_quadratic, DecoderFeatures, QuadFit, STAT_TOKENS};
pub use window::{sliding_windows, CbmSeries, Window};
