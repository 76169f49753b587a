//! Numerical DSP kernels shared by every stage.

pub mod fft;
pub mod iir;
pub mod stats;
pub mod welch;

pub use iir::{design_butterworth, design_lowpass, filtfilt, FilterKind, IirFilter, Sos};
pub use stats::{pearson, skewness};
pub use welch::{
    band_power, integrated_power, log_log_spectrum, welch_psd, ONE_OVER_F_BAND_HZ, Detrend, PsdEstimate, WelchParams, WelchPlan, Window,
};
