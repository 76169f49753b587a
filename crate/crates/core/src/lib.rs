#![no_std]
// Parameter checks are written `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dsp;
pub mod error;
pub mod model;
pub mod qa;
pub mod linalg;
pub mod channel_reject;
pub mod zapline;
pub mod ica;
pub mod dbscan;
pub mod mara;
pub mod epoch;
pub mod ml;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
