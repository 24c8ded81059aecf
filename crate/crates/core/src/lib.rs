#![no_std]
// Float math comes from `num_traits::Float` (libm). Once std is linked anywhere in a
// build, f64's inherent methods shadow it, so those imports carry `allow(unused_imports)`.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod audio;
pub mod convert;
pub mod dsp;
pub mod error;
pub mod fft;
pub mod keyed;
pub mod model;
pub mod strategy;
pub mod synth;
pub mod verify;
pub mod warp;

pub use audio::Utterance;
pub use error::{Error, Result};
