//! Speech enhancement toolkit: audio primitives, SNR-controlled mixing, the
//! Wiener and LogMMSE enhancers, a desk-scale SEGAN, and objective metrics.

pub mod audio;
pub mod enhancers;
pub mod metrics;
pub mod mixer;
pub mod segan;
pub mod synth;

pub use audio::AudioClip;
