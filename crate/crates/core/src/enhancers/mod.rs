//! The classical enhancers (local Wiener filter, LogMMSE) and the common
//! [`Enhancer`] interface shared with SEGAN inference.

mod expint;
mod logmmse;
mod wiener;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, AudioError};
use crate::segan::{self, GanModel, SeganError};

pub use expint::exp_int_e1;
pub use logmmse::{logmmse, lsa_gain, lsa_gain_unclamped, LogMmseParams, LOGMMSE_SAMPLE_RATE};
pub use wiener::wiener_filter;

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("invalid Wiener window {window} for a signal of {len} samples (must be odd, >= 3)")]
    InvalidWindow { window: usize, len: usize },
    #[error("invalid enhancer configuration: {0}")]
    InvalidConfig(String),
    #[error("signal too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("unsupported sample rate {got} Hz (expected {expected} Hz)")]
    UnsupportedRate { got: u32, expected: u32 },
    #[error("enhancer changed the signal length from {input} to {output}")]
    LengthChanged { input: usize, output: usize },
    #[error(transparent)]
    Segan(#[from] SeganError),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnhancerKind {
    Identity,
    Wiener,
    Logmmse,
    Segan,
}

impl EnhancerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnhancerKind::Identity => "identity",
            EnhancerKind::Wiener => "wiener",
            EnhancerKind::Logmmse => "logmmse",
            EnhancerKind::Segan => "segan",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeganParams {
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancerConfig {
    pub kind: EnhancerKind,
    /// Name used in reports; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default = "default_wiener_window")]
    pub wiener_window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wiener_noise_power: Option<f64>,
    #[serde(default)]
    pub logmmse: LogMmseParams,
    #[serde(default)]
    pub segan: SeganParams,
}

fn default_wiener_window() -> usize {
    3
}

impl EnhancerConfig {
    pub fn new(kind: EnhancerKind) -> Self {
        Self {
            kind,
            label: None,
            wiener_window: default_wiener_window(),
            wiener_noise_power: None,
            logmmse: LogMmseParams::default(),
            segan: SeganParams::default(),
        }
    }

    pub fn name(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.kind.as_str().to_string())
    }

    pub fn validate(&self) -> Result<(), EnhanceError> {
        match self.kind {
            EnhancerKind::Wiener if self.wiener_window < 3 || self.wiener_window % 2 == 0 => {
                Err(EnhanceError::InvalidConfig(format!(
                    "wiener_window must be odd and >= 3, got {}",
                    self.wiener_window
                )))
            }
            EnhancerKind::Logmmse => self.logmmse.validate(),
            _ => Ok(()),
        }
    }
}

/// A length-preserving, deterministic enhancement algorithm. `seed` feeds any
/// stochastic input (SEGAN's latent); classical methods ignore it.
pub trait Enhancer: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> EnhancerKind;
    fn process(&self, noisy: &AudioClip, seed: u64) -> Result<AudioClip, EnhanceError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementResult {
    pub enhanced: AudioClip,
    pub algorithm: EnhancerKind,
    pub runtime_seconds: f64,
}

struct Identity {
    name: String,
}

impl Enhancer for Identity {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> EnhancerKind {
        EnhancerKind::Identity
    }
    fn process(&self, noisy: &AudioClip, _seed: u64) -> Result<AudioClip, EnhanceError> {
        Ok(noisy.clone())
    }
}

struct Wiener {
    name: String,
    window: usize,
    noise_power: Option<f64>,
}

impl Enhancer for Wiener {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> EnhancerKind {
        EnhancerKind::Wiener
    }
    fn process(&self, noisy: &AudioClip, _seed: u64) -> Result<AudioClip, EnhanceError> {
        wiener_filter(noisy, self.window, self.noise_power)
    }
}

struct LogMmse {
    name: String,
    params: LogMmseParams,
}

impl Enhancer for LogMmse {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> EnhancerKind {
        EnhancerKind::Logmmse
    }
    fn process(&self, noisy: &AudioClip, _seed: u64) -> Result<AudioClip, EnhanceError> {
        logmmse(noisy, &self.params)
    }
}

/// SEGAN inference over non-overlapping windows.
pub struct SeganEnhancer {
    name: String,
    model: Arc<GanModel>,
}

impl SeganEnhancer {
    pub fn new(name: impl Into<String>, model: Arc<GanModel>) -> Self {
        Self {
            name: name.into(),
            model,
        }
    }
}

impl Enhancer for SeganEnhancer {
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> EnhancerKind {
        EnhancerKind::Segan
    }
    fn process(&self, noisy: &AudioClip, seed: u64) -> Result<AudioClip, EnhanceError> {
        let window_len = self.model.arch.window_len;
        Ok(segan::segan_enhance(&self.model, noisy, window_len, seed)?)
    }
}

/// Instantiate the configured algorithm. SEGAN configs load their checkpoint
/// unless `model` is supplied.
pub fn build_enhancer(
    cfg: &EnhancerConfig,
    model: Option<Arc<GanModel>>,
) -> Result<Box<dyn Enhancer>, EnhanceError> {
    cfg.validate()?;
    let name = cfg.name();
    Ok(match cfg.kind {
        EnhancerKind::Identity => Box::new(Identity { name }),
        EnhancerKind::Wiener => Box::new(Wiener {
            name,
            window: cfg.wiener_window,
            noise_power: cfg.wiener_noise_power,
        }),
        EnhancerKind::Logmmse => Box::new(LogMmse {
            name,
            params: cfg.logmmse.clone(),
        }),
        EnhancerKind::Segan => {
            let model = match (model, &cfg.segan.checkpoint) {
                (Some(m), _) => m,
                (None, Some(path)) => Arc::new(segan::load_checkpoint(path)?),
                (None, None) => return Err(SeganError::UntrainedModel.into()),
            };
            Box::new(SeganEnhancer::new(name, model))
        }
    })
}

/// Run an enhancer, timing it and checking the length contract.
pub fn run_enhancer(
    noisy: &AudioClip,
    enhancer: &dyn Enhancer,
    seed: u64,
) -> Result<EnhancementResult, EnhanceError> {
    let started = Instant::now();
    let enhanced = enhancer.process(noisy, seed)?;
    let runtime_seconds = started.elapsed().as_secs_f64();
    if enhanced.len() != noisy.len() {
        return Err(EnhanceError::LengthChanged {
            input: noisy.len(),
            output: enhanced.len(),
        });
    }
    Ok(EnhancementResult {
        enhanced,
        algorithm: enhancer.kind(),
        runtime_seconds,
    })
}

/// Build the configured enhancer and run it once with seed 0.
pub fn enhance(noisy: &AudioClip, cfg: &EnhancerConfig) -> Result<EnhancementResult, EnhanceError> {
    let enhancer = build_enhancer(cfg, None)?;
    run_enhancer(noisy, enhancer.as_ref(), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn identity_returns_input() {
        let noisy = AudioClip::new(synth::white_noise(500, 0.3, 1), 16000).unwrap();
        let r = enhance(&noisy, &EnhancerConfig::new(EnhancerKind::Identity)).unwrap();
        assert_eq!(r.enhanced, noisy);
        assert_eq!(r.algorithm, EnhancerKind::Identity);
        assert!(r.runtime_seconds >= 0.0);
    }

    #[test]
    fn wiener_on_constant_clip() {
        let c = AudioClip::new(vec![0.25; 100], 16000).unwrap();
        let r = enhance(&c, &EnhancerConfig::new(EnhancerKind::Wiener)).unwrap();
        assert!(r.enhanced.samples()[1..99]
            .iter()
            .all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn segan_without_model_is_untrained() {
        let c = AudioClip::new(vec![0.0; 100], 16000).unwrap();
        let err = enhance(&c, &EnhancerConfig::new(EnhancerKind::Segan)).unwrap_err();
        assert!(matches!(err, EnhanceError::Segan(SeganError::UntrainedModel)));
    }

    #[test]
    fn config_json_defaults() {
        let cfg: EnhancerConfig = serde_json::from_str(r#"{"kind":"logmmse"}"#).unwrap();
        assert_eq!(cfg, EnhancerConfig::new(EnhancerKind::Logmmse));
        let cfg: EnhancerConfig =
            serde_json::from_str(r#"{"kind":"wiener","wiener_window":4}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: EnhancerConfig =
            serde_json::from_str(r#"{"kind":"logmmse","label":"lm","logmmse":{"alpha_dd":0.9}}"#)
                .unwrap();
        assert_eq!(cfg.name(), "lm");
        assert_eq!(cfg.logmmse.alpha_dd, 0.9);
        assert_eq!(cfg.logmmse.noise_init_frames, 6);
    }
}
