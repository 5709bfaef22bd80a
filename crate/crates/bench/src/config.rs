use std::collections::HashSet;
use std::path::{Path, PathBuf};

use sebench_core::enhancers::{EnhancerConfig, EnhancerKind};
use sebench_core::metrics::{PesqCommand, DEFAULT_PESQ_PATTERN, DEFAULT_SDR_FILTER_LEN};
use sebench_core::mixer::NoiseOffset;
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Environment variable that overrides `worker_count`.
pub const WORKERS_ENV: &str = "SEBENCH_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub clean_dir: PathBuf,
    pub noise_dir: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "default_snr_levels")]
    pub snr_levels_db: Vec<f64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<EnhancerConfig>,
    #[serde(default = "default_workers")]
    pub worker_count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesq_command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesq_pattern: Option<String>,
    /// Used by SEGAN entries that do not name their own checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segan_checkpoint: Option<PathBuf>,
    #[serde(default = "default_filter_len")]
    pub sdr_filter_len: usize,
    #[serde(default)]
    pub noise_offset: NoiseOffset,
}

fn default_snr_levels() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0, 20.0]
}

fn default_algorithms() -> Vec<EnhancerConfig> {
    vec![
        EnhancerConfig::new(EnhancerKind::Identity),
        EnhancerConfig::new(EnhancerKind::Wiener),
        EnhancerConfig::new(EnhancerKind::Logmmse),
    ]
}

fn default_workers() -> usize {
    1
}

fn default_filter_len() -> usize {
    DEFAULT_SDR_FILTER_LEN
}

impl BenchConfig {
    pub fn new(clean_dir: PathBuf, noise_dir: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            clean_dir,
            noise_dir,
            out_dir,
            snr_levels_db: default_snr_levels(),
            algorithms: default_algorithms(),
            worker_count: default_workers(),
            seed: 0,
            pesq_command: None,
            pesq_pattern: None,
            segan_checkpoint: None,
            sdr_filter_len: DEFAULT_SDR_FILTER_LEN,
            noise_offset: NoiseOffset::default(),
        }
    }

    /// Parse and validate a JSON config. Relative paths are taken relative
    /// to the file's directory; `SEBENCH_WORKERS` overrides `worker_count`.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg: BenchConfig = serde_json::from_str(&text)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply_env_override()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.clean_dir);
        fix(&mut self.noise_dir);
        fix(&mut self.out_dir);
        if let Some(p) = self.segan_checkpoint.as_mut() {
            fix(p);
        }
        for alg in &mut self.algorithms {
            if let Some(p) = alg.segan.checkpoint.as_mut() {
                fix(p);
            }
        }
    }

    pub fn apply_env_override(&mut self) -> Result<(), BenchError> {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            self.worker_count = v
                .trim()
                .parse()
                .map_err(|_| BenchError::Config(format!("{WORKERS_ENV}={v:?} is not a count")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.snr_levels_db.is_empty() {
            return bad("snr_levels_db is empty".into());
        }
        if self.snr_levels_db.iter().any(|s| !s.is_finite())
            || self.snr_levels_db.windows(2).any(|w| w[0] >= w[1])
        {
            return bad(format!(
                "snr_levels_db must be finite and strictly increasing, got {:?}",
                self.snr_levels_db
            ));
        }
        if self.worker_count == 0 {
            return bad("worker_count must be at least 1".into());
        }
        if self.sdr_filter_len == 0 {
            return bad("sdr_filter_len must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms configured".into());
        }
        let mut names = HashSet::new();
        for alg in &self.algorithms {
            let name = alg.name();
            if name.is_empty() || name.contains(['/', ',', '\\']) {
                return bad(format!("algorithm name {name:?} is not usable in file names"));
            }
            if !names.insert(name.clone()) {
                return bad(format!("algorithm name {name:?} used twice"));
            }
            alg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
            if alg.kind == EnhancerKind::Segan
                && alg.segan.checkpoint.is_none()
                && self.segan_checkpoint.is_none()
            {
                return bad(format!("SEGAN entry {name:?} has no checkpoint"));
            }
        }
        if self.pesq_pattern.is_some() && self.pesq_command.is_none() {
            return bad("pesq_pattern given without pesq_command".into());
        }
        Ok(())
    }

    pub fn pesq(&self) -> Option<PesqCommand> {
        self.pesq_command.as_ref().map(|c| PesqCommand {
            command: c.clone(),
            pattern: self
                .pesq_pattern
                .clone()
                .unwrap_or_else(|| DEFAULT_PESQ_PATTERN.to_string()),
        })
    }

    /// Algorithm configs with the shared SEGAN checkpoint filled in.
    pub fn resolved_algorithms(&self) -> Vec<EnhancerConfig> {
        self.algorithms
            .iter()
            .cloned()
            .map(|mut a| {
                if a.kind == EnhancerKind::Segan && a.segan.checkpoint.is_none() {
                    a.segan.checkpoint = self.segan_checkpoint.clone();
                }
                a
            })
            .collect()
    }
}
