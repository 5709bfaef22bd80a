use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::Tape;
use super::loss::GanBatchLoss;
use super::model::{standard_normal, GanModel};
use super::optim::RmsProp;
use super::{preemphasize, SeganError, Tensor};
use crate::audio::AudioClip;
use crate::mixer::{mix_at_snr, NoiseOffset};
use crate::synth;

/// Aligned clean and noisy windows of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Clamped to the dataset size.
    pub batch_size: usize,
    pub lr: f64,
    pub lambda_l1: f64,
    pub seed: u64,
    pub decay: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 20,
            lr: 2e-4,
            lambda_l1: 100.0,
            seed: 0,
            decay: 0.9,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SeganError> {
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.lr > 0.0
            && self.lambda_l1 >= 0.0
            && (0.0..1.0).contains(&self.decay)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SeganError::InvalidConfig(format!("bad training config {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GanModel,
    /// One entry per batch, in order.
    pub history: Vec<GanBatchLoss>,
}

impl TrainOutcome {
    /// Generator l1 of the very first batch.
    pub fn initial_l1(&self) -> f64 {
        self.history.first().map_or(f64::NAN, |l| l.g_l1_loss)
    }

    /// Mean generator l1 over the last `steps_per_epoch` batches.
    pub fn final_l1(&self, steps_per_epoch: usize) -> f64 {
        let n = steps_per_epoch.clamp(1, self.history.len().max(1));
        let tail = &self.history[self.history.len().saturating_sub(n)..];
        tail.iter().map(|l| l.g_l1_loss).sum::<f64>() / tail.len() as f64
    }
}

pub fn steps_per_epoch(dataset_len: usize, batch_size: usize) -> usize {
    dataset_len.div_ceil(batch_size.clamp(1, dataset_len.max(1)))
}

/// Seeded synthetic (speech-like + white noise) windows at SNRs drawn from
/// `[snr_lo, snr_hi]` dB.
pub fn toy_dataset(
    count: usize,
    window_len: usize,
    snr_range_db: (f64, f64),
    seed: u64,
) -> Result<Vec<TrainingWindow>, SeganError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let amp = rng.random_range(0.3..0.8);
        let clean = synth::speech_like(window_len, 16000, amp, 0.0, rng.random());
        if clean.iter().all(|&v| v == 0.0) {
            continue;
        }
        let noise = synth::white_noise(window_len, 1.0, rng.random());
        let snr = if snr_range_db.0 < snr_range_db.1 {
            rng.random_range(snr_range_db.0..=snr_range_db.1)
        } else {
            snr_range_db.0
        };
        let clean_clip = AudioClip::new(clean, 16000)?;
        let noise_clip = AudioClip::new(noise, 16000)?;
        let (noisy, _) = mix_at_snr(&clean_clip, &noise_clip, snr, 0, NoiseOffset::Zero)
            .map_err(|e| SeganError::InvalidConfig(e.to_string()))?;
        out.push(TrainingWindow {
            clean: clean_clip.into_samples(),
            noisy: noisy.into_samples(),
        });
    }
    Ok(out)
}

/// Alternate one discriminator step and one generator step per batch.
pub fn train(
    mut model: GanModel,
    dataset: &[TrainingWindow],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, SeganError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(SeganError::EmptyDataset);
    }
    let len = model.arch.window_len;
    let to_row = |v: &[f64]| -> Result<Tensor, SeganError> {
        if v.len() != len {
            return Err(SeganError::ShapeMismatch(format!(
                "training window of {} samples, model expects {len}",
                v.len()
            )));
        }
        let v = match model.arch.preemphasis {
            Some(k) => preemphasize(v, k),
            None => v.to_vec(),
        };
        Tensor::new(vec![1, len], v)
    };
    let windows: Vec<(Tensor, Tensor)> = dataset
        .iter()
        .map(|w| Ok((to_row(&w.clean)?, to_row(&w.noisy)?)))
        .collect::<Result<_, SeganError>>()?;

    model.lambda_l1 = cfg.lambda_l1;
    let batch = cfg.batch_size.min(windows.len());
    let latent = model.arch.latent_shape(len);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt_d = RmsProp::new(cfg.lr, cfg.decay, cfg.eps);
    let mut opt_g = RmsProp::new(cfg.lr, cfg.decay, cfg.eps);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs * steps_per_epoch(windows.len(), batch));

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let zs: Vec<Tensor> = chunk
                .iter()
                .map(|_| standard_normal(&latent, &mut rng))
                .collect();
            let loss = train_step(&mut model, &windows, chunk, &zs, &mut opt_d, &mut opt_g)?;
            if !loss.is_finite() {
                return Err(SeganError::NonFinite);
            }
            history.push(loss);
            model.training_steps += 1;
        }
    }
    Ok(TrainOutcome { model, history })
}

fn train_step(
    model: &mut GanModel,
    windows: &[(Tensor, Tensor)],
    chunk: &[usize],
    zs: &[Tensor],
    opt_d: &mut RmsProp,
    opt_g: &mut RmsProp,
) -> Result<GanBatchLoss, SeganError> {
    // Generator forward, kept for the generator step.
    let mut g_tape = Tape::new();
    let mut fakes = Vec::with_capacity(chunk.len());
    let mut noisy_vars = Vec::with_capacity(chunk.len());
    let mut clean_vars = Vec::with_capacity(chunk.len());
    for (&i, z) in chunk.iter().zip(zs) {
        let noisy = g_tape.constant(windows[i].1.clone());
        let z = g_tape.constant(z.clone());
        fakes.push(model.generator_graph(&mut g_tape, noisy, z, true)?);
        noisy_vars.push(noisy);
        clean_vars.push(g_tape.constant(windows[i].0.clone()));
    }

    // Discriminator step on generated windows taken as constants.
    let mut d_tape = Tape::new();
    let mut real_scores = Vec::with_capacity(chunk.len());
    let mut fake_scores = Vec::with_capacity(chunk.len());
    for (k, &i) in chunk.iter().enumerate() {
        let noisy = d_tape.constant(windows[i].1.clone());
        let clean = d_tape.constant(windows[i].0.clone());
        let fake = d_tape.constant(g_tape.value(fakes[k]).clone());
        real_scores.push(model.discriminator_graph(&mut d_tape, clean, noisy, true)?);
        fake_scores.push(model.discriminator_graph(&mut d_tape, fake, noisy, true)?);
    }
    let real = d_tape.stack(&real_scores)?;
    let fake = d_tape.stack(&fake_scores)?;
    let d_loss_var = d_tape.lsgan_d(real, fake)?;
    let d_loss = d_tape.value(d_loss_var).data()[0];
    let d_grads = d_tape.backward(d_loss_var)?;
    opt_d.step(&mut model.params, &d_grads.params);

    // Generator step against the updated discriminator.
    let mut scores = Vec::with_capacity(chunk.len());
    for k in 0..chunk.len() {
        scores.push(model.discriminator_graph(&mut g_tape, fakes[k], noisy_vars[k], false)?);
    }
    let d_fake = g_tape.stack(&scores)?;
    let adv = g_tape.lsgan_g(d_fake)?;
    let generated = g_tape.stack(&fakes)?;
    let clean = g_tape.stack(&clean_vars)?;
    let l1 = g_tape.l1(generated, clean)?;
    let weighted = g_tape.scale(l1, model.lambda_l1)?;
    let total = g_tape.add(adv, weighted)?;
    let g_adv_loss = g_tape.value(adv).data()[0];
    let g_l1_loss = g_tape.value(l1).data()[0];
    let g_grads = g_tape.backward(total)?;
    opt_g.step(&mut model.params, &g_grads.params);

    Ok(GanBatchLoss {
        d_loss,
        g_adv_loss,
        g_l1_loss,
        lambda_l1: model.lambda_l1,
    })
}
