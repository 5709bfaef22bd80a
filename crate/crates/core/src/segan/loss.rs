//! Scalar objectives over discriminator outputs. The tape records the same
//! values and supplies their gradients.

use serde::{Deserialize, Serialize};

use super::{SeganError, Tensor};

/// Discriminator and generator terms for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanBatchLoss {
    pub d_loss: f64,
    pub g_adv_loss: f64,
    pub g_l1_loss: f64,
    pub lambda_l1: f64,
}

impl GanBatchLoss {
    pub fn g_total(&self) -> f64 {
        self.g_adv_loss + self.lambda_l1 * self.g_l1_loss
    }

    pub fn is_finite(&self) -> bool {
        self.d_loss.is_finite()
            && self.g_adv_loss.is_finite()
            && self.g_l1_loss.is_finite()
            && self.lambda_l1.is_finite()
    }
}

fn mean(it: impl Iterator<Item = f64>, n: usize) -> f64 {
    it.sum::<f64>() / n as f64
}

fn check_probabilities(d: &Tensor) -> Result<(), SeganError> {
    match d.data().iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        Some(v) => Err(SeganError::DomainError(format!(
            "discriminator output {v} outside (0, 1)"
        ))),
        None => Ok(()),
    }
}

/// `mean(log d_real) + mean(log(1 - d_fake))` for sigmoid-headed outputs.
pub fn loss_gan(d_real: &Tensor, d_fake: &Tensor) -> Result<f64, SeganError> {
    check_probabilities(d_real)?;
    check_probabilities(d_fake)?;
    Ok(mean(d_real.data().iter().map(|v| v.ln()), d_real.len())
        + mean(d_fake.data().iter().map(|v| (1.0 - v).ln()), d_fake.len()))
}

/// Conditional value function. Conditioning enters through the
/// discriminator's input, so on its outputs the value has the same form.
pub fn loss_cgan(d_real: &Tensor, d_fake: &Tensor) -> Result<f64, SeganError> {
    loss_gan(d_real, d_fake)
}

/// `0.5 mean((d_real - 1)^2) + 0.5 mean(d_fake^2)`.
pub fn loss_lsgan_d(d_real: &Tensor, d_fake: &Tensor) -> f64 {
    0.5 * mean(d_real.data().iter().map(|v| (v - 1.0).powi(2)), d_real.len())
        + 0.5 * mean(d_fake.data().iter().map(|v| v * v), d_fake.len())
}

/// `0.5 mean((d_fake - 1)^2)`.
pub fn loss_lsgan_g(d_fake: &Tensor) -> f64 {
    0.5 * mean(d_fake.data().iter().map(|v| (v - 1.0).powi(2)), d_fake.len())
}

pub(crate) fn l1_mean(a: &Tensor, b: &Tensor) -> f64 {
    mean(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()), a.len())
}

/// Generator terms of the SEGAN objective. `d_loss` is left at 0; the
/// training loop fills it from the discriminator step.
pub fn loss_segan_g(
    d_fake: &Tensor,
    generated: &Tensor,
    clean: &Tensor,
    lambda_l1: f64,
) -> Result<GanBatchLoss, SeganError> {
    if generated.len() != clean.len() {
        return Err(SeganError::ShapeMismatch(format!(
            "generated has {} values, clean has {}",
            generated.len(),
            clean.len()
        )));
    }
    Ok(GanBatchLoss {
        d_loss: 0.0,
        g_adv_loss: loss_lsgan_g(d_fake),
        g_l1_loss: l1_mean(generated, clean),
        lambda_l1,
    })
}
