use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{generator_forward, GanModel, LatentSample};
use super::{deemphasize, preemphasize, SeganError, Tensor};
use crate::audio::AudioClip;

/// Enhance `noisy` window by window. Windows do not overlap; the last one is
/// zero-padded and the padding trimmed. Each window gets its own latent draw
/// derived from `z_seed`.
pub fn segan_enhance(
    model: &GanModel,
    noisy: &AudioClip,
    window_len: usize,
    z_seed: u64,
) -> Result<AudioClip, SeganError> {
    if model.params.is_empty() {
        return Err(SeganError::UntrainedModel);
    }
    if window_len != model.arch.window_len {
        return Err(SeganError::ShapeMismatch(format!(
            "model was built for {}-sample windows, asked for {window_len}",
            model.arch.window_len
        )));
    }
    let x = match model.arch.preemphasis {
        Some(k) => preemphasize(noisy.samples(), k),
        None => noisy.samples().to_vec(),
    };
    let latent = model.arch.latent_shape(window_len);
    let mut seeds = ChaCha8Rng::seed_from_u64(z_seed);
    let mut out = Vec::with_capacity(x.len() + window_len);
    for chunk in x.chunks(window_len) {
        let mut w = chunk.to_vec();
        w.resize(window_len, 0.0);
        let z = LatentSample::draw(latent, seeds.random());
        let y = generator_forward(model, &Tensor::new(vec![1, window_len], w)?, &z)?;
        out.extend_from_slice(&y.data()[..chunk.len()]);
    }
    if let Some(k) = model.arch.preemphasis {
        out = deemphasize(&out, k);
    }
    Ok(noisy.with_samples(out)?)
}
