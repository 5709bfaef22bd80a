use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::graph::{Tape, Var};
use super::{SeganError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvDirection {
    Strided,
    FractionalStrided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Prelu,
    LeakyRelu,
    Tanh,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub name: String,
    pub kernel_width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub direction: ConvDirection,
    pub activation: Activation,
}

impl ConvLayerSpec {
    pub fn weight_shape(&self) -> Vec<usize> {
        match self.direction {
            ConvDirection::Strided => vec![self.out_channels, self.in_channels, self.kernel_width],
            ConvDirection::FractionalStrided => {
                vec![self.in_channels, self.out_channels, self.kernel_width]
            }
        }
    }
}

/// Generator/discriminator layout. `encoder_channels[0]` is the waveform
/// channel count; each further entry adds one stride-2 encoder layer and a
/// mirrored decoder layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub window_len: usize,
    pub kernel_width: usize,
    pub encoder_channels: Vec<usize>,
    pub disc_channels: Vec<usize>,
    pub leaky_slope: f64,
    pub prelu_init: f64,
    pub preemphasis: Option<f64>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            window_len: 1024,
            kernel_width: 31,
            encoder_channels: vec![1, 16, 32, 32],
            disc_channels: vec![16, 32, 32],
            leaky_slope: 0.3,
            prelu_init: 0.25,
            preemphasis: Some(0.95),
        }
    }
}

impl Architecture {
    pub fn depth(&self) -> usize {
        self.encoder_channels.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<(), SeganError> {
        let bad = |m: String| Err(SeganError::InvalidConfig(m));
        if self.depth() == 0 || self.encoder_channels.iter().any(|&c| c == 0) {
            return bad("encoder needs at least two nonzero channel counts".into());
        }
        if self.encoder_channels[0] != 1 {
            return bad("the generator maps a single waveform channel".into());
        }
        if self.disc_channels.is_empty() || self.disc_channels.iter().any(|&c| c == 0) {
            return bad("discriminator needs at least one nonzero channel count".into());
        }
        if self.kernel_width % 2 == 0 {
            return bad(format!("kernel width {} must be odd", self.kernel_width));
        }
        let g = 1usize << self.depth();
        let d = 1usize << self.disc_channels.len();
        if self.window_len == 0 || self.window_len % g != 0 || self.window_len % d != 0 {
            return bad(format!(
                "window length {} must be divisible by {}",
                self.window_len,
                g.max(d)
            ));
        }
        if let Some(k) = self.preemphasis {
            if !(0.0..1.0).contains(&k) {
                return bad(format!("pre-emphasis {k} outside [0, 1)"));
            }
        }
        Ok(())
    }

    /// Shape of the thought vector (and of z) for a window of `len` samples.
    pub fn latent_shape(&self, len: usize) -> [usize; 2] {
        [self.encoder_channels[self.depth()], len >> self.depth()]
    }

    pub fn generator_layers(&self) -> Vec<ConvLayerSpec> {
        let ch = &self.encoder_channels;
        let depth = self.depth();
        let mut layers: Vec<ConvLayerSpec> = (0..depth)
            .map(|i| ConvLayerSpec {
                name: format!("g.enc{i}"),
                kernel_width: self.kernel_width,
                in_channels: ch[i],
                out_channels: ch[i + 1],
                stride: 2,
                direction: ConvDirection::Strided,
                activation: Activation::Prelu,
            })
            .collect();
        // Decoder input at each level: previous output (or c) plus the
        // same-sized skip (or z), hence twice the encoder width.
        for j in 0..depth {
            let level = depth - j;
            layers.push(ConvLayerSpec {
                name: format!("g.dec{j}"),
                kernel_width: self.kernel_width,
                in_channels: 2 * ch[level],
                out_channels: ch[level - 1],
                stride: 2,
                direction: ConvDirection::FractionalStrided,
                activation: if level == 1 {
                    Activation::Tanh
                } else {
                    Activation::Prelu
                },
            });
        }
        layers
    }

    pub fn discriminator_layers(&self) -> Vec<ConvLayerSpec> {
        let mut layers = Vec::new();
        let mut c_in = 2;
        for (i, &c) in self.disc_channels.iter().enumerate() {
            layers.push(ConvLayerSpec {
                name: format!("d.conv{i}"),
                kernel_width: self.kernel_width,
                in_channels: c_in,
                out_channels: c,
                stride: 2,
                direction: ConvDirection::Strided,
                activation: Activation::LeakyRelu,
            });
            c_in = c;
        }
        layers.push(ConvLayerSpec {
            name: "d.squeeze".into(),
            kernel_width: 1,
            in_channels: c_in,
            out_channels: 1,
            stride: 1,
            direction: ConvDirection::Strided,
            activation: Activation::Linear,
        });
        layers
    }

    /// Length of the discriminator's squeezed feature row.
    fn disc_feature_len(&self) -> usize {
        self.window_len >> self.disc_channels.len()
    }
}

/// Latent draw shaped like the thought vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub z: Tensor,
    pub rng_seed: u64,
}

impl LatentSample {
    pub fn draw(shape: [usize; 2], rng_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        Self {
            z: standard_normal(&shape, &mut rng),
            rng_seed,
        }
    }
}

pub(crate) fn standard_normal(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::from_parts(shape.to_vec(), data)
}

/// Generator and discriminator parameters plus their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub arch: Architecture,
    pub generator_layers: Vec<ConvLayerSpec>,
    pub discriminator_layers: Vec<ConvLayerSpec>,
    pub params: BTreeMap<String, Tensor>,
    pub lambda_l1: f64,
    pub seed: u64,
    pub training_steps: u64,
}

impl GanModel {
    /// Fresh model: Glorot-normal weights, zero biases, constant PReLU slopes.
    pub fn new(arch: Architecture, lambda_l1: f64, seed: u64) -> Result<Self, SeganError> {
        arch.validate()?;
        let generator_layers = arch.generator_layers();
        let discriminator_layers = arch.discriminator_layers();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = BTreeMap::new();
        for layer in generator_layers.iter().chain(&discriminator_layers) {
            let fan_in = layer.in_channels * layer.kernel_width;
            let fan_out = layer.out_channels * layer.kernel_width;
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let mut w = standard_normal(&layer.weight_shape(), &mut rng);
            w.data_mut().iter_mut().for_each(|v| *v *= std);
            params.insert(format!("{}.w", layer.name), w);
            params.insert(format!("{}.b", layer.name), Tensor::zeros(&[layer.out_channels]));
            if layer.activation == Activation::Prelu {
                params.insert(
                    format!("{}.prelu", layer.name),
                    Tensor::filled(&[layer.out_channels], arch.prelu_init),
                );
            }
        }
        let n = arch.disc_feature_len();
        let mut fc = standard_normal(&[1, n], &mut rng);
        let std = (2.0 / (n + 1) as f64).sqrt();
        fc.data_mut().iter_mut().for_each(|v| *v *= std);
        params.insert("d.fc.w".into(), fc);
        params.insert("d.fc.b".into(), Tensor::zeros(&[1]));
        Ok(Self {
            arch,
            generator_layers,
            discriminator_layers,
            params,
            lambda_l1,
            seed,
            training_steps: 0,
        })
    }

    /// Rebuild a model around existing parameters, checking every shape.
    pub fn from_params(
        arch: Architecture,
        params: BTreeMap<String, Tensor>,
        lambda_l1: f64,
        seed: u64,
        training_steps: u64,
    ) -> Result<Self, SeganError> {
        let template = Self::new(arch, lambda_l1, seed)?;
        if template.params.len() != params.len() {
            return Err(SeganError::ShapeMismatch(format!(
                "expected {} parameter tensors, got {}",
                template.params.len(),
                params.len()
            )));
        }
        for (name, t) in &template.params {
            match params.get(name) {
                Some(p) if p.shape() == t.shape() => {}
                Some(p) => {
                    return Err(SeganError::ShapeMismatch(format!(
                        "parameter {name}: expected {:?}, got {:?}",
                        t.shape(),
                        p.shape()
                    )))
                }
                None => return Err(SeganError::ShapeMismatch(format!("missing parameter {name}"))),
            }
        }
        Ok(Self {
            params,
            training_steps,
            ..template
        })
    }

    /// PReLU slope vector of each generator layer that has one.
    pub fn prelu_slopes(&self) -> Vec<(&str, &Tensor)> {
        self.params
            .iter()
            .filter(|(k, _)| k.ends_with(".prelu"))
            .map(|(k, v)| (k.as_str(), v))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Every parameter set to zero (slopes included).
    pub fn zeroed(&self) -> Self {
        let mut m = self.clone();
        m.params
            .values_mut()
            .for_each(|t| t.data_mut().iter_mut().for_each(|v| *v = 0.0));
        m
    }

    fn param(&self, name: &str) -> Result<&Tensor, SeganError> {
        self.params
            .get(name)
            .ok_or_else(|| SeganError::ShapeMismatch(format!("missing parameter {name}")))
    }

    fn layer(
        &self,
        tape: &mut Tape,
        spec: &ConvLayerSpec,
        x: Var,
        trainable: bool,
    ) -> Result<Var, SeganError> {
        let w = tape.param(&format!("{}.w", spec.name), self.param(&format!("{}.w", spec.name))?, trainable);
        let b = tape.param(&format!("{}.b", spec.name), self.param(&format!("{}.b", spec.name))?, trainable);
        let y = match spec.direction {
            ConvDirection::Strided => tape.conv_strided(x, w, b, spec.stride)?,
            ConvDirection::FractionalStrided => tape.conv_fractional(x, w, b, spec.stride)?,
        };
        match spec.activation {
            Activation::Prelu => {
                let name = format!("{}.prelu", spec.name);
                let a = tape.param(&name, self.param(&name)?, trainable);
                tape.prelu(y, a)
            }
            Activation::LeakyRelu => tape.leaky_relu(y, self.arch.leaky_slope),
            Activation::Tanh => tape.tanh(y),
            Activation::Linear => Ok(y),
        }
    }

    /// Record the generator on `tape`: `noisy` is `[1, L]`, `z` shaped like c.
    pub fn generator_graph(
        &self,
        tape: &mut Tape,
        noisy: Var,
        z: Var,
        trainable: bool,
    ) -> Result<Var, SeganError> {
        let depth = self.arch.depth();
        let len = tape.value(noisy).dims2()?.1;
        if len % (1 << depth) != 0 {
            return Err(SeganError::ShapeMismatch(format!(
                "input length {len} not divisible by {}",
                1 << depth
            )));
        }
        let mut skips = Vec::with_capacity(depth);
        let mut h = noisy;
        for spec in &self.generator_layers[..depth] {
            h = self.layer(tape, spec, h, trainable)?;
            skips.push(h);
        }
        if tape.value(z).shape() != tape.value(h).shape() {
            return Err(SeganError::ShapeMismatch(format!(
                "z shape {:?} differs from thought vector {:?}",
                tape.value(z).shape(),
                tape.value(h).shape()
            )));
        }
        h = tape.concat(h, z)?;
        for (j, spec) in self.generator_layers[depth..].iter().enumerate() {
            h = self.layer(tape, spec, h, trainable)?;
            let level = depth - j - 1;
            if level > 0 {
                h = tape.concat(h, skips[level - 1])?;
            }
        }
        Ok(h)
    }

    /// Record the discriminator on `signal` conditioned on `noisy`; returns a
    /// one-element linear score.
    pub fn discriminator_graph(
        &self,
        tape: &mut Tape,
        signal: Var,
        noisy: Var,
        trainable: bool,
    ) -> Result<Var, SeganError> {
        let mut h = tape.concat(signal, noisy)?;
        if tape.value(h).dims2()?.1 != self.arch.window_len {
            return Err(SeganError::ShapeMismatch(format!(
                "discriminator expects windows of {} samples",
                self.arch.window_len
            )));
        }
        for spec in &self.discriminator_layers {
            h = self.layer(tape, spec, h, trainable)?;
        }
        let w = tape.param("d.fc.w", self.param("d.fc.w")?, trainable);
        let b = tape.param("d.fc.b", self.param("d.fc.b")?, trainable);
        tape.dense(h, w, b)
    }
}

/// Run the generator on one `[1, L]` window.
pub fn generator_forward(
    model: &GanModel,
    noisy: &Tensor,
    z: &LatentSample,
) -> Result<Tensor, SeganError> {
    let mut tape = Tape::new();
    let x = tape.constant(noisy.clone());
    let zv = tape.constant(z.z.clone());
    let y = model.generator_graph(&mut tape, x, zv, false)?;
    Ok(tape.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_arch(window_len: usize) -> Architecture {
        Architecture {
            window_len,
            kernel_width: 5,
            encoder_channels: vec![1, 3, 4, 4],
            disc_channels: vec![3, 4],
            ..Architecture::default()
        }
    }

    fn noisy_row(len: usize, seed: u64) -> Tensor {
        let v = crate::synth::white_noise(len, 0.3, seed);
        Tensor::new(vec![1, len], v).unwrap()
    }

    #[test]
    fn default_layout() {
        let arch = Architecture::default();
        arch.validate().unwrap();
        let g = arch.generator_layers();
        assert_eq!(g.len(), 6);
        let io: Vec<(usize, usize)> = g.iter().map(|l| (l.in_channels, l.out_channels)).collect();
        assert_eq!(io, [(1, 16), (16, 32), (32, 32), (64, 32), (64, 16), (32, 1)]);
        assert!(g.iter().all(|l| l.stride == 2 && l.kernel_width == 31));
        assert_eq!(g[5].activation, Activation::Tanh);
        assert_eq!(arch.latent_shape(1024), [32, 128]);
        let d = arch.discriminator_layers();
        assert_eq!(d.len(), 4);
        assert_eq!((d[0].in_channels, d[3].out_channels), (2, 1));
    }

    #[test]
    fn invalid_layouts() {
        let mut a = Architecture::default();
        a.window_len = 1020;
        assert!(a.validate().is_err());
        let mut a = Architecture::default();
        a.kernel_width = 4;
        assert!(a.validate().is_err());
        let mut a = Architecture::default();
        a.encoder_channels = vec![1];
        assert!(a.validate().is_err());
    }

    #[test]
    fn output_shape_matches_input() {
        let m = GanModel::new(small_arch(64), 100.0, 1).unwrap();
        let z = LatentSample::draw(m.arch.latent_shape(64), 2);
        assert_eq!(z.z.shape(), [4, 8]);
        let y = generator_forward(&m, &noisy_row(64, 3), &z).unwrap();
        assert_eq!(y.shape(), [1, 64]);
        assert!(y.data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let m = GanModel::new(small_arch(64), 100.0, 1).unwrap().zeroed();
        let z = LatentSample::draw([4, 8], 2);
        let y = generator_forward(&m, &noisy_row(64, 3), &z).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let m = GanModel::new(small_arch(64), 100.0, 5).unwrap();
        let z = LatentSample::draw([4, 8], 6);
        let a = generator_forward(&m, &noisy_row(64, 3), &z).unwrap();
        let b = generator_forward(&m, &noisy_row(64, 3), &LatentSample::draw([4, 8], 6)).unwrap();
        assert_eq!(a, b);
        assert_eq!(m, GanModel::new(small_arch(64), 100.0, 5).unwrap());
    }

    #[test]
    fn shape_errors() {
        let m = GanModel::new(small_arch(64), 100.0, 1).unwrap();
        let z = LatentSample::draw([4, 8], 2);
        assert!(matches!(
            generator_forward(&m, &noisy_row(60, 1), &z),
            Err(SeganError::ShapeMismatch(_))
        ));
        let wrong_z = LatentSample::draw([4, 4], 2);
        assert!(generator_forward(&m, &noisy_row(64, 1), &wrong_z).is_err());
    }

    #[test]
    fn latent_is_standard_normal() {
        let z = LatentSample::draw([32, 2000], 11);
        let n = z.z.len() as f64;
        let mean = z.z.data().iter().sum::<f64>() / n;
        let var = z.z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 / n.sqrt());
        // var of the sample variance is 2/(n-1) for a standard normal
        assert!((var - 1.0).abs() < 3.0 * (2.0 / (n - 1.0)).sqrt());
    }

    #[test]
    fn output_stays_inside_open_interval() {
        for seed in 0..10 {
            let mut m = GanModel::new(small_arch(64), 100.0, seed).unwrap();
            m.params
                .values_mut()
                .for_each(|t| t.data_mut().iter_mut().for_each(|v| *v *= 2.0));
            let x = noisy_row(64, seed);
            let y = generator_forward(&m, &x, &LatentSample::draw([4, 8], seed)).unwrap();
            assert!(y.data().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn from_params_checks_shapes() {
        let m = GanModel::new(small_arch(64), 100.0, 1).unwrap();
        let rebuilt =
            GanModel::from_params(m.arch.clone(), m.params.clone(), 100.0, 1, 7).unwrap();
        assert_eq!(rebuilt.training_steps, 7);
        let mut p = m.params.clone();
        p.insert("d.fc.b".into(), Tensor::zeros(&[2]));
        assert!(GanModel::from_params(m.arch.clone(), p, 100.0, 1, 0).is_err());
        let mut p = m.params.clone();
        p.remove("g.enc0.w");
        assert!(GanModel::from_params(m.arch.clone(), p, 100.0, 1, 0).is_err());
        assert_eq!(m.prelu_slopes().len(), 5);
    }
}
