use std::collections::BTreeMap;

use super::Tensor;

/// Per-parameter running mean of squared gradients.
pub type RmsState = BTreeMap<String, Tensor>;

/// One RMSProp update of every parameter that has a gradient:
/// `s <- decay*s + (1-decay)*g^2`, `p <- p - lr*g/sqrt(s + eps)`.
pub fn rmsprop_step(
    params: &mut BTreeMap<String, Tensor>,
    grads: &BTreeMap<String, Tensor>,
    state: &mut RmsState,
    lr: f64,
    decay: f64,
    eps: f64,
) {
    for (name, g) in grads {
        let Some(p) = params.get_mut(name) else { continue };
        let s = state
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.shape()));
        for ((pv, sv), &gv) in p.data_mut().iter_mut().zip(s.data_mut()).zip(g.data()) {
            *sv = decay * *sv + (1.0 - decay) * gv * gv;
            *pv -= lr * gv / (*sv + eps).sqrt();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    pub state: RmsState,
}

impl RmsProp {
    pub fn new(lr: f64, decay: f64, eps: f64) -> Self {
        Self {
            lr,
            decay,
            eps,
            state: RmsState::new(),
        }
    }

    pub fn step(&mut self, params: &mut BTreeMap<String, Tensor>, grads: &BTreeMap<String, Tensor>) {
        rmsprop_step(params, grads, &mut self.state, self.lr, self.decay, self.eps);
    }
}
