use crate::error::{Error, Result};
use crate::nn::layer::{Layer, LayerGrad};
use crate::nn::Gradients;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment estimates for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub(crate) first: Vec<LayerGrad>,
    pub(crate) second: Vec<LayerGrad>,
    pub(crate) step: u64,
}

impl AdamState {
    pub(crate) fn for_layers(layers: &[Layer]) -> Self {
        let zeros: Vec<LayerGrad> = layers.iter().map(Layer::zero_grad).collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> impl Iterator<Item = f64> + '_ {
        self.first
            .iter()
            .flat_map(|g| g.weights.iter().chain(&g.bias).copied())
    }

    pub(crate) fn apply(&mut self, layers: &mut [Layer], grads: &Gradients, lr: f64) -> Result<()> {
        if grads.layers.len() != layers.len() || self.first.len() != layers.len() {
            return Err(Error::shape(
                format!("{} layer gradients", layers.len()),
                format!("{}", grads.layers.len()),
            ));
        }
        for (i, (layer, g)) in layers.iter().zip(&grads.layers).enumerate() {
            let expected = layer.zero_grad();
            if expected.weights.len() != g.weights.len() || expected.bias.len() != g.bias.len() {
                return Err(Error::shape(
                    format!(
                        "layer {i}: {}+{}",
                        expected.weights.len(),
                        expected.bias.len()
                    ),
                    format!("{}+{}", g.weights.len(), g.bias.len()),
                ));
            }
            if !g.weights.iter().chain(&g.bias).all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of layer {i}")));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let correct1 = 1.0 - BETA1.powi(t);
        let correct2 = 1.0 - BETA2.powi(t);
        for (((layer, g), m), v) in layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let Some((w, b)) = layer.params_mut() else {
                continue;
            };
            update(
                w,
                &g.weights,
                &mut m.weights,
                &mut v.weights,
                lr,
                correct1,
                correct2,
            );
            update(b, &g.bias, &mut m.bias, &mut v.bias, lr, correct1, correct2);
        }
        Ok(())
    }
}

fn update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    correct1: f64,
    correct2: f64,
) {
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / correct1;
        let v_hat = *v / correct2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}
