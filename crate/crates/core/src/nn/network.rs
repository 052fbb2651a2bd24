use std::hash::{DefaultHasher, Hasher};

use rand::Rng;

use crate::error::{Error, Result, Shape};
use crate::nn::adam::AdamState;
use crate::nn::layer::{Layer, LayerGrad, LayerSpec};

/// Parameter gradients for a whole network, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights
                .iter_mut()
                .chain(g.bias.iter_mut())
                .for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    /// Flattened in the same order as [`Network::params`].
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(&g.bias).copied())
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|v| v == 0.0)
    }
}

/// An ordered stack of layers with its own Adam state.
///
/// `forward` caches every intermediate activation so that `backward` can run
/// afterwards; `predict` is the cache-free path used for frozen networks.
#[derive(Debug, Clone)]
pub struct Network {
    input_shape: Shape,
    shapes: Vec<Shape>,
    layers: Vec<Layer>,
    adam: AdamState,
    cache: Option<Vec<Vec<f64>>>,
}

impl Network {
    pub fn new(input_shape: Shape, specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidSpec(
                "network needs at least one layer".into(),
            ));
        }
        if !matches!(specs[0], LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. }) {
            return Err(Error::InvalidSpec(
                "first layer must be dense or conv2d".into(),
            ));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input_shape;
        for &spec in specs {
            let layer = Layer::build(spec, shape, rng)?;
            shape = spec.output_shape(shape)?;
            layers.push(layer);
        }
        Self::from_layers(input_shape, layers)
    }

    pub(crate) fn from_layers(input_shape: Shape, layers: Vec<Layer>) -> Result<Self> {
        let mut shapes = Vec::with_capacity(layers.len() + 1);
        let mut shape = input_shape;
        shapes.push(shape);
        for layer in &layers {
            shape = layer.spec().output_shape(shape)?;
            shapes.push(shape);
        }
        let adam = AdamState::for_layers(&layers);
        Ok(Network {
            input_shape,
            shapes,
            layers,
            adam,
            cache: None,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.len()
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().map_or(0, Shape::len)
    }

    /// Shape after each layer, starting with the input.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::shape(self.input_shape, Shape::Flat(input.len())));
        }
        Ok(())
    }

    pub fn forward(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let next = layer.forward(acts.last().expect("non-empty"));
            acts.push(next);
        }
        let out = acts.last().expect("non-empty").clone();
        self.cache = Some(acts);
        Ok(out)
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = layer.forward(&x);
        }
        Ok(x)
    }

    /// Backpropagates `grad_out` (dLoss/dOutput) through the cached forward
    /// pass, returning parameter gradients and dLoss/dInput.
    pub fn backward(&self, grad_out: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = self.zero_grads();
        let grad_in = self.backward_into(grad_out, Some(&mut grads))?;
        Ok((grads, grad_in))
    }

    /// Like [`Network::backward`] but accumulates into `acc` (or skips
    /// parameter gradients entirely when `acc` is `None`).
    pub fn backward_into(
        &self,
        grad_out: &[f64],
        mut acc: Option<&mut Gradients>,
    ) -> Result<Vec<f64>> {
        let acts = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        if grad_out.len() != self.output_len() {
            return Err(Error::shape(
                Shape::Flat(self.output_len()),
                Shape::Flat(grad_out.len()),
            ));
        }
        let mut g = grad_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let layer_acc = acc.as_deref_mut().map(|a| &mut a.layers[i]);
            g = layer.backward(&acts[i], &acts[i + 1], &g, layer_acc);
        }
        Ok(g)
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(Layer::zero_grad).collect(),
        }
    }

    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        self.adam.apply(&mut self.layers, grads, lr)
    }

    /// Adam step driven by an externally owned moment set. Used where two
    /// optimizers update the same parameters (shared conv trunk).
    pub fn adam_step_with(
        &mut self,
        state: &mut AdamState,
        grads: &Gradients,
        lr: f64,
    ) -> Result<()> {
        state.apply(&mut self.layers, grads, lr)
    }

    pub fn fresh_adam_state(&self) -> AdamState {
        AdamState::for_layers(&self.layers)
    }

    /// Parameter-only deep copy: fresh Adam state, no forward cache.
    pub fn clone_into_target(&self) -> Network {
        Network {
            input_shape: self.input_shape,
            shapes: self.shapes.clone(),
            layers: self.layers.clone(),
            adam: AdamState::for_layers(&self.layers),
            cache: None,
        }
    }

    /// Overwrites parameters with those of an identically shaped network.
    pub fn copy_params_from(&mut self, other: &Network) -> Result<()> {
        if self.specs() != other.specs() || self.input_shape != other.input_shape {
            return Err(Error::State(
                "copy between differently shaped networks".into(),
            ));
        }
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some((dw, db)), Some((sw, sb))) = (dst.params_mut(), src.params()) {
                dw.copy_from_slice(sw);
                db.copy_from_slice(sb);
            }
        }
        self.cache = None;
        Ok(())
    }

    /// Weights then bias, layer by layer.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.cache = None;
        self.layers
            .iter_mut()
            .filter_map(Layer::params_mut)
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    /// Hash of the exact parameter bits; equal hashes mean synchronized copies.
    pub fn param_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in self.params() {
            h.write_u64(p.to_bits());
        }
        h.finish()
    }

    /// Bias vector of the last parameterised layer.
    pub fn output_bias_mut(&mut self) -> Option<&mut [f64]> {
        self.layers
            .iter_mut()
            .rev()
            .find_map(Layer::params_mut)
            .map(|(_, b)| b)
    }

    /// Mutable access to the weights and bias of layer `index`, for
    /// hand-built networks in tests and demos.
    pub fn layer_params_mut(&mut self, index: usize) -> Option<(&mut [f64], &mut [f64])> {
        self.cache = None;
        self.layers.get_mut(index)?.params_mut()
    }
}

/// Closed-form parameter count: sum of `in*out + out` over dense layers and
/// `k*k*c_in*c_out + c_out` over conv layers.
pub fn closed_form_param_count(specs: &[LayerSpec]) -> usize {
    specs
        .iter()
        .map(|s| match *s {
            LayerSpec::Dense {
                in_units,
                out_units,
            } => in_units * out_units + out_units,
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => kernel * kernel * in_channels * out_channels + out_channels,
            _ => 0,
        })
        .sum()
}
