use rand::Rng;

use crate::error::{Error, Result, Shape};
use crate::nn::init::{glorot_uniform, glorot_uniform_n};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        in_units: usize,
        out_units: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    Sigmoid,
    Tanh,
    Linear,
}

impl LayerSpec {
    pub fn dense(in_units: usize, out_units: usize) -> Self {
        LayerSpec::Dense {
            in_units,
            out_units,
        }
    }

    pub fn conv2d(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
        }
    }

    /// Output shape for the given input shape, or an error if the layer cannot
    /// consume it. Dense layers flatten images implicitly.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match *self {
            LayerSpec::Dense {
                in_units,
                out_units,
            } => {
                if in_units == 0 || out_units == 0 {
                    return Err(Error::InvalidSpec(format!(
                        "dense layer needs at least one unit, got {in_units}->{out_units}"
                    )));
                }
                if input.len() != in_units {
                    return Err(Error::shape(Shape::Flat(in_units), input));
                }
                Ok(Shape::Flat(out_units))
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::InvalidSpec(format!(
                        "conv2d fields must be >= 1, got in={in_channels} out={out_channels} k={kernel} s={stride}"
                    )));
                }
                let side = match input {
                    Shape::Image { channels, side } if channels == in_channels => side,
                    other => {
                        return Err(Error::Shape {
                            expected: format!("[{in_channels}xNxN]"),
                            actual: other.to_string(),
                        })
                    }
                };
                if side < kernel {
                    return Err(Error::InvalidSpec(format!(
                        "conv2d kernel {kernel} larger than input side {side}"
                    )));
                }
                Ok(Shape::Image {
                    channels: out_channels,
                    side: conv_out_side(side, kernel, stride),
                })
            }
            LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Tanh | LayerSpec::Linear => Ok(input),
        }
    }
}

/// Valid-padding output side: floor((side - kernel) / stride) + 1.
pub fn conv_out_side(side: usize, kernel: usize, stride: usize) -> usize {
    (side - kernel) / stride + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub(crate) in_units: usize,
    pub(crate) out_units: usize,
    /// Row-major `[out][in]`.
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub(crate) in_channels: usize,
    pub(crate) out_channels: usize,
    pub(crate) kernel: usize,
    pub(crate) stride: usize,
    pub(crate) in_side: usize,
    pub(crate) out_side: usize,
    /// Row-major `[out_channel][in_channel][ky][kx]`.
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    Activation(Activation),
}

/// Per-layer parameter gradient, laid out exactly like the layer's parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub(crate) fn build(spec: LayerSpec, input: Shape, rng: &mut impl Rng) -> Result<Layer> {
        let out = spec.output_shape(input)?;
        Ok(match spec {
            LayerSpec::Dense {
                in_units,
                out_units,
            } => Layer::Dense(Dense {
                in_units,
                out_units,
                weights: glorot_uniform(in_units, out_units, rng)?,
                bias: vec![0.0; out_units],
            }),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let Shape::Image { side: in_side, .. } = input else {
                    unreachable!("validated by output_shape")
                };
                let Shape::Image { side: out_side, .. } = out else {
                    unreachable!("validated by output_shape")
                };
                let area = kernel * kernel;
                Layer::Conv2d(Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    in_side,
                    out_side,
                    weights: glorot_uniform_n(
                        in_channels * out_channels * area,
                        in_channels * area,
                        out_channels * area,
                        rng,
                    )?,
                    bias: vec![0.0; out_channels],
                })
            }
            LayerSpec::Relu => Layer::Activation(Activation::Relu),
            LayerSpec::Sigmoid => Layer::Activation(Activation::Sigmoid),
            LayerSpec::Tanh => Layer::Activation(Activation::Tanh),
            LayerSpec::Linear => Layer::Activation(Activation::Linear),
        })
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::dense(d.in_units, d.out_units),
            Layer::Conv2d(c) => {
                LayerSpec::conv2d(c.in_channels, c.out_channels, c.kernel, c.stride)
            }
            Layer::Activation(Activation::Relu) => LayerSpec::Relu,
            Layer::Activation(Activation::Sigmoid) => LayerSpec::Sigmoid,
            Layer::Activation(Activation::Tanh) => LayerSpec::Tanh,
            Layer::Activation(Activation::Linear) => LayerSpec::Linear,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense(d) => d.weights.len() + d.bias.len(),
            Layer::Conv2d(c) => c.weights.len() + c.bias.len(),
            Layer::Activation(_) => 0,
        }
    }

    pub(crate) fn params(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Dense(d) => Some((&d.weights, &d.bias)),
            Layer::Conv2d(c) => Some((&c.weights, &c.bias)),
            Layer::Activation(_) => None,
        }
    }

    pub(crate) fn params_mut(&mut self) -> Option<(&mut [f64], &mut [f64])> {
        match self {
            Layer::Dense(d) => Some((&mut d.weights, &mut d.bias)),
            Layer::Conv2d(c) => Some((&mut c.weights, &mut c.bias)),
            Layer::Activation(_) => None,
        }
    }

    pub(crate) fn zero_grad(&self) -> LayerGrad {
        match self.params() {
            Some((w, b)) => LayerGrad {
                weights: vec![0.0; w.len()],
                bias: vec![0.0; b.len()],
            },
            None => LayerGrad::default(),
        }
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Layer::Dense(d) => d.forward(x),
            Layer::Conv2d(c) => c.forward(x),
            Layer::Activation(a) => x.iter().map(|&v| a.apply(v)).collect(),
        }
    }

    /// Propagates `grad_out` back through the layer. Parameter gradients are
    /// added into `acc` when given; returns the gradient w.r.t. the input.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        y: &[f64],
        grad_out: &[f64],
        acc: Option<&mut LayerGrad>,
    ) -> Vec<f64> {
        match self {
            Layer::Dense(d) => d.backward(x, grad_out, acc),
            Layer::Conv2d(c) => c.backward(x, grad_out, acc),
            Layer::Activation(a) => x
                .iter()
                .zip(y)
                .zip(grad_out)
                .map(|((&xi, &yi), &g)| g * a.derivative(xi, yi))
                .collect(),
        }
    }
}

impl Dense {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_units)
            .zip(&self.bias)
            .map(|(row, &b)| b + dot(row, x))
            .collect()
    }

    fn backward(&self, x: &[f64], grad_out: &[f64], acc: Option<&mut LayerGrad>) -> Vec<f64> {
        if let Some(acc) = acc {
            for ((grow, &g), gb) in acc
                .weights
                .chunks_exact_mut(self.in_units)
                .zip(grad_out)
                .zip(acc.bias.iter_mut())
            {
                *gb += g;
                if g != 0.0 {
                    for (gw, &xi) in grow.iter_mut().zip(x) {
                        *gw += g * xi;
                    }
                }
            }
        }
        let mut grad_in = vec![0.0; self.in_units];
        for (row, &g) in self.weights.chunks_exact(self.in_units).zip(grad_out) {
            if g != 0.0 {
                for (gi, &w) in grad_in.iter_mut().zip(row) {
                    *gi += g * w;
                }
            }
        }
        grad_in
    }
}

impl Conv2d {
    /// Receptive fields as rows: `patches[p]` holds the `in_channels * k * k`
    /// inputs under output position `p`, in weight order.
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let (k, s, side, os) = (self.kernel, self.stride, self.in_side, self.out_side);
        let plane = side * side;
        let mut patches = Vec::with_capacity(os * os * self.in_channels * k * k);
        for oy in 0..os {
            for ox in 0..os {
                for ic in 0..self.in_channels {
                    for ky in 0..k {
                        let start = ic * plane + (oy * s + ky) * side + ox * s;
                        patches.extend_from_slice(&x[start..start + k]);
                    }
                }
            }
        }
        patches
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let filter = self.in_channels * self.kernel * self.kernel;
        let positions = self.out_side * self.out_side;
        let patches = self.im2col(x);
        let mut out = vec![0.0; self.out_channels * positions];
        for ((out_plane, w_oc), &b) in out
            .chunks_exact_mut(positions)
            .zip(self.weights.chunks_exact(filter))
            .zip(&self.bias)
        {
            for (o, patch) in out_plane.iter_mut().zip(patches.chunks_exact(filter)) {
                *o = b + dot(w_oc, patch);
            }
        }
        out
    }

    fn backward(&self, x: &[f64], grad_out: &[f64], acc: Option<&mut LayerGrad>) -> Vec<f64> {
        let (k, s, side, os) = (self.kernel, self.stride, self.in_side, self.out_side);
        let filter = self.in_channels * k * k;
        let positions = os * os;
        let patches = self.im2col(x);
        if let Some(acc) = acc {
            for ((g_plane, gw), gb) in grad_out
                .chunks_exact(positions)
                .zip(acc.weights.chunks_exact_mut(filter))
                .zip(acc.bias.iter_mut())
            {
                *gb += g_plane.iter().sum::<f64>();
                for (&g, patch) in g_plane.iter().zip(patches.chunks_exact(filter)) {
                    if g != 0.0 {
                        axpy(gw, g, patch);
                    }
                }
            }
        }
        // gradient per patch row, then scattered back onto the input
        let mut grad_patches = vec![0.0; positions * filter];
        for (g_plane, w_oc) in grad_out
            .chunks_exact(positions)
            .zip(self.weights.chunks_exact(filter))
        {
            for (&g, gp) in g_plane.iter().zip(grad_patches.chunks_exact_mut(filter)) {
                if g != 0.0 {
                    axpy(gp, g, w_oc);
                }
            }
        }
        let plane = side * side;
        let mut grad_in = vec![0.0; self.in_channels * plane];
        let mut rows = grad_patches.chunks_exact(k);
        for oy in 0..os {
            for ox in 0..os {
                for ic in 0..self.in_channels {
                    for ky in 0..k {
                        let start = ic * plane + (oy * s + ky) * side + ox * s;
                        let row = rows.next().expect("one row per kernel line");
                        for (gi, &g) in grad_in[start..start + k].iter_mut().zip(row) {
                            *gi += g;
                        }
                    }
                }
            }
        }
        grad_in
    }
}

/// `y += a * x`.
#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_side_arithmetic() {
        assert_eq!(conv_out_side(42, 8, 4), 9);
        assert_eq!(conv_out_side(9, 4, 2), 3);
        // floor division: (10 - 3) / 2 + 1 = 4
        assert_eq!(conv_out_side(10, 3, 2), 4);
    }

    #[test]
    fn dense_rejects_zero_units() {
        let err = LayerSpec::dense(0, 3)
            .output_shape(Shape::Flat(0))
            .unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let spec = LayerSpec::conv2d(1, 4, 8, 1);
        let err = spec
            .output_shape(Shape::Image {
                channels: 1,
                side: 5,
            })
            .unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
        let err = LayerSpec::conv2d(1, 4, 0, 1)
            .output_shape(Shape::Image {
                channels: 1,
                side: 5,
            })
            .unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
    }

    #[test]
    fn relu_blocks_negative_preactivation() {
        let layer = Layer::Activation(Activation::Relu);
        let x = [-1.0, 2.0];
        let y = layer.forward(&x);
        let g = layer.backward(&x, &y, &[5.0, 5.0], None);
        assert_eq!(g, vec![0.0, 5.0]);
    }

    #[test]
    fn conv_weight_count_and_limit() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let spec = LayerSpec::conv2d(32, 64, 4, 2);
        let layer = Layer::build(
            spec,
            Shape::Image {
                channels: 32,
                side: 9,
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(layer.param_count(), 4 * 4 * 32 * 64 + 64);
        let limit = crate::nn::init::glorot_limit(32 * 16, 64 * 16);
        let (w, _) = layer.params().unwrap();
        assert!(w.iter().all(|v| v.abs() <= limit));
    }
}
