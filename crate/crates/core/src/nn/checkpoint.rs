//! Binary network checkpoints (little-endian).
//!
//! Layout: `"ACNN"`, format version `u32`, layer count `u32`, then per layer a
//! kind tag `u8`, its shape dims as `u32`s and its raw `f64` parameters
//! (weights row-major, then bias). Adam state is not stored.
//!
//! | tag | kind    | dims                                             |
//! |-----|---------|--------------------------------------------------|
//! | 0   | dense   | in_units, out_units                              |
//! | 1   | conv2d  | in_channels, out_channels, kernel, stride, side  |
//! | 2   | relu    | -                                                |
//! | 3   | sigmoid | -                                                |
//! | 4   | tanh    | -                                                |
//! | 5   | linear  | -                                                |

use std::path::Path;

use crate::error::{Error, Result, Shape};
use crate::nn::layer::{conv_out_side, Activation, Conv2d, Dense, Layer};
use crate::nn::Network;

pub const MAGIC: &[u8; 4] = b"ACNN";
pub const VERSION: u32 = 1;

const TAG_DENSE: u8 = 0;
const TAG_CONV: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_SIGMOID: u8 = 3;
const TAG_TANH: u8 = 4;
const TAG_LINEAR: u8 = 5;

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.param_count() * 8);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, self.layers().len() as u32);
        for layer in self.layers() {
            match layer {
                Layer::Dense(d) => {
                    out.push(TAG_DENSE);
                    put_u32(&mut out, d.in_units as u32);
                    put_u32(&mut out, d.out_units as u32);
                    put_f64s(&mut out, &d.weights);
                    put_f64s(&mut out, &d.bias);
                }
                Layer::Conv2d(c) => {
                    out.push(TAG_CONV);
                    for v in [c.in_channels, c.out_channels, c.kernel, c.stride, c.in_side] {
                        put_u32(&mut out, v as u32);
                    }
                    put_f64s(&mut out, &c.weights);
                    put_f64s(&mut out, &c.bias);
                }
                Layer::Activation(a) => out.push(match a {
                    Activation::Relu => TAG_RELU,
                    Activation::Sigmoid => TAG_SIGMOID,
                    Activation::Tanh => TAG_TANH,
                    Activation::Linear => TAG_LINEAR,
                }),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic, expected ACNN".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut layers = Vec::with_capacity(count);
        let mut input_shape = None;
        for i in 0..count {
            let tag = r.u8()?;
            let layer = match tag {
                TAG_DENSE => {
                    let in_units = r.u32()? as usize;
                    let out_units = r.u32()? as usize;
                    input_shape.get_or_insert(Shape::Flat(in_units));
                    Layer::Dense(Dense {
                        in_units,
                        out_units,
                        weights: r.f64s(in_units * out_units)?,
                        bias: r.f64s(out_units)?,
                    })
                }
                TAG_CONV => {
                    let in_channels = r.u32()? as usize;
                    let out_channels = r.u32()? as usize;
                    let kernel = r.u32()? as usize;
                    let stride = r.u32()? as usize;
                    let in_side = r.u32()? as usize;
                    if kernel == 0 || stride == 0 || in_side < kernel {
                        return Err(Error::Checkpoint(format!("layer {i}: bad conv geometry")));
                    }
                    input_shape.get_or_insert(Shape::Image {
                        channels: in_channels,
                        side: in_side,
                    });
                    Layer::Conv2d(Conv2d {
                        in_channels,
                        out_channels,
                        kernel,
                        stride,
                        in_side,
                        out_side: conv_out_side(in_side, kernel, stride),
                        weights: r.f64s(out_channels * in_channels * kernel * kernel)?,
                        bias: r.f64s(out_channels)?,
                    })
                }
                TAG_RELU => Layer::Activation(Activation::Relu),
                TAG_SIGMOID => Layer::Activation(Activation::Sigmoid),
                TAG_TANH => Layer::Activation(Activation::Tanh),
                TAG_LINEAR => Layer::Activation(Activation::Linear),
                other => return Err(Error::Checkpoint(format!("layer {i}: unknown tag {other}"))),
            };
            if input_shape.is_none() {
                return Err(Error::Checkpoint(
                    "first layer must be dense or conv2d".into(),
                ));
            }
            layers.push(layer);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let input_shape =
            input_shape.ok_or_else(|| Error::Checkpoint("checkpoint has no layers".into()))?;
        Network::from_layers(input_shape, layers)
            .map_err(|e| Error::Checkpoint(format!("inconsistent layer shapes: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        Network::from_bytes(&std::fs::read(path)?)
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) struct Reader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}
