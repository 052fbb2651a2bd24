use rand::Rng;

use crate::error::{Error, Result};

/// Glorot (Xavier) uniform weights for a dense layer: `fan_in * fan_out`
/// draws from `[-L, L]` with `L = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    glorot_uniform_n(fan_in * fan_out, fan_in, fan_out, rng)
}

/// `count` Glorot draws with explicit fans. Conv layers use
/// `fan_in = c_in * k^2`, `fan_out = c_out * k^2`, `count = c_in * c_out * k^2`.
pub fn glorot_uniform_n(
    count: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidSpec(format!(
            "glorot init needs positive fans, got {fan_in}/{fan_out}"
        )));
    }
    let limit = glorot_limit(fan_in, fan_out);
    Ok((0..count)
        .map(|_| rng.random_range(-limit..=limit))
        .collect())
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
