use crate::error::{Error, Result};

/// Exponentially decaying exploration SD, `N(t) = sd_initial * exp(-lambda t)`,
/// with `lambda` chosen so that `N(t_max / 2) = sd_at_half`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    sd_initial: f64,
    sd_at_half: f64,
    t_max: u64,
    lambda: f64,
}

impl NoiseSchedule {
    pub fn new(sd_initial: f64, sd_at_half: f64, t_max: u64) -> Result<Self> {
        if !(sd_initial > 0.0) || !(sd_at_half > 0.0) || sd_at_half >= sd_initial {
            return Err(Error::Config(format!(
                "noise schedule needs 0 < sd_at_half < sd_initial, got {sd_at_half} / {sd_initial}"
            )));
        }
        if t_max < 2 {
            return Err(Error::Config("noise schedule t_max must be >= 2".into()));
        }
        let lambda = (sd_initial / sd_at_half).ln() / (0.5 * t_max as f64);
        Ok(NoiseSchedule {
            sd_initial,
            sd_at_half,
            t_max,
            lambda,
        })
    }

    /// Schedule with the standard 1.0 start and 0.05 at the halfway point.
    pub fn standard(t_max: u64) -> Result<Self> {
        NoiseSchedule::new(1.0, 0.05, t_max)
    }

    pub fn sd(&self, t: u64) -> f64 {
        self.sd_initial * (-self.lambda * t as f64).exp()
    }

    pub fn sd_initial(&self) -> f64 {
        self.sd_initial
    }

    pub fn sd_at_half(&self) -> f64 {
        self.sd_at_half
    }

    pub fn t_max(&self) -> u64 {
        self.t_max
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}
