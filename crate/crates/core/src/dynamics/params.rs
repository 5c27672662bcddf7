use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Scalar knobs shared by all optimizers.
///
/// `inner_dt` is derived as `outer_dt / inner_steps`; the builder rejects an
/// explicit value that disagrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Inverse temperature. `f64::INFINITY` disables the noise.
    pub beta: f64,
    /// Curie-Weiss interaction strength.
    pub lambda: f64,
    /// Homogenization regularizer.
    pub gamma: f64,
    /// Scale separation of the fast variable.
    pub epsilon: f64,
    pub outer_dt: f64,
    pub inner_dt: f64,
    /// Number of averaged inner iterates per outer step.
    pub inner_steps: usize,
    /// Burn-in index of the averaging window (1 = no burn-in).
    pub burn_in: usize,
    pub agents: usize,
    pub iters: usize,
    /// Kernel variance for the smoothed-gradient method.
    pub smoothing_h: f64,
    pub smoothing_samples: usize,
}

impl HyperParams {
    pub fn builder() -> HyperParamsBuilder {
        HyperParamsBuilder::default()
    }

    /// Noise scale of one outer Euler-Maruyama step, `sqrt(2 dt / beta)`.
    pub fn outer_noise_scale(&self) -> f64 {
        (2.0 * self.outer_dt / self.beta).sqrt()
    }

    /// Noise scale of one fast step, `sqrt(2 delta / (beta eps))`.
    pub fn inner_noise_scale(&self) -> f64 {
        (2.0 * self.inner_dt / (self.beta * self.epsilon)).sqrt()
    }

    /// Total fast steps per outer step: burn-in plus the averaging window.
    pub fn fast_steps_per_outer(&self) -> usize {
        self.burn_in + self.inner_steps - 1
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(DynamicsError::InvalidParam {
                    name,
                    reason: format!("must be positive, got {v}"),
                })
            }
        };
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        positive("epsilon", self.epsilon)?;
        positive("outer_dt", self.outer_dt)?;
        positive("inner_dt", self.inner_dt)?;
        for (name, v) in [
            ("gamma", self.gamma),
            ("epsilon", self.epsilon),
            ("outer_dt", self.outer_dt),
            ("inner_dt", self.inner_dt),
        ] {
            if !v.is_finite() {
                return Err(DynamicsError::InvalidParam {
                    name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(DynamicsError::InvalidParam {
                name: "lambda",
                reason: format!("must be non-negative and finite, got {}", self.lambda),
            });
        }
        if !(self.smoothing_h >= 0.0 && self.smoothing_h.is_finite()) {
            return Err(DynamicsError::InvalidParam {
                name: "smoothing_h",
                reason: format!("must be non-negative, got {}", self.smoothing_h),
            });
        }
        for (name, v) in [
            ("inner_steps", self.inner_steps),
            ("burn_in", self.burn_in),
            ("agents", self.agents),
            ("iters", self.iters),
            ("smoothing_samples", self.smoothing_samples),
        ] {
            if v == 0 {
                return Err(DynamicsError::InvalidParam {
                    name,
                    reason: "must be at least 1".into(),
                });
            }
        }
        if self.burn_in > self.inner_steps {
            return Err(DynamicsError::InvalidParam {
                name: "burn_in",
                reason: format!(
                    "burn-in index {} exceeds inner_steps {}",
                    self.burn_in, self.inner_steps
                ),
            });
        }
        let derived = self.outer_dt / self.inner_steps as f64;
        if (self.inner_dt - derived).abs() > 1e-12 * derived {
            return Err(DynamicsError::InvalidParam {
                name: "inner_dt",
                reason: format!(
                    "inner_dt * inner_steps must equal outer_dt ({} * {} != {})",
                    self.inner_dt, self.inner_steps, self.outer_dt
                ),
            });
        }
        Ok(())
    }
}

/// Builder defaulting to the camel-benchmark settings.
#[derive(Debug, Clone)]
pub struct HyperParamsBuilder {
    beta: f64,
    lambda: f64,
    gamma: f64,
    epsilon: f64,
    outer_dt: f64,
    inner_dt: Option<f64>,
    inner_steps: usize,
    burn_in: usize,
    agents: usize,
    iters: usize,
    smoothing_h: f64,
    smoothing_samples: usize,
}

impl Default for HyperParamsBuilder {
    fn default() -> Self {
        Self {
            beta: 10.0,
            lambda: 0.0,
            gamma: 0.1,
            epsilon: 1.0,
            outer_dt: 0.01,
            inner_dt: None,
            inner_steps: 20,
            burn_in: 1,
            agents: 25,
            iters: 150,
            smoothing_h: 0.0,
            smoothing_samples: 1,
        }
    }
}

macro_rules! setter {
    ($name:ident: $ty:ty) => {
        pub fn $name(mut self, v: $ty) -> Self {
            self.$name = v;
            self
        }
    };
}

impl HyperParamsBuilder {
    setter!(beta: f64);
    setter!(lambda: f64);
    setter!(gamma: f64);
    setter!(epsilon: f64);
    setter!(outer_dt: f64);
    setter!(inner_steps: usize);
    setter!(burn_in: usize);
    setter!(agents: usize);
    setter!(iters: usize);
    setter!(smoothing_h: f64);
    setter!(smoothing_samples: usize);

    /// Explicit fast step; must agree with `outer_dt / inner_steps`.
    pub fn inner_dt(mut self, v: f64) -> Self {
        self.inner_dt = Some(v);
        self
    }

    pub fn build(self) -> Result<HyperParams, DynamicsError> {
        let derived = if self.inner_steps > 0 {
            self.outer_dt / self.inner_steps as f64
        } else {
            f64::NAN
        };
        let hp = HyperParams {
            beta: self.beta,
            lambda: self.lambda,
            gamma: self.gamma,
            epsilon: self.epsilon,
            outer_dt: self.outer_dt,
            inner_dt: self.inner_dt.unwrap_or(derived),
            inner_steps: self.inner_steps,
            burn_in: self.burn_in,
            agents: self.agents,
            iters: self.iters,
            smoothing_h: self.smoothing_h,
            smoothing_samples: self.smoothing_samples,
        };
        hp.validate()?;
        Ok(hp)
    }
}
