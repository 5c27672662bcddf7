//! Single-step updates of the five optimizers.
//!
//! All multi-agent steps read the empirical mean from the pre-update
//! positions, then advance each agent independently with its own noise
//! stream. Agent updates may run on the rayon pool; the arithmetic per agent
//! is identical either way, so results do not depend on scheduling.

use rayon::prelude::*;

use super::{DynamicsError, HyperParams, ParticleSystem, Variable};
use crate::noise::NoiseStream;
use crate::objectives::Objective;

const PAR_MIN_AGENTS: usize = 2;

fn check_finite(v: &[f64], agent: usize, variable: Variable, inner_step: Option<usize>) -> Result<(), DynamicsError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(DynamicsError::NonFinite {
            agent,
            variable,
            inner_step,
        })
    }
}

fn check_noise(sys: &ParticleSystem, noise: &[NoiseStream]) -> Result<(), DynamicsError> {
    if noise.len() == sys.agents() {
        Ok(())
    } else {
        Err(DynamicsError::NoiseMismatch {
            agents: sys.agents(),
            streams: noise.len(),
        })
    }
}

/// Runs `f` over every agent row; the returned error (if any) is the one with
/// the smallest agent index.
fn for_each_agent<F>(x: &mut [f64], dim: usize, noise: &mut [NoiseStream], f: F) -> Result<(), DynamicsError>
where
    F: Fn(usize, &mut [f64], &mut NoiseStream) -> Result<(), DynamicsError> + Sync,
{
    let results: Vec<_> = if noise.len() >= PAR_MIN_AGENTS {
        x.par_chunks_mut(dim)
            .zip(noise.par_iter_mut())
            .enumerate()
            .map(|(i, (row, n))| f(i, row, n))
            .collect()
    } else {
        x.chunks_mut(dim)
            .zip(noise.iter_mut())
            .enumerate()
            .map(|(i, (row, n))| f(i, row, n))
            .collect()
    };
    results.into_iter().collect()
}

fn for_each_agent_pair<F>(
    x: &mut [f64],
    y: &mut [f64],
    dim: usize,
    noise: &mut [NoiseStream],
    f: F,
) -> Result<(), DynamicsError>
where
    F: Fn(usize, &mut [f64], &mut [f64], &mut NoiseStream) -> Result<(), DynamicsError> + Sync,
{
    let results: Vec<_> = if noise.len() >= PAR_MIN_AGENTS {
        x.par_chunks_mut(dim)
            .zip(y.par_chunks_mut(dim))
            .zip(noise.par_iter_mut())
            .enumerate()
            .map(|(i, ((xr, yr), n))| f(i, xr, yr, n))
            .collect()
    } else {
        x.chunks_mut(dim)
            .zip(y.chunks_mut(dim))
            .zip(noise.iter_mut())
            .enumerate()
            .map(|(i, ((xr, yr), n))| f(i, xr, yr, n))
            .collect()
    };
    results.into_iter().collect()
}

/// One Euler-Maruyama step of overdamped Langevin dynamics:
/// `x' = x - dt grad(x) + sqrt(2 dt / beta) z`.
pub fn sgld_step(x: &[f64], obj: &dyn Objective, beta: f64, dt: f64, z: &[f64]) -> Vec<f64> {
    let grad = obj.gradient_vec(x);
    let scale = (2.0 * dt / beta).sqrt();
    x.iter()
        .zip(&grad)
        .zip(z)
        .map(|((xk, gk), zk)| (xk - dt * gk) + scale * zk)
        .collect()
}

/// Curie-Weiss force `lambda (X_i - mean(X))` on agent `i`.
pub fn interaction_force(sys: &ParticleSystem, i: usize, lambda: f64) -> Vec<f64> {
    let mean = sys.mean();
    sys.agent(i).iter().zip(&mean).map(|(x, m)| lambda * (x - m)).collect()
}

/// Independent SGLD for every agent.
pub fn sgld_system_step(
    sys: &mut ParticleSystem,
    obj: &dyn Objective,
    hp: &HyperParams,
    noise: &mut [NoiseStream],
) -> Result<(), DynamicsError> {
    check_noise(sys, noise)?;
    let dim = sys.dim();
    let dt = hp.outer_dt;
    let scale = hp.outer_noise_scale();
    for_each_agent(sys.positions_mut(), dim, noise, |i, x, stream| {
        let mut g = vec![0.0; dim];
        let mut z = vec![0.0; dim];
        obj.gradient(x, &mut g);
        stream.fill_standard_normal(&mut z);
        for k in 0..dim {
            x[k] = (x[k] - dt * g[k]) + scale * z[k];
        }
        check_finite(x, i, Variable::Slow, None)
    })?;
    sys.iter += 1;
    Ok(())
}

/// Interacting SGLD: each agent additionally feels the Curie-Weiss pull
/// toward the pre-update empirical mean.
pub fn mf_sgld_step(
    sys: &mut ParticleSystem,
    obj: &dyn Objective,
    hp: &HyperParams,
    noise: &mut [NoiseStream],
) -> Result<(), DynamicsError> {
    check_noise(sys, noise)?;
    let dim = sys.dim();
    let mean = sys.mean();
    let (dt, lambda) = (hp.outer_dt, hp.lambda);
    let scale = hp.outer_noise_scale();
    for_each_agent(sys.positions_mut(), dim, noise, |i, x, stream| {
        let mut g = vec![0.0; dim];
        let mut z = vec![0.0; dim];
        obj.gradient(x, &mut g);
        stream.fill_standard_normal(&mut z);
        for k in 0..dim {
            let force = lambda * (x[k] - mean[k]);
            x[k] = ((x[k] - dt * g[k]) - dt * force) + scale * z[k];
        }
        check_finite(x, i, Variable::Slow, None)
    })?;
    sys.iter += 1;
    Ok(())
}

/// Result of one fast-variable sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub y_final: Vec<f64>,
    /// Average of the `inner_steps` iterates after burn-in.
    pub y_average: Vec<f64>,
}

/// Fast sweep in place: `y` is advanced, `avg` receives the window average.
pub(crate) fn hom_inner_in_place(
    x: &[f64],
    y: &mut [f64],
    avg: &mut [f64],
    obj: &dyn Objective,
    hp: &HyperParams,
    noise: &mut NoiseStream,
    agent: usize,
) -> Result<(), DynamicsError> {
    let dim = x.len();
    let rate = hp.inner_dt / hp.epsilon;
    let inv_gamma = 1.0 / hp.gamma;
    let scale = hp.inner_noise_scale();
    let first_averaged = hp.burn_in - 1;
    let total = hp.fast_steps_per_outer();
    let mut g = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    avg.fill(0.0);
    // Iterate m computes Y_m from Y_{m-1}; Y_{m-1} enters the window when
    // m - 1 >= burn_in - 1, i.e. m > first_averaged.
    for m in 1..=total {
        if m > first_averaged {
            for (a, v) in avg.iter_mut().zip(y.iter()) {
                *a += v;
            }
        }
        obj.gradient(y, &mut g);
        noise.fill_standard_normal(&mut z);
        for k in 0..dim {
            let drift = g[k] - inv_gamma * (x[k] - y[k]);
            y[k] = (y[k] - rate * drift) + scale * z[k];
        }
        check_finite(y, agent, Variable::Fast, Some(m))?;
    }
    let count = hp.inner_steps as f64;
    for a in avg.iter_mut() {
        *a /= count;
    }
    Ok(())
}

/// Runs the fast recursion for a frozen slow position `x`, starting at `y0`.
pub fn hom_inner_loop(
    x: &[f64],
    y0: &[f64],
    obj: &dyn Objective,
    hp: &HyperParams,
    noise: &mut NoiseStream,
) -> Result<InnerOutcome, DynamicsError> {
    let mut y = y0.to_vec();
    let mut avg = vec![0.0; x.len()];
    hom_inner_in_place(x, &mut y, &mut avg, obj, hp, noise, 0)?;
    Ok(InnerOutcome {
        y_final: y,
        y_average: avg,
    })
}

fn fast_state(sys: &mut ParticleSystem) -> Result<(&mut [f64], &mut [f64]), DynamicsError> {
    match sys.parts_mut() {
        (x, Some(y)) => Ok((x, y)),
        (_, None) => Err(DynamicsError::MissingFastState),
    }
}

/// Homogenized SGLD without interaction: `X' = X - (dt/gamma)(X - Ybar)`.
pub fn hom_sgld_step(
    sys: &mut ParticleSystem,
    obj: &dyn Objective,
    hp: &HyperParams,
    noise: &mut [NoiseStream],
) -> Result<(), DynamicsError> {
    check_noise(sys, noise)?;
    let dim = sys.dim();
    let relax = hp.outer_dt / hp.gamma;
    let (x, y) = fast_state(sys)?;
    for_each_agent_pair(x, y, dim, noise, |i, x, y, stream| {
        let mut avg = vec![0.0; dim];
        hom_inner_in_place(x, y, &mut avg, obj, hp, stream, i)?;
        for k in 0..dim {
            x[k] -= relax * (x[k] - avg[k]);
        }
        check_finite(x, i, Variable::Slow, None)
    })?;
    sys.iter += 1;
    Ok(())
}

/// Mean-field homogenized SGLD: fast sweep per agent, then the slow update
/// with both the homogenized drift and the Curie-Weiss pull.
pub fn mf_hom_sgld_step(
    sys: &mut ParticleSystem,
    obj: &dyn Objective,
    hp: &HyperParams,
    noise: &mut [NoiseStream],
) -> Result<(), DynamicsError> {
    check_noise(sys, noise)?;
    let dim = sys.dim();
    let mean = sys.mean();
    let relax = hp.outer_dt / hp.gamma;
    let pull = hp.outer_dt * hp.lambda;
    let (x, y) = fast_state(sys)?;
    for_each_agent_pair(x, y, dim, noise, |i, x, y, stream| {
        let mut avg = vec![0.0; dim];
        hom_inner_in_place(x, y, &mut avg, obj, hp, stream, i)?;
        for k in 0..dim {
            x[k] = (x[k] - relax * (x[k] - avg[k])) - pull * (x[k] - mean[k]);
        }
        check_finite(x, i, Variable::Slow, None)
    })?;
    sys.iter += 1;
    Ok(())
}

/// Monte-Carlo estimate of the Gaussian-smoothed gradient
/// `E[grad(x + xi)]`, `xi ~ N(0, h I)`.
pub fn smoothed_gradient(
    obj: &dyn Objective,
    x: &[f64],
    h: f64,
    n_samples: usize,
    noise: &mut NoiseStream,
) -> Result<Vec<f64>, DynamicsError> {
    if n_samples == 0 {
        return Err(DynamicsError::InvalidParam {
            name: "smoothing_samples",
            reason: "must be at least 1".into(),
        });
    }
    if !(h >= 0.0 && h.is_finite()) {
        return Err(DynamicsError::InvalidParam {
            name: "smoothing_h",
            reason: format!("must be non-negative, got {h}"),
        });
    }
    let dim = x.len();
    let sd = h.sqrt();
    let mut acc = vec![0.0; dim];
    let mut probe = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for _ in 0..n_samples {
        noise.fill_standard_normal(&mut probe);
        for (p, xk) in probe.iter_mut().zip(x) {
            *p = xk + sd * *p;
        }
        obj.gradient(&probe, &mut g);
        for (a, gk) in acc.iter_mut().zip(&g) {
            *a += gk;
        }
    }
    let n = n_samples as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Gradient descent on the kernel-smoothed loss with a stochastic gradient.
pub fn smoothed_gd_step(
    x: &[f64],
    obj: &dyn Objective,
    h: f64,
    n_samples: usize,
    dt: f64,
    noise: &mut NoiseStream,
) -> Result<Vec<f64>, DynamicsError> {
    let g = smoothed_gradient(obj, x, h, n_samples, noise)?;
    Ok(x.iter().zip(&g).map(|(xk, gk)| xk - dt * gk).collect())
}

pub fn smoothed_gd_system_step(
    sys: &mut ParticleSystem,
    obj: &dyn Objective,
    hp: &HyperParams,
    noise: &mut [NoiseStream],
) -> Result<(), DynamicsError> {
    check_noise(sys, noise)?;
    let dim = sys.dim();
    for_each_agent(sys.positions_mut(), dim, noise, |i, x, stream| {
        let next = smoothed_gd_step(x, obj, hp.smoothing_h, hp.smoothing_samples, hp.outer_dt, stream)?;
        x.copy_from_slice(&next);
        check_finite(x, i, Variable::Slow, None)
    })?;
    sys.iter += 1;
    Ok(())
}
