//! Langevin-type optimizers over a population of agents.
//!
//! | id            | slow update                                          |
//! |---------------|------------------------------------------------------|
//! | `sgld`        | `X - dt grad(X) + sqrt(2dt/beta) Z`                   |
//! | `mf-sgld`     | as `sgld`, minus `dt lambda (X - mean X)`              |
//! | `hom-sgld`    | `X - (dt/gamma)(X - Ybar)`, `Ybar` from a fast sweep  |
//! | `mf-hom-sgld` | as `hom-sgld`, minus `dt lambda (X - mean X)`          |
//! | `smoothed-gd` | `X - dt E[grad(X + xi)]`, `xi ~ N(0, h I)`             |
//!
//! The fast sweep advances `Y` by
//! `Y - (delta/eps)(grad(Y) - (X - Y)/gamma) + sqrt(2 delta/(beta eps)) Z`
//! and averages the iterates of the window after burn-in.

mod params;
mod steps;
mod system;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use params::{HyperParams, HyperParamsBuilder};
pub use steps::{
    hom_inner_loop, hom_sgld_step, interaction_force, mf_hom_sgld_step, mf_sgld_step, sgld_step, sgld_system_step,
    smoothed_gd_step, smoothed_gd_system_step, smoothed_gradient, InnerOutcome,
};
pub use system::ParticleSystem;

use crate::noise::NoiseStream;
use crate::objectives::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Slow,
    Fast,
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variable::Slow => "X",
            Variable::Fast => "Y",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid hyper-parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error(
        "non-finite {variable} for agent {agent}{} (numerical stiffness; reduce the step size)",
        inner_step.map(|m| format!(" at inner step {m}")).unwrap_or_default()
    )]
    NonFinite {
        agent: usize,
        variable: Variable,
        inner_step: Option<usize>,
    },
    #[error("homogenized step requires fast variables")]
    MissingFastState,
    #[error("{streams} noise streams for {agents} agents")]
    NoiseMismatch { agents: usize, streams: usize },
}

/// A failed run: the error and the outer iteration at which it occurred.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("iteration {iteration}: {source}")]
pub struct RunError {
    pub iteration: usize,
    #[source]
    pub source: DynamicsError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Sgld,
    MfSgld,
    HomSgld,
    MfHomSgld,
    SmoothedGd,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Sgld,
        Method::MfSgld,
        Method::HomSgld,
        Method::MfHomSgld,
        Method::SmoothedGd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sgld => "sgld",
            Method::MfSgld => "mf-sgld",
            Method::HomSgld => "hom-sgld",
            Method::MfHomSgld => "mf-hom-sgld",
            Method::SmoothedGd => "smoothed-gd",
        }
    }

    pub fn is_homogenized(self) -> bool {
        matches!(self, Method::HomSgld | Method::MfHomSgld)
    }

    /// Advances the system by one outer iteration.
    pub fn step(
        self,
        sys: &mut ParticleSystem,
        obj: &dyn Objective,
        hp: &HyperParams,
        noise: &mut [NoiseStream],
    ) -> Result<(), DynamicsError> {
        match self {
            Method::Sgld => sgld_system_step(sys, obj, hp, noise),
            Method::MfSgld => mf_sgld_step(sys, obj, hp, noise),
            Method::HomSgld => hom_sgld_step(sys, obj, hp, noise),
            Method::MfHomSgld => mf_hom_sgld_step(sys, obj, hp, noise),
            Method::SmoothedGd => smoothed_gd_system_step(sys, obj, hp, noise),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown method `{0}` (expected sgld, mf-sgld, hom-sgld, mf-hom-sgld or smoothed-gd)")]
pub struct UnknownMethod(pub String);

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownMethod(s.to_string()))
    }
}

/// Receives the system state at iteration 0 and after every outer step.
pub trait TraceSink {
    fn record(&mut self, sys: &ParticleSystem);
}

pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _sys: &ParticleSystem) {}
}

impl<F: FnMut(&ParticleSystem)> TraceSink for F {
    fn record(&mut self, sys: &ParticleSystem) {
        self(sys)
    }
}

/// Runs `hp.iters` outer iterations of `method` from `sys`.
///
/// Homogenized methods start from `Y := X` when `sys` carries no fast state.
pub fn run_method(
    method: Method,
    obj: &dyn Objective,
    hp: &HyperParams,
    mut sys: ParticleSystem,
    noise: &mut [NoiseStream],
    sink: &mut dyn TraceSink,
) -> Result<ParticleSystem, RunError> {
    let fail = |iteration, source| RunError { iteration, source };
    hp.validate().map_err(|e| fail(0, e))?;
    if method.is_homogenized() && sys.fast().is_none() {
        sys = sys.with_fast_from_positions();
    }
    sink.record(&sys);
    for _ in 0..hp.iters {
        let iteration = sys.iter + 1;
        method.step(&mut sys, obj, hp, noise).map_err(|e| fail(iteration, e))?;
        sink.record(&sys);
    }
    Ok(sys)
}

/// [`run_method`] with the per-agent noise streams of `(seed, run)`.
pub fn run_seeded(
    method: Method,
    obj: &dyn Objective,
    hp: &HyperParams,
    sys: ParticleSystem,
    seed: u64,
    run: u64,
    sink: &mut dyn TraceSink,
) -> Result<ParticleSystem, RunError> {
    let mut noise = NoiseStream::agents(seed, run, sys.agents());
    run_method(method, obj, hp, sys, &mut noise, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{DoubleWell, Linear, Quadratic, SixHumpCamel};

    /// Objective with identically zero gradient.
    struct Flat(usize);

    impl Objective for Flat {
        fn id(&self) -> &str {
            "flat"
        }
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, _x: &[f64]) -> f64 {
            0.0
        }
        fn gradient(&self, _x: &[f64], grad: &mut [f64]) {
            grad.fill(0.0);
        }
    }

    fn noiseless() -> HyperParamsBuilder {
        HyperParams::builder().beta(f64::INFINITY)
    }

    #[test]
    fn sgld_fixed_point_and_contraction() {
        let flat = Flat(3);
        let x = [0.3, -1.0, 2.0];
        assert_eq!(sgld_step(&x, &flat, 1.0, 0.01, &[0.0; 3]), x.to_vec());

        let q = Quadratic::new(2, 1.0);
        let next = sgld_step(&[1.0, -2.0], &q, 5.0, 0.01, &[0.0, 0.0]);
        assert!((next[0] - 0.99).abs() < 1e-15 && (next[1] + 1.98).abs() < 1e-15);
    }

    #[test]
    fn sgld_diffusion_coefficient() {
        let (beta, dt) = (2.0, 0.01);
        let x = [0.5];
        let g = DoubleWell.gradient_vec(&x)[0];
        let mut s = NoiseStream::for_agent(5, 0, 0);
        let n = 100_000;
        let incr: Vec<f64> = (0..n)
            .map(|_| {
                let z = [s.standard_normal()];
                sgld_step(&x, &DoubleWell, beta, dt, &z)[0] - x[0] + dt * g
            })
            .collect();
        let mean = incr.iter().sum::<f64>() / n as f64;
        let var = incr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let expected = 2.0 * dt / beta;
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }

    #[test]
    fn interaction_force_examples() {
        let consensus = ParticleSystem::from_rows(&vec![vec![1.0, 2.0]; 4]);
        for i in 0..4 {
            assert_eq!(interaction_force(&consensus, i, 3.0), vec![0.0, 0.0]);
        }
        let a = 0.7;
        let pair = ParticleSystem::from_rows(&[vec![a], vec![-a]]);
        assert_eq!(interaction_force(&pair, 0, 2.0), vec![2.0 * a]);
        assert_eq!(interaction_force(&pair, 1, 2.0), vec![-2.0 * a]);
    }

    #[test]
    fn interaction_forces_sum_to_zero() {
        let mut s = NoiseStream::for_init(1, 0);
        let rows: Vec<Vec<f64>> = (0..17)
            .map(|_| (0..3).map(|_| s.uniform(-5.0, 5.0)).collect())
            .collect();
        let sys = ParticleSystem::from_rows(&rows);
        let mut total = [0.0; 3];
        for i in 0..17 {
            for (t, f) in total.iter_mut().zip(interaction_force(&sys, i, 4.0)) {
                *t += f;
            }
        }
        assert!(total.iter().all(|t| t.abs() < 1e-12), "{total:?}");
    }

    #[test]
    fn pure_curie_weiss_contracts_to_mean() {
        let hp = noiseless().lambda(5.0).build().unwrap();
        let rows = vec![vec![1.0, 0.0], vec![-3.0, 2.0], vec![0.5, 4.0]];
        let mut sys = ParticleSystem::from_rows(&rows);
        let mean0 = sys.mean();
        let spread0 = (sys.agent(0)[0] - mean0[0]).abs();
        let mut noise = NoiseStream::agents(0, 0, 3);
        for _ in 0..100 {
            mf_sgld_step(&mut sys, &Flat(2), &hp, &mut noise).unwrap();
        }
        let mean = sys.mean();
        for k in 0..2 {
            assert!((mean[k] - mean0[k]).abs() < 1e-12);
        }
        // Linear ODE: deviations shrink by (1 - dt lambda)^n.
        let expected = spread0 * (1.0f64 - 0.01 * 5.0).powi(100);
        assert!(((sys.agent(0)[0] - mean[0]).abs() - expected).abs() < 1e-12);
    }

    #[test]
    fn inner_loop_geometric_relaxation() {
        let hp = noiseless()
            .epsilon(1.0)
            .gamma(0.1)
            .outer_dt(0.01)
            .inner_steps(20)
            .build()
            .unwrap();
        let x = [1.0, -2.0];
        let y0 = [3.0, 0.5];
        let mut s = NoiseStream::for_agent(0, 0, 0);
        let out = hom_inner_loop(&x, &y0, &Flat(2), &hp, &mut s).unwrap();
        let factor: f64 = 1.0 - hp.inner_dt / (hp.epsilon * hp.gamma);
        let mut avg = [0.0; 2];
        for m in 0..20 {
            for k in 0..2 {
                avg[k] += x[k] + factor.powi(m) * (y0[k] - x[k]);
            }
        }
        for k in 0..2 {
            let fin = x[k] + factor.powi(20) * (y0[k] - x[k]);
            assert!((out.y_final[k] - fin).abs() < 1e-12);
            assert!((out.y_average[k] - avg[k] / 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_loop_single_term_window() {
        let hp = HyperParams::builder()
            .inner_steps(1)
            .burn_in(1)
            .outer_dt(0.001)
            .build()
            .unwrap();
        let mut s = NoiseStream::for_agent(0, 0, 0);
        let y0 = [0.25, -0.5];
        let out = hom_inner_loop(&[0.0, 0.0], &y0, &SixHumpCamel, &hp, &mut s).unwrap();
        assert_eq!(out.y_average, y0.to_vec());
    }

    #[test]
    fn inner_loop_burn_in_window() {
        // burn_in = 3, M = 4: six fast steps, averaging Y_2..Y_5.
        let hp = noiseless().inner_steps(4).burn_in(3).outer_dt(0.004).build().unwrap();
        assert_eq!(hp.fast_steps_per_outer(), 6);
        let x = [0.0];
        let y0 = [1.0];
        let mut s = NoiseStream::for_agent(0, 0, 0);
        let out = hom_inner_loop(&x, &y0, &Flat(1), &hp, &mut s).unwrap();
        let f: f64 = 1.0 - hp.inner_dt / (hp.epsilon * hp.gamma);
        let avg = (2..6).map(|m| f.powi(m)).sum::<f64>() / 4.0;
        assert!((out.y_average[0] - avg).abs() < 1e-14);
        assert!((out.y_final[0] - f.powi(6)).abs() < 1e-14);
    }

    #[test]
    fn inner_loop_reports_stiffness() {
        let hp = HyperParams::builder()
            .epsilon(0.01)
            .outer_dt(2.5)
            .inner_steps(10)
            .build()
            .unwrap();
        let mut s = NoiseStream::for_agent(0, 0, 0);
        let err = hom_inner_loop(&[0.0], &[30.0], &DoubleWell, &hp, &mut s).unwrap_err();
        assert!(matches!(
            err,
            DynamicsError::NonFinite {
                variable: Variable::Fast,
                ..
            }
        ));
    }

    #[test]
    fn mf_hom_consensus_on_flat_landscape_is_fixed() {
        let hp = noiseless().lambda(10.0).build().unwrap();
        let mut sys = ParticleSystem::from_rows(&vec![vec![0.4, -0.2]; 5]).with_fast_from_positions();
        let before = sys.clone();
        let mut noise = NoiseStream::agents(1, 0, 5);
        mf_hom_sgld_step(&mut sys, &Flat(2), &hp, &mut noise).unwrap();
        assert_eq!(sys.positions(), before.positions());
        assert_eq!(sys.fast(), before.fast());
    }

    #[test]
    fn hom_step_requires_fast_state() {
        let hp = HyperParams::builder().build().unwrap();
        let mut sys = ParticleSystem::from_rows(&[vec![0.0, 0.0]]);
        let mut noise = NoiseStream::agents(0, 0, 1);
        assert_eq!(
            hom_sgld_step(&mut sys, &SixHumpCamel, &hp, &mut noise),
            Err(DynamicsError::MissingFastState)
        );
    }

    #[test]
    fn smoothed_gd_examples() {
        let mut s = NoiseStream::for_agent(0, 0, 0);
        let x = [0.3, -0.8];
        let exact = SixHumpCamel.gradient_vec(&x);
        let step = smoothed_gd_step(&x, &SixHumpCamel, 0.0, 4, 0.01, &mut s).unwrap();
        for k in 0..2 {
            assert_eq!(step[k], x[k] - 0.01 * exact[k]);
        }
        let lin = Linear {
            slope: vec![2.0, -1.0],
            offset: 3.0,
        };
        let step = smoothed_gd_step(&x, &lin, 0.7, 3, 0.1, &mut s).unwrap();
        assert!((step[0] - (0.3 - 0.2)).abs() < 1e-15 && (step[1] - (-0.8 + 0.1)).abs() < 1e-15);
        assert!(smoothed_gd_step(&x, &lin, 0.7, 0, 0.1, &mut s).is_err());
    }

    #[test]
    fn smoothed_gd_on_quadratic_is_unbiased() {
        let q = Quadratic::new(2, 1.0);
        let x = [1.5, -0.5];
        let mut s = NoiseStream::for_agent(3, 0, 0);
        let n = 20_000;
        let mut mean = [0.0; 2];
        for _ in 0..n {
            let next = smoothed_gd_step(&x, &q, 0.4, 1, 0.1, &mut s).unwrap();
            for k in 0..2 {
                mean[k] += (next[k] - x[k]) / n as f64;
            }
        }
        // Step has mean -dt x and per-coordinate sd dt sqrt(h / n).
        for k in 0..2 {
            let se = 0.1 * (0.4f64 / n as f64).sqrt();
            assert!((mean[k] + 0.1 * x[k]).abs() < 4.0 * se, "{mean:?}");
        }
    }

    #[test]
    fn run_method_records_every_iteration() {
        let hp = HyperParams::builder().iters(7).agents(3).build().unwrap();
        let sys = ParticleSystem::from_rows(&[vec![0.1, 0.2], vec![1.0, -1.0], vec![-0.5, 0.5]]);
        let mut seen = Vec::new();
        let mut sink = |s: &ParticleSystem| seen.push(s.iter);
        let out = run_seeded(Method::MfHomSgld, &SixHumpCamel, &hp, sys, 1, 0, &mut sink).unwrap();
        assert_eq!(out.iter, 7);
        assert!(out.fast().is_some());
        assert_eq!(seen, (0..=7).collect::<Vec<_>>());
    }

    #[test]
    fn run_method_reports_failing_iteration() {
        let hp = HyperParams::builder()
            .outer_dt(0.5)
            .beta(1.0)
            .iters(50)
            .build()
            .unwrap();
        let sys = ParticleSystem::from_rows(&[vec![50.0]]);
        let err = run_seeded(Method::Sgld, &DoubleWell, &hp, sys, 0, 0, &mut NullSink).unwrap_err();
        assert!(err.iteration >= 1 && err.iteration <= 50);
        assert!(matches!(err.source, DynamicsError::NonFinite { agent: 0, .. }));
    }

    #[test]
    fn method_ids_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("adam".parse::<Method>().is_err());
    }
}
