//! Interacting and homogenized stochastic gradient Langevin dynamics.
//!
//! The crate is organised bottom-up:
//!
//! - [`objectives`]: benchmark losses with analytic gradients and a registry.
//! - [`noise`]: counter-based Gaussian substreams for reproducible runs.
//! - [`dynamics`]: SGLD, interacting (mean-field) SGLD, homogenized SGLD,
//!   their combination and smoothed gradient descent.
//! - [`smoothing`]: quadrature diagnostics for kernel smoothing, stationary
//!   states of the mean-field dynamics and the Cole-Hopf effective potential.
//! - [`resnet`]: the concentric-ellipse classification experiment with a
//!   Verlet / explicit-Euler residual network.
//! - [`harness`]: config-driven replicated experiments and CSV artifacts.

pub mod dynamics;
pub mod harness;
pub mod noise;
pub mod objectives;
pub mod resnet;
pub mod smoothing;

pub use dynamics::{HyperParams, Method, ParticleSystem};
pub use noise::NoiseStream;
pub use objectives::{build_objective, Objective};
