//! Quadrature rules for expectations under a Gaussian.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss-Hermite nodes and weights for the weight `exp(-t^2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Roots of the orthonormal Hermite recurrence, bracketed by sign changes
    /// on a grid finer than the smallest root spacing and polished by
    /// safeguarded Newton steps.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let nf = n as f64;
        let upper = (2.0 * nf + 1.0).sqrt() + 1.0;
        let step = 0.05 / (2.0 * nf + 1.0).sqrt();
        let cells = (upper / step).ceil() as usize;
        let mut positive = Vec::with_capacity(n / 2);
        let mut a = if n % 2 == 1 { 0.5 * step } else { 0.0 };
        let mut fa = hermite(n, a).0;
        for k in 1..=cells {
            let b = k as f64 * step;
            let fb = hermite(n, b).0;
            if fa * fb < 0.0 {
                positive.push(polish(n, a, b));
            }
            a = b;
            fa = fb;
        }
        assert_eq!(positive.len(), n / 2, "missed Hermite roots for n = {n}");
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let weight = |z: f64| {
            let d = hermite(n, z).1;
            2.0 / (d * d)
        };
        for &z in positive.iter().rev() {
            nodes.push(z);
            weights.push(weight(z));
        }
        if n % 2 == 1 {
            nodes.push(0.0);
            weights.push(weight(0.0));
        }
        for &z in &positive {
            nodes.push(-z);
            weights.push(weight(z));
        }
        Self { nodes, weights }
    }
}

/// Orthonormal Hermite value `p_n(z)` and the derivative scale
/// `sqrt(2n) p_{n-1}(z)`.
fn hermite(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

fn polish(n: usize, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = hermite(n, lo).0;
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, d) = hermite(n, z);
        if f == 0.0 {
            return z;
        }
        if (f < 0.0) == (f_lo < 0.0) {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z - f / d;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - z).abs() <= 1e-16 * z.abs().max(1.0) {
            return next;
        }
        z = next;
    }
    z
}

/// A rule for `E[f(T)]`, `T ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quadrature {
    /// Gauss-Hermite with the given node count per axis.
    GaussHermite { nodes: usize },
    /// Trapezoid on `[-half_width, half_width]` (in standard deviations) with
    /// `points` equispaced nodes. Slower, but robust for integrands with narrow
    /// spikes that Gauss-Hermite under-resolves.
    Trapezoid { half_width: f64, points: usize },
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::GaussHermite { nodes: 128 }
    }
}

/// Nodes `t_k` and weights `w_k` with `sum_k w_k f(t_k) ~ E[f(T)]`.
#[derive(Debug, Clone)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl NormalRule {
    fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Self {
            nodes,
            weights,
            log_weights,
        }
    }
}

/// Rules are deterministic functions of their parameters; cache them since
/// diagnostics evaluate thousands of points with the same rule.
type RuleKey = (u8, u64, usize);

fn cached(key: RuleKey, build: impl FnOnce() -> NormalRule) -> Arc<NormalRule> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<NormalRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&key) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build());
    Arc::clone(cache.lock().expect("rule cache poisoned").entry(key).or_insert(rule))
}

impl Quadrature {
    /// Default 2D rule (64 nodes per axis).
    pub fn default_2d() -> Self {
        Quadrature::GaussHermite { nodes: 64 }
    }

    /// Same rule with twice the nodes, for self-convergence checks.
    pub fn refined(self) -> Self {
        match self {
            Quadrature::GaussHermite { nodes } => Quadrature::GaussHermite { nodes: 2 * nodes },
            Quadrature::Trapezoid { half_width, points } => Quadrature::Trapezoid {
                half_width,
                points: 2 * points - 1,
            },
        }
    }

    pub fn rule(self) -> Arc<NormalRule> {
        match self {
            Quadrature::GaussHermite { nodes } => cached((0, 0, nodes), || {
                let gh = GaussHermite::new(nodes);
                let scale = 1.0 / PI.sqrt();
                NormalRule::new(
                    gh.nodes.iter().map(|t| std::f64::consts::SQRT_2 * t).collect(),
                    gh.weights.iter().map(|w| w * scale).collect(),
                )
            }),
            Quadrature::Trapezoid { half_width, points } => cached((1, half_width.to_bits(), points), || {
                assert!(points >= 3, "trapezoid rule needs at least 3 points");
                let step = 2.0 * half_width / (points - 1) as f64;
                let norm = 1.0 / (2.0 * PI).sqrt();
                let (nodes, weights) = (0..points)
                    .map(|i| {
                        let t = half_width * (2.0 * i as f64 - (points - 1) as f64) / (points - 1) as f64;
                        let end = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
                        (t, end * step * norm * (-0.5 * t * t).exp())
                    })
                    .unzip();
                NormalRule::new(nodes, weights)
            }),
        }
    }
}

impl NormalRule {
    /// `E[f(x + sqrt(var) T)]` for a 1D or 2D point `x` (tensor rule in 2D).
    pub fn expect(&self, x: &[f64], var: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let sd = var.sqrt();
        let mut probe = x.to_vec();
        match x.len() {
            1 => self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(t, w)| {
                    probe[0] = x[0] + sd * t;
                    w * f(&probe)
                })
                .sum(),
            2 => {
                let mut acc = 0.0;
                for (ti, wi) in self.nodes.iter().zip(&self.weights) {
                    probe[0] = x[0] + sd * ti;
                    let mut row = 0.0;
                    for (tj, wj) in self.nodes.iter().zip(&self.weights) {
                        probe[1] = x[1] + sd * tj;
                        row += wj * f(&probe);
                    }
                    acc += wi * row;
                }
                acc
            }
            d => panic!("quadrature supports dimension 1 or 2, got {d}"),
        }
    }

    /// `log E[exp(g(x + sqrt(var) T))]`, evaluated stably (max subtracted).
    pub fn log_expect_exp(&self, x: &[f64], var: f64, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        let sd = var.sqrt();
        let mut probe = x.to_vec();
        let mut terms = Vec::with_capacity(self.nodes.len().pow(x.len() as u32));
        match x.len() {
            1 => {
                for (t, lw) in self.nodes.iter().zip(&self.log_weights) {
                    probe[0] = x[0] + sd * t;
                    terms.push(lw + g(&probe));
                }
            }
            2 => {
                for (ti, li) in self.nodes.iter().zip(&self.log_weights) {
                    probe[0] = x[0] + sd * ti;
                    for (tj, lj) in self.nodes.iter().zip(&self.log_weights) {
                        probe[1] = x[1] + sd * tj;
                        terms.push(li + lj + g(&probe));
                    }
                }
            }
            d => panic!("quadrature supports dimension 1 or 2, got {d}"),
        }
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + terms.iter().map(|a| (a - max).exp()).sum::<f64>().ln()
    }
}
