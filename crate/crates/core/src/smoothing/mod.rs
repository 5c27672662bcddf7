//! Quadrature diagnostics for three ways of smoothing a loss in 1D/2D:
//! Gaussian kernel convolution, stationary states of the interacting
//! (mean-field) Langevin dynamics, and the Cole-Hopf effective potential.

mod grid;
mod quadrature;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{Axis, GridDensity, Lattice};
pub use quadrature::{GaussHermite, NormalRule, Quadrature};

use crate::dynamics::smoothed_gradient;
use crate::noise::NoiseStream;
use crate::objectives::{build_objective, Objective, ObjectiveError, ObjectiveParams};

/// Boundary samples of an unnormalized density must stay below this fraction
/// of its maximum.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothingError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    Param {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("diagnostic supports dimension {supported}, objective has dimension {got}")]
    Dimension { supported: &'static str, got: usize },
    #[error(
        "exp(-beta Phi) is not integrable on the grid: boundary/max ratio {ratio:e} exceeds {BOUNDARY_TOLERANCE:e}"
    )]
    NotIntegrable { ratio: f64 },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

fn require_positive(name: &'static str, value: f64) -> Result<(), SmoothingError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SmoothingError::Param {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn require_low_dim(obj: &dyn Objective) -> Result<(), SmoothingError> {
    match obj.dim() {
        1 | 2 => Ok(()),
        got => Err(SmoothingError::Dimension {
            supported: "1 or 2",
            got,
        }),
    }
}

fn require_1d(obj: &dyn Objective) -> Result<(), SmoothingError> {
    match obj.dim() {
        1 => Ok(()),
        got => Err(SmoothingError::Dimension { supported: "1", got }),
    }
}

/// Gaussian-smoothed loss `(G_h * Phi)(x)`.
pub fn kernel_smooth(obj: &dyn Objective, h: f64, x: &[f64], quad: Quadrature) -> Result<f64, SmoothingError> {
    require_positive("h", h)?;
    require_low_dim(obj)?;
    Ok(quad.rule().expect(x, h, |y| obj.value(y)))
}

/// Gradient of the smoothed loss, `E[grad Phi(x + xi)]`, by quadrature.
pub fn kernel_smooth_gradient(
    obj: &dyn Objective,
    h: f64,
    x: &[f64],
    quad: Quadrature,
) -> Result<Vec<f64>, SmoothingError> {
    require_positive("h", h)?;
    require_low_dim(obj)?;
    let rule = quad.rule();
    let mut g = vec![0.0; x.len()];
    Ok((0..x.len())
        .map(|k| {
            rule.expect(x, h, |y| {
                obj.gradient(y, &mut g);
                g[k]
            })
        })
        .collect())
}

/// Monte-Carlo estimate of the smoothed gradient from `n` kernel draws.
pub fn mc_smoothed_gradient(
    obj: &dyn Objective,
    x: &[f64],
    h: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, SmoothingError> {
    if n == 0 {
        return Err(SmoothingError::Param {
            name: "n",
            value: 0.0,
            reason: "at least one sample is required",
        });
    }
    if !(h >= 0.0 && h.is_finite()) {
        return Err(SmoothingError::Param {
            name: "h",
            value: h,
            reason: "must be non-negative",
        });
    }
    let mut stream = NoiseStream::for_agent(seed, 0, 0);
    Ok(smoothed_gradient(obj, x, h, n, &mut stream).expect("arguments validated above"))
}

/// Normalized `exp(-beta V)` on the lattice, with the boundary check.
fn gibbs_density(
    lattice: &Lattice,
    beta: f64,
    potential: impl Fn(&[f64]) -> f64,
) -> Result<GridDensity, SmoothingError> {
    let energies: Vec<f64> = lattice.points().iter().map(|p| potential(p)).collect();
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let values: Vec<f64> = energies.iter().map(|e| (-beta * (e - min)).exp()).collect();
    let boundary = values
        .iter()
        .enumerate()
        .filter(|(k, _)| lattice.on_boundary(*k))
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    if boundary >= BOUNDARY_TOLERANCE {
        return Err(SmoothingError::NotIntegrable { ratio: boundary });
    }
    Ok(GridDensity::normalized(lattice.clone(), values))
}

/// Stationary density `Z^{-1} exp(-beta Phi)` of non-interacting SGLD.
pub fn stationary_density(obj: &dyn Objective, beta: f64, lattice: &Lattice) -> Result<GridDensity, SmoothingError> {
    require_positive("beta", beta)?;
    if lattice.dim() != obj.dim() {
        return Err(SmoothingError::Dimension {
            supported: if lattice.dim() == 1 { "1" } else { "2" },
            got: obj.dim(),
        });
    }
    gibbs_density(lattice, beta, |p| obj.value(p))
}

/// Candidate mean-field stationary state centred at `m`:
/// `exp(-beta (Phi(x) + lambda/2 (x - m)^2))`, normalized.
pub fn tilted_density(
    obj: &dyn Objective,
    beta: f64,
    lambda: f64,
    m: f64,
    axis: Axis,
) -> Result<GridDensity, SmoothingError> {
    require_1d(obj)?;
    require_positive("beta", beta)?;
    gibbs_density(&Lattice::one(axis), beta, |p| {
        let d = p[0] - m;
        obj.value(p) + 0.5 * lambda * d * d
    })
}

/// Outcome of the self-consistency iteration `m <- mean(eta^m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub mean: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether oscillation triggered the 0.5 damping.
    pub damped: bool,
}

/// Picard iteration for the self-consistent mean of a mean-field stationary
/// state. Switches to 0.5 damping once successive updates change sign.
/// Non-convergence is reported through [`FixedPoint::converged`].
pub fn self_consistent_mean(
    obj: &dyn Objective,
    beta: f64,
    lambda: f64,
    m0: f64,
    tol: f64,
    max_iter: usize,
    axis: Axis,
) -> Result<FixedPoint, SmoothingError> {
    require_positive("tol", tol)?;
    let mut m = m0;
    let mut damped = false;
    let mut prev_delta: Option<f64> = None;
    for k in 1..=max_iter {
        let mapped = tilted_density(obj, beta, lambda, m, axis)?.mean()[0];
        let next = if damped { 0.5 * m + 0.5 * mapped } else { mapped };
        let delta = next - m;
        if delta.abs() < tol {
            return Ok(FixedPoint {
                mean: next,
                iterations: k,
                converged: true,
                damped,
            });
        }
        if prev_delta.is_some_and(|p| p * delta < 0.0) {
            damped = true;
        }
        prev_delta = Some(delta);
        m = next;
    }
    Ok(FixedPoint {
        mean: m,
        iterations: max_iter,
        converged: false,
        damped,
    })
}

/// Interaction strength at which `Var(rho_inf) = 1 / (beta lambda)`.
pub fn critical_lambda(obj: &dyn Objective, beta: f64, axis: Axis) -> Result<f64, SmoothingError> {
    require_1d(obj)?;
    let rho = stationary_density(obj, beta, &Lattice::one(axis))?;
    Ok(1.0 / (beta * rho.variance()))
}

/// Sign convention for the Cole-Hopf log-convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColeHopfSign {
    /// `-(1/beta) log(G * exp(-beta Phi))`: a smoothed version of `Phi`.
    #[default]
    Regularized,
    /// `+(1/beta) log(G * exp(-beta Phi))`, kept for comparison.
    Literal,
}

/// Cole-Hopf effective potential at `x`, with kernel variance `gamma/beta`.
pub fn cole_hopf(
    obj: &dyn Objective,
    beta: f64,
    gamma: f64,
    x: &[f64],
    quad: Quadrature,
    sign: ColeHopfSign,
) -> Result<f64, SmoothingError> {
    require_positive("beta", beta)?;
    require_positive("gamma", gamma)?;
    require_low_dim(obj)?;
    let log_conv = quad.rule().log_expect_exp(x, gamma / beta, |y| -beta * obj.value(y));
    Ok(match sign {
        ColeHopfSign::Regularized => -log_conv / beta,
        ColeHopfSign::Literal => log_conv / beta,
    })
}

/// Free energy of a 1D density:
/// `(1/beta) int rho ln rho + int Phi rho + 1/2 int (D * rho) rho`
/// with the Curie-Weiss kernel `D(x, y) = lambda/2 |x - y|^2`, whose
/// interaction energy reduces to `lambda/2 Var(rho)`.
pub fn free_energy(rho: &GridDensity, obj: &dyn Objective, beta: f64, lambda: f64) -> Result<f64, SmoothingError> {
    require_1d(obj)?;
    require_positive("beta", beta)?;
    if rho.lattice.dim() != 1 {
        return Err(SmoothingError::Dimension {
            supported: "1",
            got: rho.lattice.dim(),
        });
    }
    let points = rho.lattice.points();
    let entropy: Vec<f64> = rho
        .values
        .iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .collect();
    let potential: Vec<f64> = points.iter().zip(&rho.values).map(|(p, v)| v * obj.value(p)).collect();
    let entropy = rho.lattice.integrate(&entropy);
    let potential = rho.lattice.integrate(&potential);
    Ok(entropy / beta + potential + 0.5 * lambda * rho.variance())
}

/// Number of strict interior local minima of a sampled curve.
pub fn count_local_minima(values: &[f64]) -> usize {
    values.windows(3).filter(|w| w[1] < w[0] && w[1] < w[2]).count()
}

/// Inputs of the `smooth-diagnose` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingConfig {
    pub objective: String,
    pub osc_delta: f64,
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub h: f64,
    /// Sample range for the CSV curves.
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Half-width of the grid used for stationary densities.
    pub density_half_width: f64,
    pub density_points: usize,
    pub quadrature_nodes: usize,
    pub cole_hopf_sign: ColeHopfSign,
    pub fixed_point_starts: Vec<f64>,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            objective: "doublewell1d".into(),
            osc_delta: 0.3,
            beta: 5.0,
            lambda: 1.0,
            gamma: 0.5,
            h: 0.1,
            lo: -2.0,
            hi: 2.0,
            points: 401,
            density_half_width: 6.0,
            density_points: 2001,
            quadrature_nodes: 128,
            cole_hopf_sign: ColeHopfSign::Regularized,
            fixed_point_starts: vec![-1.0, 0.0, 1.0],
        }
    }
}

/// One row of the sampled-curves CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub x: f64,
    pub phi: f64,
    pub phi_kernel_h: f64,
    pub phi_colehopf_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub objective: String,
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub h: f64,
    /// `None` when `exp(-beta Phi)` fails the integrability check.
    pub critical_lambda: Option<f64>,
    pub fixed_points: Vec<FixedPointReport>,
    pub local_minima: MinimaCounts,
    pub colehopf_min: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub start: f64,
    #[serde(flatten)]
    pub result: FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaCounts {
    pub phi: usize,
    pub kernel: usize,
    pub colehopf: usize,
}

/// Computes the 1D smoothing report and the sampled curves.
pub fn diagnose(cfg: &SmoothingConfig) -> Result<(SmoothingReport, Vec<CurveSample>), SmoothingError> {
    let params = ObjectiveParams {
        osc_delta: cfg.osc_delta,
        ..ObjectiveParams::default()
    };
    let obj = build_objective(&cfg.objective, 1, params)?;
    let quad = Quadrature::GaussHermite {
        nodes: cfg.quadrature_nodes,
    };
    if cfg.points < 3 || cfg.lo >= cfg.hi {
        return Err(SmoothingError::Param {
            name: "points",
            value: cfg.points as f64,
            reason: "need at least 3 samples on a non-empty range",
        });
    }
    let axis = Axis::new(cfg.lo, cfg.hi, cfg.points);
    let mut curves = Vec::with_capacity(cfg.points);
    for x in axis.nodes() {
        let p = [x];
        curves.push(CurveSample {
            x,
            phi: obj.value(&p),
            phi_kernel_h: kernel_smooth(obj.as_ref(), cfg.h, &p, quad)?,
            phi_colehopf_gamma: cole_hopf(obj.as_ref(), cfg.beta, cfg.gamma, &p, quad, cfg.cole_hopf_sign)?,
        });
    }
    let column = |f: fn(&CurveSample) -> f64| curves.iter().map(f).collect::<Vec<_>>();
    let local_minima = MinimaCounts {
        phi: count_local_minima(&column(|c| c.phi)),
        kernel: count_local_minima(&column(|c| c.phi_kernel_h)),
        colehopf: count_local_minima(&column(|c| c.phi_colehopf_gamma)),
    };
    let colehopf_min = curves
        .iter()
        .map(|c| c.phi_colehopf_gamma)
        .fold(f64::INFINITY, f64::min);

    let density_axis = Axis::symmetric(cfg.density_half_width, cfg.density_points);
    let mut notes = Vec::new();
    let critical = match critical_lambda(obj.as_ref(), cfg.beta, density_axis) {
        Ok(v) => Some(v),
        Err(e @ SmoothingError::NotIntegrable { .. }) => {
            notes.push(format!("critical_lambda skipped: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let mut fixed_points = Vec::new();
    if critical.is_some() {
        for &start in &cfg.fixed_point_starts {
            match self_consistent_mean(obj.as_ref(), cfg.beta, cfg.lambda, start, 1e-10, 10_000, density_axis) {
                Ok(result) => fixed_points.push(FixedPointReport { start, result }),
                Err(e @ SmoothingError::NotIntegrable { .. }) => {
                    notes.push(format!("fixed point from {start} skipped: {e}"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    let report = SmoothingReport {
        objective: cfg.objective.clone(),
        beta: cfg.beta,
        lambda: cfg.lambda,
        gamma: cfg.gamma,
        h: cfg.h,
        critical_lambda: critical,
        fixed_points,
        local_minima,
        colehopf_min,
        notes,
    };
    Ok((report, curves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{DoubleWell, Linear, Oscillatory, Quadratic, Shifted};

    const GH: Quadrature = Quadrature::GaussHermite { nodes: 128 };

    fn wide() -> Axis {
        Axis::symmetric(10.0, 4001)
    }

    /// Minimizers of a sampled 1D function, refined by parabolic interpolation.
    fn grid_minima(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        (1..n - 1)
            .filter(|&i| vs[i] < vs[i - 1] && vs[i] < vs[i + 1])
            .map(|i| (xs[i], vs[i]))
            .collect()
    }

    #[test]
    fn kernel_smooth_preserves_affine() {
        let lin = Linear {
            slope: vec![1.5],
            offset: -0.25,
        };
        for x in [-2.0, 0.0, 0.7] {
            let v = kernel_smooth(&lin, 0.8, &[x], GH).unwrap();
            assert!((v - lin.value(&[x])).abs() < 1e-10);
        }
        let lin2 = Linear {
            slope: vec![1.0, -2.0],
            offset: 0.5,
        };
        let v = kernel_smooth(&lin2, 0.3, &[0.4, 0.1], Quadrature::default_2d()).unwrap();
        assert!((v - lin2.value(&[0.4, 0.1])).abs() < 1e-10);
    }

    #[test]
    fn kernel_smooth_quadratic_shift() {
        let q = Quadratic::new(1, 1.0);
        for (x, h) in [(0.0, 0.5), (1.3, 0.1), (-2.0, 2.0)] {
            let v = kernel_smooth(&q, h, &[x], GH).unwrap();
            assert!((v - (0.5 * x * x + h / 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_smooth_rejects_bad_input() {
        assert!(kernel_smooth(&DoubleWell, 0.0, &[0.0], GH).is_err());
        let osc = Oscillatory::new(3, 0.1).unwrap();
        assert!(matches!(
            kernel_smooth(&osc, 0.1, &[0.0; 3], GH),
            Err(SmoothingError::Dimension { .. })
        ));
    }

    #[test]
    fn kernel_smoothing_flattens_double_well() {
        // The two wells merge once h >= 1/3, so compare at h = 0.1.
        let h = 0.1;
        let raw = grid_minima(|x| DoubleWell.value(&[x]), -2.0, 2.0, 4001);
        let smooth = grid_minima(|x| kernel_smooth(&DoubleWell, h, &[x], GH).unwrap(), -2.0, 2.0, 4001);
        assert_eq!(raw.len(), 2);
        assert_eq!(smooth.len(), 2);
        for (r, s) in raw.iter().zip(&smooth) {
            assert!(s.1 > r.1, "smoothed minimum {s:?} not shallower than {r:?}");
            assert!(s.0.abs() < r.0.abs());
        }
    }

    #[test]
    fn kernel_semigroup() {
        let (h1, h2) = (0.2, 0.35);
        let rule = GH.rule();
        for x in [-1.2, 0.0, 0.4, 1.7] {
            let composed = rule.expect(&[x], h1, |y| kernel_smooth(&DoubleWell, h2, y, GH).unwrap());
            let direct = kernel_smooth(&DoubleWell, h1 + h2, &[x], GH).unwrap();
            assert!((composed - direct).abs() < 1e-6);
        }
    }

    #[test]
    fn mc_gradient_limits() {
        let x = [0.6];
        let g = mc_smoothed_gradient(&DoubleWell, &x, 1e-12, 10, 1).unwrap();
        assert!((g[0] - DoubleWell.gradient_vec(&x)[0]).abs() < 1e-5);
        assert!(mc_smoothed_gradient(&DoubleWell, &x, 0.1, 0, 1).is_err());

        let q = Quadratic::new(2, 1.0);
        let n = 4000;
        let h = 0.5;
        let g = mc_smoothed_gradient(&q, &[1.0, -2.0], h, n, 3).unwrap();
        let se = (h / n as f64).sqrt();
        assert!((g[0] - 1.0).abs() < 4.0 * se && (g[1] + 2.0).abs() < 4.0 * se);
    }

    #[test]
    fn mc_gradient_matches_quadrature() {
        let (x, h, n) = ([1.0], 0.5, 1_000_000);
        let exact = kernel_smooth_gradient(&DoubleWell, h, &x, GH).unwrap()[0];
        // Closed form: E[(1+xi)^3 - (1+xi)] = 1 + 3h - 1 = 3h.
        assert!((exact - 3.0 * h).abs() < 1e-12);
        let est = mc_smoothed_gradient(&DoubleWell, &x, h, n, 11).unwrap()[0];
        // Per-draw variance of (1+xi)^3 - (1+xi) by quadrature.
        let var = GH.rule().expect(&x, h, |y| {
            let g = y[0].powi(3) - y[0] - exact;
            g * g
        });
        let se = (var / n as f64).sqrt();
        assert!((est - exact).abs() < 3.0 * se, "{est} vs {exact} (se {se})");
    }

    #[test]
    fn stationary_density_gaussian() {
        let rho = stationary_density(&Quadratic::new(1, 1.0), 1.0, &Lattice::one(wide())).unwrap();
        assert!((rho.mass() - 1.0).abs() < 1e-8);
        assert!(rho.mean()[0].abs() < 1e-8);
        assert!((rho.variance() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stationary_density_concentrates_with_beta() {
        let lat = Lattice::one(Axis::symmetric(6.0, 2001));
        let v1 = stationary_density(&DoubleWell, 1.0, &lat).unwrap().variance();
        let v2 = stationary_density(&DoubleWell, 2.0, &lat).unwrap().variance();
        assert!(v2 < v1, "{v2} >= {v1}");
        let rho = stationary_density(&DoubleWell, 3.0, &lat).unwrap();
        assert_eq!(rho.mean()[0], 0.0);
    }

    #[test]
    fn stationary_density_ignores_constant_shift() {
        let lat = Lattice::one(Axis::symmetric(6.0, 1001));
        let a = stationary_density(&DoubleWell, 2.0, &lat).unwrap();
        let shifted = Shifted {
            inner: DoubleWell,
            shift: 123.0,
        };
        let b = stationary_density(&shifted, 2.0, &lat).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() <= 1e-10 * u.max(1.0));
        }
    }

    #[test]
    fn stationary_density_flags_truncation() {
        let lat = Lattice::one(Axis::symmetric(2.0, 201));
        assert!(matches!(
            stationary_density(&Quadratic::new(1, 1.0), 1.0, &lat),
            Err(SmoothingError::NotIntegrable { .. })
        ));
    }

    #[test]
    fn stationary_density_2d() {
        let lat = Lattice::two(Axis::symmetric(8.0, 401), Axis::symmetric(8.0, 401));
        let rho = stationary_density(&Quadratic::new(2, 1.0), 1.0, &lat).unwrap();
        assert!((rho.mass() - 1.0).abs() < 1e-8);
        let m = rho.mean();
        assert!(m[0].abs() < 1e-10 && m[1].abs() < 1e-10);
    }

    #[test]
    fn self_consistent_mean_examples() {
        let fp = self_consistent_mean(&DoubleWell, 2.0, 3.0, 0.0, 1e-10, 100, Axis::symmetric(6.0, 2001)).unwrap();
        assert_eq!(fp.mean, 0.0);
        assert_eq!(fp.iterations, 1);

        // Quadratic: m -> lambda m / (1 + lambda), unique root 0.
        let q = Quadratic::new(1, 1.0);
        let fp = self_consistent_mean(&q, 1.0, 2.0, 1.5, 1e-12, 1000, wide()).unwrap();
        assert!(fp.converged && fp.mean.abs() < 1e-10);
        let one_step = tilted_density(&q, 1.0, 2.0, 1.5, wide()).unwrap().mean()[0];
        assert!((one_step - 1.0).abs() < 1e-9);

        let fp = self_consistent_mean(&DoubleWell, 5.0, 5.0, 0.5, 1e-10, 10_000, Axis::symmetric(6.0, 2001)).unwrap();
        assert!(fp.converged && fp.mean > 0.5, "{fp:?}");
    }

    #[test]
    fn positive_root_exists_by_scan() {
        // Brute-force scan of m -> mean(eta^m) - m on [0.05, 2].
        let axis = Axis::symmetric(6.0, 2001);
        let f = |m: f64| tilted_density(&DoubleWell, 5.0, 5.0, m, axis).unwrap().mean()[0] - m;
        let ms: Vec<f64> = (1..=40).map(|i| 0.05 * i as f64).collect();
        assert!(ms.windows(2).any(|w| f(w[0]) * f(w[1]) <= 0.0));
    }

    #[test]
    fn critical_lambda_quadratic() {
        for beta in [0.5, 1.0, 4.0] {
            let lc = critical_lambda(&Quadratic::new(1, 1.0), beta, Axis::symmetric(40.0, 8001)).unwrap();
            assert!((lc - 1.0).abs() < 1e-6, "beta {beta}: {lc}");
        }
        let lc = critical_lambda(&Quadratic::new(1, 3.0), 1.0, wide()).unwrap();
        assert!((lc - 3.0).abs() < 1e-6);
    }

    #[test]
    fn critical_lambda_separates_phases() {
        let axis = Axis::symmetric(6.0, 2001);
        let lc = critical_lambda(&DoubleWell, 5.0, axis).unwrap();
        // Scan the fixed-point map for positive roots.
        let positive_root = |lambda: f64| {
            let f = |m: f64| tilted_density(&DoubleWell, 5.0, lambda, m, axis).unwrap().mean()[0] - m;
            let ms: Vec<f64> = (1..=60).map(|i| 0.025 * i as f64).collect();
            ms.windows(2).any(|w| f(w[0]) * f(w[1]) <= 0.0)
        };
        assert!(positive_root(2.0 * lc));
        assert!(!positive_root(0.5 * lc));
        let fp = self_consistent_mean(&DoubleWell, 5.0, 2.0 * lc, 0.8, 1e-10, 100_000, axis).unwrap();
        assert!(fp.converged && fp.mean > 1e-3, "{fp:?}");
        let fp = self_consistent_mean(&DoubleWell, 5.0, 0.5 * lc, 0.8, 1e-10, 100_000, axis).unwrap();
        assert!(fp.converged && fp.mean.abs() < 1e-6, "{fp:?}");
    }

    #[test]
    fn cole_hopf_quadratic_closed_form() {
        let q = Quadratic::new(1, 1.0);
        for (beta, gamma) in [(1.0, 0.1), (10.0, 0.5), (2.0, 3.0)] {
            for x in [-1.5, 0.0, 0.8] {
                let v = cole_hopf(&q, beta, gamma, &[x], GH, ColeHopfSign::Regularized).unwrap();
                let expected = x * x / (2.0 * (1.0 + gamma)) + (1.0f64 + gamma).ln() / (2.0 * beta);
                assert!((v - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cole_hopf_literal_sign_flips() {
        let a = cole_hopf(&DoubleWell, 2.0, 0.3, &[0.4], GH, ColeHopfSign::Regularized).unwrap();
        let b = cole_hopf(&DoubleWell, 2.0, 0.3, &[0.4], GH, ColeHopfSign::Literal).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn cole_hopf_small_gamma_recovers_phi() {
        for x in [-1.5, -1.0, 0.0, 0.3, 1.2] {
            let v = cole_hopf(&DoubleWell, 1.0, 1e-6, &[x], GH, ColeHopfSign::Regularized).unwrap();
            assert!((v - DoubleWell.value(&[x])).abs() < 1e-3);
        }
    }

    #[test]
    fn cole_hopf_below_kernel_average() {
        let (beta, gamma) = (2.0, 0.4);
        let rule = GH.rule();
        for i in 0..=40 {
            let x = -2.0 + 0.1 * i as f64;
            let ch = cole_hopf(&DoubleWell, beta, gamma, &[x], GH, ColeHopfSign::Regularized).unwrap();
            let avg = rule.expect(&[x], gamma / beta, |y| DoubleWell.value(y));
            assert!(ch <= avg + 1e-12, "x={x}: {ch} > {avg}");
        }
    }

    fn minima_count(obj: &dyn Objective, beta: f64, gamma: f64, quad: Quadrature) -> usize {
        let axis = Axis::new(-3.0, 3.0, 601);
        let vals: Vec<f64> = axis
            .nodes()
            .iter()
            .map(|&x| cole_hopf(obj, beta, gamma, &[x], quad, ColeHopfSign::Regularized).unwrap())
            .collect();
        count_local_minima(&vals)
    }

    #[test]
    fn cole_hopf_minima_nonincreasing_in_gamma() {
        let gammas = [1e-4, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
        let dw: Vec<usize> = gammas.iter().map(|&g| minima_count(&DoubleWell, 1.0, g, GH)).collect();
        assert!(dw.windows(2).all(|w| w[1] <= w[0]), "{dw:?}");
        assert_eq!(dw[0], 2);
        assert_eq!(*dw.last().unwrap(), 1);

        // exp(-beta Phi) has narrow spikes here; Gauss-Hermite under-resolves
        // them for large gamma, so use the dense trapezoid rule.
        let trap = Quadrature::Trapezoid {
            half_width: 12.0,
            points: 24_001,
        };
        let osc = Oscillatory::new(1, 0.3).unwrap();
        let counts: Vec<usize> = gammas.iter().map(|&g| minima_count(&osc, 1.0, g, trap)).collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
        assert!(counts[0] > *counts.last().unwrap());
    }

    #[test]
    fn quadrature_self_convergence() {
        let x = [0.37];
        for quad in [
            GH,
            Quadrature::Trapezoid {
                half_width: 12.0,
                points: 4001,
            },
        ] {
            let fine = quad.refined();
            let pairs = [
                (
                    kernel_smooth(&DoubleWell, 0.4, &x, quad).unwrap(),
                    kernel_smooth(&DoubleWell, 0.4, &x, fine).unwrap(),
                ),
                (
                    cole_hopf(&DoubleWell, 2.0, 0.5, &x, quad, ColeHopfSign::Regularized).unwrap(),
                    cole_hopf(&DoubleWell, 2.0, 0.5, &x, fine, ColeHopfSign::Regularized).unwrap(),
                ),
            ];
            for (a, b) in pairs {
                assert!((a - b).abs() < 1e-6, "{quad:?}: {a} vs {b}");
            }
        }
        let coarse = stationary_density(&DoubleWell, 2.0, &Lattice::one(Axis::symmetric(6.0, 1001))).unwrap();
        let fine = stationary_density(&DoubleWell, 2.0, &Lattice::one(Axis::symmetric(6.0, 2001))).unwrap();
        assert!((coarse.variance() - fine.variance()).abs() < 1e-6);
    }

    /// Zero potential, for entropy-only checks.
    struct Zero;

    impl Objective for Zero {
        fn id(&self) -> &str {
            "zero"
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _x: &[f64]) -> f64 {
            0.0
        }
        fn gradient(&self, _x: &[f64], g: &mut [f64]) {
            g.fill(0.0)
        }
    }

    #[test]
    fn free_energy_examples() {
        let uniform = GridDensity::normalized(Lattice::one(Axis::new(0.0, 1.0, 101)), vec![1.0; 101]);
        assert!(free_energy(&uniform, &Zero, 1.0, 0.0).unwrap().abs() < 1e-14);

        let gauss = stationary_density(&Quadratic::new(1, 1.0), 1.0, &Lattice::one(wide())).unwrap();
        let f = free_energy(&gauss, &Zero, 1.0, 0.0).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((f - expected).abs() < 1e-8, "{f}");
        assert!((expected + 1.4189).abs() < 1e-4);
    }

    #[test]
    fn stationary_state_minimizes_free_energy() {
        let (beta, axis) = (5.0, Axis::symmetric(6.0, 2001));
        let lc = critical_lambda(&DoubleWell, beta, axis).unwrap();
        let lambda = 0.5 * lc;
        let fp = self_consistent_mean(&DoubleWell, beta, lambda, 0.0, 1e-12, 100, axis).unwrap();
        let eta = tilted_density(&DoubleWell, beta, lambda, fp.mean, axis).unwrap();
        let shifted_values: Vec<f64> = axis
            .nodes()
            .iter()
            .map(|&x| {
                let y = x - 0.1;
                let d = y - fp.mean;
                (-beta * (DoubleWell.value(&[y]) + 0.5 * lambda * d * d)).exp()
            })
            .collect();
        let shifted = GridDensity::normalized(Lattice::one(axis), shifted_values);
        let f0 = free_energy(&eta, &DoubleWell, beta, lambda).unwrap();
        let f1 = free_energy(&shifted, &DoubleWell, beta, lambda).unwrap();
        assert!(f0 <= f1, "{f0} > {f1}");
    }

    #[test]
    fn diagnose_double_well() {
        let (report, curves) = diagnose(&SmoothingConfig::default()).unwrap();
        assert_eq!(curves.len(), 401);
        assert!(report.critical_lambda.unwrap() > 0.0);
        assert_eq!(report.fixed_points.len(), 3);
        assert_eq!(report.local_minima.phi, 2);
        assert!(report.local_minima.colehopf <= report.local_minima.phi);
        assert!(curves
            .iter()
            .all(|c| c.phi_kernel_h.is_finite() && c.phi_colehopf_gamma.is_finite()));
    }

    #[test]
    fn diagnose_skips_mean_field_on_truncated_grid() {
        let cfg = SmoothingConfig {
            objective: "quadratic".into(),
            beta: 1.0,
            density_half_width: 2.0,
            ..SmoothingConfig::default()
        };
        let (report, _) = diagnose(&cfg).unwrap();
        assert!(report.critical_lambda.is_none());
        assert!(!report.notes.is_empty());
    }
}
