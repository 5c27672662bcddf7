//! Two-ellipse classification with a residual network obtained by
//! discretizing `dY/dt = tanh(K(t) Y + b(t))` over 128 layers.
//!
//! The whole 774-dimensional parameter vector is one agent position: the
//! optimizers in [`crate::dynamics`] train it directly, and mean-field methods
//! couple several replicas through their parameter-space mean.

mod data;
mod net;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use data::{generate_ellipses, mid_ellipse_label, Batch, EllipseDataset, EllipseSpec, Sample, Split};
pub use net::{
    bce_with_logit, sigmoid, Architecture, ArchitectureError, LossGrad, Scheme, Trace, UnknownScheme, VerletNet,
    LAYERS, NET_STEP, PARAM_COUNT, WIDTH,
};

use crate::dynamics::{run_method, HyperParams, Method, NullSink, ParticleSystem, RunError};
use crate::noise::NoiseStream;
use crate::objectives::Objective;

/// Training loss seen by the optimizer: `scale * mean BCE`.
///
/// With `scale = n_train` this is the summed cross-entropy, whose Gibbs
/// measure `exp(-beta Phi)` concentrates on good networks at moderate beta;
/// the mean loss at the same beta is dominated by the noise.
#[derive(Debug, Clone)]
pub struct EllipseLoss {
    pub arch: Architecture,
    pub batch: Arc<Batch>,
    pub scale: f64,
}

impl EllipseLoss {
    pub fn new(arch: Architecture, batch: Batch, scale: f64) -> Self {
        Self {
            arch,
            batch: Arc::new(batch),
            scale,
        }
    }

    fn net(&self, x: &[f64]) -> VerletNet {
        VerletNet::new(self.arch, x.to_vec()).expect("position length matches the architecture")
    }
}

impl Objective for EllipseLoss {
    fn id(&self) -> &str {
        "ellipse-bce"
    }

    fn dim(&self) -> usize {
        self.arch.param_count()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.scale * self.net(x).loss(&self.batch)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let lg = self.net(x).loss_and_grad(&self.batch);
        for (g, v) in grad.iter_mut().zip(lg.grad) {
            *g = self.scale * v;
        }
    }

    fn reference_box(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossScale {
    /// Mean cross-entropy times the number of training points.
    Sum,
    Mean,
}

/// Training schedule on top of the optimizer's hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Full-batch outer iterations per epoch.
    pub iters_per_epoch: usize,
    /// Standard deviation of the Gaussian parameter initialization.
    pub init_sd: f64,
    pub loss_scale: LossScale,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            iters_per_epoch: 5,
            init_sd: 0.5,
            loss_scale: LossScale::Sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy of the reported replica on the training split.
    pub train_loss: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The replica with the lowest final training loss.
    pub net: VerletNet,
    pub curve: Vec<EpochRecord>,
    pub system: ParticleSystem,
}

/// Trains `hp.agents` replicas with `method`. Epoch 0 of the curve is the
/// initialization; each later epoch runs `iters_per_epoch` outer steps.
pub fn train(
    dataset: &EllipseDataset,
    scheme: Scheme,
    method: Method,
    hp: &HyperParams,
    seed: u64,
    opts: &TrainOptions,
) -> Result<TrainOutcome, RunError> {
    let arch = Architecture::standard(scheme);
    let train_batch = dataset.batch(Split::Train);
    let test_batch = dataset.batch(Split::Test);
    let scale = match opts.loss_scale {
        LossScale::Sum => train_batch.len() as f64,
        LossScale::Mean => 1.0,
    };
    let objective = EllipseLoss::new(arch, train_batch.clone(), scale);
    let dim = arch.param_count();

    let mut init = NoiseStream::for_init(seed, 0);
    let positions = (0..hp.agents * dim)
        .map(|_| opts.init_sd * init.standard_normal())
        .collect();
    let mut sys = ParticleSystem::from_flat(dim, positions);
    let mut noise = NoiseStream::agents(seed, 0, hp.agents);
    let epoch_hp = HyperParams {
        iters: opts.iters_per_epoch,
        ..hp.clone()
    };

    let evaluate = |sys: &ParticleSystem, epoch: usize| {
        let (net, train_loss) = best_replica(sys, arch, &train_batch);
        let record = EpochRecord {
            epoch,
            train_loss,
            test_acc: net.accuracy(&test_batch),
        };
        (net, record)
    };
    let (mut net, first) = evaluate(&sys, 0);
    let mut curve = vec![first];
    for epoch in 1..=opts.epochs {
        sys = run_method(method, &objective, &epoch_hp, sys, &mut noise, &mut NullSink)?;
        let (best, record) = evaluate(&sys, epoch);
        net = best;
        curve.push(record);
    }
    Ok(TrainOutcome {
        net,
        curve,
        system: sys,
    })
}

fn best_replica(sys: &ParticleSystem, arch: Architecture, batch: &Batch) -> (VerletNet, f64) {
    sys.rows()
        .map(|row| {
            let net = VerletNet::new(arch, row.to_vec()).expect("row length matches the architecture");
            let loss = net.loss(batch);
            (net, loss)
        })
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
        .expect("at least one replica")
}

/// Class-1 probabilities on a uniform lattice, stored with `x` varying
/// fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ProbabilityGrid {
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let nx = self.xs.len();
        self.probs
            .iter()
            .enumerate()
            .map(move |(k, &p)| (self.xs[k % nx], self.ys[k / nx], p))
    }
}

/// Default export region: twice the data range in each direction.
pub const GRID_X: (f64, f64) = (-2.0, 2.0);
pub const GRID_Y: (f64, f64) = (-4.0, 4.0);

pub fn probability_grid(net: &VerletNet, x: (f64, f64), y: (f64, f64), resolution: (usize, usize)) -> ProbabilityGrid {
    assert!(
        resolution.0 >= 2 && resolution.1 >= 2,
        "need at least 2 points per axis"
    );
    let axis = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let xs = axis(x, resolution.0);
    let ys = axis(y, resolution.1);
    let probs = ys
        .par_iter()
        .flat_map_iter(|&yv| xs.iter().map(move |&xv| net.probability([xv, yv])))
        .collect();
    ProbabilityGrid { xs, ys, probs }
}

/// Mean `|p - oracle|` over the grid points inside the data box, with the
/// mid-ellipse membership as oracle.
pub fn oracle_gap(net: &VerletNet, spec: &EllipseSpec, resolution: usize) -> f64 {
    let grid = probability_grid(
        net,
        (-spec.clip[0], spec.clip[0]),
        (-spec.clip[1], spec.clip[1]),
        (resolution, resolution),
    );
    let total: f64 = grid
        .iter()
        .map(|(x, y, p)| (p - f64::from(mid_ellipse_label(spec, [x, y]))).abs())
        .sum();
    total / grid.probs.len() as f64
}
