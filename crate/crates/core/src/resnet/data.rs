use serde::{Deserialize, Serialize};

use crate::noise::NoiseStream;

/// Generation settings for the two-ellipse dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipseSpec {
    pub n_per_class: usize,
    pub noise_sigma: f64,
    /// Semi-axes (x, y) of the class-0 ellipse.
    pub inner: [f64; 2],
    /// Semi-axes (x, y) of the class-1 ellipse.
    pub outer: [f64; 2],
    /// Points are clipped to `[-clip[0], clip[0]] x [-clip[1], clip[1]]`.
    pub clip: [f64; 2],
    /// Fraction of each class assigned to the training split.
    pub train_fraction: f64,
}

impl Default for EllipseSpec {
    fn default() -> Self {
        Self {
            n_per_class: 500,
            noise_sigma: 0.05,
            inner: [0.35, 0.7],
            outer: [0.8, 1.6],
            clip: [1.0, 2.0],
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub point: [f64; 2],
    /// 0 for the inner ellipse, 1 for the outer.
    pub label: u8,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseDataset {
    pub samples: Vec<Sample>,
    pub seed: u64,
    pub spec: EllipseSpec,
}

impl EllipseDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// Points and labels of one split, as parallel vectors.
    pub fn batch(&self, split: Split) -> Batch {
        let (points, labels) = self.split(split).map(|s| (s.point, f64::from(s.label))).unzip();
        Batch { points, labels }
    }
}

/// A set of labelled inputs for loss evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Class membership by the ellipse halfway between the two classes,
/// `(x/0.55)^2 + (y/1.1)^2 > 1` for the default axes.
pub fn mid_ellipse_label(spec: &EllipseSpec, p: [f64; 2]) -> u8 {
    let a = 0.5 * (spec.inner[0] + spec.outer[0]);
    let b = 0.5 * (spec.inner[1] + spec.outer[1]);
    u8::from((p[0] / a).powi(2) + (p[1] / b).powi(2) > 1.0)
}

/// Samples both classes: uniform angle, radius `1 + sigma z`, clipped to the
/// data box. Each class draws from its own noise lane, and the first
/// `round(train_fraction * n)` points of each class form the training split.
pub fn generate_ellipses(spec: &EllipseSpec, seed: u64) -> EllipseDataset {
    assert!(spec.n_per_class >= 1, "need at least one point per class");
    let n_train = (spec.train_fraction * spec.n_per_class as f64).round() as usize;
    let mut samples = Vec::with_capacity(2 * spec.n_per_class);
    for (label, axes) in [(0u8, spec.inner), (1u8, spec.outer)] {
        let mut noise = NoiseStream::for_agent(seed, 0, label as usize);
        for k in 0..spec.n_per_class {
            let theta = noise.uniform(0.0, std::f64::consts::TAU);
            let r = 1.0 + spec.noise_sigma * noise.standard_normal();
            let x = (axes[0] * r * theta.cos()).clamp(-spec.clip[0], spec.clip[0]);
            let y = (axes[1] * r * theta.sin()).clamp(-spec.clip[1], spec.clip[1]);
            let split = if k < n_train { Split::Train } else { Split::Test };
            samples.push(Sample {
                point: [x, y],
                label,
                split,
            });
        }
    }
    EllipseDataset {
        samples,
        seed,
        spec: *spec,
    }
}
