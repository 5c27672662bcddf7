use serde::{Deserialize, Serialize};

/// Uniform axis with `points` nodes from `lo` to `hi` inclusive.
///
/// Nodes are placed as `c + r (2i - (n-1)) / (n-1)` about the centre `c`, so
/// an axis symmetric about zero has exactly mirrored nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        assert!(lo < hi, "axis needs lo < hi, got [{lo}, {hi}]");
        assert!(points >= 3, "axis needs at least 3 points");
        Self { lo, hi, points }
    }

    /// Axis on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, points: usize) -> Self {
        Self::new(-half_width, half_width, points)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        let centre = 0.5 * (self.lo + self.hi);
        let radius = 0.5 * (self.hi - self.lo);
        let n1 = (self.points - 1) as f64;
        centre + radius * (2.0 * i as f64 - n1) / n1
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.point(i)).collect()
    }

    fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.points - 1 {
            0.5 * self.step()
        } else {
            self.step()
        }
    }

    /// Trapezoid integral of sampled values, summed in mirrored pairs
    /// `(i, n-1-i)` so that odd integrands on symmetric axes cancel exactly.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.points);
        let n = self.points;
        let mut acc = 0.0;
        for i in 0..n / 2 {
            let j = n - 1 - i;
            acc += self.weight(i) * values[i] + self.weight(j) * values[j];
        }
        if n % 2 == 1 {
            acc += self.weight(n / 2) * values[n / 2];
        }
        acc
    }
}

/// A 1D or 2D tensor lattice. Values are stored row-major (first axis outer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub axes: Vec<Axis>,
}

impl Lattice {
    pub fn one(axis: Axis) -> Self {
        Self { axes: vec![axis] }
    }

    pub fn two(x: Axis, y: Axis) -> Self {
        Self { axes: vec![x, y] }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every lattice point in storage order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self.axes.as_slice() {
            [a] => a.nodes().into_iter().map(|x| vec![x]).collect(),
            [a, b] => {
                let ys = b.nodes();
                a.nodes()
                    .into_iter()
                    .flat_map(|x| ys.iter().map(move |&y| vec![x, y]))
                    .collect()
            }
            _ => panic!("lattice must be 1D or 2D"),
        }
    }

    /// Whether storage index `k` lies on the lattice boundary.
    pub fn on_boundary(&self, k: usize) -> bool {
        match self.axes.as_slice() {
            [a] => k == 0 || k == a.points - 1,
            [a, b] => {
                let (i, j) = (k / b.points, k % b.points);
                i == 0 || j == 0 || i == a.points - 1 || j == b.points - 1
            }
            _ => unreachable!(),
        }
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        match self.axes.as_slice() {
            [a] => a.integrate(values),
            [a, b] => {
                let rows: Vec<f64> = values.chunks_exact(b.points).map(|r| b.integrate(r)).collect();
                a.integrate(&rows)
            }
            _ => unreachable!(),
        }
    }
}

/// A normalized density sampled on a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl GridDensity {
    /// Normalizes non-negative samples to unit trapezoid mass.
    pub fn normalized(lattice: Lattice, mut values: Vec<f64>) -> Self {
        let mass = lattice.integrate(&values);
        assert!(mass > 0.0 && mass.is_finite(), "density has mass {mass}");
        values.iter_mut().for_each(|v| *v /= mass);
        Self { lattice, values }
    }

    pub fn mass(&self) -> f64 {
        self.lattice.integrate(&self.values)
    }

    /// `E[f(x)]` under the density.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let weighted: Vec<f64> = self
            .lattice
            .points()
            .iter()
            .zip(&self.values)
            .map(|(p, v)| v * f(p))
            .collect();
        self.lattice.integrate(&weighted)
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.lattice.dim()).map(|k| self.expect(|p| p[k])).collect()
    }

    /// Variance of the first coordinate (1D diagnostics).
    pub fn variance(&self) -> f64 {
        let m = self.expect(|p| p[0]);
        self.expect(|p| (p[0] - m) * (p[0] - m))
    }
}
