/// Positions of `N` agents in `R^d`, stored row-major, plus the fast
/// variables of the homogenized methods.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    dim: usize,
    positions: Vec<f64>,
    fast: Option<Vec<f64>>,
    /// Completed outer iterations.
    pub iter: usize,
}

impl ParticleSystem {
    /// Builds a system from one row per agent.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "particle system needs at least one agent");
        let dim = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == dim), "ragged agent rows");
        Self {
            dim,
            positions: rows.concat(),
            fast: None,
            iter: 0,
        }
    }

    pub fn from_flat(dim: usize, positions: Vec<f64>) -> Self {
        assert!(dim > 0 && !positions.is_empty() && positions.len().is_multiple_of(dim));
        Self {
            dim,
            positions,
            fast: None,
            iter: 0,
        }
    }

    /// Sets every fast variable equal to its slow counterpart.
    pub fn with_fast_from_positions(mut self) -> Self {
        self.fast = Some(self.positions.clone());
        self
    }

    pub fn with_fast(mut self, fast: Vec<f64>) -> Self {
        assert_eq!(fast.len(), self.positions.len());
        self.fast = Some(fast);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agents(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn fast_agent(&self, i: usize) -> Option<&[f64]> {
        self.fast.as_ref().map(|f| &f[i * self.dim..(i + 1) * self.dim])
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn fast(&self) -> Option<&[f64]> {
        self.fast.as_deref()
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], Option<&mut [f64]>) {
        (&mut self.positions, self.fast.as_deref_mut())
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    /// Empirical mean `(1/N) sum_j X_j`. Each coordinate is summed in sorted
    /// order, so the result is bitwise invariant under agent permutations.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.agents();
        let mut column = vec![0.0; n];
        (0..self.dim)
            .map(|k| {
                for (c, row) in column.iter_mut().zip(self.rows()) {
                    *c = row[k];
                }
                column.sort_unstable_by(f64::total_cmp);
                column.iter().sum::<f64>() / n as f64
            })
            .collect()
    }

    /// Index of the first agent with a non-finite slow or fast coordinate.
    pub fn first_non_finite(&self) -> Option<(usize, bool)> {
        let bad = |v: &[f64]| v.iter().position(|x| !x.is_finite()).map(|k| k / self.dim);
        let slow = bad(&self.positions);
        let fast = self.fast.as_deref().and_then(bad);
        match (slow, fast) {
            (Some(a), Some(b)) if b < a => Some((b, true)),
            (Some(a), _) => Some((a, false)),
            (None, Some(b)) => Some((b, true)),
            (None, None) => None,
        }
    }

    /// Applies a permutation: agent `k` of the result is agent `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.agents());
        let gather = |src: &[f64]| {
            perm.iter()
                .flat_map(|&p| src[p * self.dim..(p + 1) * self.dim].iter().copied())
                .collect::<Vec<_>>()
        };
        Self {
            dim: self.dim,
            positions: gather(&self.positions),
            fast: self.fast.as_deref().map(gather),
            iter: self.iter,
        }
    }
}
