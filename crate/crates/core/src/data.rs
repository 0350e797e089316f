//! Synthetic two-community data: stochastic block model graphs and smooth
//! community-mean signals on them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GadError, Result};
use crate::graph::{Graph, Spectrum};

pub const SBM_MAX_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// `M` signals on a common graph, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDataset {
    signals: DMatrix<f64>,
    split: Split,
}

impl SignalDataset {
    pub fn new(signals: DMatrix<f64>, split: Split) -> Result<Self> {
        if signals.nrows() == 0 {
            return Err(GadError::param("dataset must contain at least one signal"));
        }
        if let Some(pos) = signals.iter().position(|v| !v.is_finite()) {
            let row = pos % signals.nrows();
            return Err(GadError::param(format!("signal {row} has a non-finite entry")));
        }
        Ok(SignalDataset { signals, split })
    }

    pub fn from_columns(columns: &DMatrix<f64>, split: Split) -> Result<Self> {
        Self::new(columns.transpose(), split)
    }

    pub fn len(&self) -> usize {
        self.signals.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.nrows() == 0
    }

    pub fn num_nodes(&self) -> usize {
        self.signals.ncols()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    /// Rows are signals.
    pub fn signals(&self) -> &DMatrix<f64> {
        &self.signals
    }

    pub fn signal(&self, i: usize) -> DVector<f64> {
        self.signals.row(i).transpose()
    }

    pub fn iter(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        self.signals.row_iter().map(|r| r.transpose())
    }

    pub fn check_graph(&self, n: usize) -> Result<()> {
        if self.num_nodes() != n {
            return Err(GadError::DimensionMismatch { expected: n, got: self.num_nodes() });
        }
        Ok(())
    }
}

/// Stochastic block model with equally sized communities. Node `i` belongs to
/// community `i / nodes_per_community`. Resamples until connected.
pub fn generate_sbm(
    nodes_per_community: usize,
    num_communities: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Vec<usize>)> {
    if nodes_per_community == 0 || num_communities == 0 {
        return Err(GadError::param("SBM needs at least one community with one node"));
    }
    if !(p_in > 0.0 && p_in <= 1.0) || !(0.0..=1.0).contains(&p_out) {
        return Err(GadError::param(format!("SBM probabilities out of range: p_in={p_in}, p_out={p_out}")));
    }
    if p_in < p_out {
        return Err(GadError::param(format!("SBM needs p_in >= p_out (got {p_in} < {p_out})")));
    }
    let n = nodes_per_community * num_communities;
    let communities: Vec<usize> = (0..n).map(|i| i / nodes_per_community).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SBM_MAX_RETRIES {
        let mut adjacency = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let p = if communities[i] == communities[j] { p_in } else { p_out };
                if rng.random::<f64>() < p {
                    adjacency[(i, j)] = 1.0;
                    adjacency[(j, i)] = 1.0;
                }
            }
        }
        if crate::graph::is_connected(&adjacency) {
            return Graph::new(adjacency).map(|g| (g, communities));
        }
    }
    Err(GadError::Disconnected { retries: SBM_MAX_RETRIES })
}

/// Per-node Gaussian draws with unit variance and mean `+1` on even
/// communities, `−1` on odd ones, smoothed by `(I + τL)^{−1}`.
pub fn generate_smooth_signals(
    spectrum: &Spectrum,
    communities: &[usize],
    num_signals: usize,
    tau: f64,
    split: Split,
    seed: u64,
) -> Result<SignalDataset> {
    let n = spectrum.num_nodes();
    if communities.len() != n {
        return Err(GadError::DimensionMismatch { expected: n, got: communities.len() });
    }
    if !(tau >= 0.0) {
        return Err(GadError::param(format!("smoothing strength must be >= 0, got {tau}")));
    }
    let means = community_means(communities);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(n, num_signals, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut raw = raw;
    for mut col in raw.column_iter_mut() {
        col += &means;
    }
    let smoothed = if tau == 0.0 {
        raw
    } else {
        let response = spectrum.eigenvalues().map(|lam| 1.0 / (1.0 + tau * lam));
        spectrum.apply_spectral_columns(&response, &raw)
    };
    SignalDataset::from_columns(&smoothed, split)
}

/// `+1` for even community indices, `−1` for odd.
pub fn community_means(communities: &[usize]) -> DVector<f64> {
    DVector::from_iterator(
        communities.len(),
        communities.iter().map(|&c| if c % 2 == 0 { 1.0 } else { -1.0 }),
    )
}
