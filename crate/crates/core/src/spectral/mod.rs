//! Layer spectra, periodic eigenvalue vectors, shared histogram grid, and
//! the per-bin spectral-ergodicity distribution
//!
//! ```text
//! Ω^L(b_k) = 1/(L·N) · Σ_{j=1..L} (ρ_j(b_k) − ρ̄^L(b_k))²
//! ```
//!
//! where `ρ̄^L` is the mean density over the first `L` layers and `N` the
//! ensemble-wide maximum layer size.

pub mod eigen;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{LayerMatrix, LayerMatrixEnsemble};

pub use eigen::{symmetric_eigen, symmetric_eigenvalues, EigenDecomposition, EigenError};

/// Relative PSD tolerance: eigenvalues down to `-PSD_TOL * max(diag X)` are
/// treated as rounding noise and clamped to zero.
pub const PSD_TOL: f64 = 1e-10;

/// Upper grid edge is pushed out by this fraction of the value span.
pub const GRID_INFLATION: f64 = 1e-9;

/// Offset used when histogramming `log10(λ + LOG_EIG_OFFSET)`.
pub const LOG_EIG_OFFSET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("layer '{name}': {source}")]
    Eigen {
        name: String,
        #[source]
        source: EigenError,
    },
    #[error("layer '{name}': eigenvalue {value:e} below -{tol:e}, matrix is not PSD")]
    NotPsd { name: String, value: f64, tol: f64 },
    #[error("cannot extend a spectrum of length {len} to {target}")]
    ExtendTooShort { len: usize, target: usize },
    #[error("need at least one spectrum")]
    NoSpectra,
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("non-finite spectral value {0}")]
    NonFinite(f64),
    #[error("bin edges must be strictly increasing")]
    BadEdges,
    #[error("value {value} outside grid [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("densities are on different grids")]
    GridMismatch,
}

/// Eigenvalues of one layer matrix, sorted descending and clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub source_name: String,
}

/// A spectrum tiled cyclically to length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpectrum {
    pub values: Vec<f64>,
    pub source_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    edges: Vec<f64>,
    centres: Vec<f64>,
}

impl BinGrid {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self, SpectralError> {
        if edges.len() < 3 {
            return Err(SpectralError::TooFewBins(edges.len().saturating_sub(1)));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SpectralError::BadEdges);
        }
        let centres = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self { edges, centres })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centres(&self) -> &[f64] {
        &self.centres
    }

    pub fn bins(&self) -> usize {
        self.centres.len()
    }

    /// Bin holding `v`: half-open `[e_k, e_{k+1})`, last bin closed.
    pub fn bin_index(&self, v: f64) -> Option<usize> {
        let last = *self.edges.last().unwrap();
        if !(v >= self.edges[0] && v <= last) {
            return None;
        }
        let upper = self.edges.partition_point(|&e| e <= v);
        Some((upper - 1).min(self.bins() - 1))
    }
}

/// Probability mass per bin of one periodic spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub masses: Vec<f64>,
    pub grid: Arc<BinGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaDistribution {
    pub values: Vec<f64>,
    pub depth: usize,
    pub n: usize,
}

/// Full spectrum of `x`, clamped and sorted descending.
pub fn eig_sym(x: &LayerMatrix) -> Result<Spectrum, SpectralError> {
    let mut values = symmetric_eigenvalues(&x.matrix).map_err(|source| SpectralError::Eigen {
        name: x.source_name.clone(),
        source,
    })?;
    let max_diag = x.matrix.diagonal().iter().copied().fold(0.0, f64::max);
    let tol = PSD_TOL * max_diag;
    for v in &mut values {
        if !v.is_finite() {
            return Err(SpectralError::NonFinite(*v));
        }
        if *v < 0.0 {
            if *v < -tol {
                return Err(SpectralError::NotPsd {
                    name: x.source_name.clone(),
                    value: *v,
                    tol,
                });
            }
            *v = 0.0;
        }
    }
    Ok(Spectrum {
        values,
        source_name: x.source_name.clone(),
    })
}

/// Tile `s` cyclically: `out[i] = s[i mod N_l]` for `i < n`.
pub fn periodic_extend(s: &Spectrum, n: usize) -> Result<PeriodicSpectrum, SpectralError> {
    let len = s.values.len();
    if len == 0 || n < len {
        return Err(SpectralError::ExtendTooShort { len, target: n });
    }
    let values = s.values.iter().copied().cycle().take(n).collect();
    Ok(PeriodicSpectrum {
        values,
        source_len: len,
    })
}

/// `bins` equal-width bins covering every value of every spectrum.
pub fn global_bin_grid(spectra: &[PeriodicSpectrum], bins: usize) -> Result<BinGrid, SpectralError> {
    if bins < 2 {
        return Err(SpectralError::TooFewBins(bins));
    }
    let mut values = spectra.iter().flat_map(|s| s.values.iter().copied()).peekable();
    if values.peek().is_none() {
        return Err(SpectralError::NoSpectra);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        if !v.is_finite() {
            return Err(SpectralError::NonFinite(v));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let (lo, top, width) = if lo == hi {
        (lo - 0.5, lo + 0.5, 1.0 / bins as f64)
    } else {
        let span = hi - lo;
        (lo, hi + GRID_INFLATION * span, span / bins as f64)
    };
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + k as f64 * width).collect();
    edges.push(top);
    BinGrid::from_edges(edges)
}

/// Histogram of `p` on `g`, normalized by `N`.
pub fn spectral_density(p: &PeriodicSpectrum, g: &Arc<BinGrid>) -> Result<SpectralDensity, SpectralError> {
    let mut counts = vec![0usize; g.bins()];
    for &v in &p.values {
        let k = g.bin_index(v).ok_or(SpectralError::OutOfRange {
            value: v,
            lo: g.edges[0],
            hi: *g.edges.last().unwrap(),
        })?;
        counts[k] += 1;
    }
    let n = p.values.len() as f64;
    Ok(SpectralDensity {
        masses: counts.into_iter().map(|c| c as f64 / n).collect(),
        grid: Arc::clone(g),
    })
}

fn same_grid(a: &Arc<BinGrid>, b: &Arc<BinGrid>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// `Ω^L` over the densities `ρ_1..ρ_L`.
pub fn omega(densities: &[SpectralDensity], n: usize) -> Result<OmegaDistribution, SpectralError> {
    let first = densities.first().ok_or(SpectralError::NoSpectra)?;
    if densities
        .iter()
        .any(|d| !same_grid(&d.grid, &first.grid) || d.masses.len() != first.masses.len())
    {
        return Err(SpectralError::GridMismatch);
    }
    let depth = densities.len();
    let l = depth as f64;
    let scale = 1.0 / (l * n as f64);
    let values = (0..first.masses.len())
        .map(|k| {
            let mean = densities.iter().map(|d| d.masses[k]).sum::<f64>() / l;
            scale * densities.iter().map(|d| (d.masses[k] - mean).powi(2)).sum::<f64>()
        })
        .collect();
    Ok(OmegaDistribution { values, depth, n })
}

/// Histogramming options shared by every layer of one analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub bins: usize,
    pub log_eigs: bool,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            bins: 100,
            log_eigs: false,
        }
    }
}

/// Everything computed on the way to the `Ω` sequence of one ensemble.
#[derive(Debug, Clone)]
pub struct OmegaSequence {
    pub spectra: Vec<Spectrum>,
    pub grid: Arc<BinGrid>,
    /// Ensemble-wide maximum layer size.
    pub n: usize,
    pub densities: Vec<SpectralDensity>,
    /// `Ω^1 .. Ω^m`.
    pub omegas: Vec<OmegaDistribution>,
}

/// Spectra, periodic extension to the common `N`, one shared grid, and
/// `Ω^L` for every prefix depth `L = 1..m`.
pub fn omega_sequence(e: &LayerMatrixEnsemble, params: &SpectralParams) -> Result<OmegaSequence, SpectralError> {
    let spectra = e.layers().par_iter().map(eig_sym).collect::<Result<Vec<_>, _>>()?;
    let n = spectra
        .iter()
        .map(|s| s.values.len())
        .max()
        .ok_or(SpectralError::NoSpectra)?;
    let mut periodic = spectra
        .iter()
        .map(|s| periodic_extend(s, n))
        .collect::<Result<Vec<_>, _>>()?;
    if params.log_eigs {
        for p in &mut periodic {
            p.values.iter_mut().for_each(|v| *v = (*v + LOG_EIG_OFFSET).log10());
        }
    }
    let grid = Arc::new(global_bin_grid(&periodic, params.bins)?);
    let densities = periodic
        .iter()
        .map(|p| spectral_density(p, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    let omegas = (1..=densities.len())
        .map(|depth| omega(&densities[..depth], n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OmegaSequence {
        spectra,
        grid,
        n,
        densities,
        omegas,
    })
}
