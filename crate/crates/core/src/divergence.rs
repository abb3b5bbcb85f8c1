//! Symmetric KL distance between consecutive `Ω` distributions and the
//! cascading aggregate
//!
//! ```text
//! D_pse(l, l+1) = KL(Ω^l ‖ Ω^{l+1}) + KL(Ω^{l+1} ‖ Ω^l)      (base-2 logs)
//! C^L           = 1/L · Σ_{l=1..L-1} log10 D_pse(l, l+1)
//! ```
//!
//! `Ω` vectors are ε-smoothed and renormalized before the divergence, so the
//! `1/(L·N)` prefactor cancels and `Ω^1 = 0` becomes the uniform distribution.

use serde::{Deserialize, Serialize};

use crate::spectral::OmegaDistribution;

pub const DEFAULT_EPSILON: f64 = 1e-10;
pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DivergenceError {
    #[error("smoothing epsilon must be > 0, got {0}")]
    BadEpsilon(f64),
    #[error("log floor must be > 0, got {0}")]
    BadFloor(f64),
    #[error("negative Ω entry {value} at bin {bin}")]
    NegativeOmega { bin: usize, value: f64 },
    #[error("probability vector: {0}")]
    NotProbability(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 layers, got {0}")]
    TooFewLayers(usize),
    #[error("series holds {series} pairs but L = {layers} needs {}", .layers.saturating_sub(1))]
    SeriesLength { series: usize, layers: usize },
}

/// Strictly positive vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self, DivergenceError> {
        if entries.is_empty() {
            return Err(DivergenceError::NotProbability("empty".into()));
        }
        if let Some(x) = entries.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(DivergenceError::NotProbability(format!(
                "entry {x} is not strictly positive"
            )));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DivergenceError::NotProbability(format!("sums to {sum}")));
        }
        Ok(Self(entries))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `p_k = (Ω_k + ε) / Σ_j (Ω_j + ε)`.
pub fn smooth_normalize(omega: &[f64], epsilon: f64) -> Result<ProbVector, DivergenceError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(DivergenceError::BadEpsilon(epsilon));
    }
    if let Some((bin, &value)) = omega.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
        return Err(DivergenceError::NegativeOmega { bin, value });
    }
    let total: f64 = omega.iter().map(|v| v + epsilon).sum();
    ProbVector::new(omega.iter().map(|v| (v + epsilon) / total).collect())
}

/// `Σ_k p_k log2(p_k / q_k)` in bits.
pub fn kl_div(p: &ProbVector, q: &ProbVector) -> Result<f64, DivergenceError> {
    if p.len() != q.len() {
        return Err(DivergenceError::LengthMismatch(p.len(), q.len()));
    }
    Ok(p.0.iter().zip(&q.0).map(|(a, b)| a * (a / b).log2()).sum())
}

/// Symmetric divergence of two already-smoothed vectors.
pub fn symmetric_kl(p: &ProbVector, q: &ProbVector) -> Result<f64, DivergenceError> {
    Ok(kl_div(p, q)? + kl_div(q, p)?)
}

/// `D_pse` between two `Ω` distributions.
pub fn d_pse(a: &OmegaDistribution, b: &OmegaDistribution, epsilon: f64) -> Result<f64, DivergenceError> {
    if a.values.len() != b.values.len() {
        return Err(DivergenceError::LengthMismatch(a.values.len(), b.values.len()));
    }
    let p = smooth_normalize(&a.values, epsilon)?;
    let q = smooth_normalize(&b.values, epsilon)?;
    symmetric_kl(&p, &q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsePair {
    /// 1-based index of the first layer of the pair.
    pub l: usize,
    pub d_pse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseSeries {
    pub pairs: Vec<PsePair>,
    pub bins: usize,
    pub n: usize,
    pub epsilon: f64,
}

impl PseSeries {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.d_pse)
    }
}

/// `(l, D_pse(Ω^l, Ω^{l+1}))` for `l = 1..L-1`.
pub fn pse_series(omegas: &[OmegaDistribution], epsilon: f64) -> Result<PseSeries, DivergenceError> {
    if omegas.len() < 2 {
        return Err(DivergenceError::TooFewLayers(omegas.len()));
    }
    // smooth each Ω once; every interior Ω takes part in two pairs
    let probs = omegas
        .iter()
        .map(|o| smooth_normalize(&o.values, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs = probs
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            Ok(PsePair {
                l: i + 1,
                d_pse: symmetric_kl(&w[0], &w[1])?,
            })
        })
        .collect::<Result<Vec<_>, DivergenceError>>()?;
    Ok(PseSeries {
        pairs,
        bins: omegas[0].values.len(),
        n: omegas[0].n,
        epsilon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpseReport {
    pub cpse: f64,
    pub series: PseSeries,
    pub layer_count: usize,
    pub log_floor: f64,
    pub log_floor_hits: usize,
    pub skip_first: bool,
}

impl CpseReport {
    /// Recompute `C^L` from the stored series.
    pub fn recompute(&self) -> f64 {
        let skip = usize::from(self.skip_first);
        let sum: f64 = self
            .series
            .values()
            .skip(skip)
            .map(|d| d.max(self.log_floor).log10())
            .sum();
        sum / self.layer_count as f64
    }
}

/// `C^L = 1/L · Σ log10(max(D_pse, floor))`. With `skip_first` the `l = 1`
/// term is dropped from the sum (the divisor stays `L`).
pub fn cpse(
    series: &PseSeries,
    layer_count: usize,
    floor: f64,
    skip_first: bool,
) -> Result<CpseReport, DivergenceError> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(DivergenceError::BadFloor(floor));
    }
    if layer_count < 2 || series.len() != layer_count - 1 {
        return Err(DivergenceError::SeriesLength {
            series: series.len(),
            layers: layer_count,
        });
    }
    let skip = usize::from(skip_first);
    let log_floor_hits = series.values().skip(skip).filter(|&d| d < floor).count();
    let mut report = CpseReport {
        cpse: 0.0,
        series: series.clone(),
        layer_count,
        log_floor: floor,
        log_floor_hits,
        skip_first,
    };
    report.cpse = report.recompute();
    Ok(report)
}
