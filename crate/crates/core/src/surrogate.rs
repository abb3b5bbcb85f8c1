//! Random-matrix surrogates for trained weight stacks.
//!
//! Layer `i` (0-based) of a stack is an `N_i x M_i` matrix of i.i.d. standard
//! normal entries scaled by `1/√M_i`, drawn from a ChaCha8 stream seeded with
//! `seed ^ i`. Each layer can therefore be generated independently of the
//! others, and the same spec always yields the same bytes.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::container::{Container, WeightTensor};
use crate::divergence::PseSeries;
use crate::ensemble::build_ensemble;
use crate::pipeline::analyze_ensemble;
use crate::stats::spearman;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurrogateError {
    #[error("no layer sizes given")]
    NoSizes,
    #[error("layer {index}: size {rows}x{cols} invalid (need rows >= 2, cols >= 1)")]
    BadSize { index: usize, rows: usize, cols: usize },
    #[error("cannot parse size '{0}' (expected NxM)")]
    Parse(String),
    #[error("need >= 3 layers for a trend, got {0}")]
    TooFewLayers(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    /// `(N_l, M_l)` per layer, in network order.
    pub sizes: Vec<(usize, usize)>,
    pub distribution: Distribution,
    pub seed: u64,
}

impl SurrogateSpec {
    pub fn gaussian(sizes: Vec<(usize, usize)>, seed: u64) -> Self {
        Self {
            sizes,
            distribution: Distribution::Gaussian,
            seed,
        }
    }

    /// Square layers `s x s` for each entry of `sides`.
    pub fn square(sides: &[usize], seed: u64) -> Self {
        Self::gaussian(sides.iter().map(|&s| (s, s)).collect(), seed)
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.sizes.is_empty() {
            return Err(SurrogateError::NoSizes);
        }
        match self.sizes.iter().position(|&(n, m)| n < 2 || m < 1) {
            Some(index) => Err(SurrogateError::BadSize {
                index,
                rows: self.sizes[index].0,
                cols: self.sizes[index].1,
            }),
            None => Ok(()),
        }
    }
}

/// Layer sizes as written on the command line: `32x32,64x64,...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeList(pub Vec<(usize, usize)>);

impl FromStr for SizeList {
    type Err = SurrogateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|item| {
                let item = item.trim();
                let (n, m) = item
                    .split_once(['x', 'X'])
                    .ok_or_else(|| SurrogateError::Parse(item.to_string()))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| SurrogateError::Parse(item.to_string()))
                };
                Ok((parse(n)?, parse(m)?))
            })
            .collect::<Result<_, _>>()
            .map(SizeList)
    }
}

impl fmt::Display for SizeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(n, m)| format!("{n}x{m}")).collect();
        f.write_str(&parts.join(","))
    }
}

fn layer(seed: u64, index: usize, rows: usize, cols: usize) -> WeightTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index as u64);
    let scale = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    WeightTensor::f64(format!("layer{}", index + 1), vec![rows, cols], data)
}

/// One `[N_l, M_l]` f64 tensor per spec entry.
pub fn generate_stack(spec: &SurrogateSpec) -> Result<Container, SurrogateError> {
    spec.validate()?;
    let layers = spec
        .sizes
        .par_iter()
        .enumerate()
        .map(|(i, &(n, m))| layer(spec.seed, i, n, m))
        .collect();
    Ok(Container::new(layers, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub series: PseSeries,
    pub cpse: f64,
    /// Spearman rank correlation between `l` and `log10 D_pse(l)`; `None`
    /// when every `D_pse` saturates at the log floor.
    pub spearman: Option<f64>,
    /// Fraction of consecutive steps where `D_pse` strictly decreases.
    pub monotone_fraction: f64,
    /// Pairs whose `D_pse` fell below the log floor.
    pub floor_hits: usize,
}

/// How quickly `D_pse` shrinks along the stack.
pub fn ergodicity_trend(c: &Container, cfg: &RunConfig) -> Result<TrendReport, Error> {
    let e = build_ensemble(c, &cfg.eligibility)?;
    if e.len() < 3 {
        return Err(SurrogateError::TooFewLayers(e.len()).into());
    }
    let analysis = analyze_ensemble(&e, cfg)?;
    let series = analysis.report.series;
    let d: Vec<f64> = series.values().collect();
    let logs: Vec<f64> = d.iter().map(|v| v.max(cfg.log_floor).log10()).collect();
    let depth: Vec<f64> = (1..=d.len()).map(|l| l as f64).collect();
    let spearman = spearman(&depth, &logs).ok();
    let decreases = d.windows(2).filter(|w| w[1] < w[0]).count();
    Ok(TrendReport {
        monotone_fraction: decreases as f64 / (d.len() - 1) as f64,
        floor_hits: d.iter().filter(|&&v| v < cfg.log_floor).count(),
        cpse: analysis.report.cpse,
        spearman,
        series,
    })
}
