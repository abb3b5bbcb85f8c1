//! Cascading periodic spectral ergodicity (cPSE) of trained network weights.
//!
//! The pipeline turns each eligible weight tensor into a square Gram matrix,
//! tiles every eigenvalue vector to a common length, histograms them on one
//! shared grid, measures how the per-bin variance of those densities changes
//! from one depth to the next, and condenses the resulting distances into a
//! single complexity score:
//!
//! ```no_run
//! use cpse_core::{container::Container, pipeline::analyze_container, RunConfig};
//!
//! let c = Container::read_file("model.lmec")?;
//! let analysis = analyze_container(&c, &RunConfig::default())?;
//! println!("cPSE = {}", analysis.report.cpse);
//! # Ok::<(), cpse_core::Error>(())
//! ```

pub mod archgraph;
pub mod config;
pub mod container;
pub mod divergence;
pub mod ensemble;
pub mod pipeline;
pub mod report;
pub mod spectral;
pub mod stats;
pub mod surrogate;

pub use archgraph::{branched_cpse, parse_graph, ArchGraph, BranchDecomposition, GraphDocument, GraphError};
pub use config::{ConfigError, RunConfig};
pub use container::{read_container, validate_container, write_container, Container, ContainerError, WeightTensor};
pub use divergence::{cpse, d_pse, kl_div, pse_series, CpseReport, DivergenceError, PseSeries};
pub use ensemble::{build_ensemble, EligibilityPolicy, EnsembleError, LayerMatrixEnsemble};
pub use pipeline::{analyze_container, analyze_ensemble, Analysis};
pub use spectral::{omega_sequence, SpectralError};
pub use stats::{correlate, pearson, CorrelationReport, Grouping, PerformanceRecord, StatsError};
pub use surrogate::{ergodicity_trend, generate_stack, SurrogateError, SurrogateSpec, TrendReport};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
