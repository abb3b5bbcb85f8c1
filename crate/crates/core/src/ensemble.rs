//! Layer matrix ensemble: weight tensors reshaped to `N x M` matrices `A` and
//! turned into square symmetric PSD Gram matrices `X = A Aᵀ`.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{Container, WeightTensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("layer '{name}': 1-D tensor is not a layer weight matrix")]
    VectorWeights { name: String },
    #[error("layer '{name}': leading dimension < 2 (got {dim})")]
    LeadingDimension { name: String, dim: usize },
    #[error("layer '{name}': shape and data disagree")]
    Inconsistent { name: String },
    #[error("layer '{name}': non-finite weight entry")]
    NonFinite { name: String },
    #[error("layer '{name}': weight matrix {rows}x{cols} is not square")]
    NonSquare { name: String, rows: usize, cols: usize },
    #[error("no eligible layers")]
    NoEligibleLayers,
    #[error("unknown layer '{0}'")]
    UnknownLayer(String),
}

/// Which tensors enter the ensemble.
///
/// A tensor with `n >= 3` dimensions counts as convolutional, `n == 2` as
/// linear. 1-D tensors (biases, normalization parameters) are never eligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityPolicy {
    pub include_conv: bool,
    pub include_linear: bool,
    /// Experimental: when false, square 2-D weights are used directly as `X`
    /// (symmetrized) instead of going through the Gram product.
    pub gram_2d: bool,
}

impl Default for EligibilityPolicy {
    fn default() -> Self {
        Self {
            include_conv: true,
            include_linear: true,
            gram_2d: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    VectorWeights,
    LeadingDimension,
    ExcludedConv,
    ExcludedLinear,
    NonSquare,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipReason::VectorWeights => "1-D tensor",
            SkipReason::LeadingDimension => "leading dimension < 2",
            SkipReason::ExcludedConv => "convolutional weights excluded by policy",
            SkipReason::ExcludedLinear => "linear weights excluded by policy",
            SkipReason::NonSquare => "non-square 2-D weights without Gram product",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub reason: SkipReason,
}

/// Formats as the skip-log line `SKIP <name> <shape> <reason>`.
impl fmt::Display for SkipRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape: Vec<String> = self.shape.iter().map(ToString::to_string).collect();
        write!(f, "SKIP {} [{}] {}", self.name, shape.join(","), self.reason)
    }
}

/// `A_l`: the tensor with its trailing dimensions flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedMatrix {
    pub name: String,
    pub matrix: DMatrix<f64>,
}

impl StackedMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// `X_l`, an exactly symmetric `N_l x N_l` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMatrix {
    pub source_name: String,
    pub matrix: DMatrix<f64>,
}

impl LayerMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerMatrixEnsemble {
    layers: Vec<LayerMatrix>,
    skipped: Vec<SkipRecord>,
}

impl LayerMatrixEnsemble {
    pub fn new(layers: Vec<LayerMatrix>) -> Result<Self, EnsembleError> {
        if layers.is_empty() {
            return Err(EnsembleError::NoEligibleLayers);
        }
        Ok(Self {
            layers,
            skipped: Vec::new(),
        })
    }

    pub fn layers(&self) -> &[LayerMatrix] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Tensors left out by [`build_ensemble`], in container order.
    pub fn skipped(&self) -> &[SkipRecord] {
        &self.skipped
    }

    pub fn names(&self) -> Vec<&str> {
        self.layers.iter().map(|l| l.source_name.as_str()).collect()
    }

    /// Sub-ensemble holding the named layers in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Self, EnsembleError> {
        let layers = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                self.layers
                    .iter()
                    .find(|l| l.source_name == n)
                    .cloned()
                    .ok_or_else(|| EnsembleError::UnknownLayer(n.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(layers)
    }
}

fn check_leading(w: &WeightTensor) -> Result<(), EnsembleError> {
    match w.shape.as_slice() {
        [] | [_] => Err(EnsembleError::VectorWeights { name: w.name.clone() }),
        [p1, ..] if *p1 < 2 => Err(EnsembleError::LeadingDimension {
            name: w.name.clone(),
            dim: *p1,
        }),
        _ => Ok(()),
    }
}

/// Reshape `w` to `p_1 x (p_2 ... p_n)`. 2-D weights pass through unchanged.
pub fn stack_weights(w: &WeightTensor) -> Result<StackedMatrix, EnsembleError> {
    check_leading(w)?;
    let rows = w.shape[0];
    let cols = w.shape[1..].iter().product::<usize>();
    if w.element_count() != Some(w.data.len()) {
        return Err(EnsembleError::Inconsistent { name: w.name.clone() });
    }
    let data = w.data.to_f64();
    if data.iter().any(|x| !x.is_finite()) {
        return Err(EnsembleError::NonFinite { name: w.name.clone() });
    }
    Ok(StackedMatrix {
        name: w.name.clone(),
        matrix: DMatrix::from_row_slice(rows, cols, &data),
    })
}

fn symmetrize(x: &mut DMatrix<f64>) {
    let n = x.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
}

/// `X = A Aᵀ`, symmetrized so that `X[i][j] == X[j][i]` bit for bit.
pub fn gram(a: &StackedMatrix) -> Result<LayerMatrix, EnsembleError> {
    if a.matrix.iter().any(|x| !x.is_finite()) {
        return Err(EnsembleError::NonFinite { name: a.name.clone() });
    }
    let mut x = &a.matrix * a.matrix.transpose();
    symmetrize(&mut x);
    Ok(LayerMatrix {
        source_name: a.name.clone(),
        matrix: x,
    })
}

/// Use a square 2-D weight matrix directly as `X`, symmetrized.
fn direct(a: &StackedMatrix) -> Result<LayerMatrix, EnsembleError> {
    if a.rows() != a.cols() {
        return Err(EnsembleError::NonSquare {
            name: a.name.clone(),
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let mut x = a.matrix.clone();
    symmetrize(&mut x);
    Ok(LayerMatrix {
        source_name: a.name.clone(),
        matrix: x,
    })
}

fn eligibility(w: &WeightTensor, policy: &EligibilityPolicy) -> Option<SkipReason> {
    match w.shape.len() {
        0 | 1 => Some(SkipReason::VectorWeights),
        _ if w.shape[0] < 2 => Some(SkipReason::LeadingDimension),
        2 if !policy.include_linear => Some(SkipReason::ExcludedLinear),
        2 if !policy.gram_2d && w.shape[0] != w.shape[1] => Some(SkipReason::NonSquare),
        n if n >= 3 && !policy.include_conv => Some(SkipReason::ExcludedConv),
        _ => None,
    }
}

/// Build the ensemble from every eligible tensor, in container order.
pub fn build_ensemble(c: &Container, policy: &EligibilityPolicy) -> Result<LayerMatrixEnsemble, EnsembleError> {
    let mut eligible = Vec::new();
    let mut skipped = Vec::new();
    for w in &c.layers {
        match eligibility(w, policy) {
            Some(reason) => skipped.push(SkipRecord {
                name: w.name.clone(),
                shape: w.shape.clone(),
                reason,
            }),
            None => eligible.push(w),
        }
    }
    if eligible.is_empty() {
        return Err(EnsembleError::NoEligibleLayers);
    }
    let layers = eligible
        .par_iter()
        .map(|w| {
            let a = stack_weights(w)?;
            if w.shape.len() == 2 && !policy.gram_2d {
                direct(&a)
            } else {
                gram(&a)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LayerMatrixEnsemble { layers, skipped })
}
