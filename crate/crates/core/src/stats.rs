//! Correlation between cPSE and classification error.

use std::io::Read;

use serde::{Deserialize, Serialize};

/// ImageNet top-1/top-5 error and cPSE for the VGG and ResNet families,
/// columns `architecture,top1,top5,cpse`.
pub const TABLE1_CSV: &str = include_str!("../data/table1.csv");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("group too small: '{group}' has {n} records, need 3")]
    GroupTooSmall { group: String, n: usize },
    #[error("record schema: {0}")]
    Schema(String),
    #[error("record '{architecture}': error {value} outside (0, 100)")]
    ErrorRange { architecture: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub architecture: String,
    #[serde(rename = "top1")]
    pub top1_error: f64,
    #[serde(rename = "top5")]
    pub top5_error: f64,
    pub cpse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub group: String,
    pub n: usize,
    pub rho_top1: f64,
    pub rho_top5: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// Family from the architecture name: alphabetic runs joined by `_`,
    /// so `resnet50 → resnet`, `vgg16 → vgg`, `vgg16bn → vgg_bn`.
    Prefix,
    /// Every record in one group named `all`.
    All,
}

impl std::str::FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prefix" => Ok(Grouping::Prefix),
            "all" | "none" => Ok(Grouping::All),
            other => Err(format!("unknown grouping '{other}' (expected prefix or all)")),
        }
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewSamples(x.len()));
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    pearson(&ranks(x), &ranks(y))
}

fn family(name: &str) -> String {
    name.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|s| !s.is_empty())
        .map(str::to_ascii_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

/// Records from CSV with header `architecture,top1,top5,cpse` (any column order).
pub fn read_records<R: Read>(reader: R) -> Result<Vec<PerformanceRecord>, StatsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| StatsError::Schema(e.to_string()))?.clone();
    for column in ["architecture", "top1", "top5", "cpse"] {
        if !headers.iter().any(|h| h == column) {
            return Err(StatsError::Schema(format!("missing column '{column}'")));
        }
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<PerformanceRecord>() {
        let r = row.map_err(|e| StatsError::Schema(e.to_string()))?;
        for value in [r.top1_error, r.top5_error] {
            if !(value > 0.0 && value < 100.0) {
                return Err(StatsError::ErrorRange {
                    architecture: r.architecture.clone(),
                    value,
                });
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// The bundled Table 1 records.
pub fn table1() -> Vec<PerformanceRecord> {
    read_records(TABLE1_CSV.as_bytes()).expect("bundled fixture is valid")
}

/// Pearson between cPSE and each error column, per group in first-seen order.
pub fn correlate(records: &[PerformanceRecord], grouping: Grouping) -> Result<Vec<CorrelationReport>, StatsError> {
    let mut groups: Vec<(String, Vec<&PerformanceRecord>)> = Vec::new();
    for r in records {
        let key = match grouping {
            Grouping::Prefix => family(&r.architecture),
            Grouping::All => "all".to_string(),
        };
        match groups.iter_mut().find(|(g, _)| *g == key) {
            Some((_, members)) => members.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(group, members)| {
            if members.len() < 3 {
                return Err(StatsError::GroupTooSmall {
                    group,
                    n: members.len(),
                });
            }
            let cpse: Vec<f64> = members.iter().map(|r| r.cpse).collect();
            let top1: Vec<f64> = members.iter().map(|r| r.top1_error).collect();
            let top5: Vec<f64> = members.iter().map(|r| r.top5_error).collect();
            Ok(CorrelationReport {
                n: members.len(),
                rho_top1: pearson(&cpse, &top1)?,
                rho_top5: pearson(&cpse, &top5)?,
                group,
            })
        })
        .collect()
}
