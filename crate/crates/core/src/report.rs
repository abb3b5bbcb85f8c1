//! Deterministic serialization of analysis results: JSON reports with full
//! provenance, CSV tables, and TSV series for external plotting.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::archgraph::BranchedReport;
use crate::config::RunConfig;
use crate::divergence::CpseReport;
use crate::ensemble::EligibilityPolicy;
use crate::pipeline::Analysis;
use crate::spectral::OmegaSequence;
use crate::stats::CorrelationReport;

pub const TOOL_NAME: &str = "cpse";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("unknown format '{0}' (expected csv, json or tsv-plot)")]
    UnknownFormat(String),
    #[error("{what} cannot be emitted as {format}")]
    Unsupported { what: &'static str, format: Format },
    #[error("json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    TsvPlot,
}

impl FromStr for Format {
    type Err = EmitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "tsv-plot" => Ok(Format::TsvPlot),
            other => Err(EmitError::UnknownFormat(other.to_string())),
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::TsvPlot => "tsv-plot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub l: usize,
    pub d_pse: f64,
    pub log10_d_pse: f64,
}

fn series_rows(report: &CpseReport) -> Vec<SeriesRow> {
    report
        .series
        .pairs
        .iter()
        .map(|p| SeriesRow {
            l: p.l,
            d_pse: p.d_pse,
            log10_d_pse: p.d_pse.max(report.log_floor).log10(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Feedforward,
    Branched,
    Linearized,
}

/// JSON form of a cPSE result. Carries every input that affects the value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: Mode,
    pub cpse: f64,
    #[serde(rename = "L")]
    pub layer_count: usize,
    #[serde(rename = "B")]
    pub bins: usize,
    /// Common eigenvalue-vector length; per path in branched mode.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub epsilon: f64,
    pub log_floor: f64,
    pub log_floor_hits: usize,
    pub log_eigs: bool,
    pub skip_first: bool,
    pub eligibility: EligibilityPolicy,
    pub layers: Vec<String>,
    pub skipped: Vec<String>,
    pub series: Vec<SeriesRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branched: Option<BranchedReport>,
}

impl ReportDocument {
    fn base(cfg: &RunConfig, mode: Mode, cpse: f64, layers: Vec<String>, skipped: Vec<String>) -> Self {
        Self {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            mode,
            cpse,
            layer_count: layers.len(),
            bins: cfg.bins,
            n: None,
            epsilon: cfg.epsilon,
            log_floor: cfg.log_floor,
            log_floor_hits: 0,
            log_eigs: cfg.log_eigs,
            skip_first: cfg.skip_first,
            eligibility: cfg.eligibility,
            layers,
            skipped,
            series: Vec::new(),
            branched: None,
        }
    }

    pub fn feedforward(analysis: &Analysis, cfg: &RunConfig, mode: Mode, skipped: Vec<String>) -> Self {
        let r = &analysis.report;
        Self {
            n: Some(analysis.omegas.n),
            log_floor_hits: r.log_floor_hits,
            series: series_rows(r),
            ..Self::base(cfg, mode, r.cpse, analysis.layers.clone(), skipped)
        }
    }

    pub fn branched(report: &BranchedReport, layers: Vec<String>, cfg: &RunConfig, skipped: Vec<String>) -> Self {
        Self {
            branched: Some(report.clone()),
            ..Self::base(cfg, Mode::Branched, report.total, layers, skipped)
        }
    }
}

/// Anything that can be written in one or more [`Format`]s.
pub trait Emit {
    fn emit(&self, format: Format) -> Result<Vec<u8>, EmitError>;
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, EmitError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| EmitError::Json(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn rows_csv(rows: &[SeriesRow]) -> Vec<u8> {
    let mut s = String::from("l,D_pse,log10_D_pse\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.l, r.d_pse, r.log10_d_pse);
    }
    s.into_bytes()
}

fn rows_tsv_plot(rows: &[SeriesRow]) -> Vec<u8> {
    let mut s = String::from("layer\tlog10_D_pse\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}", r.l, r.log10_d_pse);
    }
    s.into_bytes()
}

impl Emit for CpseReport {
    fn emit(&self, format: Format) -> Result<Vec<u8>, EmitError> {
        match format {
            Format::Csv => Ok(rows_csv(&series_rows(self))),
            Format::TsvPlot => Ok(rows_tsv_plot(&series_rows(self))),
            Format::Json => json(self),
        }
    }
}

impl Emit for ReportDocument {
    fn emit(&self, format: Format) -> Result<Vec<u8>, EmitError> {
        match format {
            Format::Json => json(self),
            Format::Csv => Ok(rows_csv(&self.series)),
            Format::TsvPlot => Ok(rows_tsv_plot(&self.series)),
        }
    }
}

impl Emit for [CorrelationReport] {
    fn emit(&self, format: Format) -> Result<Vec<u8>, EmitError> {
        match format {
            Format::Csv => {
                let mut s = String::from("group,n,rho_top1,rho_top5\n");
                for r in self {
                    let _ = writeln!(s, "{},{},{},{}", r.group, r.n, r.rho_top1, r.rho_top5);
                }
                Ok(s.into_bytes())
            }
            Format::Json => json(self),
            Format::TsvPlot => Err(EmitError::Unsupported {
                what: "correlation reports",
                format,
            }),
        }
    }
}

pub fn emit<T: Emit + ?Sized>(item: &T, format: Format) -> Result<Vec<u8>, EmitError> {
    item.emit(format)
}

/// `Ω^L` for every depth as `layer<TAB>bin_centre<TAB>value` rows.
pub fn omega_tsv(seq: &OmegaSequence) -> String {
    let mut s = String::from("layer\tbin_centre\tvalue\n");
    for o in &seq.omegas {
        for (c, v) in seq.grid.centres().iter().zip(&o.values) {
            let _ = writeln!(s, "{}\t{}\t{}", o.depth, c, v);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{cpse, PsePair, PseSeries};

    fn report() -> CpseReport {
        let series = PseSeries {
            pairs: vec![PsePair { l: 1, d_pse: 0.5 }, PsePair { l: 2, d_pse: 0.0 }],
            bins: 4,
            n: 8,
            epsilon: 1e-10,
        };
        cpse(&series, 3, 1e-12, false).unwrap()
    }

    #[test]
    fn series_csv() {
        let out = String::from_utf8(report().emit(Format::Csv).unwrap()).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "l,D_pse,log10_D_pse");
        assert!(lines[1].starts_with("1,0.5,-0.30102999"));
        assert_eq!(lines[2], "2,0,-12");
    }

    #[test]
    fn tsv_plot() {
        let out = String::from_utf8(emit(&report(), Format::TsvPlot).unwrap()).unwrap();
        assert_eq!(out.lines().next(), Some("layer\tlog10_D_pse"));
        assert_eq!(out.lines().nth(2), Some("2\t-12"));
    }

    #[test]
    fn correlation_csv() {
        let reports = [CorrelationReport {
            group: "resnet".into(),
            n: 5,
            rho_top1: 0.5,
            rho_top5: 0.25,
        }];
        let out = String::from_utf8(reports.emit(Format::Csv).unwrap()).unwrap();
        assert_eq!(out, "group,n,rho_top1,rho_top5\nresnet,5,0.5,0.25\n");
        assert!(matches!(
            reports.emit(Format::TsvPlot),
            Err(EmitError::Unsupported { .. })
        ));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("tsv-plot".parse::<Format>().unwrap(), Format::TsvPlot);
        assert_eq!(
            "xml".parse::<Format>().unwrap_err(),
            EmitError::UnknownFormat("xml".into())
        );
    }

    #[test]
    fn document_carries_provenance() {
        let cfg = RunConfig {
            bins: 50,
            ..Default::default()
        };
        let doc = ReportDocument::branched(
            &BranchedReport {
                total: -1.5,
                paths: vec![],
                branch_points: vec![],
            },
            vec!["a".into()],
            &cfg,
            vec![],
        );
        let v: serde_json::Value = serde_json::from_slice(&doc.emit(Format::Json).unwrap()).unwrap();
        for key in [
            "tool",
            "version",
            "cpse",
            "L",
            "B",
            "N",
            "epsilon",
            "log_floor",
            "eligibility",
            "skip_first",
            "log_eigs",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["B"], 50);
        assert_eq!(v["mode"], "branched");
    }
}
