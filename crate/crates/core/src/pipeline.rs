//! Feedforward analysis: ensemble → spectra → `Ω` sequence → `D_pse` → cPSE.

use crate::config::RunConfig;
use crate::container::Container;
use crate::divergence::{cpse, pse_series, CpseReport};
use crate::ensemble::{build_ensemble, LayerMatrixEnsemble};
use crate::spectral::{omega_sequence, OmegaSequence};
use crate::Error;

#[derive(Debug, Clone)]
pub struct Analysis {
    pub layers: Vec<String>,
    pub omegas: OmegaSequence,
    pub report: CpseReport,
}

/// Run the whole cascade on an ensemble in its stored order.
pub fn analyze_ensemble(e: &LayerMatrixEnsemble, cfg: &RunConfig) -> Result<Analysis, Error> {
    cfg.validate()?;
    let omegas = omega_sequence(e, &cfg.spectral())?;
    let series = pse_series(&omegas.omegas, cfg.epsilon)?;
    let report = cpse(&series, e.len(), cfg.log_floor, cfg.skip_first)?;
    Ok(Analysis {
        layers: e.names().into_iter().map(String::from).collect(),
        omegas,
        report,
    })
}

pub fn analyze_container(c: &Container, cfg: &RunConfig) -> Result<Analysis, Error> {
    let e = build_ensemble(c, &cfg.eligibility)?;
    analyze_ensemble(&e, cfg)
}

/// cPSE of a layer sequence treated as a standalone network. A single layer
/// has no consecutive pairs, so its (empty) sum is zero.
pub fn sequence_cpse<S: AsRef<str>>(e: &LayerMatrixEnsemble, names: &[S], cfg: &RunConfig) -> Result<f64, Error> {
    let sub = e.select(names)?;
    if sub.len() < 2 {
        return Ok(0.0);
    }
    Ok(analyze_ensemble(&sub, cfg)?.report.cpse)
}

/// `C^L` for every prefix depth `L = 2..=m`, each prefix analysed as its own
/// network (its own `N` and grid).
pub fn depth_profile(e: &LayerMatrixEnsemble, cfg: &RunConfig) -> Result<Vec<(usize, f64)>, Error> {
    let names = e.names();
    (2..=e.len())
        .map(|depth| Ok((depth, sequence_cpse(e, &names[..depth], cfg)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::WeightTensor;

    fn tensor(name: &str, rows: usize, cols: usize, seed: usize) -> WeightTensor {
        let data = (0..rows * cols)
            .map(|i| (((i + 1) * (seed + 3) * 7919) % 97) as f64 / 97.0 - 0.5)
            .collect();
        WeightTensor::f64(name, vec![rows, cols], data)
    }

    fn container() -> Container {
        Container::new(
            vec![
                tensor("a", 4, 6, 1),
                tensor("b", 6, 6, 2),
                tensor("c", 8, 5, 3),
                tensor("d", 5, 9, 4),
            ],
            None,
        )
    }

    #[test]
    fn report_is_recomputable() {
        let a = analyze_container(
            &container(),
            &RunConfig {
                bins: 8,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.report.layer_count, 4);
        assert_eq!(a.report.series.len(), 3);
        assert_eq!(a.report.series.n, 8);
        assert!((a.report.cpse - a.report.recompute()).abs() < 1e-12);
        assert_eq!(a.layers, vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn single_layer_is_an_error_but_zero_as_a_sequence() {
        let c = Container::new(vec![tensor("a", 4, 6, 1)], None);
        assert!(analyze_container(&c, &RunConfig::default()).is_err());
        let e = build_ensemble(&c, &Default::default()).unwrap();
        assert_eq!(sequence_cpse(&e, &["a"], &RunConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn profile_matches_prefix_runs() {
        let cfg = RunConfig {
            bins: 6,
            ..Default::default()
        };
        let e = build_ensemble(&container(), &cfg.eligibility).unwrap();
        let profile = depth_profile(&e, &cfg).unwrap();
        assert_eq!(profile.iter().map(|p| p.0).collect::<Vec<_>>(), vec![2, 3, 4]);
        let full = analyze_ensemble(&e, &cfg).unwrap().report.cpse;
        assert_eq!(profile[2].1, full);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = RunConfig {
            bins: 1,
            ..Default::default()
        };
        assert!(matches!(analyze_container(&container(), &cfg), Err(Error::Config(_))));
    }
}
