//! Partial value of information: cleaning parameter draws, EVPPI estimation
//! and ranking parameters by their share of the EVPI.

mod evppi;
mod inputs;

pub use evppi::{
    evppi, EvaluatedPoint, EvppiDiagnostics, EvppiMethod, EvppiOptions, EvppiResult, KSubset,
    MIN_RELIABLE_SIMS,
};
pub use inputs::{create_inputs, DropReason, DroppedColumn, ParameterInputs, RANK_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::analysis::Analysis;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoRankEntry {
    pub param: String,
    pub evppi: f64,
    /// `evppi / evpi` at the ranking k.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoRank {
    pub k: f64,
    pub evpi: f64,
    pub method: EvppiMethod,
    /// Sorted by decreasing proportion, then by name.
    pub entries: Vec<InfoRankEntry>,
}

/// Ranks every parameter by its single-parameter EVPPI as a share of the
/// EVPI at the grid value nearest to `k`.
pub fn info_rank(
    analysis: &Analysis,
    inputs: &ParameterInputs,
    k: f64,
    method: Option<EvppiMethod>,
) -> Result<InfoRank> {
    let ki = analysis.k_index(k)?;
    let evpi = analysis.evi()[ki];
    if evpi <= 0.0 {
        return Err(Error::NoDecisionUncertainty);
    }
    let method = method.unwrap_or(EvppiMethod::Regression);
    let mut entries = inputs
        .names()
        .iter()
        .map(|name| {
            let fit = evppi::fit(analysis, inputs, std::slice::from_ref(name), method)?;
            let value = fit.raw_at(analysis, ki).clamp(0.0, evpi);
            Ok(InfoRankEntry {
                param: name.clone(),
                evppi: value,
                proportion: value / evpi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| {
        b.proportion
            .total_cmp(&a.proportion)
            .then_with(|| a.param.cmp(&b.param))
    });
    Ok(InfoRank {
        k: analysis.grid().get(ki),
        evpi,
        method,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PsaDataset;
    use ndarray::Array2;

    #[test]
    fn ranks_driving_parameter_first() {
        let n = 400;
        let phi: Vec<f64> = (0..n).map(|s| (s as f64 * 0.618_034).fract() * 2.0 - 1.0).collect();
        let other: Vec<f64> = (0..n).map(|s| ((s * 7_919) % 401) as f64).collect();
        let e = Array2::from_shape_fn((n, 2), |(s, t)| if t == 0 { 0.0 } else { phi[s] });
        let c = Array2::from_shape_fn((n, 2), |(s, t)| if t == 0 { 0.0 } else { 2.0 * phi[s] });
        let a = Analysis::builder(PsaDataset::unlabelled(e, c).unwrap(), 1)
            .kmax(10.0)
            .grid_points(11)
            .build()
            .unwrap();
        let raw = Array2::from_shape_fn((n, 2), |(s, j)| if j == 0 { other[s] } else { phi[s] });
        let inputs = create_inputs(&raw, &["b".into(), "a".into()], false).unwrap();
        let rank = info_rank(&a, &inputs, 5.0, None).unwrap();
        assert_eq!(rank.entries[0].param, "a");
        assert!((rank.entries[0].proportion - 1.0).abs() < 1e-9);
        assert!(rank.entries[1].proportion < 0.1);
    }

    #[test]
    fn no_uncertainty_is_an_error() {
        let e = Array2::from_shape_fn((4, 2), |(_, t)| t as f64);
        let c = Array2::zeros((4, 2));
        let a = Analysis::builder(PsaDataset::unlabelled(e, c).unwrap(), 1)
            .kmax(10.0)
            .grid_points(3)
            .build()
            .unwrap();
        let raw = Array2::from_shape_fn((4, 1), |(s, _)| s as f64);
        let inputs = create_inputs(&raw, &["x".into()], false).unwrap();
        assert!(matches!(info_rank(&a, &inputs, 5.0, None), Err(Error::NoDecisionUncertainty)));
    }
}
