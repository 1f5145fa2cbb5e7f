//! Thread-pool versions of the embarrassingly parallel core loops. Results
//! are identical to the sequential ones.

use rayon::prelude::*;
use ringcal_core::baselines::{mds_map_from_rows, ObservationGraph};
use ringcal_core::delay::{estimate_delay_with, fit_candidate};
use ringcal_core::{BaselineError, BaselineOutput, DelayError, DelaySearchConfig, DelaySearchResult, ObservationSet};

/// Delay grid search with candidates evaluated concurrently.
pub fn estimate_delay(obs: &ObservationSet, cfg: &DelaySearchConfig) -> Result<DelaySearchResult, DelayError> {
    estimate_delay_with(obs, cfg, |batch| {
        batch
            .par_iter()
            .map(|&(k, c)| fit_candidate(obs, &cfg.completion, c, k))
            .collect()
    })
}

/// MDS-MAP with one shortest-path run per source in parallel.
pub fn mds_map(obs: &ObservationSet, delay: f64) -> Result<BaselineOutput, BaselineError> {
    if obs.measured().is_empty() {
        return Err(BaselineError::EmptyMask);
    }
    let graph = ObservationGraph::new(obs, delay);
    let components = graph.components();
    if components.len() > 1 {
        return Err(BaselineError::Disconnected { components });
    }
    let rows: Vec<Vec<f64>> = (0..graph.dim())
        .into_par_iter()
        .map(|s| graph.shortest_paths_from(s))
        .collect();
    Ok(mds_map_from_rows(&graph, &rows))
}
