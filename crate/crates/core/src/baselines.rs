//! Reference localizers: MDS-MAP and a scaled zero-fill spectral method.
//!
//! Both read the measured entries `E ∩ S^⊥` only, minus a delay the caller
//! supplies (zero for the plain entry points).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::completion::estimate_sampling_rate;
use crate::embedding::{classical_mds, PositionEstimate, Source};
use crate::geometry::SquaredDistanceMatrix;
use crate::observation::ObservationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineTag {
    MdsMap,
    /// Simplified form: `1/p̂`-scaled zero-fill followed by MDS.
    SvdReconstruct,
}

impl BaselineTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineTag::MdsMap => "mds-map",
            BaselineTag::SvdReconstruct => "svd-reconstruct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mds-map" => Some(BaselineTag::MdsMap),
            "svd-reconstruct" => Some(BaselineTag::SvdReconstruct),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("observation graph is disconnected into {} components: {components:?}", components.len())]
    Disconnected { components: Vec<Vec<usize>> },
    #[error("no measured entries")]
    EmptyMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub estimate: PositionEstimate,
    /// Squared distance matrix handed to MDS.
    pub filled: SquaredDistanceMatrix,
}

/// Undirected graph on the measured pairs, stored densely. Missing edges are
/// `+∞`; a pair measured in both orders gets the mean of the two values.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGraph {
    weights: DMatrix<f64>,
}

impl ObservationGraph {
    pub fn new(obs: &ObservationSet, delay: f64) -> Self {
        let n = obs.dim();
        let measured = obs.measured();
        let mut weights = DMatrix::from_element(n, n, f64::INFINITY);
        for i in 0..n {
            weights[(i, i)] = 0.0;
            for j in (i + 1)..n {
                let a = measured.contains(i, j).then(|| obs.values[(i, j)] - delay);
                let b = measured.contains(j, i).then(|| obs.values[(j, i)] - delay);
                let w = match (a, b) {
                    (Some(x), Some(y)) => 0.5 * (x + y),
                    (Some(x), None) | (None, Some(x)) => x,
                    (None, None) => continue,
                };
                let w = w.max(0.0);
                weights[(i, j)] = w;
                weights[(j, i)] = w;
            }
        }
        Self { weights }
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            label[start] = id;
            let mut k = 0;
            while k < members.len() {
                let u = members[k];
                for v in 0..n {
                    if label[v] == usize::MAX && self.weights[(u, v)].is_finite() {
                        label[v] = id;
                        members.push(v);
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Dense Dijkstra from `source`, `O(n²)`.
    pub fn shortest_paths_from(&self, source: usize) -> Vec<f64> {
        let n = self.dim();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for v in 0..n {
                let w = self.weights[(u, v)];
                if !done[v] && w.is_finite() && best + w < dist[v] {
                    dist[v] = best + w;
                }
            }
        }
        dist
    }
}

/// Keeps measured distances, fills the rest from the shortest-path rows (one
/// per source), then squares, symmetrizes and embeds.
pub fn mds_map_from_rows(graph: &ObservationGraph, rows: &[Vec<f64>]) -> BaselineOutput {
    let n = rows.len();
    let filled = DMatrix::from_fn(n, n, |i, j| {
        let w = graph.weight(i, j);
        let d = if w.is_finite() { w } else { 0.5 * (rows[i][j] + rows[j][i]) };
        d * d
    });
    embed(filled, BaselineTag::MdsMap)
}

pub fn mds_map(obs: &ObservationSet) -> Result<BaselineOutput, BaselineError> {
    mds_map_corrected(obs, 0.0)
}

/// MDS-MAP after subtracting a known `delay` from every measurement.
pub fn mds_map_corrected(obs: &ObservationSet, delay: f64) -> Result<BaselineOutput, BaselineError> {
    if obs.measured().is_empty() {
        return Err(BaselineError::EmptyMask);
    }
    let graph = ObservationGraph::new(obs, delay);
    let components = graph.components();
    if components.len() > 1 {
        return Err(BaselineError::Disconnected { components });
    }
    let rows: Vec<Vec<f64>> = (0..graph.dim()).map(|s| graph.shortest_paths_from(s)).collect();
    Ok(mds_map_from_rows(&graph, &rows))
}

pub fn svd_reconstruct(obs: &ObservationSet) -> Result<BaselineOutput, BaselineError> {
    svd_reconstruct_corrected(obs, 0.0)
}

/// Scaled zero-fill after subtracting a known `delay`. `p̂` is the empirical
/// rate of the random mask.
pub fn svd_reconstruct_corrected(obs: &ObservationSet, delay: f64) -> Result<BaselineOutput, BaselineError> {
    let measured = obs.measured();
    if measured.is_empty() {
        return Err(BaselineError::EmptyMask);
    }
    let n = obs.dim();
    let p_hat = estimate_sampling_rate(&obs.masks.random, n);
    let mut m = DMatrix::zeros(n, n);
    for (i, j) in measured.iter() {
        let v = obs.values[(i, j)] - delay;
        m[(i, j)] = v * v / p_hat;
    }
    let filled = (&m + m.transpose()) * 0.5;
    Ok(embed(filled, BaselineTag::SvdReconstruct))
}

fn embed(filled: DMatrix<f64>, tag: BaselineTag) -> BaselineOutput {
    let filled = SquaredDistanceMatrix(filled);
    let mds = classical_mds(&filled, 2).expect("n >= 2 whenever the mask is nonempty");
    BaselineOutput {
        estimate: PositionEstimate {
            coords: mds.estimate.coords,
            source: Source::Baseline(tag),
        },
        filled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::position_distance;
    use crate::geometry::generate_ring_layout;
    use crate::mask::PairSet;
    use crate::observation::{synthesize_observation, MaskPair, ObservationParams, StructuredMode};

    fn from_values(values: DMatrix<f64>, measured: PairSet) -> ObservationSet {
        let n = values.nrows();
        ObservationSet {
            values,
            masks: MaskPair {
                structured: PairSet::empty(n),
                random: measured,
            },
            d0_true: 0.0,
            sigma: 0.0,
            c0: 1500.0,
            mode: StructuredMode::Practical,
        }
    }

    #[test]
    fn tags_round_trip() {
        for tag in [BaselineTag::MdsMap, BaselineTag::SvdReconstruct] {
            assert_eq!(BaselineTag::parse(tag.as_str()), Some(tag));
        }
        assert_eq!(BaselineTag::parse("sdp"), None);
    }

    #[test]
    fn path_graph_fills_sum_of_edges() {
        let values = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let measured = PairSet::from_pairs(3, [(0, 1), (1, 0), (1, 2), (2, 1)]);
        let out = mds_map(&from_values(values, measured)).unwrap();
        assert!((out.filled.0[(0, 2)] - 4.0).abs() < 1e-12);
        assert!((out.estimate.distance(0, 2) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn one_sided_edges_count() {
        let values = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        let measured = PairSet::from_pairs(3, [(0, 1), (1, 2)]);
        let g = ObservationGraph::new(&from_values(values, measured), 0.0);
        assert_eq!(g.shortest_paths_from(0), vec![0.0, 1.0, 3.0]);
        assert_eq!(g.weight(2, 1), 2.0);
    }

    #[test]
    fn disconnected_graph_names_components() {
        let values = DMatrix::from_element(4, 4, 1.0);
        let measured = PairSet::from_pairs(4, [(0, 1), (2, 3)]);
        match mds_map(&from_values(values, measured)) {
            Err(BaselineError::Disconnected { components }) => {
                assert_eq!(components, vec![vec![0, 1], vec![2, 3]]);
            }
            other => panic!("expected disconnection, got {other:?}"),
        }
    }

    #[test]
    fn complete_noiseless_input_is_exact_for_both() {
        let layout = generate_ring_layout(40, 0.1, 0.01, 5).unwrap();
        let params = ObservationParams {
            delta: 1e-9,
            p: 1.0,
            ..ObservationParams::default()
        };
        let obs = synthesize_observation(&layout, &params, 6).unwrap();
        assert_eq!(obs.measured().len(), 40 * 39);
        let x = layout.coords();
        let a = mds_map(&obs).unwrap();
        assert!(position_distance(&x, &a.estimate.coords).unwrap() < 1e-12);
        let b = svd_reconstruct(&obs).unwrap();
        assert!(position_distance(&x, &b.estimate.coords).unwrap() < 1e-12);
    }

    #[test]
    fn known_delay_is_removed() {
        let layout = generate_ring_layout(30, 0.1, 0.01, 7).unwrap();
        let params = ObservationParams {
            delta: 1e-9,
            p: 1.0,
            d0: 0.02,
            ..ObservationParams::default()
        };
        let obs = synthesize_observation(&layout, &params, 8).unwrap();
        let x = layout.coords();
        let out = mds_map_corrected(&obs, 0.02).unwrap();
        assert!(position_distance(&x, &out.estimate.coords).unwrap() < 1e-12);
    }

    #[test]
    fn deterministic_and_symmetric() {
        let layout = generate_ring_layout(50, 0.1, 0.01, 9).unwrap();
        let params = ObservationParams {
            sigma: 6e-4,
            ..ObservationParams::default()
        };
        let obs = synthesize_observation(&layout, &params, 10).unwrap();
        let a = mds_map(&obs).unwrap();
        let b = mds_map(&obs).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.filled.0, a.filled.0.transpose());
        let c = svd_reconstruct(&obs).unwrap();
        assert_eq!(c, svd_reconstruct(&obs).unwrap());
        assert_eq!(c.filled.0, c.filled.0.transpose());
        assert_eq!(c.estimate.source, Source::Baseline(BaselineTag::SvdReconstruct));
    }

    #[test]
    fn shortest_path_fill_obeys_triangle_inequality() {
        let layout = generate_ring_layout(30, 0.1, 0.01, 11).unwrap();
        let obs = synthesize_observation(&layout, &ObservationParams::default(), 12).unwrap();
        let g = ObservationGraph::new(&obs, 0.0);
        let rows: Vec<Vec<f64>> = (0..30).map(|s| g.shortest_paths_from(s)).collect();
        for i in 0..30 {
            for j in 0..30 {
                for k in 0..30 {
                    assert!(rows[i][j] <= rows[i][k] + rows[k][j] + 1e-12);
                }
            }
        }
    }
}
