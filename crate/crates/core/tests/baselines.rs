use ringcal_core::{
    classical_mds, generate_ring_layout, mds_map, optspace_complete, position_distance, svd_reconstruct,
    synthesize_observation, CompletionOptions, ObservationParams, ObservationSet, SensorLayout,
    SquaredDistanceMatrix,
};

fn noisy(n: usize, s: u64) -> (SensorLayout, ObservationSet) {
    let layout = generate_ring_layout(n, 0.1, 0.01, s).unwrap();
    let params = ObservationParams {
        sigma: 6e-4,
        ..ObservationParams::default()
    };
    let obs = synthesize_observation(&layout, &params, s + 1).unwrap();
    (layout, obs)
}

fn pipeline_error(layout: &SensorLayout, obs: &ObservationSet) -> f64 {
    let squares = obs.values.map(|v| v * v);
    let done = optspace_complete(&squares, &obs.completion_mask(), &CompletionOptions::default()).unwrap();
    let xh = classical_mds(&SquaredDistanceMatrix(done.estimate), 2).unwrap();
    position_distance(&layout.coords(), &xh.estimate.coords).unwrap()
}

#[test]
fn zero_fill_error_is_roughly_flat_in_n() {
    let errs: Vec<f64> = [100usize, 400, 1600]
        .iter()
        .map(|&n| {
            let (layout, obs) = noisy(n, 31);
            let out = svd_reconstruct(&obs).unwrap();
            position_distance(&layout.coords(), &out.estimate.coords).unwrap()
        })
        .collect();
    let hi = errs.iter().cloned().fold(f64::MIN, f64::max);
    let lo = errs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi / lo < 10.0, "errors {errs:?}");
}

#[test]
fn baselines_trail_the_pipeline_in_the_noisy_regime() {
    for s in [3u64, 5] {
        let (layout, obs) = noisy(100, s);
        let pipeline = pipeline_error(&layout, &obs);
        let a = position_distance(&layout.coords(), &mds_map(&obs).unwrap().estimate.coords).unwrap();
        let b = position_distance(&layout.coords(), &svd_reconstruct(&obs).unwrap().estimate.coords).unwrap();
        assert!(a > pipeline && b > pipeline, "pipeline {pipeline}, mds-map {a}, svd {b}");
    }
}
