//! Shared inputs for the benchmarks.

use std::sync::Arc;

use ratemig::{
    gengen_to_generator, mexp, simulate_events, EventTable, GeneratorMatrix, GeneratorSchedule,
    GengenParams, RatingScale, TransitionMatrix,
};

/// Smooth gengen on the notched scale: upgrades fall and downgrades rise
/// geometrically towards default.
pub fn notched_params() -> GengenParams {
    let scale = Arc::new(RatingScale::notched());
    let k = scale.len();
    let up = (0..k - 1).map(|i| 0.02 * 1.25f64.powi(i as i32)).collect();
    let down = (0..k - 2).map(|i| 0.08 * 0.97f64.powi(i as i32)).collect();
    GengenParams::new(scale, up, down, 1.0).expect("valid parameters")
}

pub fn notched_generator() -> GeneratorMatrix {
    gengen_to_generator(&notched_params()).expect("valid generator")
}

pub fn notched_transition() -> TransitionMatrix {
    mexp(&notched_generator(), 1.0).expect("finite exponential")
}

/// Simulated histories over `[0, horizon]` without withdrawals.
pub fn notched_events(n_issuers: usize, horizon: f64) -> EventTable {
    let schedule = GeneratorSchedule::stationary(notched_generator()).expect("valid schedule");
    simulate_events(&schedule, n_issuers, horizon, 0.0, 1).expect("simulated events")
}
