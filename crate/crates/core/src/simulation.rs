//! Jump-process simulation of rating paths under a piecewise-constant
//! generator schedule.
//!
//! Randomness is counter-based: path `i` of a run draws from the ChaCha8
//! stream `i` of the run's seed, so results do not depend on how paths are
//! spread over threads.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{Date, EndState, EventTable, TransitionEvent};
use crate::matrix::GeneratorMatrix;
use crate::scale::{RatingScale, StateRef};

const CHUNK: usize = 4096;

/// Generators in force from given times on; the first starts at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSchedule {
    segments: Vec<(f64, GeneratorMatrix)>,
}

impl GeneratorSchedule {
    pub fn new(segments: Vec<(f64, GeneratorMatrix)>) -> Result<Self> {
        let Some((first, gen0)) = segments.first() else {
            return Err(Error::InvalidInput("empty generator schedule".into()));
        };
        if *first != 0.0 {
            return Err(Error::InvalidInput(
                "the first generator must start at time 0".into(),
            ));
        }
        for pair in segments.windows(2) {
            if !(pair[0].0 < pair[1].0) {
                return Err(Error::InvalidInput(
                    "schedule times must be ascending".into(),
                ));
            }
        }
        for (_, g) in &segments {
            if !g.is_valid() {
                return Err(Error::InvalidInput(
                    "schedule contains an invalid generator".into(),
                ));
            }
            if !g.scale().same_states(gen0.scale()) {
                return Err(Error::Dimension {
                    expected: gen0.len(),
                    found: g.len(),
                });
            }
        }
        Ok(Self { segments })
    }

    pub fn stationary(gen: GeneratorMatrix) -> Result<Self> {
        Self::new(vec![(0.0, gen)])
    }

    pub fn scale(&self) -> &Arc<RatingScale> {
        self.segments[0].1.scale()
    }

    pub fn segments(&self) -> &[(f64, GeneratorMatrix)] {
        &self.segments
    }

    /// Index of the segment in force at `t` and the time it ends.
    fn segment_at(&self, t: f64) -> (usize, f64) {
        let i = self
            .segments
            .partition_point(|(from, _)| *from <= t)
            .saturating_sub(1);
        let end = self.segments.get(i + 1).map_or(f64::INFINITY, |s| s.0);
        (i, end)
    }

    /// Breakpoints strictly inside `(0, horizon)`.
    fn breakpoints(&self, horizon: f64) -> impl Iterator<Item = f64> + '_ {
        self.segments[1..]
            .iter()
            .map(|s| s.0)
            .filter(move |&t| t > 0.0 && t < horizon)
    }

    /// The same schedule with default removed: transitions into default are
    /// dropped and the diagonals rebalanced.
    fn default_free(&self) -> Result<Self> {
        let segments = self
            .segments
            .iter()
            .map(|(t, g)| {
                let mut e = g.entries().clone();
                let d = g.scale().default_index();
                e.column_mut(d).fill(0.0);
                GeneratorMatrix::from_intensities(g.scale().clone(), e).map(|g| (*t, g))
            })
            .collect::<Result<_>>()?;
        Ok(Self { segments })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingPath {
    /// `(time, state)` records: the start followed by every jump.
    pub jumps: Vec<(f64, usize)>,
    pub horizon: f64,
    pub defaulted: bool,
}

impl RatingPath {
    pub fn state_at(&self, t: f64) -> usize {
        let i = self
            .jumps
            .partition_point(|(s, _)| *s <= t)
            .saturating_sub(1);
        self.jumps[i].1
    }

    pub fn final_state(&self) -> usize {
        self.jumps.last().expect("paths are never empty").1
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    match Exp::new(rate) {
        Ok(d) if rate > 0.0 => d.sample(rng),
        _ => f64::INFINITY,
    }
}

fn sample_with<R: Rng>(
    schedule: &GeneratorSchedule,
    r0: usize,
    horizon: f64,
    rng: &mut R,
) -> RatingPath {
    let default = schedule.scale().default_index();
    let mut jumps = vec![(0.0, r0)];
    let (mut t, mut r) = (0.0, r0);
    while r != default {
        let (seg, seg_end) = schedule.segment_at(t);
        let gen = schedule.segments[seg].1.entries();
        let rate = -gen[(r, r)];
        let stop = seg_end.min(horizon);
        let next = t + exponential(rng, rate);
        if next >= stop {
            if seg_end < horizon {
                t = seg_end;
                continue;
            }
            break;
        }
        let u: f64 = rng.random::<f64>() * rate;
        let mut acc = 0.0;
        let mut target = None;
        for q in (0..gen.ncols()).filter(|&q| q != r) {
            if gen[(r, q)] > 0.0 {
                acc += gen[(r, q)];
                target = Some(q);
                if u < acc {
                    break;
                }
            }
        }
        let q = target.expect("positive rate has a target");
        t = next;
        r = q;
        jumps.push((t, r));
    }
    RatingPath {
        jumps,
        horizon,
        defaulted: r == default,
    }
}

fn check_start(schedule: &GeneratorSchedule, r0: usize, horizon: f64) -> Result<()> {
    if r0 >= schedule.scale().len() {
        return Err(Error::InvalidInput(format!(
            "start state {r0} out of range"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    Ok(())
}

/// One path from `r0` over `[0, horizon]`, drawn from stream 0 of `seed`.
pub fn sample_path(
    schedule: &GeneratorSchedule,
    r0: usize,
    horizon: f64,
    seed: u64,
) -> Result<RatingPath> {
    check_start(schedule, r0, horizon)?;
    Ok(sample_with(schedule, r0, horizon, &mut path_rng(seed, 0)))
}

/// Piecewise-constant default intensity along a path as `(time, state, hazard)`
/// records, one at the start and one wherever the state or the hazard changes.
pub fn hazard_trajectory(
    path: &RatingPath,
    schedule: &GeneratorSchedule,
) -> Vec<(f64, usize, f64)> {
    let d = schedule.scale().default_index();
    let mut times: Vec<f64> = path.jumps.iter().map(|j| j.0).collect();
    times.extend(schedule.breakpoints(path.horizon));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for t in times {
        let r = path.state_at(t);
        let (seg, _) = schedule.segment_at(t);
        let h = schedule.segments[seg].1.get(r, d);
        if out.last().is_none_or(|&(_, pr, ph)| pr != r || ph != h) {
            out.push((t, r, h));
        }
    }
    out
}

/// `∫_0^horizon λ_{r(s),D}(s) ds`.
pub fn integrated_hazard(path: &RatingPath, schedule: &GeneratorSchedule) -> f64 {
    let steps = hazard_trajectory(path, schedule);
    let mut total = 0.0;
    for (i, &(t, _, h)) in steps.iter().enumerate() {
        let end = steps.get(i + 1).map_or(path.horizon, |s| s.0);
        total += h * (end - t);
    }
    total
}

/// Fraction of paths from `r0` in each state at the horizon.
pub fn mc_occupancy(
    schedule: &GeneratorSchedule,
    r0: usize,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_start(schedule, r0, horizon)?;
    let k = schedule.scale().len();
    let chunks: Vec<Vec<u64>> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let mut rng = path_rng(seed, i as u64);
                counts[sample_with(schedule, r0, horizon, &mut rng).final_state()] += 1;
            }
            counts
        })
        .collect();
    let mut total = vec![0u64; k];
    for c in chunks {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    Ok(total
        .into_iter()
        .map(|v| v as f64 / n_paths as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Survival from `r0` to the horizon as the mean of `exp(−∫ hazard)` over
/// paths of the default-free chain.
pub fn pathwise_survival(
    schedule: &GeneratorSchedule,
    r0: usize,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_start(schedule, r0, horizon)?;
    if n_paths < 2 {
        return Err(Error::InvalidInput("need at least two paths".into()));
    }
    let free = schedule.default_free()?;
    let sums: Vec<(f64, f64)> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let (mut s, mut s2) = (0.0, 0.0);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let mut rng = path_rng(seed, i as u64);
                let path = sample_with(&free, r0, horizon, &mut rng);
                let v = (-integrated_hazard(&path, schedule)).exp();
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_paths as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
    })
}

fn path_events(
    path: &RatingPath,
    default: usize,
    withdrawal: f64,
    issuer: &str,
) -> Vec<(String, f64, usize, f64, EndState)> {
    let mut rows = Vec::new();
    for (k, &(t, r)) in path.jumps.iter().enumerate() {
        if r == default || t >= withdrawal {
            break;
        }
        let (end, end_state) = match path.jumps.get(k + 1) {
            Some(&(next, q)) if next < withdrawal => (next, EndState::State(StateRef::Rating(q))),
            _ if withdrawal < path.horizon => (withdrawal, EndState::Withdrawn),
            _ => (path.horizon, EndState::State(StateRef::Rating(r))),
        };
        rows.push((issuer.to_string(), t, r, end, end_state));
    }
    rows
}

/// Event table of `n_issuers` simulated histories over `[0, horizon]`.
/// Issuers start round-robin over the non-default states; withdrawals arrive
/// independently at `withdrawal_rate` per year.
pub fn simulate_events(
    schedule: &GeneratorSchedule,
    n_issuers: usize,
    horizon: f64,
    withdrawal_rate: f64,
    seed: u64,
) -> Result<EventTable> {
    if n_issuers == 0 {
        return Err(Error::InvalidInput("need at least one issuer".into()));
    }
    if !(withdrawal_rate.is_finite() && withdrawal_rate >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "withdrawal rate must be non-negative, got {withdrawal_rate}"
        )));
    }
    check_start(schedule, 0, horizon)?;
    let scale = schedule.scale().clone();
    let starts = scale.default_index();
    if starts == 0 {
        return Err(Error::Scale("scale has no non-default states".into()));
    }
    let per_issuer: Vec<_> = (0..n_issuers)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let withdrawal = exponential(&mut rng, withdrawal_rate);
            let path = sample_with(schedule, i % starts, horizon, &mut rng);
            path_events(&path, starts, withdrawal, &(i + 1).to_string())
        })
        .collect();
    let events = per_issuer
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(n, (issuer_id, t, r, end, end_state))| TransitionEvent {
            event_id: (n + 1).to_string(),
            issuer_id,
            start: Date::from_years(t),
            start_state: StateRef::Rating(r),
            end: Date::from_years(end),
            end_state,
        })
        .collect();
    EventTable::new(scale, events)
}
