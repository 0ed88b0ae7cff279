//! Cohort, stationary and time-weighted maximum-likelihood estimators, and the
//! weighted log-likelihood shared with the smoother.
//!
//! Every likelihood-based estimator depends on the events only through two
//! sufficient statistics: the weighted exposure `S_i` spent in each state and
//! the weighted count `N_ij` of observed transitions. In terms of those the
//! log-likelihood is
//!
//! ```text
//! L(Λ) = Σ_i S_i λ_ii + Σ_{i≠j} N_ij ln λ_ij
//! ```
//!
//! and its unconstrained maximizer is `λ_ij = N_ij / S_i`.
//!
//! Letter-grade states are treated as partially censored: an event whose start
//! or end names a letter grade spreads its contribution evenly over every
//! (start member, end member) pair. Pairs whose members coincide are
//! no-transition events and contribute only exposure.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{classify_censoring, clip_to_window, EndState, EventTable, ObservationWindow};
use crate::matrix::{mexp, validate_transition, GeneratorMatrix, TransitionMatrix};
use crate::scale::{RatingScale, StateRef};
use crate::smoothing::{fit_smoothed, FitOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfLife {
    Finite(f64),
    Infinite,
}

impl HalfLife {
    pub fn new(years: f64) -> Result<Self> {
        if years.is_infinite() && years > 0.0 {
            return Ok(HalfLife::Infinite);
        }
        if !(years.is_finite() && years > 0.0) {
            return Err(Error::InvalidInput(format!(
                "half-life must be positive, got {years}"
            )));
        }
        Ok(HalfLife::Finite(years))
    }

    /// Exponential time constant `T_H / ln 2`.
    pub fn time_constant(&self) -> Option<f64> {
        match self {
            HalfLife::Finite(h) => Some(h / std::f64::consts::LN_2),
            HalfLife::Infinite => None,
        }
    }
}

impl FromStr for HalfLife {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinite") {
            return Ok(HalfLife::Infinite);
        }
        let years: f64 = s
            .parse()
            .map_err(|_| Error::InvalidInput(format!("malformed half-life {s:?}")))?;
        HalfLife::new(years)
    }
}

impl fmt::Display for HalfLife {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HalfLife::Finite(h) => write!(f, "{h}"),
            HalfLife::Infinite => f.write_str("inf"),
        }
    }
}

/// Exponential time-decay of observations relative to an estimation date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weighting {
    pub half_life: HalfLife,
    pub as_of: f64,
}

impl Weighting {
    pub fn new(half_life: HalfLife, as_of: f64) -> Self {
        Self { half_life, as_of }
    }

    pub fn unweighted(as_of: f64) -> Self {
        Self::new(HalfLife::Infinite, as_of)
    }

    /// `2^(−(T − t)/T_H)`.
    pub fn weight(&self, t: f64) -> Result<f64> {
        let elapsed = self.as_of - t;
        if elapsed < 0.0 {
            return Err(Error::InvalidInput(format!(
                "time {t} lies after the estimation date {}",
                self.as_of
            )));
        }
        Ok(match self.half_life {
            HalfLife::Finite(h) => (-elapsed / h).exp2(),
            HalfLife::Infinite => 1.0,
        })
    }

    /// `∫_a^b w(t) dt = T_H^exp · (w(b) − w(a))`, or `b − a` without decay.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        let wb = self.weight(b)?;
        Ok(match self.half_life.time_constant() {
            Some(tau) => tau * wb * -(-(b - a) / tau).exp_m1(),
            None => b - a,
        })
    }
}

pub fn weight(t: f64, as_of: f64, half_life: HalfLife) -> Result<f64> {
    Weighting::new(half_life, as_of).weight(t)
}

/// Exposure and transition totals of an event table inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionStats {
    /// Weighted exposure `S_i`.
    pub exposure: DVector<f64>,
    /// Weighted observed transitions `N_ij` (zero diagonal).
    pub counts: DMatrix<f64>,
    /// Unweighted time spent in each state.
    pub durations: DVector<f64>,
    /// Unweighted observed transitions.
    pub raw_counts: DMatrix<f64>,
    /// Number of events intersecting the window.
    pub events_used: usize,
}

impl TransitionStats {
    pub fn collect(
        events: &EventTable,
        window: &ObservationWindow,
        weighting: &Weighting,
    ) -> Result<Self> {
        if weighting.as_of < window.end() {
            return Err(Error::InvalidInput(format!(
                "estimation date {} precedes the window end {}",
                weighting.as_of,
                window.end()
            )));
        }
        let scale = events.scale();
        let k = scale.len();
        let mut stats = Self {
            exposure: DVector::zeros(k),
            counts: DMatrix::zeros(k, k),
            durations: DVector::zeros(k),
            raw_counts: DMatrix::zeros(k, k),
            events_used: 0,
        };
        for ev in events.events() {
            let Some((lo, hi)) = clip_to_window(ev, window) else {
                continue;
            };
            stats.events_used += 1;
            let starts = scale.members(ev.start_state);
            let share = 1.0 / starts.len() as f64;
            let integral = weighting.integral(lo, hi)?;
            for &a in starts {
                stats.exposure[a] += integral * share;
                stats.durations[a] += (hi - lo) * share;
            }
            if !classify_censoring(ev, window).observed_transition() {
                continue;
            }
            let EndState::State(end) = ev.end_state else {
                continue;
            };
            let ends = scale.members(end);
            let w = weighting.weight(hi)?;
            let pair = share / ends.len() as f64;
            for &a in starts {
                for &b in ends {
                    if a != b {
                        stats.counts[(a, b)] += w * pair;
                        stats.raw_counts[(a, b)] += pair;
                    }
                }
            }
        }
        Ok(stats)
    }

    /// `Σ_i S_i λ_ii + Σ_{i≠j} N_ij ln λ_ij`; `−∞` when an observed transition
    /// has no positive intensity.
    pub fn log_likelihood(&self, gen: &DMatrix<f64>) -> f64 {
        let k = self.exposure.len();
        let mut total = 0.0;
        for i in 0..k {
            total += self.exposure[i] * gen[(i, i)];
            for j in 0..k {
                let n = self.counts[(i, j)];
                if i == j || n == 0.0 {
                    continue;
                }
                let lambda = gen[(i, j)];
                if lambda <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total += n * lambda.ln();
            }
        }
        total
    }

    /// Closed-form maximizer `N_ij / S_i`; rows without exposure stay zero.
    pub fn mle_intensities(&self) -> DMatrix<f64> {
        let k = self.exposure.len();
        let mut out = DMatrix::zeros(k, k);
        for i in 0..k {
            if self.exposure[i] > 0.0 {
                for j in 0..k {
                    if i != j {
                        out[(i, j)] = self.counts[(i, j)] / self.exposure[i];
                    }
                }
            }
        }
        out
    }
}

/// Weighted log-likelihood of a generator; the parameter-free `ln dt` terms
/// are dropped.
pub fn log_likelihood(
    gen: &GeneratorMatrix,
    events: &EventTable,
    weighting: &Weighting,
    window: &ObservationWindow,
) -> Result<f64> {
    if !gen.scale().same_states(events.scale()) {
        return Err(Error::Dimension {
            expected: events.scale().len(),
            found: gen.len(),
        });
    }
    Ok(TransitionStats::collect(events, window, weighting)?.log_likelihood(gen.entries()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Cohort,
    Mle,
    Weighted,
    Smoothed,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cohort => "cohort",
            Method::Mle => "mle",
            Method::Weighted => "weighted",
            Method::Smoothed => "smoothed",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cohort" => Ok(Method::Cohort),
            "mle" => Ok(Method::Mle),
            "weighted" => Ok(Method::Weighted),
            "smoothed" => Ok(Method::Smoothed),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optimizer outcome attached to smoothed estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSummary {
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub window: ObservationWindow,
    pub weighting: Weighting,
    /// Absent for the cohort estimator.
    pub generator: Option<GeneratorMatrix>,
    /// One-year matrix, or the window-length matrix for the cohort estimator.
    pub transition: TransitionMatrix,
    /// Observed transitions; for the cohort estimator, issuers by start and end state.
    pub counts: DMatrix<f64>,
    /// Time spent per state; for the cohort estimator, issuers per start state.
    pub exposure: DVector<f64>,
    pub fit: Option<FitSummary>,
    pub warnings: Vec<String>,
}

fn exposure_warnings(scale: &RatingScale, exposure: &DVector<f64>) -> Vec<String> {
    (0..scale.len())
        .filter(|&i| i != scale.default_index() && exposure[i] <= 0.0)
        .map(|i| {
            format!(
                "no exposure in state {}; its intensities are set to 0",
                scale.name(i)
            )
        })
        .collect()
}

pub(crate) fn likelihood_report(
    method: Method,
    events: &EventTable,
    window: &ObservationWindow,
    weighting: &Weighting,
    stats: &TransitionStats,
    generator: GeneratorMatrix,
) -> Result<EstimateReport> {
    let transition = mexp(&generator, 1.0)?;
    Ok(EstimateReport {
        method,
        window: *window,
        weighting: *weighting,
        generator: Some(generator),
        transition,
        counts: stats.raw_counts.clone(),
        exposure: stats.durations.clone(),
        fit: None,
        warnings: exposure_warnings(events.scale(), &stats.durations),
    })
}

fn closed_form(
    method: Method,
    events: &EventTable,
    window: &ObservationWindow,
    weighting: &Weighting,
) -> Result<EstimateReport> {
    let stats = TransitionStats::collect(events, window, weighting)?;
    if stats.events_used == 0 || stats.durations.sum() <= 0.0 {
        return Err(Error::NoData(format!(
            "no events intersect the window [{}, {}]",
            window.start(),
            window.end()
        )));
    }
    let gen = GeneratorMatrix::from_intensities(events.scale().clone(), stats.mle_intensities())?;
    likelihood_report(method, events, window, weighting, &stats, gen)
}

/// Stationary continuous-time MLE: observed transitions over time at risk.
pub fn mle_stationary(events: &EventTable, window: &ObservationWindow) -> Result<EstimateReport> {
    closed_form(
        Method::Mle,
        events,
        window,
        &Weighting::unweighted(window.end()),
    )
}

/// Exponentially time-weighted MLE as of the window end.
pub fn mle_weighted(
    events: &EventTable,
    half_life: HalfLife,
    window: &ObservationWindow,
) -> Result<EstimateReport> {
    closed_form(
        Method::Weighted,
        events,
        window,
        &Weighting::new(half_life, window.end()),
    )
}

fn notched(scale: &RatingScale, ev_id: &str, state: StateRef) -> Result<usize> {
    match state {
        StateRef::Rating(i) => Ok(i),
        StateRef::Group(_) => Err(Error::event(
            ev_id,
            format!(
                "letter grade {} has no single rating for the cohort estimator",
                scale.label(state)
            ),
        )),
    }
}

/// Cohort estimator: the fraction of issuers rated `i` at the window start
/// that are rated `j` at the window end. Issuers withdrawn inside the window
/// are dropped; rows without issuers are identity rows.
pub fn cohort_estimate(events: &EventTable, window: &ObservationWindow) -> Result<EstimateReport> {
    let scale = events.scale().clone();
    let k = scale.len();
    let (ws, we) = (window.start(), window.end());
    let mut counts = DMatrix::<f64>::zeros(k, k);

    'issuers: for history in events.by_issuer() {
        let Some(first) = history.iter().find(|e| e.t_start() <= ws && ws < e.t_end()) else {
            continue;
        };
        let from = notched(&scale, &first.event_id, first.start_state)?;
        for e in history {
            if e.end_state == EndState::Withdrawn && e.t_end() > ws && e.t_end() <= we {
                continue 'issuers;
            }
        }
        let Some(last) = history.iter().rev().find(|e| e.t_start() < we) else {
            continue;
        };
        let to = if last.t_end() > we {
            notched(&scale, &last.event_id, last.start_state)?
        } else {
            match last.end_state {
                EndState::State(s) => notched(&scale, &last.event_id, s)?,
                EndState::Withdrawn => continue,
            }
        };
        counts[(from, to)] += 1.0;
    }

    let sizes = DVector::from_iterator(k, counts.row_iter().map(|r| r.sum()));
    let mut probs = DMatrix::<f64>::identity(k, k);
    for i in 0..k {
        if sizes[i] > 0.0 {
            let mut off = 0.0;
            for j in 0..k {
                if j != i {
                    probs[(i, j)] = counts[(i, j)] / sizes[i];
                    off += probs[(i, j)];
                }
            }
            probs[(i, i)] = 1.0 - off;
        }
    }
    let transition = validate_transition(scale.clone(), window.length(), probs)?;
    let warnings = (0..k)
        .filter(|&i| i != scale.default_index() && sizes[i] == 0.0)
        .map(|i| {
            format!(
                "no issuers start in state {}; identity row used",
                scale.name(i)
            )
        })
        .collect();
    Ok(EstimateReport {
        method: Method::Cohort,
        window: *window,
        weighting: Weighting::unweighted(we),
        generator: None,
        transition,
        counts,
        exposure: sizes,
        fit: None,
        warnings,
    })
}

/// Runs one estimator over `[window.start, window.end]`, weighting as of the window end.
pub fn estimate(
    method: Method,
    events: &EventTable,
    window: &ObservationWindow,
    half_life: HalfLife,
    options: &FitOptions,
) -> Result<EstimateReport> {
    match method {
        Method::Cohort => cohort_estimate(events, window),
        Method::Mle => mle_stationary(events, window),
        Method::Weighted => mle_weighted(events, half_life, window),
        Method::Smoothed => {
            let weighting = Weighting::new(half_life, window.end());
            Ok(fit_smoothed(events, &weighting, window, options)?.report)
        }
    }
}

/// One estimate per date, each over `[window_start, date]`. Dates are
/// evaluated in parallel; errors carry the date they occurred at.
pub fn roll_estimates(
    events: &EventTable,
    dates: &[f64],
    window_start: f64,
    half_life: HalfLife,
    method: Method,
    options: &FitOptions,
) -> Result<Vec<EstimateReport>> {
    if dates.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(
            "roll dates must be strictly ascending".into(),
        ));
    }
    dates
        .par_iter()
        .map(|&date| {
            ObservationWindow::new(window_start, date)
                .and_then(|w| estimate(method, events, &w, half_life, options))
                .map_err(|e| Error::AtDate {
                    date,
                    source: Box::new(e),
                })
        })
        .collect()
}
