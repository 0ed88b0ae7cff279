//! Parametric smoothing through a hidden single-notch process.
//!
//! A tri-diagonal "gengen" matrix `G` drives an unobserved rating that moves
//! one notch at a time. Observed ratings are revealed after an exponentially
//! distributed delay with mean `θ`, which compounds the single-notch moves into
//! the generator
//!
//! ```text
//! Λ = (1/θ)∫₀^∞ e^(−τ/θ) exp(Gτ) dτ − I = (I − θG)⁻¹ − I
//! ```
//!
//! Because `(I − θG)⁻¹` is a stochastic matrix for any non-negative `G`, `Λ`
//! is always a valid generator whose intensities decay with notch distance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimation::{
    likelihood_report, EstimateReport, FitSummary, Method, TransitionStats, Weighting,
};
use crate::events::{EventTable, ObservationWindow};
use crate::matrix::GeneratorMatrix;
use crate::optim::{bfgs, nelder_mead, OptimOptions};
use crate::scale::RatingScale;

/// Intensities below this are reported as exactly zero after fitting.
pub const ZERO_INTENSITY: f64 = 1e-8;
const INITIAL_FLOOR: f64 = 0.01;
const SIMPLEX_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct GengenParams {
    scale: Arc<RatingScale>,
    up: Vec<f64>,
    down: Vec<f64>,
    theta: f64,
}

impl GengenParams {
    /// `up[i]` is the intensity from state `i` to `i + 1` (K − 1 values, the
    /// last one into default); `down[i]` is from state `i + 1` to `i`
    /// (K − 2 values).
    pub fn new(scale: Arc<RatingScale>, up: Vec<f64>, down: Vec<f64>, theta: f64) -> Result<Self> {
        let k = scale.len();
        if k < 2 {
            return Err(Error::Scale("a gengen needs at least two states".into()));
        }
        if up.len() != k - 1 {
            return Err(Error::Dimension {
                expected: k - 1,
                found: up.len(),
            });
        }
        if down.len() != k - 2 {
            return Err(Error::Dimension {
                expected: k - 2,
                found: down.len(),
            });
        }
        if let Some(v) = up
            .iter()
            .chain(&down)
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "gengen intensities must be finite and non-negative, got {v}"
            )));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "theta must be positive, got {theta}"
            )));
        }
        Ok(Self {
            scale,
            up,
            down,
            theta,
        })
    }

    pub fn zero(scale: Arc<RatingScale>) -> Result<Self> {
        let k = scale.len();
        Self::new(
            scale,
            vec![0.0; k.saturating_sub(1)],
            vec![0.0; k.saturating_sub(2)],
            1.0,
        )
    }

    pub fn scale(&self) -> &Arc<RatingScale> {
        &self.scale
    }

    pub fn up(&self) -> &[f64] {
        &self.up
    }

    pub fn down(&self) -> &[f64] {
        &self.down
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `2K − 3`.
    pub fn n_params(&self) -> usize {
        self.up.len() + self.down.len()
    }

    /// Up intensities followed by down intensities.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_params(), self.up.iter().chain(&self.down).copied())
    }

    pub fn from_vector(scale: Arc<RatingScale>, v: &DVector<f64>, theta: f64) -> Result<Self> {
        let n_up = scale.len().saturating_sub(1);
        if v.len() != 2 * n_up - 1 {
            return Err(Error::Dimension {
                expected: 2 * n_up - 1,
                found: v.len(),
            });
        }
        let up = v.rows(0, n_up).iter().copied().collect();
        let down = v.rows(n_up, v.len() - n_up).iter().copied().collect();
        Self::new(scale, up, down, theta)
    }

    /// Matrix position `(from, to)` of each parameter, in vector order.
    fn positions(&self) -> Vec<(usize, usize)> {
        (0..self.up.len())
            .map(|i| (i, i + 1))
            .chain((0..self.down.len()).map(|i| (i + 1, i)))
            .collect()
    }
}

/// Tri-diagonal gengen matrix `G` with zero row sums and a zero default row.
pub fn build_gengen(p: &GengenParams) -> DMatrix<f64> {
    let k = p.scale.len();
    let mut g = DMatrix::zeros(k, k);
    for (value, (a, b)) in p.to_vector().iter().zip(p.positions()) {
        g[(a, b)] = *value;
        g[(a, a)] -= *value;
    }
    g
}

/// `(I − θG)⁻¹`, the revelation-averaged transition matrix.
fn revelation_matrix(p: &GengenParams) -> Result<DMatrix<f64>> {
    let k = p.scale.len();
    let lhs = DMatrix::<f64>::identity(k, k) - build_gengen(p) * p.theta;
    lhs.lu().try_inverse().ok_or(Error::Singular)
}

fn generator_from_revelation(
    scale: &Arc<RatingScale>,
    m: &DMatrix<f64>,
) -> Result<GeneratorMatrix> {
    let k = scale.len();
    let mut off = m.clone();
    for i in 0..k {
        off[(i, i)] = 0.0;
        for j in 0..k {
            off[(i, j)] = off[(i, j)].max(0.0);
        }
    }
    GeneratorMatrix::from_intensities(scale.clone(), off)
}

/// `Λ = (I − θG)⁻¹ − I`.
pub fn gengen_to_generator(p: &GengenParams) -> Result<GeneratorMatrix> {
    generator_from_revelation(&p.scale, &revelation_matrix(p)?)
}

/// Weighted log-likelihood of the generator implied by `p`, with letter-grade
/// events averaged over their member ratings.
pub fn smoothed_log_likelihood(
    p: &GengenParams,
    events: &EventTable,
    weighting: &Weighting,
    window: &ObservationWindow,
) -> Result<f64> {
    if !p.scale.same_states(events.scale()) {
        return Err(Error::Dimension {
            expected: events.scale().len(),
            found: p.scale.len(),
        });
    }
    let stats = TransitionStats::collect(events, window, weighting)?;
    Ok(stats.log_likelihood(gengen_to_generator(p)?.entries()))
}

/// Objective and its gradient with respect to the gengen intensities.
pub struct SmoothedObjective {
    stats: TransitionStats,
    scale: Arc<RatingScale>,
    theta: f64,
}

impl SmoothedObjective {
    pub fn new(stats: TransitionStats, scale: Arc<RatingScale>, theta: f64) -> Self {
        Self {
            stats,
            scale,
            theta,
        }
    }

    fn params(&self, g: &DVector<f64>) -> Option<GengenParams> {
        GengenParams::from_vector(self.scale.clone(), g, self.theta).ok()
    }

    pub fn value(&self, g: &DVector<f64>) -> f64 {
        let Some(p) = self.params(g) else {
            return f64::NEG_INFINITY;
        };
        match gengen_to_generator(&p) {
            Ok(gen) => self.stats.log_likelihood(gen.entries()),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// `∂L/∂g` from `∂L/∂G = θ Mᵀ E Mᵀ` with `M = (I − θG)⁻¹`, `E_ii = S_i`
    /// and `E_ij = N_ij / λ_ij`.
    pub fn gradient(&self, g: &DVector<f64>) -> DVector<f64> {
        let n = g.len();
        let Some(p) = self.params(g) else {
            return DVector::from_element(n, f64::NAN);
        };
        let Ok(m) = revelation_matrix(&p) else {
            return DVector::from_element(n, f64::NAN);
        };
        let k = self.scale.len();
        let mut e = DMatrix::zeros(k, k);
        for i in 0..k {
            e[(i, i)] = self.stats.exposure[i];
            for j in 0..k {
                let c = self.stats.counts[(i, j)];
                if i != j && c != 0.0 {
                    e[(i, j)] = c / m[(i, j)];
                }
            }
        }
        let mt = m.transpose();
        let d = &mt * e * &mt * self.theta;
        DVector::from_iterator(
            n,
            p.positions()
                .into_iter()
                .map(|(a, b)| d[(a, b)] - d[(a, a)]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub optim: OptimOptions,
    pub theta: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optim: OptimOptions::default(),
            theta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: GengenParams,
    pub report: EstimateReport,
}

impl FitReport {
    pub fn summary(&self) -> FitSummary {
        self.report
            .fit
            .expect("smoothed reports carry a fit summary")
    }
}

/// Starting point: first off-diagonals of the closed-form MLE, floored.
fn initial_guess(stats: &TransitionStats, k: usize) -> DVector<f64> {
    let raw = stats.mle_intensities();
    let up = (0..k - 1).map(|i| raw[(i, i + 1)].max(INITIAL_FLOOR));
    let down = (1..k - 1).map(|i| raw[(i, i - 1)].max(INITIAL_FLOOR));
    DVector::from_iterator(2 * k - 3, up.chain(down))
}

/// Maximizes the smoothed likelihood over non-negative gengen intensities,
/// optimizing their logarithms. Running out of iterations is reported through
/// the `converged` flag rather than as an error.
pub fn fit_smoothed(
    events: &EventTable,
    weighting: &Weighting,
    window: &ObservationWindow,
    options: &FitOptions,
) -> Result<FitReport> {
    let scale = events.scale().clone();
    let k = scale.len();
    if k < 3 {
        return Err(Error::Scale("smoothing needs at least three states".into()));
    }
    let stats = TransitionStats::collect(events, window, weighting)?;
    if stats.raw_counts.sum() <= 0.0 {
        return Err(Error::NoData("no observed transitions to fit".into()));
    }
    let objective = SmoothedObjective::new(stats.clone(), scale.clone(), options.theta);
    let x0 = initial_guess(&stats, k).map(f64::ln);
    let initial_objective = objective.value(&x0.map(f64::exp));

    let f = |x: &DVector<f64>| {
        let v = -objective.value(&x.map(f64::exp));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let grad = |x: &DVector<f64>| {
        let g = x.map(f64::exp);
        -objective.gradient(&g).component_mul(&g)
    };

    let mut result = bfgs(f, grad, x0, &options.optim);
    let mut iterations = result.iterations;
    if !result.converged {
        let simplex = nelder_mead(f, result.x.clone(), SIMPLEX_STEP, &options.optim);
        iterations += simplex.iterations;
        if simplex.f <= result.f {
            result = bfgs(f, grad, simplex.x, &options.optim);
            iterations += result.iterations;
        }
    }

    let mut g = result.x.map(f64::exp);
    let snapped = g.map(|v| if v < ZERO_INTENSITY { 0.0 } else { v });
    if objective.value(&snapped).is_finite() {
        g = snapped;
    }
    let params = GengenParams::from_vector(scale, &g, options.theta)?;
    let generator = gengen_to_generator(&params)?;
    let mut report = likelihood_report(
        Method::Smoothed,
        events,
        window,
        weighting,
        &stats,
        generator,
    )?;
    report.fit = Some(FitSummary {
        objective: objective.value(&g),
        initial_objective,
        iterations,
        converged: result.converged,
    });
    if !result.converged {
        report.warnings.push(format!(
            "optimizer did not converge within {iterations} iterations"
        ));
    }
    Ok(FitReport { params, report })
}
