//! Transition and generator matrices over a rating scale.
//!
//! A [`TransitionMatrix`] is row-stochastic with an absorbing default row. A
//! [`GeneratorMatrix`] carries a validity flag because a raw matrix logarithm
//! can violate the generator constraints; [`regularize`] repairs those.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scale::RatingScale;

/// Row sums must match 1 (transition) or 0 (generator) to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Negative slack allowed before an entry counts as negative; smaller
/// violations are clamped to zero.
pub const ENTRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    scale: Arc<RatingScale>,
    horizon: f64,
    entries: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    scale: Arc<RatingScale>,
    entries: DMatrix<f64>,
    valid: bool,
}

fn check_shape(scale: &RatingScale, entries: &DMatrix<f64>) -> Result<()> {
    let k = scale.len();
    if entries.nrows() != k {
        return Err(Error::Dimension {
            expected: k,
            found: entries.nrows(),
        });
    }
    if entries.ncols() != k {
        return Err(Error::Dimension {
            expected: k,
            found: entries.ncols(),
        });
    }
    for r in 0..k {
        for c in 0..k {
            let v = entries[(r, c)];
            if !v.is_finite() {
                return Err(Error::Entry {
                    row: r,
                    col: c,
                    value: v,
                    reason: "not finite",
                });
            }
        }
    }
    Ok(())
}

/// Builds a dense matrix from row slices.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::Dimension {
            expected: m,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_row_iterator(
        n,
        m,
        rows.iter().flat_map(|r| r.iter().copied()),
    ))
}

/// Describes the first generator constraint that `entries` violates.
fn generator_violation(scale: &RatingScale, entries: &DMatrix<f64>) -> Option<Error> {
    let d = scale.default_index();
    for (r, row) in entries.row_iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if r == d && v.abs() > ENTRY_TOL {
                return Some(Error::Entry {
                    row: r,
                    col: c,
                    value: v,
                    reason: "default row must be zero",
                });
            }
            if r != c && v < -ENTRY_TOL {
                return Some(Error::Entry {
                    row: r,
                    col: c,
                    value: v,
                    reason: "negative off-diagonal intensity",
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if sum.abs() > ROW_SUM_TOL {
            return Some(Error::RowSum {
                row: r,
                sum,
                target: 0.0,
            });
        }
    }
    None
}

fn clamp_small_negatives(entries: &mut DMatrix<f64>) {
    let n = entries.nrows();
    for r in 0..n {
        for c in 0..n {
            if r != c && entries[(r, c)] < 0.0 && entries[(r, c)] >= -ENTRY_TOL {
                entries[(r, c)] = 0.0;
            }
        }
    }
}

impl GeneratorMatrix {
    pub fn scale(&self) -> &Arc<RatingScale> {
        &self.scale
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[(from, to)]
    }

    /// Intensity between two named states.
    pub fn intensity(&self, from: &str, to: &str) -> Option<f64> {
        let i = self.scale.index_of(from)?;
        let j = self.scale.index_of(to)?;
        Some(self.entries[(i, j)])
    }

    /// Instantaneous default intensity per state.
    pub fn hazard(&self, state: usize) -> f64 {
        self.entries[(state, self.scale.default_index())]
    }

    pub fn zero(scale: Arc<RatingScale>) -> Self {
        let k = scale.len();
        Self {
            scale,
            entries: DMatrix::zeros(k, k),
            valid: true,
        }
    }

    /// Wraps entries without judging them; the validity flag records whether the
    /// generator constraints hold.
    pub fn classify(scale: Arc<RatingScale>, mut entries: DMatrix<f64>) -> Result<Self> {
        check_shape(&scale, &entries)?;
        let valid = generator_violation(&scale, &entries).is_none();
        if valid {
            clamp_small_negatives(&mut entries);
        }
        Ok(Self {
            scale,
            entries,
            valid,
        })
    }

    /// Builds a valid generator from off-diagonal intensities; each diagonal is
    /// set to minus its row's off-diagonal sum and the default row is zeroed.
    pub fn from_intensities(scale: Arc<RatingScale>, mut entries: DMatrix<f64>) -> Result<Self> {
        check_shape(&scale, &entries)?;
        let d = scale.default_index();
        entries.row_mut(d).fill(0.0);
        rebalance_diagonal(&mut entries);
        clamp_small_negatives(&mut entries);
        let g = Self {
            scale,
            entries,
            valid: true,
        };
        match generator_violation(&g.scale, &g.entries) {
            None => Ok(g),
            Some(e) => Err(e),
        }
    }

    /// Loads a generator printed to `decimals` places. Row sums may be off by the
    /// accumulated rounding; the diagonal is rebuilt from the off-diagonal entries.
    pub fn from_rounded(
        scale: Arc<RatingScale>,
        entries: DMatrix<f64>,
        decimals: i32,
    ) -> Result<Self> {
        check_shape(&scale, &entries)?;
        let tol = rounding_tolerance(scale.len(), decimals);
        for (r, row) in entries.row_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if sum.abs() > tol {
                return Err(Error::RowSum {
                    row: r,
                    sum,
                    target: 0.0,
                });
            }
        }
        Self::from_intensities(scale, entries)
    }
}

/// Row-sum slack for a table of `k` entries per row, each rounded to `decimals` places.
pub fn rounding_tolerance(k: usize, decimals: i32) -> f64 {
    0.5 * 10f64.powi(-decimals) * k as f64 + ROW_SUM_TOL
}

fn rebalance_diagonal(entries: &mut DMatrix<f64>) {
    let n = entries.nrows();
    for r in 0..n {
        let off: f64 = (0..n).filter(|&c| c != r).map(|c| entries[(r, c)]).sum();
        entries[(r, r)] = -off;
    }
}

/// Checks the generator constraints and returns a generator flagged valid.
pub fn validate_generator(
    scale: Arc<RatingScale>,
    entries: DMatrix<f64>,
) -> Result<GeneratorMatrix> {
    check_shape(&scale, &entries)?;
    if let Some(e) = generator_violation(&scale, &entries) {
        return Err(e);
    }
    GeneratorMatrix::classify(scale, entries)
}

impl TransitionMatrix {
    pub fn scale(&self) -> &Arc<RatingScale> {
        &self.scale
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[(from, to)]
    }

    pub fn probability(&self, from: &str, to: &str) -> Option<f64> {
        let i = self.scale.index_of(from)?;
        let j = self.scale.index_of(to)?;
        Some(self.entries[(i, j)])
    }

    pub fn identity(scale: Arc<RatingScale>) -> Self {
        let k = scale.len();
        Self {
            scale,
            horizon: 0.0,
            entries: DMatrix::identity(k, k),
        }
    }

    /// Loads a transition matrix printed to `decimals` places; the diagonal
    /// absorbs the rounding residual of each row.
    pub fn from_rounded(
        scale: Arc<RatingScale>,
        horizon: f64,
        mut entries: DMatrix<f64>,
        decimals: i32,
    ) -> Result<Self> {
        check_shape(&scale, &entries)?;
        let tol = rounding_tolerance(scale.len(), decimals);
        let n = entries.nrows();
        for r in 0..n {
            let sum: f64 = entries.row(r).iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::RowSum {
                    row: r,
                    sum,
                    target: 1.0,
                });
            }
            entries[(r, r)] -= sum - 1.0;
        }
        validate_transition(scale, horizon, entries)
    }
}

/// Checks the transition-matrix invariants: entries in [0, 1], unit row sums and
/// an absorbing default row.
pub fn validate_transition(
    scale: Arc<RatingScale>,
    horizon: f64,
    mut entries: DMatrix<f64>,
) -> Result<TransitionMatrix> {
    check_shape(&scale, &entries)?;
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} is not a valid time"
        )));
    }
    let d = scale.default_index();
    let n = entries.nrows();
    for r in 0..n {
        for c in 0..n {
            let v = entries[(r, c)];
            if !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&v) {
                return Err(Error::Entry {
                    row: r,
                    col: c,
                    value: v,
                    reason: "probability outside [0, 1]",
                });
            }
            let unit = if c == d { 1.0 } else { 0.0 };
            if r == d && (v - unit).abs() > ENTRY_TOL {
                return Err(Error::Entry {
                    row: r,
                    col: c,
                    value: v,
                    reason: "default row must be absorbing",
                });
            }
        }
        let sum: f64 = entries.row(r).iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::RowSum {
                row: r,
                sum,
                target: 1.0,
            });
        }
    }
    entries.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(TransitionMatrix {
        scale,
        horizon,
        entries,
    })
}

/// Transition matrix `exp(t·Λ)` of a valid generator.
pub fn mexp(gen: &GeneratorMatrix, t: f64) -> Result<TransitionMatrix> {
    if !gen.valid {
        return Err(Error::InvalidInput(
            "matrix exponential requires a valid generator".into(),
        ));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "horizon {t} must be finite and >= 0"
        )));
    }
    if t == 0.0 {
        return Ok(TransitionMatrix::identity(gen.scale.clone()));
    }
    let mut p = linalg::expm(&(&gen.entries * t))?;
    // pin the absorbing row; floating noise there is meaningless
    let d = gen.scale.default_index();
    p.row_mut(d).fill(0.0);
    p[(d, d)] = 1.0;
    validate_transition(gen.scale.clone(), t, p)
}

/// Generator `(1/h)·log(T)` of a transition matrix observed over horizon `h`.
/// The result is flagged invalid when the logarithm breaks the generator constraints.
pub fn mlog(tm: &TransitionMatrix) -> Result<GeneratorMatrix> {
    if tm.horizon <= 0.0 {
        let k = tm.scale.len();
        if linalg::max_abs_diff(&tm.entries, &DMatrix::identity(k, k)) == 0.0 {
            return Ok(GeneratorMatrix::zero(tm.scale.clone()));
        }
        return Err(Error::InvalidInput(
            "a matrix logarithm needs a positive horizon".into(),
        ));
    }
    let log = linalg::logm(&tm.entries)? / tm.horizon;
    GeneratorMatrix::classify(tm.scale.clone(), log)
}

/// Clamps negative off-diagonal intensities to zero and rebuilds the diagonal.
pub fn regularize(raw: &GeneratorMatrix) -> GeneratorMatrix {
    let mut entries = raw.entries.clone();
    let n = entries.nrows();
    for r in 0..n {
        for c in 0..n {
            if r != c && entries[(r, c)] < 0.0 {
                entries[(r, c)] = 0.0;
            }
        }
    }
    entries.row_mut(raw.scale.default_index()).fill(0.0);
    rebalance_diagonal(&mut entries);
    GeneratorMatrix {
        scale: raw.scale.clone(),
        entries,
        valid: true,
    }
}

/// Chains two consecutive-period matrices; the horizon of the result is the sum.
pub fn compose(a: &TransitionMatrix, b: &TransitionMatrix) -> Result<TransitionMatrix> {
    if !a.scale.same_states(&b.scale) {
        return Err(Error::Dimension {
            expected: a.scale.len(),
            found: b.scale.len(),
        });
    }
    let product = &a.entries * &b.entries;
    validate_transition(a.scale.clone(), a.horizon + b.horizon, product)
}
