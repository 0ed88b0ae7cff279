//! Quantities derived from a generator: default and survival curves, WARF,
//! first-passage downgrade probabilities and coarse-graining onto letter grades.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{mexp, GeneratorMatrix};
use crate::scale::RatingScale;

pub const WARF_HORIZON: f64 = 10.0;
pub const DEFAULT_HORIZONS: [f64; 10] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
/// Name of the absorbing state of a downgrade generator.
pub const HY_OR_DEFAULT: &str = "HY/D";

const MONOTONE_SLACK: f64 = 1e-12;

/// Cumulative default probabilities `D_r(0, t)` per state (rows) and horizon (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultCurve {
    scale: Arc<RatingScale>,
    horizons: Vec<f64>,
    default: DMatrix<f64>,
}

impl DefaultCurve {
    pub fn scale(&self) -> &Arc<RatingScale> {
        &self.scale
    }

    pub fn horizons(&self) -> &[f64] {
        &self.horizons
    }

    pub fn default_probabilities(&self) -> &DMatrix<f64> {
        &self.default
    }

    pub fn default(&self, state: usize, horizon: usize) -> f64 {
        self.default[(state, horizon)]
    }

    /// `Q_r(0, t) = 1 − D_r(0, t)`.
    pub fn survival(&self, state: usize, horizon: usize) -> f64 {
        1.0 - self.default[(state, horizon)]
    }

    /// Errors when some state's default probability decreases with horizon.
    pub fn check_monotone(&self) -> Result<()> {
        for (r, row) in self.default.row_iter().enumerate() {
            for h in 1..row.len() {
                if row[h] < row[h - 1] - MONOTONE_SLACK {
                    return Err(Error::InvalidInput(format!(
                        "default probability of {} falls from {} to {} between horizons {} and {}",
                        self.scale.name(r),
                        row[h - 1],
                        row[h],
                        self.horizons[h - 1],
                        self.horizons[h]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_horizons(horizons: &[f64]) -> Result<()> {
    if horizons.is_empty() {
        return Err(Error::InvalidInput("no horizons given".into()));
    }
    if horizons.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::InvalidInput("horizons must be positive".into()));
    }
    if horizons.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("horizons must be ascending".into()));
    }
    Ok(())
}

/// Last column of `mexp(gen, t)` for every horizon `t`.
pub fn default_curve(gen: &GeneratorMatrix, horizons: &[f64]) -> Result<DefaultCurve> {
    check_horizons(horizons)?;
    let k = gen.len();
    let d = gen.scale().default_index();
    let mut default = DMatrix::zeros(k, horizons.len());
    for (h, &t) in horizons.iter().enumerate() {
        let tm = mexp(gen, t)?;
        for r in 0..k {
            default[(r, h)] = tm.get(r, d);
        }
    }
    Ok(DefaultCurve {
        scale: gen.scale().clone(),
        horizons: horizons.to_vec(),
        default,
    })
}

/// Ten-year cumulative default probability in basis points.
pub fn warf_from_probability(p: f64) -> u32 {
    (10_000.0 * p).round() as u32
}

pub fn warf(gen: &GeneratorMatrix) -> Result<Vec<u32>> {
    let curve = default_curve(gen, &[WARF_HORIZON])?;
    Ok((0..gen.len())
        .map(|r| warf_from_probability(curve.default(r, 0)))
        .collect())
}

fn boundary_of(gen: &GeneratorMatrix, boundary: Option<usize>) -> Result<usize> {
    let b = boundary
        .or(gen.scale().ig_boundary())
        .ok_or_else(|| Error::Scale("no investment-grade boundary configured".into()))?;
    if b + 1 >= gen.len() {
        return Err(Error::Scale(format!(
            "boundary {b} leaves no high-yield or default states"
        )));
    }
    Ok(b)
}

/// Generator on the investment-grade states plus one absorbing state that
/// collects every high-yield and default destination. `boundary` is the index
/// of the worst investment-grade state; `None` uses the scale's own boundary.
pub fn downgrade_generator(
    gen: &GeneratorMatrix,
    boundary: Option<usize>,
) -> Result<GeneratorMatrix> {
    let b = boundary_of(gen, boundary)?;
    let scale = gen.scale();
    let mut names: Vec<&str> = (0..=b).map(|i| scale.name(i)).collect();
    names.push(HY_OR_DEFAULT);
    let target = Arc::new(RatingScale::new(&names)?);
    let n = b + 2;
    let mut off = DMatrix::zeros(n, n);
    for r in 0..=b {
        for q in 0..gen.len() {
            if q == r {
                continue;
            }
            let col = q.min(b + 1);
            off[(r, col)] += gen.get(r, q);
        }
    }
    GeneratorMatrix::from_intensities(target, off)
}

/// Probability of having touched high yield or default by each horizon,
/// per investment-grade starting state.
pub fn first_passage(
    gen: &GeneratorMatrix,
    boundary: Option<usize>,
    horizons: &[f64],
) -> Result<DefaultCurve> {
    default_curve(&downgrade_generator(gen, boundary)?, horizons)
}

/// Probability of being in high yield or default at each horizon, per
/// investment-grade starting state.
pub fn hy_occupancy(
    gen: &GeneratorMatrix,
    boundary: Option<usize>,
    horizons: &[f64],
) -> Result<DMatrix<f64>> {
    let b = boundary_of(gen, boundary)?;
    check_horizons(horizons)?;
    let mut out = DMatrix::zeros(b + 1, horizons.len());
    for (h, &t) in horizons.iter().enumerate() {
        let tm = mexp(gen, t)?;
        for r in 0..=b {
            out[(r, h)] = (b + 1..gen.len()).map(|q| tm.get(r, q)).sum();
        }
    }
    Ok(out)
}

/// Assignment of fine states to coarse states.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseMap {
    source: Arc<RatingScale>,
    target: Arc<RatingScale>,
    assignment: Vec<usize>,
}

impl CoarseMap {
    /// `assignment[i]` is the target state of source state `i`. Every target
    /// state needs at least one member, and default must map alone onto default.
    pub fn new(
        source: Arc<RatingScale>,
        target: Arc<RatingScale>,
        assignment: Vec<usize>,
    ) -> Result<Self> {
        if assignment.len() != source.len() {
            return Err(Error::Dimension {
                expected: source.len(),
                found: assignment.len(),
            });
        }
        let mut sizes = vec![0usize; target.len()];
        for &t in &assignment {
            if t >= target.len() {
                return Err(Error::Scale(format!("target state {t} does not exist")));
            }
            sizes[t] += 1;
        }
        if let Some(t) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::Scale(format!(
                "target state {} receives no source states",
                target.name(t)
            )));
        }
        let td = target.default_index();
        if assignment[source.default_index()] != td || sizes[td] != 1 {
            return Err(Error::Scale("default must map alone onto default".into()));
        }
        Ok(Self {
            source,
            target,
            assignment,
        })
    }

    /// Maps each state onto its letter grade.
    pub fn from_letter_groups(source: Arc<RatingScale>) -> Result<Self> {
        let names: Vec<&str> = source.groups().iter().map(|g| g.name.as_str()).collect();
        let mut target = RatingScale::new(&names)?.with_withdrawal(source.withdrawal())?;
        if let Some(b) = source.ig_boundary() {
            if source.group_of(b) < target.default_index() {
                target = target.with_ig_boundary(source.group_of(b))?;
            }
        }
        let assignment = (0..source.len()).map(|i| source.group_of(i)).collect();
        Self::new(source, Arc::new(target), assignment)
    }

    pub fn identity(scale: Arc<RatingScale>) -> Self {
        let assignment = (0..scale.len()).collect();
        Self {
            source: scale.clone(),
            target: scale,
            assignment,
        }
    }

    pub fn source(&self) -> &Arc<RatingScale> {
        &self.source
    }

    pub fn target(&self) -> &Arc<RatingScale> {
        &self.target
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
}

/// Coarse intensity from group R to group S: the mean over members of R of the
/// summed intensity into members of S. The diagonal is rebuilt afterwards.
pub fn coarse_grain(gen: &GeneratorMatrix, map: &CoarseMap) -> Result<GeneratorMatrix> {
    if !gen.scale().same_states(&map.source) {
        return Err(Error::Dimension {
            expected: map.source.len(),
            found: gen.len(),
        });
    }
    let m = map.target.len();
    let mut sizes = vec![0.0; m];
    for &t in &map.assignment {
        sizes[t] += 1.0;
    }
    let mut off = DMatrix::zeros(m, m);
    for (r, &big_r) in map.assignment.iter().enumerate() {
        for (s, &big_s) in map.assignment.iter().enumerate() {
            if big_r != big_s {
                off[(big_r, big_s)] += gen.get(r, s) / sizes[big_r];
            }
        }
    }
    GeneratorMatrix::from_intensities(map.target.clone(), off)
}
