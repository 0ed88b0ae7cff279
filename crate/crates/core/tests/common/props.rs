//! Strategies and checks shared by the property tests and the acceptance run.
//! Each check returns the worst error it saw, or a message on a hard failure.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use ratemig::estimation::TransitionStats;
use ratemig::linalg::{expm, gauss_legendre};
use ratemig::smoothing::SmoothedObjective;
use ratemig::{
    build_gengen, gengen_to_generator, mexp, mlog, GeneratorMatrix, GengenParams, RatingScale,
};

pub type Check = std::result::Result<f64, TestCaseError>;

fn fail(e: impl ToString) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

/// Scale `R1..R{k-1}, D` with the investment-grade boundary near the middle.
pub fn abstract_scale(k: usize) -> Arc<RatingScale> {
    let mut names: Vec<String> = (1..k).map(|i| format!("R{i}")).collect();
    names.push("D".into());
    let s = RatingScale::new(&names).unwrap();
    Arc::new(s.with_ig_boundary((k - 2) / 2).unwrap())
}

fn intensity(max_rate: f64) -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 4 => 0.0..max_rate]
}

pub fn generator_on(
    scale: Arc<RatingScale>,
    max_rate: f64,
) -> impl Strategy<Value = GeneratorMatrix> {
    let k = scale.len();
    proptest::collection::vec(intensity(max_rate), k * k).prop_map(move |v| {
        let m = DMatrix::from_row_slice(k, k, &v);
        GeneratorMatrix::from_intensities(scale.clone(), m).unwrap()
    })
}

pub fn any_generator(
    k: std::ops::RangeInclusive<usize>,
    max_rate: f64,
) -> impl Strategy<Value = GeneratorMatrix> {
    k.prop_flat_map(move |k| generator_on(abstract_scale(k), max_rate))
}

pub fn any_gengen(
    k: std::ops::RangeInclusive<usize>,
    lo: f64,
    hi: f64,
    theta: std::ops::Range<f64>,
) -> impl Strategy<Value = GengenParams> {
    (k, theta).prop_flat_map(move |(k, theta)| {
        proptest::collection::vec(lo..=hi, 2 * k - 3).prop_map(move |v| {
            GengenParams::from_vector(abstract_scale(k), &DVector::from_vec(v), theta).unwrap()
        })
    })
}

/// Random sufficient statistics on a `k`-state scale: positive exposure and
/// counts on every non-default row, nothing out of default.
pub fn any_stats(k: usize) -> impl Strategy<Value = TransitionStats> {
    (
        proptest::collection::vec(0.5..100.0f64, k - 1),
        proptest::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.0..20.0f64], (k - 1) * k),
    )
        .prop_map(move |(s, n)| {
            let mut exposure = DVector::zeros(k);
            let mut counts = DMatrix::zeros(k, k);
            for i in 0..k - 1 {
                exposure[i] = s[i];
                for j in 0..k {
                    if i != j {
                        counts[(i, j)] = n[i * k + j];
                    }
                }
            }
            TransitionStats {
                durations: exposure.clone(),
                raw_counts: counts.clone(),
                exposure,
                counts,
                events_used: 1,
            }
        })
}

pub fn transition_violation(m: &DMatrix<f64>) -> Check {
    let mut worst: f64 = 0.0;
    for row in m.row_iter() {
        for &v in row.iter() {
            if !(v >= -1e-12 && v <= 1.0 + 1e-12) {
                return Err(fail(format!("entry {v} outside [0, 1]")));
            }
        }
        worst = worst.max((row.sum() - 1.0).abs());
    }
    if worst > 1e-9 {
        return Err(fail(format!("row sum off by {worst}")));
    }
    Ok(worst)
}

pub fn generator_violation(g: &GeneratorMatrix) -> Check {
    let m = g.entries();
    let d = g.scale().default_index();
    let mut worst: f64 = 0.0;
    for (i, row) in m.row_iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || (i != j && v < -1e-12) {
                return Err(fail(format!("entry ({i}, {j}) = {v}")));
            }
            if i == d && v != 0.0 {
                return Err(fail(format!("default row entry ({i}, {j}) = {v}")));
            }
        }
        worst = worst.max(row.sum().abs());
    }
    if worst > 1e-9 {
        return Err(fail(format!("row sum off by {worst}")));
    }
    Ok(worst)
}

pub fn mexp_validity(g: &GeneratorMatrix, t: f64) -> Check {
    let m = mexp(g, t).map_err(fail)?;
    transition_violation(m.entries())
}

pub fn semigroup_error(g: &GeneratorMatrix, s: f64, t: f64) -> Check {
    let whole = mexp(g, s + t).map_err(fail)?;
    let parts = mexp(g, s).unwrap().entries() * mexp(g, t).unwrap().entries();
    Ok((whole.entries() - parts).amax())
}

pub fn log_round_trip_error(g: &GeneratorMatrix) -> Check {
    let t = mexp(g, 1.0).map_err(fail)?;
    let back = mlog(&t).map_err(fail)?;
    Ok((back.entries() - g.entries()).amax())
}

/// `(I − θG)⁻¹ − I` against `∫₀^∞ e^{−u} e^{θGu} du − I` by composite
/// Gauss–Legendre quadrature; the tail past `u = 40` is below 1e-17.
pub fn integral_form_error(p: &GengenParams) -> Check {
    let closed = gengen_to_generator(p).map_err(fail)?;
    let g = build_gengen(p) * p.theta();
    let k = g.nrows();
    let rule = gauss_legendre(10);
    let (panels, end) = (160, 40.0);
    let width = end / panels as f64;
    let mut sum = DMatrix::<f64>::zeros(k, k);
    for panel in 0..panels {
        let a = panel as f64 * width;
        for &(x, w) in &rule {
            let u = a + x * width;
            sum += expm(&(&g * u)).unwrap() * (w * width * (-u).exp());
        }
    }
    sum -= DMatrix::<f64>::identity(k, k);
    Ok((closed.entries() - sum).amax())
}

pub fn gauge_error(p: &GengenParams, alpha: f64) -> Check {
    let scaled: Vec<f64> = p.to_vector().iter().map(|v| v / alpha).collect();
    let q = GengenParams::from_vector(
        p.scale().clone(),
        &DVector::from_vec(scaled),
        p.theta() * alpha,
    )
    .map_err(fail)?;
    let a = gengen_to_generator(p).map_err(fail)?;
    let b = gengen_to_generator(&q).map_err(fail)?;
    Ok((a.entries() - b.entries()).amax())
}

/// Largest component of `|analytic − central difference|`, relative to the
/// largest central-difference component.
pub fn gradient_error(stats: TransitionStats, p: &GengenParams) -> Check {
    let obj = SmoothedObjective::new(stats, p.scale().clone(), p.theta());
    let x = p.to_vector();
    let analytic = obj.gradient(&x);
    let mut numeric = DVector::zeros(x.len());
    for i in 0..x.len() {
        let h = 1e-6 * x[i].max(1e-3);
        let (mut up, mut down) = (x.clone(), x.clone());
        up[i] += h;
        down[i] -= h;
        numeric[i] = (obj.value(&up) - obj.value(&down)) / (2.0 * h);
    }
    if !analytic.iter().chain(numeric.iter()).all(|v| v.is_finite()) {
        return Err(fail("non-finite gradient"));
    }
    let scale = numeric.amax().max(1e-12);
    Ok((analytic - numeric).amax() / scale)
}
