mod common;

use common::{abd_generator, events, max_abs_diff, worked_scale};
use nalgebra::DMatrix;
use ratemig::estimation::estimate;
use ratemig::events::ObservationWindow;
use ratemig::{
    cohort_estimate, log_likelihood, mexp, mle_stationary, mle_weighted, mlog, regularize,
    roll_estimates, EventTable, FitOptions, HalfLife, Method, Weighting,
};

const PRINTED: f64 = 5e-5;

fn literal() -> EventTable {
    events("worked_example_events.csv", worked_scale())
}

fn narrative() -> EventTable {
    events("worked_example_narrative_events.csv", worked_scale())
}

fn year() -> ObservationWindow {
    ObservationWindow::new(0.0, 1.0).unwrap()
}

fn six_months() -> HalfLife {
    HalfLife::new(0.5).unwrap()
}

fn rows(r: &[[f64; 3]]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), 3, |i, j| r[i][j])
}

#[test]
fn table_has_twenty_two_events_over_twenty_issuers() {
    let t = literal();
    assert_eq!(t.len(), 22);
    assert_eq!(t.by_issuer().count(), 20);
}

#[test]
fn cohort_on_narrative_table_matches_printed_panel() {
    let r = cohort_estimate(&narrative(), &year()).unwrap();
    let want = rows(&[[0.9, 0.1, 0.0], [0.1, 0.8, 0.1], [0.0, 0.0, 1.0]]);
    assert!(max_abs_diff(r.transition.entries(), &want) < 1e-12);
    assert!(r.generator.is_none());
}

#[test]
fn cohort_on_literal_table_counts_issuers_nine_and_ten() {
    let r = cohort_estimate(&literal(), &year()).unwrap();
    assert!((r.transition.get(0, 0) - 0.7).abs() < 1e-12);
    assert!((r.transition.get(0, 1) - 0.3).abs() < 1e-12);
    assert_eq!(r.transition.get(0, 2), 0.0);
}

#[test]
fn stationary_mle_matches_printed_generator_and_transition() {
    let r = mle_stationary(&literal(), &year()).unwrap();
    let g = r.generator.unwrap();
    assert!((g.get(0, 1) - 3.0 / 9.5).abs() < 1e-12);
    assert!((g.get(1, 0) - 0.1).abs() < 1e-12);
    assert!((g.get(1, 2) - 0.1).abs() < 1e-12);
    assert_eq!(g.get(0, 2), 0.0);
    let want = rows(&[
        [0.7412, 0.2454, 0.0134],
        [0.0777, 0.8312, 0.0911],
        [0.0, 0.0, 1.0],
    ]);
    assert!(max_abs_diff(r.transition.entries(), &want) < PRINTED);
}

#[test]
fn weighted_mle_matches_printed_generator_and_transition() {
    let r = mle_weighted(&literal(), six_months(), &year()).unwrap();
    let g = r.generator.unwrap();
    let want_gen = rows(&[
        [-0.4566, 0.4566, 0.0],
        [0.1333, -0.2276, 0.0943],
        [0.0, 0.0, 0.0],
    ]);
    assert!(max_abs_diff(g.entries(), &want_gen) < PRINTED);
    let want = rows(&[
        [0.6544, 0.3283, 0.0173],
        [0.0959, 0.8190, 0.0851],
        [0.0, 0.0, 1.0],
    ]);
    let mut diff = r.transition.entries() - &want;
    // The printed B→B entry is the exponential of the rounded generator
    // (0.81904); the unrounded estimate gives 0.81907.
    assert!((diff[(1, 1)] - 7.17e-5).abs() < 1e-6);
    diff[(1, 1)] = 0.0;
    assert!(diff.amax() < PRINTED);
}

#[test]
fn mexp_of_rounded_weighted_generator_reproduces_printed_rows() {
    let g = abd_generator([-0.4566, 0.4566, 0.0], [0.1333, -0.2276, 0.0943]);
    let t = mexp(&g, 1.0).unwrap();
    let want = rows(&[
        [0.6544, 0.3283, 0.0173],
        [0.0959, 0.8190, 0.0851],
        [0.0, 0.0, 1.0],
    ]);
    assert!(max_abs_diff(t.entries(), &want) < PRINTED);
}

#[test]
fn mexp_of_rounded_generator_reproduces_printed_rows() {
    let g = abd_generator([-0.3158, 0.3158, 0.0], [0.1, -0.2, 0.1]);
    let t = mexp(&g, 1.0).unwrap();
    let want = rows(&[
        [0.7412, 0.2454, 0.0134],
        [0.0777, 0.8312, 0.0911],
        [0.0, 0.0, 1.0],
    ]);
    assert!(max_abs_diff(t.entries(), &want) < PRINTED);
}

#[test]
fn log_of_cohort_matrix_is_flagged_and_regularizes() {
    let r = cohort_estimate(&narrative(), &year()).unwrap();
    let raw = mlog(&r.transition).unwrap();
    assert!(!raw.is_valid());
    let want = rows(&[
        [-0.1121, 0.1183, -0.0063],
        [0.1183, -0.2304, 0.1121],
        [0.0, 0.0, 0.0],
    ]);
    assert!(max_abs_diff(raw.entries(), &want) < PRINTED);

    let fixed = regularize(&raw);
    assert!(fixed.is_valid());
    assert_eq!(fixed.get(0, 2), 0.0);
    assert!((fixed.get(0, 0) + fixed.get(0, 1)).abs() < 1e-15);
    assert!((fixed.get(0, 1) - 0.1183).abs() < PRINTED);
    for j in 0..3 {
        assert!((fixed.get(1, j) - raw.get(1, j)).abs() < 1e-15);
    }
}

#[test]
fn weighted_mle_scores_at_least_stationary_under_its_own_weighting() {
    let t = literal();
    let w = Weighting::new(six_months(), 1.0);
    let weighted = mle_weighted(&t, six_months(), &year())
        .unwrap()
        .generator
        .unwrap();
    let stationary = mle_stationary(&t, &year()).unwrap().generator.unwrap();
    let lw = log_likelihood(&weighted, &t, &w, &year()).unwrap();
    let ls = log_likelihood(&stationary, &t, &w, &year()).unwrap();
    assert!(lw >= ls);
}

#[test]
fn stationary_mle_scores_at_least_weighted_without_weighting() {
    let t = literal();
    let w = Weighting::unweighted(1.0);
    let weighted = mle_weighted(&t, six_months(), &year())
        .unwrap()
        .generator
        .unwrap();
    let stationary = mle_stationary(&t, &year()).unwrap().generator.unwrap();
    let lw = log_likelihood(&weighted, &t, &w, &year()).unwrap();
    let ls = log_likelihood(&stationary, &t, &w, &year()).unwrap();
    assert!(ls >= lw);
}

#[test]
fn rolling_a_year_past_the_last_event_changes_nothing() {
    let reports = roll_estimates(
        &literal(),
        &[1.0, 2.0],
        0.0,
        six_months(),
        Method::Weighted,
        &FitOptions::default(),
    )
    .unwrap();
    let a = reports[0].generator.as_ref().unwrap().entries();
    let b = reports[1].generator.as_ref().unwrap().entries();
    assert!(max_abs_diff(a, b) < 1e-12);
}

#[test]
fn single_date_roll_equals_weighted_estimate() {
    let t = literal();
    let rolled = roll_estimates(
        &t,
        &[1.0],
        0.0,
        six_months(),
        Method::Weighted,
        &FitOptions::default(),
    )
    .unwrap();
    let direct = mle_weighted(&t, six_months(), &year()).unwrap();
    assert_eq!(rolled.len(), 1);
    assert_eq!(rolled[0].generator, direct.generator);
}

#[test]
fn very_long_half_life_approaches_stationary_mle() {
    let t = literal();
    let long = mle_weighted(&t, HalfLife::new(1e6).unwrap(), &year()).unwrap();
    let flat = mle_stationary(&t, &year()).unwrap();
    let d = max_abs_diff(
        long.generator.unwrap().entries(),
        flat.generator.unwrap().entries(),
    );
    assert!(d < 1e-6, "difference {d}");
}

#[test]
fn infinite_half_life_is_the_stationary_estimator() {
    let t = literal();
    let a = estimate(
        Method::Weighted,
        &t,
        &year(),
        HalfLife::Infinite,
        &FitOptions::default(),
    )
    .unwrap();
    let b = mle_stationary(&t, &year()).unwrap();
    assert!(
        max_abs_diff(
            a.generator.unwrap().entries(),
            b.generator.unwrap().entries()
        ) < 1e-15
    );
}

#[test]
fn shifting_every_date_leaves_estimates_unchanged() {
    let t = literal();
    let shifted = t.shifted(37.0);
    let w2 = ObservationWindow::new(37.0, 38.0).unwrap();
    for method in [Method::Mle, Method::Weighted] {
        let a = estimate(method, &t, &year(), six_months(), &FitOptions::default()).unwrap();
        let b = estimate(method, &shifted, &w2, six_months(), &FitOptions::default()).unwrap();
        let d = max_abs_diff(
            a.generator.unwrap().entries(),
            b.generator.unwrap().entries(),
        );
        assert!(d < 1e-9, "{method}: {d}");
    }
    let a = cohort_estimate(&t, &year()).unwrap();
    let b = cohort_estimate(&shifted, &w2).unwrap();
    assert_eq!(a.transition.entries(), b.transition.entries());
}

#[test]
fn row_order_does_not_matter() {
    let t = literal();
    let mut reversed = t.events().to_vec();
    reversed.reverse();
    let r = EventTable::new(t.scale().clone(), reversed).unwrap();
    assert_eq!(
        mle_weighted(&t, six_months(), &year()).unwrap().generator,
        mle_weighted(&r, six_months(), &year()).unwrap().generator
    );
}

#[test]
fn withdrawal_adds_exposure_but_no_transition() {
    let base = literal();
    let csv = std::fs::read_to_string(common::fixture("worked_example_events.csv")).unwrap();
    let extra = format!("{csv}23,21,0,A,0.5,RW\n");
    let t = ratemig::parse_events(extra.as_bytes(), worked_scale()).unwrap();
    let a = mle_stationary(&base, &year()).unwrap();
    let b = mle_stationary(&t, &year()).unwrap();
    assert_eq!(a.counts, b.counts);
    assert!((b.exposure[0] - a.exposure[0] - 0.5).abs() < 1e-12);
    assert!((b.generator.unwrap().get(0, 1) - 3.0 / 10.0).abs() < 1e-12);
}

#[test]
fn withdrawn_issuer_is_dropped_from_the_cohort() {
    let csv =
        std::fs::read_to_string(common::fixture("worked_example_narrative_events.csv")).unwrap();
    let extra = format!("{csv}23,21,0,A,0.5,RW\n");
    let t = ratemig::parse_events(extra.as_bytes(), worked_scale()).unwrap();
    let r = cohort_estimate(&t, &year()).unwrap();
    assert!((r.transition.get(0, 1) - 0.1).abs() < 1e-12);
    assert_eq!(r.exposure[0], 10.0);
}
