#![allow(dead_code)]

pub mod props;

use std::fs::File;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DMatrix;
use ratemig::io::{read_gengen_json, read_matrix_json, read_scale_json};
use ratemig::{
    parse_events, EventTable, GeneratorMatrix, GengenParams, RatingScale, TransitionMatrix,
};
use serde::Deserialize;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn open(name: &str) -> File {
    File::open(fixture(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn scale(name: &str) -> Arc<RatingScale> {
    Arc::new(read_scale_json(open(name)).unwrap())
}

pub fn notched() -> Arc<RatingScale> {
    scale("notched_scale.json")
}

pub fn letter() -> Arc<RatingScale> {
    Arc::new(RatingScale::letter())
}

pub fn worked_scale() -> Arc<RatingScale> {
    scale("worked_example_scale.json")
}

pub fn events(name: &str, scale: Arc<RatingScale>) -> EventTable {
    parse_events(open(name), scale).unwrap()
}

pub fn generator(name: &str, scale: Arc<RatingScale>) -> GeneratorMatrix {
    read_matrix_json(open(name))
        .unwrap()
        .to_generator(Some(scale))
        .unwrap()
}

pub fn transition(name: &str, scale: Arc<RatingScale>) -> TransitionMatrix {
    read_matrix_json(open(name))
        .unwrap()
        .to_transition(Some(scale))
        .unwrap()
}

/// Printed entries exactly as they appear, without any diagonal repair.
pub fn printed(name: &str) -> DMatrix<f64> {
    let m = read_matrix_json(open(name)).unwrap();
    let k = m.rows.len();
    DMatrix::from_fn(k, k, |i, j| m.rows[i][j])
}

pub fn gengen(name: &str, scale: Arc<RatingScale>) -> GengenParams {
    read_gengen_json(open(name))
        .unwrap()
        .to_params(Some(scale))
        .unwrap()
}

#[derive(Debug, Deserialize)]
pub struct PrintedCurve {
    pub states: Vec<String>,
    pub horizons: Vec<f64>,
    pub default_percent: Vec<Vec<f64>>,
    pub warf: Option<Vec<u32>>,
}

pub fn curve(name: &str) -> PrintedCurve {
    serde_json::from_reader(open(name)).unwrap()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// 3×3 generator over A, B, D from its two non-default rows.
pub fn abd_generator(a: [f64; 3], b: [f64; 3]) -> GeneratorMatrix {
    let e = DMatrix::from_row_slice(3, 3, &[a[0], a[1], a[2], b[0], b[1], b[2], 0.0, 0.0, 0.0]);
    ratemig::validate_generator(worked_scale(), e).unwrap()
}

/// The five-state smoothed model used for recovery experiments.
pub fn recovery_model() -> GengenParams {
    let s = Arc::new(RatingScale::new(&["R1", "R2", "R3", "R4", "D"]).unwrap());
    GengenParams::new(s, vec![0.3, 0.4, 0.5, 0.6], vec![0.2, 0.3, 0.4], 1.0).unwrap()
}

/// Issuers needed, starting round-robin over the non-default states, for
/// the expected time rated before default over `[0, horizon]` to reach
/// `issuer_years`.
pub fn issuers_for_exposure(gen: &GeneratorMatrix, horizon: f64, issuer_years: f64) -> usize {
    let k = gen.len();
    let d = gen.scale().default_index();
    let panels = 20;
    let width = horizon / panels as f64;
    let mut alive = 0.0;
    for p in 0..panels {
        for (x, w) in ratemig::linalg::gauss_legendre(10) {
            let t = (p as f64 + x) * width;
            let m = ratemig::mexp(gen, t).unwrap();
            let survive: f64 = (0..k).filter(|&r| r != d).map(|r| 1.0 - m.get(r, d)).sum();
            alive += w * width * survive / (k - 1) as f64;
        }
    }
    (issuer_years / alive).ceil() as usize
}
