//! File formats: matrices, estimate and fit reports, gengen parameters and
//! curve tables. Machine-readable numbers carry 12 significant digits.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytics::DefaultCurve;
use crate::error::{Error, Result};
use crate::estimation::{EstimateReport, HalfLife};
use crate::matrix::{validate_generator, validate_transition, GeneratorMatrix, TransitionMatrix};
use crate::scale::{RatingScale, ScaleConfig};
use crate::smoothing::{FitReport, GengenParams};

/// Rounds to 12 significant digits; negative zero becomes zero.
pub fn sig12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|r| r.iter().map(|&v| sig12(v)).collect())
        .collect()
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().map(|&x| sig12(x)).collect()
}

fn matrix_of(rows: &[Vec<f64>], k: usize) -> Result<DMatrix<f64>> {
    if rows.len() != k {
        return Err(Error::Dimension {
            expected: k,
            found: rows.len(),
        });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != k) {
        return Err(Error::Dimension {
            expected: k,
            found: r.len(),
        });
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

/// `{scale, horizon, rows}`; `decimals`, when present on input, marks a table
/// printed at that precision whose row sums carry rounding error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub scale: Vec<String>,
    pub horizon: Option<f64>,
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimals: Option<i32>,
}

impl MatrixJson {
    pub fn from_generator(g: &GeneratorMatrix) -> Self {
        Self {
            scale: g.scale().states().to_vec(),
            horizon: None,
            rows: rows_of(g.entries()),
            decimals: None,
        }
    }

    pub fn from_transition(t: &TransitionMatrix) -> Self {
        Self {
            scale: t.scale().states().to_vec(),
            horizon: Some(t.horizon()),
            rows: rows_of(t.entries()),
            decimals: None,
        }
    }

    fn resolve_scale(&self, scale: Option<Arc<RatingScale>>) -> Result<Arc<RatingScale>> {
        match scale {
            Some(s) if s.states() == self.scale.as_slice() => Ok(s),
            Some(s) => Err(Error::Scale(format!(
                "matrix states [{}] do not match the scale [{}]",
                self.scale.join(", "),
                s.states().join(", ")
            ))),
            None => Ok(Arc::new(RatingScale::new(&self.scale)?)),
        }
    }

    /// A valid generator; raw matrix logarithms that break the constraints are rejected.
    pub fn to_generator(&self, scale: Option<Arc<RatingScale>>) -> Result<GeneratorMatrix> {
        let scale = self.resolve_scale(scale)?;
        let entries = matrix_of(&self.rows, scale.len())?;
        match self.decimals {
            Some(dp) => GeneratorMatrix::from_rounded(scale, entries, dp),
            None => validate_generator(scale, entries),
        }
    }

    pub fn to_transition(&self, scale: Option<Arc<RatingScale>>) -> Result<TransitionMatrix> {
        let scale = self.resolve_scale(scale)?;
        let entries = matrix_of(&self.rows, scale.len())?;
        let horizon = self
            .horizon
            .ok_or_else(|| Error::InvalidInput("transition matrix needs a horizon".into()))?;
        match self.decimals {
            Some(dp) => TransitionMatrix::from_rounded(scale, horizon, entries, dp),
            None => validate_transition(scale, horizon, entries),
        }
    }
}

/// Reads a rating-scale configuration.
pub fn read_scale_json<R: Read>(source: R) -> Result<RatingScale> {
    let config: ScaleConfig = serde_json::from_reader(source)?;
    RatingScale::from_config(&config)
}

pub fn read_matrix_json<R: Read>(source: R) -> Result<MatrixJson> {
    Ok(serde_json::from_reader(source)?)
}

pub fn write_json<W: Write, T: Serialize>(mut sink: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, value)?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// Square matrix as CSV with state names along the top and down the side.
pub fn write_matrix_csv<W: Write>(sink: W, scale: &RatingScale, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec![String::new()];
    header.extend(scale.states().iter().cloned());
    w.write_record(&header)?;
    for (i, row) in m.row_iter().enumerate() {
        let mut rec = vec![scale.name(i).to_string()];
        rec.extend(row.iter().map(|&v| sig12(v).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn half_life_value(h: HalfLife) -> Value {
    match h {
        HalfLife::Finite(v) => Value::from(v),
        HalfLife::Infinite => Value::from("inf"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowJson {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitJson {
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub method: String,
    pub window: WindowJson,
    pub half_life: Value,
    pub as_of: f64,
    pub generator: Option<MatrixJson>,
    pub transition: MatrixJson,
    pub counts: Vec<Vec<f64>>,
    pub exposure: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitJson>,
    pub warnings: Vec<String>,
}

impl ReportJson {
    pub fn new(r: &EstimateReport) -> Self {
        Self {
            method: r.method.to_string(),
            window: WindowJson {
                start: r.window.start(),
                end: r.window.end(),
            },
            half_life: half_life_value(r.weighting.half_life),
            as_of: r.weighting.as_of,
            generator: r.generator.as_ref().map(MatrixJson::from_generator),
            transition: MatrixJson::from_transition(&r.transition),
            counts: rows_of(&r.counts),
            exposure: vec_of(&r.exposure),
            fit: r.fit.map(|f| FitJson {
                objective: sig12(f.objective),
                initial_objective: sig12(f.initial_objective),
                iterations: f.iterations,
                converged: f.converged,
            }),
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GengenJson {
    pub states: Vec<String>,
    pub theta: f64,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
}

impl GengenJson {
    pub fn new(p: &GengenParams) -> Self {
        Self {
            states: p.scale().states().to_vec(),
            theta: p.theta(),
            up: p.up().iter().map(|&v| sig12(v)).collect(),
            down: p.down().iter().map(|&v| sig12(v)).collect(),
        }
    }

    pub fn to_params(&self, scale: Option<Arc<RatingScale>>) -> Result<GengenParams> {
        let scale = match scale {
            Some(s) if s.states() == self.states.as_slice() => s,
            Some(_) => return Err(Error::Scale("gengen states do not match the scale".into())),
            None => Arc::new(RatingScale::new(&self.states)?),
        };
        GengenParams::new(scale, self.up.clone(), self.down.clone(), self.theta)
    }
}

pub fn read_gengen_json<R: Read>(source: R) -> Result<GengenJson> {
    Ok(serde_json::from_reader(source)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReportJson {
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub params: GengenJson,
    pub generator: Option<MatrixJson>,
}

impl FitReportJson {
    pub fn new(fit: &FitReport) -> Self {
        let s = fit.summary();
        Self {
            objective: sig12(s.objective),
            initial_objective: sig12(s.initial_objective),
            iterations: s.iterations,
            converged: s.converged,
            params: GengenJson::new(&fit.params),
            generator: fit
                .report
                .generator
                .as_ref()
                .map(MatrixJson::from_generator),
        }
    }
}

fn horizon_label(t: f64) -> String {
    t.to_string()
}

/// One row per state, one column per horizon, plus an optional WARF column.
pub fn write_curve_csv<W: Write>(
    sink: W,
    curve: &DefaultCurve,
    warf: Option<&[u32]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["state".to_string()];
    header.extend(curve.horizons().iter().map(|&t| horizon_label(t)));
    if warf.is_some() {
        header.push("WARF".into());
    }
    w.write_record(&header)?;
    let scale = curve.scale();
    for r in 0..scale.len() {
        let mut rec = vec![scale.name(r).to_string()];
        rec.extend((0..curve.horizons().len()).map(|h| sig12(curve.default(r, h)).to_string()));
        if let Some(warf) = warf {
            rec.push(warf[r].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveJson {
    pub states: Vec<String>,
    pub horizons: Vec<f64>,
    pub default: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warf: Option<Vec<u32>>,
}

impl CurveJson {
    pub fn new(curve: &DefaultCurve, warf: Option<&[u32]>) -> Self {
        Self {
            states: curve.scale().states().to_vec(),
            horizons: curve.horizons().to_vec(),
            default: rows_of(curve.default_probabilities()),
            warf: warf.map(|w| w.to_vec()),
        }
    }
}

/// Long format `date,from,to,intensity` over the off-diagonal entries of each report.
pub fn write_roll_csv<W: Write>(sink: W, reports: &[EstimateReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["date", "from", "to", "intensity"])?;
    for r in reports {
        let date = r.window.end().to_string();
        let Some(g) = &r.generator else {
            continue;
        };
        let scale = g.scale();
        for i in 0..g.len() {
            for j in 0..g.len() {
                if i != j {
                    w.write_record([
                        date.as_str(),
                        scale.name(i),
                        scale.name(j),
                        &sig12(g.get(i, j)).to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `time,state,hazard` records.
pub fn write_hazard_csv<W: Write>(
    sink: W,
    scale: &RatingScale,
    steps: &[(f64, usize, f64)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["time", "state", "hazard"])?;
    for &(t, r, h) in steps {
        w.write_record([
            sig12(t).to_string(),
            scale.name(r).to_string(),
            sig12(h).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table with `decimals` places, for reading alongside printed tables.
pub fn format_table(
    row_names: &[String],
    col_names: &[String],
    m: &DMatrix<f64>,
    decimals: usize,
) -> String {
    let width = decimals + 4;
    let label = row_names.iter().map(|s| s.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = write!(out, "{:label$}", "");
    for c in col_names {
        let _ = write!(out, " {c:>width$}");
    }
    out.push('\n');
    for (i, name) in row_names.iter().enumerate() {
        let _ = write!(out, "{name:label$}");
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            let v = if v == 0.0 { 0.0 } else { v };
            let _ = write!(out, " {v:>width$.decimals$}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abd() -> Arc<RatingScale> {
        Arc::new(RatingScale::new(&["A", "B", "D"]).unwrap())
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(1.0 / 3.0), 0.333333333333);
        assert_eq!(sig12(-0.0).to_bits(), 0.0f64.to_bits());
        assert_eq!(sig12(123456.7890123456), 123456.789012);
        assert_eq!(sig12(0.1), 0.1);
    }

    #[test]
    fn generator_json_round_trip() {
        let e =
            DMatrix::from_row_slice(3, 3, &[-0.3158, 0.3158, 0.0, 0.1, -0.2, 0.1, 0.0, 0.0, 0.0]);
        let g = validate_generator(abd(), e).unwrap();
        let mut buf = Vec::new();
        write_json(&mut buf, &MatrixJson::from_generator(&g)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"horizon\": null"));
        let back = read_matrix_json(buf.as_slice())
            .unwrap()
            .to_generator(None)
            .unwrap();
        assert_eq!(back.entries(), g.entries());
    }

    #[test]
    fn rounded_tables_need_decimals() {
        let json =
            r#"{"scale":["A","B","D"],"horizon":1,"rows":[[0.9,0.1001,0],[0.1,0.8,0.1],[0,0,1]]}"#;
        let m: MatrixJson = serde_json::from_str(json).unwrap();
        assert!(m.to_transition(None).is_err());
        let m = MatrixJson {
            decimals: Some(4),
            ..m
        };
        let t = m.to_transition(None).unwrap();
        assert!((t.entries().row(0).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scale_mismatch_is_reported() {
        let json = r#"{"scale":["X","Y","D"],"horizon":null,"rows":[[0,0,0],[0,0,0],[0,0,0]]}"#;
        let m: MatrixJson = serde_json::from_str(json).unwrap();
        assert!(matches!(m.to_generator(Some(abd())), Err(Error::Scale(_))));
    }

    #[test]
    fn matrix_csv_layout() {
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &abd(), &DMatrix::identity(3, 3)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, ",A,B,D\nA,1,0,0\nB,0,1,0\nD,0,0,1\n");
    }

    #[test]
    fn gengen_json_round_trip() {
        let p = GengenParams::new(abd(), vec![0.25, 0.5], vec![0.125], 1.0).unwrap();
        let j = serde_json::to_string(&GengenJson::new(&p)).unwrap();
        let back = read_gengen_json(j.as_bytes())
            .unwrap()
            .to_params(None)
            .unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn table_formatting() {
        let names: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let m = DMatrix::from_row_slice(2, 2, &[-0.31579, 0.31579, -0.0, 0.0]);
        let t = format_table(&names, &names, &m, 4);
        assert!(t.contains("-0.3158"));
        assert!(!t.contains("-0.0000"));
    }
}
