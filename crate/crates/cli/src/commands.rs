use std::fmt::Write as _;
use std::sync::Arc;

use ratemig::analytics::{first_passage, DEFAULT_HORIZONS};
use ratemig::estimation::estimate;
use ratemig::events::ObservationWindow;
use ratemig::io::{
    format_table, read_gengen_json, read_matrix_json, read_scale_json, write_curve_csv, write_json,
    write_matrix_csv, write_roll_csv, CurveJson, GengenJson, MatrixJson, ReportJson,
};
use ratemig::nalgebra::DMatrix;
use ratemig::{
    coarse_grain, default_curve, fit_smoothed, gengen_to_generator, mexp, parse_events,
    roll_estimates, simulate_events, warf, write_events, CoarseMap, EstimateReport, EventTable,
    FitOptions, GeneratorMatrix, GeneratorSchedule, Method, RatingScale, Weighting,
};

use crate::config::{Flags, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{Inputs, OutputDir};

const SUMMARY_DECIMALS: usize = 4;

fn builtin_scale(name: &str) -> Option<RatingScale> {
    match name {
        "notched" => Some(RatingScale::notched()),
        "letter" => Some(RatingScale::letter()),
        _ => None,
    }
}

fn load_scale(spec: &str, inputs: &mut Inputs) -> Result<Arc<RatingScale>> {
    if let Some(s) = builtin_scale(spec) {
        return Ok(Arc::new(s));
    }
    let bytes = inputs.read(spec)?;
    read_scale_json(bytes.as_slice())
        .map(Arc::new)
        .map_err(|e| CliError::Config(format!("{spec}: {e}")))
}

/// The configured scale, or a built-in scale whose states match the file's.
fn matrix_scale(
    config: &RunConfig,
    states: &[String],
    inputs: &mut Inputs,
) -> Result<Option<Arc<RatingScale>>> {
    if let Some(spec) = &config.scale {
        return load_scale(spec, inputs).map(Some);
    }
    Ok(["notched", "letter"]
        .into_iter()
        .filter_map(builtin_scale)
        .find(|s| s.states() == states)
        .map(Arc::new))
}

fn load_generator(config: &RunConfig, inputs: &mut Inputs) -> Result<GeneratorMatrix> {
    match (&config.generator, &config.gengen) {
        (Some(path), None) => {
            let bytes = inputs.read(path)?;
            let m = read_matrix_json(bytes.as_slice()).map_err(|e| CliError::reading(path, e))?;
            let scale = matrix_scale(config, &m.scale, inputs)?;
            m.to_generator(scale).map_err(|e| in_file(path, e))
        }
        (None, Some(path)) => {
            let bytes = inputs.read(path)?;
            let g = read_gengen_json(bytes.as_slice()).map_err(|e| CliError::reading(path, e))?;
            let scale = matrix_scale(config, &g.states, inputs)?;
            let params = g.to_params(scale).map_err(|e| in_file(path, e))?;
            gengen_to_generator(&params).map_err(|e| in_file(path, e))
        }
        (Some(_), Some(_)) => Err(CliError::Config(
            "give either `generator` or `gengen`, not both".into(),
        )),
        (None, None) => Err(CliError::Config(
            "missing setting `generator` (or `gengen`)".into(),
        )),
    }
}

fn in_file(path: &str, e: ratemig::Error) -> CliError {
    match CliError::from_lib(e) {
        CliError::Data(m) => CliError::Data(format!("{path}: {m}")),
        CliError::Config(m) => CliError::Config(format!("{path}: {m}")),
        other => other,
    }
}

fn load_events(config: &RunConfig, inputs: &mut Inputs) -> Result<EventTable> {
    let scale = load_scale(RunConfig::require(&config.scale, "scale")?, inputs)?;
    let path = RunConfig::require(&config.events, "events")?;
    let bytes = inputs.read(path)?;
    parse_events(bytes.as_slice(), scale).map_err(|e| CliError::reading(path, e))
}

fn no_events() -> CliError {
    CliError::Data("the event file has no events".into())
}

fn window_start(config: &RunConfig, events: &EventTable) -> Result<f64> {
    match RunConfig::date(&config.window_start, "window_start")? {
        Some(t) => Ok(t),
        None => events
            .events()
            .iter()
            .map(|e| e.t_start())
            .min_by(f64::total_cmp)
            .ok_or_else(no_events),
    }
}

/// `[window_start, as_of]`, defaulting to the span of the events.
fn window(config: &RunConfig, events: &EventTable) -> Result<ObservationWindow> {
    let start = window_start(config, events)?;
    let end = match RunConfig::date(&config.as_of, "as_of")? {
        Some(t) => t,
        None => events
            .events()
            .iter()
            .map(|e| e.t_end())
            .max_by(f64::total_cmp)
            .ok_or_else(no_events)?,
    };
    ObservationWindow::new(start, end).map_err(CliError::config)
}

fn fit_options(config: &RunConfig) -> FitOptions {
    let mut options = FitOptions {
        theta: config.theta.unwrap_or(1.0),
        ..FitOptions::default()
    };
    if let Some(n) = config.max_iterations {
        options.optim.max_iterations = n;
    }
    options
}

fn table(scale: &RatingScale, m: &DMatrix<f64>) -> String {
    let names = scale.states().to_vec();
    format_table(&names, &names, m, SUMMARY_DECIMALS)
}

fn report_summary(r: &EstimateReport) -> String {
    let scale = r.transition.scale();
    let mut s = String::new();
    let _ = writeln!(s, "method: {}", r.method);
    let _ = writeln!(s, "window: {} to {}", r.window.start(), r.window.end());
    let _ = writeln!(s, "half-life: {}", r.weighting.half_life);
    if let Some(g) = &r.generator {
        let _ = writeln!(s, "\ngenerator\n{}", table(scale, g.entries()));
    }
    let _ = writeln!(
        s,
        "\n{}-year transition matrix\n{}",
        r.transition.horizon(),
        table(scale, r.transition.entries())
    );
    if let Some(f) = &r.fit {
        let _ = writeln!(
            s,
            "\nfit: log-likelihood {} from {}, {} iterations, converged {}",
            f.objective, f.initial_objective, f.iterations, f.converged
        );
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// `report.json`, matrices as JSON and CSV, and a 4-decimal summary under `prefix`.
fn write_report(out: &mut OutputDir, prefix: &str, r: &EstimateReport) -> Result<()> {
    let scale = r.transition.scale().clone();
    out.render(&format!("{prefix}report.json"), |b| {
        write_json(b, &ReportJson::new(r))
    })?;
    out.render(&format!("{prefix}transition.json"), |b| {
        write_json(b, &MatrixJson::from_transition(&r.transition))
    })?;
    out.render(&format!("{prefix}transition.csv"), |b| {
        write_matrix_csv(b, &scale, r.transition.entries())
    })?;
    if let Some(g) = &r.generator {
        out.render(&format!("{prefix}generator.json"), |b| {
            write_json(b, &MatrixJson::from_generator(g))
        })?;
        out.render(&format!("{prefix}generator.csv"), |b| {
            write_matrix_csv(b, &scale, g.entries())
        })?;
    }
    out.write(
        &format!("{prefix}summary.txt"),
        report_summary(r).as_bytes(),
    )
}

fn not_converged(reports: &[&EstimateReport]) -> Option<CliError> {
    let bad: Vec<String> = reports
        .iter()
        .filter(|r| r.fit.is_some_and(|f| !f.converged))
        .map(|r| r.window.end().to_string())
        .collect();
    (!bad.is_empty())
        .then(|| CliError::NonConvergence(format!("smoothed fit as of {}", bad.join(", "))))
}

pub fn estimate_cmd(mut config: RunConfig, flags: &Flags) -> Result<()> {
    let mut inputs = Inputs::default();
    let events = load_events(&config, &mut inputs)?;
    let method = config.method()?;
    let half_life = config.half_life(method)?;
    let window = window(&config, &events)?;
    let options = fit_options(&config);

    let (report, params) = match method {
        Method::Smoothed => {
            let weighting = Weighting::new(half_life, window.end());
            let fit =
                fit_smoothed(&events, &weighting, &window, &options).map_err(CliError::from_lib)?;
            (fit.report, Some(fit.params))
        }
        _ => (
            estimate(method, &events, &window, half_life, &options).map_err(CliError::from_lib)?,
            None,
        ),
    };

    config.method = Some(method.to_string());
    let mut out = OutputDir::create(config.out_dir(flags))?;
    write_report(&mut out, "", &report)?;
    if let Some(p) = &params {
        out.render("gengen.json", |b| write_json(b, &GengenJson::new(p)))?;
    }
    out.finish("estimate", &config, &inputs)?;
    not_converged(&[&report]).map_or(Ok(()), Err)
}

pub fn roll_cmd(mut config: RunConfig, flags: &Flags) -> Result<()> {
    let mut inputs = Inputs::default();
    let events = load_events(&config, &mut inputs)?;
    let method = config.method()?;
    let half_life = config.half_life(method)?;
    let start = window_start(&config, &events)?;
    let dates = config.dates()?;
    let labels: Vec<String> = config
        .dates
        .iter()
        .flatten()
        .map(|d| match d {
            crate::config::Scalar::Number(v) => v.to_string(),
            crate::config::Scalar::Text(t) => t.trim().to_string(),
        })
        .collect();
    let reports = roll_estimates(
        &events,
        &dates,
        start,
        half_life,
        method,
        &fit_options(&config),
    )
    .map_err(CliError::from_lib)?;

    config.method = Some(method.to_string());
    let mut out = OutputDir::create(config.out_dir(flags))?;
    out.render("roll.csv", |b| write_roll_csv(b, &reports))?;
    for (label, r) in labels.iter().zip(&reports) {
        let dir: String = label
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        write_report(&mut out, &format!("{dir}/"), r)?;
    }
    out.finish("roll", &config, &inputs)?;
    not_converged(&reports.iter().collect::<Vec<_>>()).map_or(Ok(()), Err)
}

pub fn curves_cmd(mut config: RunConfig, flags: &Flags) -> Result<()> {
    let mut inputs = Inputs::default();
    let gen = load_generator(&config, &mut inputs)?;
    let horizons = config
        .horizons
        .clone()
        .unwrap_or_else(|| DEFAULT_HORIZONS.to_vec());
    let curve = default_curve(&gen, &horizons).map_err(CliError::config)?;
    curve
        .check_monotone()
        .map_err(|e| CliError::Monotonicity(format!("default curve: {e}")))?;
    let scores = warf(&gen).map_err(CliError::from_lib)?;
    let downgrade = match gen.scale().ig_boundary() {
        Some(_) => {
            let fp = first_passage(&gen, None, &horizons).map_err(CliError::from_lib)?;
            fp.check_monotone()
                .map_err(|e| CliError::Monotonicity(format!("downgrade curve: {e}")))?;
            Some(fp)
        }
        None => None,
    };

    config.horizons = Some(horizons.clone());
    let mut out = OutputDir::create(config.out_dir(flags))?;
    out.render("default_curve.csv", |b| {
        write_curve_csv(b, &curve, Some(&scores))
    })?;
    out.render("default_curve.json", |b| {
        write_json(b, &CurveJson::new(&curve, Some(&scores)))
    })?;
    let cols: Vec<String> = horizons.iter().map(|h| format!("{h}y")).collect();
    let mut summary = format!(
        "cumulative default probability (%)\n{}",
        format_table(
            gen.scale().states(),
            &cols,
            &(curve.default_probabilities() * 100.0),
            SUMMARY_DECIMALS
        )
    );
    let _ = writeln!(summary, "\nWARF");
    for (name, w) in gen.scale().states().iter().zip(&scores) {
        let _ = writeln!(summary, "{name:8} {w}");
    }
    if let Some(fp) = &downgrade {
        out.render("downgrade_curve.csv", |b| write_curve_csv(b, fp, None))?;
        out.render("downgrade_curve.json", |b| {
            write_json(b, &CurveJson::new(fp, None))
        })?;
        let _ = writeln!(
            summary,
            "\nprobability of reaching high yield or default (%)\n{}",
            format_table(
                fp.scale().states(),
                &cols,
                &(fp.default_probabilities() * 100.0),
                SUMMARY_DECIMALS
            )
        );
    } else {
        let _ = writeln!(
            summary,
            "\nno investment-grade boundary on this scale; downgrade curve skipped"
        );
    }
    out.write("summary.txt", summary.as_bytes())?;
    out.finish("curves", &config, &inputs)
}

pub fn coarsen_cmd(config: RunConfig, flags: &Flags) -> Result<()> {
    let mut inputs = Inputs::default();
    let gen = load_generator(&config, &mut inputs)?;
    let map = CoarseMap::from_letter_groups(gen.scale().clone()).map_err(CliError::config)?;
    let coarse = coarse_grain(&gen, &map).map_err(CliError::from_lib)?;
    let one_year = mexp(&coarse, 1.0).map_err(CliError::from_lib)?;
    let scale = coarse.scale().clone();

    let mut out = OutputDir::create(config.out_dir(flags))?;
    out.render("letter_generator.json", |b| {
        write_json(b, &MatrixJson::from_generator(&coarse))
    })?;
    out.render("letter_generator.csv", |b| {
        write_matrix_csv(b, &scale, coarse.entries())
    })?;
    out.render("letter_transition_1y.json", |b| {
        write_json(b, &MatrixJson::from_transition(&one_year))
    })?;
    out.render("letter_transition_1y.csv", |b| {
        write_matrix_csv(b, &scale, one_year.entries())
    })?;
    let summary = format!(
        "letter-grade generator\n{}\n1-year transition matrix\n{}",
        table(&scale, coarse.entries()),
        table(&scale, one_year.entries())
    );
    out.write("summary.txt", summary.as_bytes())?;
    out.finish("coarsen", &config, &inputs)
}

pub fn simulate_cmd(mut config: RunConfig, flags: &Flags) -> Result<()> {
    let mut inputs = Inputs::default();
    let gen = load_generator(&config, &mut inputs)?;
    let scale = gen.scale().clone();
    let issuers = *config.issuers.get_or_insert(1000);
    let horizon = *config.sim_horizon.get_or_insert(10.0);
    let withdrawal = *config.withdrawal_rate.get_or_insert(0.0);
    let seed = *config.seed.get_or_insert(0);
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(CliError::Config(format!(
            "`sim_horizon` must be positive, got {horizon}"
        )));
    }
    let schedule = GeneratorSchedule::stationary(gen).map_err(CliError::from_lib)?;
    let events =
        simulate_events(&schedule, issuers, horizon, withdrawal, seed).map_err(CliError::config)?;

    let mut out = OutputDir::create(config.out_dir(flags))?;
    out.render("events.csv", |b| write_events(b, &events))?;
    out.render("scale.json", |b| write_json(b, &scale.to_config()))?;
    out.finish("simulate", &config, &inputs)
}

pub fn validate_cmd(config: RunConfig) -> Result<()> {
    let mut inputs = Inputs::default();
    let mut checked = false;
    if config.events.is_some() {
        let events = load_events(&config, &mut inputs)?;
        println!(
            "{}: {} events, {} issuers, valid",
            config.events.as_deref().unwrap_or_default(),
            events.len(),
            events.by_issuer().count()
        );
        checked = true;
    }
    if let Some(path) = &config.generator {
        let bytes = inputs.read(path)?;
        let m = read_matrix_json(bytes.as_slice()).map_err(|e| CliError::reading(path, e))?;
        let scale = matrix_scale(&config, &m.scale, &mut inputs)?;
        match m.horizon {
            Some(h) => {
                m.to_transition(scale).map_err(|e| in_file(path, e))?;
                println!(
                    "{path}: valid {h}-year transition matrix over {} states",
                    m.scale.len()
                );
            }
            None => {
                m.to_generator(scale).map_err(|e| in_file(path, e))?;
                println!("{path}: valid generator over {} states", m.scale.len());
            }
        }
        checked = true;
    }
    if let Some(path) = &config.gengen {
        load_generator(
            &RunConfig {
                generator: None,
                ..config.clone()
            },
            &mut inputs,
        )?;
        println!("{path}: valid gengen parameters");
        checked = true;
    }
    if checked {
        Ok(())
    } else {
        Err(CliError::Config(
            "nothing to validate: give `events`, `generator` or `gengen`".into(),
        ))
    }
}
