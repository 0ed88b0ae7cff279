//! Rating-history event tables: parsing, validation, observation windows and
//! censoring classification.
//!
//! Each row records one rating spell of an issuer: the state it held from
//! `start` until `end`, and what it moved to at `end` (another rating, default,
//! or a withdrawal of the rating). Rows of one issuer must not overlap, and
//! back-to-back rows must agree on the state at the seam.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::scale::{RatingScale, StateRef};

pub const EVENT_COLUMNS: [&str; 6] = [
    "event_id",
    "issuer_id",
    "start_date",
    "start_state",
    "end_date",
    "end_state",
];

const DAYS_PER_YEAR: f64 = 365.25;
const EPOCH_YEAR: f64 = 1970.0;

/// A point in time measured in years. Calendar dates map onto years by
/// ACT/365.25 counted from 1970-01-01 (which is year 1970.0); bare decimal
/// numbers are taken as years directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Date {
    years: f64,
    calendar: Option<NaiveDate>,
}

impl Date {
    pub fn from_years(years: f64) -> Self {
        Self {
            years,
            calendar: None,
        }
    }

    pub fn from_calendar(date: NaiveDate) -> Self {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
        let days = (date - epoch).num_days() as f64;
        Self {
            years: EPOCH_YEAR + days / DAYS_PER_YEAR,
            calendar: Some(date),
        }
    }

    pub fn years(&self) -> f64 {
        self.years
    }

    pub fn calendar(&self) -> Option<NaiveDate> {
        self.calendar
    }
}

impl std::str::FromStr for Date {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(Self::from_calendar(d));
        }
        match s.parse::<f64>() {
            Ok(y) if y.is_finite() => Ok(Self::from_years(y)),
            _ => Err(format!("malformed date {s:?}")),
        }
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.calendar {
            Some(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            None => write!(f, "{}", self.years),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndState {
    State(StateRef),
    Withdrawn,
}

impl EndState {
    pub fn state(&self) -> Option<StateRef> {
        match self {
            EndState::State(s) => Some(*s),
            EndState::Withdrawn => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEvent {
    pub event_id: String,
    pub issuer_id: String,
    pub start: Date,
    pub start_state: StateRef,
    pub end: Date,
    pub end_state: EndState,
}

impl TransitionEvent {
    pub fn t_start(&self) -> f64 {
        self.start.years()
    }

    pub fn t_end(&self) -> f64 {
        self.end.years()
    }

    pub fn ends_in_default(&self, scale: &RatingScale) -> bool {
        self.end_state == EndState::State(StateRef::Rating(scale.default_index()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationWindow {
    start: f64,
    end: f64,
}

impl ObservationWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::InvalidInput(format!(
                "observation window [{start}, {end}] is empty"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Effective interval of an event inside the window, or `None` when they do
/// not overlap.
pub fn clip_to_window(ev: &TransitionEvent, w: &ObservationWindow) -> Option<(f64, f64)> {
    let lo = ev.t_start().max(w.start);
    let hi = ev.t_end().min(w.end);
    (lo < hi).then_some((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightCensoring {
    None,
    Withdrawal,
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Censoring {
    pub left: bool,
    pub right: RightCensoring,
}

impl Censoring {
    /// The `1 − I^RC` factor: true when the end-of-spell transition is observed.
    pub fn observed_transition(&self) -> bool {
        self.right == RightCensoring::None
    }

    pub fn is_fully_observed(&self) -> bool {
        !self.left && self.observed_transition()
    }
}

/// Censoring of an event relative to a window. An event ending exactly at the
/// window end with a real end state is an observed transition.
pub fn classify_censoring(ev: &TransitionEvent, w: &ObservationWindow) -> Censoring {
    let right = if ev.t_end() > w.end {
        RightCensoring::Window
    } else if ev.end_state == EndState::Withdrawn {
        RightCensoring::Withdrawal
    } else {
        RightCensoring::None
    };
    Censoring {
        left: ev.t_start() < w.start,
        right,
    }
}

/// Validated events of one rating scale, sorted by issuer then start time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTable {
    scale: Arc<RatingScale>,
    events: Vec<TransitionEvent>,
}

fn issuer_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

fn seam_consistent(scale: &RatingScale, prev_end: StateRef, next_start: StateRef) -> bool {
    let prev = scale.members(prev_end);
    let next = scale.members(next_start);
    prev.iter().any(|p| next.contains(p))
}

impl EventTable {
    pub fn new(scale: Arc<RatingScale>, mut events: Vec<TransitionEvent>) -> Result<Self> {
        let default = StateRef::Rating(scale.default_index());
        let mut ids = std::collections::HashSet::new();
        for ev in &events {
            if !ids.insert(ev.event_id.as_str()) {
                return Err(Error::event(&ev.event_id, "duplicate event id"));
            }
            if !(ev.t_start() < ev.t_end()) {
                return Err(Error::event(
                    &ev.event_id,
                    format!("end {} is not after start {}", ev.end, ev.start),
                ));
            }
            if ev.start_state == default {
                return Err(Error::event(&ev.event_id, "cannot start in default"));
            }
        }
        events.sort_by(|a, b| {
            issuer_order(&a.issuer_id, &b.issuer_id).then(a.t_start().total_cmp(&b.t_start()))
        });
        for pair in events.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            if prev.issuer_id != next.issuer_id {
                continue;
            }
            if prev.ends_in_default(&scale) {
                return Err(Error::event(
                    &next.event_id,
                    format!("issuer {} already defaulted", next.issuer_id),
                ));
            }
            match next.t_start().total_cmp(&prev.t_end()) {
                Ordering::Less => {
                    return Err(Error::event(
                        &next.event_id,
                        format!(
                            "overlaps event {} of issuer {}",
                            prev.event_id, next.issuer_id
                        ),
                    ))
                }
                Ordering::Equal => {
                    if let Some(end) = prev.end_state.state() {
                        if !seam_consistent(&scale, end, next.start_state) {
                            return Err(Error::event(
                                &next.event_id,
                                format!(
                                    "starts in {} but event {} ended in {}",
                                    scale.label(next.start_state),
                                    prev.event_id,
                                    scale.label(end)
                                ),
                            ));
                        }
                    }
                }
                Ordering::Greater => {}
            }
        }
        Ok(Self { scale, events })
    }

    pub fn empty(scale: Arc<RatingScale>) -> Self {
        Self {
            scale,
            events: Vec::new(),
        }
    }

    pub fn scale(&self) -> &Arc<RatingScale> {
        &self.scale
    }

    pub fn events(&self) -> &[TransitionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events grouped by issuer, in table order.
    pub fn by_issuer(&self) -> impl Iterator<Item = &[TransitionEvent]> {
        self.events.chunk_by(|a, b| a.issuer_id == b.issuer_id)
    }

    /// True when some event names a letter grade instead of a single rating.
    pub fn has_partial_states(&self) -> bool {
        self.events.iter().any(|e| {
            matches!(e.start_state, StateRef::Group(_))
                || matches!(e.end_state, EndState::State(StateRef::Group(_)))
        })
    }

    /// Shifts every date by `offset` years; calendar labels are dropped.
    pub fn shifted(&self, offset: f64) -> Self {
        let events = self
            .events
            .iter()
            .map(|e| TransitionEvent {
                start: Date::from_years(e.t_start() + offset),
                end: Date::from_years(e.t_end() + offset),
                ..e.clone()
            })
            .collect();
        Self {
            scale: self.scale.clone(),
            events,
        }
    }
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize) -> &'a str {
    rec.get(i).unwrap_or("").trim()
}

/// Reads an event CSV with the columns of [`EVENT_COLUMNS`].
pub fn parse_events<R: Read>(source: R, scale: Arc<RatingScale>) -> Result<EventTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != EVENT_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {}, found {}",
                EVENT_COLUMNS.join(","),
                found.join(",")
            ),
        });
    }

    let mut events = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let event_id = field(&rec, 0).to_string();
        let bad = |message: String| Error::Event {
            event_id: event_id.clone(),
            message: format!("line {line}: {message}"),
        };
        let start: Date = field(&rec, 2).parse().map_err(bad)?;
        let end: Date = field(&rec, 4).parse().map_err(bad)?;
        let start_name = field(&rec, 3);
        if start_name == scale.withdrawal() {
            return Err(bad("withdrawal token cannot start an event".into()));
        }
        let start_state = scale
            .resolve(start_name)
            .ok_or_else(|| bad(format!("unknown state {start_name:?}")))?;
        let end_name = field(&rec, 5);
        let end_state = if end_name == scale.withdrawal() {
            EndState::Withdrawn
        } else {
            EndState::State(
                scale
                    .resolve(end_name)
                    .ok_or_else(|| bad(format!("unknown state {end_name:?}")))?,
            )
        };
        events.push(TransitionEvent {
            event_id,
            issuer_id: field(&rec, 1).to_string(),
            start,
            start_state,
            end,
            end_state,
        });
    }
    EventTable::new(scale, events)
}

/// Writes events in the CSV layout read by [`parse_events`].
pub fn write_events<W: Write>(sink: W, table: &EventTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(EVENT_COLUMNS)?;
    let scale = table.scale();
    for e in table.events() {
        let end = match e.end_state {
            EndState::State(s) => scale.label(s),
            EndState::Withdrawn => scale.withdrawal(),
        };
        w.write_record([
            e.event_id.as_str(),
            e.issuer_id.as_str(),
            &e.start.to_string(),
            scale.label(e.start_state),
            &e.end.to_string(),
            end,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn notched() -> Arc<RatingScale> {
        Arc::new(RatingScale::notched())
    }

    fn parse(csv: &str) -> Result<EventTable> {
        parse_events(csv.as_bytes(), notched())
    }

    const HEADER: &str = "event_id,issuer_id,start_date,start_state,end_date,end_state\n";

    fn ev(start: &str, end: &str, to: &str) -> TransitionEvent {
        let table = parse(&format!("{HEADER}1,X,{start},Baa1,{end},{to}\n")).unwrap();
        table.events()[0].clone()
    }

    fn window() -> ObservationWindow {
        let s: Date = "1990-01-01".parse().unwrap();
        let e: Date = "2004-10-30".parse().unwrap();
        ObservationWindow::new(s.years(), e.years()).unwrap()
    }

    #[test]
    fn calendar_and_decimal_dates() {
        let d: Date = "1970-01-01".parse().unwrap();
        assert_eq!(d.years(), 1970.0);
        let d: Date = "1971-01-01".parse().unwrap();
        assert!((d.years() - (1970.0 + 365.0 / 365.25)).abs() < 1e-12);
        let d: Date = "0.25".parse().unwrap();
        assert_eq!(d.years(), 0.25);
        assert_eq!(d.to_string(), "0.25");
        assert!("6/30/1995".parse::<Date>().is_err());
        assert!("NaN".parse::<Date>().is_err());
    }

    #[test]
    fn empty_table() {
        let t = parse(HEADER).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn header_is_checked() {
        let err = parse("id,issuer,start,s,end,e\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn end_before_start_names_event() {
        let err = parse(&format!("{HEADER}e7,1,2000-01-01,A1,1999-01-01,A2\n")).unwrap_err();
        match err {
            Error::Event { event_id, .. } => assert_eq!(event_id, "e7"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_state_and_bad_date() {
        assert!(matches!(
            parse(&format!("{HEADER}1,1,2000-01-01,Zz9,2001-01-01,A2\n")),
            Err(Error::Event { .. })
        ));
        assert!(matches!(
            parse(&format!("{HEADER}1,1,2000-13-01,A1,2001-01-01,A2\n")),
            Err(Error::Event { .. })
        ));
        assert!(parse(&format!("{HEADER}1,1,2000-01-01,RW,2001-01-01,A2\n")).is_err());
        assert!(parse(&format!("{HEADER}1,1,2000-01-01,D,2001-01-01,A2\n")).is_err());
    }

    #[test]
    fn overlap_and_seams() {
        let overlap =
            format!("{HEADER}1,1,2000-01-01,A1,2002-01-01,A2\n2,1,2001-06-01,A2,2003-01-01,A3\n");
        assert!(parse(&overlap).is_err());
        let seam =
            format!("{HEADER}1,1,2000-01-01,A1,2002-01-01,A2\n2,1,2002-01-01,A3,2003-01-01,A2\n");
        assert!(parse(&seam).is_err());
        let letter_seam =
            format!("{HEADER}1,1,1985-01-01,Baa,1992-01-01,A\n2,1,1992-01-01,A2,1995-01-01,A1\n");
        assert!(parse(&letter_seam).is_ok());
        let after_default =
            format!("{HEADER}1,1,2000-01-01,B3,2001-01-01,D\n2,1,2002-01-01,B3,2003-01-01,B2\n");
        assert!(parse(&after_default).is_err());
        let dup =
            format!("{HEADER}1,1,2000-01-01,A1,2002-01-01,A2\n1,2,2000-01-01,A1,2002-01-01,A2\n");
        assert!(parse(&dup).is_err());
    }

    #[test]
    fn sorted_by_issuer_then_start() {
        let csv = format!(
            "{HEADER}a,10,2001-01-01,A1,2002-01-01,A2\nb,2,2001-01-01,A1,2002-01-01,A2\nc,2,2000-01-01,A3,2001-01-01,A1\n"
        );
        let t = parse(&csv).unwrap();
        let ids: Vec<_> = t.events().iter().map(|e| e.event_id.as_str()).collect();
        assert_eq!(ids, ["c", "b", "a"]);
        assert_eq!(t.by_issuer().count(), 2);
    }

    #[test]
    fn clipping() {
        let w = window();
        let left = ev("1990-01-01", "1995-06-30", "Baa1");
        assert_eq!(
            clip_to_window(&left, &w),
            Some((left.t_start(), left.t_end()))
        );
        let before = ev("1980-01-01", "1985-01-01", "A1");
        assert_eq!(clip_to_window(&before, &w), None);
        let late = ev("2002-10-10", "2006-12-31", "A1");
        let (s, e) = clip_to_window(&late, &w).unwrap();
        assert_eq!(s, late.t_start());
        assert_eq!(e, w.end());
    }

    #[test]
    fn censoring_kinds() {
        let w = window();
        let default = ev("1994-05-15", "1998-12-15", "D");
        assert!(classify_censoring(&default, &w).is_fully_observed());
        let withdrawn = ev("1996-04-10", "2001-06-15", "RW");
        let c = classify_censoring(&withdrawn, &w);
        assert_eq!(c.right, RightCensoring::Withdrawal);
        assert!(!c.observed_transition());
        let late = ev("2002-10-10", "2006-12-31", "A1");
        assert_eq!(classify_censoring(&late, &w).right, RightCensoring::Window);
        let early = ev("1985-01-01", "1995-06-30", "Baa2");
        let c = classify_censoring(&early, &w);
        assert!(c.left && c.observed_transition());
        let edge = ev("2000-01-01", "2004-10-30", "Baa2");
        assert!(classify_censoring(&edge, &w).is_fully_observed());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let csv = format!(
            "{HEADER}1,1,1985-01-01,Baa,1992-01-01,A\n2,1,1992-01-01,A2,1995-01-01,RW\n3,2,0.25,B1,1.5,D\n"
        );
        let t = parse(&csv).unwrap();
        let mut out = Vec::new();
        write_events(&mut out, &t).unwrap();
        let back = parse_events(out.as_slice(), notched()).unwrap();
        assert_eq!(back, t);
    }
}
