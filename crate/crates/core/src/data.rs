//! ASPM-style flight-leg records and the delay, GDP and throughput variables derived from them.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column names of the flight-leg CSV, in file order.
pub const RECORD_COLUMNS: [&str; 18] = [
    "tail_id",
    "airline",
    "origin",
    "dest",
    "sch_out",
    "act_out",
    "sch_in",
    "act_in",
    "wheels_off",
    "wheels_on",
    "unimp_taxi_out",
    "unimp_taxi_in",
    "plan_enroute",
    "edct_off",
    "nom_to",
    "weather_dest",
    "enroute_storm",
    "runway_config",
];

/// Optional trailing columns carrying demand and throughput counts.
pub const OPTIONAL_COLUMNS: [&str; 2] = ["dep_demand", "arr_throughput"];

/// EDCT value meaning "no ground delay program".
pub const NO_EDCT: i64 = -1;

/// One aircraft leg. Event times are epoch seconds, durations are minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightLegRecord {
    pub tail_id: String,
    pub airline: String,
    pub origin: String,
    pub dest: String,
    pub sch_gate_out: Option<i64>,
    pub act_gate_out: Option<i64>,
    pub sch_gate_in: Option<i64>,
    pub act_gate_in: Option<i64>,
    pub act_wheels_off: Option<i64>,
    pub act_wheels_on: Option<i64>,
    pub unimpeded_taxi_out_min: f64,
    pub unimpeded_taxi_in_min: f64,
    pub plan_enroute_min: f64,
    pub edct_off_sec: i64,
    pub nom_to_min: f64,
    pub weather_dest: String,
    pub enroute_storm: String,
    pub runway_config: String,
    pub dep_demand: Option<f64>,
    pub arr_throughput: Option<f64>,
}

impl FlightLegRecord {
    fn check(&self) -> std::result::Result<(), String> {
        if let (Some(out), Some(off)) = (self.act_gate_out, self.act_wheels_off) {
            if off < out {
                return Err(format!("wheels_off {off} precedes act_out {out}"));
            }
        }
        if let (Some(on), Some(gate_in)) = (self.act_wheels_on, self.act_gate_in) {
            if gate_in < on {
                return Err(format!("act_in {gate_in} precedes wheels_on {on}"));
            }
        }
        if self.edct_off_sec != NO_EDCT && self.edct_off_sec <= 0 {
            return Err(format!("edct_off must be -1 or positive, got {}", self.edct_off_sec));
        }
        for (name, v) in [
            ("unimp_taxi_out", self.unimpeded_taxi_out_min),
            ("unimp_taxi_in", self.unimpeded_taxi_in_min),
            ("nom_to", self.nom_to_min),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a finite non-negative duration"));
            }
        }
        if !(self.plan_enroute_min > 0.0 && self.plan_enroute_min.is_finite()) {
            return Err("plan_enroute must be positive".into());
        }
        Ok(())
    }
}

/// A rejected CSV row. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedRecords {
    pub records: Vec<FlightLegRecord>,
    pub errors: Vec<RowError>,
}

impl ParsedRecords {
    pub fn skipped(&self) -> usize {
        self.errors.len()
    }
}

/// Reads flight-leg records. A missing header column is fatal; bad rows are collected and skipped.
pub fn parse_records<R: Read>(input: R) -> Result<ParsedRecords> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 18];
    for (slot, name) in idx.iter_mut().zip(RECORD_COLUMNS) {
        *slot = position(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let demand_idx = position(OPTIONAL_COLUMNS[0]);
    let throughput_idx = position(OPTIONAL_COLUMNS[1]);

    let mut out = ParsedRecords::default();
    for (row_no, row) in reader.records().enumerate() {
        let line = row_no as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let field = |i: usize| row.get(i).unwrap_or("");
        let parsed = (|| -> std::result::Result<FlightLegRecord, String> {
            let rec = FlightLegRecord {
                tail_id: field(idx[0]).to_string(),
                airline: field(idx[1]).to_string(),
                origin: field(idx[2]).to_string(),
                dest: field(idx[3]).to_string(),
                sch_gate_out: opt_time(field(idx[4]), "sch_out")?,
                act_gate_out: opt_time(field(idx[5]), "act_out")?,
                sch_gate_in: opt_time(field(idx[6]), "sch_in")?,
                act_gate_in: opt_time(field(idx[7]), "act_in")?,
                act_wheels_off: opt_time(field(idx[8]), "wheels_off")?,
                act_wheels_on: opt_time(field(idx[9]), "wheels_on")?,
                unimpeded_taxi_out_min: minutes(field(idx[10]), "unimp_taxi_out")?,
                unimpeded_taxi_in_min: minutes(field(idx[11]), "unimp_taxi_in")?,
                plan_enroute_min: minutes(field(idx[12]), "plan_enroute")?,
                edct_off_sec: opt_time(field(idx[13]), "edct_off")?.unwrap_or(NO_EDCT),
                nom_to_min: minutes(field(idx[14]), "nom_to")?,
                weather_dest: field(idx[15]).to_string(),
                enroute_storm: field(idx[16]).to_string(),
                runway_config: field(idx[17]).to_string(),
                dep_demand: demand_idx.map(|i| opt_count(field(i), "dep_demand")).transpose()?.flatten(),
                arr_throughput: throughput_idx
                    .map(|i| opt_count(field(i), "arr_throughput"))
                    .transpose()?
                    .flatten(),
            };
            rec.check()?;
            Ok(rec)
        })();
        match parsed {
            Ok(rec) => out.records.push(rec),
            Err(message) => out.errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

fn opt_time(s: &str, name: &str) -> std::result::Result<Option<i64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<i64>()
        .map(Some)
        .map_err(|_| format!("unparseable timestamp in {name}: {s:?}"))
}

fn minutes(s: &str, name: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("unparseable duration in {name}: {s:?}"))
}

fn opt_count(s: &str, name: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(Some(v)),
        _ => Err(format!("{name} must be a non-negative count, got {s:?}")),
    }
}

/// Writes records with the standard header; the optional count columns are
/// included only when some record carries them.
pub fn write_records<W: Write>(out: W, records: &[FlightLegRecord]) -> Result<()> {
    let with_counts = records
        .iter()
        .any(|r| r.dep_demand.is_some() || r.arr_throughput.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = RECORD_COLUMNS.to_vec();
    if with_counts {
        header.extend(OPTIONAL_COLUMNS);
    }
    w.write_record(&header)?;
    let t = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
    let c = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let mut row = vec![
            r.tail_id.clone(),
            r.airline.clone(),
            r.origin.clone(),
            r.dest.clone(),
            t(r.sch_gate_out),
            t(r.act_gate_out),
            t(r.sch_gate_in),
            t(r.act_gate_in),
            t(r.act_wheels_off),
            t(r.act_wheels_on),
            r.unimpeded_taxi_out_min.to_string(),
            r.unimpeded_taxi_in_min.to_string(),
            r.plan_enroute_min.to_string(),
            r.edct_off_sec.to_string(),
            r.nom_to_min.to_string(),
            r.weather_dest.clone(),
            r.enroute_storm.clone(),
            r.runway_config.clone(),
        ];
        if with_counts {
            row.push(c(r.dep_demand));
            row.push(c(r.arr_throughput));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-phase delays in minutes. `None` marks a value that could not be derived.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivedDelays {
    pub gate_in_prev: Option<f64>,
    pub turn_around: Option<f64>,
    pub gate_out: Option<f64>,
    pub taxi_out: Option<f64>,
    pub airborne: Option<f64>,
    pub taxi_in: Option<f64>,
    pub gate_in_dest: Option<f64>,
}

fn span_min(from: Option<i64>, to: Option<i64>) -> Option<f64> {
    Some((to? - from?) as f64 / 60.0)
}

/// Derives the phase delays of `rec`. `prev_leg` is the same aircraft's inbound leg; without it
/// the inbound gate-in and turn-around delays are absent.
pub fn derive_delays(rec: &FlightLegRecord, prev_leg: Option<&FlightLegRecord>) -> DerivedDelays {
    let (gate_in_prev, turn_around) = match prev_leg {
        Some(prev) => {
            let gate_in_prev = span_min(prev.sch_gate_in, prev.act_gate_in);
            let actual_turn = span_min(prev.act_gate_in, rec.act_gate_out);
            let scheduled_turn = span_min(prev.sch_gate_in, rec.sch_gate_out);
            let turn = actual_turn.zip(scheduled_turn).map(|(a, s)| a - s);
            (gate_in_prev, turn)
        }
        None => (None, None),
    };
    DerivedDelays {
        gate_in_prev,
        turn_around,
        gate_out: span_min(rec.sch_gate_out, rec.act_gate_out),
        taxi_out: span_min(rec.act_gate_out, rec.act_wheels_off).map(|m| m - rec.unimpeded_taxi_out_min),
        airborne: span_min(rec.act_wheels_off, rec.act_wheels_on).map(|m| m - rec.plan_enroute_min),
        taxi_in: span_min(rec.act_wheels_on, rec.act_gate_in).map(|m| m - rec.unimpeded_taxi_in_min),
        gate_in_dest: span_min(rec.sch_gate_in, rec.act_gate_in),
    }
}

/// Ground-delay-program variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdpVars {
    pub gdp: bool,
    /// Minutes; `None` only when a GDP applies but the pushback time is missing.
    pub gdp_time: Option<f64>,
    pub gdp_gate: bool,
}

/// Decides when a GDP flight counts as held at the gate: `gdp_time < threshold_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdpGateRule {
    pub threshold_min: f64,
}

impl Default for GdpGateRule {
    fn default() -> Self {
        GdpGateRule { threshold_min: 0.0 }
    }
}

pub fn derive_gdp(rec: &FlightLegRecord) -> GdpVars {
    derive_gdp_with(rec, GdpGateRule::default())
}

pub fn derive_gdp_with(rec: &FlightLegRecord, rule: GdpGateRule) -> GdpVars {
    if rec.edct_off_sec == NO_EDCT {
        return GdpVars { gdp: false, gdp_time: Some(0.0), gdp_gate: false };
    }
    let gdp_time = rec
        .act_gate_out
        .map(|out| (rec.edct_off_sec as f64 - (out as f64 + rec.nom_to_min * 60.0)) / 60.0);
    GdpVars {
        gdp: true,
        gdp_time,
        gdp_gate: gdp_time.is_some_and(|t| t < rule.threshold_min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Departures,
    Arrivals,
}

/// Counts wheels-off (departures) or wheels-on (arrivals) events at `airport` in the half-open
/// window `[at - window, at)`.
pub fn throughput(
    records: &[FlightLegRecord],
    airport: &str,
    kind: FlowKind,
    window_min: u32,
    at: i64,
) -> Result<usize> {
    if window_min != 15 && window_min != 30 {
        return Err(Error::InvalidArgument(format!(
            "throughput window must be 15 or 30 minutes, got {window_min}"
        )));
    }
    let start = at - i64::from(window_min) * 60;
    let count = records
        .iter()
        .filter_map(|r| match kind {
            FlowKind::Departures if r.origin == airport => r.act_wheels_off,
            FlowKind::Arrivals if r.dest == airport => r.act_wheels_on,
            _ => None,
        })
        .filter(|&t| t >= start && t < at)
        .count();
    Ok(count)
}

/// For every record, the index of the same aircraft's latest earlier leg into its origin.
pub fn link_previous_legs(records: &[FlightLegRecord]) -> Vec<Option<usize>> {
    let mut by_tail: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        by_tail.entry(r.tail_id.as_str()).or_default().push(i);
    }
    records
        .iter()
        .map(|rec| {
            let departs = rec.act_gate_out.or(rec.sch_gate_out)?;
            by_tail[rec.tail_id.as_str()]
                .iter()
                .copied()
                .filter(|&j| records[j].dest == rec.origin)
                .filter_map(|j| {
                    let arrived = records[j].act_gate_in.or(records[j].sch_gate_in)?;
                    (arrived <= departs).then_some((arrived, j))
                })
                .max()
                .map(|(_, j)| j)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn on_time_leg() -> FlightLegRecord {
        FlightLegRecord {
            tail_id: "N100".into(),
            airline: "AA".into(),
            origin: "ORD".into(),
            dest: "ATL".into(),
            sch_gate_out: Some(36_000),
            act_gate_out: Some(36_000),
            sch_gate_in: Some(36_000 + 120 * 60),
            act_gate_in: Some(36_000 + 120 * 60),
            act_wheels_off: Some(36_000 + 15 * 60),
            act_wheels_on: Some(36_000 + 104 * 60),
            unimpeded_taxi_out_min: 15.0,
            unimpeded_taxi_in_min: 16.0,
            plan_enroute_min: 89.0,
            edct_off_sec: NO_EDCT,
            nom_to_min: 15.0,
            weather_dest: "clear".into(),
            enroute_storm: "none".into(),
            runway_config: "west".into(),
            dep_demand: None,
            arr_throughput: None,
        }
    }

    const HEADER: &str = "tail_id,airline,origin,dest,sch_out,act_out,sch_in,act_in,wheels_off,wheels_on,unimp_taxi_out,unimp_taxi_in,plan_enroute,edct_off,nom_to,weather_dest,enroute_storm,runway_config\n";

    #[test]
    fn empty_file_yields_nothing() {
        let parsed = parse_records(HEADER.as_bytes()).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.skipped(), 0);
    }

    #[test]
    fn missing_column_is_fatal() {
        let header = HEADER.replace("nom_to,", "");
        assert!(matches!(parse_records(header.as_bytes()), Err(Error::MissingColumn(c)) if c == "nom_to"));
    }

    #[test]
    fn sentinel_edct_and_bad_rows() {
        let csv = format!(
            "{HEADER}N1,AA,ORD,ATL,100,100,6000,6000,700,5500,10,8,80,-1,10,clear,none,west\n\
             N2,AA,ORD,ATL,100,100,6000,6000,50,5500,10,8,80,-1,10,clear,none,west\n\
             N3,AA,ORD,ATL,1oo,100,6000,6000,700,5500,10,8,80,-1,10,clear,none,west\n"
        );
        let parsed = parse_records(csv.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].edct_off_sec, -1);
        assert_eq!(parsed.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn write_then_parse_preserves_records() {
        let mut rec = on_time_leg();
        rec.dep_demand = Some(12.0);
        let mut buf = Vec::new();
        write_records(&mut buf, &[rec.clone(), on_time_leg()]).unwrap();
        let parsed = parse_records(buf.as_slice()).unwrap();
        assert_eq!(parsed.records, vec![rec, on_time_leg()]);
    }

    #[test]
    fn identity_leg_has_zero_delays() {
        let rec = on_time_leg();
        let mut prev = on_time_leg();
        prev.origin = "DCA".into();
        prev.dest = "ORD".into();
        prev.sch_gate_in = Some(36_000 - 3600);
        prev.act_gate_in = Some(36_000 - 3600);
        let d = derive_delays(&rec, Some(&prev));
        for v in [d.gate_in_prev, d.turn_around, d.gate_out, d.taxi_out, d.airborne, d.taxi_in, d.gate_in_dest] {
            assert_eq!(v, Some(0.0));
        }
    }

    #[test]
    fn gate_in_late_by_fifteen_minutes() {
        let mut rec = on_time_leg();
        rec.act_gate_in = rec.sch_gate_in.map(|t| t + 900);
        assert_eq!(derive_delays(&rec, None).gate_in_dest, Some(15.0));
    }

    #[test]
    fn airborne_matches_plan() {
        let mut rec = on_time_leg();
        rec.act_wheels_on = rec.act_wheels_off.map(|t| t + 5340);
        let d = derive_delays(&rec, None);
        assert_eq!(d.airborne, Some(0.0));
        assert_eq!(d.gate_in_prev, None);
        assert_eq!(d.turn_around, None);
    }

    #[test]
    fn missing_event_time_is_absent_not_zero() {
        let mut rec = on_time_leg();
        rec.act_wheels_off = None;
        let d = derive_delays(&rec, None);
        assert_eq!(d.taxi_out, None);
        assert_eq!(d.airborne, None);
        assert_eq!(d.gate_out, Some(0.0));
    }

    #[test]
    fn turn_around_is_actual_minus_scheduled() {
        let mut prev = on_time_leg();
        prev.dest = "ORD".into();
        prev.sch_gate_in = Some(36_000 - 3600);
        prev.act_gate_in = Some(36_000 - 600);
        let rec = on_time_leg();
        let d = derive_delays(&rec, Some(&prev));
        assert_eq!(d.gate_in_prev, Some(50.0));
        assert_eq!(d.turn_around, Some(-50.0));
    }

    #[test]
    fn gdp_examples() {
        let mut rec = on_time_leg();
        assert_eq!(derive_gdp(&rec), GdpVars { gdp: false, gdp_time: Some(0.0), gdp_gate: false });

        rec.act_gate_out = Some(3600);
        rec.nom_to_min = 10.0;
        rec.edct_off_sec = 3600 + 600;
        assert_eq!(derive_gdp(&rec).gdp_time, Some(0.0));

        rec.edct_off_sec = 4800;
        let g = derive_gdp(&rec);
        assert!(g.gdp);
        assert_eq!(g.gdp_time, Some(10.0));
        assert!(!g.gdp_gate);

        rec.edct_off_sec = 3000;
        let g = derive_gdp(&rec);
        assert_eq!(g.gdp_time, Some(-20.0));
        assert!(g.gdp_gate);
        assert!(!derive_gdp_with(&rec, GdpGateRule { threshold_min: -30.0 }).gdp_gate);
    }

    #[test]
    fn throughput_windows() {
        assert_eq!(throughput(&[], "ATL", FlowKind::Arrivals, 30, 10_000).unwrap(), 0);
        let at = 100_000;
        let mut recs = Vec::new();
        for on in [at - 1, at - 600, at - 1800, at - 1801, at] {
            let mut r = on_time_leg();
            r.act_wheels_on = Some(on);
            recs.push(r);
        }
        // at-1801 is before the window, `at` itself is excluded.
        assert_eq!(throughput(&recs, "ATL", FlowKind::Arrivals, 30, at).unwrap(), 3);
        assert_eq!(throughput(&recs, "ORD", FlowKind::Arrivals, 30, at).unwrap(), 0);
        assert!(throughput(&recs, "ATL", FlowKind::Arrivals, 20, at).is_err());
    }

    #[test]
    fn previous_leg_linking() {
        let mut prev = on_time_leg();
        prev.origin = "DCA".into();
        prev.dest = "ORD".into();
        prev.sch_gate_in = Some(30_000);
        prev.act_gate_in = Some(30_500);
        let mut older = prev.clone();
        older.act_gate_in = Some(20_000);
        let other_tail = FlightLegRecord { tail_id: "N999".into(), ..prev.clone() };
        let recs = vec![older, on_time_leg(), prev, other_tail];
        let links = link_previous_legs(&recs);
        assert_eq!(links[1], Some(2));
        assert_eq!(links[0], None);
    }
}
