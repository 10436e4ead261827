//! Tabular per-leg variables: the bridge between flight records and network nodes.

use std::io::{Read, Write};

use crate::data::{derive_delays, derive_gdp_with, link_previous_legs, throughput, FlightLegRecord, FlowKind, GdpGateRule};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(String),
    Missing,
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }

    /// Label used when the value feeds a categorical node.
    pub fn label(&self) -> Option<String> {
        match self {
            Value::Num(x) => Some(x.to_string()),
            Value::Cat(s) => Some(s.clone()),
            Value::Missing => None,
        }
    }

    fn parse(field: &str) -> Value {
        if field.is_empty() {
            Value::Missing
        } else if let Ok(x) = field.parse::<f64>() {
            Value::Num(x)
        } else {
            Value::Cat(field.to_string())
        }
    }

    fn render(&self) -> String {
        match self {
            Value::Num(x) => x.to_string(),
            Value::Cat(s) => s.clone(),
            Value::Missing => String::new(),
        }
    }
}

/// Column-named rows of derived variables, one row per flight leg.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// Column holding the scheduled departure, used for date splits.
pub const TIME_COLUMN: &str = "sch_out";

pub const CASE_COLUMNS: [&str; 20] = [
    "tail_id",
    "sch_out",
    "origin",
    "dest",
    "airline",
    "gate_in_prev",
    "turn_around",
    "gate_out",
    "taxi_out",
    "airborne",
    "taxi_in",
    "gate_in_dest",
    "gdp",
    "gdp_time",
    "gdp_gate",
    "weather_dest",
    "enroute_storm",
    "runway_config",
    "dep_demand",
    "arr_throughput",
];

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Keep only legs departing this airport.
    pub origin: Option<String>,
    /// Keep only legs arriving at this airport.
    pub dest: Option<String>,
    pub gdp_gate: GdpGateRule,
}

impl CaseTable {
    pub fn new(columns: Vec<String>) -> Self {
        CaseTable { columns, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, row: usize, column: &str) -> Option<&Value> {
        self.column(column).map(|c| &self.rows[row][c])
    }

    pub fn subset(&self, rows: impl IntoIterator<Item = usize>) -> CaseTable {
        CaseTable {
            columns: self.columns.clone(),
            rows: rows.into_iter().map(|i| self.rows[i].clone()).collect(),
        }
    }

    /// Derives one row per selected record. Demand and throughput come from the record when
    /// present and are otherwise counted from the record set (15-minute departures and
    /// 30-minute arrivals at the origin before wheels-off).
    pub fn from_records(records: &[FlightLegRecord], opts: &IngestOptions) -> Result<CaseTable> {
        let links = link_previous_legs(records);
        let mut table = CaseTable::new(CASE_COLUMNS.iter().map(|s| s.to_string()).collect());
        for (i, rec) in records.iter().enumerate() {
            if opts.origin.as_ref().is_some_and(|o| *o != rec.origin)
                || opts.dest.as_ref().is_some_and(|d| *d != rec.dest)
            {
                continue;
            }
            let d = derive_delays(rec, links[i].map(|j| &records[j]));
            let g = derive_gdp_with(rec, opts.gdp_gate);
            let num = |v: Option<f64>| v.map_or(Value::Missing, Value::Num);
            let cat = |s: &str| if s.is_empty() { Value::Missing } else { Value::Cat(s.to_string()) };
            let counted = |kind, window| -> Result<Value> {
                Ok(match rec.act_wheels_off {
                    Some(t) => Value::Num(throughput(records, &rec.origin, kind, window, t)? as f64),
                    None => Value::Missing,
                })
            };
            let dep_demand = match rec.dep_demand {
                Some(v) => Value::Num(v),
                None => counted(FlowKind::Departures, 15)?,
            };
            let arr_throughput = match rec.arr_throughput {
                Some(v) => Value::Num(v),
                None => counted(FlowKind::Arrivals, 30)?,
            };
            table.rows.push(vec![
                cat(&rec.tail_id),
                num(rec.sch_gate_out.map(|t| t as f64)),
                cat(&rec.origin),
                cat(&rec.dest),
                cat(&rec.airline),
                num(d.gate_in_prev),
                num(d.turn_around),
                num(d.gate_out),
                num(d.taxi_out),
                num(d.airborne),
                num(d.taxi_in),
                num(d.gate_in_dest),
                Value::Cat(g.gdp.to_string()),
                num(g.gdp_time),
                Value::Cat(g.gdp_gate.to_string()),
                cat(&rec.weather_dest),
                cat(&rec.enroute_storm),
                cat(&rec.runway_config),
                dep_demand,
                arr_throughput,
            ]);
        }
        Ok(table)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<CaseTable> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let columns = reader.headers()?.iter().map(str::to_string).collect::<Vec<_>>();
        let mut table = CaseTable::new(columns);
        for row in reader.records() {
            let row = row?;
            table.rows.push(row.iter().map(Value::parse).collect());
        }
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Value::render))?;
        }
        w.flush()?;
        Ok(())
    }
}
