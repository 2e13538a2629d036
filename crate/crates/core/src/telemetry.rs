//! CSV telemetry: one row per controller tick.

use std::io::{Read, Write};

use thiserror::Error;

use crate::kinematics::{gravity_projection, Angles};
use crate::sysid::FlightLogRow;

pub const HEADER: &str = "t,phi,theta,psi,psi_s,psi_c,psi_m,psi_dot_m,psi_dot_s,psi_dot_c,delta,delta_ff,delta_fbk,v_a,v0,guidance_state,g_hat,M_hat";

const COLUMNS: usize = 18;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header '{found}'")]
    Header { found: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
}

/// Format with ten significant digits in plain decimal notation.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (9 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can leave "-0.000..."
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Round `x` to the value its CSV representation parses back to.
pub fn quantize(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format_number(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub psi_s: f64,
    pub psi_c: f64,
    pub psi_m: f64,
    pub psi_dot_m: f64,
    pub psi_dot_s: f64,
    pub psi_dot_c: f64,
    pub delta: f64,
    pub delta_ff: f64,
    pub delta_fbk: f64,
    pub v_a: f64,
    pub v0: f64,
    pub guidance_state: String,
    pub g_hat: f64,
    pub m_hat: f64,
}

impl LogRow {
    fn numbers_mut(&mut self) -> [&mut f64; 17] {
        [
            &mut self.t,
            &mut self.phi,
            &mut self.theta,
            &mut self.psi,
            &mut self.psi_s,
            &mut self.psi_c,
            &mut self.psi_m,
            &mut self.psi_dot_m,
            &mut self.psi_dot_s,
            &mut self.psi_dot_c,
            &mut self.delta,
            &mut self.delta_ff,
            &mut self.delta_fbk,
            &mut self.v_a,
            &mut self.v0,
            &mut self.g_hat,
            &mut self.m_hat,
        ]
    }

    /// Snap every number to its CSV representation.
    pub fn quantized(mut self) -> Self {
        for v in self.numbers_mut() {
            *v = quantize(*v);
        }
        self
    }

    pub fn angles(&self) -> Angles {
        Angles::new(self.phi, self.theta, self.psi)
    }

    pub fn to_csv_line(&self) -> String {
        let n = format_number;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            n(self.t),
            n(self.phi),
            n(self.theta),
            n(self.psi),
            n(self.psi_s),
            n(self.psi_c),
            n(self.psi_m),
            n(self.psi_dot_m),
            n(self.psi_dot_s),
            n(self.psi_dot_c),
            n(self.delta),
            n(self.delta_ff),
            n(self.delta_fbk),
            n(self.v_a),
            n(self.v0),
            self.guidance_state,
            n(self.g_hat),
            n(self.m_hat),
        )
    }
}

pub fn write_log<W: Write>(mut w: W, rows: &[LogRow]) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv_line())?;
    }
    w.flush()
}

pub fn log_to_string(rows: &[LogRow]) -> String {
    let mut buf = Vec::new();
    write_log(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("telemetry is ASCII")
}

pub fn read_log<R: Read>(r: R) -> Result<Vec<LogRow>, TelemetryError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(TelemetryError::Header {
                found: String::new(),
            })
        }
    };
    let found = header.iter().collect::<Vec<_>>().join(",");
    if found != HEADER {
        return Err(TelemetryError::Header { found });
    }
    let mut rows = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != COLUMNS {
            return Err(TelemetryError::Row {
                line,
                message: format!("expected {COLUMNS} fields, found {}", record.len()),
            });
        }
        let num = |i: usize| -> Result<f64, TelemetryError> {
            let field = &record[i];
            field.parse::<f64>().map_err(|_| TelemetryError::Row {
                line,
                message: format!("field {} ('{field}') is not a number", i + 1),
            })
        };
        rows.push(LogRow {
            t: num(0)?,
            phi: num(1)?,
            theta: num(2)?,
            psi: num(3)?,
            psi_s: num(4)?,
            psi_c: num(5)?,
            psi_m: num(6)?,
            psi_dot_m: num(7)?,
            psi_dot_s: num(8)?,
            psi_dot_c: num(9)?,
            delta: num(10)?,
            delta_ff: num(11)?,
            delta_fbk: num(12)?,
            v_a: num(13)?,
            v0: num(14)?,
            guidance_state: record[15].to_string(),
            g_hat: num(16)?,
            m_hat: num(17)?,
        });
    }
    Ok(rows)
}

/// Identification sample for row `k`: the gyro and airspeed readings of row
/// `k` explained by the deflection and attitude logged `lag` rows earlier.
pub fn flight_row(rows: &[LogRow], k: usize, lag: usize) -> Option<FlightLogRow> {
    let src = rows.get(k.checked_sub(lag)?)?;
    let r = rows.get(k)?;
    Some(FlightLogRow {
        t: r.t,
        v_a: r.v_a,
        delta: src.delta,
        psi_dot_m: r.psi_dot_m,
        gravity_proj: gravity_projection(src.angles()),
    })
}

pub fn flight_rows(rows: &[LogRow], lag: usize) -> Vec<FlightLogRow> {
    (lag..rows.len())
        .filter_map(|k| flight_row(rows, k, lag))
        .collect()
}
