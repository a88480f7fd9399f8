//! Plain-text outputs: `trace.csv`, `summary.txt` and `compare.csv`.
//!
//! Floats are written as `{:.16e}`, 17 significant digits, which round-trips
//! every binary64 value.

use std::fmt::Write as _;

use crate::baseline::{Comparison, MethodRun};
use crate::covering::CoveringAudit;
use crate::linalg::Vector;
use crate::solver::{H2Report, IterateTrace, RateError, RateEstimate, StepCertificate};

pub const TRACE_HEADER: &str = "j,tau,deviation,step_norm,residual";
pub const COMPARE_HEADER: &str = "method,steps,status,rate_regime,rate_value";

/// A float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_vector(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_float(*x)).collect();
    format!("[{}]", parts.join(", "))
}

/// One row per trace record, `j = 0` first.
pub fn trace_csv(trace: &IterateTrace) -> String {
    let mut out = String::with_capacity(96 * (trace.records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.j,
            fmt_float(r.tau),
            fmt_float(r.deviation),
            fmt_float(r.step_norm),
            fmt_float(r.residual)
        )
        .unwrap();
    }
    out
}

/// Everything that goes into `summary.txt`.
#[derive(Debug, Clone, Default)]
pub struct SummaryInput<'a> {
    pub name: Option<&'a str>,
    pub method: &'a str,
    pub status: String,
    pub x_star: Option<&'a Vector>,
    pub tau_star: Option<f64>,
    pub trace: Option<&'a IterateTrace>,
    pub certificate: Option<StepCertificate>,
    pub rate: Option<Result<RateEstimate, RateError>>,
    pub h1: Option<&'a CoveringAudit>,
    pub h2: Option<&'a H2Report>,
    pub diagnostic: Option<String>,
}

pub fn summary_text(s: &SummaryInput<'_>) -> String {
    let mut out = String::new();
    if let Some(name) = s.name {
        writeln!(out, "name: {name}").unwrap();
    }
    writeln!(out, "method: {}", s.method).unwrap();
    writeln!(out, "status: {}", s.status).unwrap();
    if let Some(diag) = &s.diagnostic {
        writeln!(out, "diagnostic: {diag}").unwrap();
    }
    if let Some(trace) = s.trace {
        let last = trace.last();
        writeln!(out, "steps: {}", trace.steps()).unwrap();
        writeln!(out, "tau_final: {}", fmt_float(last.tau)).unwrap();
        writeln!(out, "residual: {}", fmt_float(last.residual)).unwrap();
        writeln!(out, "deviation: {}", fmt_float(last.deviation)).unwrap();
    }
    if let Some(x) = s.x_star {
        writeln!(out, "x_star: {}", fmt_vector(x)).unwrap();
    }
    if let Some(t) = s.tau_star {
        writeln!(out, "tau_star: {}", fmt_float(t)).unwrap();
    }
    if let Some(c) = &s.certificate {
        writeln!(out, "certificate: {}", if c.holds() { "valid" } else { "INVALID" }).unwrap();
        writeln!(out, "  deviation_excess: {}", fmt_float(c.deviation_excess)).unwrap();
        writeln!(out, "  step_excess: {}", fmt_float(c.step_excess)).unwrap();
        writeln!(out, "  inversion_defect: {}", fmt_float(c.inversion_defect)).unwrap();
        writeln!(out, "  residual_excess: {}", fmt_float(c.residual_excess)).unwrap();
    }
    match &s.rate {
        Some(Ok(rate)) => {
            writeln!(out, "rate_regime: {}", rate.regime).unwrap();
            writeln!(out, "rate_value: {}", fmt_float(rate.value)).unwrap();
        }
        Some(Err(e)) => writeln!(out, "rate: unavailable ({e})").unwrap(),
        None => {}
    }
    if let Some(a) = s.h1 {
        writeln!(
            out,
            "h1_audit: {} violations / {} trials, max residual {}, max overshoot {}",
            a.violations,
            a.trials,
            fmt_float(a.max_residual),
            fmt_float(a.max_overshoot)
        )
        .unwrap();
    }
    if let Some(h) = s.h2 {
        writeln!(
            out,
            "h2_audit: {} violations / {} samples, max ratio {}",
            h.violations,
            h.samples,
            fmt_float(h.max_ratio)
        )
        .unwrap();
    }
    out
}

fn compare_row(out: &mut String, run: &MethodRun) {
    let (regime, value) = match &run.rate {
        Some(r) => (r.regime.to_string(), fmt_float(r.value)),
        None => ("NA".to_string(), "NA".to_string()),
    };
    let status = run.status.to_string().replace(',', ";");
    writeln!(out, "{},{},{},{},{}", run.method, run.steps(), status, regime, value).unwrap();
}

pub fn compare_csv(cmp: &Comparison) -> String {
    let mut out = String::new();
    out.push_str(COMPARE_HEADER);
    out.push('\n');
    compare_row(&mut out, &cmp.majorant);
    compare_row(&mut out, &cmp.baseline);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{TraceRecord, TraceStatus};

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, 0.0] {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert_eq!(s.trim_start_matches('-').split('e').next().unwrap().len(), 18);
        }
    }

    #[test]
    fn csv_rows_match_records() {
        let record = |j: usize| TraceRecord {
            j,
            tau: j as f64 * 0.1,
            x: Vector::zeros(1),
            step_norm: 0.1,
            deviation: j as f64 * 0.1,
            residual: 1.0 / (j as f64 + 1.0),
            inversion_defect: 0.0,
        };
        let trace = IterateTrace { tau0: 0.0, records: (0..4).map(record).collect(), status: TraceStatus::MaxSteps };
        let csv = trace_csv(&trace);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines.len(), 5);
        let cols: Vec<f64> = lines[2].split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols, vec![0.1, 0.1, 0.1, 0.5]);
    }
}
