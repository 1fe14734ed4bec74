//! Per-run traces and their CSV / gnuplot data encodings.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub const BASE_HEADER: &str = "t,epoch,train_loss,minibatch_loss,step_norm,max_abs_step,grad_norm";
pub const REGRET_HEADER: &str = ",regret,avg_regret,bound_term1,bound_term2,bound_term3";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegretColumns {
    pub regret: f64,
    pub avg_regret: f64,
    pub bound_term1: f64,
    pub bound_term2: f64,
    pub bound_term3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    /// Passes over the data completed after step `t`.
    pub epoch: f64,
    /// Full-objective loss at the iterate after step `t`.
    pub train_loss: f64,
    /// Loss of the step-`t` minibatch at the iterate it was drawn for.
    pub minibatch_loss: f64,
    pub step_norm: f64,
    pub max_abs_step: f64,
    pub grad_norm: f64,
    pub regret: Option<RegretColumns>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TraceError {
    #[error("empty trace")]
    Empty,
    #[error("rows must have strictly increasing t (row {0})")]
    UnorderedSteps(usize),
    #[error("rows mix regret and plain columns")]
    MixedColumns,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn real(out: &mut String, x: f64) {
    // 17 significant digits round-trip every f64
    let _ = write!(out, "{x:.16e}");
}

impl RunTrace {
    pub fn is_regret(&self) -> bool {
        self.rows.first().is_some_and(|r| r.regret.is_some())
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn check(&self) -> Result<(), TraceError> {
        if self.rows.is_empty() {
            return Err(TraceError::Empty);
        }
        let regret = self.is_regret();
        for (i, pair) in self.rows.windows(2).enumerate() {
            if pair[1].t <= pair[0].t {
                return Err(TraceError::UnorderedSteps(i + 1));
            }
        }
        if self.rows.iter().any(|r| r.regret.is_some() != regret) {
            return Err(TraceError::MixedColumns);
        }
        Ok(())
    }

    fn encode(&self, sep: char, header_prefix: &str) -> Result<String, TraceError> {
        self.check()?;
        let mut out = String::new();
        out.push_str(header_prefix);
        let mut header = BASE_HEADER.to_string();
        if self.is_regret() {
            header.push_str(REGRET_HEADER);
        }
        out.push_str(&header.replace(',', &sep.to_string()));
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}", r.t);
            let mut cols = vec![r.epoch, r.train_loss, r.minibatch_loss, r.step_norm, r.max_abs_step, r.grad_norm];
            if let Some(g) = r.regret {
                cols.extend([g.regret, g.avg_regret, g.bound_term1, g.bound_term2, g.bound_term3]);
            }
            for x in cols {
                out.push(sep);
                real(&mut out, x);
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> Result<String, TraceError> {
        self.encode(',', "")
    }

    /// Whitespace-separated columns with a `#` header, for gnuplot.
    pub fn to_dat(&self) -> Result<String, TraceError> {
        self.encode(' ', "# ")
    }
}

fn io_err(e: TraceError) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidInput, e)
}

pub fn emit_csv(trace: &RunTrace, path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, trace.to_csv().map_err(io_err)?)
}

pub fn emit_dat(trace: &RunTrace, path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, trace.to_dat().map_err(io_err)?)
}

pub fn parse_csv(text: &str) -> Result<RunTrace, TraceError> {
    let mut lines = text.split_terminator('\n');
    let header = lines.next().ok_or(TraceError::Empty)?;
    let regret = if header == BASE_HEADER {
        false
    } else if header == format!("{BASE_HEADER}{REGRET_HEADER}") {
        true
    } else {
        return Err(TraceError::Parse { line: 1, message: format!("unexpected header `{header}`") });
    };
    let width = if regret { 12 } else { 7 };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let bad = |message: String| TraceError::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(bad(format!("expected {width} fields, found {}", fields.len())));
        }
        let t = fields[0].parse().map_err(|e| bad(format!("t: {e}")))?;
        let mut x = Vec::with_capacity(width - 1);
        for f in &fields[1..] {
            x.push(f.parse::<f64>().map_err(|e| bad(format!("`{f}`: {e}")))?);
        }
        rows.push(TraceRow {
            t,
            epoch: x[0],
            train_loss: x[1],
            minibatch_loss: x[2],
            step_norm: x[3],
            max_abs_step: x[4],
            grad_norm: x[5],
            regret: regret.then(|| RegretColumns {
                regret: x[6],
                avg_regret: x[7],
                bound_term1: x[8],
                bound_term2: x[9],
                bound_term3: x[10],
            }),
        });
    }
    let trace = RunTrace { rows };
    trace.check()?;
    Ok(trace)
}

pub fn read_csv(path: impl AsRef<Path>) -> io::Result<RunTrace> {
    parse_csv(&std::fs::read_to_string(path)?).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: u64) -> TraceRow {
        TraceRow {
            t,
            epoch: t as f64 / 3.0,
            train_loss: 0.1 + 1.0 / t as f64,
            minibatch_loss: std::f64::consts::PI * t as f64,
            step_norm: 1e-300,
            max_abs_step: f64::MIN_POSITIVE,
            grad_norm: 123_456_789.123_456_79,
            regret: None,
        }
    }

    #[test]
    fn single_row_is_two_lines() {
        let csv = RunTrace { rows: vec![row(1)] }.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("t,epoch,train_loss,minibatch_loss,step_norm,max_abs_step,grad_norm\n"));
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rows: Vec<TraceRow> = (1..50).map(row).collect();
        rows[3].train_loss = f64::INFINITY;
        rows[4].train_loss = f64::NAN;
        let trace = RunTrace { rows };
        let back = parse_csv(&trace.to_csv().unwrap()).unwrap();
        for (a, b) in trace.rows.iter().zip(&back.rows) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
            assert_eq!(a.grad_norm.to_bits(), b.grad_norm.to_bits());
            assert_eq!(a.step_norm.to_bits(), b.step_norm.to_bits());
        }
    }

    #[test]
    fn regret_trace_has_extended_header() {
        let mut r = row(4);
        r.regret = Some(RegretColumns { regret: 1.0, avg_regret: 0.25, bound_term1: 2.0, bound_term2: 3.0, bound_term3: 1e30 });
        let trace = RunTrace { rows: vec![r] };
        let csv = trace.to_csv().unwrap();
        assert!(csv.starts_with(
            "t,epoch,train_loss,minibatch_loss,step_norm,max_abs_step,grad_norm,regret,avg_regret,bound_term1,bound_term2,bound_term3\n"
        ));
        assert_eq!(parse_csv(&csv).unwrap(), trace);
    }

    #[test]
    fn invalid_traces() {
        assert_eq!(RunTrace::default().to_csv(), Err(TraceError::Empty));
        assert_eq!(RunTrace { rows: vec![row(2), row(2)] }.to_csv(), Err(TraceError::UnorderedSteps(1)));
        assert!(matches!(parse_csv("t,epoch\n"), Err(TraceError::Parse { line: 1, .. })));
    }

    #[test]
    fn dat_is_space_separated() {
        let dat = RunTrace { rows: vec![row(1)] }.to_dat().unwrap();
        assert!(dat.starts_with("# t epoch train_loss"));
        assert_eq!(dat.lines().nth(1).unwrap().split(' ').count(), 7);
    }
}
