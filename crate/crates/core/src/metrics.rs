//! Per-request measurement series, rate computations and CSV / summary
//! export.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::mpsc;

use crate::units::{Bandwidth, SimTime};

/// Snapshot taken right after one request was handled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsRecord {
    pub request_index: u64,
    pub sim_time: SimTime,
    /// Per-class allocation on the reference link.
    pub util: Vec<Bandwidth>,
    pub blocked: Vec<u64>,
    pub admitted: Vec<u64>,
    pub preempted: Vec<u64>,
}

impl MetricsRecord {
    pub fn requested(&self, class: usize) -> u64 {
        self.blocked[class] + self.admitted[class]
    }

    pub fn total_util(&self) -> Bandwidth {
        self.util.iter().sum()
    }
}

/// Destination for records emitted during a run.
pub trait MetricsSink {
    fn record(&mut self, record: &MetricsRecord);
}

impl MetricsSink for Vec<MetricsRecord> {
    fn record(&mut self, record: &MetricsRecord) {
        self.push(record.clone());
    }
}

impl MetricsSink for mpsc::Sender<MetricsRecord> {
    fn record(&mut self, record: &MetricsRecord) {
        // A hung-up receiver only means nobody is listening any more.
        let _ = self.send(record.clone());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Span {
    Cumulative,
    /// The last `n` requests of the class.
    Trailing(u64),
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("rate undefined for class {class}: no {what} yet")]
    Undefined { class: usize, what: &'static str },
    #[error("record index {0} out of range")]
    OutOfRange(usize),
    #[error("malformed journal line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// The ordered record stream of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Journal {
    classes: usize,
    records: Vec<MetricsRecord>,
}

impl Journal {
    pub fn new(classes: usize) -> Self {
        Journal {
            classes,
            records: Vec::new(),
        }
    }

    pub fn from_records(classes: usize, records: Vec<MetricsRecord>) -> Self {
        Journal { classes, records }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: MetricsRecord) {
        self.records.push(record);
    }

    /// blocked / requested for `class`, evaluated at record `at`.
    pub fn blocking_rate(&self, class: usize, span: Span, at: usize) -> Result<f64, MetricsError> {
        let rec = self.records.get(at).ok_or(MetricsError::OutOfRange(at))?;
        let requested = rec.requested(class);
        if requested == 0 {
            return Err(MetricsError::Undefined {
                class,
                what: "requests",
            });
        }
        let (base_requested, base_blocked) = match span {
            Span::Cumulative => (0, 0),
            Span::Trailing(w) => {
                let lo = requested.saturating_sub(w);
                if lo == 0 {
                    (0, 0)
                } else {
                    // Requested counts grow by one per class request, so the
                    // last record at `lo` is where the window opens.
                    let upto = &self.records[..=at];
                    let idx = upto.partition_point(|r| r.requested(class) <= lo) - 1;
                    (lo, upto[idx].blocked[class])
                }
            }
        };
        Ok((rec.blocked[class] - base_blocked) as f64 / (requested - base_requested) as f64)
    }

    /// preempted / admitted for `class`, evaluated at record `at`.
    pub fn preemption_rate(&self, class: usize, at: usize) -> Result<f64, MetricsError> {
        let rec = self.records.get(at).ok_or(MetricsError::OutOfRange(at))?;
        if rec.admitted[class] == 0 {
            return Err(MetricsError::Undefined {
                class,
                what: "admissions",
            });
        }
        Ok(rec.preempted[class] as f64 / rec.admitted[class] as f64)
    }

    pub fn csv_header(classes: usize) -> String {
        let mut header = String::from("request_index,sim_time");
        for prefix in ["util", "blk", "pre"] {
            for c in 0..classes {
                let _ = write!(header, ",{prefix}_ct{c}");
            }
        }
        header
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::csv_header(self.classes))?;
        let mut line = String::new();
        for rec in &self.records {
            line.clear();
            let _ = write!(line, "{},{}", rec.request_index, rec.sim_time);
            for u in &rec.util {
                let _ = write!(line, ",{u}");
            }
            for b in &rec.blocked {
                let _ = write!(line, ",{b}");
            }
            for p in &rec.preempted {
                let _ = write!(line, ",{p}");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<(), MetricsError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }
}

/// What a CSV journal alone can tell: row count, last utilisation and the
/// cumulative blocked / preempted counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvDigest {
    pub rows: u64,
    pub last_time: Option<SimTime>,
    pub final_util: Vec<Bandwidth>,
    pub blocked: Vec<u64>,
    pub preempted: Vec<u64>,
    pub peak_total_util: Bandwidth,
}

impl CsvDigest {
    pub fn parse(text: &str) -> Result<CsvDigest, MetricsError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MetricsError::Malformed {
            line: 1,
            message: "empty file".into(),
        })?;
        let columns: Vec<&str> = header.split(',').collect();
        if columns.len() < 2 || !(columns.len() - 2).is_multiple_of(3) {
            return Err(MetricsError::Malformed {
                line: 1,
                message: "unexpected header".into(),
            });
        }
        let classes = (columns.len() - 2) / 3;
        if header != Journal::csv_header(classes) {
            return Err(MetricsError::Malformed {
                line: 1,
                message: "unexpected header".into(),
            });
        }
        let mut digest = CsvDigest {
            rows: 0,
            last_time: None,
            final_util: vec![Bandwidth::ZERO; classes],
            blocked: vec![0; classes],
            preempted: vec![0; classes],
            peak_total_util: Bandwidth::ZERO,
        };
        let mut prev_index: Option<u64> = None;
        for (i, line) in lines {
            let lineno = i + 1;
            let bad = |message: &str| MetricsError::Malformed {
                line: lineno,
                message: message.into(),
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() {
                return Err(bad("wrong field count"));
            }
            let index: u64 = fields[0].parse().map_err(|_| bad("bad request_index"))?;
            if prev_index.is_some_and(|p| index <= p) {
                return Err(bad("request_index not increasing"));
            }
            prev_index = Some(index);
            digest.last_time =
                Some(SimTime::parse_secs(fields[1]).ok_or_else(|| bad("bad sim_time"))?);
            for c in 0..classes {
                digest.final_util[c] =
                    Bandwidth::parse_mbps(fields[2 + c]).ok_or_else(|| bad("bad utilisation"))?;
                digest.blocked[c] = fields[2 + classes + c]
                    .parse()
                    .map_err(|_| bad("bad blocked count"))?;
                digest.preempted[c] = fields[2 + 2 * classes + c]
                    .parse()
                    .map_err(|_| bad("bad preempted count"))?;
            }
            digest.peak_total_util = digest.peak_total_util.max(digest.final_util.iter().sum());
            digest.rows += 1;
        }
        Ok(digest)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "requests={}", self.rows);
        for c in 0..self.blocked.len() {
            let _ = writeln!(out, "blocked_ct{c}={}", self.blocked[c]);
            let _ = writeln!(out, "preempted_ct{c}={}", self.preempted[c]);
            let _ = writeln!(out, "final_util_ct{c}={}", self.final_util[c]);
        }
        let _ = writeln!(out, "peak_util_total={}", self.peak_total_util);
        out
    }
}

/// End-of-run totals for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSummary {
    pub requested: u64,
    pub admitted: u64,
    pub blocked: u64,
    pub preempted: u64,
    pub completed: u64,
    pub blocking_rate: Option<f64>,
    pub windowed_blocking_rate: Option<f64>,
    pub preemption_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub requests: u64,
    pub reference_link: String,
    pub peak_util_total: Bandwidth,
    pub final_util: Vec<Bandwidth>,
    pub classes: Vec<ClassSummary>,
}

fn rate(value: Option<f64>) -> String {
    value
        .map(|v| format!("{v:.6}"))
        .unwrap_or_else(|| "undefined".into())
}

impl RunSummary {
    /// `key=value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario={}", self.scenario);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "reference_link={}", self.reference_link);
        let _ = writeln!(out, "requests={}", self.requests);
        for (c, s) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "requested_ct{c}={}", s.requested);
            let _ = writeln!(out, "admitted_ct{c}={}", s.admitted);
            let _ = writeln!(out, "blocked_ct{c}={}", s.blocked);
            let _ = writeln!(out, "preempted_ct{c}={}", s.preempted);
            let _ = writeln!(out, "completed_ct{c}={}", s.completed);
            let _ = writeln!(out, "final_util_ct{c}={}", self.final_util[c]);
            let _ = writeln!(out, "blocking_rate_ct{c}={}", rate(s.blocking_rate));
            let _ = writeln!(
                out,
                "blocking_rate_window_ct{c}={}",
                rate(s.windowed_blocking_rate)
            );
            let _ = writeln!(out, "preemption_rate_ct{c}={}", rate(s.preemption_rate));
        }
        let _ = writeln!(out, "peak_util_total={}", self.peak_util_total);
        out
    }
}
