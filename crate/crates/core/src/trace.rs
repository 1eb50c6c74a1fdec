//! Packet traces and the series derived from them.
//!
//! A [`Trace`] is an ordered list of timestamped packets. Two derived views
//! feed the rest of the toolkit: the [`InterarrivalSeries`] (gaps between
//! consecutive packets, consumed by the shuffles and the queue) and the
//! [`CountSeries`] (packets per bin of width `delta`, the process whose
//! second-order statistics are analyzed).

use std::io::{BufRead, Write};

use thiserror::Error;

/// Default bin width in seconds.
pub const DEFAULT_DELTA: f64 = 0.01;

/// Header line of the packet CSV format.
pub const PACKET_CSV_HEADER: &str = "ts,src,dst,len";

// Quotients within this relative distance of an integer are snapped to it, so
// that a timestamp lying on a bin edge in decimal lands in the bin it opens.
const EDGE_SNAP: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: timestamp {ts} precedes the previous packet at {prev}")]
    UnsortedTimestamps { line: usize, ts: f64, prev: f64 },
    #[error("trace contains no packets")]
    EmptyTrace,
    #[error("need at least 2 packets, got {0}")]
    TooFewPackets(usize),
    #[error("bin width must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("negative interarrival value {0}")]
    NegativeInterarrival(f64),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for TraceError {
    fn from(e: std::io::Error) -> Self {
        TraceError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    /// Seconds since trace start.
    pub timestamp: f64,
    pub src: String,
    pub dst: String,
    /// Bytes.
    pub length: u64,
}

/// Packets in nondecreasing timestamp order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    records: Vec<PacketRecord>,
}

impl Trace {
    /// Builds a trace, rejecting empty or out-of-order input.
    pub fn new(records: Vec<PacketRecord>) -> Result<Self, TraceError> {
        if records.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        for (i, pair) in records.windows(2).enumerate() {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(TraceError::UnsortedTimestamps {
                    line: i + 2,
                    ts: pair[1].timestamp,
                    prev: pair[0].timestamp,
                });
            }
        }
        Ok(Trace { records })
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.timestamp).collect()
    }

    pub fn into_records(self) -> Vec<PacketRecord> {
        self.records
    }
}

/// Gaps between consecutive packets, anchored at the first packet's timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct InterarrivalSeries {
    values: Vec<f64>,
    origin: f64,
}

impl InterarrivalSeries {
    pub fn new(values: Vec<f64>, origin: f64) -> Result<Self, TraceError> {
        if let Some(&bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(TraceError::NegativeInterarrival(bad));
        }
        Ok(InterarrivalSeries { values, origin })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Arrival instants: the origin followed by the running sum of gaps.
    pub fn timestamps(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        let mut t = self.origin;
        out.push(t);
        for v in &self.values {
            t += v;
            out.push(t);
        }
        out
    }

    /// Same origin, new values. Callers guarantee the values are valid gaps.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        InterarrivalSeries {
            values,
            origin: self.origin,
        }
    }
}

/// Packets per bin of width `delta` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSeries {
    delta: f64,
    counts: Vec<u64>,
}

impl CountSeries {
    pub fn new(delta: f64, counts: Vec<u64>) -> Result<Self, TraceError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(TraceError::NonPositiveDelta(delta));
        }
        if counts.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        Ok(CountSeries { delta, counts })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

fn parse_record(line: &str, lineno: usize) -> Result<PacketRecord, TraceError> {
    let malformed = |reason: String| TraceError::MalformedLine {
        line: lineno,
        reason,
    };
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(malformed(format!("expected 4 fields, found {}", fields.len())));
    }
    let timestamp: f64 = fields[0]
        .trim()
        .parse()
        .map_err(|_| malformed(format!("bad timestamp {:?}", fields[0])))?;
    if !timestamp.is_finite() || timestamp < 0.0 {
        return Err(malformed(format!("timestamp out of range: {}", fields[0])));
    }
    let length: u64 = fields[3]
        .trim()
        .parse()
        .map_err(|_| malformed(format!("bad length {:?}", fields[3])))?;
    Ok(PacketRecord {
        timestamp,
        src: fields[1].trim().to_string(),
        dst: fields[2].trim().to_string(),
        length,
    })
}

/// Reads a packet CSV (`ts,src,dst,len`). With `sort`, rows are stably sorted
/// by timestamp instead of rejected when out of order.
pub fn parse_packet_csv<R: BufRead>(input: R, sort: bool) -> Result<Trace, TraceError> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(TraceError::EmptyTrace),
    };
    if header.trim_end_matches('\r') != PACKET_CSV_HEADER {
        return Err(TraceError::MalformedLine {
            line: 1,
            reason: format!("expected header {PACKET_CSV_HEADER:?}"),
        });
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let rec = parse_record(line, lineno)?;
        if !sort {
            if let Some(prev) = records.last().map(|r: &PacketRecord| r.timestamp) {
                if rec.timestamp < prev {
                    return Err(TraceError::UnsortedTimestamps {
                        line: lineno,
                        ts: rec.timestamp,
                        prev,
                    });
                }
            }
        }
        records.push(rec);
    }
    if sort {
        records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    }
    Trace::new(records)
}

pub fn write_packet_csv<W: Write + ?Sized>(out: &mut W, records: &[PacketRecord]) -> std::io::Result<()> {
    writeln!(out, "{PACKET_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{},{},{},{}", r.timestamp, r.src, r.dst, r.length)?;
    }
    Ok(())
}

/// Keeps packets from `a` to `b`, and from `b` to `a` when `bidirectional`.
pub fn filter_pair(trace: &Trace, a: &str, b: &str, bidirectional: bool) -> Result<Trace, TraceError> {
    let kept: Vec<PacketRecord> = trace
        .records
        .iter()
        .filter(|r| (r.src == a && r.dst == b) || (bidirectional && r.src == b && r.dst == a))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    Ok(Trace { records: kept })
}

pub fn to_interarrivals(trace: &Trace) -> Result<InterarrivalSeries, TraceError> {
    timestamps_to_interarrivals(&trace.timestamps())
}

pub fn timestamps_to_interarrivals(timestamps: &[f64]) -> Result<InterarrivalSeries, TraceError> {
    if timestamps.len() < 2 {
        return Err(TraceError::TooFewPackets(timestamps.len()));
    }
    let values: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    InterarrivalSeries::new(values, timestamps[0])
}

fn snapped_bins(offset: f64, delta: f64) -> f64 {
    let q = offset / delta;
    let r = q.round();
    if (q - r).abs() <= EDGE_SNAP * q.abs().max(1.0) {
        r
    } else {
        q
    }
}

/// Bins timestamps into left-closed, right-open intervals of width `delta`
/// anchored at the first timestamp.
///
/// The binned window is `ceil((last - first) / delta)` bins long (at least
/// one), so a packet falling exactly on the closing edge of the window opens
/// a bin that is never completed and is not counted.
pub fn to_counts(timestamps: &[f64], delta: f64) -> Result<CountSeries, TraceError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(TraceError::NonPositiveDelta(delta));
    }
    let (first, last) = match (timestamps.first(), timestamps.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(TraceError::EmptyTrace),
    };
    if last < first {
        return Err(TraceError::UnsortedTimestamps {
            line: timestamps.len(),
            ts: last,
            prev: first,
        });
    }
    let n_bins = (snapped_bins(last - first, delta).ceil() as usize).max(1);
    let mut counts = vec![0u64; n_bins];
    for &t in timestamps {
        let idx = snapped_bins(t - first, delta).floor();
        if idx >= 0.0 && (idx as usize) < n_bins {
            counts[idx as usize] += 1;
        }
    }
    CountSeries::new(delta, counts)
}

pub fn interarrivals_to_counts(series: &InterarrivalSeries, delta: f64) -> Result<CountSeries, TraceError> {
    to_counts(&series.timestamps(), delta)
}

/// Reads the interarrival format: one value per line, with an optional
/// `# origin=<seconds>` first line. Blank lines are skipped.
pub fn parse_interarrival_file<R: BufRead>(input: R) -> Result<InterarrivalSeries, TraceError> {
    let mut origin = 0.0;
    let mut values = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if i == 0 {
                if let Some(v) = comment.trim().strip_prefix("origin=") {
                    origin = v.trim().parse().map_err(|_| TraceError::MalformedLine {
                        line: 1,
                        reason: format!("bad origin {v:?}"),
                    })?;
                    continue;
                }
            }
            return Err(TraceError::MalformedLine {
                line: i + 1,
                reason: "unexpected comment".into(),
            });
        }
        let v: f64 = line.parse().map_err(|_| TraceError::MalformedLine {
            line: i + 1,
            reason: format!("bad interarrival value {line:?}"),
        })?;
        if !v.is_finite() || v < 0.0 {
            return Err(TraceError::MalformedLine {
                line: i + 1,
                reason: format!("interarrival must be a nonnegative number, got {line}"),
            });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    InterarrivalSeries::new(values, origin)
}

/// Writes values with shortest round-trip formatting so that a read-write
/// cycle is lossless.
pub fn write_interarrival_file<W: Write + ?Sized>(out: &mut W, series: &InterarrivalSeries) -> std::io::Result<()> {
    writeln!(out, "# origin={}", series.origin)?;
    for v in &series.values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}
