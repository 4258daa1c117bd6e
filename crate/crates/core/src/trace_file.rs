//! Reading and writing the JSON trace-file format.
//!
//! ```json
//! {
//!   "num_partitions": 2,
//!   "num_supersteps": 2,
//!   "partitions": [
//!     { "id": "P1", "size_bytes": 0, "times_ms": [10000, 0] },
//!     { "id": "P2", "size_bytes": 0, "times_ms": [5000, 8000] }
//!   ],
//!   "billing": { "quantum_seconds": 60, "price_per_quantum": 1.0,
//!                "bandwidth_bytes_per_second": 100000000 }
//! }
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::model::{BillingPolicy, Millis, TimingTrace, TraceError};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDocument {
    num_partitions: usize,
    num_supersteps: usize,
    partitions: Vec<PartitionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    billing: Option<BillingRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size_bytes: Option<i64>,
    times_ms: Vec<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BillingRecord {
    quantum_seconds: f64,
    price_per_quantum: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bandwidth_bytes_per_second: Option<u64>,
}

/// Parses and validates a trace document.
pub fn load_trace<R: Read>(source: R) -> Result<TimingTrace, TraceError> {
    let doc: TraceDocument =
        serde_json::from_reader(source).map_err(|e| TraceError::Malformed {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    from_document(doc)
}

pub fn load_trace_str(source: &str) -> Result<TimingTrace, TraceError> {
    load_trace(source.as_bytes())
}

fn from_document(doc: TraceDocument) -> Result<TimingTrace, TraceError> {
    if doc.partitions.len() != doc.num_partitions {
        return Err(TraceError::DimensionMismatch {
            location: "partitions".into(),
            expected: doc.num_partitions,
            found: doc.partitions.len(),
        });
    }
    let with_sizes = doc
        .partitions
        .iter()
        .filter(|p| p.size_bytes.is_some())
        .count();
    if with_sizes != 0 && with_sizes != doc.partitions.len() {
        let row = doc
            .partitions
            .iter()
            .position(|p| p.size_bytes.is_none())
            .unwrap_or_default();
        return Err(TraceError::PartialSizes { row });
    }

    let mut ids = Vec::with_capacity(doc.num_partitions);
    let mut times = Vec::with_capacity(doc.num_partitions);
    let mut sizes = Vec::with_capacity(with_sizes);
    for (row, p) in doc.partitions.into_iter().enumerate() {
        if p.times_ms.len() != doc.num_supersteps {
            return Err(TraceError::DimensionMismatch {
                location: format!("partitions[{row}].times_ms"),
                expected: doc.num_supersteps,
                found: p.times_ms.len(),
            });
        }
        let mut r = Vec::with_capacity(p.times_ms.len());
        for (s, &t) in p.times_ms.iter().enumerate() {
            if t < 0 {
                return Err(TraceError::NegativeTime {
                    location: format!("partitions[{row}].times_ms[{s}]"),
                    value: t,
                });
            }
            r.push(Millis(t as u64));
        }
        if let Some(size) = p.size_bytes {
            if size < 0 {
                return Err(TraceError::NegativeSize {
                    location: format!("partitions[{row}].size_bytes"),
                    value: size,
                });
            }
            sizes.push(size as u64);
        }
        ids.push(p.id);
        times.push(r);
    }

    let sizes = (with_sizes > 0).then_some(sizes);
    let mut trace = TimingTrace::new(ids, times, sizes)?;
    if let Some(b) = doc.billing {
        let quantum =
            Millis::from_secs_f64(b.quantum_seconds).ok_or_else(|| TraceError::InvalidBilling {
                field: "quantum_seconds",
                message: format!("must be a nonnegative number, got {}", b.quantum_seconds),
            })?;
        let policy = BillingPolicy::new(
            quantum,
            b.price_per_quantum,
            b.bandwidth_bytes_per_second
                .unwrap_or(BillingPolicy::DEFAULT_BANDWIDTH),
        )?;
        trace = trace.with_billing(policy);
    }
    Ok(trace)
}

fn to_document(trace: &TimingTrace) -> TraceDocument {
    let sizes = trace.partition_sizes();
    TraceDocument {
        num_partitions: trace.num_partitions(),
        num_supersteps: trace.num_supersteps(),
        partitions: (0..trace.num_partitions())
            .map(|i| PartitionRecord {
                id: trace.partition_ids()[i].clone(),
                size_bytes: sizes.map(|s| s[i] as i64),
                times_ms: trace.row(i).iter().map(|t| t.0 as i64).collect(),
            })
            .collect(),
        billing: trace.billing().map(|b| BillingRecord {
            quantum_seconds: b.quantum.as_secs_f64(),
            price_per_quantum: b.price_per_quantum,
            bandwidth_bytes_per_second: Some(b.bandwidth_bytes_per_second),
        }),
    }
}

/// Writes `trace` as a pretty-printed document followed by a newline.
pub fn write_trace<W: Write>(trace: &TimingTrace, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, &to_document(trace))?;
    writeln!(out)
}

pub fn trace_to_string(trace: &TimingTrace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
