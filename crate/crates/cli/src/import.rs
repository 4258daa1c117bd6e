//! Minimal converter from per-subgraph timing logs to traces.
//!
//! Each non-blank line is `partition superstep millis`, separated by
//! whitespace or commas; `#` starts a comment. Lines for the same partition
//! and superstep are summed, so per-subgraph logs aggregate to partitions.
//! Partitions keep the order of their first appearance.

use std::collections::HashMap;

use elastograph::{Millis, TimingTrace};

pub fn trace_from_log(text: &str) -> Result<TimingTrace, String> {
    let mut ids: Vec<String> = Vec::new();
    let mut row_of: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<(usize, usize, u64)> = Vec::new();
    let mut num_supersteps = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let [partition, superstep, millis] = fields[..] else {
            return Err(format!(
                "line {}: expected `partition superstep millis`",
                k + 1
            ));
        };
        let superstep: usize = superstep
            .parse()
            .map_err(|_| format!("line {}: bad superstep {superstep:?}", k + 1))?;
        let millis: u64 = millis
            .parse()
            .map_err(|_| format!("line {}: bad time {millis:?}", k + 1))?;
        let row = *row_of.entry(partition.to_string()).or_insert_with(|| {
            ids.push(partition.to_string());
            ids.len() - 1
        });
        num_supersteps = num_supersteps.max(superstep + 1);
        cells.push((row, superstep, millis));
    }
    let mut times = vec![vec![Millis::ZERO; num_supersteps]; ids.len()];
    for (row, s, ms) in cells {
        times[row][s] += Millis(ms);
    }
    TimingTrace::new(ids, times, None).map_err(|e| e.to_string())
}
