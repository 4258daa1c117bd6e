//! Table, CSV and JSON output. Every writer is deterministic.

use std::io::{self, Write};

use elastograph::cost::{CostReport, VmUsageSchedule};
use elastograph::{BillingPolicy, Millis, PlacementPlan, TimingTrace};
use serde::Serialize;
use serde_json::json;

use crate::Format;

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_csv(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Aligned columns; the first is left-aligned, the rest right-aligned.
fn write_table(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(k, (c, w))| {
                if k == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    writeln!(out, "{}", line(header.to_vec()))?;
    for row in rows {
        writeln!(out, "{}", line(row.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}

fn billing_json(billing: &BillingPolicy) -> serde_json::Value {
    json!({
        "quantum_seconds": billing.quantum.as_secs_f64(),
        "price_per_quantum": billing.price_per_quantum,
        "bandwidth_bytes_per_second": billing.bandwidth_bytes_per_second,
    })
}

fn joined(values: impl IntoIterator<Item = impl ToString>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Report fields as (name, value) pairs; times in seconds.
fn summary(report: &CostReport) -> Vec<(&'static str, String)> {
    vec![
        ("strategy", report.strategy.to_string()),
        ("vms", report.num_vms.to_string()),
        ("data_movement", report.data_movement.to_string()),
        ("makespan_s", report.makespan.to_string()),
        ("minimum_makespan_s", report.minimum_makespan.to_string()),
        ("billed_quanta", report.billed_quanta.to_string()),
        ("billed_cost", report.billed_cost.to_string()),
        ("gamma_min_quanta", report.gamma_min_quanta.to_string()),
        ("gamma_max_quanta", report.gamma_max_quanta.to_string()),
        ("gamma_min", report.gamma_min.to_string()),
        ("gamma_max", report.gamma_max.to_string()),
        ("provisioned_core_s", report.provisioned_core.to_string()),
        (
            "under_utilization_core_s",
            report.under_utilization_core.to_string(),
        ),
        ("restarts", report.restarts.to_string()),
        ("per_superstep_vms", joined(&report.per_superstep_vm_counts)),
        ("superstep_walls_s", joined(&report.superstep_walls)),
    ]
}

fn vm_cell(vm: Option<usize>) -> String {
    vm.map_or_else(|| "-".to_string(), |v| format!("v{v}"))
}

pub fn place(
    out: &mut dyn Write,
    format: Format,
    trace: &TimingTrace,
    plan: &PlacementPlan,
    report: &CostReport,
    billing: &BillingPolicy,
) -> io::Result<()> {
    let fields = summary(report);
    match format {
        Format::Json => write_json(
            out,
            &json!({
                "billing": billing_json(billing),
                "partitions": trace.partition_ids(),
                "plan": plan,
                "report": report,
            }),
        ),
        Format::Csv => {
            let mut header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
            header.push("assignment");
            let assignment =
                trace
                    .partition_ids()
                    .iter()
                    .zip(plan.assignment())
                    .map(|(id, row)| {
                        let vms: Vec<String> = row
                            .iter()
                            .map(|v| v.map_or("-".into(), |v| v.to_string()))
                            .collect();
                        format!("{id}={}", vms.join("/"))
                    });
            let mut row: Vec<String> = fields.into_iter().map(|(_, v)| v).collect();
            row.push(joined(assignment));
            write_csv(out, &header, &[row])
        }
        Format::Table => {
            let rows: Vec<Vec<String>> = fields
                .into_iter()
                .filter(|(k, _)| !matches!(*k, "per_superstep_vms" | "superstep_walls_s"))
                .map(|(k, v)| vec![k.to_string(), v])
                .collect();
            write_table(out, &["metric", "value"], &rows)?;
            writeln!(out)?;
            let supersteps: Vec<String> = (0..trace.num_supersteps())
                .map(|s| format!("s{s}"))
                .collect();
            let mut header = vec!["partition"];
            header.extend(supersteps.iter().map(String::as_str));
            let mut rows: Vec<Vec<String>> = trace
                .partition_ids()
                .iter()
                .zip(plan.assignment())
                .map(|(id, row)| {
                    std::iter::once(id.clone())
                        .chain(row.iter().map(|&v| vm_cell(v)))
                        .collect()
                })
                .collect();
            rows.push(
                std::iter::once("vms".to_string())
                    .chain(report.per_superstep_vm_counts.iter().map(|c| c.to_string()))
                    .collect(),
            );
            rows.push(
                std::iter::once("wall_s".to_string())
                    .chain(report.superstep_walls.iter().map(|w| w.to_string()))
                    .collect(),
            );
            write_table(out, &header, &rows)
        }
    }
}

const COMPARE_HEADER: [&str; 10] = [
    "strategy",
    "vms",
    "makespan_s",
    "billed_quanta",
    "billed_cost",
    "gamma_min",
    "gamma_max",
    "core_secs",
    "under_utilization_core_secs",
    "restarts",
];

pub fn compare(
    out: &mut dyn Write,
    format: Format,
    reports: &[CostReport],
    billing: &BillingPolicy,
) -> io::Result<()> {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.strategy.to_string(),
                r.num_vms.to_string(),
                r.makespan.to_string(),
                r.billed_quanta.to_string(),
                r.billed_cost.to_string(),
                r.gamma_min.to_string(),
                r.gamma_max.to_string(),
                r.provisioned_core.to_string(),
                r.under_utilization_core.to_string(),
                r.restarts.to_string(),
            ]
        })
        .collect();
    match format {
        Format::Json => write_json(
            out,
            &json!({ "billing": billing_json(billing), "reports": reports }),
        ),
        Format::Csv => write_csv(out, &COMPARE_HEADER, &rows),
        Format::Table => write_table(out, &COMPARE_HEADER, &rows),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub superstep: usize,
    pub wall_seconds: f64,
    pub active_vms: usize,
    pub busy_core_seconds: f64,
    /// Busy share of the core time held by the active VMs.
    pub utilization: f64,
}

pub fn series(plan: &PlacementPlan, schedule: &VmUsageSchedule) -> Vec<SeriesPoint> {
    schedule
        .superstep_walls
        .iter()
        .enumerate()
        .map(|(s, &wall)| {
            let busy: Millis = schedule
                .vms
                .iter()
                .map(|vm| vm.slots[s].busy + vm.slots[s].transfer)
                .sum();
            let active = plan.active_vms(s).len();
            let held = wall.0 * active as u64;
            SeriesPoint {
                superstep: s,
                wall_seconds: wall.as_secs_f64(),
                active_vms: active,
                busy_core_seconds: busy.as_secs_f64(),
                utilization: if held == 0 {
                    0.0
                } else {
                    busy.0 as f64 / held as f64
                },
            }
        })
        .collect()
}

pub fn write_series(out: &mut dyn Write, format: Format, points: &[SeriesPoint]) -> io::Result<()> {
    let header = [
        "superstep",
        "wall_seconds",
        "active_vms",
        "busy_core_seconds",
        "utilization",
    ];
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.superstep.to_string(),
                format!("{:.3}", p.wall_seconds),
                p.active_vms.to_string(),
                format!("{:.3}", p.busy_core_seconds),
                format!("{:.4}", p.utilization),
            ]
        })
        .collect();
    match format {
        Format::Json => write_json(out, &points),
        Format::Csv => write_csv(out, &header, &rows),
        Format::Table => write_table(out, &header, &rows),
    }
}
