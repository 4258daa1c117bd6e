//! Turns a placement into makespan, a VM on/off schedule, a quantized bill,
//! the bill's lower and upper bounds, and utilization figures.
//!
//! Every superstep ends at a barrier, so its wall duration is the longest VM
//! time in it. A VM session is billed for the walls of every superstep it
//! spans, including idle supersteps it is kept alive through, rounded up to
//! whole quanta.

use serde::Serialize;
use thiserror::Error;

use crate::model::{BillingPolicy, Millis, PlacementPlan, Provisioning, Strategy, TimingTrace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("plan has {plan} {what} but the trace has {trace}")]
    DimensionMismatch {
        what: &'static str,
        plan: usize,
        trace: usize,
    },
    #[error("plan and trace disagree on whether partition {partition} is active in superstep {superstep}")]
    ActivityMismatch { partition: usize, superstep: usize },
    #[error("data movement needs partition sizes but the trace has none")]
    MissingSizes,
}

/// Shared-store transfer accounting. When enabled, every partition placed on
/// a VM is copied in before the superstep and back out after it, and the VM
/// is busy for `(in + out) / bandwidth` on top of its compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DataMovementModel {
    pub enabled: bool,
    pub bandwidth_bytes_per_second: u64,
    /// Only charge a partition in supersteps where it lands on a different VM
    /// than in its previous active superstep.
    pub only_on_migration: bool,
}

impl DataMovementModel {
    pub fn disabled() -> Self {
        DataMovementModel {
            enabled: false,
            bandwidth_bytes_per_second: BillingPolicy::DEFAULT_BANDWIDTH,
            only_on_migration: false,
        }
    }

    pub fn shared_store(bandwidth_bytes_per_second: u64) -> Self {
        assert!(bandwidth_bytes_per_second > 0, "bandwidth must be positive");
        DataMovementModel {
            enabled: true,
            bandwidth_bytes_per_second,
            only_on_migration: false,
        }
    }

    pub fn with_only_on_migration(mut self, only_on_migration: bool) -> Self {
        self.only_on_migration = only_on_migration;
        self
    }

    /// Time to move `bytes`, rounded up to the millisecond.
    pub fn transfer_time(&self, bytes: u64) -> Millis {
        if !self.enabled || bytes == 0 {
            return Millis::ZERO;
        }
        let ms = (bytes as u128 * 1000).div_ceil(self.bandwidth_bytes_per_second as u128);
        Millis(ms as u64)
    }
}

impl Default for DataMovementModel {
    fn default() -> Self {
        DataMovementModel::disabled()
    }
}

/// Compute and transfer time of every VM in every superstep.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Workload {
    compute: Vec<Vec<Millis>>,
    transfer: Vec<Vec<Millis>>,
    walls: Vec<Millis>,
}

fn check_plan(plan: &PlacementPlan, trace: &TimingTrace) -> Result<(), CostError> {
    if plan.num_partitions() != trace.num_partitions() {
        return Err(CostError::DimensionMismatch {
            what: "partitions",
            plan: plan.num_partitions(),
            trace: trace.num_partitions(),
        });
    }
    if plan.num_supersteps() != trace.num_supersteps() {
        return Err(CostError::DimensionMismatch {
            what: "supersteps",
            plan: plan.num_supersteps(),
            trace: trace.num_supersteps(),
        });
    }
    for (i, row) in plan.assignment().iter().enumerate() {
        for (s, vm) in row.iter().enumerate() {
            if vm.is_some() != trace.is_active(i, s) {
                return Err(CostError::ActivityMismatch {
                    partition: i,
                    superstep: s,
                });
            }
        }
    }
    Ok(())
}

fn workload(
    plan: &PlacementPlan,
    trace: &TimingTrace,
    dm: &DataMovementModel,
) -> Result<Workload, CostError> {
    check_plan(plan, trace)?;
    let sizes = match (dm.enabled, trace.partition_sizes()) {
        (false, _) => None,
        (true, Some(sizes)) => Some(sizes),
        (true, None) => return Err(CostError::MissingSizes),
    };
    let m = trace.num_supersteps();
    let l = plan.num_vms();
    let mut compute = vec![vec![Millis::ZERO; l]; m];
    let mut transfer = vec![vec![Millis::ZERO; l]; m];
    let mut last_vm: Vec<Option<usize>> = vec![None; trace.num_partitions()];
    for s in 0..m {
        let mut bytes = vec![0u64; l];
        for (i, row) in plan.assignment().iter().enumerate() {
            let Some(vm) = row[s] else { continue };
            compute[s][vm] += trace.time(i, s);
            if let Some(sizes) = sizes {
                let moved = !dm.only_on_migration || last_vm[i].is_some_and(|prev| prev != vm);
                if moved {
                    bytes[vm] += 2 * sizes[i];
                }
            }
            last_vm[i] = Some(vm);
        }
        for (vm, b) in bytes.into_iter().enumerate() {
            transfer[s][vm] = dm.transfer_time(b);
        }
    }
    let walls = (0..m)
        .map(|s| {
            (0..l)
                .map(|j| compute[s][j] + transfer[s][j])
                .max()
                .unwrap_or_default()
        })
        .collect();
    Ok(Workload {
        compute,
        transfer,
        walls,
    })
}

/// Sum over supersteps of the longest VM time (transfers included when
/// `dm` is enabled).
pub fn makespan(
    plan: &PlacementPlan,
    trace: &TimingTrace,
    dm: &DataMovementModel,
) -> Result<Millis, CostError> {
    Ok(workload(plan, trace, dm)?.walls.into_iter().sum())
}

/// Wall duration of each superstep under `plan`.
pub fn superstep_walls(
    plan: &PlacementPlan,
    trace: &TimingTrace,
    dm: &DataMovementModel,
) -> Result<Vec<Millis>, CostError> {
    Ok(workload(plan, trace, dm)?.walls)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VmState {
    Busy,
    IdleRetained,
    Off,
}

/// What one VM does during one superstep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlotUsage {
    pub state: VmState,
    #[serde(rename = "busy_ms")]
    pub busy: Millis,
    #[serde(rename = "transfer_ms")]
    pub transfer: Millis,
}

/// A maximal run of supersteps during which a VM stays on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Session {
    pub first_superstep: usize,
    pub last_superstep: usize,
    #[serde(rename = "wall_ms")]
    pub wall: Millis,
}

/// A run of consecutive supersteps in the same state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub first_superstep: usize,
    pub last_superstep: usize,
    pub state: VmState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VmTimeline {
    pub slots: Vec<SlotUsage>,
    pub sessions: Vec<Session>,
}

impl VmTimeline {
    /// Off-to-on transitions after the first start.
    pub fn restarts(&self) -> usize {
        self.sessions.len().saturating_sub(1)
    }

    pub fn intervals(&self) -> Vec<Interval> {
        let mut out: Vec<Interval> = Vec::new();
        for (s, slot) in self.slots.iter().enumerate() {
            match out.last_mut() {
                Some(iv) if iv.state == slot.state => iv.last_superstep = s,
                _ => out.push(Interval {
                    first_superstep: s,
                    last_superstep: s,
                    state: slot.state,
                }),
            }
        }
        out
    }

    pub fn billed_quanta(&self, quantum: Millis) -> u64 {
        self.sessions.iter().map(|s| s.wall.quanta(quantum)).sum()
    }
}

/// Per-VM on/off timeline chosen by the activation policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VmUsageSchedule {
    #[serde(rename = "superstep_walls_ms")]
    pub superstep_walls: Vec<Millis>,
    pub vms: Vec<VmTimeline>,
}

impl VmUsageSchedule {
    pub fn restarts(&self) -> usize {
        self.vms.iter().map(VmTimeline::restarts).sum()
    }
}

/// Splits the busy supersteps of one VM into billing sessions.
///
/// Between two busy stretches the VM is either kept on through the idle gap
/// or stopped and started again later. The choice over all gaps minimises the
/// VM's total quanta; among equally cheap choices the one with fewer restarts
/// wins, so a VM is retained whenever that costs nothing extra.
fn choose_sessions(busy: &[bool], walls: &[Millis], quantum: Millis) -> Vec<(usize, usize)> {
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    for (s, &b) in busy.iter().enumerate() {
        if !b {
            continue;
        }
        match blocks.last_mut() {
            Some(last) if last.1 + 1 == s => last.1 = s,
            _ => blocks.push((s, s)),
        }
    }
    if blocks.is_empty() {
        return Vec::new();
    }
    let mut prefix = vec![Millis::ZERO; walls.len() + 1];
    for (s, &w) in walls.iter().enumerate() {
        prefix[s + 1] = prefix[s] + w;
    }
    let span = |first: usize, last: usize| prefix[last + 1] - prefix[first];

    // best[t]: cheapest (quanta, sessions) covering blocks[..t], with the
    // block index where the last session starts.
    let k = blocks.len();
    let mut best: Vec<(u64, usize)> = vec![(0, 0); k + 1];
    let mut start = vec![0usize; k + 1];
    for t in 1..=k {
        let mut candidate: Option<((u64, usize), usize)> = None;
        for i in 0..t {
            let q = span(blocks[i].0, blocks[t - 1].1).quanta(quantum);
            let cost = (best[i].0 + q, best[i].1 + 1);
            if candidate.is_none_or(|(c, _)| cost < c) {
                candidate = Some((cost, i));
            }
        }
        let (cost, i) = candidate.expect("t >= 1");
        best[t] = cost;
        start[t] = i;
    }

    let mut sessions = Vec::new();
    let mut t = k;
    while t > 0 {
        let i = start[t];
        sessions.push((blocks[i].0, blocks[t - 1].1));
        t = i;
    }
    sessions.reverse();
    sessions
}

fn schedule_from_workload(
    plan: &PlacementPlan,
    work: &Workload,
    quantum: Millis,
) -> VmUsageSchedule {
    let m = work.walls.len();
    let mut prefix = vec![Millis::ZERO; m + 1];
    for (s, &w) in work.walls.iter().enumerate() {
        prefix[s + 1] = prefix[s] + w;
    }
    let vms = (0..plan.num_vms())
        .map(|j| {
            let busy: Vec<bool> = (0..m).map(|s| plan.busy_vms(s).contains(&j)).collect();
            let spans = match plan.provisioning() {
                Provisioning::Static => vec![(0, m - 1)],
                Provisioning::Elastic => choose_sessions(&busy, &work.walls, quantum),
            };
            let mut slots: Vec<SlotUsage> = (0..m)
                .map(|s| SlotUsage {
                    state: VmState::Off,
                    busy: work.compute[s][j],
                    transfer: work.transfer[s][j],
                })
                .collect();
            for &(first, last) in &spans {
                for (s, slot) in slots.iter_mut().enumerate().take(last + 1).skip(first) {
                    slot.state = if busy[s] {
                        VmState::Busy
                    } else {
                        VmState::IdleRetained
                    };
                }
            }
            let sessions = spans
                .into_iter()
                .map(|(first, last)| Session {
                    first_superstep: first,
                    last_superstep: last,
                    wall: prefix[last + 1] - prefix[first],
                })
                .collect();
            VmTimeline { slots, sessions }
        })
        .collect();
    VmUsageSchedule {
        superstep_walls: work.walls.clone(),
        vms,
    }
}

/// Applies the activation policy to every VM of `plan`. Statically
/// provisioned plans keep every VM on from the first superstep to the last.
pub fn activation_schedule(
    plan: &PlacementPlan,
    trace: &TimingTrace,
    billing: &BillingPolicy,
    dm: &DataMovementModel,
) -> Result<VmUsageSchedule, CostError> {
    let work = workload(plan, trace, dm)?;
    Ok(schedule_from_workload(plan, &work, billing.quantum))
}

/// The schedule with shared-store transfers charged at the billing policy's
/// bandwidth. On an `opt` plan this is the OPT-DM evaluation.
pub fn apply_data_movement(
    plan: &PlacementPlan,
    trace: &TimingTrace,
    billing: &BillingPolicy,
    only_on_migration: bool,
) -> Result<VmUsageSchedule, CostError> {
    let dm = DataMovementModel::shared_store(billing.bandwidth_bytes_per_second)
        .with_only_on_migration(only_on_migration);
    activation_schedule(plan, trace, billing, &dm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bill {
    pub billed_quanta: u64,
    pub billed_cost: f64,
}

/// Price times the quanta of every session in `schedule`.
pub fn billed_cost(schedule: &VmUsageSchedule, billing: &BillingPolicy) -> Bill {
    let billed_quanta = schedule
        .vms
        .iter()
        .map(|vm| vm.billed_quanta(billing.quantum))
        .sum();
    Bill {
        billed_quanta,
        billed_cost: billed_quanta as f64 * billing.price_per_quantum,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaBounds {
    pub min_quanta: u64,
    pub max_quanta: u64,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

/// Lower bound: each VM's total busy time rounded up once. Upper bound: every
/// active VM billed separately in every superstep.
pub fn gamma_bounds(
    plan: &PlacementPlan,
    trace: &TimingTrace,
    billing: &BillingPolicy,
    dm: &DataMovementModel,
) -> Result<GammaBounds, CostError> {
    let work = workload(plan, trace, dm)?;
    Ok(bounds_from_workload(plan, &work, billing))
}

fn bounds_from_workload(
    plan: &PlacementPlan,
    work: &Workload,
    billing: &BillingPolicy,
) -> GammaBounds {
    let q = billing.quantum;
    let min_quanta = (0..plan.num_vms())
        .map(|j| {
            work.compute
                .iter()
                .zip(&work.transfer)
                .map(|(c, t)| c[j] + t[j])
                .sum::<Millis>()
                .quanta(q)
        })
        .sum();
    let max_quanta = work
        .walls
        .iter()
        .enumerate()
        .map(|(s, w)| w.quanta(q) * plan.active_vms(s).len() as u64)
        .sum();
    GammaBounds {
        min_quanta,
        max_quanta,
        gamma_min: min_quanta as f64 * billing.price_per_quantum,
        gamma_max: max_quanta as f64 * billing.price_per_quantum,
    }
}

/// Core time reserved for compute and the part of it spent waiting at the
/// barrier, both in core-milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Utilization {
    #[serde(rename = "provisioned_core_ms")]
    pub provisioned: Millis,
    #[serde(rename = "under_utilization_core_ms")]
    pub under_utilization: Millis,
}

/// Wall time times active VMs, summed over supersteps, and that minus the total compute. Idle supersteps a VM
/// is merely kept alive through are not counted.
pub fn utilization_metrics(
    plan: &PlacementPlan,
    trace: &TimingTrace,
    dm: &DataMovementModel,
) -> Result<Utilization, CostError> {
    let work = workload(plan, trace, dm)?;
    Ok(utilization_from_workload(plan, &work, trace))
}

fn utilization_from_workload(
    plan: &PlacementPlan,
    work: &Workload,
    trace: &TimingTrace,
) -> Utilization {
    let provisioned: Millis = work
        .walls
        .iter()
        .enumerate()
        .map(|(s, w)| Millis(w.0 * plan.active_vms(s).len() as u64))
        .sum();
    Utilization {
        provisioned,
        under_utilization: provisioned - trace.total_work(),
    }
}

/// Everything known about one plan's cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub strategy: Strategy,
    pub num_vms: usize,
    pub data_movement: bool,
    #[serde(rename = "makespan_ms")]
    pub makespan: Millis,
    #[serde(rename = "minimum_makespan_ms")]
    pub minimum_makespan: Millis,
    pub billed_quanta: u64,
    pub billed_cost: f64,
    pub gamma_min_quanta: u64,
    pub gamma_max_quanta: u64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    #[serde(rename = "provisioned_core_ms")]
    pub provisioned_core: Millis,
    #[serde(rename = "under_utilization_core_ms")]
    pub under_utilization_core: Millis,
    pub restarts: usize,
    pub per_superstep_vm_counts: Vec<usize>,
    #[serde(rename = "superstep_walls_ms")]
    pub superstep_walls: Vec<Millis>,
}

pub fn evaluate(
    plan: &PlacementPlan,
    trace: &TimingTrace,
    billing: &BillingPolicy,
    dm: &DataMovementModel,
) -> Result<CostReport, CostError> {
    let work = workload(plan, trace, dm)?;
    let schedule = schedule_from_workload(plan, &work, billing.quantum);
    let bill = billed_cost(&schedule, billing);
    let bounds = bounds_from_workload(plan, &work, billing);
    let util = utilization_from_workload(plan, &work, trace);
    Ok(CostReport {
        strategy: plan.strategy(),
        num_vms: plan.num_vms(),
        data_movement: dm.enabled,
        makespan: work.walls.iter().sum(),
        minimum_makespan: crate::model::minimum_makespan(trace),
        billed_quanta: bill.billed_quanta,
        billed_cost: bill.billed_cost,
        gamma_min_quanta: bounds.min_quanta,
        gamma_max_quanta: bounds.max_quanta,
        gamma_min: bounds.gamma_min,
        gamma_max: bounds.gamma_max,
        provisioned_core: util.provisioned,
        under_utilization_core: util.under_utilization,
        restarts: schedule.restarts(),
        per_superstep_vm_counts: (0..trace.num_supersteps())
            .map(|s| plan.active_vms(s).len())
            .collect(),
        superstep_walls: work.walls,
    })
}
