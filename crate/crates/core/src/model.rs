//! Problem data model: per-partition timing traces, billing parameters,
//! placement plans and the per-superstep baseline quantities that every
//! strategy consumes.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A duration in whole milliseconds.
///
/// All compute and transfer times are integral so that billing ceilings are
/// exact.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Millis(pub u64);

impl Millis {
    pub const ZERO: Millis = Millis(0);

    pub fn from_secs(secs: u64) -> Self {
        Millis(secs * 1000)
    }

    /// Rounds a nonnegative number of seconds to the nearest millisecond.
    pub fn from_secs_f64(secs: f64) -> Option<Self> {
        if secs.is_finite() && secs >= 0.0 {
            Some(Millis((secs * 1000.0).round() as u64))
        } else {
            None
        }
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Number of whole quanta needed to cover this duration, i.e. `⌈self / quantum⌉`.
    pub fn quanta(self, quantum: Millis) -> u64 {
        debug_assert!(quantum.0 > 0);
        self.0.div_ceil(quantum.0)
    }

    pub fn saturating_sub(self, rhs: Millis) -> Millis {
        Millis(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Millis {
    type Output = Millis;
    fn add(self, rhs: Millis) -> Millis {
        Millis(self.0 + rhs.0)
    }
}

impl AddAssign for Millis {
    fn add_assign(&mut self, rhs: Millis) {
        self.0 += rhs.0;
    }
}

impl Sub for Millis {
    type Output = Millis;
    fn sub(self, rhs: Millis) -> Millis {
        Millis(self.0 - rhs.0)
    }
}

impl Sum for Millis {
    fn sum<I: Iterator<Item = Millis>>(iter: I) -> Millis {
        iter.fold(Millis::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Millis> for Millis {
    fn sum<I: Iterator<Item = &'a Millis>>(iter: I) -> Millis {
        iter.copied().sum()
    }
}

impl fmt::Display for Millis {
    /// Seconds with millisecond precision, e.g. `18.250`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{location}: negative time {value}")]
    NegativeTime { location: String, value: i64 },
    #[error("{location}: negative size {value}")]
    NegativeSize { location: String, value: i64 },
    #[error("{location}: dimension mismatch, expected {expected} but found {found}")]
    DimensionMismatch {
        location: String,
        expected: usize,
        found: usize,
    },
    #[error("partitions[{row}].id: duplicate partition id {id:?}")]
    DuplicatePartitionId { row: usize, id: String },
    #[error("partitions[{row}].size_bytes: sizes must be given for every partition or for none")]
    PartialSizes { row: usize },
    #[error("superstep {superstep}: trailing empty superstep")]
    TrailingEmptySuperstep { superstep: usize },
    #[error("superstep {superstep}: no active partition")]
    EmptySuperstep { superstep: usize },
    #[error("trace has no partitions")]
    NoPartitions,
    #[error("trace has no supersteps")]
    NoSupersteps,
    #[error("billing.{field}: {message}")]
    InvalidBilling {
        field: &'static str,
        message: String,
    },
    #[error("superstep {superstep} out of range (trace has {num_supersteps})")]
    SuperstepOutOfRange {
        superstep: usize,
        num_supersteps: usize,
    },
}

/// The time function: compute time of every partition in every superstep on
/// an exclusive 1-core VM. A zero entry means the partition is inactive.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingTrace {
    ids: Vec<String>,
    sizes: Option<Vec<u64>>,
    times: Vec<Vec<Millis>>,
    num_supersteps: usize,
    billing: Option<BillingPolicy>,
}

impl TimingTrace {
    /// Builds a trace from per-partition rows of superstep times.
    ///
    /// `sizes`, when given, must have one entry per partition. Every superstep
    /// must have at least one active partition.
    pub fn new(
        ids: Vec<String>,
        times: Vec<Vec<Millis>>,
        sizes: Option<Vec<u64>>,
    ) -> Result<Self, TraceError> {
        if times.is_empty() {
            return Err(TraceError::NoPartitions);
        }
        if ids.len() != times.len() {
            return Err(TraceError::DimensionMismatch {
                location: "partition ids".into(),
                expected: times.len(),
                found: ids.len(),
            });
        }
        let m = times[0].len();
        if m == 0 {
            return Err(TraceError::NoSupersteps);
        }
        for (row, r) in times.iter().enumerate() {
            if r.len() != m {
                return Err(TraceError::DimensionMismatch {
                    location: format!("partitions[{row}].times_ms"),
                    expected: m,
                    found: r.len(),
                });
            }
        }
        if let Some(sizes) = &sizes {
            if sizes.len() != times.len() {
                return Err(TraceError::DimensionMismatch {
                    location: "partition sizes".into(),
                    expected: times.len(),
                    found: sizes.len(),
                });
            }
        }
        let mut seen = HashSet::new();
        for (row, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(TraceError::DuplicatePartitionId {
                    row,
                    id: id.clone(),
                });
            }
        }
        for s in 0..m {
            if times.iter().all(|r| r[s].is_zero()) {
                let trailing = (s..m).all(|t| times.iter().all(|r| r[t].is_zero()));
                return Err(if trailing {
                    TraceError::TrailingEmptySuperstep { superstep: s }
                } else {
                    TraceError::EmptySuperstep { superstep: s }
                });
            }
        }
        Ok(TimingTrace {
            ids,
            sizes,
            times,
            num_supersteps: m,
            billing: None,
        })
    }

    /// Convenience constructor from whole-second rows, with ids `P1..Pn`.
    pub fn from_secs(rows: &[&[u64]]) -> Result<Self, TraceError> {
        let ids = (1..=rows.len()).map(|i| format!("P{i}")).collect();
        let times = rows
            .iter()
            .map(|r| r.iter().map(|&t| Millis::from_secs(t)).collect())
            .collect();
        TimingTrace::new(ids, times, None)
    }

    pub fn with_billing(mut self, billing: BillingPolicy) -> Self {
        self.billing = Some(billing);
        self
    }

    pub fn with_sizes(mut self, sizes: Vec<u64>) -> Result<Self, TraceError> {
        if sizes.len() != self.num_partitions() {
            return Err(TraceError::DimensionMismatch {
                location: "partition sizes".into(),
                expected: self.num_partitions(),
                found: sizes.len(),
            });
        }
        self.sizes = Some(sizes);
        Ok(self)
    }

    pub fn num_partitions(&self) -> usize {
        self.times.len()
    }

    pub fn num_supersteps(&self) -> usize {
        self.num_supersteps
    }

    pub fn partition_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn partition_sizes(&self) -> Option<&[u64]> {
        self.sizes.as_deref()
    }

    pub fn billing(&self) -> Option<&BillingPolicy> {
        self.billing.as_ref()
    }

    /// Time `partition` computes in `superstep` on a VM of its own.
    pub fn time(&self, partition: usize, superstep: usize) -> Millis {
        self.times[partition][superstep]
    }

    pub fn row(&self, partition: usize) -> &[Millis] {
        &self.times[partition]
    }

    pub fn is_active(&self, partition: usize, superstep: usize) -> bool {
        !self.times[partition][superstep].is_zero()
    }

    /// Partitions with nonzero time in `superstep`, in index order.
    pub fn active_partitions(&self, superstep: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_partitions()).filter(move |&i| self.is_active(i, superstep))
    }

    /// Largest single-partition time in `superstep`.
    pub fn tau_max(&self, superstep: usize) -> Millis {
        self.times
            .iter()
            .map(|r| r[superstep])
            .max()
            .unwrap_or_default()
    }

    /// Total compute across all partitions in `superstep`.
    pub fn superstep_work(&self, superstep: usize) -> Millis {
        self.times.iter().map(|r| r[superstep]).sum()
    }

    /// Total compute over the whole trace.
    pub fn total_work(&self) -> Millis {
        self.times.iter().flatten().sum()
    }
}

/// Sum over supersteps of the largest partition time: the makespan reached
/// when every partition has an exclusive VM.
pub fn minimum_makespan(trace: &TimingTrace) -> Millis {
    (0..trace.num_supersteps()).map(|s| trace.tau_max(s)).sum()
}

/// Per-VM quantized pricing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BillingPolicy {
    /// Smallest billed unit of VM time.
    pub quantum: Millis,
    /// Price of one VM for one quantum.
    pub price_per_quantum: f64,
    /// Shared-store bandwidth used by data-movement accounting.
    pub bandwidth_bytes_per_second: u64,
}

impl BillingPolicy {
    /// Arbitrary default for the shared-store bandwidth: 100 MB/s.
    pub const DEFAULT_BANDWIDTH: u64 = 100_000_000;

    pub fn new(
        quantum: Millis,
        price_per_quantum: f64,
        bandwidth_bytes_per_second: u64,
    ) -> Result<Self, TraceError> {
        if quantum.is_zero() {
            return Err(TraceError::InvalidBilling {
                field: "quantum_seconds",
                message: "must be positive".into(),
            });
        }
        if !(price_per_quantum.is_finite() && price_per_quantum >= 0.0) {
            return Err(TraceError::InvalidBilling {
                field: "price_per_quantum",
                message: format!("must be a nonnegative number, got {price_per_quantum}"),
            });
        }
        if bandwidth_bytes_per_second == 0 {
            return Err(TraceError::InvalidBilling {
                field: "bandwidth_bytes_per_second",
                message: "must be positive".into(),
            });
        }
        Ok(BillingPolicy {
            quantum,
            price_per_quantum,
            bandwidth_bytes_per_second,
        })
    }

    /// Per-minute billing at unit price.
    pub fn per_minute() -> Self {
        BillingPolicy {
            quantum: Millis::from_secs(60),
            price_per_quantum: 1.0,
            bandwidth_bytes_per_second: Self::DEFAULT_BANDWIDTH,
        }
    }

    pub fn with_quantum(self, quantum: Millis) -> Result<Self, TraceError> {
        BillingPolicy::new(
            quantum,
            self.price_per_quantum,
            self.bandwidth_bytes_per_second,
        )
    }
}

impl Default for BillingPolicy {
    fn default() -> Self {
        BillingPolicy::per_minute()
    }
}

/// The placement strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Default,
    Opt,
    Ffd,
    Mfp,
    Lap,
    OptDm,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Default,
        Strategy::Opt,
        Strategy::OptDm,
        Strategy::Ffd,
        Strategy::Mfp,
        Strategy::Lap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Default => "default",
            Strategy::Opt => "opt",
            Strategy::Ffd => "ffd",
            Strategy::Mfp => "mfp",
            Strategy::Lap => "lap",
            Strategy::OptDm => "opt-dm",
        }
    }

    /// Strategies that never move a partition once placed.
    pub fn is_pinned(self) -> bool {
        matches!(self, Strategy::Mfp | Strategy::Lap)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

/// How VMs of a plan are kept running for billing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provisioning {
    /// One VM per partition (VM `i` hosts partition `i`), all running for
    /// the whole application.
    Static,
    /// VMs are started and stopped by the activation policy.
    Elastic,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("plan covers {found} partitions but the trace has {expected}")]
    PartitionCount { expected: usize, found: usize },
    #[error(
        "plan covers {found} supersteps for partition {partition} but the trace has {expected}"
    )]
    SuperstepCount {
        partition: usize,
        expected: usize,
        found: usize,
    },
    #[error("partition {partition} is active in superstep {superstep} but unassigned")]
    Unassigned { partition: usize, superstep: usize },
    #[error("partition {partition} is inactive in superstep {superstep} but assigned to VM {vm}")]
    AssignedWhileInactive {
        partition: usize,
        superstep: usize,
        vm: usize,
    },
    #[error("VM {vm} is never used; VM indices must be dense")]
    SparseVmIndex { vm: usize },
    #[error("VM {vm} out of range for a static plan with {num_vms} VMs")]
    StaticVmOutOfRange { vm: usize, num_vms: usize },
}

/// A mapping of every active (partition, superstep) pair onto a VM index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlacementPlan {
    strategy: Strategy,
    provisioning: Provisioning,
    assignment: Vec<Vec<Option<usize>>>,
    num_vms: usize,
    fallback_supersteps: Vec<usize>,
}

impl PlacementPlan {
    /// Validates `assignment[partition][superstep]` against `trace`.
    ///
    /// Elastic plans must use dense VM indices. Static plans always have one
    /// VM per partition, used or not.
    pub fn new(
        strategy: Strategy,
        provisioning: Provisioning,
        assignment: Vec<Vec<Option<usize>>>,
        trace: &TimingTrace,
    ) -> Result<Self, PlanError> {
        if assignment.len() != trace.num_partitions() {
            return Err(PlanError::PartitionCount {
                expected: trace.num_partitions(),
                found: assignment.len(),
            });
        }
        let mut used = BTreeSet::new();
        for (i, row) in assignment.iter().enumerate() {
            if row.len() != trace.num_supersteps() {
                return Err(PlanError::SuperstepCount {
                    partition: i,
                    expected: trace.num_supersteps(),
                    found: row.len(),
                });
            }
            for (s, vm) in row.iter().enumerate() {
                match (trace.is_active(i, s), vm) {
                    (true, None) => {
                        return Err(PlanError::Unassigned {
                            partition: i,
                            superstep: s,
                        })
                    }
                    (false, Some(vm)) => {
                        return Err(PlanError::AssignedWhileInactive {
                            partition: i,
                            superstep: s,
                            vm: *vm,
                        })
                    }
                    (true, Some(vm)) => {
                        used.insert(*vm);
                    }
                    (false, None) => {}
                }
            }
        }
        let num_vms = match provisioning {
            Provisioning::Static => {
                let n = trace.num_partitions();
                if let Some(&vm) = used.range(n..).next() {
                    return Err(PlanError::StaticVmOutOfRange { vm, num_vms: n });
                }
                n
            }
            Provisioning::Elastic => {
                let num_vms = used.last().map_or(0, |v| v + 1);
                if let Some(vm) = (0..num_vms).find(|v| !used.contains(v)) {
                    return Err(PlanError::SparseVmIndex { vm });
                }
                num_vms
            }
        };
        Ok(PlacementPlan {
            strategy,
            provisioning,
            assignment,
            num_vms,
            fallback_supersteps: Vec::new(),
        })
    }

    pub(crate) fn with_fallbacks(mut self, supersteps: Vec<usize>) -> Self {
        self.fallback_supersteps = supersteps;
        self
    }

    pub(crate) fn relabel(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn provisioning(&self) -> Provisioning {
        self.provisioning
    }

    pub fn num_vms(&self) -> usize {
        self.num_vms
    }

    pub fn num_partitions(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_supersteps(&self) -> usize {
        self.assignment.first().map_or(0, Vec::len)
    }

    pub fn assignment(&self) -> &[Vec<Option<usize>>] {
        &self.assignment
    }

    /// VM hosting `partition` in `superstep`, or `None` when it is inactive.
    pub fn vm_of(&self, partition: usize, superstep: usize) -> Option<usize> {
        self.assignment[partition][superstep]
    }

    /// Presence function `M̂(i, s, j)`.
    pub fn is_present(&self, partition: usize, superstep: usize, vm: usize) -> bool {
        self.vm_of(partition, superstep) == Some(vm)
    }

    /// Supersteps where an exact search gave up and kept a heuristic packing.
    pub fn fallback_supersteps(&self) -> &[usize] {
        &self.fallback_supersteps
    }

    pub fn is_optimal(&self) -> bool {
        self.fallback_supersteps.is_empty()
    }

    /// VMs hosting at least one partition in `superstep`.
    pub fn busy_vms(&self, superstep: usize) -> BTreeSet<usize> {
        self.assignment
            .iter()
            .filter_map(|r| r[superstep])
            .collect()
    }

    /// The VMs billed as active in `superstep`. For statically
    /// provisioned plans that is every VM.
    pub fn active_vms(&self, superstep: usize) -> BTreeSet<usize> {
        match self.provisioning {
            Provisioning::Static => (0..self.num_vms).collect(),
            Provisioning::Elastic => self.busy_vms(superstep),
        }
    }

    /// Partitions placed on each VM in `superstep`, indexed by VM.
    pub fn partitions_by_vm(&self, superstep: usize) -> Vec<Vec<usize>> {
        let mut by_vm = vec![Vec::new(); self.num_vms];
        for (i, row) in self.assignment.iter().enumerate() {
            if let Some(vm) = row[superstep] {
                by_vm[vm].push(i);
            }
        }
        by_vm
    }

    /// Compute load of every VM in `superstep`.
    pub fn vm_loads(&self, trace: &TimingTrace, superstep: usize) -> Vec<Millis> {
        let mut loads = vec![Millis::ZERO; self.num_vms];
        for (i, row) in self.assignment.iter().enumerate() {
            if let Some(vm) = row[superstep] {
                loads[vm] += trace.time(i, superstep);
            }
        }
        loads
    }

    /// First (partition, superstep) where a partition is found on a VM other
    /// than the one it was first placed on.
    pub fn first_pinning_violation(&self) -> Option<(usize, usize)> {
        for (i, row) in self.assignment.iter().enumerate() {
            let mut home = None;
            for (s, vm) in row.iter().enumerate() {
                if let Some(vm) = vm {
                    match home {
                        None => home = Some(*vm),
                        Some(h) if h != *vm => return Some((i, s)),
                        Some(_) => {}
                    }
                }
            }
        }
        None
    }
}

/// Baseline quantities of one superstep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuperstepProfile {
    pub superstep: usize,
    pub tau_max: Millis,
    pub active_partitions: BTreeSet<usize>,
    /// Filled in by [`SuperstepProfile::with_plan`].
    pub active_vms: Option<BTreeSet<usize>>,
}

impl SuperstepProfile {
    pub fn with_plan(mut self, plan: &PlacementPlan) -> Self {
        self.active_vms = Some(plan.active_vms(self.superstep));
        self
    }
}

pub fn superstep_profile(
    trace: &TimingTrace,
    superstep: usize,
) -> Result<SuperstepProfile, TraceError> {
    if superstep >= trace.num_supersteps() {
        return Err(TraceError::SuperstepOutOfRange {
            superstep,
            num_supersteps: trace.num_supersteps(),
        });
    }
    Ok(SuperstepProfile {
        superstep,
        tau_max: trace.tau_max(superstep),
        active_partitions: trace.active_partitions(superstep).collect(),
        active_vms: None,
    })
}
