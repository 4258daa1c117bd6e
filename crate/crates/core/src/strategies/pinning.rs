//! Strategies that pin a partition to the first VM it lands on.
//!
//! Both walk the supersteps in order. At superstep `s` the VM capacity is
//! the larger of the biggest partition time and the biggest load already
//! pinned to one VM. Pinned partitions stay put; the remaining active ones
//! are placed largest first. Max Fit (`mfp`) tries the VM with the most room
//! left. Lookahead (`lap`) scans VMs by ascending pinned load in the next
//! superstep and takes the first one with room now.

use std::collections::BTreeSet;

use crate::model::{Millis, PlacementPlan, Provisioning, Strategy, TimingTrace};

use super::binpack;

/// Packing state of one VM during a superstep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VmLoadState {
    pub vm_index: usize,
    /// Capacity left in the current superstep.
    pub remaining_capacity: Millis,
    pub pinned_partitions: BTreeSet<usize>,
    /// Load of the pinned partitions in the next superstep.
    pub next_superstep_load: Millis,
}

/// Orderings used by the lookahead strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankTable {
    /// Active partitions in descending order of their current time, ties by
    /// partition index. Position in this list is the current rank.
    pub current_rank: Vec<usize>,
    /// VM indices in ascending order of next-superstep load, ties by VM
    /// index. Position in this list is the forward rank.
    pub forward_rank: Vec<usize>,
}

impl RankTable {
    pub fn new(trace: &TimingTrace, superstep: usize, vms: &[VmLoadState]) -> Self {
        let mut items: Vec<_> = trace
            .active_partitions(superstep)
            .map(|i| (i, trace.time(i, superstep)))
            .collect();
        binpack::sort_decreasing(&mut items);
        RankTable {
            current_rank: items.into_iter().map(|(i, _)| i).collect(),
            forward_rank: forward_order(vms),
        }
    }

    pub fn current_rank_of(&self, partition: usize) -> Option<usize> {
        self.current_rank.iter().position(|&p| p == partition)
    }

    pub fn forward_rank_of(&self, vm: usize) -> Option<usize> {
        self.forward_rank.iter().position(|&v| v == vm)
    }
}

fn forward_order(vms: &[VmLoadState]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vms.len()).collect();
    order.sort_by_key(|&j| (vms[j].next_superstep_load, j));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VmChoice {
    MaxFit,
    Lookahead,
}

/// Max Fit with pinning.
pub fn place_mfp(trace: &TimingTrace) -> PlacementPlan {
    place_pinned(trace, VmChoice::MaxFit)
}

/// First fit by next-superstep load, with pinning. The last superstep has
/// no lookahead and every VM counts as load 0 there.
pub fn place_lap(trace: &TimingTrace) -> PlacementPlan {
    place_pinned(trace, VmChoice::Lookahead)
}

#[allow(clippy::needless_range_loop)]
fn place_pinned(trace: &TimingTrace, choice: VmChoice) -> PlacementPlan {
    let n = trace.num_partitions();
    let m = trace.num_supersteps();
    let mut home: Vec<Option<usize>> = vec![None; n];
    let mut vms: Vec<VmLoadState> = Vec::new();
    let mut assignment = vec![vec![None; m]; n];

    let next_time = |i: usize, s: usize| {
        if s + 1 < m {
            trace.time(i, s + 1)
        } else {
            Millis::ZERO
        }
    };

    for s in 0..m {
        let mut pinned_load = vec![Millis::ZERO; vms.len()];
        for i in trace.active_partitions(s) {
            if let Some(j) = home[i] {
                pinned_load[j] += trace.time(i, s);
                assignment[i][s] = Some(j);
            }
        }
        let capacity = pinned_load
            .iter()
            .copied()
            .chain(std::iter::once(trace.tau_max(s)))
            .max()
            .unwrap_or_default();
        for (vm, load) in vms.iter_mut().zip(&pinned_load) {
            vm.remaining_capacity = capacity - *load;
            vm.next_superstep_load = vm.pinned_partitions.iter().map(|&i| next_time(i, s)).sum();
        }

        let table = RankTable::new(trace, s, &vms);
        for i in table.current_rank {
            if home[i].is_some() {
                continue;
            }
            let tau = trace.time(i, s);
            let target = match choice {
                VmChoice::MaxFit => vms
                    .iter()
                    .enumerate()
                    .max_by(|(a, x), (b, y)| {
                        x.remaining_capacity
                            .cmp(&y.remaining_capacity)
                            .then(b.cmp(a))
                    })
                    .filter(|(_, vm)| vm.remaining_capacity >= tau)
                    .map(|(j, _)| j),
                VmChoice::Lookahead => forward_order(&vms)
                    .into_iter()
                    .find(|&j| vms[j].remaining_capacity >= tau),
            };
            let j = target.unwrap_or_else(|| {
                vms.push(VmLoadState {
                    vm_index: vms.len(),
                    remaining_capacity: capacity,
                    pinned_partitions: BTreeSet::new(),
                    next_superstep_load: Millis::ZERO,
                });
                vms.len() - 1
            });
            let vm = &mut vms[j];
            vm.remaining_capacity = vm.remaining_capacity - tau;
            vm.pinned_partitions.insert(i);
            vm.next_superstep_load += next_time(i, s);
            home[i] = Some(j);
            assignment[i][s] = Some(j);
        }
    }

    let strategy = match choice {
        VmChoice::MaxFit => Strategy::Mfp,
        VmChoice::Lookahead => Strategy::Lap,
    };
    PlacementPlan::new(strategy, Provisioning::Elastic, assignment, trace)
        .expect("pinned placement covers every active partition")
}
