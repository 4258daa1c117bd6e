//! Partition placement strategies.
//!
//! Every strategy turns a [`TimingTrace`] into a [`PlacementPlan`]:
//!
//! * `default` gives each partition its own VM for the whole run.
//! * `ffd` and `opt` repack the active partitions of every superstep from
//!   scratch into VMs whose capacity is that superstep's largest partition
//!   time, so the makespan never grows. Bin `k` of every superstep runs on
//!   VM `k`.
//! * `mfp` and `lap` pin a partition to the VM it is first placed on.

pub mod binpack;
mod pinning;

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::model::{PlacementPlan, Provisioning, Strategy, TimingTrace};

pub use pinning::{place_lap, place_mfp, RankTable, VmLoadState};

/// Knobs shared by all strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaceOptions {
    /// Wall-clock budget for the exact search over the whole run.
    pub opt_budget: Duration,
}

impl Default for PlaceOptions {
    fn default() -> Self {
        PlaceOptions {
            opt_budget: Duration::from_secs(10),
        }
    }
}

/// Runs `strategy` on `trace`. `OptDm` produces the same plan as `Opt`; the
/// transfer costs are applied at evaluation time.
pub fn place(strategy: Strategy, trace: &TimingTrace, options: &PlaceOptions) -> PlacementPlan {
    match strategy {
        Strategy::Default => place_default(trace),
        Strategy::Ffd => place_ffd(trace),
        Strategy::Opt => place_opt(trace, options.opt_budget),
        Strategy::OptDm => place_opt(trace, options.opt_budget).relabel(Strategy::OptDm),
        Strategy::Mfp => place_mfp(trace),
        Strategy::Lap => place_lap(trace),
    }
}

/// One exclusive VM per partition.
pub fn place_default(trace: &TimingTrace) -> PlacementPlan {
    let assignment = (0..trace.num_partitions())
        .map(|i| {
            (0..trace.num_supersteps())
                .map(|s| trace.is_active(i, s).then_some(i))
                .collect()
        })
        .collect();
    PlacementPlan::new(Strategy::Default, Provisioning::Static, assignment, trace)
        .expect("identity placement is always valid")
}

fn superstep_items(trace: &TimingTrace, superstep: usize) -> Vec<binpack::Item> {
    trace
        .active_partitions(superstep)
        .map(|i| (i, trace.time(i, superstep)))
        .collect()
}

fn plan_from_bins(
    strategy: Strategy,
    trace: &TimingTrace,
    per_superstep: &[Vec<Vec<usize>>],
) -> PlacementPlan {
    let mut assignment = vec![vec![None; trace.num_supersteps()]; trace.num_partitions()];
    for (s, bins) in per_superstep.iter().enumerate() {
        for (vm, bin) in bins.iter().enumerate() {
            for &i in bin {
                assignment[i][s] = Some(vm);
            }
        }
    }
    PlacementPlan::new(strategy, Provisioning::Elastic, assignment, trace)
        .expect("per-superstep packings cover every active partition")
}

/// First Fit Decreasing in every superstep, bins as large as the
/// superstep's longest partition time.
pub fn place_ffd(trace: &TimingTrace) -> PlacementPlan {
    let bins: Vec<_> = (0..trace.num_supersteps())
        .map(|s| binpack::first_fit_decreasing(&superstep_items(trace, s), trace.tau_max(s)))
        .collect();
    plan_from_bins(Strategy::Ffd, trace, &bins)
}

/// Minimum number of VMs in every superstep, found by exhaustive search.
///
/// The budget is shared by the whole run; a superstep whose search is cut
/// short keeps the best packing found (at worst FFD) and is reported by
/// [`PlacementPlan::fallback_supersteps`].
pub fn place_opt(trace: &TimingTrace, budget: Duration) -> PlacementPlan {
    let deadline = Instant::now() + budget;
    let packings: Vec<_> = (0..trace.num_supersteps())
        .into_par_iter()
        .map(|s| binpack::exact(&superstep_items(trace, s), trace.tau_max(s), Some(deadline)))
        .collect();
    let fallbacks = packings
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.proven_optimal)
        .map(|(s, _)| s)
        .collect();
    let bins: Vec<_> = packings.into_iter().map(|p| p.bins).collect();
    plan_from_bins(Strategy::Opt, trace, &bins).with_fallbacks(fallbacks)
}
