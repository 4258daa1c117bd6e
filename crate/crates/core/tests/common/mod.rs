//! Independent oracles and generators shared by the integration tests.
//!
//! Nothing here calls into the strategy or cost code it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use elastograph::metagraph::{PartitionMap, VertexId};
use elastograph::{Millis, TimingTrace};
use rand::Rng;

/// Random trace with `n` partitions and `m` supersteps. Roughly `density` of
/// the entries are active; every superstep gets at least one active entry.
pub fn random_trace<R: Rng>(rng: &mut R, n: usize, m: usize, density: f64) -> TimingTrace {
    let mut times = vec![vec![Millis::ZERO; m]; n];
    for row in times.iter_mut() {
        for t in row.iter_mut() {
            if rng.gen_bool(density) {
                *t = Millis(rng.gen_range(1..=120_000));
            }
        }
    }
    for s in 0..m {
        if times.iter().all(|r| r[s].is_zero()) {
            let i = rng.gen_range(0..n);
            times[i][s] = Millis(rng.gen_range(1..=120_000));
        }
    }
    let ids = (0..n).map(|i| format!("p{i}")).collect();
    let sizes = (0..n).map(|_| rng.gen_range(0..200_000_000u64)).collect();
    TimingTrace::new(ids, times, Some(sizes)).expect("generator keeps every superstep active")
}

/// Minimum number of bins of `capacity` holding `sizes`, by enumerating every
/// set partition of the items (restricted growth strings).
pub fn brute_force_bins(sizes: &[u64], capacity: u64) -> usize {
    fn go(k: usize, sizes: &[u64], capacity: u64, loads: &mut Vec<u64>, best: &mut usize) {
        if k == sizes.len() {
            *best = (*best).min(loads.len());
            return;
        }
        for b in 0..loads.len() {
            loads[b] += sizes[k];
            if loads[b] <= capacity {
                go(k + 1, sizes, capacity, loads, best);
            }
            loads[b] -= sizes[k];
        }
        loads.push(sizes[k]);
        if sizes[k] <= capacity {
            go(k + 1, sizes, capacity, loads, best);
        }
        loads.pop();
    }
    let mut best = usize::MAX;
    go(0, sizes, capacity, &mut Vec::new(), &mut best);
    best
}

/// Smallest billed quanta for one VM over every on/off labelling of its idle
/// gaps. `busy[s]` marks supersteps with work; `walls[s]` their duration.
pub fn brute_force_vm_quanta(busy: &[bool], walls: &[u64], quantum: u64) -> u64 {
    let first = match busy.iter().position(|&b| b) {
        Some(f) => f,
        None => return 0,
    };
    let last = busy.iter().rposition(|&b| b).unwrap();
    // Each idle superstep strictly inside [first, last] belongs to a gap.
    let mut gaps: Vec<(usize, usize)> = Vec::new();
    let mut s = first;
    while s <= last {
        if !busy[s] {
            let start = s;
            while !busy[s] {
                s += 1;
            }
            gaps.push((start, s - 1));
        } else {
            s += 1;
        }
    }
    let g = gaps.len();
    assert!(g <= 20, "too many gaps for enumeration");
    let mut best = u64::MAX;
    for mask in 0u32..(1 << g) {
        // bit set: keep the VM on through the gap
        let mut on = vec![false; walls.len()];
        on[first..=last].copy_from_slice(&busy[first..=last]);
        for (k, &(a, b)) in gaps.iter().enumerate() {
            if mask & (1 << k) != 0 {
                on[a..=b].fill(true);
            }
        }
        let mut total = 0;
        let mut run = 0u64;
        let mut in_run = false;
        for t in 0..walls.len() {
            if on[t] {
                run += walls[t];
                in_run = true;
            } else if in_run {
                total += run.div_ceil(quantum);
                run = 0;
                in_run = false;
            }
        }
        if in_run {
            total += run.div_ceil(quantum);
        }
        best = best.min(total);
    }
    best
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PinnedRule {
    MaxFit,
    Lookahead,
}

/// Straightforward re-execution of the pinning strategies, recomputing every
/// load from the assignment so far. Returns `assignment[partition][superstep]`.
pub fn simulate_pinned(rows: &[Vec<u64>], rule: PinnedRule) -> Vec<Vec<Option<usize>>> {
    let n = rows.len();
    let m = rows[0].len();
    let mut home: Vec<Option<usize>> = vec![None; n];
    let mut num_vms = 0usize;
    let mut out = vec![vec![None; m]; n];
    for s in 0..m {
        let load_on = |j: usize, home: &[Option<usize>]| -> u64 {
            (0..n)
                .filter(|&i| home[i] == Some(j))
                .map(|i| rows[i][s])
                .sum()
        };
        let tau_max = (0..n).map(|i| rows[i][s]).max().unwrap();
        let pinned_max = (0..num_vms).map(|j| load_on(j, &home)).max().unwrap_or(0);
        let cap = tau_max.max(pinned_max);
        let mut todo: Vec<usize> = (0..n)
            .filter(|&i| rows[i][s] > 0 && home[i].is_none())
            .collect();
        todo.sort_by(|&a, &b| rows[b][s].cmp(&rows[a][s]).then(a.cmp(&b)));
        for i in todo {
            let room: Vec<u64> = (0..num_vms).map(|j| cap - load_on(j, &home)).collect();
            let pick = match rule {
                PinnedRule::MaxFit => {
                    let mut best: Option<usize> = None;
                    for j in 0..num_vms {
                        if best.is_none_or(|b| room[j] > room[b]) {
                            best = Some(j);
                        }
                    }
                    best.filter(|&j| room[j] >= rows[i][s])
                }
                PinnedRule::Lookahead => {
                    let next = |j: usize| -> u64 {
                        if s + 1 == m {
                            0
                        } else {
                            (0..n)
                                .filter(|&p| home[p] == Some(j))
                                .map(|p| rows[p][s + 1])
                                .sum()
                        }
                    };
                    let mut order: Vec<usize> = (0..num_vms).collect();
                    order.sort_by_key(|&j| (next(j), j));
                    order.into_iter().find(|&j| room[j] >= rows[i][s])
                }
            };
            let j = pick.unwrap_or_else(|| {
                num_vms += 1;
                num_vms - 1
            });
            home[i] = Some(j);
        }
        for i in 0..n {
            if rows[i][s] > 0 {
                out[i][s] = home[i];
            }
        }
    }
    out
}

/// Makespan of an assignment: per superstep the largest VM load.
pub fn simulated_makespan(rows: &[Vec<u64>], assignment: &[Vec<Option<usize>>]) -> u64 {
    let m = rows[0].len();
    (0..m)
        .map(|s| {
            let mut loads: HashMap<usize, u64> = HashMap::new();
            for (i, row) in assignment.iter().enumerate() {
                if let Some(j) = row[s] {
                    *loads.entry(j).or_default() += rows[i][s];
                }
            }
            loads.values().copied().max().unwrap_or(0)
        })
        .sum()
}

pub fn rows_of(trace: &TimingTrace) -> Vec<Vec<u64>> {
    (0..trace.num_partitions())
        .map(|i| trace.row(i).iter().map(|t| t.0).collect())
        .collect()
}

/// All-pairs hop distances by Floyd–Warshall over an undirected edge list.
pub fn hop_distances(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(a, b) in edges {
        d[a][b] = Some(1);
        d[b][a] = Some(1);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| x + y < c) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

/// A road-like graph: a `side × side` grid with a share of streets removed,
/// cut into square tiles. Partitions own contiguous bands of tiles, and a
/// few tiles are handed to a random other partition, which splits partitions
/// into several subgraphs the way real partitioners fragment road networks.
pub struct RoadGraph {
    pub edges: Vec<(VertexId, VertexId)>,
    pub partitions: PartitionMap,
    pub num_vertices: u64,
}

pub fn road_graph<R: Rng>(
    rng: &mut R,
    side: u64,
    tile: u64,
    num_partitions: u64,
    drop_prob: f64,
    stray_prob: f64,
) -> RoadGraph {
    let id = |x: u64, y: u64| y * side + x;
    let mut edges = Vec::new();
    for y in 0..side {
        for x in 0..side {
            if x + 1 < side && !rng.gen_bool(drop_prob) {
                edges.push((id(x, y), id(x + 1, y)));
            }
            if y + 1 < side && !rng.gen_bool(drop_prob) {
                edges.push((id(x, y), id(x, y + 1)));
            }
        }
    }
    let tiles = side.div_ceil(tile);
    let mut owner = HashMap::new();
    for ty in 0..tiles {
        for tx in 0..tiles {
            // Bands of tiles in row-major order.
            let band = (ty * tiles + tx) * num_partitions / (tiles * tiles);
            let p = if rng.gen_bool(stray_prob) {
                rng.gen_range(0..num_partitions)
            } else {
                band
            };
            owner.insert((tx, ty), p);
        }
    }
    let mut partitions = PartitionMap::new();
    for y in 0..side {
        for x in 0..side {
            let p = owner[&(x / tile, y / tile)];
            partitions.insert(id(x, y), &format!("part{p:02}")).unwrap();
        }
    }
    RoadGraph {
        edges,
        partitions,
        num_vertices: side * side,
    }
}

pub fn as_set(items: &[usize]) -> BTreeSet<usize> {
    items.iter().copied().collect()
}

/// One synthesized frontier-style trace on a road-like graph: BFS from a
/// random vertex with frontier revisits, partitions sized by local edges.
pub fn road_trace(seed: u64) -> TimingTrace {
    use elastograph::metagraph::{build_metagraph, predict_activation, synthesize_trace};
    use elastograph::metagraph::{ForecastOptions, RevisitMode, DEFAULT_BYTES_PER_EDGE};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let partitions = rng.gen_range(8..=16);
    let g = road_graph(&mut rng, 60, 10, partitions, 0.08, 0.15);
    let mg = build_metagraph(&g.edges, &g.partitions).unwrap();
    let source_vertex = rng.gen_range(0..g.num_vertices);
    let source = mg.subgraph_of(source_vertex).unwrap();
    let opts = ForecastOptions {
        revisit: RevisitMode::FrontierRevisit,
        ..ForecastOptions::default()
    };
    let forecast = predict_activation(&mg, source, &opts).unwrap();
    let est = elastograph::CostEstimator::new(0.2, 0.1, 0.1).unwrap();
    synthesize_trace(&mg, &forecast, &est, DEFAULT_BYTES_PER_EDGE).unwrap()
}

/// Proptest strategy for valid traces of up to `max_n` partitions and
/// `max_m` supersteps, in whole seconds, with sizes.
pub fn arb_trace(
    max_n: usize,
    max_m: usize,
) -> impl proptest::strategy::Strategy<Value = TimingTrace> {
    use proptest::prelude::*;
    (1..=max_n, 1..=max_m)
        .prop_flat_map(|(n, m)| {
            let cell = prop_oneof![1 => Just(0u64), 2 => 1u64..=90];
            (
                proptest::collection::vec(proptest::collection::vec(cell, m), n),
                proptest::collection::vec(0u64..=300_000_000, n),
            )
        })
        .prop_map(|(mut rows, sizes)| {
            let m = rows[0].len();
            for s in 0..m {
                if rows.iter().all(|r| r[s] == 0) {
                    let i = s % rows.len();
                    rows[i][s] = 1 + s as u64;
                }
            }
            let times = rows
                .into_iter()
                .map(|r| r.into_iter().map(Millis::from_secs).collect())
                .collect();
            let ids = (0..sizes.len()).map(|i| format!("p{i}")).collect();
            TimingTrace::new(ids, times, Some(sizes)).unwrap()
        })
}
