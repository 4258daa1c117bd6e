//! One-dimensional bin packing of partitions into equal-capacity VMs.

use std::time::Instant;

use crate::model::Millis;

/// An item to pack: a partition index and its compute time.
pub type Item = (usize, Millis);

/// Sorts items by descending size, ties by ascending partition index.
pub fn sort_decreasing(items: &mut [Item]) {
    items.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// First Fit Decreasing: each item, largest first, goes to the first bin with
/// enough room, otherwise to a new bin.
///
/// Bins are returned in opening order; each lists partition indices.
pub fn first_fit_decreasing(items: &[Item], capacity: Millis) -> Vec<Vec<usize>> {
    let mut items = items.to_vec();
    sort_decreasing(&mut items);
    let mut free: Vec<Millis> = Vec::new();
    let mut bins: Vec<Vec<usize>> = Vec::new();
    for (p, size) in items {
        debug_assert!(size <= capacity, "item larger than capacity");
        match free.iter().position(|&f| f >= size) {
            Some(b) => {
                free[b] = free[b] - size;
                bins[b].push(p);
            }
            None => {
                free.push(capacity.saturating_sub(size));
                bins.push(vec![p]);
            }
        }
    }
    bins
}

/// Result of an exact packing search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactPacking {
    pub bins: Vec<Vec<usize>>,
    /// False when the deadline expired before the search completed; `bins`
    /// then holds the best packing found so far.
    pub proven_optimal: bool,
}

/// Lower bound on the number of bins: the larger of the volume bound and
/// the count of items that cannot share a bin with each other.
pub fn lower_bound(items: &[Item], capacity: Millis) -> usize {
    if items.is_empty() {
        return 0;
    }
    let total: u64 = items.iter().map(|(_, s)| s.0).sum();
    let volume = total.div_ceil(capacity.0) as usize;
    let large = items.iter().filter(|(_, s)| 2 * s.0 > capacity.0).count();
    volume.max(large)
}

/// Minimum-cardinality bin packing by depth-first branch and bound.
///
/// Items are branched on in decreasing size. A new bin is only ever opened
/// after all existing ones, and bins with equal free space are tried once,
/// which removes symmetric assignments. The FFD packing seeds the incumbent.
pub fn exact(items: &[Item], capacity: Millis, deadline: Option<Instant>) -> ExactPacking {
    let mut sorted = items.to_vec();
    sort_decreasing(&mut sorted);
    let incumbent = first_fit_decreasing(&sorted, capacity);
    let bound = lower_bound(&sorted, capacity);
    if incumbent.len() <= bound {
        return ExactPacking {
            bins: incumbent,
            proven_optimal: true,
        };
    }

    let sizes: Vec<u64> = sorted.iter().map(|(_, s)| s.0).collect();
    let mut suffix = vec![0u64; sizes.len() + 1];
    for k in (0..sizes.len()).rev() {
        suffix[k] = suffix[k + 1] + sizes[k];
    }
    let mut search = Search {
        sizes: &sizes,
        suffix: &suffix,
        capacity: capacity.0,
        bound,
        free: Vec::with_capacity(sizes.len()),
        slot: vec![0; sizes.len()],
        best_count: incumbent.len(),
        best_slot: None,
        deadline,
        nodes: 0,
        aborted: false,
    };
    search.descend(0, 0);

    let bins = match search.best_slot {
        Some(slot) => {
            let mut bins = vec![Vec::new(); search.best_count];
            for (k, &b) in slot.iter().enumerate() {
                bins[b].push(sorted[k].0);
            }
            bins
        }
        None => incumbent,
    };
    ExactPacking {
        bins,
        proven_optimal: !search.aborted,
    }
}

struct Search<'a> {
    sizes: &'a [u64],
    suffix: &'a [u64],
    capacity: u64,
    bound: usize,
    free: Vec<u64>,
    slot: Vec<usize>,
    best_count: usize,
    best_slot: Option<Vec<usize>>,
    deadline: Option<Instant>,
    nodes: u64,
    aborted: bool,
}

impl Search<'_> {
    /// Returns true once the search may stop (optimum proven or deadline hit).
    fn descend(&mut self, k: usize, open_free: u64) -> bool {
        self.nodes += 1;
        if self.nodes.is_multiple_of(4096) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.aborted = true;
                    return true;
                }
            }
        }
        let used = self.free.len();
        if k == self.sizes.len() {
            if used < self.best_count {
                self.best_count = used;
                self.best_slot = Some(self.slot.clone());
            }
            return self.best_count <= self.bound;
        }
        let overflow = self.suffix[k].saturating_sub(open_free);
        if used + overflow.div_ceil(self.capacity) as usize >= self.best_count {
            return false;
        }

        let size = self.sizes[k];
        for b in 0..used {
            let f = self.free[b];
            if f < size || self.free[..b].contains(&f) {
                continue;
            }
            self.free[b] = f - size;
            self.slot[k] = b;
            let done = self.descend(k + 1, open_free - size);
            self.free[b] = f;
            if done {
                return true;
            }
        }
        if used + 1 < self.best_count {
            self.free.push(self.capacity - size);
            self.slot[k] = used;
            let done = self.descend(k + 1, open_free + self.capacity - size);
            self.free.pop();
            if done {
                return true;
            }
        }
        false
    }
}
