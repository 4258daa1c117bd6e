//! Seeded workloads for the placement benchmarks.

use elastograph::{Millis, TimingTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A frontier-shaped trace: the share of active partitions rises to a peak
/// mid-run and falls off again, as in a traversal.
pub fn frontier_trace(partitions: usize, supersteps: usize, seed: u64) -> TimingTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = vec![vec![Millis::ZERO; supersteps]; partitions];
    for s in 0..supersteps {
        let phase = (s as f64 + 0.5) / supersteps as f64;
        let share = 0.15 + 0.8 * (std::f64::consts::PI * phase).sin();
        let mut any = false;
        for row in times.iter_mut() {
            if rng.gen_bool(share.clamp(0.0, 1.0)) {
                row[s] = Millis(rng.gen_range(500..=90_000));
                any = true;
            }
        }
        if !any {
            times[rng.gen_range(0..partitions)][s] = Millis(rng.gen_range(500..=90_000));
        }
    }
    let ids = (0..partitions).map(|i| format!("P{}", i + 1)).collect();
    let sizes = (0..partitions)
        .map(|_| rng.gen_range(1_000_000..=500_000_000))
        .collect();
    TimingTrace::new(ids, times, Some(sizes)).expect("every superstep has work")
}
