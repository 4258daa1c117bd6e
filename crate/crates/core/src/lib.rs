//! Elastic placement of graph partitions onto pay-per-quantum VMs.
//!
//! A graph application running in bulk synchronous supersteps is described
//! by a [`TimingTrace`]: how long each partition computes in each superstep
//! on a VM of its own. A placement strategy packs the active partitions of
//! every superstep onto VMs ([`PlacementPlan`]), and the cost engine prices
//! the result under quantized billing ([`CostReport`]).
//!
//! ```
//! use elastograph::{cost, strategies, BillingPolicy, DataMovementModel, TimingTrace};
//!
//! let trace = TimingTrace::from_secs(&[&[6, 2], &[4, 9], &[4, 0], &[2, 1]]).unwrap();
//! let plan = strategies::place_lap(&trace);
//! let report = cost::evaluate(&plan, &trace, &BillingPolicy::per_minute(),
//!                             &DataMovementModel::disabled()).unwrap();
//! assert_eq!(report.makespan, report.minimum_makespan);
//! ```

pub mod cost;
pub mod metagraph;
pub mod model;
pub mod strategies;
pub mod trace_file;

pub use cost::{CostError, CostReport, DataMovementModel, VmUsageSchedule};
pub use metagraph::{ActivationForecast, CostEstimator, Metagraph, MetagraphError};
pub use model::{
    minimum_makespan, superstep_profile, BillingPolicy, Millis, PlacementPlan, PlanError,
    Provisioning, Strategy, SuperstepProfile, TimingTrace, TraceError,
};
pub use strategies::{place, PlaceOptions};
pub use trace_file::{load_trace, write_trace};
