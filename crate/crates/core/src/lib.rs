//! Stable clouds of finite exclusion processes with heterogeneous rates.
//!
//! A system of `N + 1` particles on `Z`, particle `i` jumping left at rate
//! `a_i` and right at rate `b_i`, with jumps onto occupied sites suppressed.
//! In the long run the particles split into consecutive stable clouds. This
//! crate computes the partition, the loads, speeds and product-geometric gap
//! laws in closed form, cross-checks them against a traffic-equation fixed
//! point and a truncated-chain solve, and simulates the process exactly.

pub mod clt;
pub mod config;
pub mod error;
pub mod jackson;
pub mod law;
pub mod model;
pub mod partition;
pub mod report;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use clt::{clt_constants_two_particle, excursion_rate, CltConstants};
pub use error::{Error, Result};
pub use jackson::{reduced_params, solve_general_traffic, solve_stable_traffic, to_jackson, JacksonParams, TrafficSolution};
pub use law::{expected_cloud_width, GeometricProductLaw};
pub use model::{alpha, beta, hrho, hv, interior_loads, Assumption, DiscreteInterval, OrderedPartition, RateSystem};
pub use partition::{analyze, analyze_with, cloud_partition, full_loads, particle_speeds, CloudReport, MergePolicy, MergeTrace};
pub use simulate::{simulate, simulate_replicas, SimConfig, SimStats};
