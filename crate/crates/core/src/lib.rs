//! Capacity bounds, achievable regions, sub-channel decomposition,
//! sub-channel allocation and a symbolic relay-protocol simulator for the
//! Gaussian 3-way channel and its Y-channel equivalent.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod alloc;
pub mod capacity;
pub mod error;
pub mod polytope;
pub mod regions;
pub mod scalar;
pub mod scd;
pub mod sim;
pub mod sweep;
pub mod types;

pub use capacity::{cap, cap_hat};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use types::{validate_snr, Convention, Direction, User};

pub type SnrTriple = types::SnrTriple<f64>;
pub type RateTuple = types::RateTuple<f64>;
pub type LinearBound = regions::LinearBound<f64>;
pub type Region = regions::Region<f64>;
pub type Vertex = polytope::Vertex<f64>;
pub type GapReport = polytope::GapReport<f64>;
pub type SubChannelPlan = scd::SubChannelPlan<f64>;
pub type StrategyRate = scd::StrategyRate<f64>;
pub type Decomposition = scd::Decomposition<f64>;
pub type Group = alloc::Group<f64>;
pub type GroupedAllocation = alloc::GroupedAllocation<f64>;
pub type SweepPoint = sweep::SweepPoint<f64>;
pub type SweepRow = sweep::SweepRow<f64>;
