//! Joint power and CPU-frequency allocation for a massive-MIMO base station
//! that serves federated-learning (FL) users and ordinary downlink users at
//! the same time.
//!
//! The model lives in [`sysmodel`] and [`rates`]. [`sca`] maximizes the
//! minimum effective rate of the non-FL users through successive convex
//! approximation, with [`surrogate`] providing the convex bounds and
//! [`cvxsolve`] solving each subproblem. [`baseline`] and [`oracle`] are the
//! reference methods and [`harness`] runs seeded sweeps over all of them.

// Comparisons are written `!(a <= b)` on purpose so that NaN lands on the
// failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cvxsolve;
pub mod error;
pub mod expr;
pub mod harness;
pub mod num;
pub mod oracle;
pub mod rates;
pub mod sca;
pub mod surrogate;
pub mod sysmodel;

pub use error::{ConfigIssue, Error, Result};
pub use num::Scalar;
pub use rates::{evaluate, check_feasibility, Allocation, RateReport};
pub use sca::{run, ScaOptions, ScaStatus, SolveReport};
pub use sysmodel::{sample_layout, ChannelState, SystemConfig};

pub type SystemConfig64 = SystemConfig<f64>;
pub type SystemConfig32 = SystemConfig<f32>;
pub type ChannelState64 = ChannelState<f64>;
pub type ChannelState32 = ChannelState<f32>;
pub type Allocation64 = Allocation<f64>;
pub type Allocation32 = Allocation<f32>;
pub type RateReport64 = RateReport<f64>;
pub type SolveReport64 = SolveReport<f64>;
