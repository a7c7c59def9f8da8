//! Lower and upper bounds for finite-horizon stochastic control problems.
//!
//! A suboptimal policy is evaluated by simulation to produce a lower bound.
//! The same simulated paths are reused to regress the coordinates of the
//! value-based dual penalty in a zero-mean functional basis of the noise
//! (centered monomials, Hermite polynomials, or centered indicators). The
//! fitted penalty is feasible by construction, so solving the pathwise
//! perfect-information problems it induces gives a valid upper bound.
//!
//! The crate is organised as:
//!
//! * [`mdp`]: model/policy abstractions, deterministic path simulation,
//!   pathwise values and bound estimates.
//! * [`basis`]: zero-mean penalty bases and the monomial coordinate weights.
//! * [`regression`]: least squares and per-period coordinate fitting.
//! * [`lqc`]: closed-form linear-quadratic control used as an analytic oracle.
//! * [`trading`]: the constrained multi-asset liquidation benchmark.
//! * [`qp`]: a dense primal-dual interior-point QP solver for inner problems.
//! * [`dual`]: penalties, inner problems, upper bounds and duality gaps.
//! * [`experiment`]: configuration, orchestration and CSV/JSON reports.

pub mod basis;
pub mod dual;
mod error;
pub mod experiment;
pub mod lqc;
pub mod mdp;
pub mod qp;
pub mod regression;
pub mod trading;

pub use error::{Error, Result};
