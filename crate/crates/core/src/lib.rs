//! Loss analysis of a finite-buffer M/GI/1 queue whose messages arrive as
//! random batches of packets.
//!
//! Messages of a random packet count ν join an N-packet buffer, which
//! induces a random number of waiting places `ζ(N)`; an arriving message is
//! refused when the queue already holds more messages than its ζ, and an
//! accepted message is still lost ("marked") with probability p when one of
//! its packets is corrupted. The crate computes, for this system:
//!
//! * exact busy-period characteristics and the stationary loss probability
//!   from the π-kernel recurrence ([`busy_period`], [`tauberian`]),
//! * asymptotic predictions in every traffic regime, including the
//!   heavy-traffic expansions around ρ = 1 ([`asymptotics`]),
//! * Monte Carlo confirmation by regenerative simulation ([`simulator`]),
//! * the loss effect of adding redundant packets ([`redundancy`]).
//!
//! The `parallel` feature (on by default) runs simulation replications and
//! redundancy sweep rows on the rayon pool; disabling it yields a fully
//! sequential build with bitwise-identical results.

pub mod asymptotics;
pub mod busy_period;
pub mod error;
pub mod packetization;
pub mod redundancy;
pub mod service;
pub mod simulator;
pub mod tauberian;

pub use error::{Error, Result};
