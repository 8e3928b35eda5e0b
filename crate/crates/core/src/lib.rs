//! Logic-locking evaluation toolkit for combinational netlists.
//!
//! The crate covers the full desk-scale loop: parse a `.bench` circuit, lock it
//! with one of the supported schemes (SARLock, DTL, SFLL-HD, FLL, or an
//! OR-compound of several), and then measure the four security metrics — error
//! rate under a random key (E_FC), SAT-attack resilience (t_SAT), best-case
//! approximate error (E_APP), and post-removal error (E_REM) — three ways:
//! closed-form models, exhaustive/sampled simulation over the error table, and
//! actual attack runs. The three routes are deliberately independent so they
//! can be cross-validated.

pub mod attacks;
pub mod bits;
pub mod fixtures;
pub mod metrics;
pub mod netlist;
pub mod rational;
pub mod sat;
pub mod schemes;
pub mod sim;

pub use netlist::{Gate, GateKind, GateTag, NetId, Netlist};
pub use rational::Rational;
pub use schemes::{EncryptedNetlist, KeyAssignment, SchemeConfig};
pub use sim::ErrorTable;
