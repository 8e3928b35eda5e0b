//! Attack-side measurement: oracle-guided key recovery, early-terminating
//! approximate recovery, minimum-DIP cover estimation, structural removal,
//! and the uniform-sampling baseline they are compared against.

mod cover;
mod encode;
mod removal;
mod satattack;

pub use cover::{
    build_cover_instance, exact_min_dips, expected_dips_baseline, greedy_min_dips, CoverInstance,
};
pub use encode::{encode_circuit, encode_miter, encode_miter_netlist, CnfFormula, Wire};
pub use removal::{measure_erem, removal_attack, EremMode};
pub use satattack::{
    appsat_attack, circuit_oracle, sat_attack, AppSatOutcome, AttackCaps, DipRecord, DipStrategy,
    SatAttackTrace, Termination,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("oracle output is inconsistent with every key of the locked netlist")]
    InconsistentOracle,
    #[error("iteration or time cap exceeded before convergence")]
    CapExceeded,
    #[error("error threshold {0} is not a rate below 1")]
    BadThreshold(f64),
    #[error("gate tags do not describe a removable lock: {0}")]
    TagInconsistency(String),
    #[error("cover instance too large for exact search: |U| = {size}, max {max}")]
    TooLarge { size: usize, max: usize },
    #[error("universe element {0} is not covered by any set")]
    Uncoverable(u64),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}
