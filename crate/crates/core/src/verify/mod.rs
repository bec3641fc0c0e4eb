//! Numerical checks of the concentration and generalization claims: simulated
//! martingale traces with Azuma and Freedman envelopes, the measured
//! generalization gap against the bound, and the KL-budget audit.

mod audit;
mod gap;
mod martingale;

pub use audit::{kl_budget_audit, AuditRow, KlAudit};
pub use gap::{gap_report, GapReport};
pub use martingale::{
    azuma_envelope, freedman_envelope, freedman_grid_min, simulate_martingale, MartingaleTrace,
};
