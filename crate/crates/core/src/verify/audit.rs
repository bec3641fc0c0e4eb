use crate::lifelong::RunLog;
use crate::pacbayes::{kl_budget, RegularizerConfig};
use crate::Result;
use serde::{Deserialize, Serialize};

/// One window of the KL-budget audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub update_index: usize,
    pub kl_running_sum: f64,
    pub budget: f64,
    /// Every TV proxy up to this update is at most `r`.
    pub premise_ok: bool,
    pub within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlAudit {
    pub rows: Vec<AuditRow>,
    pub premise_windows: usize,
    /// Premise-satisfying windows whose running sum exceeds the budget.
    pub violations: usize,
    /// Premise-violating windows, reported but not counted as violations.
    pub flagged: usize,
}

/// Compares the running `sum KL(P_l || P_bar_l)` through update `l` with the
/// budget for `l + 1` windows, using the configured `r` and `s_min`.
pub fn kl_budget_audit<D>(run: &RunLog<D>, cfg: &RegularizerConfig) -> Result<KlAudit> {
    let mut rows = Vec::with_capacity(run.updates.len());
    let (mut premise_windows, mut violations, mut flagged) = (0, 0, 0);
    let mut premise = true;
    let mut sum = 0.0;
    for u in &run.updates {
        premise &= u.tv_step <= cfg.r;
        sum += u.kl_step;
        let budget = kl_budget(cfg, u.update_index + 1)?;
        let within = sum <= budget;
        if premise {
            premise_windows += 1;
            if !within {
                violations += 1;
            }
        } else {
            flagged += 1;
        }
        rows.push(AuditRow {
            update_index: u.update_index,
            kl_running_sum: sum,
            budget,
            premise_ok: premise,
            within_budget: within,
        });
    }
    Ok(KlAudit {
        rows,
        premise_windows,
        violations,
        flagged,
    })
}
