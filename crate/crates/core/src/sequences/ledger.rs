use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sedor::conditional_pi_time;
use crate::error::{invalid, Result};
use crate::spincore::{SpinSystem, LIQUID_J_HZ};

/// Entangling times quoted for the three routes.
pub const REPORTED_LIQUID_S: f64 = 17e-3;
pub const REPORTED_DIPOLAR_S: f64 = 160e-6;
pub const REPORTED_CPHASE_S: f64 = 220e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub method: String,
    /// Coupling that sets the time, when there is one.
    pub coupling_hz: Option<f64>,
    pub reported_s: f64,
    pub computed_s: f64,
    /// Reported liquid time divided by this row's reported time.
    pub ratio_vs_liquid: f64,
    /// Same ratio from the computed times.
    pub computed_ratio_vs_liquid: f64,
}

/// Ledger for a liquid-state coupling, a solid-state coupling and a
/// microwave pulse length, with quoted times alongside.
pub fn speedup_ledger_from(
    liquid_j_hz: f64,
    solid_j_hz: f64,
    mw_pulse_s: f64,
    reported: [f64; 3],
) -> Result<Vec<LedgerRow>> {
    if !(liquid_j_hz != 0.0 && solid_j_hz != 0.0 && mw_pulse_s > 0.0) {
        return Err(invalid(
            "ledger needs non-zero couplings and a positive pulse length",
        ));
    }
    if reported.iter().any(|&t| !(t > 0.0)) {
        return Err(invalid("reported times must be positive"));
    }
    let computed = [
        conditional_pi_time(liquid_j_hz),
        conditional_pi_time(solid_j_hz),
        mw_pulse_s,
    ];
    let rows = [
        ("liquid_j", Some(liquid_j_hz)),
        ("solid_dipolar", Some(solid_j_hz)),
        ("aa_cphase", None),
    ];
    Ok(rows
        .iter()
        .enumerate()
        .map(|(i, (name, j))| LedgerRow {
            method: name.to_string(),
            coupling_hz: *j,
            reported_s: reported[i],
            computed_s: computed[i],
            ratio_vs_liquid: reported[0] / reported[i],
            computed_ratio_vs_liquid: computed[0] / computed[i],
        })
        .collect())
}

/// Default ledger: 30 Hz liquid coupling, the system's nuclear coupling and
/// a 220 ns microwave 2π pulse.
pub fn speedup_ledger(system: &SpinSystem) -> Result<Vec<LedgerRow>> {
    speedup_ledger_from(
        LIQUID_J_HZ,
        system.nn_coupling_hz,
        220e-9,
        [REPORTED_LIQUID_S, REPORTED_DIPOLAR_S, REPORTED_CPHASE_S],
    )
}

pub fn ledger_csv(rows: &[LedgerRow]) -> String {
    let mut out = String::from("# name: speedup_ledger\n");
    out.push_str(
        "method,coupling_hz,reported_s,computed_s,ratio_vs_liquid,computed_ratio_vs_liquid\n",
    );
    for r in rows {
        let j = r
            .coupling_hz
            .map(|v| format!("{v:.12e}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.method, j, r.reported_s, r.computed_s, r.ratio_vs_liquid, r.computed_ratio_vs_liquid
        );
    }
    out
}
