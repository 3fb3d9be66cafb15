//! The experiments as pulse programs: field sweep, Davies ENDOR, SEDOR,
//! Rabi with inserted phase gates, geometric CPHASE, CNOT and Bell-state
//! preparation.

pub mod basis;
pub mod endor;
pub mod field_sweep;
pub mod gates;
pub mod ledger;
pub mod rabi;
pub mod sedor;
pub mod trace;

pub use basis::{EffectiveQubitBasis, DEFAULT_GATE_FIELD_T};
pub use endor::{davies_endor, swap_probability, EndorSettings};
pub use field_sweep::{
    canonical_fields, echo_field_sweep, isotropic_resonance_field, resonance_fields,
    FieldSweepSettings, Polarization, DEFAULT_MW_HZ,
};
pub use gates::{aa_cphase, cnot, cphase_phases, CnotMethod, EffectiveProcessor, GateTiming};
pub use ledger::{ledger_csv, speedup_ledger, speedup_ledger_from, LedgerRow};
pub use rabi::{rabi_with_phase_gate, RabiSettings, DEFAULT_RF_RABI_HZ};
pub use sedor::{conditional_pi_time, dft_peak, sedor, sedor_frequency};
pub use trace::{find_peaks, linspace, TraceResult};
