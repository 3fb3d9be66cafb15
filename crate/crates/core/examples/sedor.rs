//! SEDOR: the refocused echo oscillates at the nuclear coupling, and half a
//! period is the coupling-mediated CNOT time.

use triplet_gates::dynamics::PulseMode;
use triplet_gates::sequences::{
    conditional_pi_time, dft_peak, linspace, sedor, EffectiveQubitBasis,
};
use triplet_gates::spincore::SpinSystem;

fn main() -> triplet_gates::Result<()> {
    let system = SpinSystem::fullerene();
    let basis = EffectiveQubitBasis::default_for(&system)?;
    let taus = linspace(0.0, 1e-3, 101);
    let trace = sedor(&system, &basis, &taus, None, PulseMode::Ideal)?;
    let (freq, bin) = dft_peak(&trace.axis, &trace.signal)?;
    println!(
        "coupling {:.0} Hz, DFT peak {freq:.0} Hz (bin {bin:.0} Hz)",
        system.nn_coupling_hz
    );
    println!(
        "conditional pi time {:.1} us",
        conditional_pi_time(system.nn_coupling_hz) * 1e6
    );
    for (t, s) in trace.axis.iter().zip(&trace.signal).step_by(10) {
        println!("tau {:6.1} us  <2Iz> {s:+.3}", t * 1e6);
    }
    Ok(())
}
