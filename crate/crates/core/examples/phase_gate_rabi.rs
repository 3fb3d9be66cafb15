//! Nuclear Rabi oscillation interrupted by a selective microwave 2π pulse:
//! the addressed subspace flips sign, the complementary one carries on.

use triplet_gates::dynamics::PulseMode;
use triplet_gates::sequences::{
    linspace, rabi_with_phase_gate, EffectiveQubitBasis, RabiSettings, DEFAULT_RF_RABI_HZ,
};
use triplet_gates::spincore::SpinSystem;

fn main() -> triplet_gates::Result<()> {
    let system = SpinSystem::fullerene();
    let basis = EffectiveQubitBasis::default_for(&system)?;
    let times = linspace(0.0, 68e-6, 35);
    let insert = 1.0 / (4.0 * DEFAULT_RF_RABI_HZ);
    for mode in [PulseMode::Ideal, PulseMode::Finite] {
        let settings = RabiSettings {
            mode,
            ..Default::default()
        };
        let t = rabi_with_phase_gate(&system, &basis, &times, &[insert], &settings)?;
        let plain = t.column("no_insertion").unwrap();
        let ctl = t.column("control").unwrap();
        println!("{mode:?} pulses, 2pi inserted at {:.1} us", insert * 1e6);
        println!("   t/us   gated   plain  control");
        for i in (0..times.len()).step_by(4) {
            println!(
                "{:7.1} {:+.3}  {:+.3}  {:+.3}",
                times[i] * 1e6,
                t.signal[i],
                plain[i],
                ctl[i]
            );
        }
    }
    Ok(())
}
