//! Both CNOT constructions on the effective two-qubit register: truth table,
//! elapsed time, and the phases the finite CPHASE pulse leaves behind.

use triplet_gates::dynamics::PulseMode;
use triplet_gates::sequences::{
    cnot, cphase_phases, CnotMethod, EffectiveProcessor, EffectiveQubitBasis,
};
use triplet_gates::spincore::SpinSystem;

fn main() -> triplet_gates::Result<()> {
    let system = SpinSystem::fullerene();
    let basis = EffectiveQubitBasis::default_for(&system)?;
    let proc = EffectiveProcessor::new(&system, &basis, None)?;
    for method in [CnotMethod::Cphase, CnotMethod::Dipolar] {
        println!("{method:?} CNOT");
        for e in 1..=4 {
            let (out, elapsed) = cnot(&proc, &proc.basis_state(e)?, method)?;
            let rho = proc.effective(&out)?;
            let k = (0..4)
                .max_by(|a, b| rho[(*a, *a)].re.total_cmp(&rho[(*b, *b)].re))
                .unwrap();
            println!(
                "  |{e}> -> |{}>  p = {:.6}  ({:.2} us)",
                k + 1,
                rho[(k, k)].re,
                elapsed * 1e6
            );
        }
    }
    let finite = proc.clone().with_mode(PulseMode::Finite)?;
    let (phases, stay) = cphase_phases(&finite)?;
    println!("finite 220 ns CPHASE phases (rad): {phases:.3?}");
    println!("stay probabilities:               {stay:.3?}");
    Ok(())
}
