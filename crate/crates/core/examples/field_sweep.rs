//! Echo-detected field sweep of the photo-excited triplet over a powder,
//! with the canonical turning points of the ZFS.

use triplet_gates::powder::{powder_grid, GridScheme};
use triplet_gates::sequences::{canonical_fields, echo_field_sweep, linspace, FieldSweepSettings};
use triplet_gates::spincore::SpinSystem;

fn main() -> triplet_gates::Result<()> {
    let system = SpinSystem::fullerene();
    let grid = powder_grid(16, GridScheme::EqualArea)?;
    let settings = FieldSweepSettings::default();
    let fields = linspace(0.325, 0.368, 216);
    let trace = echo_field_sweep(&system, &fields, &grid, &settings)?;

    println!("canonical turning points (T):");
    for b in canonical_fields(&system, settings.mw_hz, 0.30, 0.40)? {
        println!("  {b:.5}");
    }
    let peak = trace
        .signal
        .iter()
        .cloned()
        .fold(0.0f64, |a, b| a.max(b.abs()));
    for (b, s) in trace.axis.iter().zip(&trace.signal).step_by(12) {
        let bar = "#".repeat((30.0 * s.abs() / peak) as usize);
        let sign = if *s < 0.0 { '-' } else { '+' };
        println!("{b:.4} T {sign} {bar}");
    }
    Ok(())
}
