//! Orientation-selected Davies ENDOR at the gate field: T₀ lines at the bare
//! Larmor frequencies and T± branches shifted by the hyperfine couplings.

use triplet_gates::powder::{
    orientation_selection, powder_grid, GridScheme, DEFAULT_SELECTION_WIDTH_HZ,
};
use triplet_gates::sequences::{
    davies_endor, find_peaks, linspace, EndorSettings, DEFAULT_GATE_FIELD_T,
};
use triplet_gates::spincore::SpinSystem;

fn main() -> triplet_gates::Result<()> {
    let system = SpinSystem::fullerene();
    let settings = EndorSettings::default();
    let grid = powder_grid(24, GridScheme::EqualArea)?;
    let field = DEFAULT_GATE_FIELD_T;
    let selected = orientation_selection(
        &system,
        field,
        settings.mw_hz,
        DEFAULT_SELECTION_WIDTH_HZ,
        &grid,
    )?;
    println!(
        "{} of {} orientations selected at {field} T",
        selected.len(),
        grid.len()
    );

    let rf = linspace(1e6, 25e6, 961);
    let trace = davies_endor(&system, field, &rf, &selected, &settings)?;
    for (f, h) in find_peaks(&trace.axis, &trace.signal, 0.1) {
        println!("peak {:7.3} MHz  height {h:.3}", f / 1e6);
    }
    Ok(())
}
