//! Spin operators, the electron–nuclear Hamiltonian, eigensystems and
//! transition tables.

pub mod hamiltonian;
pub mod operators;
pub mod orientation;
pub mod system;

pub use hamiltonian::{
    build_hamiltonian, build_hamiltonian_with, eigensystem, eigensystem_of, lab_z,
    transition_table, transitions_from, Eigensystem, HamiltonianMatrix, SystemOperators,
    Transition, DEFAULT_INTENSITY_THRESHOLD,
};
pub use operators::{spin_operators, ProductOperators, SpinOps};
pub use orientation::Orientation;
pub use system::{
    CouplingForm, NucleusDoc, NucleusSpec, SpinSystem, SpinSystemDoc, FULLERENE_A_1H_HZ,
    FULLERENE_A_31P_HZ, FULLERENE_DXX_HZ, FULLERENE_DYY_HZ, FULLERENE_DZZ_HZ, FULLERENE_J_HZ,
    LIQUID_J_HZ,
};
