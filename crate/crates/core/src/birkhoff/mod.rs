//! Birkhoffian Q_j = F_j(t,qd) qdd + G_j(t,q) + V_j(t) + W_j(t,qd) and its analysis.

mod analysis;
mod energy;
mod symbolic;
mod system;

pub use analysis::{
    check_conservative, check_regularity, fcal, inductor_block, mass_is_singular, symmetry_check,
    Conservativeness, Regularity, SampleBox, SamplePoint, Witness, WitnessKind, SYMMETRY_TOLERANCE,
};
pub use energy::{
    build_energy, energy_unchecked, EnergyError, EnergyForm, EnergyFunction, LinearForms,
};
pub use symbolic::symbolic_q;
pub(crate) use system::ImplicitBlock;
pub use system::{
    assemble, assemble_raw_at, AssembleError, BirkhoffSystem, BranchState, EvalError, Forces, Lift,
    DET_TOLERANCE,
};
