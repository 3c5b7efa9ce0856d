//! Escape functions: the cutoff Φ, the ψ ladder and its operator-level checks.

pub mod cutoff;
pub mod energy;
pub mod ladder;

pub use cutoff::{check_cutoff, phi, psi, smooth_step, Cutoff, CutoffReport};
pub use energy::{
    energy_inequality_check, monotonicity_check, DefectBound, EnergyOptions, EnergyReport,
    EnergyRow, MonotonicityReport, MonotonicityRow,
};
pub use ladder::{
    choose_constants, verify_transport, verify_transport_unchecked, EscapeLadder, TransportGrid,
    TransportReport,
};
