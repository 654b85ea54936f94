//! Melnikov expansions near a cuspidal double homoclinic loop through a nilpotent saddle of order 2.

pub mod exact;
pub mod hamiltonian;
pub mod constants;
pub mod lienard;
pub mod ovals;
pub mod expansion;
pub mod cycles;
pub mod cli;
