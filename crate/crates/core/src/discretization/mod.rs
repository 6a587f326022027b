//! Finite-element spaces on the reference mesh and every form of the
//! splitting scheme.

mod beam;
mod fluid_forms;
mod sobolev;
mod spaces;

pub use beam::StructureForms;
pub use fluid_forms::{AssembledForms, CellQuadrature, Discretization};
pub use sobolev::{h2_norm, hs_norm, slope_seminorm_sq};
pub use spaces::{build_spaces, BeamSpace, Component, CoupledLayout, FluidSpace};
