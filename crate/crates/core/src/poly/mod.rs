//! Exact polyhedral computations: inequality systems, rational linear
//! programming with certificates, Fourier-Motzkin elimination, and symmetry
//! classification of rows.

mod fme;
mod lp;
mod orbit;
mod system;

pub use fme::{canonical_reduced_form, eliminate, EliminationBudget};
pub use lp::{
    equal_cones, implies, lp_feasible, solve_nonneg, EqualConesOutcome, FarkasCertificate,
    Feasibility, ImpliesOutcome, NonNegOutcome,
};
pub use orbit::{orbit_classify, OrbitClass, SymmetryGroup};
pub use system::{InequalitySystem, Relation, Row};
