//! prymlab: a numerical laboratory for Prym theta identities.

pub mod curve;
pub mod pdo;
pub mod identity;
pub(crate) mod numeric;
pub mod report;
pub mod theta;

pub use curve::{CycleBasis, DoubleCoverCurve, PrymData};
pub use identity::{LatticeIndex, SchroedingerConstants};
pub use report::{IdentityReport, RunReport};
pub use theta::{DivisorPoint, KummerPoint, PeriodMatrix, ThetaPolicy};
