//! Single-jump local martingales: the compensated one-jump process, its
//! integrability classification, simulation and stochastic integration.

pub mod error;
pub mod exprlang;
pub mod func;
pub mod measure;
pub mod quadrature;

pub use error::{DomainKind, Error, Result};
pub use exprlang::{parse, Expr};
pub use func::RealFn;
pub use measure::{Atom, AtomGenerator, DensityPiece, JumpLaw};
pub mod classifier;
pub mod compensator;
pub mod drift;
pub mod gallery;
pub mod process;
pub mod stochint;

pub use classifier::{classify, classify_with, Direction, Regime, Verdict};
pub use compensator::{change_in_mass, CompensatedJump, IntegrabilityReport, MassChange, Resolved};
pub use drift::{
    DriftFunction, DriftSpec, Hints, LimitHint, Monotone, ProbeKind, Tri, VariationParts,
};
pub use gallery::GalleryEntry;
pub use measure::{
    Certificate, IntegralVerdict, LimitVerdict, ProbeOptions, SeriesCheck, TailBound,
};
pub use process::{simulate_paths, MCReport, PathBundle, SimOptions};
pub use stochint::{cherny_integrand, Step, StepIntegrand, Witness};
