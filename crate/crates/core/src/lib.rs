//! Streaming Signal Temporal Logic monitors over uniformly sampled traces.
//!
//! * [`classic`]: interval robustness monitor and three-valued verdicts.
//! * [`epoch`]: violation/satisfaction epochs and the Boolean causation monitor.
//! * [`causation`]: violation/satisfaction causation distances.
//! * [`reset`]: a classic monitor that restarts after every conclusive verdict.
//! * [`oracle`]: reference robust semantics on complete traces.
//! * [`suite`]: seeded random formula/trace corpus with joint cross-checks.
//! * [`specs`]: benchmark properties and synthetic traces for them.
//!
//! All monitors share one dynamic-programming engine compiled from a [`Plan`].

pub mod causation;
pub mod classic;
mod engine;
pub mod epoch;
pub mod formula;
pub mod oracle;
pub mod plan;
pub mod reset;
pub mod specs;
pub mod suite;
pub mod trace;

pub use causation::{derive_bcaum, reconstruct_clam, CausationOutput, QcaumState};
pub use classic::{
    clam_offline_check, derive_verdict, ClamState, MonitorError, OfflineCheckError,
    RobustnessInterval, Verdict,
};
pub use engine::{MonoDeque, WindowKernel};
pub use epoch::{satisfaction_epoch, violation_epoch, BcaumState, CausationVerdict, Epoch};
pub use formula::{parse_formula, Atom, Expr, Formula, ParseError, TimeInterval};
pub use oracle::{robustness, three_valued, OracleError};
pub use plan::{Plan, PlanError};
pub use reset::{ResetState, ResmStep};
pub use specs::BenchSpec;
pub use trace::{atom_bounds, DomainBounds, PrefixView, Trace, TraceError};
