//! Laboratory for projective criteria of the weak invariance principle.
//!
//! A stationary process `f o T^i` is built on a finite product system
//! (fair-sign Bernoulli shift times a rotation carrying almost-invariant
//! arcs). Four criteria are then evaluated two ways: through closed-form
//! series in the construction parameters, and through exact or Monte-Carlo
//! evaluation of the defining norms on the built model. A Donsker harness
//! checks the Gaussian behaviour of normalized partial sums.
//!
//! Criteria, with `S_n = sum_{i<n} f o T^i` and `P_0 = E(.|F_0) - E(.|F_{-1})`:
//!
//! | id | condition |
//! |----|-----------|
//! | C1 | `sum_i E(f o T^i | F_0)` converges in L1 (martingale-coboundary) |
//! | C2 | `sum_k f E(f o T^k | F_0)` converges in L1 |
//! | C3 | `sum_n n^{-3/2} ||E(S_n | F_0)||_2 < inf` |
//! | C4 | `sum_i ||P_0(f o T^i)||_2 < inf` |

pub mod criteria;
pub mod donsker;
pub mod error;
pub mod exec;
pub mod projector;
pub mod series;
pub mod stats;
pub mod sum;
pub mod system;
pub mod verdict;

pub use criteria::{
    dedecker_rio_block, gordin_block, hannan_partial, linear_process_report, maxwell_woodroofe_partial, reconcile,
    CriterionReport, MonteCarlo, ReconciliationReport,
};
pub use donsker::{fdd_covariance, ks_normality, limit_variance_exact, simulate_paths, TrajectoryEnsemble};
pub use error::{Error, Result};
pub use exec::{Execution, StreamSeed};
pub use series::{
    classification_table, make_preset, mw_series_terms, series_terms, ClassificationTable, CriterionId, LinearFamily,
    ParameterFamily, Preset, PresetFamily, SeriesDiagnostic, ValidationReport,
};
pub use stats::EstimateWithError;
pub use system::{
    auto_cycle_length, build_system, eval_f, sample_state, Arc, MeasureValue, SampleState, SystemModel, Window,
};
pub use verdict::{Verdict, VerdictPolicy};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
