//! Winsorized importance sampling with the winsorization threshold chosen
//! by the balancing principle (Lepski's method).
//!
//! The crate is organised bottom-up:
//!
//! * [`weights`]: samples of importance weights, winsorization and the
//!   per-level summaries (mean, spread) the selectors consume.
//! * [`balancing`]: the threshold selector, its linear-scan variant and the
//!   finite-sample guarantee quantities.
//! * [`cv`]: the k-fold cross-validated threshold used as a baseline.
//! * [`problems`]: synthetic importance-sampling problems with known truth
//!   and a bias oracle.
//! * [`saw`]: sequential importance sampling for complete self-avoiding
//!   walks, plus exact enumeration.
//! * [`harness`]: seeded, replicated experiments and their CSV/JSON output.

pub mod balancing;
pub mod cv;
pub mod error;
pub mod harness;
pub mod normal;
pub mod problems;
pub mod quadrature;
pub mod rng;
pub mod saw;
pub mod weights;

pub use balancing::{
    constant_c, guarantee_probability, k_bound_from_alpha, select_threshold,
    select_threshold_linear, BalancedResult, BalancingParams, Comparison, GuaranteeInputs,
    PhiVariant, ScanMode, ThresholdLadder,
};
pub use cv::{cv_select_threshold, CvConfig, CvSelection};
pub use error::{Error, Result};
pub use normal::std_normal_cdf;
pub use weights::{is_estimate, winsor_summary, winsorize, Sample, WinsorSummary};
