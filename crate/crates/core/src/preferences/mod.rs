//! Preference models over patient profiles.
//!
//! - [`bt`]: a single Bradley-Terry score per profile, fitted to pooled comparisons.
//! - [`blp`]: a random-coefficients logit, `beta ~ N(mu, Sigma)` over the three
//!   profile features, fitted by simulated maximum likelihood.
//! - [`scoring`]: what a sampled `beta` says about the profiles (scores,
//!   normalized weights, ranks).

pub mod blp;
pub mod bt;
pub mod mvn;
pub mod scoring;
pub mod simplex;
pub mod survey;

pub use blp::{fit_blp, likelihood_mc, log_likelihood_mc, BlpFit, BlpFitConfig, CommonRandomDraws};
pub use bt::{bt_probability, fit_bt, BtFit, BtScores, REFERENCE_BT_SCORES};
pub use mvn::{sample_beta, BetaSample, MvnParams};
pub use scoring::{blp_score, normalized_profile_weights, rank};
pub use survey::{generate_bt_survey, generate_synthetic_survey, Respondent, SurveyDataset};
