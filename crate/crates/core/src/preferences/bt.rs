//! Bradley-Terry scores fitted by minorization-maximization.
//!
//! Each profile `i` has a positive score `p_i` and is preferred to `j` with
//! probability `p_i / (p_i + p_j)`. The MM update
//!
//! ```text
//! p_i <- W_i / sum_{j != i} n_ij / (p_i + p_j)
//! ```
//!
//! (`W_i` total wins, `n_ij` comparisons of `i` with `j`) increases the pooled
//! likelihood monotonically. Scores are reported scaled so the largest is 1.

use serde::{Deserialize, Serialize};

use super::survey::SurveyDataset;
use crate::error::{Error, Result};
use crate::profile::{PatientProfile, PROFILE_COUNT};

/// Published pooled scores for profiles 1..=8.
pub const REFERENCE_BT_SCORES: [f64; PROFILE_COUNT] = [1.000, 0.103, 0.236, 0.036, 0.070, 0.012, 0.024, 0.003];

const CONVERGENCE_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 100_000;
const PSEUDOCOUNT: f64 = 0.5;

pub fn bt_probability(score_i: f64, score_j: f64) -> Result<f64> {
    if !(score_i > 0.0 && score_j > 0.0) || !score_i.is_finite() || !score_j.is_finite() {
        return Err(Error::Domain(format!(
            "Bradley-Terry scores must be positive and finite, got {score_i} and {score_j}"
        )));
    }
    Ok(score_i / (score_i + score_j))
}

/// Positive per-profile scores with maximum exactly 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; PROFILE_COUNT]", into = "[f64; PROFILE_COUNT]")]
pub struct BtScores([f64; PROFILE_COUNT]);

impl BtScores {
    /// Rescales positive scores so the largest is 1.
    pub fn normalized(raw: [f64; PROFILE_COUNT]) -> Result<Self> {
        if raw.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Domain(format!("scores must be positive and finite: {raw:?}")));
        }
        let max = raw.iter().copied().fold(0.0, f64::max);
        Ok(BtScores(raw.map(|s| s / max)))
    }

    pub fn reference() -> Self {
        BtScores(REFERENCE_BT_SCORES)
    }

    pub fn get(&self, profile: PatientProfile) -> f64 {
        self.0[profile.index()]
    }

    pub fn as_array(&self) -> &[f64; PROFILE_COUNT] {
        &self.0
    }

    /// `P(i beats j)` for all pairs, indexed by `id - 1`.
    pub fn probability_matrix(&self) -> [[f64; PROFILE_COUNT]; PROFILE_COUNT] {
        // upper triangle computed, lower filled as the complement so rows pair up exactly
        let mut m = [[0.5; PROFILE_COUNT]; PROFILE_COUNT];
        for i in 0..PROFILE_COUNT {
            for j in i + 1..PROFILE_COUNT {
                let p = self.0[i] / (self.0[i] + self.0[j]);
                m[i][j] = p;
                m[j][i] = 1.0 - p;
            }
        }
        m
    }
}

impl TryFrom<[f64; PROFILE_COUNT]> for BtScores {
    type Error = Error;

    fn try_from(raw: [f64; PROFILE_COUNT]) -> Result<Self> {
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if (max - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("scores must have maximum 1, found {max}")));
        }
        BtScores::normalized(raw)
    }
}

impl From<BtScores> for [f64; PROFILE_COUNT] {
    fn from(s: BtScores) -> Self {
        s.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtFit {
    pub scores: BtScores,
    pub respondents: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Some profile never won or never lost, so 0.5 was added to every win count.
    pub smoothed: bool,
    /// Pooled log-likelihood of the (possibly smoothed) win counts.
    pub log_likelihood: f64,
}

pub fn fit_bt(survey: &SurveyDataset) -> Result<BtFit> {
    fit_bt_from(survey, [1.0; PROFILE_COUNT])
}

/// MM iteration from an explicit positive starting point.
pub fn fit_bt_from(survey: &SurveyDataset, start: [f64; PROFILE_COUNT]) -> Result<BtFit> {
    if survey.is_empty() {
        return Err(Error::Survey("cannot fit scores to an empty survey".into()));
    }
    if start.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Domain("starting scores must be positive".into()));
    }
    let mut wins = survey.win_matrix();
    let degenerate = (0..PROFILE_COUNT).any(|i| {
        let won: f64 = wins[i].iter().sum();
        let lost: f64 = (0..PROFILE_COUNT).map(|j| wins[j][i]).sum();
        won == 0.0 || lost == 0.0
    });
    if degenerate {
        log::warn!("some profile never won or never lost; applying {PSEUDOCOUNT} pseudocounts");
        for (i, row) in wins.iter_mut().enumerate() {
            for (j, w) in row.iter_mut().enumerate() {
                if i != j {
                    *w += PSEUDOCOUNT;
                }
            }
        }
    }
    let total_wins: Vec<f64> = wins.iter().map(|r| r.iter().sum()).collect();
    let n = |i: usize, j: usize| wins[i][j] + wins[j][i];

    let mut p = start;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next = [0.0; PROFILE_COUNT];
        for i in 0..PROFILE_COUNT {
            let denom: f64 = (0..PROFILE_COUNT)
                .filter(|&j| j != i)
                .map(|j| n(i, j) / (p[i] + p[j]))
                .sum();
            next[i] = total_wins[i] / denom;
        }
        let max = next.iter().copied().fold(0.0, f64::max);
        next.iter_mut().for_each(|s| *s /= max);
        let p_max = p.iter().copied().fold(0.0, f64::max);
        let change = (0..PROFILE_COUNT)
            .map(|i| (next[i].ln() - (p[i] / p_max).ln()).abs())
            .fold(0.0, f64::max);
        p = next;
        if change < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }

    let mut log_likelihood = 0.0;
    for i in 0..PROFILE_COUNT {
        for j in 0..PROFILE_COUNT {
            if i != j && wins[i][j] > 0.0 {
                log_likelihood += wins[i][j] * (p[i] / (p[i] + p[j])).ln();
            }
        }
    }
    Ok(BtFit {
        scores: BtScores::normalized(p)?,
        respondents: survey.len(),
        iterations,
        converged,
        smoothed: degenerate,
        log_likelihood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preferences::survey::{all_pairs, generate_bt_survey, Respondent};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn probability_examples() {
        assert!((bt_probability(1.0, 0.103).unwrap() - 0.906_618).abs() < 1e-6);
        assert!((bt_probability(0.236, 0.070).unwrap() - 0.771_242).abs() < 1e-6);
        assert_eq!(bt_probability(3.7, 3.7).unwrap(), 0.5);
        assert!(bt_probability(0.0, 1.0).is_err());
        assert!(bt_probability(1.0, -2.0).is_err());
    }

    #[test]
    fn complementary_probabilities() {
        let m = BtScores::reference().probability_matrix();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(m[i][j] + m[j][i], 1.0, "({i},{j})");
            }
        }
    }

    fn survey_by(rule: impl Fn(PatientProfile, PatientProfile) -> PatientProfile, n: u64) -> SurveyDataset {
        let respondents = (0..n)
            .map(|id| {
                let mut r = Respondent::new(id);
                for (a, b) in all_pairs() {
                    r.record(a, b, rule(a, b)).unwrap();
                }
                r
            })
            .collect();
        SurveyDataset::new(respondents).unwrap()
    }

    #[test]
    fn total_dominance_is_smoothed_and_strictly_ordered() {
        let fit = fit_bt(&survey_by(|a, b| a.min(b), 30)).unwrap();
        assert!(fit.smoothed);
        assert!(fit.converged);
        let s = fit.scores.as_array();
        assert!(s.windows(2).all(|w| w[0] > w[1]), "{s:?}");
    }

    #[test]
    fn identical_win_patterns_get_equal_scores() {
        // profiles 1 and 2 each beat everything else and split their own match
        let respondents: Vec<Respondent> = (0..40u64)
            .map(|id| {
                let mut r = Respondent::new(id);
                for (a, b) in all_pairs() {
                    let chosen = if (a.id(), b.id()) == (1, 2) {
                        if id % 2 == 0 { a } else { b }
                    } else {
                        a.min(b)
                    };
                    r.record(a, b, chosen).unwrap();
                }
                r
            })
            .collect();
        let fit = fit_bt(&SurveyDataset::new(respondents).unwrap()).unwrap();
        let s = fit.scores.as_array();
        assert!((s[0] - s[1]).abs() < 1e-6, "{s:?}");
    }

    #[test]
    fn scaled_start_gives_identical_output() {
        let survey = generate_bt_survey(&REFERENCE_BT_SCORES, 200, &mut ChaCha8Rng::seed_from_u64(3));
        let a = fit_bt_from(&survey, REFERENCE_BT_SCORES).unwrap();
        let b = fit_bt_from(&survey, REFERENCE_BT_SCORES.map(|s| s * 37.5)).unwrap();
        for (x, y) in a.scores.as_array().iter().zip(b.scores.as_array()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(a.scores.as_array().iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn json_validates_max_one() {
        let json = serde_json::to_string(&BtScores::reference()).unwrap();
        assert_eq!(serde_json::from_str::<BtScores>(&json).unwrap(), BtScores::reference());
        assert!(serde_json::from_str::<BtScores>("[0.5,0.1,0.1,0.1,0.1,0.1,0.1,0.1]").is_err());
    }

    #[test]
    fn empty_survey_is_rejected() {
        assert!(fit_bt(&SurveyDataset::default()).is_err());
    }
}
