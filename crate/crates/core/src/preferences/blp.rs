//! Random-coefficients logit over profile features, fitted by simulated
//! maximum likelihood.
//!
//! Respondent `k` has `beta_k ~ N(mu, Sigma)` and, given `beta_k`, prefers `i`
//! to `j` with logit probability `exp(x_i.beta) / (exp(x_i.beta) + exp(x_j.beta))`.
//! The likelihood of a respondent's answers integrates the product of those
//! probabilities over `beta`; it is approximated with `R` fixed standard-normal
//! draws `z_r`, `beta_r = mu + L z_r`, reused for every parameter value.
//!
//! For fitting, the log-product for a respondent collapses to
//! `s_k . beta - A(beta)` where `s_k` sums the chosen profiles' features and
//! `A` sums `log(exp(u_i) + exp(u_j))` over the answered pairs, so respondents
//! are grouped by `(answered pairs, s_k)` and each group costs one dot product
//! per draw.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mvn::{standard_normal3, MvnParams};
use super::simplex::{minimize, SimplexConfig};
use super::survey::{all_pairs, Respondent, SurveyDataset};
use crate::error::{Error, Result};
use crate::profile::{PatientProfile, PROFILE_COUNT};
use crate::rng::Stream;

/// Fixed standard-normal draws shared by every likelihood evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct CommonRandomDraws {
    normals: Vec<Vector3<f64>>,
}

impl CommonRandomDraws {
    pub fn new(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(Stream::Draws.key(seed));
        CommonRandomDraws {
            normals: (0..count).map(|_| standard_normal3(&mut rng)).collect(),
        }
    }

    pub fn from_normals(normals: Vec<Vector3<f64>>) -> Self {
        CommonRandomDraws { normals }
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(mean(exp(xs)))`.
fn log_mean_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|x| (x - hi).exp()).sum();
    hi + (sum / xs.len() as f64).ln()
}

fn utilities(beta: &Vector3<f64>) -> [f64; PROFILE_COUNT] {
    PatientProfile::ALL.map(|p| p.features().dot(beta))
}

/// Simulated log-likelihood of one respondent's answers.
pub fn log_likelihood_mc(params: &MvnParams, respondent: &Respondent, draws: &CommonRandomDraws) -> f64 {
    assert!(!draws.is_empty(), "at least one draw is required");
    let terms: Vec<f64> = draws
        .normals()
        .iter()
        .map(|z| {
            let u = utilities(&params.transform(z));
            respondent
                .choices()
                .map(|((a, b), c)| u[c.index()] - log_add_exp(u[a.index()], u[b.index()]))
                .sum()
        })
        .collect();
    log_mean_exp(&terms)
}

/// Simulated likelihood of one respondent's answers, in `(0, 1]`.
pub fn likelihood_mc(params: &MvnParams, respondent: &Respondent, draws: &CommonRandomDraws) -> f64 {
    log_likelihood_mc(params, respondent, draws).exp()
}

/// Respondents sharing answered-pair set and chosen-feature totals.
struct Group {
    pairs: usize,
    stat: Vector3<f64>,
    count: f64,
}

/// Average simulated log-likelihood over a survey, with respondents grouped.
pub struct SurveyObjective {
    pair_sets: Vec<Vec<(usize, usize)>>,
    groups: Vec<Group>,
    respondents: usize,
    draws: CommonRandomDraws,
}

impl SurveyObjective {
    pub fn new(survey: &SurveyDataset, draws: CommonRandomDraws) -> Self {
        let mut set_ids: BTreeMap<u32, usize> = BTreeMap::new();
        let mut pair_sets = Vec::new();
        let mut counts: BTreeMap<(usize, [i64; 3]), f64> = BTreeMap::new();
        for r in survey.respondents() {
            let mask = r.answered_mask();
            let set = *set_ids.entry(mask).or_insert_with(|| {
                pair_sets.push(
                    all_pairs()
                        .enumerate()
                        .filter(|(k, _)| mask & (1 << k) != 0)
                        .map(|(_, (a, b))| (a.index(), b.index()))
                        .collect(),
                );
                pair_sets.len() - 1
            });
            let stat = r.choices().fold(Vector3::zeros(), |s, (_, c)| s + c.features());
            *counts.entry((set, stat.map(|x| x as i64).into())).or_default() += 1.0;
        }
        let groups = counts
            .into_iter()
            .map(|((pairs, s), count)| Group {
                pairs,
                stat: Vector3::new(s[0] as f64, s[1] as f64, s[2] as f64),
                count,
            })
            .collect();
        SurveyObjective {
            pair_sets,
            groups,
            respondents: survey.len(),
            draws,
        }
    }

    pub fn draws(&self) -> &CommonRandomDraws {
        &self.draws
    }

    /// `(1/N) sum_k log L_k(params)`.
    pub fn average_log_likelihood(&self, params: &MvnParams) -> f64 {
        let r_count = self.draws.len();
        let mut lp = vec![0.0; self.groups.len() * r_count];
        let mut norm = vec![0.0; self.pair_sets.len()];
        for (r, z) in self.draws.normals().iter().enumerate() {
            let beta = params.transform(z);
            let u = utilities(&beta);
            for (s, pairs) in self.pair_sets.iter().enumerate() {
                norm[s] = pairs.iter().map(|&(a, b)| log_add_exp(u[a], u[b])).sum();
            }
            for (g, group) in self.groups.iter().enumerate() {
                lp[g * r_count + r] = group.stat.dot(&beta) - norm[group.pairs];
            }
        }
        let total: f64 = self
            .groups
            .iter()
            .enumerate()
            .map(|(g, group)| group.count * log_mean_exp(&lp[g * r_count..(g + 1) * r_count]))
            .sum();
        total / self.respondents as f64
    }
}

#[derive(Clone, Debug)]
pub struct BlpFitConfig {
    /// Number of common random draws `R`.
    pub draws: usize,
    /// Total simplex iterations across restarts.
    pub max_iterations: usize,
    pub seed: u64,
    /// Diagonal of the starting Cholesky factor. Small values start the
    /// search where softplus is nearly flat, and it can then stall with a
    /// variance pinned at zero.
    pub initial_chol_diag: f64,
}

impl Default for BlpFitConfig {
    fn default() -> Self {
        BlpFitConfig {
            draws: 500,
            max_iterations: 2_000,
            seed: 0,
            initial_chol_diag: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlpFit {
    pub params: MvnParams,
    pub initial_params: MvnParams,
    /// Average simulated log-likelihood at `params`.
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub respondents: usize,
    pub draws: usize,
    pub seed: u64,
    pub iterations: usize,
    pub evaluations: usize,
    /// False when the iteration budget ran out; `params` is then the best found.
    pub converged: bool,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inverse(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

/// Unconstrained vector `[mu0, mu1, mu2, d0, l10, d1, l20, l21, d2]`, with the
/// factor diagonal stored through softplus.
fn pack(params: &MvnParams) -> Vec<f64> {
    let m = params.mu();
    let l = params.chol();
    let diag = |v: f64| softplus_inverse(v.max(1e-12));
    vec![
        m[0],
        m[1],
        m[2],
        diag(l[(0, 0)]),
        l[(1, 0)],
        diag(l[(1, 1)]),
        l[(2, 0)],
        l[(2, 1)],
        diag(l[(2, 2)]),
    ]
}

fn unpack(theta: &[f64]) -> Option<MvnParams> {
    let mu = Vector3::new(theta[0], theta[1], theta[2]);
    let chol = Matrix3::new(
        softplus(theta[3]),
        0.0,
        0.0,
        theta[4],
        softplus(theta[5]),
        0.0,
        theta[6],
        theta[7],
        softplus(theta[8]),
    );
    MvnParams::new(mu, chol).ok()
}

/// Fixed-coefficient pairwise logit on the pooled answers, by damped Newton.
/// A tiny ridge keeps it finite when one profile always wins.
pub fn fit_plain_logit(survey: &SurveyDataset) -> Vector3<f64> {
    const RIDGE: f64 = 1e-6;
    // (feature difference, wins of the first profile, comparisons)
    let mut pairs: Vec<(Vector3<f64>, f64, f64)> = Vec::new();
    let wins = survey.win_matrix();
    for (a, b) in all_pairs() {
        let n = wins[a.index()][b.index()] + wins[b.index()][a.index()];
        if n > 0.0 {
            pairs.push((a.features() - b.features(), wins[a.index()][b.index()], n));
        }
    }
    let objective = |beta: &Vector3<f64>| -> f64 {
        pairs
            .iter()
            .map(|(d, w, n)| {
                let x = d.dot(beta);
                -(w * log_add_exp(0.0, -x) + (n - w) * log_add_exp(0.0, x))
            })
            .sum::<f64>()
            - 0.5 * RIDGE * beta.norm_squared()
    };
    let mut beta = Vector3::zeros();
    let mut current = objective(&beta);
    for _ in 0..100 {
        let mut grad = -RIDGE * beta;
        let mut hess = Matrix3::identity() * RIDGE;
        for (d, w, n) in &pairs {
            let p = 1.0 / (1.0 + (-d.dot(&beta)).exp());
            grad += d * (w - n * p);
            hess += d * d.transpose() * (n * p * (1.0 - p));
        }
        let Some(step) = hess.try_inverse().map(|h| h * grad) else {
            break;
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-8 {
            let candidate = beta + step * t;
            let value = objective(&candidate);
            if value >= current {
                beta = candidate;
                current = value;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || step.amax() * t < 1e-10 {
            break;
        }
    }
    beta
}

/// Simulated MLE of `(mu, Sigma)`. Starts from the plain-logit coefficients
/// with `chol = initial_chol_diag * I`; the draws stay fixed throughout.
pub fn fit_blp(survey: &SurveyDataset, config: &BlpFitConfig) -> Result<BlpFit> {
    if survey.is_empty() {
        return Err(Error::Survey("cannot fit an empty survey".into()));
    }
    if config.draws < 100 {
        return Err(Error::Config(format!("need at least 100 draws, got {}", config.draws)));
    }
    if !(config.initial_chol_diag > 0.0) {
        return Err(Error::Config("initial_chol_diag must be positive".into()));
    }
    let objective = SurveyObjective::new(survey, CommonRandomDraws::new(config.draws, config.seed));
    let initial_params = MvnParams::new(
        fit_plain_logit(survey),
        Matrix3::identity() * config.initial_chol_diag,
    )?;
    let initial_log_likelihood = objective.average_log_likelihood(&initial_params);

    let negative = |theta: &[f64]| match unpack(theta) {
        Some(p) => -objective.average_log_likelihood(&p),
        None => f64::INFINITY,
    };

    let mut theta = pack(&initial_params);
    let mut best = -initial_log_likelihood;
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut converged = false;
    // restart from the incumbent until a restart stops helping
    while iterations < config.max_iterations {
        let mut simplex = SimplexConfig::new(theta.len());
        simplex.max_iterations = config.max_iterations - iterations;
        let run = minimize(negative, &theta, &simplex);
        iterations += run.iterations;
        evaluations += run.evaluations;
        let gain = best - run.value;
        if run.value <= best {
            theta = run.x;
            best = run.value;
        }
        if !run.converged {
            break;
        }
        if gain <= 1e-9 {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("simplex search stopped after {iterations} iterations without converging");
    }
    let params = unpack(&theta).ok_or_else(|| Error::Numerical("fitted parameters are not finite".into()))?;
    Ok(BlpFit {
        log_likelihood: -best,
        params,
        initial_params,
        initial_log_likelihood,
        respondents: survey.len(),
        draws: config.draws,
        seed: config.seed,
        iterations,
        evaluations,
        converged,
    })
}

/// Fit diagnostics stored next to the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlpFitMeta {
    pub respondents: usize,
    pub draws: usize,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub seed: u64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Parameter file: `mu` (3 reals), `chol` (row-major lower triangle, 6 reals)
/// and optional fit metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlpParamsFile {
    pub mu: [f64; 3],
    pub chol: [f64; 6],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<BlpFitMeta>,
}

impl BlpParamsFile {
    pub fn params(&self) -> Result<MvnParams> {
        MvnParams::from_lower(self.mu, self.chol)
    }
}

impl From<&BlpFit> for BlpParamsFile {
    fn from(fit: &BlpFit) -> Self {
        BlpParamsFile {
            mu: (*fit.params.mu()).into(),
            chol: fit.params.lower(),
            fit: Some(BlpFitMeta {
                respondents: fit.respondents,
                draws: fit.draws,
                log_likelihood: fit.log_likelihood,
                initial_log_likelihood: fit.initial_log_likelihood,
                seed: fit.seed,
                iterations: fit.iterations,
                evaluations: fit.evaluations,
                converged: fit.converged,
            }),
        }
    }
}

impl From<&MvnParams> for BlpParamsFile {
    fn from(p: &MvnParams) -> Self {
        BlpParamsFile {
            mu: (*p.mu()).into(),
            chol: p.lower(),
            fit: None,
        }
    }
}
