//! Daily-matching simulation of an exchange pool.
//!
//! Each day: Poisson arrivals enter (each drawing its beta), every waiting
//! pair independently departs with probability `departure_rate`, then the pool
//! is cleared: cycles up to the length cap, maximum cardinality `Q`, and the
//! condition's weighted program with floor `Q`. Matched pairs leave the pool.
//!
//! Randomness is split so a run replayed under another condition sees the same
//! arrivals, attributes and betas in the same order, and the same crossmatch
//! and departure outcome for any given pair:
//!
//! | stream       | kind                                 |
//! |--------------|--------------------------------------|
//! | arrivals     | sequential, Poisson counts           |
//! | generation   | sequential, pair attributes          |
//! | betas        | sequential, one draw per arrival     |
//! | crossmatch   | keyed by (donor pair, recipient pair)|
//! | departures   | keyed by (pair, day)                 |
//! | ties         | keyed by day                         |
//! | edge noise   | keyed by (donor pair, recipient pair)|

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::clearing::{solve_max_cardinality, solve_weighted_with_floor, Matching, WeightedCycleSet};
use crate::error::{Error, Result};
use crate::graph::{generate_pair, CompatibilityGraph, GeneratorConfig, KeyedCrossmatch, PatientDonorPair};
use crate::preferences::{normalized_profile_weights, rank, sample_beta, BetaSample, BtScores, MvnParams};
use crate::profile::{PatientProfile, PROFILE_COUNT};
use crate::rng::{hash64, unit_from_key, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    Equal,
    Homogeneous,
    Heterogeneous,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Equal, Condition::Homogeneous, Condition::Heterogeneous];

    pub fn label(self) -> &'static str {
        match self {
            Condition::Equal => "EQUAL",
            Condition::Homogeneous => "HOMOGENEOUS",
            Condition::Heterogeneous => "HETEROGENEOUS",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown condition {s:?}")))
    }
}

/// How a donation `u -> v` is valued.
#[derive(Clone, Debug, PartialEq)]
pub enum Weighting {
    /// Every donation is worth 1.
    Equal,
    /// A fixed table over recipient profiles, indexed by `id - 1`.
    Profile([f64; PROFILE_COUNT]),
    /// The donor vertex's own beta, min-max normalized over the profiles.
    /// With a noise key, a frozen standard Gumbel term is added per edge.
    SampledBeta { edge_noise_key: Option<u64> },
}

impl Weighting {
    pub fn for_condition(condition: Condition, bt_scores: Option<&BtScores>) -> Result<Self> {
        Ok(match condition {
            Condition::Equal => Weighting::Equal,
            Condition::Homogeneous => Weighting::Profile(
                *bt_scores
                    .ok_or_else(|| Error::Config("HOMOGENEOUS needs Bradley-Terry scores".into()))?
                    .as_array(),
            ),
            Condition::Heterogeneous => Weighting::SampledBeta { edge_noise_key: None },
        })
    }
}

/// Value of a donation under a condition. `HOMOGENEOUS` without scores, or
/// `HETEROGENEOUS` without a donor beta, is a configuration error.
pub fn edge_weight(
    condition: Condition,
    bt_scores: Option<&BtScores>,
    donor_beta: Option<&Vector3<f64>>,
    recipient: PatientProfile,
) -> Result<f64> {
    match condition {
        Condition::Equal => Ok(1.0),
        Condition::Homogeneous => bt_scores
            .map(|s| s.get(recipient))
            .ok_or_else(|| Error::Config("HOMOGENEOUS needs Bradley-Terry scores".into())),
        Condition::Heterogeneous => donor_beta
            .map(|b| normalized_profile_weights(b)[recipient.index()])
            .ok_or_else(|| Error::Config("HETEROGENEOUS needs a beta for every donor".into())),
    }
}

/// Draws the beta a newly arrived vertex keeps for its whole stay.
pub fn assign_beta<R: Rng + ?Sized>(params: &MvnParams, rng: &mut R) -> BetaSample {
    sample_beta(params, rng)
}

/// Result of clearing one pool once.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolClearing {
    pub matching: Matching,
    /// Maximum cardinality of the pool.
    pub max_cardinality: usize,
    /// `rank(beta_u, profile(v))` for each donation `u -> v`, in matching order.
    pub ranks: Vec<u8>,
}

impl PoolClearing {
    pub fn average_rank(&self) -> Option<f64> {
        if self.ranks.is_empty() {
            None
        } else {
            Some(self.ranks.iter().map(|&r| f64::from(r)).sum::<f64>() / self.ranks.len() as f64)
        }
    }
}

/// Clears a pool: computes `Q` afresh, then solves the weighted program with floor `Q`.
pub fn clear_pool(
    graph: &CompatibilityGraph,
    betas: &BTreeMap<u64, Vector3<f64>>,
    weighting: &Weighting,
    max_cycle_len: usize,
    tie_seed: u64,
) -> Result<PoolClearing> {
    let beta_of = |id: u64| {
        betas
            .get(&id)
            .ok_or_else(|| Error::Config(format!("pair {id} has no sampled beta")))
    };
    let profile_of = |id: u64| graph.pair(id).expect("cycle vertices are in the graph").profile;

    let cycles = graph.enumerate_cycles(max_cycle_len);
    if cycles.is_empty() {
        return Ok(PoolClearing {
            matching: Matching::empty(),
            max_cardinality: 0,
            ranks: Vec::new(),
        });
    }
    let (_, q) = solve_max_cardinality(&WeightedCycleSet::unit(cycles.clone()), hash64(&[tie_seed, 0]));

    let mut donor_tables: BTreeMap<u64, [f64; PROFILE_COUNT]> = BTreeMap::new();
    if let Weighting::SampledBeta { .. } = weighting {
        for c in &cycles {
            for &u in c.vertices() {
                if let std::collections::btree_map::Entry::Vacant(slot) = donor_tables.entry(u) {
                    slot.insert(normalized_profile_weights(beta_of(u)?));
                }
            }
        }
    }
    let weighted = WeightedCycleSet::new(cycles, |u, v| {
        let recipient = profile_of(v).index();
        match weighting {
            Weighting::Equal => 1.0,
            Weighting::Profile(table) => table[recipient],
            Weighting::SampledBeta { edge_noise_key } => {
                let base = donor_tables[&u][recipient];
                match edge_noise_key {
                    Some(key) => base + standard_gumbel(hash64(&[*key, u, v])),
                    None => base,
                }
            }
        }
    });
    let matching = solve_weighted_with_floor(&weighted, q, hash64(&[tie_seed, 1]))?;
    let ranks = matching
        .donations()
        .map(|(u, v)| Ok(rank(beta_of(u)?, profile_of(v))))
        .collect::<Result<Vec<u8>>>()?;
    Ok(PoolClearing {
        matching,
        max_cardinality: q,
        ranks,
    })
}

fn standard_gumbel(key: u64) -> f64 {
    let u = unit_from_key(key).max(f64::MIN_POSITIVE);
    -(-u.ln()).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub horizon_days: u32,
    /// Expected arrivals per day.
    pub arrival_rate: f64,
    /// Daily departure probability of each waiting pair.
    pub departure_rate: f64,
    pub max_cycle_len: usize,
    pub condition: Condition,
    pub bt_scores: Option<BtScores>,
    /// Betas are drawn from this in every condition; ranks always use them.
    pub blp_params: MvnParams,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub gumbel_edge_noise: bool,
}

impl SimConfig {
    /// 365 days, one arrival a day on average, 0.5% daily departure, 3-cycles.
    pub fn desk(condition: Condition, bt_scores: Option<BtScores>, blp_params: MvnParams, seed: u64) -> Self {
        SimConfig {
            horizon_days: 365,
            arrival_rate: 1.0,
            departure_rate: 0.005,
            max_cycle_len: 3,
            condition,
            bt_scores,
            blp_params,
            seed,
            generator: GeneratorConfig::default(),
            gumbel_edge_noise: false,
        }
    }

    /// Five simulated years.
    pub fn five_years(condition: Condition, bt_scores: Option<BtScores>, blp_params: MvnParams, seed: u64) -> Self {
        SimConfig {
            horizon_days: 5 * 365,
            ..Self::desk(condition, bt_scores, blp_params, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::Config(format!("arrival_rate {} must be >= 0", self.arrival_rate)));
        }
        if !(0.0..=1.0).contains(&self.departure_rate) {
            return Err(Error::Config(format!("departure_rate {} must be in [0, 1]", self.departure_rate)));
        }
        if self.max_cycle_len < 2 {
            return Err(Error::Config("max_cycle_len must be at least 2".into()));
        }
        if self.condition == Condition::Homogeneous && self.bt_scores.is_none() {
            return Err(Error::Config("HOMOGENEOUS needs Bradley-Terry scores".into()));
        }
        self.generator.validate()
    }

    fn weighting(&self) -> Result<Weighting> {
        Ok(match Weighting::for_condition(self.condition, self.bt_scores.as_ref())? {
            Weighting::SampledBeta { .. } if self.gumbel_edge_noise => Weighting::SampledBeta {
                edge_noise_key: Some(Stream::EdgeNoise.key(self.seed)),
            },
            w => w,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Mean donation rank of every matching that had at least one donation.
    pub matching_average_ranks: Vec<f64>,
    /// Per profile, indexed by `id - 1`.
    pub entered: [u64; PROFILE_COUNT],
    pub matched: [u64; PROFILE_COUNT],
    pub departed: [u64; PROFILE_COUNT],
    /// Vertices matched on each simulated day.
    pub daily_matched: Vec<u32>,
}

impl RunMetrics {
    pub fn total_entered(&self) -> u64 {
        self.entered.iter().sum()
    }

    pub fn total_matched(&self) -> u64 {
        self.matched.iter().sum()
    }

    pub fn total_departed(&self) -> u64 {
        self.departed.iter().sum()
    }

    pub fn waiting(&self) -> [u64; PROFILE_COUNT] {
        std::array::from_fn(|i| self.entered[i] - self.matched[i] - self.departed[i])
    }
}

/// Mean over matchings of the mean donation rank; `None` if nothing was matched.
pub fn average_rank(metrics: &RunMetrics) -> Option<f64> {
    let r = &metrics.matching_average_ranks;
    if r.is_empty() {
        None
    } else {
        Some(r.iter().sum::<f64>() / r.len() as f64)
    }
}

/// Matched over entered per profile; `None` for profiles that never entered.
pub fn proportion_matched(metrics: &RunMetrics) -> [Option<f64>; PROFILE_COUNT] {
    std::array::from_fn(|i| {
        (metrics.entered[i] > 0).then(|| metrics.matched[i] as f64 / metrics.entered[i] as f64)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DaySummary {
    pub day: u32,
    pub arrived: usize,
    pub departed: usize,
    pub matched: usize,
    pub max_cardinality: usize,
    pub average_rank: Option<f64>,
    pub pool_size: usize,
}

pub struct SimState {
    config: SimConfig,
    weighting: Weighting,
    graph: CompatibilityGraph,
    betas: BTreeMap<u64, Vector3<f64>>,
    day: u32,
    next_pair_id: u64,
    arrivals: ChaCha8Rng,
    generation: ChaCha8Rng,
    beta_stream: ChaCha8Rng,
    crossmatch: KeyedCrossmatch,
    metrics: RunMetrics,
}

impl SimState {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        Ok(SimState {
            weighting: config.weighting()?,
            graph: CompatibilityGraph::with_crossmatch(config.generator.pra_enabled),
            betas: BTreeMap::new(),
            day: 0,
            next_pair_id: 0,
            arrivals: Stream::Arrivals.rng(seed),
            generation: Stream::Generation.rng(seed),
            beta_stream: Stream::Betas.rng(seed),
            crossmatch: KeyedCrossmatch::new(Stream::Crossmatch.key(seed)),
            metrics: RunMetrics::default(),
            config,
        })
    }

    /// Starts from an existing pool; its pairs count as entered and receive betas
    /// from the beta stream in pair-id order.
    pub fn with_pool(config: SimConfig, pool: CompatibilityGraph) -> Result<Self> {
        let mut state = SimState::new(config)?;
        for pair in pool.pairs() {
            state.metrics.entered[pair.profile.index()] += 1;
            let beta = assign_beta(&state.config.blp_params, &mut state.beta_stream).beta;
            state.betas.insert(pair.pair_id, beta);
            state.next_pair_id = state.next_pair_id.max(pair.pair_id + 1);
        }
        state.graph = pool;
        Ok(state)
    }

    pub fn graph(&self) -> &CompatibilityGraph {
        &self.graph
    }

    pub fn betas(&self) -> &BTreeMap<u64, Vector3<f64>> {
        &self.betas
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    fn admit(&mut self, pair: PatientDonorPair) -> Result<()> {
        let id = pair.pair_id;
        let profile = pair.profile;
        self.graph.add_pair(pair, &mut self.crossmatch)?;
        let beta = assign_beta(&self.config.blp_params, &mut self.beta_stream).beta;
        self.betas.insert(id, beta);
        self.metrics.entered[profile.index()] += 1;
        Ok(())
    }

    /// Arrivals then departures for the current day; returns their counts.
    /// [`SimState::clear_day`] completes the day.
    pub fn begin_day(&mut self) -> Result<(usize, usize)> {
        let day = self.day;
        let rate = self.config.arrival_rate;
        let arrivals = if rate > 0.0 {
            let poisson = Poisson::new(rate).map_err(|e| Error::Config(e.to_string()))?;
            poisson.sample(&mut self.arrivals) as usize
        } else {
            0
        };
        for _ in 0..arrivals {
            let pair = generate_pair(&mut self.generation, &self.config.generator, self.next_pair_id, day)?;
            self.next_pair_id += 1;
            self.admit(pair)?;
        }

        let departure_key = Stream::Departures.key(self.config.seed);
        let leaving: Vec<u64> = self
            .graph
            .pairs()
            .filter(|p| unit_from_key(hash64(&[departure_key, p.pair_id, u64::from(day)])) < self.config.departure_rate)
            .map(|p| p.pair_id)
            .collect();
        for id in &leaving {
            let pair = self.graph.remove_pair(*id).expect("listed from the graph");
            self.betas.remove(id);
            self.metrics.departed[pair.profile.index()] += 1;
        }
        Ok((arrivals, leaving.len()))
    }

    /// Tie-breaking seed of the current day's clearing.
    pub fn tie_seed(&self) -> u64 {
        hash64(&[Stream::Ties.key(self.config.seed), u64::from(self.day)])
    }

    pub fn weighting(&self) -> &Weighting {
        &self.weighting
    }

    /// Clears the pool, removes matched pairs, records metrics and advances the day.
    pub fn clear_day(&mut self) -> Result<PoolClearing> {
        let cleared = clear_pool(
            &self.graph,
            &self.betas,
            &self.weighting,
            self.config.max_cycle_len,
            self.tie_seed(),
        )?;
        for id in cleared.matching.covered() {
            let pair = self.graph.remove_pair(id).expect("matched vertices are in the pool");
            self.betas.remove(&id);
            self.metrics.matched[pair.profile.index()] += 1;
        }
        if let Some(r) = cleared.average_rank() {
            self.metrics.matching_average_ranks.push(r);
        }
        self.metrics.daily_matched.push(cleared.matching.cardinality as u32);
        self.day += 1;
        Ok(cleared)
    }

    pub fn step_day(&mut self) -> Result<DaySummary> {
        let day = self.day;
        let (arrived, departed) = self.begin_day()?;
        let cleared = self.clear_day()?;
        Ok(DaySummary {
            day,
            arrived,
            departed,
            matched: cleared.matching.cardinality,
            max_cardinality: cleared.max_cardinality,
            average_rank: cleared.average_rank(),
            pool_size: self.graph.len(),
        })
    }

    pub fn into_metrics(self) -> RunMetrics {
        self.metrics
    }
}

pub fn run_simulation(config: &SimConfig) -> Result<RunMetrics> {
    let mut state = SimState::new(config.clone())?;
    for _ in 0..config.horizon_days {
        state.step_day()?;
    }
    Ok(state.into_metrics())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::two_cycle_fixture;
    use nalgebra::Matrix3;

    fn point_mass(mu: [f64; 3]) -> MvnParams {
        MvnParams::new(Vector3::from(mu), Matrix3::zeros()).unwrap()
    }

    fn default_blp() -> MvnParams {
        MvnParams::diagonal(Vector3::new(2.0, 1.0, 0.5), Vector3::new(1.0, 0.5, 0.25)).unwrap()
    }

    #[test]
    fn condition_labels_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.label().parse::<Condition>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.label()));
        }
        assert!("MIXED".parse::<Condition>().is_err());
    }

    #[test]
    fn edge_weight_examples() {
        let bt = BtScores::reference();
        let p = |id| PatientProfile::new(id).unwrap();
        assert_eq!(edge_weight(Condition::Homogeneous, Some(&bt), None, p(4)).unwrap(), 0.036);
        assert_eq!(edge_weight(Condition::Equal, None, None, p(8)).unwrap(), 1.0);
        let ones = Vector3::new(1.0, 1.0, 1.0);
        let w = edge_weight(Condition::Heterogeneous, None, Some(&ones), p(3)).unwrap();
        assert!((w - 2.0 / 3.0).abs() < 1e-15);
        assert!(edge_weight(Condition::Homogeneous, None, None, p(1)).is_err());
        assert!(edge_weight(Condition::Heterogeneous, None, None, p(1)).is_err());
    }

    #[test]
    fn degenerate_distribution_gives_every_vertex_mu() {
        let params = point_mass([0.7, -0.2, 1.1]);
        let mut rng = Stream::Betas.rng(1);
        for _ in 0..20 {
            assert_eq!(assign_beta(&params, &mut rng).beta, *params.mu());
        }
    }

    #[test]
    fn empty_pool_with_no_arrivals_is_a_no_op() {
        let mut cfg = SimConfig::desk(Condition::Equal, None, default_blp(), 3);
        cfg.arrival_rate = 0.0;
        let mut state = SimState::new(cfg).unwrap();
        let day = state.step_day().unwrap();
        assert_eq!((day.arrived, day.departed, day.matched, day.pool_size), (0, 0, 0, 0));
        assert_eq!(state.metrics().daily_matched, vec![0]);
    }

    #[test]
    fn fixture_pool_matches_one_of_the_two_cycles() {
        let p = PatientProfile::ALL;
        let mut seen = [false; 2];
        for seed in 0..40 {
            let mut cfg = SimConfig::desk(Condition::Equal, None, default_blp(), seed);
            cfg.arrival_rate = 0.0;
            cfg.departure_rate = 0.0;
            let mut state = SimState::with_pool(cfg, two_cycle_fixture([p[0], p[2], p[7]])).unwrap();
            let day = state.step_day().unwrap();
            assert_eq!(day.matched, 2);
            assert_eq!(state.graph().len(), 1);
            assert!(state.graph().pair(2).is_none());
            seen[if state.graph().pair(3).is_some() { 0 } else { 1 }] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn full_departure_empties_the_pool() {
        let mut cfg = SimConfig::desk(Condition::Equal, None, default_blp(), 5);
        cfg.arrival_rate = 4.0;
        cfg.departure_rate = 1.0;
        let mut state = SimState::new(cfg).unwrap();
        for _ in 0..5 {
            let day = state.step_day().unwrap();
            assert_eq!(day.pool_size, 0);
            assert_eq!(day.matched, 0);
        }
    }

    #[test]
    fn zero_horizon_gives_empty_metrics() {
        let cfg = SimConfig {
            horizon_days: 0,
            ..SimConfig::desk(Condition::Equal, None, default_blp(), 1)
        };
        let m = run_simulation(&cfg).unwrap();
        assert_eq!(m, RunMetrics::default());
        assert_eq!(average_rank(&m), None);
        assert_eq!(proportion_matched(&m), [None; 8]);
    }

    #[test]
    fn metric_arithmetic() {
        let m = RunMetrics {
            matching_average_ranks: vec![2.0, 4.0],
            entered: [10, 10, 8, 0, 0, 0, 0, 0],
            matched: [10, 0, 5, 0, 0, 0, 0, 0],
            ..Default::default()
        };
        assert_eq!(average_rank(&m), Some(3.0));
        let p = proportion_matched(&m);
        assert_eq!(&p[..4], &[Some(1.0), Some(0.0), Some(0.625), None]);
        let single = PoolClearing {
            matching: Matching::empty(),
            max_cardinality: 0,
            ranks: vec![1, 3],
        };
        assert_eq!(single.average_rank(), Some(2.0));
    }

    #[test]
    fn homogeneous_requires_scores() {
        let cfg = SimConfig::desk(Condition::Homogeneous, None, default_blp(), 1);
        assert!(matches!(SimState::new(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn runs_are_deterministic_and_conserve_pairs() {
        for condition in Condition::ALL {
            let cfg = SimConfig {
                horizon_days: 60,
                arrival_rate: 2.0,
                departure_rate: 0.02,
                ..SimConfig::desk(condition, Some(BtScores::reference()), default_blp(), 17)
            };
            let mut state = SimState::new(cfg.clone()).unwrap();
            for _ in 0..cfg.horizon_days {
                state.step_day().unwrap();
                let m = state.metrics();
                let waiting = m.waiting();
                let mut in_pool = [0u64; 8];
                for p in state.graph().pairs() {
                    in_pool[p.profile.index()] += 1;
                }
                assert_eq!(waiting, in_pool);
            }
            let a = state.into_metrics();
            assert_eq!(a, run_simulation(&cfg).unwrap());
            assert!(a.total_matched() > 0);
        }
    }

    #[test]
    fn ranks_are_in_range() {
        let cfg = SimConfig {
            horizon_days: 60,
            arrival_rate: 2.0,
            ..SimConfig::desk(Condition::Heterogeneous, None, default_blp(), 2)
        };
        let m = run_simulation(&cfg).unwrap();
        assert!(!m.matching_average_ranks.is_empty());
        assert!(m.matching_average_ranks.iter().all(|r| (1.0..=8.0).contains(r)));
    }
}
