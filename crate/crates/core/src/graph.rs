//! Pools of incompatible patient-donor pairs as directed compatibility graphs.
//!
//! A vertex is one patient-donor pair. An edge `u -> v` means the donor of `u`
//! can give to the patient of `v`: ABO-compatible and a crossmatch that was
//! drawn once, when the later of the two pairs entered the pool.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{PatientProfile, PROFILE_COUNT};
use crate::rng::{hash64, unit_from_key};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BloodType {
    O,
    A,
    B,
    AB,
}

impl BloodType {
    pub const ALL: [BloodType; 4] = [BloodType::O, BloodType::A, BloodType::B, BloodType::AB];

    fn antigens(self) -> u8 {
        match self {
            BloodType::O => 0b00,
            BloodType::A => 0b01,
            BloodType::B => 0b10,
            BloodType::AB => 0b11,
        }
    }
}

impl fmt::Display for BloodType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BloodType::O => "O",
            BloodType::A => "A",
            BloodType::B => "B",
            BloodType::AB => "AB",
        })
    }
}

impl FromStr for BloodType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "O" => Ok(BloodType::O),
            "A" => Ok(BloodType::A),
            "B" => Ok(BloodType::B),
            "AB" => Ok(BloodType::AB),
            other => Err(Error::Domain(format!("unknown blood type {other:?}"))),
        }
    }
}

/// ABO rule: the donor's antigens must be a subset of the patient's.
pub fn blood_compatible(donor: BloodType, patient: BloodType) -> bool {
    donor.antigens() & !patient.antigens() == 0
}

/// Why a pair could not donate internally.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Incompatibility {
    Blood,
    Crossmatch,
    /// Generation gave up finding a naturally incompatible pair.
    Declared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientDonorPair {
    pub pair_id: u64,
    pub donor_blood: BloodType,
    pub patient_blood: BloodType,
    pub patient_pra: f64,
    pub profile: PatientProfile,
    pub arrival_day: u32,
    pub incompatibility: Incompatibility,
}

/// Saidman-style pair generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    /// Shares of O, A, B, AB; used for both donors and patients.
    pub blood_freqs: [f64; 4],
    /// `(pra, probability)` buckets.
    pub pra_buckets: Vec<(f64, f64)>,
    pub profile_weights: [f64; PROFILE_COUNT],
    /// With crossmatch disabled the graph is pure ABO.
    pub pra_enabled: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            blood_freqs: [0.4814, 0.3373, 0.1428, 0.0385],
            pra_buckets: vec![(0.05, 0.7019), (0.45, 0.20), (0.90, 0.0981)],
            profile_weights: [1.0 / PROFILE_COUNT as f64; PROFILE_COUNT],
            pra_enabled: true,
        }
    }
}

const DISTRIBUTION_TOLERANCE: f64 = 1e-9;
const MAX_GENERATION_ATTEMPTS: usize = 1_000;

fn check_distribution(name: &str, weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Config(format!("{name} has a negative or non-finite weight")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::Config(format!("{name} sums to {total}, expected 1")));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        check_distribution("blood_freqs", &self.blood_freqs)?;
        let pra_probs: Vec<f64> = self.pra_buckets.iter().map(|b| b.1).collect();
        check_distribution("pra_buckets", &pra_probs)?;
        if let Some((pra, _)) = self.pra_buckets.iter().find(|b| !(0.0..=1.0).contains(&b.0)) {
            return Err(Error::Config(format!("pra value {pra} is outside [0, 1]")));
        }
        check_distribution("profile_weights", &self.profile_weights)
    }
}

fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative total; take the last positive bucket
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Draws one internally incompatible pair.
///
/// A blood-compatible draw is kept only if its internal crossmatch fails,
/// allowing one crossmatch resample; otherwise the whole pair is redrawn. After
/// 1,000 redraws the last draw is declared incompatible.
pub fn generate_pair<R: Rng + ?Sized>(
    rng: &mut R,
    config: &GeneratorConfig,
    pair_id: u64,
    arrival_day: u32,
) -> Result<PatientDonorPair> {
    config.validate()?;
    let pra_probs: Vec<f64> = config.pra_buckets.iter().map(|b| b.1).collect();
    let draw = |rng: &mut R| {
        let patient_blood = BloodType::ALL[categorical(rng, &config.blood_freqs)];
        let donor_blood = BloodType::ALL[categorical(rng, &config.blood_freqs)];
        let patient_pra = config.pra_buckets[categorical(rng, &pra_probs)].0;
        let profile = PatientProfile::from_index(categorical(rng, &config.profile_weights));
        PatientDonorPair {
            pair_id,
            donor_blood,
            patient_blood,
            patient_pra,
            profile,
            arrival_day,
            incompatibility: Incompatibility::Declared,
        }
    };

    let mut last = None;
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut pair = draw(rng);
        if !blood_compatible(pair.donor_blood, pair.patient_blood) {
            pair.incompatibility = Incompatibility::Blood;
            return Ok(pair);
        }
        if config.pra_enabled {
            for _ in 0..2 {
                if rng.random::<f64>() < pair.patient_pra {
                    pair.incompatibility = Incompatibility::Crossmatch;
                    return Ok(pair);
                }
            }
        }
        last = Some(pair);
    }
    let mut pair = last.expect("at least one attempt");
    pair.incompatibility = Incompatibility::Declared;
    Ok(pair)
}

/// Source of crossmatch outcomes for new edges.
pub trait CrossmatchSampler {
    /// Whether the donor of pair `donor_id` passes a crossmatch against `recipient`.
    fn passes(&mut self, donor_id: u64, recipient: &PatientDonorPair) -> bool;
}

impl<R: RngCore> CrossmatchSampler for R {
    fn passes(&mut self, _donor_id: u64, recipient: &PatientDonorPair) -> bool {
        self.random::<f64>() >= recipient.patient_pra
    }
}

/// Counter-based crossmatch: the outcome for a directed edge depends only on
/// `(key, donor_id, recipient_id)`, never on insertion history.
#[derive(Clone, Copy, Debug)]
pub struct KeyedCrossmatch {
    key: u64,
}

impl KeyedCrossmatch {
    pub fn new(key: u64) -> Self {
        KeyedCrossmatch { key }
    }
}

impl CrossmatchSampler for KeyedCrossmatch {
    fn passes(&mut self, donor_id: u64, recipient: &PatientDonorPair) -> bool {
        unit_from_key(hash64(&[self.key, donor_id, recipient.pair_id])) >= recipient.patient_pra
    }
}

/// A simple directed cycle, stored rotated so that the smallest pair id comes first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cycle(Vec<u64>);

impl Cycle {
    /// Canonicalizes the rotation. Panics on fewer than two or repeated vertices.
    pub fn new(mut vertices: Vec<u64>) -> Self {
        assert!(vertices.len() >= 2, "a cycle needs at least two vertices");
        let distinct: BTreeSet<u64> = vertices.iter().copied().collect();
        assert_eq!(distinct.len(), vertices.len(), "cycle vertices must be distinct");
        let start = vertices
            .iter()
            .enumerate()
            .min_by_key(|(_, v)| **v)
            .map(|(i, _)| i)
            .unwrap_or(0);
        vertices.rotate_left(start);
        Cycle(vertices)
    }

    pub fn vertices(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Donations `(donor_pair, recipient_pair)` in cycle order, closing edge last.
    pub fn edges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let n = self.0.len();
        (0..n).map(move |i| (self.0[i], self.0[(i + 1) % n]))
    }

    pub fn contains(&self, v: u64) -> bool {
        self.0.contains(&v)
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        write!(f, "({})", parts.join(" "))
    }
}

#[derive(Clone, Debug, Default)]
pub struct CompatibilityGraph {
    pairs: BTreeMap<u64, PatientDonorPair>,
    out: BTreeMap<u64, BTreeSet<u64>>,
    inc: BTreeMap<u64, BTreeSet<u64>>,
    pra_enabled: bool,
}

impl CompatibilityGraph {
    pub fn new() -> Self {
        Self::with_crossmatch(true)
    }

    /// With `pra_enabled = false` every ABO-compatible ordered pair gets an edge.
    pub fn with_crossmatch(pra_enabled: bool) -> Self {
        CompatibilityGraph {
            pra_enabled,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(BTreeSet::len).sum()
    }

    pub fn pair(&self, id: u64) -> Option<&PatientDonorPair> {
        self.pairs.get(&id)
    }

    pub fn pairs(&self) -> impl Iterator<Item = &PatientDonorPair> {
        self.pairs.values()
    }

    pub fn has_edge(&self, from: u64, to: u64) -> bool {
        self.out.get(&from).is_some_and(|s| s.contains(&to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.out
            .iter()
            .flat_map(|(&u, targets)| targets.iter().map(move |&v| (u, v)))
    }

    pub fn successors(&self, id: u64) -> impl Iterator<Item = u64> + '_ {
        self.out.get(&id).into_iter().flatten().copied()
    }

    /// Inserts a pair and draws crossmatches against every existing vertex,
    /// in pair-id order, outgoing edge before incoming edge. Returns the new edges.
    pub fn add_pair<S: CrossmatchSampler + ?Sized>(
        &mut self,
        pair: PatientDonorPair,
        crossmatch: &mut S,
    ) -> Result<Vec<(u64, u64)>> {
        let id = pair.pair_id;
        if self.pairs.contains_key(&id) {
            return Err(Error::DuplicatePair(id));
        }
        let mut added = Vec::new();
        for other in self.pairs.values() {
            if self.donation_allowed(&pair, other, crossmatch) {
                added.push((id, other.pair_id));
            }
            if self.donation_allowed(other, &pair, crossmatch) {
                added.push((other.pair_id, id));
            }
        }
        self.pairs.insert(id, pair);
        self.out.entry(id).or_default();
        self.inc.entry(id).or_default();
        for &(u, v) in &added {
            self.out.entry(u).or_default().insert(v);
            self.inc.entry(v).or_default().insert(u);
        }
        Ok(added)
    }

    fn donation_allowed<S: CrossmatchSampler + ?Sized>(
        &self,
        donor: &PatientDonorPair,
        recipient: &PatientDonorPair,
        crossmatch: &mut S,
    ) -> bool {
        blood_compatible(donor.donor_blood, recipient.patient_blood)
            && (!self.pra_enabled || crossmatch.passes(donor.pair_id, recipient))
    }

    pub fn remove_pair(&mut self, id: u64) -> Option<PatientDonorPair> {
        let pair = self.pairs.remove(&id)?;
        for v in self.out.remove(&id).unwrap_or_default() {
            if let Some(s) = self.inc.get_mut(&v) {
                s.remove(&id);
            }
        }
        for u in self.inc.remove(&id).unwrap_or_default() {
            if let Some(s) = self.out.get_mut(&u) {
                s.remove(&id);
            }
        }
        Some(pair)
    }

    /// Every simple directed cycle with 2..=`max_len` vertices, canonical and sorted.
    pub fn enumerate_cycles(&self, max_len: usize) -> Vec<Cycle> {
        assert!(max_len >= 2, "cycle length cap must be at least 2");
        let ids: Vec<u64> = self.pairs.keys().copied().collect();
        let n = ids.len();
        let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut closes = vec![false; n * n];
        for (u, v) in self.edges() {
            let (iu, iv) = (index[&u], index[&v]);
            adj[iu].push(iv);
            closes[iu * n + iv] = true;
        }

        let mut cycles = Vec::new();
        let mut path = Vec::with_capacity(max_len);
        let mut on_path = vec![false; n];
        for start in 0..n {
            path.push(start);
            on_path[start] = true;
            extend_paths(start, &adj, &closes, n, max_len, &mut path, &mut on_path, &mut |p| {
                cycles.push(Cycle(p.iter().map(|&i| ids[i]).collect()));
            });
            on_path[start] = false;
            path.pop();
        }
        cycles.sort();
        cycles
    }

    pub fn write_pool<W: Write>(&self, writer: W) -> Result<()> {
        write_pool(self.pairs.values(), writer)
    }
}

#[allow(clippy::too_many_arguments)]
fn extend_paths(
    start: usize,
    adj: &[Vec<usize>],
    closes: &[bool],
    n: usize,
    max_len: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    emit: &mut dyn FnMut(&[usize]),
) {
    let last = *path.last().expect("path starts at `start`");
    for &next in &adj[last] {
        // the start is the smallest index on the cycle
        if next <= start || on_path[next] {
            continue;
        }
        path.push(next);
        on_path[next] = true;
        if closes[next * n + start] {
            emit(path);
        }
        if path.len() < max_len {
            extend_paths(start, adj, closes, n, max_len, path, on_path, emit);
        }
        on_path[next] = false;
        path.pop();
    }
}

const POOL_HEADER: [&str; 6] = [
    "pair_id",
    "donor_blood",
    "patient_blood",
    "pra",
    "profile_id",
    "arrival_day",
];

/// Writes the pool snapshot table.
pub fn write_pool<'a, W: Write>(
    pairs: impl IntoIterator<Item = &'a PatientDonorPair>,
    writer: W,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let wrap = |e: csv::Error| Error::io("<pool>", std::io::Error::other(e));
    w.write_record(POOL_HEADER).map_err(wrap)?;
    for p in pairs {
        w.write_record([
            p.pair_id.to_string(),
            p.donor_blood.to_string(),
            p.patient_blood.to_string(),
            p.patient_pra.to_string(),
            p.profile.id().to_string(),
            p.arrival_day.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<pool>", e))
}

/// Reads a pool snapshot. Internal incompatibility is reconstructed as `Blood`
/// when the ABO types forbid it and `Crossmatch` otherwise.
pub fn read_pool<R: Read>(reader: R, source: &str) -> Result<Vec<PatientDonorPair>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != POOL_HEADER {
        return Err(parse_err(1, format!("expected header {}", POOL_HEADER.join(","))));
    }
    let mut pairs = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str| parse_err(line, format!("bad {what}"));
        let pair_id: u64 = field(0).parse().map_err(|_| bad("pair_id"))?;
        let donor_blood: BloodType = field(1).parse().map_err(|_| bad("donor_blood"))?;
        let patient_blood: BloodType = field(2).parse().map_err(|_| bad("patient_blood"))?;
        let patient_pra: f64 = field(3).parse().map_err(|_| bad("pra"))?;
        if !(0.0..=1.0).contains(&patient_pra) {
            return Err(bad("pra"));
        }
        let profile = field(4)
            .parse::<u8>()
            .ok()
            .and_then(|id| PatientProfile::new(id).ok())
            .ok_or_else(|| bad("profile_id"))?;
        let arrival_day: u32 = field(5).parse().map_err(|_| bad("arrival_day"))?;
        if !seen.insert(pair_id) {
            return Err(parse_err(line, format!("duplicate pair_id {pair_id}")));
        }
        let incompatibility = if blood_compatible(donor_blood, patient_blood) {
            Incompatibility::Crossmatch
        } else {
            Incompatibility::Blood
        };
        pairs.push(PatientDonorPair {
            pair_id,
            donor_blood,
            patient_blood,
            patient_pra,
            profile,
            arrival_day,
            incompatibility,
        });
    }
    Ok(pairs)
}

/// The three-vertex pool drawn in the classic two-overlapping-cycles example:
/// `v1 = (d:A, p:B)`, `v2 = (d:B, p:A)`, `v3 = (d:A, p:B)`, all with PRA 0.
/// Its only cycles are `(1 2)` and `(2 3)`.
pub fn two_cycle_fixture(profiles: [PatientProfile; 3]) -> CompatibilityGraph {
    let mk = |id: u64, donor, patient, profile| PatientDonorPair {
        pair_id: id,
        donor_blood: donor,
        patient_blood: patient,
        patient_pra: 0.0,
        profile,
        arrival_day: 0,
        incompatibility: Incompatibility::Blood,
    };
    let mut g = CompatibilityGraph::with_crossmatch(false);
    let mut never = KeyedCrossmatch::new(0);
    for pair in [
        mk(1, BloodType::A, BloodType::B, profiles[0]),
        mk(2, BloodType::B, BloodType::A, profiles[1]),
        mk(3, BloodType::A, BloodType::B, profiles[2]),
    ] {
        g.add_pair(pair, &mut never).expect("fixture ids are distinct");
    }
    g
}
