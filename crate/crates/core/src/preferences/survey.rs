//! Pairwise-comparison survey data.
//!
//! Every respondent in a [`SurveyDataset`] answers all 28 unordered profile
//! pairs once. The text form is one row per answer:
//! `respondent_id,profile_i,profile_j,chosen_id` under a header row.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::Rng;

use super::mvn::{sample_beta, MvnParams};
use super::scoring::blp_score;
use crate::error::{Error, Result};
use crate::profile::{PatientProfile, PROFILE_COUNT};

pub const PAIR_COUNT: usize = PROFILE_COUNT * (PROFILE_COUNT - 1) / 2;

/// The 28 unordered pairs `(i, j)` with `i < j`, in lexicographic order.
pub fn all_pairs() -> impl Iterator<Item = (PatientProfile, PatientProfile)> {
    (0..PROFILE_COUNT).flat_map(|i| {
        (i + 1..PROFILE_COUNT).map(move |j| (PatientProfile::from_index(i), PatientProfile::from_index(j)))
    })
}

/// Position of an unordered pair in [`all_pairs`] order.
pub fn pair_index(a: PatientProfile, b: PatientProfile) -> usize {
    let (i, j) = if a < b { (a.index(), b.index()) } else { (b.index(), a.index()) };
    // pairs before row i, then offset within the row
    i * (2 * PROFILE_COUNT - i - 1) / 2 + (j - i - 1)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Respondent {
    pub respondent_id: u64,
    choices: BTreeMap<(PatientProfile, PatientProfile), PatientProfile>,
}

impl Respondent {
    pub fn new(respondent_id: u64) -> Self {
        Respondent {
            respondent_id,
            choices: BTreeMap::new(),
        }
    }

    /// Records the preferred profile of the pair `{a, b}`.
    pub fn record(&mut self, a: PatientProfile, b: PatientProfile, chosen: PatientProfile) -> Result<()> {
        if a == b {
            return Err(Error::Survey(format!("respondent {}: pair ({a},{a}) is not a pair", self.respondent_id)));
        }
        if chosen != a && chosen != b {
            return Err(Error::Survey(format!(
                "respondent {}: chose {chosen} from pair ({a},{b})",
                self.respondent_id
            )));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if self.choices.contains_key(&key) {
            return Err(Error::Survey(format!(
                "respondent {}: pair ({},{}) answered twice",
                self.respondent_id, key.0, key.1
            )));
        }
        self.choices.insert(key, chosen);
        Ok(())
    }

    pub fn choice(&self, a: PatientProfile, b: PatientProfile) -> Option<PatientProfile> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.choices.get(&key).copied()
    }

    /// `((i, j), chosen)` with `i < j`.
    pub fn choices(&self) -> impl Iterator<Item = ((PatientProfile, PatientProfile), PatientProfile)> + '_ {
        self.choices.iter().map(|(&k, &c)| (k, c))
    }

    pub fn answered(&self) -> usize {
        self.choices.len()
    }

    pub fn is_complete(&self) -> bool {
        self.choices.len() == PAIR_COUNT
    }

    /// Bit `pair_index` set for every answered pair.
    pub fn answered_mask(&self) -> u32 {
        self.choices.keys().fold(0, |m, &(a, b)| m | (1 << pair_index(a, b)))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SurveyDataset {
    respondents: Vec<Respondent>,
}

impl SurveyDataset {
    /// Rejects incomplete respondents (listing all offenders) and repeated ids.
    pub fn new(respondents: Vec<Respondent>) -> Result<Self> {
        let incomplete: Vec<String> = respondents
            .iter()
            .filter(|r| !r.is_complete())
            .map(|r| format!("{} ({}/{PAIR_COUNT} pairs)", r.respondent_id, r.answered()))
            .collect();
        if !incomplete.is_empty() {
            return Err(Error::Survey(format!("incomplete respondents: {}", incomplete.join(", "))));
        }
        let mut ids = BTreeSet::new();
        if let Some(r) = respondents.iter().find(|r| !ids.insert(r.respondent_id)) {
            return Err(Error::Survey(format!("respondent id {} repeated", r.respondent_id)));
        }
        Ok(SurveyDataset { respondents })
    }

    pub fn respondents(&self) -> &[Respondent] {
        &self.respondents
    }

    pub fn len(&self) -> usize {
        self.respondents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.respondents.is_empty()
    }

    /// `wins[i][j]`: how often profile `i + 1` was preferred to profile `j + 1`.
    pub fn win_matrix(&self) -> [[f64; PROFILE_COUNT]; PROFILE_COUNT] {
        let mut wins = [[0.0; PROFILE_COUNT]; PROFILE_COUNT];
        for r in &self.respondents {
            for ((a, b), c) in r.choices() {
                let loser = if c == a { b } else { a };
                wins[c.index()][loser.index()] += 1.0;
            }
        }
        wins
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let wrap = |e: csv::Error| Error::io("<survey>", std::io::Error::other(e));
        w.write_record(["respondent_id", "profile_i", "profile_j", "chosen_id"])
            .map_err(wrap)?;
        for r in &self.respondents {
            for ((a, b), c) in r.choices() {
                w.write_record([r.respondent_id.to_string(), a.to_string(), b.to_string(), c.to_string()])
                    .map_err(wrap)?;
            }
        }
        w.flush().map_err(|e| Error::io("<survey>", e))
    }

    /// Parses the survey table. Malformed rows fail with their line number;
    /// incomplete respondents fail with the full list of offenders.
    pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let parse_err = |line: u64, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != ["respondent_id", "profile_i", "profile_j", "chosen_id"] {
            return Err(parse_err(1, "expected header respondent_id,profile_i,profile_j,chosen_id".into()));
        }
        let mut by_id: BTreeMap<u64, Respondent> = BTreeMap::new();
        let mut order = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != 4 {
                return Err(parse_err(line, format!("expected 4 fields, found {}", rec.len())));
            }
            let id: u64 = rec[0].parse().map_err(|_| parse_err(line, "bad respondent_id".into()))?;
            let profile = |i: usize, name: &str| {
                rec[i]
                    .parse::<u8>()
                    .ok()
                    .and_then(|v| PatientProfile::new(v).ok())
                    .ok_or_else(|| parse_err(line, format!("bad {name}")))
            };
            let (a, b, c) = (profile(1, "profile_i")?, profile(2, "profile_j")?, profile(3, "chosen_id")?);
            let r = by_id.entry(id).or_insert_with(|| {
                order.push(id);
                Respondent::new(id)
            });
            r.record(a, b, c).map_err(|e| parse_err(line, e.to_string()))?;
        }
        let respondents = order.into_iter().map(|id| by_id.remove(&id).expect("recorded")).collect();
        SurveyDataset::new(respondents)
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Survey from the random-coefficients logit: each respondent draws one beta,
/// then picks `i` over `j` with probability `exp(u_i) / (exp(u_i) + exp(u_j))`.
pub fn generate_synthetic_survey<R: Rng + ?Sized>(true_params: &MvnParams, n: usize, rng: &mut R) -> SurveyDataset {
    let respondents = (0..n as u64)
        .map(|id| {
            let beta = sample_beta(true_params, rng).beta;
            let mut r = Respondent::new(id);
            for (a, b) in all_pairs() {
                let p_a = logistic(blp_score(a, &beta) - blp_score(b, &beta));
                let chosen = if rng.random::<f64>() < p_a { a } else { b };
                r.record(a, b, chosen).expect("pairs are distinct");
            }
            r
        })
        .collect();
    SurveyDataset { respondents }
}

/// Survey from fixed Bradley-Terry scores, indexed by `id - 1`.
pub fn generate_bt_survey<R: Rng + ?Sized>(scores: &[f64; PROFILE_COUNT], n: usize, rng: &mut R) -> SurveyDataset {
    let respondents = (0..n as u64)
        .map(|id| {
            let mut r = Respondent::new(id);
            for (a, b) in all_pairs() {
                let (sa, sb) = (scores[a.index()], scores[b.index()]);
                let chosen = if rng.random::<f64>() < sa / (sa + sb) { a } else { b };
                r.record(a, b, chosen).expect("pairs are distinct");
            }
            r
        })
        .collect();
    SurveyDataset { respondents }
}
