//! Aggregation of simulation runs into comparison tables.
//!
//! Quartiles are Tukey hinges: the median of the lower and upper halves of the
//! sorted sample, each half including the overall median when the count is odd.
//! Table values are written with 9 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::PROFILE_COUNT;
use crate::rng::run_seed;
use crate::simulator::{average_rank, run_simulation, Condition, RunMetrics, SimConfig};

/// One simulation run, flattened to what the tables need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u32,
    pub condition: Condition,
    pub seed: u64,
    pub average_rank: Option<f64>,
    pub entered: [u64; PROFILE_COUNT],
    pub matched: [u64; PROFILE_COUNT],
}

impl RunRecord {
    pub fn from_metrics(run_id: u32, condition: Condition, seed: u64, metrics: &RunMetrics) -> Self {
        RunRecord {
            run_id,
            condition,
            seed,
            average_rank: average_rank(metrics),
            entered: metrics.entered,
            matched: metrics.matched,
        }
    }

    pub fn total_entered(&self) -> u64 {
        self.entered.iter().sum()
    }

    pub fn total_matched(&self) -> u64 {
        self.matched.iter().sum()
    }

    pub fn proportion_matched(&self) -> Option<f64> {
        ratio(self.total_matched(), self.total_entered())
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Five-number summary with Tukey hinges; `None` for an empty sample.
pub fn quartiles(sample: &[f64]) -> Option<Quartiles> {
    if sample.is_empty() {
        return None;
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let half = n.div_ceil(2);
    Some(Quartiles {
        min: xs[0],
        q1: median_sorted(&xs[..half]),
        median: median_sorted(&xs),
        q3: median_sorted(&xs[n - half..]),
        max: xs[n - 1],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub profile_id: u8,
    /// Run-level proportions, for runs where the profile entered.
    pub proportions: Vec<f64>,
    pub quartiles: Option<Quartiles>,
    pub entered: u64,
    pub matched: u64,
    /// Matched over entered, pooled across runs.
    pub pooled: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub runs: usize,
    /// Run-level average ranks in run order; runs without donations are skipped.
    pub average_ranks: Vec<f64>,
    pub rank_quartiles: Option<Quartiles>,
    pub profiles: Vec<ProfileSummary>,
    pub total_entered: u64,
    pub total_matched: u64,
    pub proportion_matched: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub conditions: Vec<ConditionSummary>,
}

impl ExperimentSummary {
    pub fn condition(&self, condition: Condition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.condition == condition)
    }

    pub fn median_rank(&self, condition: Condition) -> Option<f64> {
        self.condition(condition)?.rank_quartiles.map(|q| q.median)
    }
}

/// Summarizes `runs` for each listed condition, in the order given.
/// Records are taken in `run_id` order within a condition.
pub fn summarize(runs: &[RunRecord], conditions: &[Condition]) -> ExperimentSummary {
    let conditions = conditions
        .iter()
        .map(|&condition| {
            let mut mine: Vec<&RunRecord> = runs.iter().filter(|r| r.condition == condition).collect();
            mine.sort_by_key(|r| r.run_id);
            let average_ranks: Vec<f64> = mine.iter().filter_map(|r| r.average_rank).collect();
            let profiles = (0..PROFILE_COUNT)
                .map(|i| {
                    let proportions: Vec<f64> =
                        mine.iter().filter_map(|r| ratio(r.matched[i], r.entered[i])).collect();
                    let entered = mine.iter().map(|r| r.entered[i]).sum();
                    let matched = mine.iter().map(|r| r.matched[i]).sum();
                    ProfileSummary {
                        profile_id: i as u8 + 1,
                        quartiles: quartiles(&proportions),
                        proportions,
                        entered,
                        matched,
                        pooled: ratio(matched, entered),
                    }
                })
                .collect::<Vec<_>>();
            let total_entered = profiles.iter().map(|p| p.entered).sum();
            let total_matched = profiles.iter().map(|p| p.matched).sum();
            ConditionSummary {
                condition,
                runs: mine.len(),
                rank_quartiles: quartiles(&average_ranks),
                average_ranks,
                profiles,
                total_entered,
                total_matched,
                proportion_matched: ratio(total_matched, total_entered),
            }
        })
        .collect();
    ExperimentSummary { conditions }
}

/// Runs `runs` simulations per condition from `template`, run `k` seeded with
/// `run_seed(master_seed, k)` under every condition. Records come out ordered
/// by run, then by condition in the order given.
pub fn run_experiment(
    template: &SimConfig,
    conditions: &[Condition],
    runs: u32,
    master_seed: u64,
) -> Result<Vec<RunRecord>> {
    let mut out = Vec::with_capacity(runs as usize * conditions.len());
    for run_id in 0..runs {
        let seed = run_seed(master_seed, u64::from(run_id));
        for &condition in conditions {
            let config = SimConfig {
                condition,
                seed,
                ..template.clone()
            };
            let metrics = run_simulation(&config)?;
            log::info!(
                "run {run_id} {condition}: entered {}, matched {}",
                metrics.total_entered(),
                metrics.total_matched()
            );
            out.push(RunRecord::from_metrics(run_id, condition, seed, &metrics));
        }
    }
    Ok(out)
}

/// Decimal text with 9 significant digits and no trailing zeros.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig9).unwrap_or_default()
}

fn quartile_fields(q: Option<Quartiles>) -> String {
    match q {
        Some(q) => [q.min, q.q1, q.median, q.q3, q.max].map(format_sig9).join(","),
        None => ",,,,".to_string(),
    }
}

pub const RANKS_HEADER: &str = "condition,run_id,seed,average_rank";
pub const PROPORTIONS_HEADER: &str = "condition,profile_id,runs,min,q1,median,q3,max,entered,matched,pooled";
pub const CONDITIONS_HEADER: &str =
    "condition,runs,rank_min,rank_q1,rank_median,rank_q3,rank_max,total_entered,total_matched,proportion_matched";

/// Run-level average ranks, one row per run that had donations.
pub fn ranks_table(summary: &ExperimentSummary, runs: &[RunRecord]) -> String {
    let mut out = format!("{RANKS_HEADER}\n");
    for c in &summary.conditions {
        let mut mine: Vec<&RunRecord> = runs.iter().filter(|r| r.condition == c.condition).collect();
        mine.sort_by_key(|r| r.run_id);
        for r in mine {
            if let Some(rank) = r.average_rank {
                out += &format!("{},{},{},{}\n", c.condition, r.run_id, r.seed, format_sig9(rank));
            }
        }
    }
    out
}

/// Per-profile proportion-matched distributions, 8 rows per condition.
pub fn proportions_table(summary: &ExperimentSummary) -> String {
    let mut out = format!("{PROPORTIONS_HEADER}\n");
    for c in &summary.conditions {
        for p in &c.profiles {
            out += &format!(
                "{},{},{},{},{},{},{}\n",
                c.condition,
                p.profile_id,
                p.proportions.len(),
                quartile_fields(p.quartiles),
                p.entered,
                p.matched,
                opt(p.pooled)
            );
        }
    }
    out
}

/// One row per condition: rank distribution and overall proportion matched.
pub fn conditions_table(summary: &ExperimentSummary) -> String {
    let mut out = format!("{CONDITIONS_HEADER}\n");
    for c in &summary.conditions {
        out += &format!(
            "{},{},{},{},{},{}\n",
            c.condition,
            c.runs,
            quartile_fields(c.rank_quartiles),
            c.total_entered,
            c.total_matched,
            opt(c.proportion_matched)
        );
    }
    out
}

pub const RUNS_HEADER_PREFIX: &str = "run_id,condition,seed,average_rank,total_entered,total_matched";

/// The per-run metrics table. Average ranks are written in shortest
/// round-trip form so the table reloads to identical records.
pub fn runs_table(runs: &[RunRecord]) -> String {
    let mut out = RUNS_HEADER_PREFIX.to_string();
    for i in 1..=PROFILE_COUNT {
        out += &format!(",entered_{i},matched_{i}");
    }
    out.push('\n');
    for r in runs {
        out += &format!(
            "{},{},{},{},{},{}",
            r.run_id,
            r.condition,
            r.seed,
            r.average_rank.map(|x| format!("{x}")).unwrap_or_default(),
            r.total_entered(),
            r.total_matched()
        );
        for i in 0..PROFILE_COUNT {
            out += &format!(",{},{}", r.entered[i], r.matched[i]);
        }
        out.push('\n');
    }
    out
}

/// Parses a table written by [`runs_table`].
pub fn read_runs_table(text: &str, source: &str) -> Result<Vec<RunRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line: line as u64,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let expected_columns = 6 + 2 * PROFILE_COUNT;
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.len() != expected_columns || !header.iter().take(6).eq(RUNS_HEADER_PREFIX.split(',')) {
        return Err(parse_err(1, format!("expected header starting {RUNS_HEADER_PREFIX:?}")));
    }
    let mut out = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        if row.len() != expected_columns {
            return Err(parse_err(line, format!("expected {expected_columns} fields, found {}", row.len())));
        }
        let int = |i: usize| -> Result<u64> {
            row[i]
                .parse()
                .map_err(|_| parse_err(line, format!("{} is not an integer: {:?}", &header[i], &row[i])))
        };
        let average_rank = match &row[3] {
            "" => None,
            s => Some(s.parse().map_err(|_| parse_err(line, format!("bad average_rank {s:?}")))?),
        };
        let counts = (6..expected_columns).map(int).collect::<Result<Vec<u64>>>()?;
        let record = RunRecord {
            run_id: u32::try_from(int(0)?).map_err(|_| parse_err(line, "run_id out of range".into()))?,
            condition: row[1].parse().map_err(|e: Error| parse_err(line, e.to_string()))?,
            seed: int(2)?,
            average_rank,
            entered: std::array::from_fn(|i| counts[2 * i]),
            matched: std::array::from_fn(|i| counts[2 * i + 1]),
        };
        if (record.total_entered(), record.total_matched()) != (int(4)?, int(5)?) {
            return Err(parse_err(line, "totals disagree with per-profile counts".into()));
        }
        if record.matched.iter().zip(&record.entered).any(|(m, e)| m > e) {
            return Err(parse_err(line, "matched exceeds entered".into()));
        }
        out.push(record);
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes `ranks.csv`, `proportions.csv` and `conditions.csv` into `dir`,
/// creating it if needed.
pub fn emit_tables(summary: &ExperimentSummary, runs: &[RunRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("ranks.csv"), &ranks_table(summary, runs))?;
    write_file(&dir.join("proportions.csv"), &proportions_table(summary))?;
    write_file(&dir.join("conditions.csv"), &conditions_table(summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(run_id: u32, condition: Condition, rank: Option<f64>, entered: [u64; 8], matched: [u64; 8]) -> RunRecord {
        RunRecord {
            run_id,
            condition,
            seed: 100 + u64::from(run_id),
            average_rank: rank,
            entered,
            matched,
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(quartiles(&[6.0, 2.0, 4.0]).unwrap().median, 4.0);
        let q = quartiles(&[3.5]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (3.5, 3.5, 3.5));
        assert_eq!(quartiles(&[]), None);
    }

    #[test]
    fn tukey_hinges() {
        // odd n: halves include the median
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (2.0, 3.0, 4.0));
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (2.0, 3.5, 5.0));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(3.24), "3.24");
        assert_eq!(format_sig9(2.0 / 3.0), "0.666666667");
        assert_eq!(format_sig9(1234567891234.0), "1234567890000");
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(-0.0), "0");
    }

    #[test]
    fn empty_summary_gives_header_only_tables() {
        let s = summarize(&[], &[]);
        assert_eq!(ranks_table(&s, &[]), format!("{RANKS_HEADER}\n"));
        assert_eq!(proportions_table(&s), format!("{PROPORTIONS_HEADER}\n"));
        assert_eq!(conditions_table(&s), format!("{CONDITIONS_HEADER}\n"));
    }

    #[test]
    fn condition_without_runs_is_absent() {
        let s = summarize(&[], &[Condition::Equal]);
        let c = &s.conditions[0];
        assert_eq!((c.runs, c.rank_quartiles, c.proportion_matched), (0, None, None));
        assert!(conditions_table(&s).ends_with("EQUAL,0,,,,,,0,0,\n"));
    }

    #[test]
    fn pooled_proportions_recombine_to_the_total() {
        let runs = vec![
            record(0, Condition::Equal, Some(4.0), [10, 3, 0, 7, 1, 1, 2, 5], [6, 1, 0, 7, 0, 1, 1, 2]),
            record(1, Condition::Equal, None, [4, 0, 9, 1, 0, 2, 2, 3], [1, 0, 2, 0, 0, 2, 2, 3]),
        ];
        let s = summarize(&runs, &[Condition::Equal]);
        let c = &s.conditions[0];
        let recombined: f64 = c
            .profiles
            .iter()
            .filter_map(|p| p.pooled.map(|x| x * p.entered as f64))
            .sum::<f64>()
            / c.total_entered as f64;
        assert!((recombined - c.proportion_matched.unwrap()).abs() < 1e-9);
        assert_eq!(c.average_ranks, vec![4.0]);
        assert_eq!(c.profiles[2].proportions, vec![2.0 / 9.0]);
    }

    #[test]
    fn proportions_table_has_eight_rows_per_condition() {
        let runs: Vec<RunRecord> = Condition::ALL
            .iter()
            .enumerate()
            .map(|(i, &c)| record(i as u32, c, Some(3.0), [2; 8], [1; 8]))
            .collect();
        let s = summarize(&runs, &Condition::ALL);
        assert_eq!(proportions_table(&s).lines().count(), 1 + 3 * 8);
        assert_eq!(conditions_table(&s).lines().count(), 1 + 3);
    }

    #[test]
    fn runs_table_round_trips() {
        let runs = vec![
            record(0, Condition::Heterogeneous, Some(3.123456789012345), [5, 4, 3, 2, 1, 0, 1, 2], [1, 1, 1, 1, 1, 0, 0, 0]),
            record(1, Condition::Equal, None, [0; 8], [0; 8]),
        ];
        let text = runs_table(&runs);
        assert_eq!(read_runs_table(&text, "runs.csv").unwrap(), runs);
        let bad = text.replacen("HETEROGENEOUS,100,", "HETEROGENEOUS,x,", 1);
        assert!(matches!(read_runs_table(&bad, "runs.csv"), Err(Error::Parse { line: 2, .. })));
    }
}
