use kidney_exchange::preferences::{BtScores, MvnParams};
use kidney_exchange::report::{
    conditions_table, emit_tables, format_sig9, proportions_table, quartiles, ranks_table, read_runs_table,
    run_experiment, runs_table, summarize, RunRecord,
};
use kidney_exchange::rng::run_seed;
use kidney_exchange::simulator::{Condition, SimConfig};
use kidney_exchange::Error;
use nalgebra::Vector3;
use proptest::prelude::*;

/// Value at Tukey depth `d` (1-based, possibly a half) of a sorted sample.
fn at_depth(xs: &[f64], d: f64) -> f64 {
    (xs[d.floor() as usize - 1] + xs[d.ceil() as usize - 1]) / 2.0
}

fn record_strategy() -> impl Strategy<Value = RunRecord> {
    (
        0u32..50,
        prop::sample::select(Condition::ALL.to_vec()),
        any::<u64>(),
        prop::option::of(1.0f64..8.0),
        prop::array::uniform8((0u64..40, 0u64..40)),
    )
        .prop_map(|(run_id, condition, seed, average_rank, counts)| RunRecord {
            run_id,
            condition,
            seed,
            average_rank,
            entered: counts.map(|(a, b)| a + b),
            matched: counts.map(|(a, _)| a),
        })
}

proptest! {
    #[test]
    fn hinges_match_tukey_depths(sample in prop::collection::vec(-100.0f64..100.0, 1..40)) {
        let mut xs = sample.clone();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let median_depth = (n + 1.0) / 2.0;
        let hinge_depth = (median_depth.floor() + 1.0) / 2.0;
        let q = quartiles(&sample).unwrap();
        prop_assert_eq!(q.min, xs[0]);
        prop_assert_eq!(q.max, xs[xs.len() - 1]);
        prop_assert_eq!(q.median, at_depth(&xs, median_depth));
        prop_assert_eq!(q.q1, at_depth(&xs, hinge_depth));
        prop_assert_eq!(q.q3, at_depth(&xs, n + 1.0 - hinge_depth));
    }

    #[test]
    fn nine_significant_digits(x in prop::num::f64::NORMAL) {
        let s = format_sig9(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs());
        let digits: String = s
            .split(['e', 'E'])
            .next()
            .unwrap()
            .chars()
            .filter(char::is_ascii_digit)
            .collect();
        prop_assert!(digits.trim_start_matches('0').trim_end_matches('0').len() <= 9);
    }

    #[test]
    fn runs_table_round_trips(records in prop::collection::vec(record_strategy(), 0..12)) {
        let text = runs_table(&records);
        prop_assert_eq!(read_runs_table(&text, "runs.csv").unwrap(), records);
    }
}

#[test]
fn runs_table_errors_name_the_line() {
    let records: Vec<RunRecord> = (0..3)
        .map(|k| RunRecord {
            run_id: k,
            condition: Condition::Equal,
            seed: 7,
            average_rank: Some(2.5),
            entered: [3; 8],
            matched: [1; 8],
        })
        .collect();
    let text = runs_table(&records);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].replacen("EQUAL", "SOMETIMES", 1);
    match read_runs_table(&lines.join("\n"), "runs.csv") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let short = text.replacen(",3,1\n", "\n", 1);
    assert!(read_runs_table(&short, "runs.csv").is_err());
    assert!(read_runs_table("run_id,seed\n", "runs.csv").is_err());
}

fn experiment() -> Vec<RunRecord> {
    let blp = MvnParams::diagonal(Vector3::new(2.0, 1.0, 0.5), Vector3::new(1.0, 1.0, 1.0)).unwrap();
    let template = SimConfig {
        horizon_days: 90,
        ..SimConfig::desk(Condition::Equal, Some(BtScores::reference()), blp, 0)
    };
    run_experiment(&template, &Condition::ALL, 4, 31).unwrap()
}

#[test]
fn experiment_records_share_run_seeds() {
    let records = experiment();
    assert_eq!(records.len(), 12);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.run_id as usize, i / 3);
        assert_eq!(r.condition, Condition::ALL[i % 3]);
        assert_eq!(r.seed, run_seed(31, u64::from(r.run_id)));
    }
    for run in records.chunks(3) {
        assert_eq!(run[0].entered, run[1].entered);
        assert_eq!(run[0].entered, run[2].entered);
    }
}

#[test]
fn tables_recombine_from_the_records() {
    let records = experiment();
    let summary = summarize(&records, &Condition::ALL);

    let table = proportions_table(&summary);
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 24);
    for row in &rows {
        let condition: Condition = row[0].parse().unwrap();
        let profile: usize = row[1].parse().unwrap();
        let mine: Vec<&RunRecord> = records.iter().filter(|r| r.condition == condition).collect();
        let entered: u64 = mine.iter().map(|r| r.entered[profile - 1]).sum();
        let matched: u64 = mine.iter().map(|r| r.matched[profile - 1]).sum();
        assert_eq!(row[8].parse::<u64>().unwrap(), entered);
        assert_eq!(row[9].parse::<u64>().unwrap(), matched);
        let proportions: Vec<f64> = mine
            .iter()
            .filter(|r| r.entered[profile - 1] > 0)
            .map(|r| r.matched[profile - 1] as f64 / r.entered[profile - 1] as f64)
            .collect();
        assert_eq!(row[2].parse::<usize>().unwrap(), proportions.len());
        if let Some(q) = quartiles(&proportions) {
            assert_eq!(row[5].parse::<f64>().unwrap(), format_sig9(q.median).parse::<f64>().unwrap());
        } else {
            assert_eq!(&row[5], "");
        }
    }

    let table = conditions_table(&summary);
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    for (row, condition) in reader.records().map(Result::unwrap).zip(Condition::ALL) {
        let ranks: Vec<f64> = records
            .iter()
            .filter(|r| r.condition == condition)
            .filter_map(|r| r.average_rank)
            .collect();
        let median = quartiles(&ranks).unwrap().median;
        assert_eq!(&row[4], format_sig9(median));
        assert_eq!(summary.median_rank(condition), Some(median));
    }

    let ranks = ranks_table(&summary, &records);
    assert_eq!(ranks.lines().count(), 1 + records.iter().filter(|r| r.average_rank.is_some()).count());

    // the tables depend only on the records, so a reload reproduces them
    let reloaded = read_runs_table(&runs_table(&records), "runs.csv").unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_tables(&summarize(&reloaded, &Condition::ALL), &reloaded, dir.path()).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("proportions.csv")).unwrap(), proportions_table(&summary));
    assert_eq!(std::fs::read_to_string(dir.path().join("ranks.csv")).unwrap(), ranks);
}
