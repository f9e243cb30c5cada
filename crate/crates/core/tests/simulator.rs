mod common;

use kidney_exchange::clearing::WeightedCycleSet;
use kidney_exchange::preferences::{BtScores, MvnParams};
use kidney_exchange::profile::PROFILE_COUNT;
use kidney_exchange::simulator::{average_rank, run_simulation, Condition, SimConfig, SimState};
use nalgebra::Vector3;

fn blp() -> MvnParams {
    MvnParams::diagonal(Vector3::new(2.0, 1.0, 0.5), Vector3::new(1.0, 1.0, 1.0)).unwrap()
}

fn config(condition: Condition, seed: u64, days: u32) -> SimConfig {
    SimConfig {
        horizon_days: days,
        ..SimConfig::desk(condition, Some(BtScores::reference()), blp(), seed)
    }
}

#[test]
fn every_pair_is_matched_departed_or_waiting() {
    for condition in Condition::ALL {
        let mut state = SimState::new(config(condition, 5, 120)).unwrap();
        for _ in 0..120 {
            state.step_day().unwrap();
        }
        let m = state.metrics();
        let waiting: [u64; PROFILE_COUNT] = m.waiting();
        assert_eq!(waiting.iter().sum::<u64>(), state.graph().len() as u64);
        let mut by_profile = [0u64; PROFILE_COUNT];
        for p in state.graph().pairs() {
            by_profile[p.profile.index()] += 1;
        }
        assert_eq!(waiting, by_profile);
        assert_eq!(m.daily_matched.iter().map(|&d| u64::from(d)).sum::<u64>(), m.total_matched());
        assert_eq!(state.betas().len(), state.graph().len());
    }
}

#[test]
fn conditions_see_the_same_arrivals() {
    for seed in [1, 2, 3] {
        let entered: Vec<_> = Condition::ALL
            .iter()
            .map(|&c| run_simulation(&config(c, seed, 150)).unwrap().entered)
            .collect();
        assert_eq!(entered[0], entered[1]);
        assert_eq!(entered[1], entered[2]);
    }
}

#[test]
fn daily_matching_has_maximum_cardinality() {
    // oracle: exhaustive packing size on the day's cycles, and no cycle left behind
    for condition in Condition::ALL {
        let mut state = SimState::new(config(condition, 9, 80)).unwrap();
        for _ in 0..80 {
            state.begin_day().unwrap();
            let cycles = state.graph().enumerate_cycles(3);
            let raw: Vec<Vec<u64>> = cycles.iter().map(|c| c.vertices().to_vec()).collect();
            let oracle = (raw.len() <= 22).then(|| common::exhaustive_packings(&raw, &vec![0.0; raw.len()], 0));
            let cleared = state.clear_day().unwrap();
            let matched = cleared.matching.cardinality;
            assert_eq!(matched, cleared.max_cardinality);
            if let Some(o) = oracle {
                assert_eq!(matched, o.max_cardinality);
            }
            assert!(state.graph().enumerate_cycles(3).is_empty());
            assert_eq!(cleared.ranks.len(), matched);
            assert!(cleared.ranks.iter().all(|r| (1..=8).contains(r)));
        }
    }
}

#[test]
fn equal_weighting_counts_each_donation_once() {
    let mut state = SimState::new(config(Condition::Equal, 4, 60)).unwrap();
    for _ in 0..60 {
        state.begin_day().unwrap();
        let set = WeightedCycleSet::unit(state.graph().enumerate_cycles(3));
        let cleared = state.clear_day().unwrap();
        assert!((cleared.matching.total_weight - cleared.matching.cardinality as f64).abs() < 1e-9);
        let covered: Vec<u64> = cleared.matching.covered().collect();
        assert!(cleared.matching.cycles.iter().all(|c| set.cycles().contains(c)));
        assert_eq!(covered.len(), cleared.matching.cardinality);
    }
}

#[test]
fn runs_are_reproducible() {
    for condition in Condition::ALL {
        let a = run_simulation(&config(condition, 77, 100)).unwrap();
        let b = run_simulation(&config(condition, 77, 100)).unwrap();
        assert_eq!(a, b);
    }
    let a = run_simulation(&config(Condition::Heterogeneous, 77, 100)).unwrap();
    let b = run_simulation(&config(Condition::Heterogeneous, 78, 100)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn degenerate_dynamics() {
    let quiet = SimConfig {
        arrival_rate: 0.0,
        ..config(Condition::Heterogeneous, 1, 30)
    };
    let m = run_simulation(&quiet).unwrap();
    assert_eq!(m.total_entered(), 0);
    assert_eq!(m.daily_matched, vec![0; 30]);
    assert_eq!(average_rank(&m), None);

    // everyone leaves before the day's clearing
    let leaving = SimConfig {
        departure_rate: 1.0,
        ..config(Condition::Heterogeneous, 1, 30)
    };
    let m = run_simulation(&leaving).unwrap();
    assert_eq!(m.total_matched(), 0);
    assert_eq!(m.total_departed(), m.total_entered());

    let m = run_simulation(&config(Condition::Equal, 1, 0)).unwrap();
    assert_eq!(m, Default::default());
}

#[test]
fn homogeneous_without_scores_is_rejected() {
    let bad = SimConfig {
        bt_scores: None,
        ..config(Condition::Homogeneous, 1, 10)
    };
    assert!(run_simulation(&bad).is_err());
}

#[test]
fn average_rank_is_the_mean_of_daily_means() {
    let mut state = SimState::new(config(Condition::Heterogeneous, 12, 90)).unwrap();
    let mut daily = Vec::new();
    for _ in 0..90 {
        if let Some(r) = state.step_day().unwrap().average_rank {
            daily.push(r);
        }
    }
    let expected = daily.iter().sum::<f64>() / daily.len() as f64;
    assert!((average_rank(state.metrics()).unwrap() - expected).abs() < 1e-12);
}
