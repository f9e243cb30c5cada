use nalgebra::Vector3;

use crate::profile::{PatientProfile, PROFILE_COUNT};

/// Deterministic utility `features . beta`.
pub fn blp_score(profile: PatientProfile, beta: &Vector3<f64>) -> f64 {
    profile.features().dot(beta)
}

fn all_scores(beta: &Vector3<f64>) -> [f64; PROFILE_COUNT] {
    PatientProfile::ALL.map(|p| blp_score(p, beta))
}

/// Min-max normalized scores of all eight profiles, indexed by `id - 1`.
/// When every profile scores the same, every weight is 1.
pub fn normalized_profile_weights(beta: &Vector3<f64>) -> [f64; PROFILE_COUNT] {
    let scores = all_scores(beta);
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return [1.0; PROFILE_COUNT];
    }
    scores.map(|s| (s - lo) / (hi - lo))
}

/// Competition rank of `profile` under `beta`: one plus the number of profiles
/// scoring strictly higher. Ties share the better rank.
pub fn rank(beta: &Vector3<f64>, profile: PatientProfile) -> u8 {
    let scores = all_scores(beta);
    let own = scores[profile.index()];
    1 + scores.iter().filter(|&&s| s > own).count() as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(id: u8) -> PatientProfile {
        PatientProfile::new(id).unwrap()
    }

    #[test]
    fn scores() {
        let b = Vector3::new(0.3, -1.2, 2.5);
        assert!((blp_score(p(1), &b) - (0.3 - 1.2 + 2.5)).abs() < 1e-15);
        assert_eq!(blp_score(p(8), &b), 0.0);
        assert_eq!(blp_score(p(5), &Vector3::new(2.0, 1.0, 0.5)), 1.5);
    }

    #[test]
    fn normalized_weights_follow_bit_counts() {
        let w = normalized_profile_weights(&Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(w[0], 1.0);
        assert_eq!(w[7], 0.0);
        for id in [2, 3, 5] {
            assert!((w[id - 1] - 2.0 / 3.0).abs() < 1e-15);
        }
        for id in [4, 6, 7] {
            assert!((w[id - 1] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(normalized_profile_weights(&Vector3::zeros()), [1.0; 8]);
        let neg = normalized_profile_weights(&Vector3::new(-1.0, -1.0, -1.0));
        assert_eq!((neg[7], neg[0]), (1.0, 0.0));
    }

    #[test]
    fn ranks() {
        let ones = Vector3::new(1.0, 1.0, 1.0);
        assert_eq!(rank(&ones, p(1)), 1);
        assert_eq!(rank(&ones, p(8)), 8);
        for q in PatientProfile::ALL {
            assert_eq!(rank(&Vector3::zeros(), q), 1);
        }
        // scores 7,5,6,4,3,1,2,0 by id
        let b = Vector3::new(4.0, 2.0, 1.0);
        let got: Vec<u8> = PatientProfile::ALL.iter().map(|&q| rank(&b, q)).collect();
        assert_eq!(got, vec![1, 3, 2, 4, 5, 7, 6, 8]);
    }

    fn beta() -> impl Strategy<Value = Vector3<f64>> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b, c)| Vector3::new(a, b, c))
    }

    proptest! {
        #[test]
        fn weights_span_unit_interval(b in beta()) {
            let w = normalized_profile_weights(&b);
            prop_assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
            if w.iter().any(|&x| x != 1.0) {
                prop_assert!(w.contains(&0.0));
                prop_assert!(w.contains(&1.0));
            }
        }

        #[test]
        fn rank_is_scale_invariant(b in beta(), c in 0.01..100.0f64) {
            for q in PatientProfile::ALL {
                prop_assert_eq!(rank(&b, q), rank(&(b * c), q));
            }
        }

        #[test]
        fn distinct_scores_give_a_permutation(b in beta()) {
            let mut scores: Vec<f64> = PatientProfile::ALL.iter().map(|&q| blp_score(q, &b)).collect();
            scores.sort_by(f64::total_cmp);
            prop_assume!(scores.windows(2).all(|w| w[1] - w[0] > 1e-12));
            let mut ranks: Vec<u8> = PatientProfile::ALL.iter().map(|&q| rank(&b, q)).collect();
            ranks.sort_unstable();
            prop_assert_eq!(ranks, (1..=8).collect::<Vec<u8>>());
        }
    }
}
