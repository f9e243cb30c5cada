//! Three pairs with overlapping 2-cycles `(1 2)` and `(2 3)`. Both cycles cover
//! two vertices, so the weights alone decide which one is chosen.

use std::collections::BTreeMap;

use kidney_exchange::graph::two_cycle_fixture;
use kidney_exchange::preferences::BtScores;
use kidney_exchange::profile::PatientProfile;
use kidney_exchange::simulator::{clear_pool, Condition, Weighting};
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // patient 1 is young and healthy, patient 3 is old with cancer
    let profiles = [PatientProfile::new(1)?, PatientProfile::new(4)?, PatientProfile::new(8)?];
    let graph = two_cycle_fixture(profiles);
    println!("cycles: {:?}", graph.enumerate_cycles(3));

    // every donor shares the same taste vector
    let betas: BTreeMap<u64, Vector3<f64>> = (1..=3).map(|id| (id, Vector3::new(2.0, 1.0, 0.5))).collect();
    let scores = BtScores::reference();
    for condition in Condition::ALL {
        let weighting = Weighting::for_condition(condition, Some(&scores))?;
        let cleared = clear_pool(&graph, &betas, &weighting, 3, 7)?;
        println!(
            "{:<13} chose {:?} weight {:.3} ranks {:?}",
            condition.label(),
            cleared.matching.cycles,
            cleared.matching.total_weight,
            cleared.ranks
        );
    }
    Ok(())
}
