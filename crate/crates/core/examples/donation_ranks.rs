//! Draws a few donor taste vectors and shows how each scores, weights and
//! ranks the eight patient profiles.

use kidney_exchange::preferences::{blp_score, normalized_profile_weights, rank, BetaSample, MvnParams};
use kidney_exchange::profile::PatientProfile;
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MvnParams::diagonal(Vector3::new(2.0, 1.0, 0.5), Vector3::new(1.0, 0.5, 0.25))?;
    for seed in 0..3 {
        let beta = BetaSample::from_seed(&params, seed).beta;
        println!("donor {seed}: beta {:.3?}", beta.as_slice());
        let weights = normalized_profile_weights(&beta);
        println!("  profile  age  drinking   cancer   score  weight  rank");
        for p in PatientProfile::ALL {
            println!(
                "  {:>7}  {:>3}  {:>8}  {:>7}  {:>6.3}  {:>6.3}  {:>4}",
                p.id(),
                format!("{:?}", p.age()),
                format!("{:?}", p.drinking()),
                format!("{:?}", p.cancer()),
                blp_score(p, &beta),
                weights[p.index()],
                rank(&beta, p)
            );
        }
    }
    Ok(())
}
