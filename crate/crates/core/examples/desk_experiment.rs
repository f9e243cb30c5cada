//! Synthetic survey, both fits, then a desk-scale experiment under all three
//! conditions. Usage: `desk_experiment [master_seed] [runs] [days]`.

use std::time::Instant;

use kidney_exchange::preferences::{fit_blp, fit_bt, generate_synthetic_survey, BlpFitConfig, MvnParams};
use kidney_exchange::report::{run_experiment, summarize};
use kidney_exchange::rng::Stream;
use kidney_exchange::simulator::{Condition, SimConfig};
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>());
    let seed = args.next().transpose()?.unwrap_or(1);
    let runs = args.next().transpose()?.unwrap_or(20) as u32;
    let days = args.next().transpose()?.unwrap_or(365) as u32;

    let truth = MvnParams::diagonal(Vector3::new(2.0, 1.0, 0.5), Vector3::new(1.0, 0.5, 0.25))?;
    let survey = generate_synthetic_survey(&truth, 500, &mut Stream::Survey.rng(seed));
    let t = Instant::now();
    let bt = fit_bt(&survey)?;
    let blp = fit_blp(&survey, &BlpFitConfig { seed, ..Default::default() })?;
    println!("fits took {:.1?}", t.elapsed());
    println!("BT scores {:.3?}", bt.scores.as_array());
    println!("BLP mu {:.3?} sigma diag {:.3?}", blp.params.mu().as_slice(), blp.params.sigma().diagonal().as_slice());

    let template = SimConfig {
        horizon_days: days,
        ..SimConfig::desk(Condition::Equal, Some(bt.scores), blp.params, seed)
    };
    let t = Instant::now();
    let records = run_experiment(&template, &Condition::ALL, runs, seed)?;
    println!("{runs} runs x {days} days x 3 conditions took {:.1?}", t.elapsed());
    let summary = summarize(&records, &Condition::ALL);
    for c in &summary.conditions {
        println!(
            "{:<13} median rank {:.3}  matched {}/{} = {:.3}",
            c.condition.label(),
            c.rank_quartiles.map_or(f64::NAN, |q| q.median),
            c.total_matched,
            c.total_entered,
            c.proportion_matched.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
