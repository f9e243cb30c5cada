//! Steps one simulated pool day by day and prints each day's activity.
//! Usage: `simulate_days [condition] [days] [seed]`.

use kidney_exchange::preferences::{BtScores, MvnParams};
use kidney_exchange::simulator::{average_rank, proportion_matched, Condition, SimConfig, SimState};
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let condition: Condition = args.first().map_or(Ok(Condition::Heterogeneous), |a| a.parse())?;
    let days: u32 = args.get(1).map_or(Ok(60), |a| a.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(1), |a| a.parse())?;

    let blp = MvnParams::diagonal(Vector3::new(2.0, 1.0, 0.5), Vector3::new(1.0, 0.5, 0.25))?;
    let config = SimConfig {
        horizon_days: days,
        ..SimConfig::desk(condition, Some(BtScores::reference()), blp, seed)
    };
    let mut state = SimState::new(config)?;
    println!("day  arrived  departed  matched  pool  rank");
    for _ in 0..days {
        let d = state.step_day()?;
        if d.arrived + d.departed + d.matched > 0 {
            let rank = d.average_rank.map_or(String::new(), |r| format!("{r:.2}"));
            println!(
                "{:>3}  {:>7}  {:>8}  {:>7}  {:>4}  {rank}",
                d.day, d.arrived, d.departed, d.matched, d.pool_size
            );
        }
    }
    let m = state.into_metrics();
    println!("entered {}, matched {}, departed {}", m.total_entered(), m.total_matched(), m.total_departed());
    println!("average rank {:?}", average_rank(&m));
    println!("matched by profile {:.2?}", proportion_matched(&m));
    Ok(())
}
