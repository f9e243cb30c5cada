//! Fits Bradley-Terry scores to a survey answered under known scores.
//! Usage: `bt_fit [respondents] [seed]`.

use kidney_exchange::preferences::{fit_bt, generate_bt_survey, REFERENCE_BT_SCORES};
use kidney_exchange::rng::Stream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>());
    let n = args.next().transpose()?.unwrap_or(500) as usize;
    let seed = args.next().transpose()?.unwrap_or(1);

    let survey = generate_bt_survey(&REFERENCE_BT_SCORES, n, &mut Stream::Survey.rng(seed));
    let fit = fit_bt(&survey)?;
    println!(
        "{} respondents, {} iterations, log-likelihood {:.2}",
        fit.respondents, fit.iterations, fit.log_likelihood
    );
    println!("profile      true    fitted");
    for (i, (t, f)) in REFERENCE_BT_SCORES.iter().zip(fit.scores.as_array()).enumerate() {
        println!("{:>7}  {t:>6.3}  {f:>8.3}", i + 1);
    }
    Ok(())
}
