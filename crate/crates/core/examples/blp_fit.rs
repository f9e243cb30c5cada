//! Recovers random-coefficients logit parameters from a synthetic survey.
//! Usage: `blp_fit [respondents] [draws] [seed]`.

use kidney_exchange::preferences::{fit_blp, generate_synthetic_survey, BlpFitConfig, MvnParams};
use kidney_exchange::rng::Stream;
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>());
    let n = args.next().transpose()?.unwrap_or(500) as usize;
    let draws = args.next().transpose()?.unwrap_or(500) as usize;
    let seed = args.next().transpose()?.unwrap_or(1);

    let truth = MvnParams::diagonal(Vector3::new(2.0, 1.0, 0.5), Vector3::new(1.0, 0.5, 0.25))?;
    let survey = generate_synthetic_survey(&truth, n, &mut Stream::Survey.rng(seed));
    let fit = fit_blp(&survey, &BlpFitConfig { draws, seed, ..Default::default() })?;

    println!(
        "{} iterations, converged {}, average log-likelihood {:.4} (start {:.4})",
        fit.iterations, fit.converged, fit.log_likelihood, fit.initial_log_likelihood
    );
    println!("true mu    {:.3?}", truth.mu().as_slice());
    println!("fitted mu  {:.3?}", fit.params.mu().as_slice());
    println!("true sigma\n{:.3}", truth.sigma());
    println!("fitted sigma\n{:.3}", fit.params.sigma());
    Ok(())
}
