//! Command-line front end.
//!
//! ```text
//! kidney-exchange synth-survey [--n N] [--mu a,b,c] [--sigma-diag a,b,c | --chol l00,l10,l11,l20,l21,l22]
//! kidney-exchange fit --survey PATH --model bt|blp [--draws R] [--max-iterations K]
//! kidney-exchange simulate --config EXPERIMENT.toml
//! kidney-exchange report --results DIR
//! ```
//!
//! Global flags: `--seed`, `--out`, `--config`, `--verbose`.
//! Exit codes: 0 success, 1 usage or configuration, 2 data, parse or I/O,
//! 3 numerical failure.
//!
//! # Experiment file
//!
//! ```toml
//! seed = 2024                      # master seed; --seed overrides
//! runs = 20
//! conditions = ["EQUAL", "HOMOGENEOUS", "HETEROGENEOUS"]
//! results_dir = "results"          # --out overrides
//!
//! [simulation]
//! horizon_days = 365
//! arrival_rate = 1.0
//! departure_rate = 0.005
//! max_cycle_len = 3
//! gumbel_edge_noise = false
//!
//! [models]
//! bt_in = "bt.json"                # output of `fit --model bt`
//! blp_in = "blp.json"              # output of `fit --model blp`
//! survey_in = "survey.csv"         # fits whichever of the two is not given
//! blp_draws = 500
//! blp_max_iterations = 2000
//!
//! [generator]                      # optional; pair generator settings
//! blood_freqs = [0.4814, 0.3373, 0.1428, 0.0385]    # O, A, B, AB
//! pra_buckets = [[0.05, 0.7019], [0.45, 0.2], [0.9, 0.0981]]  # [pra, probability]
//! profile_weights = [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125]
//! pra_enabled = true
//! ```
//!
//! Relative paths are resolved against the experiment file's directory.
//! Unknown keys are rejected. Run `k` uses seed `hash64(seed, k)` for every
//! condition, so conditions see identical arrivals, crossmatches and betas.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GeneratorConfig;
use crate::preferences::blp::BlpParamsFile;
use crate::preferences::{
    fit_blp, fit_bt, generate_synthetic_survey, BlpFitConfig, BtFit, BtScores, MvnParams, SurveyDataset,
};
use crate::report::{emit_tables, read_runs_table, run_experiment, runs_table, summarize, ExperimentSummary, RunRecord};
use crate::rng::Stream;
use crate::simulator::{Condition, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "kidney-exchange", version, about = "Kidney-exchange clearing with preference-weighted matching")]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic pairwise survey from a random-coefficients logit.
    SynthSurvey(SynthArgs),
    /// Fit Bradley-Terry scores or a random-coefficients logit to a survey.
    Fit(FitArgs),
    /// Run an experiment described by --config.
    Simulate,
    /// Rebuild the summary tables from a results directory.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
struct SynthArgs {
    /// Number of respondents.
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Mean taste vector, comma-separated.
    #[arg(long, value_parser = reals::<3>, default_value = "2,1,0.5", allow_hyphen_values = true)]
    mu: [f64; 3],
    /// Diagonal covariance, comma-separated.
    #[arg(long, value_parser = reals::<3>, conflicts_with = "chol")]
    sigma_diag: Option<[f64; 3]>,
    /// Lower Cholesky factor, row-major, comma-separated.
    #[arg(long, value_parser = reals::<6>, allow_hyphen_values = true)]
    chol: Option<[f64; 6]>,
}

fn reals<const N: usize>(text: &str) -> std::result::Result<[f64; N], String> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<std::result::Result<Vec<f64>, String>>()?;
    <[f64; N]>::try_from(values).map_err(|v| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    Bt,
    Blp,
}

#[derive(Debug, clap::Args)]
struct FitArgs {
    #[arg(long)]
    survey: PathBuf,
    #[arg(long, value_enum)]
    model: Model,
    /// Common random draws for the simulated likelihood.
    #[arg(long, default_value_t = 500)]
    draws: usize,
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
}

#[derive(Debug, clap::Args)]
struct ReportArgs {
    /// Directory containing runs.csv.
    #[arg(long)]
    results: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let seed = cli.seed;
    let out = cli.out.as_deref();
    let result = match &cli.command {
        Command::SynthSurvey(args) => synth_survey(args, seed.unwrap_or(0), out),
        Command::Fit(args) => fit(args, seed.unwrap_or(0), out),
        Command::Simulate => match &cli.config {
            Some(path) => cmd_simulate(path, out, seed).map(|dir| {
                eprintln!("results written to {}", dir.display());
            }),
            None => Err(Error::Config("simulate needs --config".into())),
        },
        Command::Report(args) => cmd_report(&args.results, out.unwrap_or(&args.results)).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
        None => io::stdout().write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn synth_survey(args: &SynthArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let mu = Vector3::from(args.mu);
    let params = match (args.sigma_diag, args.chol) {
        (_, Some(l)) => MvnParams::from_lower(args.mu, l),
        (Some(d), None) => MvnParams::diagonal(mu, Vector3::from(d)),
        (None, None) => MvnParams::diagonal(mu, Vector3::new(1.0, 0.5, 0.25)),
    }
    .map_err(|e| Error::Config(e.to_string()))?;
    let survey = cmd_synth_survey(&params, args.n, seed);
    let mut bytes = Vec::new();
    survey.write_csv(&mut bytes)?;
    write_output(out, &bytes)?;
    eprintln!("synthesized {} respondents with seed {seed}", args.n);
    Ok(())
}

/// A synthetic survey of `n` respondents drawn with the survey stream of `seed`.
pub fn cmd_synth_survey(params: &MvnParams, n: usize, seed: u64) -> SurveyDataset {
    generate_synthetic_survey(params, n, &mut Stream::Survey.rng(seed))
}

pub fn load_survey(path: &Path) -> Result<SurveyDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    SurveyDataset::read_csv(io::BufReader::new(file), &path.display().to_string())
}

fn fit(args: &FitArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let survey = load_survey(&args.survey)?;
    let json = match args.model {
        Model::Bt => {
            let fit = fit_bt_checked(&survey)?;
            eprintln!(
                "Bradley-Terry fit: {} respondents, {} iterations, log-likelihood {}",
                fit.respondents, fit.iterations, fit.log_likelihood
            );
            serde_json::to_string_pretty(&fit)
        }
        Model::Blp => {
            let config = BlpFitConfig {
                draws: args.draws,
                max_iterations: args.max_iterations,
                seed,
                ..BlpFitConfig::default()
            };
            let file = fit_blp_file(&survey, &config)?;
            serde_json::to_string_pretty(&file)
        }
    }
    .map_err(|e| Error::Numerical(e.to_string()))?;
    write_output(out, format!("{json}\n").as_bytes())
}

fn fit_bt_checked(survey: &SurveyDataset) -> Result<BtFit> {
    let fit = fit_bt(survey)?;
    if !fit.converged {
        return Err(Error::Numerical(format!(
            "Bradley-Terry iteration did not converge in {} steps",
            fit.iterations
        )));
    }
    if fit.smoothed {
        log::warn!("scores are not identifiable from the raw counts; pseudocounts were added");
    }
    Ok(fit)
}

fn fit_blp_file(survey: &SurveyDataset, config: &BlpFitConfig) -> Result<BlpParamsFile> {
    let fit = fit_blp(survey, config)?;
    if !fit.log_likelihood.is_finite() {
        return Err(Error::Numerical("simulated likelihood is not finite".into()));
    }
    if !fit.converged {
        log::warn!("simplex budget exhausted; reporting the best parameters found");
    }
    eprintln!(
        "random-coefficients logit fit: {} respondents, {} draws, seed {}, {} iterations, average log-likelihood {}",
        fit.respondents, fit.draws, fit.seed, fit.iterations, fit.log_likelihood
    );
    Ok(BlpParamsFile::from(&fit))
}

/// A Bradley-Terry parameter file: either a bare array of 8 scores or the
/// output of `fit --model bt`.
#[derive(Deserialize)]
#[serde(untagged)]
enum BtFile {
    Scores(BtScores),
    Fit(BtFit),
}

pub fn load_bt_scores(path: &Path) -> Result<BtScores> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: BtFile = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    Ok(match file {
        BtFile::Scores(s) => s,
        BtFile::Fit(f) => f.scores,
    })
}

pub fn load_blp_params(path: &Path) -> Result<MvnParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: BlpParamsFile = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    file.params()
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: e.line() as u64,
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub runs: u32,
    pub conditions: Vec<Condition>,
    #[serde(default = "default_results_dir")]
    pub results_dir: PathBuf,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub generator: GeneratorConfig,
}

fn default_results_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub horizon_days: u32,
    pub arrival_rate: f64,
    pub departure_rate: f64,
    pub max_cycle_len: usize,
    pub gumbel_edge_noise: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            horizon_days: 365,
            arrival_rate: 1.0,
            departure_rate: 0.005,
            max_cycle_len: 3,
            gumbel_edge_noise: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsSection {
    pub bt_in: Option<PathBuf>,
    pub blp_in: Option<PathBuf>,
    pub survey_in: Option<PathBuf>,
    pub blp_draws: usize,
    pub blp_max_iterations: usize,
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection {
            bt_in: None,
            blp_in: None,
            survey_in: None,
            blp_draws: 500,
            blp_max_iterations: 2000,
        }
    }
}

impl ExperimentConfig {
    /// Reads an experiment file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.results_dir);
        for p in [&mut config.models.bt_in, &mut config.models.blp_in, &mut config.models.survey_in]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        Ok(config)
    }

    /// Every problem with the configuration, one line each.
    pub fn problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let sim = &self.simulation;
        let models = &self.models;
        if self.runs < 1 {
            problems.push("runs must be at least 1".to_string());
        }
        if self.conditions.is_empty() {
            problems.push("conditions must list at least one condition".to_string());
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if self.conditions[..i].contains(c) {
                problems.push(format!("condition {c} is listed twice"));
            }
        }
        if !(sim.arrival_rate >= 0.0 && sim.arrival_rate.is_finite()) {
            problems.push(format!("simulation.arrival_rate {} must be >= 0", sim.arrival_rate));
        }
        if !(0.0..=1.0).contains(&sim.departure_rate) {
            problems.push(format!("simulation.departure_rate {} must be in [0, 1]", sim.departure_rate));
        }
        if sim.max_cycle_len < 2 {
            problems.push("simulation.max_cycle_len must be at least 2".to_string());
        }
        if let Err(e) = self.generator.validate() {
            problems.push(format!("generator: {e}"));
        }
        if models.blp_in.is_none() && models.survey_in.is_none() {
            problems.push("models.blp_in or models.survey_in is required (betas are drawn in every condition)".into());
        }
        if self.conditions.contains(&Condition::Homogeneous) && models.bt_in.is_none() && models.survey_in.is_none() {
            problems.push("HOMOGENEOUS needs models.bt_in or models.survey_in".into());
        }
        if models.survey_in.is_some() && models.blp_in.is_none() && models.blp_draws < 100 {
            problems.push(format!("models.blp_draws {} must be at least 100", models.blp_draws));
        }
        for (key, path) in [
            ("models.bt_in", &models.bt_in),
            ("models.blp_in", &models.blp_in),
            ("models.survey_in", &models.survey_in),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    problems.push(format!("{key}: {} does not exist", p.display()));
                }
            }
        }
        problems
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("\n  - {}", problems.join("\n  - "))))
        }
    }

    /// The simulation template; `condition` and `seed` are set per run.
    pub fn sim_template(&self, bt_scores: Option<BtScores>, blp_params: MvnParams) -> SimConfig {
        let sim = &self.simulation;
        SimConfig {
            horizon_days: sim.horizon_days,
            arrival_rate: sim.arrival_rate,
            departure_rate: sim.departure_rate,
            max_cycle_len: sim.max_cycle_len,
            condition: Condition::Equal,
            bt_scores,
            blp_params,
            seed: self.seed,
            generator: self.generator.clone(),
            gumbel_edge_noise: sim.gumbel_edge_noise,
        }
    }
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    config: &'a ExperimentConfig,
    bt_scores: Option<&'a BtScores>,
    blp_params: &'a MvnParams,
    summary: &'a ExperimentSummary,
}

/// Runs the experiment in `config_path` and writes the results directory:
/// `runs.csv`, `ranks.csv`, `proportions.csv`, `conditions.csv`,
/// `summary.json`, plus `bt.json` / `blp.json` for models fitted from the
/// survey. Returns the directory.
pub fn cmd_simulate(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<PathBuf> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(out) = out {
        config.results_dir = out.to_path_buf();
    }
    config.validate()?;
    let dir = config.results_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let survey = config.models.survey_in.as_deref().map(load_survey).transpose()?;
    let needs_bt = config.conditions.contains(&Condition::Homogeneous);
    let bt_scores = match (&config.models.bt_in, &survey) {
        (Some(path), _) => Some(load_bt_scores(path)?),
        (None, Some(survey)) if needs_bt => {
            let fit = fit_bt_checked(survey)?;
            write_json(&dir.join("bt.json"), &fit)?;
            Some(fit.scores)
        }
        _ => None,
    };
    let blp_params = match (&config.models.blp_in, &survey) {
        (Some(path), _) => load_blp_params(path)?,
        (None, Some(survey)) => {
            let fit_config = BlpFitConfig {
                draws: config.models.blp_draws,
                max_iterations: config.models.blp_max_iterations,
                seed: config.seed,
                ..BlpFitConfig::default()
            };
            let file = fit_blp_file(survey, &fit_config)?;
            write_json(&dir.join("blp.json"), &file)?;
            file.params()?
        }
        (None, None) => unreachable!("validated"),
    };

    let template = config.sim_template(bt_scores.clone(), blp_params.clone());
    let records = run_experiment(&template, &config.conditions, config.runs, config.seed)?;
    let summary = summarize(&records, &config.conditions);

    write_text(&dir.join("runs.csv"), &runs_table(&records))?;
    emit_tables(&summary, &records, &dir)?;
    write_json(
        &dir.join("summary.json"),
        &SummaryDocument {
            config: &config,
            bt_scores: bt_scores.as_ref(),
            blp_params: &blp_params,
            summary: &summary,
        },
    )?;
    Ok(dir)
}

/// Recomputes the summary tables from `results/runs.csv` into `out`.
pub fn cmd_report(results: &Path, out: &Path) -> Result<ExperimentSummary> {
    let path = results.join("runs.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let records: Vec<RunRecord> = read_runs_table(&text, &path.display().to_string())?;
    let conditions: Vec<Condition> = Condition::ALL
        .into_iter()
        .filter(|c| records.iter().any(|r| r.condition == *c))
        .collect();
    let summary = summarize(&records, &conditions);
    emit_tables(&summary, &records, out)?;
    Ok(summary)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    write_text(path, &format!("{json}\n"))
}
