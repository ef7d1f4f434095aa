//! The `oie` command line: argument parsing, configuration, dispatch and
//! artifact writing.
//!
//! Exit codes: 0 success, 2 usage (including bad flag values), 3 input
//! schema or configuration, 4 numerical failure, 5 file system.

use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::adaptation::{oie_fixed_point, predict_grid, predict_grid_effective, predict_mesh, AdaptationError, EffectiveNoise, OieParams, TemParams};
use crate::condition::{Grid3, NoiseCondition};
use crate::config::{ConfigError, KvConfig};
use crate::emg::{calibrate, decompose, envelope_with, lag_correlation, spectrum, Calibration, EmgError, EmgSeries, EnvelopeOptions, Spectrum};
use crate::identification::{compare_models, fit_tem, identify, IdentError, ObservedGrid, PsoConfig};
use crate::io::{self, fmt_num, Figure, IoError, Manifest, Table};
use crate::noise_models::{NoiseError, NoiseModelConfig};
use crate::report::{slope_report, Metric, ReportError};
use crate::seed;
use crate::trial_sim::plant::RECORD_HZ;
use crate::trial_sim::protocol::Dataset;
use crate::trial_sim::{perturbation_torque, run_protocol, simulate, target_position, tracking_error, PlantConfig, ProtocolSpec, Rule, SimError, TrialSetup};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "oie", version, about = "Cocontraction adaptation under visual and haptic noise")]
pub struct Cli {
    /// `key = value` parameter file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root seed; generated and recorded in the manifest when absent.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one 20 s tracking trial.
    Simulate(SimulateArgs),
    /// Run solo trials and one block per condition with an adaptation rule.
    Protocol(ProtocolArgs),
    /// Identify effective deviations and effort ratio from an observed grid.
    Fit(FitArgs),
    /// Predict fixed-point cocontraction over the grid and a noise mesh.
    Predict(PredictArgs),
    /// Fit OIE and TEM to an observed grid and compare them.
    Compare(CompareArgs),
    /// Process recorded EMG.
    Emg(EmgArgs),
    /// Amplitude spectrum of a generated or recorded signal.
    Spectrum(SpectrumArgs),
    /// Regenerate all figures from one seeded session.
    Figures(FiguresArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Noise condition such as `V1H2`.
    #[arg(long)]
    pub condition: NoiseCondition,
    /// Cocontraction level.
    #[arg(long, default_value_t = 0.5)]
    pub u: f64,
    /// Track alone, without the partner coupling.
    #[arg(long)]
    pub solo: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleKind {
    Oie,
    Tem,
    Fixed,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[arg(long, value_enum, default_value_t = RuleKind::Oie)]
    pub rule: RuleKind,
    #[arg(long)]
    pub trials_per_block: Option<usize>,
    #[arg(long)]
    pub solo_trials: Option<usize>,
    /// Initial cocontraction.
    #[arg(long)]
    pub u0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Observed grid CSV (`visual_level, haptic_level, u_normalized`).
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Search box for every deviation, `LOW,HIGH`.
    #[arg(long, value_parser = parse_bounds)]
    pub bounds: Option<(f64, f64)>,
    /// Swarm size.
    #[arg(long)]
    pub swarm: Option<usize>,
    /// Swarm iterations.
    #[arg(long)]
    pub iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Use the tabulated effective deviations instead of the regressions.
    #[arg(long)]
    pub table1: bool,
    /// Effort ratio; defaults to `oie.gamma`.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Points per axis of the surface mesh.
    #[arg(long, default_value_t = 30)]
    pub mesh: usize,
    /// Gaussian noise added to the grid, clamped to [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub noise_sd: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Observed grid CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Tracking-error grid CSV (`visual_level, haptic_level, error_deg`).
    /// Simulated at the observed cocontraction when absent.
    #[arg(long)]
    pub errors: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["calibrate", "decompose", "spectrum"])))]
pub struct EmgArgs {
    /// `envelope, torque` pairs for `--calibrate`; otherwise
    /// `t, emg_f_raw, emg_e_raw`.
    #[arg(long)]
    pub input: PathBuf,
    /// Fit the envelope-to-torque line.
    #[arg(long)]
    pub calibrate: bool,
    /// Envelope, calibrate and split into reciprocal activation and cocontraction.
    #[arg(long)]
    pub decompose: bool,
    /// Spectra of reciprocal activation and cocontraction.
    #[arg(long)]
    pub spectrum: bool,
    /// Forward-backward filtering.
    #[arg(long)]
    pub zero_phase: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignalKind {
    Target,
    Perturbation,
    Reciprocal,
    Cocontraction,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["signal", "input"])))]
pub struct SpectrumArgs {
    #[arg(long, value_enum)]
    pub signal: Option<SignalKind>,
    /// Condition for simulated signals.
    #[arg(long, default_value = "V0H2")]
    pub condition: NoiseCondition,
    /// Cocontraction for simulated signals; the fixed point when absent.
    #[arg(long)]
    pub u: Option<f64>,
    /// CSV with the series in `--column`.
    #[arg(long, requires = "column")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    /// Sampling rate of `--input`.
    #[arg(long, default_value_t = RECORD_HZ)]
    pub rate: f64,
}

#[derive(Debug, Args)]
pub struct FiguresArgs {
    #[arg(long)]
    pub trials_per_block: Option<usize>,
    #[arg(long)]
    pub solo_trials: Option<usize>,
    #[command(flatten)]
    pub search: SearchArgs,
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected LOW,HIGH")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad lower bound {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad upper bound {b:?}"))?;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("need 0 <= LOW < HIGH, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Ident(#[from] IdentError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Emg(#[from] EmgError),
    #[error(transparent)]
    Adaptation(#[from] AdaptationError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(ConfigError::Io { .. }) => EXIT_IO,
            CliError::Config(_) => EXIT_SCHEMA,
            CliError::Io(IoError::Io { .. }) => EXIT_IO,
            CliError::Io(IoError::Schema(_)) => EXIT_SCHEMA,
            CliError::Io(IoError::Empty(_)) => EXIT_NUMERIC,
            CliError::Ident(IdentError::Data(_)) => EXIT_SCHEMA,
            CliError::Report(_) => EXIT_SCHEMA,
            _ => EXIT_NUMERIC,
        }
    }
}

/// Every tunable read from the configuration file. All keys are read up
/// front so unknown keys are reported regardless of the command.
#[derive(Debug, Clone)]
struct Settings {
    noise: NoiseModelConfig,
    plant: PlantConfig,
    gamma: f64,
    learning_rate: f64,
    u_max: f64,
    tem_alpha: f64,
    tem_gamma: f64,
    solo_trials: usize,
    trials_per_block: usize,
    u0: f64,
    swarm: usize,
    iters: usize,
    bounds: (f64, f64),
    error_seeds: usize,
    mesh_sigma_c_max: f64,
    mesh_sigma_p_max: f64,
    dump: String,
}

impl Settings {
    fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let d = ProtocolSpec::default();
        let pso = PsoConfig::default();
        let s = Self {
            noise: NoiseModelConfig::from_kv(kv)?,
            plant: PlantConfig::from_kv(kv)?,
            gamma: kv.f64_or("oie.gamma", OieParams::PUBLISHED_GAMMA)?,
            learning_rate: kv.f64_or("oie.learning_rate", OieParams::DEFAULT_LEARNING_RATE)?,
            u_max: kv.f64_or("oie.u_max", OieParams::DEFAULT_U_MAX)?,
            tem_alpha: kv.f64_or("tem.alpha", 0.01)?,
            tem_gamma: kv.f64_or("tem.gamma", 0.1)?,
            solo_trials: kv.usize_or("protocol.solo_trials", d.solo_trials)?,
            trials_per_block: kv.usize_or("protocol.trials_per_block", d.trials_per_block)?,
            u0: kv.f64_or("protocol.u0", d.u0)?,
            swarm: kv.usize_or("pso.swarm", pso.swarm_size)?,
            iters: kv.usize_or("pso.iters", pso.iterations)?,
            bounds: (kv.f64_or("pso.low", pso.bounds[0].0)?, kv.f64_or("pso.high", pso.bounds[0].1)?),
            error_seeds: kv.usize_or("compare.error_seeds", 5)?,
            mesh_sigma_c_max: kv.f64_or("mesh.sigma_c_max", 60.0)?,
            mesh_sigma_p_max: kv.f64_or("mesh.sigma_p_max", 0.25)?,
            dump: kv.canonical(),
        };
        kv.finish()?;
        Ok(s)
    }

    fn oie(&self, gamma: Option<f64>) -> Result<OieParams, AdaptationError> {
        OieParams {
            gamma: gamma.unwrap_or(self.gamma),
            learning_rate: self.learning_rate,
            compliance: self.noise.compliance,
            u_max: self.u_max,
        }
        .validated()
    }

    fn pso(&self, args: &SearchArgs, seed: u64) -> PsoConfig {
        let (lo, hi) = args.bounds.unwrap_or(self.bounds);
        PsoConfig {
            swarm_size: args.swarm.unwrap_or(self.swarm),
            iterations: args.iters.unwrap_or(self.iters),
            seed: seed::subseed(seed, "pso"),
            ..PsoConfig::boxed(6, lo, hi)
        }
    }
}

/// Collects outputs and writes the manifest last.
struct Run {
    out: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        table.write(&self.out.join(name))?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, text).map_err(|e| IoError::io(&path, e))?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    fn figure(&mut self, fig: &Figure) -> Result<(), CliError> {
        fig.emit(&self.out)?;
        self.manifest.outputs.push(format!("{}.svg", fig.id));
        self.manifest.outputs.push(format!("{}.csv", fig.id));
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        self.manifest.write(&self.out)?;
        Ok(())
    }
}

/// Arguments recorded in the manifest: the program name is normalized and
/// the output directory dropped, so identical runs write identical bytes.
fn recorded_argv(argv: &[String]) -> Vec<String> {
    let mut out = vec!["oie".to_string()];
    let mut skip = false;
    for a in argv.iter().skip(1) {
        if skip {
            skip = false;
        } else if a == "--out" {
            skip = true;
        } else if !a.starts_with("--out=") {
            out.push(a.clone());
        }
    }
    out
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Protocol(_) => "protocol",
        Command::Fit(_) => "fit",
        Command::Predict(_) => "predict",
        Command::Compare(_) => "compare",
        Command::Emg(_) => "emg",
        Command::Spectrum(_) => "spectrum",
        Command::Figures(_) => "figures",
    }
}

/// Parses `argv` and runs; returns the process exit code.
pub fn main_with(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let kv = match &cli.config {
        Some(p) => KvConfig::load(p)?,
        None => KvConfig::default(),
    };
    let settings = Settings::from_kv(&kv)?;
    let seed = cli.seed.unwrap_or_else(|| rand::rng().random());
    std::fs::create_dir_all(&cli.out).map_err(|e| IoError::io(&cli.out, e))?;
    let mut run = Run {
        out: cli.out.clone(),
        manifest: Manifest::new(command_name(&cli.command), &recorded_argv(argv), Some(seed), settings.dump.clone()),
    };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, &settings, seed, &mut run)?,
        Command::Protocol(a) => cmd_protocol(a, &settings, seed, &mut run)?,
        Command::Fit(a) => cmd_fit(a, &settings, seed, &mut run)?,
        Command::Predict(a) => cmd_predict(a, &settings, seed, &mut run)?,
        Command::Compare(a) => cmd_compare(a, &settings, seed, &mut run)?,
        Command::Emg(a) => cmd_emg(a, &settings, &mut run)?,
        Command::Spectrum(a) => cmd_spectrum(a, &settings, seed, &mut run)?,
        Command::Figures(a) => cmd_figures(a, &settings, seed, &mut run)?,
    }
    run.finish()
}

fn check_u(u: f64) -> Result<f64, CliError> {
    if u.is_finite() && u >= 0.0 {
        Ok(u)
    } else {
        Err(CliError::Usage(format!("cocontraction {u} must be finite and >= 0")))
    }
}

fn cmd_simulate(a: &SimulateArgs, s: &Settings, seed: u64, run: &mut Run) -> Result<(), CliError> {
    let setup = TrialSetup { partner: !a.solo, ..TrialSetup::new(a.condition, check_u(a.u)?) };
    let rec = simulate(&setup, &s.plant, seed)?;
    let err = tracking_error(&rec)?;
    run.table("trial.csv", &io::record_table(&rec))?;
    let mut summary = Table::new(&["condition", "u", "t0", "error_deg", "final_velocity"]);
    summary.push(vec![a.condition.to_string(), fmt_num(rec.u), fmt_num(rec.t0), fmt_num(err), fmt_num(rec.final_velocity)]);
    run.table("summary.csv", &summary)?;
    println!("{} u={} error={} deg", a.condition, fmt_num(rec.u), fmt_num(err));
    Ok(())
}

fn protocol_spec(s: &Settings, rule: RuleKind, tpb: Option<usize>, solo: Option<usize>, u0: Option<f64>) -> Result<ProtocolSpec, CliError> {
    let rule = match rule {
        RuleKind::Oie => Rule::Oie(s.oie(None)?),
        RuleKind::Tem => Rule::Tem(TemParams::new(s.tem_alpha, s.tem_gamma)?),
        RuleKind::Fixed => Rule::Fixed,
    };
    Ok(ProtocolSpec {
        solo_trials: solo.unwrap_or(s.solo_trials),
        trials_per_block: tpb.unwrap_or(s.trials_per_block),
        conditions: NoiseCondition::all().to_vec(),
        rule,
        u0: check_u(u0.unwrap_or(s.u0))?,
        plant: s.plant,
        noise: s.noise,
    })
}

fn slopes_table(ds: &Dataset) -> Result<Table, CliError> {
    let mut t = Table::new(&["visual_level", "haptic_level", "metric", "slope", "intercept", "n"]);
    for metric in [Metric::ErrorDeg, Metric::UMean] {
        for sl in slope_report(&ds.rows, metric)? {
            t.push(vec![
                sl.condition.visual.to_string(),
                sl.condition.haptic.to_string(),
                metric.name().into(),
                fmt_num(sl.slope),
                fmt_num(sl.intercept),
                sl.n.to_string(),
            ]);
        }
    }
    Ok(t)
}

/// Per-condition means of interaction trials: `(error_deg, u_norm)`.
fn condition_means(ds: &Dataset) -> (Grid3, Grid3) {
    let mut err = [[0.0; 3]; 3];
    let mut un = [[0.0; 3]; 3];
    for c in NoiseCondition::all() {
        let rows: Vec<_> = ds.rows.iter().filter(|r| !r.solo && r.condition == c).collect();
        let n = rows.len().max(1) as f64;
        err[c.visual.index()][c.haptic.index()] = rows.iter().map(|r| r.error_deg).sum::<f64>() / n;
        un[c.visual.index()][c.haptic.index()] = rows.iter().map(|r| r.u_norm.unwrap_or(0.0)).sum::<f64>() / n;
    }
    (err, un)
}

fn cmd_protocol(a: &ProtocolArgs, s: &Settings, seed: u64, run: &mut Run) -> Result<(), CliError> {
    let spec = protocol_spec(s, a.rule, a.trials_per_block, a.solo_trials, a.u0)?;
    let ds = run_protocol(&spec, seed)?;
    run.table("dataset.csv", &io::dataset_table(&ds))?;
    if spec.trials_per_block >= 3 {
        run.table("slopes.csv", &slopes_table(&ds)?)?;
    }
    let mut order = Table::new(&["block", "visual_level", "haptic_level"]);
    for (b, c) in ds.block_order.iter().enumerate() {
        order.push(vec![(b + 1).to_string(), c.visual.to_string(), c.haptic.to_string()]);
    }
    run.table("block_order.csv", &order)?;
    println!("{} trials written", ds.rows.len());
    Ok(())
}

fn read_observed(path: &Path) -> Result<ObservedGrid, CliError> {
    let grid = io::read_grid(&Table::read(path)?, "u_normalized")?;
    Ok(ObservedGrid::new(grid)?)
}

fn cmd_fit(a: &FitArgs, s: &Settings, seed: u64, run: &mut Run) -> Result<(), CliError> {
    let data = read_observed(&a.input)?;
    let fit = identify(&data, &s.pso(&a.search, seed))?;
    run.table("fit.csv", &io::fit_table(&fit))?;
    run.table("predicted.csv", &io::grid_table(&fit.predicted, "u_normalized"))?;
    let summary = io::fit_summary(&fit);
    run.text("fit.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_predict(a: &PredictArgs, s: &Settings, seed: u64, run: &mut Run) -> Result<(), CliError> {
    if !(a.noise_sd >= 0.0 && a.noise_sd.is_finite()) {
        return Err(CliError::Usage(format!("--noise-sd {} must be >= 0", a.noise_sd)));
    }
    let params = s.oie(a.gamma)?;
    let mut grid = if a.table1 {
        predict_grid_effective(&EffectiveNoise::PUBLISHED, &params)?
    } else {
        predict_grid(&s.noise.visual, &s.noise.haptic, &params)?
    };
    if a.noise_sd > 0.0 {
        let mut rng = seed::stream(seed, "predict-noise");
        for v in grid.iter_mut().flatten() {
            let z: f64 = rng.sample(StandardNormal);
            *v = (*v + a.noise_sd * z).clamp(0.0, 1.0);
        }
    }
    run.table("grid.csv", &io::grid_table(&grid, "u_normalized"))?;
    run.figure(&io::grid_figure("fig4_grid", "Predicted cocontraction per condition", "u*", &[("u_star", &grid)])?)?;
    if a.mesh > 0 {
        let mesh = predict_mesh(&s.noise.visual, &s.noise.haptic, &params, (s.mesh_sigma_c_max, a.mesh), (s.mesh_sigma_p_max, a.mesh))?;
        run.figure(&io::surface_figure("fig4_surface", &mesh)?)?;
    }
    for row in &grid {
        println!("{}", row.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(" "));
    }
    Ok(())
}

/// Seed-averaged simulated tracking error at the given cocontraction grid.
fn simulated_errors(u: &Grid3, s: &Settings, seed: u64) -> Result<Grid3, CliError> {
    let mut err = [[0.0; 3]; 3];
    let n = s.error_seeds.max(1);
    for c in NoiseCondition::all() {
        let (i, j) = (c.visual.index(), c.haptic.index());
        for k in 0..n {
            let rec = simulate(&TrialSetup::new(c, u[i][j]), &s.plant, seed::subseed(seed, &format!("errors{c}/{k}")))?;
            err[i][j] += tracking_error(&rec)? / n as f64;
        }
    }
    Ok(err)
}

fn compare_and_emit(data: &ObservedGrid, errors: &Grid3, search: &SearchArgs, s: &Settings, seed: u64, run: &mut Run) -> Result<(), CliError> {
    let fit = identify(data, &s.pso(search, seed))?;
    let tem = fit_tem(data, errors)?;
    let tem_params = tem.params(s.tem_gamma).ok_or_else(|| IdentError::Config("TEM ratio cannot be realized".into()))?;
    let cmp = compare_models(data, &fit, &tem_params, errors)?;
    let (cells, scores) = io::comparison_tables(&data.u, &fit, &cmp);
    run.table("comparison.csv", &cells)?;
    run.table("scores.csv", &scores)?;
    run.table("fit.csv", &io::fit_table(&fit))?;
    run.figure(&io::grid_figure(
        "fig4_comparison",
        "Observed and predicted cocontraction",
        "normalized cocontraction",
        &[("observed", &data.u), ("oie", &fit.predicted), ("tem", &cmp.tem_predicted)],
    )?)?;
    println!(
        "AIC/n: OIE {} TEM {}; preferred {:?}",
        fmt_num(cmp.oie.aic_n),
        fmt_num(cmp.tem.aic_n),
        cmp.preferred
    );
    Ok(())
}

fn cmd_compare(a: &CompareArgs, s: &Settings, seed: u64, run: &mut Run) -> Result<(), CliError> {
    let data = read_observed(&a.input)?;
    let errors = match &a.errors {
        Some(p) => io::read_grid(&Table::read(p)?, "error_deg")?,
        None => {
            let e = simulated_errors(&data.u, s, seed)?;
            run.table("errors.csv", &io::grid_table(&e, "error_deg"))?;
            e
        }
    };
    compare_and_emit(&data, &errors, &a.search, s, seed, run)
}

/// Sampling rate implied by a uniformly spaced time column.
fn rate_from_time(t: &[f64]) -> Result<f64, CliError> {
    if t.len() < 2 {
        return Err(IoError::Schema("need at least two samples".into()).into());
    }
    let span = t[t.len() - 1] - t[0];
    let rate = (t.len() - 1) as f64 / span;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(IoError::Schema("time column must increase".into()).into());
    }
    let dt = 1.0 / rate;
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1.0) + 1e-9) {
        return Err(IoError::Schema("time column is not uniformly spaced".into()).into());
    }
    Ok(rate)
}

fn cmd_emg(a: &EmgArgs, s: &Settings, run: &mut Run) -> Result<(), CliError> {
    let table = Table::read(&a.input)?;
    if a.calibrate {
        let env = table.column_f64("envelope")?;
        let torque = table.column_f64("torque")?;
        let pts: Vec<(f64, f64)> = env.into_iter().zip(torque).collect();
        let fit = calibrate(&pts)?;
        let mut t = Table::new(&["alpha0", "alpha1", "positive"]);
        t.push(vec![fmt_num(fit.alpha0), fmt_num(fit.alpha1), fit.positive.to_string()]);
        run.table("calibration.csv", &t)?;
        println!("alpha0={} alpha1={}", fmt_num(fit.alpha0), fmt_num(fit.alpha1));
        if !fit.positive {
            eprintln!("warning: calibration coefficients are not both positive");
        }
        return Ok(());
    }
    let t = table.column_f64("t")?;
    let rate = rate_from_time(&t)?;
    let opts = EnvelopeOptions { zero_phase: a.zero_phase, ..EnvelopeOptions::default() };
    let env_f = envelope_with(&EmgSeries::new(table.column_f64("emg_f_raw")?, rate), &opts)?.samples;
    let env_e = envelope_with(&EmgSeries::new(table.column_f64("emg_e_raw")?, rate), &opts)?.samples;
    let cal = Calibration::new(s.plant.emg_alpha0, s.plant.emg_alpha1)?;
    let d = decompose(&cal.torque(&env_f), &cal.torque(&env_e))?;
    if a.decompose {
        let mut out = Table::new(&["t", "env_f", "env_e", "tau", "u"]);
        for k in 0..t.len() {
            out.push_nums(&[t[k], env_f[k], env_e[k], d.tau[k], d.u[k]]);
        }
        run.table("emg_out.csv", &out)?;
    } else {
        let tau = spectrum(&d.tau, rate)?;
        let u = spectrum(&d.u, rate)?;
        run.table("spectrum_reciprocal.csv", &io::spectrum_table(&tau))?;
        run.table("spectrum_cocontraction.csv", &io::spectrum_table(&u))?;
        run.table("peaks.csv", &peaks_table(&[("reciprocal", &tau), ("cocontraction", &u)]))?;
    }
    Ok(())
}

fn peaks_table(spectra: &[(&str, &Spectrum)]) -> Table {
    let mut t = Table::new(&["series", "freq_hz", "amplitude"]);
    for (name, s) in spectra {
        for p in &s.peaks {
            t.push(vec![name.to_string(), fmt_num(p.freq_hz), fmt_num(p.amplitude)]);
        }
    }
    t
}

/// Generated series at 100 Hz over one trial.
fn generated_signal(kind: SignalKind, condition: NoiseCondition, u: Option<f64>, s: &Settings, seed: u64) -> Result<(Vec<f64>, Option<f64>), CliError> {
    let n = crate::trial_sim::plant::SAMPLES;
    let times = (0..n).map(|k| k as f64 / RECORD_HZ);
    match kind {
        SignalKind::Target => Ok((times.map(|t| target_position(t, 0.0)).collect::<Result<_, _>>()?, None)),
        SignalKind::Perturbation => {
            let sp = if condition.sigma_p() > 0.0 { condition.sigma_p() } else { 1.0 };
            Ok((times.map(|t| perturbation_torque(t, sp)).collect::<Result<_, _>>()?, None))
        }
        SignalKind::Reciprocal | SignalKind::Cocontraction => {
            let u = match u {
                Some(u) => check_u(u)?,
                None => {
                    let (sv, sh) = EffectiveNoise::PUBLISHED.at(condition);
                    oie_fixed_point(sv, sh, &s.oie(None)?)?
                }
            };
            let rec = simulate(&TrialSetup::new(condition, u), &s.plant, seed)?;
            let cal = Calibration::new(s.plant.emg_alpha0, s.plant.emg_alpha1)?;
            let d = decompose(&cal.torque(&rec.emg_f), &cal.torque(&rec.emg_e))?;
            let corr = lag_correlation(&d.tau, &rec.q_star, 50).ok().map(|c| c.zero_lag);
            Ok((if kind == SignalKind::Reciprocal { d.tau } else { d.u }, corr))
        }
    }
}

fn signal_name(kind: SignalKind) -> &'static str {
    match kind {
        SignalKind::Target => "target",
        SignalKind::Perturbation => "perturbation",
        SignalKind::Reciprocal => "reciprocal",
        SignalKind::Cocontraction => "cocontraction",
    }
}

fn cmd_spectrum(a: &SpectrumArgs, s: &Settings, seed: u64, run: &mut Run) -> Result<(), CliError> {
    let (name, series, rate) = match (&a.input, a.signal) {
        (Some(p), _) => {
            let col = a.column.as_deref().expect("clap requires --column");
            (col.to_string(), Table::read(p)?.column_f64(col)?, a.rate)
        }
        (None, Some(kind)) => {
            let (series, corr) = generated_signal(kind, a.condition, a.u, s, seed)?;
            if let Some(r) = corr {
                println!("correlation with target (zero lag): {}", fmt_num(r));
            }
            (signal_name(kind).to_string(), series, RECORD_HZ)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let sp = spectrum(&series, rate)?;
    run.table("spectrum.csv", &io::spectrum_table(&sp))?;
    run.table("peaks.csv", &peaks_table(&[(&name, &sp)]))?;
    run.figure(&io::spectra_figure("fig3_spectrum", &[(&name, &sp)], 10.0)?)?;
    for p in &sp.peaks {
        println!("peak {} Hz amplitude {}", fmt_num(p.freq_hz), fmt_num(p.amplitude));
    }
    Ok(())
}

fn cmd_figures(a: &FiguresArgs, s: &Settings, seed: u64, run: &mut Run) -> Result<(), CliError> {
    let spec = protocol_spec(s, RuleKind::Oie, a.trials_per_block, a.solo_trials, None)?;
    let ds = run_protocol(&spec, seed::subseed(seed, "figures/protocol"))?;
    run.table("dataset.csv", &io::dataset_table(&ds))?;
    run.figure(&io::evolution_figure("fig2_evolution", &ds)?)?;
    let (err, un) = condition_means(&ds);
    run.figure(&io::grid_figure("fig2_error", "Mean tracking error", "error [deg]", &[("error_deg", &err)])?)?;
    run.figure(&io::grid_figure("fig2_cocontraction", "Mean normalized cocontraction", "u_norm", &[("u_norm", &un)])?)?;

    let v0h2: NoiseCondition = "V0H2".parse().expect("valid label");
    let sub = seed::subseed(seed, "figures/spectra");
    let (target, _) = generated_signal(SignalKind::Target, v0h2, None, s, sub)?;
    let (pert, _) = generated_signal(SignalKind::Perturbation, v0h2, None, s, sub)?;
    let (tau, _) = generated_signal(SignalKind::Reciprocal, v0h2, None, s, sub)?;
    let (u, _) = generated_signal(SignalKind::Cocontraction, v0h2, None, s, sub)?;
    let spectra = [
        spectrum(&target, RECORD_HZ)?,
        spectrum(&pert, RECORD_HZ)?,
        spectrum(&tau, RECORD_HZ)?,
        spectrum(&u, RECORD_HZ)?,
    ];
    let named: Vec<(&str, &Spectrum)> =
        ["target", "perturbation", "reciprocal", "cocontraction"].into_iter().zip(spectra.iter()).collect();
    run.figure(&io::spectra_figure("fig3_spectra", &named, 10.0)?)?;

    let params = s.oie(None)?;
    let mesh = predict_mesh(&s.noise.visual, &s.noise.haptic, &params, (s.mesh_sigma_c_max, 30), (s.mesh_sigma_p_max, 30))?;
    run.figure(&io::surface_figure("fig4_surface", &mesh)?)?;
    let observed = ObservedGrid::new(un)?;
    compare_and_emit(&observed, &err, &a.search, s, seed, run)
}
