use std::fs::{self, File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ptfc::competitors::{coherence_curve, run_method, Method};
use ptfc::exec::{configure_threads, Execution};
use ptfc::harness::{
    agreement_analysis, bias_experiment, identification_experiment_resumable, noise_sweep, EstimatorHrf,
    ExperimentOptions, ReferenceSource, ReplicationRow, ScoredMethod,
};
use ptfc::ptfce::{ptfce_estimate, ptfce_matrix, BoldPanel, PtfceOptions, DEFAULT_LAG};
use ptfc::signal::{FrequencyBand, HrfSpec, SampledSignal, TimeGrid};
use ptfc::simgen::{generate, task_intervals, Mechanism, MechanismConfig};

use crate::error::CliError;
use crate::io::{load_bold_csv, load_stimulus_csv, save_bold_csv, save_intervals};
use crate::manifest::{digests, now, sibling, write_manifest, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "ptfc", version, about = "Population-level task-evoked functional connectivity")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic panel from one of the simulation mechanisms.
    Simulate(SimulateArgs),
    /// Estimate connectivity for one node pair or all pairs.
    Estimate(EstimateArgs),
    /// Run several methods over all node pairs and measure their agreement.
    Compare(CompareArgs),
    /// Monte Carlo experiments.
    Bench {
        #[command(subcommand)]
        kind: BenchCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Rate at which each method ranks the weak pair below the strong pair.
    Identification(IdentificationArgs),
    /// Mean and spread of ptFCE on two-node data over (rho, n).
    Bias(BiasArgs),
    /// Mean ptFCE estimate as the noise variance is scaled.
    NoiseSweep(NoiseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Ptfce,
    Naive,
    Task,
    Beta,
    Coherence,
}

impl MethodArg {
    fn competitor(self) -> Option<Method> {
        match self {
            MethodArg::Ptfce => None,
            MethodArg::Naive => Some(Method::NaivePearson),
            MethodArg::Task => Some(Method::TaskPearson),
            MethodArg::Beta => Some(Method::BetaSeries),
            MethodArg::Coherence => Some(Method::Coherence),
        }
    }

    fn needs_stimulus(self) -> bool {
        matches!(self, MethodArg::Ptfce | MethodArg::Task | MethodArg::Beta)
    }

    fn name(self) -> &'static str {
        match self {
            MethodArg::Ptfce => "ptfce",
            MethodArg::Naive => "naive",
            MethodArg::Task => "task",
            MethodArg::Beta => "beta",
            MethodArg::Coherence => "coherence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateArg {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HrfChoice {
    Canonical,
    Generating,
}

impl From<HrfChoice> for EstimatorHrf {
    fn from(c: HrfChoice) -> Self {
        match c {
            HrfChoice::Canonical => EstimatorHrf::Canonical,
            HrfChoice::Generating => EstimatorHrf::Generating,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceChoice {
    Estimated,
    Oracle,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// 0, 1 or 2.
    #[arg(long)]
    pub mechanism: String,
    #[arg(long)]
    pub n: usize,
    /// Target correlations: one value for mechanism 0, two otherwise.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long, env = "PTFC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Sampling interval in seconds.
    #[arg(long, default_value_t = 0.72)]
    pub tr: f64,
    /// Samples per series.
    #[arg(long, default_value_t = 284)]
    pub points: usize,
    /// Panel CSV to write; a sidecar JSON and a stimulus CSV go beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Panel CSV (`subject,node,t0,...`).
    #[arg(long)]
    pub input: PathBuf,
    /// Stimulus CSV (`start,end` seconds per row).
    #[arg(long)]
    pub stimulus: Option<PathBuf>,
    /// Sampling interval of the panel in seconds.
    #[arg(long, default_value_t = 0.72)]
    pub tr: f64,
    /// Estimator HRF `a1,a2,b1,b2,c[,latency]`; the canonical shape by default.
    #[arg(long, value_delimiter = ',')]
    pub hrf: Option<Vec<f64>>,
    /// Frequency band `LO,HI` in Hz.
    #[arg(long, value_delimiter = ',')]
    pub band: Option<Vec<f64>>,
    /// AMUSE lag in samples.
    #[arg(long, default_value_t = DEFAULT_LAG)]
    pub lag: i64,
    #[arg(long, env = "PTFC_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[command(flatten)]
    pub input: InputArgs,
    /// Node pair `K,L`.
    #[arg(long, value_delimiter = ',', required_unless_present = "all_pairs", conflicts_with = "all_pairs")]
    pub nodes: Option<Vec<String>>,
    #[arg(long)]
    pub all_pairs: bool,
    /// JSON result path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional `frequency,value` CSV of the curve (ptfce and coherence).
    #[arg(long)]
    pub curve_csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub methods: Vec<MethodArg>,
    #[command(flatten)]
    pub input: InputArgs,
    /// Population aggregate for per-subject methods.
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregate: AggregateArg,
    /// Classification threshold on the standardized scale.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub reps: usize,
    #[arg(long, env = "PTFC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// HRF handed to the estimators.
    #[arg(long, value_enum, default_value = "canonical")]
    pub estimator_hrf: HrfChoice,
    #[arg(long, value_delimiter = ',')]
    pub band: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_LAG)]
    pub lag: i64,
    /// CSV report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IdentificationArgs {
    /// 1 or 2.
    #[arg(long)]
    pub mechanism: String,
    #[arg(long)]
    pub n: usize,
    /// Scored methods, e.g. `ptfce,task_pearson_mean`; all by default.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Reuse replications already in the per-replication file.
    #[arg(long)]
    pub resume: bool,
    #[command(flatten)]
    pub common: ExperimentArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BiasArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    pub rhos: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "308")]
    pub ns: Vec<usize>,
    #[command(flatten)]
    pub common: ExperimentArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct NoiseArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.5,2,5")]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value_t = 0.75)]
    pub rho: f64,
    #[arg(long, default_value_t = 308)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "estimated")]
    pub references: ReferenceChoice,
    #[command(flatten)]
    pub common: ExperimentArgs,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Outcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
}

fn execute(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        configure_threads(t);
    }
    let started = now();
    let (name, config, out, outcome) = match &cli.command {
        Command::Simulate(a) => ("simulate", serde_json::to_value(a)?, a.out.clone(), simulate(a)?),
        Command::Estimate(a) => ("estimate", serde_json::to_value(a)?, a.out.clone(), estimate(a)?),
        Command::Compare(a) => ("compare", serde_json::to_value(a)?, a.out.clone(), compare(a)?),
        Command::Bench { kind } => match kind {
            BenchCommand::Identification(a) => {
                ("bench identification", serde_json::to_value(a)?, a.common.out.clone(), identification(a)?)
            }
            BenchCommand::Bias(a) => ("bench bias", serde_json::to_value(a)?, a.common.out.clone(), bias(a)?),
            BenchCommand::NoiseSweep(a) => {
                ("bench noise-sweep", serde_json::to_value(a)?, a.common.out.clone(), noise(a)?)
            }
        },
    };
    let manifest = RunManifest {
        command: name.to_string(),
        argv,
        config,
        seed: outcome.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        inputs: digests(&outcome.inputs)?,
        outputs: digests(&outcome.outputs)?,
        started_at: started,
        finished_at: now(),
    };
    write_manifest(&out, &manifest)?;
    Ok(())
}

fn parse_band(band: &Option<Vec<f64>>) -> Result<FrequencyBand, CliError> {
    match band.as_deref() {
        None => Ok(FrequencyBand::hemodynamic()),
        Some([lo, hi]) => Ok(FrequencyBand::new(*lo, *hi)?),
        Some(v) => Err(CliError::Validation(format!("--band takes LO,HI, got {} value(s)", v.len()))),
    }
}

fn parse_hrf(hrf: &Option<Vec<f64>>) -> Result<HrfSpec, CliError> {
    match hrf.as_deref() {
        None => Ok(HrfSpec::canonical()),
        Some([a1, a2, b1, b2, c]) => Ok(HrfSpec::new(*a1, *a2, *b1, *b2, *c, 0.0)?),
        Some([a1, a2, b1, b2, c, latency]) => Ok(HrfSpec::new(*a1, *a2, *b1, *b2, *c, *latency)?),
        Some(v) => Err(CliError::Validation(format!("--hrf takes 5 or 6 values, got {}", v.len()))),
    }
}

fn parse_mechanism(s: &str) -> Result<Mechanism, CliError> {
    Ok(Mechanism::parse(s)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
struct SimulationSidecar<'a> {
    config: &'a MechanismConfig,
    node_labels: &'a [String],
    subject_ids: &'a [String],
    latent_betas: &'a Option<Vec<Vec<f64>>>,
}

fn simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let mut config = MechanismConfig::new(parse_mechanism(&a.mechanism)?, a.n, a.rho.clone(), a.seed)
        .with_noise_scale(a.noise_scale);
    config.grid = TimeGrid::new(a.tr, a.points)?;
    let data = generate(&config, Execution::Parallel)?;
    save_bold_csv(&a.out, &data.panel)?;
    let sidecar = sibling(&a.out, "json");
    write_json(
        &sidecar,
        &SimulationSidecar {
            config: &data.config,
            node_labels: data.panel.node_labels(),
            subject_ids: data.panel.subject_ids(),
            latent_betas: &data.latent_betas,
        },
    )?;
    let stimulus = sibling(&a.out, "stimulus.csv");
    save_intervals(&stimulus, &task_intervals())?;
    Ok(Outcome { inputs: vec![], outputs: vec![a.out.clone(), sidecar, stimulus], seed: Some(a.seed) })
}

struct Loaded {
    panel: BoldPanel,
    stimulus: Option<SampledSignal>,
    hrf: HrfSpec,
    band: FrequencyBand,
    inputs: Vec<PathBuf>,
}

fn load_inputs(a: &InputArgs, need_stimulus: bool) -> Result<Loaded, CliError> {
    let hrf = parse_hrf(&a.hrf)?;
    let band = parse_band(&a.band)?;
    if need_stimulus && a.stimulus.is_none() {
        return Err(CliError::Validation("this method needs --stimulus".into()));
    }
    let panel = load_bold_csv(&a.input, a.tr)?;
    let mut inputs = vec![a.input.clone()];
    let stimulus = match &a.stimulus {
        Some(p) => {
            inputs.push(p.clone());
            Some(load_stimulus_csv(p, panel.grid())?)
        }
        None => None,
    };
    Ok(Loaded { panel, stimulus, hrf, band, inputs })
}

fn stimulus_or_zero(l: &Loaded) -> SampledSignal {
    l.stimulus.clone().unwrap_or_else(|| SampledSignal::zeros(*l.panel.grid()))
}

fn ptfce_options(band: FrequencyBand, lag: i64) -> PtfceOptions {
    PtfceOptions { band, lag, execution: Execution::Parallel }
}

#[derive(Serialize)]
struct CompetitorResult {
    method: &'static str,
    node_pair: (String, String),
    mean: f64,
    median: f64,
    per_subject: Vec<Option<f64>>,
    excluded: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<Vec<CurveRow>>,
}

#[derive(Serialize)]
struct CurveRow {
    frequency: f64,
    value: Option<f64>,
}

#[derive(Serialize)]
struct CompetitorMatrix {
    method: &'static str,
    labels: Vec<String>,
    mean: Vec<Vec<Option<f64>>>,
    median: Vec<Vec<Option<f64>>>,
    failures: Vec<(String, String, String)>,
}

fn node_pair(nodes: &[String]) -> Result<(String, String), CliError> {
    match nodes {
        [k, l] if k == l => Err(CliError::Validation(format!("--nodes must name two different nodes, got {k},{l}"))),
        [k, l] => Ok((k.clone(), l.clone())),
        _ => Err(CliError::Validation(format!("--nodes takes K,L, got {} value(s)", nodes.len()))),
    }
}

fn estimate(a: &EstimateArgs) -> Result<Outcome, CliError> {
    let loaded = load_inputs(&a.input, a.method.needs_stimulus())?;
    let panel = &loaded.panel;
    let stimulus = stimulus_or_zero(&loaded);
    let hrf = loaded.hrf;
    let mut outputs = vec![a.out.clone()];
    let mut curve_rows: Option<Vec<CurveRow>> = None;

    if a.all_pairs {
        let k = panel.n_nodes();
        match a.method.competitor() {
            None => {
                let m = ptfce_matrix(
                    panel,
                    &stimulus,
                    &vec![hrf; k],
                    a.input.seed,
                    &ptfce_options(loaded.band, a.input.lag),
                )?;
                write_json(&a.out, &m)?;
            }
            Some(method) => {
                let mut mean = vec![vec![None; k]; k];
                let mut median = vec![vec![None; k]; k];
                let mut failures = Vec::new();
                let labels = panel.node_labels().to_vec();
                for i in 0..k {
                    mean[i][i] = Some(1.0);
                    median[i][i] = Some(1.0);
                    for j in i + 1..k {
                        match run_method(
                            method,
                            panel,
                            &labels[i],
                            &labels[j],
                            &stimulus,
                            &hrf,
                            &hrf,
                            &loaded.band,
                            Execution::Parallel,
                        ) {
                            Ok(e) => {
                                mean[i][j] = Some(e.mean_aggregate);
                                mean[j][i] = Some(e.mean_aggregate);
                                median[i][j] = Some(e.median_aggregate);
                                median[j][i] = Some(e.median_aggregate);
                            }
                            Err(e) => failures.push((labels[i].clone(), labels[j].clone(), e.to_string())),
                        }
                    }
                }
                write_json(&a.out, &CompetitorMatrix { method: a.method.name(), labels, mean, median, failures })?;
            }
        }
    } else {
        let (k, l) = node_pair(a.nodes.as_deref().unwrap_or(&[]))?;
        match a.method.competitor() {
            None => {
                let e = ptfce_estimate(
                    panel,
                    &k,
                    &l,
                    &stimulus,
                    &hrf,
                    &hrf,
                    a.input.seed,
                    &ptfce_options(loaded.band, a.input.lag),
                )?;
                curve_rows = Some(e.curve.iter().map(|p| CurveRow { frequency: p.frequency, value: p.value }).collect());
                write_json(&a.out, &e)?;
            }
            Some(method) => {
                let e = run_method(method, panel, &k, &l, &stimulus, &hrf, &hrf, &loaded.band, Execution::Parallel)?;
                let curve = if method == Method::Coherence {
                    Some(
                        coherence_curve(panel, &k, &l, &loaded.band, Execution::Parallel)?
                            .into_iter()
                            .map(|(frequency, value)| CurveRow { frequency, value })
                            .collect::<Vec<_>>(),
                    )
                } else {
                    None
                };
                let result = CompetitorResult {
                    method: a.method.name(),
                    node_pair: (k, l),
                    mean: e.mean_aggregate,
                    median: e.median_aggregate,
                    per_subject: e.per_subject,
                    excluded: e.excluded,
                    curve,
                };
                write_json(&a.out, &result)?;
                curve_rows = result.curve;
            }
        }
    }
    if let Some(path) = &a.curve_csv {
        let rows = curve_rows.ok_or_else(|| {
            CliError::Validation("--curve-csv needs a single pair with the ptfce or coherence method".into())
        })?;
        write_rows(path, &rows)?;
        outputs.push(path.clone());
    }
    Ok(Outcome { inputs: loaded.inputs, outputs, seed: Some(a.input.seed) })
}

#[derive(Serialize)]
struct MethodColumn {
    method: String,
    estimates: Vec<f64>,
}

#[derive(Serialize)]
struct CompareReport {
    pairs: Vec<(String, String)>,
    methods: Vec<MethodColumn>,
    /// Methods with identical estimates for every pair, left out of the agreement analysis.
    excluded_methods: Vec<String>,
    /// Row and column order of `standardized`, `classes` and `kappa`.
    compared_methods: Vec<String>,
    threshold: f64,
    standardized: Vec<Vec<f64>>,
    classes: Vec<Vec<bool>>,
    kappa: Vec<Vec<Option<ptfc::harness::KappaResult>>>,
}

fn compare(a: &CompareArgs) -> Result<Outcome, CliError> {
    if a.methods.len() < 2 {
        return Err(CliError::Validation("--methods needs at least two methods".into()));
    }
    let need_stimulus = a.methods.iter().any(|m| m.needs_stimulus());
    let loaded = load_inputs(&a.input, need_stimulus)?;
    let panel = &loaded.panel;
    let stimulus = stimulus_or_zero(&loaded);
    let labels = panel.node_labels().to_vec();
    let k = labels.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    if pairs.len() < 2 {
        return Err(CliError::Validation("compare needs at least three nodes".into()));
    }
    let mut columns = Vec::with_capacity(a.methods.len());
    for &m in &a.methods {
        let estimates: Vec<f64> = match m.competitor() {
            None => {
                let mat = ptfce_matrix(
                    panel,
                    &stimulus,
                    &vec![loaded.hrf; k],
                    a.input.seed,
                    &ptfce_options(loaded.band, a.input.lag),
                )?;
                if let Some(f) = mat.failures.first() {
                    return Err(CliError::Runtime(format!("ptfce failed for {}-{}: {}", f.pair.0, f.pair.1, f.reason)));
                }
                pairs.iter().map(|&(i, j)| mat.get(i, j).unwrap_or(f64::NAN)).collect()
            }
            Some(method) => pairs
                .iter()
                .map(|&(i, j)| {
                    let e = run_method(
                        method,
                        panel,
                        &labels[i],
                        &labels[j],
                        &stimulus,
                        &loaded.hrf,
                        &loaded.hrf,
                        &loaded.band,
                        Execution::Parallel,
                    )?;
                    Ok(match a.aggregate {
                        AggregateArg::Mean => e.mean_aggregate,
                        AggregateArg::Median => e.median_aggregate,
                    })
                })
                .collect::<Result<_, CliError>>()?,
        };
        columns.push(MethodColumn { method: m.name().to_string(), estimates });
    }
    // a method that scores every pair alike cannot be standardized
    let (kept, excluded): (Vec<&MethodColumn>, Vec<&MethodColumn>) =
        columns.iter().partition(|c| c.estimates.iter().any(|v| *v != c.estimates[0]));
    if kept.is_empty() {
        return Err(CliError::Runtime("every method gave the same value for all pairs".into()));
    }
    let input: Vec<(String, Vec<f64>)> = kept.iter().map(|c| (c.method.clone(), c.estimates.clone())).collect();
    let agreement = agreement_analysis(&input, a.threshold)?;
    let report = CompareReport {
        pairs: pairs.iter().map(|&(i, j)| (labels[i].clone(), labels[j].clone())).collect(),
        excluded_methods: excluded.iter().map(|c| c.method.clone()).collect(),
        compared_methods: agreement.methods,
        methods: columns,
        threshold: a.threshold,
        standardized: agreement.standardized,
        classes: agreement.classes,
        kappa: agreement.kappa,
    };
    write_json(&a.out, &report)?;
    Ok(Outcome { inputs: loaded.inputs, outputs: vec![a.out.clone()], seed: Some(a.input.seed) })
}

fn experiment_options(c: &ExperimentArgs) -> Result<ExperimentOptions, CliError> {
    if c.reps == 0 {
        return Err(CliError::Validation("--reps must be at least 1".into()));
    }
    Ok(ExperimentOptions {
        band: parse_band(&c.band)?,
        lag: c.lag,
        estimator_hrf: c.estimator_hrf.into(),
        execution: Execution::Parallel,
    })
}

#[derive(Serialize)]
struct RateRow<'a> {
    method: &'a str,
    mechanism: String,
    n: usize,
    reps: usize,
    correct: usize,
    failures: usize,
    ties: usize,
    rate: f64,
    half_width: f64,
}

fn read_completed(path: &Path) -> Result<Vec<ReplicationRow>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::format(&path.display().to_string(), e))?;
    rdr.deserialize()
        .collect::<Result<Vec<ReplicationRow>, _>>()
        .map_err(|e| CliError::format(&path.display().to_string(), e))
}

fn identification(a: &IdentificationArgs) -> Result<Outcome, CliError> {
    let options = experiment_options(&a.common)?;
    let mechanism = parse_mechanism(&a.mechanism)?;
    let methods = match &a.methods {
        None => ScoredMethod::all(),
        Some(names) => names.iter().map(|s| ScoredMethod::parse(s)).collect::<Result<_, _>>()?,
    };
    let rows_path = sibling(&a.common.out, "replications.csv");
    let completed = if a.resume { read_completed(&rows_path)? } else { Vec::new() };
    let append = a.resume && !completed.is_empty();
    let file = if append {
        OpenOptions::new().append(true).open(&rows_path)
    } else {
        File::create(&rows_path)
    }
    .map_err(|e| CliError::io(&rows_path, e))?;
    let mut sink = csv::WriterBuilder::new().has_headers(!append).from_writer(BufWriter::new(file));
    let report = identification_experiment_resumable(
        mechanism,
        a.n,
        a.common.reps,
        &methods,
        a.common.seed,
        &options,
        &completed,
        |rows| {
            for row in rows {
                sink.serialize(row).map_err(|e| ptfc::error::PtfcError::EstimationFailed(e.to_string()))?;
            }
            sink.flush().map_err(|e| ptfc::error::PtfcError::EstimationFailed(e.to_string()))
        },
    )?;
    drop(sink);
    let mech = a.mechanism.clone();
    let rows: Vec<RateRow> = report
        .methods
        .iter()
        .map(|m| RateRow {
            method: &m.method,
            mechanism: mech.clone(),
            n: report.n,
            reps: report.reps,
            correct: m.correct,
            failures: m.failures,
            ties: m.ties,
            rate: m.rate,
            half_width: m.half_width,
        })
        .collect();
    write_rows(&a.common.out, &rows)?;
    for r in &rows {
        println!("{:<22} {:.3} (±{:.3})", r.method, r.rate, r.half_width);
    }
    Ok(Outcome { inputs: vec![], outputs: vec![a.common.out.clone(), rows_path], seed: Some(a.common.seed) })
}

fn bias(a: &BiasArgs) -> Result<Outcome, CliError> {
    let options = experiment_options(&a.common)?;
    let rows = bias_experiment(&a.rhos, &a.ns, a.common.reps, a.common.seed, &options)?;
    write_rows(&a.common.out, &rows)?;
    for r in &rows {
        println!("rho {:<5} n {:<5} mean {:.3} sd {:.3}", r.rho, r.n, r.mean, r.sd);
    }
    Ok(Outcome { inputs: vec![], outputs: vec![a.common.out.clone()], seed: Some(a.common.seed) })
}

fn noise(a: &NoiseArgs) -> Result<Outcome, CliError> {
    let options = experiment_options(&a.common)?;
    let references = match a.references {
        ReferenceChoice::Estimated => ReferenceSource::Estimated,
        ReferenceChoice::Oracle => ReferenceSource::Oracle,
    };
    let rows = noise_sweep(&a.lambdas, a.rho, a.n, a.common.reps, a.common.seed, references, &options)?;
    write_rows(&a.common.out, &rows)?;
    for r in &rows {
        println!("lambda {:<5} mean {:.3} sd {:.3}", r.lambda, r.mean, r.sd);
    }
    Ok(Outcome { inputs: vec![], outputs: vec![a.common.out.clone()], seed: Some(a.common.seed) })
}
