use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use scalefit::io::{read_corpus, read_fit_config, read_params, write_atomic};
use scalefit::{report, svg, InputError, Inputs, RunManifest};
use scalefit_core::downstream::{self, SIGMOID_PARAM_NAMES};
use scalefit_core::fit::{self, PARAM_NAMES};
use scalefit_core::records::{aggregate, bucket_by_compute, DEFAULT_BUCKET_TOLERANCE};
use scalefit_core::{isoflop, pjsd, Direction, FitConfig, Observation, RecordError, ScalingLawParams};

/// The devlog budget ladder, used when no budgets are given.
const DEFAULT_BUDGETS: [f64; 10] = [1e18, 3e18, 6e18, 1e19, 3e19, 6e19, 1e20, 3e20, 6e20, 1e21];
const DEFAULT_OUT: &str = "scalefit-out";

#[derive(Parser)]
#[command(name = "scalefit", version, about = "Scaling-law fits, compute-optimal frontiers, isoFLOP checks and pJSD")]
struct Cli {
    /// Fit configuration (JSON); overrides the manifest's.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Seed for basin hopping; overrides the configuration's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: manifest `out`, else ./scalefit-out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Run manifest (JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Run-record file (CSV or JSON); repeatable.
    #[arg(long = "runs", value_name = "FILE")]
    runs: Vec<PathBuf>,
    /// Baseline statistics (JSON).
    #[arg(long)]
    baselines: Option<PathBuf>,
    /// Compute budgets, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "C,...")]
    budgets: Vec<f64>,
}

#[derive(Args)]
struct LawArgs {
    /// Law coefficients (JSON), bare or as saved by fit-loss.
    #[arg(long)]
    params: PathBuf,
    /// Compute budgets, comma separated [default: 1e18 ... 1e21 ladder]
    #[arg(long, value_delimiter = ',', value_name = "C,...")]
    budgets: Vec<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    LowerBetter,
    HigherBetter,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::LowerBetter => Direction::LowerBetter,
            DirectionArg::HigherBetter => Direction::HigherBetter,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the loss law to run records and tabulate its frontier.
    FitLoss {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "loss")]
        metric: String,
        /// Skip fitting and use these coefficients.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Jointly fit a sigmoid of the loss law to a downstream metric.
    FitDownstream {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        metric: String,
        /// Loss column used to bound the sigmoid midpoint.
        #[arg(long, default_value = "loss")]
        loss_metric: String,
        /// Upper loss scale for the midpoint bound, instead of the loss column.
        #[arg(long)]
        max_loss: Option<f64>,
        /// Label carried into the reachability verdict.
        #[arg(long, default_value = "")]
        label: String,
    },
    /// Compute-optimal N*, D*, r* per budget.
    Optimal {
        #[command(flatten)]
        law: LawArgs,
    },
    /// Loss-flat span and curvature of each isoFLOP.
    Flatness {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, default_value_t = scalefit_core::law::DEFAULT_FLATNESS_EPSILON)]
        epsilon: f64,
    },
    /// Budget at which the optimal tokens-per-parameter ratio reaches a target.
    Extrapolate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        target: f64,
    },
    /// isoFLOP curves of one metric, the behavior verdict, and a plot.
    Isoflop {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "loss")]
        metric: String,
        /// Defaults to the baseline's direction, else lower-better.
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
        /// Flag budgets whose best value lies within one std of the baseline.
        #[arg(long)]
        saturation: bool,
        /// Relative distance from a budget within which a run counts toward it.
        #[arg(long, default_value_t = DEFAULT_BUCKET_TOLERANCE)]
        tolerance: f64,
        /// Noise floor for points without seed spread.
        #[arg(long, default_value_t = isoflop::DEFAULT_ABS_TOL)]
        abs_tol: f64,
    },
    /// Phoneme n-gram Jensen-Shannon divergence between two corpora.
    Pjsd {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        real: PathBuf,
        /// n-gram orders, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = pjsd::DEFAULT_ORDERS)]
        orders: Vec<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SCALEFIT_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad input, 2 for everything the analysis itself rejects.
fn exit_code(e: &anyhow::Error) -> u8 {
    let input = e.chain().any(|c| c.is::<InputError>() || c.is::<RecordError>());
    if input {
        1
    } else {
        2
    }
}

struct Session {
    config_path: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Session {
    fn out_dir(&self, manifest: Option<&RunManifest>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| manifest.and_then(|m| m.out.clone()))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// Merges flags over the manifest and parses every input.
    fn load(&self, data: &DataArgs, metrics: &[&str]) -> Result<(RunManifest, Inputs, FitConfig), InputError> {
        let mut m = match &data.manifest {
            Some(p) => RunManifest::read(p)?,
            None => RunManifest::default(),
        };
        if !data.runs.is_empty() {
            m.runs = data.runs.clone();
        }
        if data.baselines.is_some() {
            m.baselines = data.baselines.clone();
        }
        if !data.budgets.is_empty() {
            m.budgets = data.budgets.clone();
        }
        if let Some(p) = &self.config_path {
            m.config = Some(p.clone());
        }
        m.metrics = metrics.iter().map(|s| s.to_string()).collect();
        let inputs = m.load()?;
        let mut config = inputs.config.clone();
        if let Some(seed) = self.seed {
            config.rng_seed = seed;
        }
        Ok((m, inputs, config))
    }
}

fn run(cli: Cli) -> Result<()> {
    let session = Session { config_path: cli.config, seed: cli.seed, out: cli.out };
    match cli.command {
        Command::FitLoss { data, metric, params } => fit_loss(&session, &data, &metric, params.as_deref()),
        Command::FitDownstream { data, metric, loss_metric, max_loss, label } => {
            fit_downstream(&session, &data, &metric, &loss_metric, max_loss, &label)
        }
        Command::Optimal { law } => optimal(&session, &law),
        Command::Flatness { law, epsilon } => flatness(&session, &law, epsilon),
        Command::Extrapolate { params, target } => extrapolate(&session, &params, target),
        Command::Isoflop { data, metric, direction, saturation, tolerance, abs_tol } => {
            isoflop_cmd(&session, &data, &metric, direction, saturation, tolerance, abs_tol)
        }
        Command::Pjsd { generated, real, orders } => pjsd_cmd(&session, &generated, &real, &orders),
    }
}

/// Collects output files so nothing is written until every result exists.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Self {
        Outputs { dir, files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn write(self) -> Result<()> {
        for (name, contents) in &self.files {
            let path = self.dir.join(name);
            write_atomic(&path, contents.as_bytes())?;
            info!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// Keeps metric names usable as file-name prefixes.
fn file_stem(metric: &str) -> String {
    metric
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn budgets_or_default(budgets: &[f64]) -> Result<Vec<f64>> {
    if let Some(&b) = budgets.iter().find(|&&b| !(b > 0.0 && b.is_finite())) {
        return Err(InputError::usage(format!("compute budget {b} is not positive")).into());
    }
    Ok(if budgets.is_empty() { DEFAULT_BUDGETS.to_vec() } else { budgets.to_vec() })
}

fn flags<'a>(names: &[&'a str], at_bound: &[bool]) -> BTreeMap<&'a str, bool> {
    names.iter().copied().zip(at_bound.iter().copied()).collect()
}

fn warn_bounds(names: &[&str], at_bound: &[bool]) {
    let hit: Vec<&str> = names.iter().zip(at_bound).filter(|(_, &b)| b).map(|(n, _)| *n).collect();
    if !hit.is_empty() {
        warn!("fit stopped at a search bound for: {}; widen the bounds or treat these values as limits", hit.join(", "));
    }
}

fn frontier(law: &ScalingLawParams, budgets: &[f64]) -> Result<Vec<scalefit_core::ComputeOptimalPoint>> {
    Ok(budgets.iter().map(|&c| law.optimal_allocation(c)).collect::<Result<_, _>>()?)
}

#[derive(Serialize)]
struct LossSummary {
    metric: String,
    observations: usize,
    fitted: bool,
    objective_value: Option<f64>,
    train_mre: f64,
    test_mre: Option<f64>,
    at_bound: BTreeMap<&'static str, bool>,
}

fn fit_loss(session: &Session, data: &DataArgs, metric: &str, params: Option<&Path>) -> Result<()> {
    let have_data = data.manifest.is_some() || !data.runs.is_empty();
    if let Some(p) = &session.config_path {
        read_fit_config(p)?;
    }
    let given = params.map(read_params).transpose()?;
    let loaded = if have_data || given.is_none() { Some(session.load(data, &[metric])?) } else { None };
    let manifest = loaded.as_ref().map(|(m, ..)| m);
    let budgets = budgets_or_default(manifest.map_or(&data.budgets, |m| &m.budgets))?;
    let mut out = Outputs::new(session.out_dir(manifest));
    let observations = match &loaded {
        Some((_, inputs, _)) => Some(aggregate(&inputs.records, metric)?),
        None => None,
    };

    let law = match (given, &observations, &loaded) {
        (Some(law), obs, _) => {
            if let Some(obs) = obs {
                let train_mre = fit::mre(&law, obs)?;
                out.add("residuals.csv", report::residuals_csv(obs, &[], |o| predict(&law, o)));
                out.add(
                    "summary.json",
                    report::json(&LossSummary {
                        metric: metric.into(),
                        observations: obs.len(),
                        fitted: false,
                        objective_value: None,
                        train_mre,
                        test_mre: None,
                        at_bound: BTreeMap::new(),
                    }),
                );
                println!("MRE of given coefficients on {} observations: {}", obs.len(), report::sig4(train_mre));
            }
            law
        }
        (None, Some(obs), Some((_, _, config))) => {
            info!("fitting {} observations of `{metric}` with {} hops", obs.len(), config.hop_count);
            let result = fit::basin_hop_fit(obs, config).context("loss fit failed")?;
            warn_bounds(&PARAM_NAMES, &result.at_bound);
            out.add("fit.json", report::json(&result));
            out.add("hop_trace.csv", report::hop_trace_csv(&result.hop_trace));
            out.add("residuals.csv", report::residuals_csv(obs, &result.test_indices, |o| predict(&result.params, o)));
            out.add(
                "summary.json",
                report::json(&LossSummary {
                    metric: metric.into(),
                    observations: obs.len(),
                    fitted: true,
                    objective_value: Some(result.objective_value),
                    train_mre: result.train_mre,
                    test_mre: result.test_mre,
                    at_bound: flags(&PARAM_NAMES, &result.at_bound),
                }),
            );
            print!("{}", report::params_table(&result.params));
            match result.test_mre {
                Some(t) => println!("train MRE {}  test MRE {}", report::sig4(result.train_mre), report::sig4(t)),
                None => println!("train MRE {}", report::sig4(result.train_mre)),
            }
            result.params
        }
        _ => unreachable!("observations are loaded whenever no coefficients are given"),
    };

    let points = frontier(&law, &budgets)?;
    out.add("params.json", report::json(&law));
    out.add("frontier.csv", report::frontier_csv(&points));
    print!("{}", report::frontier_table(&points));
    out.write()
}

fn predict(law: &ScalingLawParams, o: &Observation) -> f64 {
    law.loss(o.model_size, o.dataset_size).unwrap_or(f64::NAN)
}

#[derive(Serialize)]
struct DownstreamReport<'a> {
    metric: &'a str,
    fit: &'a downstream::FusedFit,
    bounds: &'a scalefit_core::SigmoidBounds,
    at_bound: BTreeMap<&'static str, bool>,
    reachability: Option<scalefit_core::ReachabilityVerdict>,
}

fn fit_downstream(
    session: &Session,
    data: &DataArgs,
    metric: &str,
    loss_metric: &str,
    max_loss: Option<f64>,
    label: &str,
) -> Result<()> {
    let (manifest, inputs, config) = session.load(data, &[metric])?;
    let budgets = budgets_or_default(&manifest.budgets)?;
    let obs = aggregate(&inputs.records, metric)?;
    let max_loss = match max_loss {
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(v) => return Err(InputError::usage(format!("--max-loss must be positive, got {v}")).into()),
        None => {
            let losses: Vec<f64> = inputs.records.iter().filter_map(|r| r.metrics.get(loss_metric).copied()).collect();
            if losses.is_empty() {
                return Err(InputError::usage(format!(
                    "no `{loss_metric}` column to bound the sigmoid midpoint; pass --loss-metric or --max-loss"
                ))
                .into());
            }
            losses.into_iter().fold(f64::NEG_INFINITY, f64::max)
        }
    };
    let values: Vec<f64> = obs.iter().map(|o| o.mean).collect();
    let bounds = scalefit_core::SigmoidBounds::from_data(&values, max_loss);
    info!("fused fit of `{metric}` on {} observations with {} hops", obs.len(), config.hop_count);
    let fit = downstream::fused_fit(&obs, &config, &bounds, None).context("fused downstream fit failed")?;
    warn_bounds(&SIGMOID_PARAM_NAMES, &fit.at_bound);

    let reachability = match inputs.baselines.get(metric) {
        Some(b) => Some(downstream::reachability(&fit.params, b, &budgets, label)?),
        None => {
            eprintln!("notice: no baseline for `{metric}`; reachability skipped");
            None
        }
    };
    let trace = fit.params.optimal_metric_curve(&budgets)?;
    let stem = file_stem(metric);
    let mut out = Outputs::new(session.out_dir(Some(&manifest)));
    out.add(
        format!("{stem}_downstream.json"),
        report::json(&DownstreamReport {
            metric,
            fit: &fit,
            bounds: &bounds,
            at_bound: flags(&SIGMOID_PARAM_NAMES, &fit.at_bound),
            reachability: reachability.clone(),
        }),
    );
    out.add(format!("{stem}_trace.csv"), report::pairs_csv("C", "M*", &trace));
    out.add(
        format!("{stem}_residuals.csv"),
        report::residuals_csv(&obs, &fit.test_indices, |o| {
            fit.params.metric(o.model_size, o.dataset_size).unwrap_or(f64::NAN)
        }),
    );

    let values: Vec<String> = fit.params.to_array().into_iter().map(report::sig4).collect();
    println!("{}", SIGMOID_PARAM_NAMES.join("  "));
    println!("{}", values.join("  "));
    match fit.test_mre {
        Some(t) => println!("train MRE {}  test MRE {}", report::sig4(fit.train_mre), report::sig4(t)),
        None => println!("train MRE {}", report::sig4(fit.train_mre)),
    }
    if let Some(r) = &reachability {
        println!(
            "limit {} vs baseline {} +/- {}: {}",
            report::sig4(r.m_limit),
            report::sig4(r.baseline.mean),
            report::sig4(r.baseline.std),
            if r.reachable { "reachable" } else { "unreachable" }
        );
    }
    out.write()
}

fn optimal(session: &Session, law: &LawArgs) -> Result<()> {
    let params = read_params(&law.params)?;
    let budgets = budgets_or_default(&law.budgets)?;
    let points = frontier(&params, &budgets)?;
    let mut out = Outputs::new(session.out_dir(None));
    out.add("frontier.csv", report::frontier_csv(&points));
    print!("{}", report::frontier_table(&points));
    out.write()
}

fn flatness(session: &Session, law: &LawArgs, epsilon: f64) -> Result<()> {
    let params = read_params(&law.params)?;
    let budgets = budgets_or_default(&law.budgets)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(InputError::usage(format!("--epsilon must be positive, got {epsilon}")).into());
    }
    let rows = budgets
        .iter()
        .map(|&c| params.flatness_range(c, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    for r in rows.iter().filter(|r| r.truncated) {
        warn!("budget {:e}: flat range reaches the edge of the isoFLOP and was truncated", r.compute);
    }
    let mut out = Outputs::new(session.out_dir(None));
    out.add("flatness.csv", report::flatness_csv(&rows));
    print!("{}", report::flatness_table(&rows));
    out.write()
}

#[derive(Serialize)]
struct Extrapolation {
    target_ratio: f64,
    compute: f64,
    n: f64,
    d: f64,
    loss: f64,
}

fn extrapolate(session: &Session, params: &Path, target: f64) -> Result<()> {
    let law = read_params(params)?;
    if !(target > 0.0 && target.is_finite()) {
        return Err(InputError::usage(format!("--target must be positive, got {target}")).into());
    }
    let point = law.solve_compute_for_ratio(target)?;
    let lo = (point.compute / 10.0).min(1e15).log10().floor() as i32;
    let hi = (point.compute * 10.0).max(1e22).log10().ceil() as i32;
    // Four points per decade.
    let grid: Vec<f64> = (4 * lo..=4 * hi).map(|k| 10f64.powf(k as f64 / 4.0)).collect();
    let trace = law.ratio_curve(&grid)?;

    let mut out = Outputs::new(session.out_dir(None));
    out.add(
        "extrapolation.json",
        report::json(&Extrapolation {
            target_ratio: target,
            compute: point.compute,
            n: point.n_star,
            d: point.d_star,
            loss: point.l_star,
        }),
    );
    out.add("ratio_trace.csv", report::pairs_csv("C", "r*", &trace));
    println!("target r* = {}", report::sig4(target));
    println!("C = {}", report::sig4(point.compute));
    println!("N = {}", report::sig4(point.n_star));
    println!("D = {}", report::sig4(point.d_star));
    out.write()
}

#[derive(Serialize)]
struct SaturationRow {
    compute: f64,
    saturated: bool,
}

#[derive(Serialize)]
struct IsoflopReport<'a> {
    metric: &'a str,
    direction: Direction,
    verdict: scalefit_core::BehaviorVerdict,
    saturation: Option<Vec<SaturationRow>>,
    skipped_budgets: Vec<f64>,
    unassigned_points: usize,
}

fn isoflop_cmd(
    session: &Session,
    data: &DataArgs,
    metric: &str,
    direction: Option<DirectionArg>,
    want_saturation: bool,
    tolerance: f64,
    abs_tol: f64,
) -> Result<()> {
    let (manifest, inputs, _) = session.load(data, &[metric])?;
    if manifest.budgets.is_empty() {
        return Err(InputError::usage("isoflop needs compute budgets (--budgets or manifest `budgets`)").into());
    }
    if !(abs_tol >= 0.0 && abs_tol.is_finite()) {
        return Err(InputError::usage(format!("--abs-tol must be nonnegative, got {abs_tol}")).into());
    }
    let baseline = inputs.baselines.get(metric);
    let direction = match (direction, baseline) {
        (Some(d), _) => d.into(),
        (None, Some(b)) => b.direction,
        (None, None) => Direction::LowerBetter,
    };
    if want_saturation && baseline.is_none() {
        bail!(anyhow!("--saturation needs a baseline for `{metric}`, and none was given"));
    }

    let obs = aggregate(&inputs.records, metric)?;
    let buckets = bucket_by_compute(&obs, &manifest.budgets, tolerance)?;
    if !buckets.unassigned.is_empty() {
        warn!("{} (N, D) points match no budget within {tolerance}", buckets.unassigned.len());
    }
    let (curves, skipped) = isoflop::build_curves(&buckets, metric, direction)?;
    for c in &skipped {
        warn!("budget {c:e} has no runs");
    }
    let verdict = isoflop::classify_behavior(&curves, abs_tol);
    let saturation = match (want_saturation, baseline) {
        (true, Some(b)) => Some(
            isoflop::saturation(&curves, b)
                .into_iter()
                .map(|(compute, saturated)| SaturationRow { compute, saturated })
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };

    for (c, shape) in &verdict.shapes {
        println!("C={}  {:?}", report::sig4(*c), shape);
    }
    println!("expected behavior: {}", verdict.expected_behavior);
    if let Some(rows) = &saturation {
        let n = rows.iter().filter(|r| r.saturated).count();
        println!("saturated budgets: {n}/{}", rows.len());
    }

    let stem = file_stem(metric);
    let mut out = Outputs::new(session.out_dir(Some(&manifest)));
    out.add(format!("{stem}_curves.csv"), report::curves_csv(&curves));
    out.add(format!("{stem}_isoflop.svg"), svg::isoflop_svg(&curves, baseline, &format!("{metric} isoFLOPs")));
    out.add(
        format!("{stem}_verdict.json"),
        report::json(&IsoflopReport {
            metric,
            direction,
            verdict,
            saturation,
            skipped_budgets: skipped,
            unassigned_points: buckets.unassigned.len(),
        }),
    );
    out.write()
}

fn pjsd_cmd(session: &Session, generated: &Path, real: &Path, orders: &[usize]) -> Result<()> {
    let gen = read_corpus(generated)?;
    let real_corpus = read_corpus(real)?;
    if orders.is_empty() || orders.contains(&0) {
        return Err(InputError::usage("--orders must list n-gram orders of at least 1").into());
    }
    let report = pjsd::pjsd_report(&gen, &real_corpus, orders)?;
    for (n, v) in &report.divergences {
        println!("n={n}  pJSD={}  support={}", report::sig4(*v), report.support_sizes[n]);
    }
    let mut out = Outputs::new(session.out_dir(None));
    out.add("pjsd.json", report::json(&report));
    out.write()
}
