use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use thurstone::bounds::{
    cramer_rao_lower_bound, model_constants, mse_upper_bound, BoundInputs, Theorem,
};
use thurstone::classifier::{classify_sample_complexity_with, point_score_classify};
use thurstone::comparisons::{Dataset, Format, Weight, WeightedAdjacency};
use thurstone::error::Error;
use thurstone::estimators::{estimate, EstimatorConfig, Method};
use thurstone::harness::{
    run_fiedler_curve, run_mse_vs_k, top_n_restriction, ExperimentSpec, ThetaStar,
};
use thurstone::noise::NoiseModel;
use thurstone::sampler::{
    sample_dataset, sample_two_class_theta, substream, ComparisonDesign, ParamVector,
};

#[derive(Parser, Debug)]
#[command(
    name = "thurstone",
    version,
    about = "Estimation for Thurstone choice models"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Tsv)]
    format: OutFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Tsv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset (CSV rows `winner,member,...`).
    Simulate(SimulateArgs),
    /// Fit strengths to a dataset.
    Estimate(EstimateArgs),
    /// Fiedler value of a dataset's comparison matrix, or its prefix curve.
    Fiedler(FiedlerArgs),
    /// Point-score classification, or the observations it needs.
    Classify(ClassifyArgs),
    /// Evaluate an MSE bound.
    Bounds(BoundsArgs),
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    /// Mean squared error against comparison-set size.
    MseVsK(MseVsKArgs),
}

#[derive(Subcommand, Debug)]
enum DatasetCommand {
    /// Keep the most active items and the observations among them.
    TopN(TopNArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Set size for uniformly drawn sets.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Cycle through all pairs instead of drawing sets at random.
    #[arg(long)]
    round_robin: bool,
    #[arg(long, default_value = "gumbel:beta=1")]
    model: NoiseModel,
    /// zero, random:<radius>, two-class:<b> or file:<path>.
    #[arg(long, default_value = "zero")]
    theta: String,
    #[arg(long, default_value_t = 5.0)]
    b: f64,
    /// Also write the true strengths as JSON.
    #[arg(long)]
    theta_output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Dataset as CSV or JSON lines (chosen by extension).
    #[arg(long)]
    input: PathBuf,
}

impl InputArgs {
    fn load(&self) -> thurstone::error::Result<Dataset> {
        Dataset::read_path(&self.input, Format::from_path(&self.input))
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "gumbel:beta=1")]
    model: NoiseModel,
    #[arg(long, default_value = "mle")]
    method: Method,
    #[arg(long, default_value_t = 5.0)]
    b: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Args, Debug)]
struct FiedlerArgs {
    #[command(flatten)]
    input: InputArgs,
    /// unit, inverse-square, const=<a> or optimal:<model>.
    #[arg(long, default_value = "unit")]
    weight: Weight,
    /// Emit the prefix curve with this spacing.
    #[arg(long)]
    step: Option<usize>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// Classify the items of this dataset.
    #[arg(
        long,
        required_unless_present = "complexity",
        conflicts_with = "complexity"
    )]
    input: Option<PathBuf>,
    /// Report the observations needed instead of classifying.
    #[arg(long)]
    complexity: bool,
    #[arg(long, default_value = "gumbel:beta=1")]
    model: NoiseModel,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    b: f64,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = thurstone::classifier::HESSIAN_SAMPLES)]
    samples: usize,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// pair, luce-full, general, rank-all or rank-one.
    #[arg(long, default_value = "luce-full")]
    theorem: Theorem,
    #[arg(long, default_value = "gumbel:beta=1")]
    model: NoiseModel,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long)]
    fiedler: Option<f64>,
    /// Take n, m, k and the Fiedler value from a dataset.
    #[arg(long)]
    from_data: Option<PathBuf>,
    /// Also report the Cramér-Rao lower bound (needs --from-data).
    #[arg(long)]
    cramer_rao: bool,
}

#[derive(Args, Debug)]
struct MseVsKArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Comma-separated set sizes.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10")]
    k_values: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value = "gumbel:unit-variance")]
    model: NoiseModel,
    /// zero, random:<radius>, two-class:<b> or file:<path>.
    #[arg(long, default_value = "zero")]
    theta: String,
    #[arg(long, default_value = "mle")]
    method: Method,
    #[arg(long, default_value_t = 5.0)]
    b: f64,
    /// Also write the JSON manifest (spec and per-repetition MSEs) here.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TopNArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    top_n: usize,
}

enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn parse_theta(s: &str, n: usize, b: f64) -> CliResult<ThetaStar> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    let number = |a: &str| {
        a.parse::<f64>()
            .map_err(|_| Failure::Validation(format!("bad number '{a}' in --theta {s}")))
    };
    match kind {
        "zero" => Ok(ThetaStar::Zero),
        "random" => Ok(ThetaStar::Random {
            radius: number(arg)?,
        }),
        "two-class" => Ok(ThetaStar::TwoClass { b: number(arg)? }),
        "file" => {
            let text = std::fs::read_to_string(arg)?;
            let theta: Vec<f64> = serde_json::from_str(&text)?;
            if theta.len() != n {
                return Err(Failure::Validation(format!(
                    "{arg} holds {} strengths, expected {n}",
                    theta.len()
                )));
            }
            ParamVector::new(theta.clone(), b)?;
            Ok(ThetaStar::Fixed { theta })
        }
        _ => Err(Failure::Validation(format!(
            "unknown --theta '{s}'; expected zero, random:<r>, two-class:<b> or file:<path>"
        ))),
    }
}

fn emit(output: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<()> {
    let design = if a.round_robin {
        let rounds = a.m.div_ceil(a.n * (a.n - 1) / 2).max(1);
        ComparisonDesign::round_robin(a.n, rounds)?
    } else {
        ComparisonDesign::uniform(a.n, a.k)?
    };
    let theta = match parse_theta(&a.theta, a.n, a.b)? {
        ThetaStar::Zero => ParamVector::zeros(a.n, a.b)?,
        ThetaStar::Random { radius } => {
            ParamVector::random(a.n, radius, a.b, &mut substream(cli.seed, u64::MAX))?
        }
        ThetaStar::TwoClass { b } => ParamVector::new(
            sample_two_class_theta(a.n, b, cli.seed)?.theta.into_vec(),
            a.b,
        )?,
        ThetaStar::Fixed { theta } => ParamVector::new(theta, a.b)?,
    };
    let ds = sample_dataset(&a.model, &theta, &design, a.m, cli.seed)?;
    if let Some(p) = &a.theta_output {
        std::fs::write(p, to_json(&theta.as_slice())?)?;
    }
    let text = match cli.format {
        OutFormat::Json => {
            let mut s = String::new();
            for obs in ds.observations() {
                let labels = ds.item_labels();
                let row = serde_json::json!({
                    "set": obs.set().iter().map(|&i| &labels[i]).collect::<Vec<_>>(),
                    "winner": labels[obs.winner()],
                });
                s.push_str(&row.to_string());
                s.push('\n');
            }
            s
        }
        OutFormat::Tsv => {
            let mut buf = Vec::new();
            ds.write_csv(&mut buf)?;
            String::from_utf8(buf).map_err(|e| Failure::Validation(e.to_string()))?
        }
    };
    emit(&cli.output, &text)
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    labels: &'a [String],
    report: thurstone::estimators::EstimateReport,
}

fn run_estimate(cli: &Cli, a: &EstimateArgs) -> CliResult<()> {
    let ds = a.input.load()?;
    let mut cfg = EstimatorConfig::new(a.method, a.model, a.b);
    cfg.tol_grad = a.tol;
    cfg.max_iter = a.max_iter;
    cfg.seed = cli.seed;
    let report = estimate(&ds, &cfg)?;
    if !report.converged {
        log::warn!(
            "optimizer stopped after {} iterations without converging",
            report.iterations
        );
    }
    let text = match cli.format {
        OutFormat::Json => to_json(&EstimateOutput {
            labels: ds.item_labels(),
            report,
        })?,
        OutFormat::Tsv => {
            let mut s = String::from("item\ttheta\n");
            for (l, t) in ds.item_labels().iter().zip(report.theta_hat.as_slice()) {
                s.push_str(&format!("{l}\t{t:.12}\n"));
            }
            s
        }
    };
    emit(&cli.output, &text)
}

fn run_fiedler(cli: &Cli, a: &FiedlerArgs) -> CliResult<()> {
    let ds = a.input.load()?;
    if let Some(step) = a.step {
        return emit(&cli.output, &run_fiedler_curve(&ds, &a.weight, step)?);
    }
    let spectrum = WeightedAdjacency::from_dataset(&ds, &a.weight)?.spectrum()?;
    let text = match cli.format {
        OutFormat::Json => to_json(&serde_json::json!({
            "fiedler": spectrum.fiedler,
            "eigenvalues": spectrum.eigenvalues,
            "components": ds.components().len(),
        }))?,
        OutFormat::Tsv => format!("prefix_m\tfiedler\n{}\t{:.12}\n", ds.m(), spectrum.fiedler),
    };
    emit(&cli.output, &text)
}

fn run_classify(cli: &Cli, a: &ClassifyArgs) -> CliResult<()> {
    let text = if let Some(path) = &a.input {
        let ds = Dataset::read_path(path, Format::from_path(path))?;
        let r = point_score_classify(&ds)?;
        match cli.format {
            OutFormat::Json => to_json(&r)?,
            OutFormat::Tsv => {
                let mut s = String::from("item\tscore\tclass\n");
                for (i, l) in ds.item_labels().iter().enumerate() {
                    let class = if r.high_class.contains(&i) {
                        "high"
                    } else {
                        "low"
                    };
                    s.push_str(&format!("{l}\t{}\t{class}\n", r.scores[i]));
                }
                s
            }
        }
    } else {
        let c = classify_sample_complexity_with(&a.model, a.k, a.b, a.n, a.delta, a.samples)?;
        match cli.format {
            OutFormat::Json => to_json(&c)?,
            OutFormat::Tsv => format!(
                "sufficient_m\tnecessary_m\tgamma\tdpk0\thessian_condition\n{}\t{}\t{}\t{}\t{}\n",
                c.sufficient_m, c.necessary_m, c.gamma, c.dpk0, c.conditions.hessian_condition
            ),
        }
    };
    emit(&cli.output, &text)
}

fn run_bounds(cli: &Cli, a: &BoundsArgs) -> CliResult<()> {
    let weight = match a.theorem {
        Theorem::Pair => Weight::Constant(0.25),
        Theorem::General => Weight::Optimal(a.model),
        _ => Weight::Unit,
    };
    let data = a
        .from_data
        .as_deref()
        .map(|p: &Path| Dataset::read_path(p, Format::from_path(p)))
        .transpose()?;
    let (n, m, k, set_sizes, fiedler) = match &data {
        Some(ds) => {
            let sizes: Vec<usize> = ds.cardinality_mix().keys().copied().collect();
            let k = sizes.iter().copied().max().unwrap_or(2);
            let f = WeightedAdjacency::from_dataset(ds, &weight)?.fiedler()?;
            (ds.n_items(), ds.m(), k, sizes, f)
        }
        None => {
            let missing = |name: &str| {
                Failure::Validation(format!("--{name} is required without --from-data"))
            };
            let k = a.k.unwrap_or(2);
            (
                a.n.ok_or_else(|| missing("n"))?,
                a.m.ok_or_else(|| missing("m"))?,
                k,
                vec![k],
                a.fiedler.ok_or_else(|| missing("fiedler"))?,
            )
        }
    };
    let inputs = BoundInputs {
        n,
        m,
        k: a.k.unwrap_or(k),
        b: a.b,
        model: a.model,
        fiedler: a.fiedler.unwrap_or(fiedler),
        set_sizes,
    };
    let report = mse_upper_bound(a.theorem, &inputs, None)?;
    let lower = if a.cramer_rao {
        let ds = data
            .as_ref()
            .ok_or_else(|| Failure::Validation("--cramer-rao needs --from-data".into()))?;
        let constants = model_constants(&a.model, a.b, &inputs.set_sizes)?;
        let wstar = WeightedAdjacency::from_dataset(ds, &Weight::Optimal(a.model))?;
        Some(cramer_rao_lower_bound(&wstar, m, &constants)?)
    } else {
        None
    };
    let text = match cli.format {
        OutFormat::Json => match lower {
            Some(l) => to_json(&serde_json::json!({ "upper": report, "cramer_rao": l }))?,
            None => to_json(&report)?,
        },
        OutFormat::Tsv => {
            let mut s = format!(
                "theorem\tbound_value\tpreconditions_met\n{}\t{:e}\t{}\n",
                report.theorem, report.bound_value, report.preconditions_met
            );
            if let Some(l) = lower {
                s.push_str(&format!("cramer-rao\t{:e}\ttrue\n", l.bound_value));
            }
            s
        }
    };
    emit(&cli.output, &text)
}

fn run_experiment(cli: &Cli, a: &MseVsKArgs) -> CliResult<()> {
    let mut spec = ExperimentSpec::new(a.n, a.m, a.k_values.clone(), a.reps, a.model);
    spec.theta_star = parse_theta(&a.theta, a.n, a.b)?;
    spec.method = a.method;
    spec.b = a.b;
    spec.seed = cli.seed;
    let result = run_mse_vs_k(&spec)?;
    if let Some(p) = &a.manifest {
        std::fs::write(p, to_json(&result)?)?;
    }
    let text = match cli.format {
        OutFormat::Json => to_json(&result)?,
        OutFormat::Tsv => result.to_tsv(),
    };
    emit(&cli.output, &text)
}

fn run_top_n(cli: &Cli, a: &TopNArgs) -> CliResult<()> {
    let ds = top_n_restriction(&a.input.load()?, a.top_n)?;
    match &cli.output {
        Some(p) => ds.write_csv(File::create(p)?)?,
        None => ds.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Validation(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Estimate(a) => run_estimate(cli, a),
        Command::Fiedler(a) => run_fiedler(cli, a),
        Command::Classify(a) => run_classify(cli, a),
        Command::Bounds(a) => run_bounds(cli, a),
        Command::Experiment(ExperimentCommand::MseVsK(a)) => run_experiment(cli, a),
        Command::Dataset(DatasetCommand::TopN(a)) => run_top_n(cli, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
