use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mtd_cli::bench::{run_experiment, Estimator, ExperimentConfig};
use mtd_cli::discretize::discretize;
use mtd_cli::ingest::{ingest_numeric, ingest_series, HeaderMode, IngestOptions, NaPolicy};
use mtd_cli::predict::{evaluate_split, PredictMode};
use mtd_cli::{format, parse_lags, UsageError};
use mtd_core::select::cut_select_counts;
use mtd_core::{
    bic_select, cut_select, em_fit, empirical_oscillations, forward_sample, fs_select, fsc_select, Alphabet,
    BicOptions, CountsTable, CutParams, EmOptions, FreqTable, LagSet, ModelBuilder, MtdModel, MtdParams,
    PerfectSampler, RandomSource, Sample, SelectionResult,
};

#[derive(Parser)]
#[command(
    name = "mtd",
    version,
    about = "Mixture transition distribution chains: simulation, lag selection and fitting"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// CSV file with one observation per row.
    #[arg(long)]
    input: PathBuf,
    /// Column name or 1-based index.
    #[arg(long)]
    column: Option<String>,
    /// The file lists the newest observation first.
    #[arg(long)]
    reverse: bool,
    #[arg(long, value_enum, default_value_t = NaPolicy::Error)]
    na_policy: NaPolicy,
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    header: HeaderMode,
}

impl InputArgs {
    fn options(&self) -> IngestOptions {
        IngestOptions {
            column: self.column.clone(),
            reverse: self.reverse,
            na_policy: self.na_policy,
            header: self.header,
        }
    }

    fn sample(&self) -> Result<Sample> {
        ingest_series(&self.input, &self.options())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fs,
    Cut,
    Bic,
    Fsc,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Largest lag considered.
    #[arg(long)]
    d: Option<usize>,
    /// Number of lags FS includes.
    #[arg(long)]
    l: Option<usize>,
    /// Candidate lags for CUT and BIC, e.g. 1,15,30.
    #[arg(long = "S", value_parser = lag_list)]
    s: Option<Lags>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.5)]
    xi: f64,
    #[arg(long, default_value_t = 1)]
    minl: usize,
    /// Defaults to the number of candidates.
    #[arg(long)]
    maxl: Option<usize>,
    /// BIC penalty for a single matrix shared by all lags.
    #[arg(long)]
    single_matrix: bool,
    /// BIC penalty for a model without independent part.
    #[arg(long)]
    no_indep: bool,
    /// Report the best BIC set of every size.
    #[arg(long)]
    byl: bool,
    /// Print the full result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from a model.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Simulate forward from `--past` instead of perfect sampling.
        #[arg(long, requires = "past")]
        forward: bool,
        /// Initial past labels, oldest first, comma separated.
        #[arg(long)]
        past: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate the relevant lags of a sample.
    Select {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        args: SelectArgs,
    },
    /// Empirical transition probabilities over a lag set.
    Probs {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long = "S", value_parser = lag_list)]
        s: Lags,
        /// Dense table with one row per context.
        #[arg(long)]
        matrix_form: bool,
    },
    /// Oscillations of a model, or estimates from a sample.
    Oscillation {
        #[arg(long, conflicts_with_all = ["input", "s"], required_unless_present = "input")]
        model: Option<PathBuf>,
        #[arg(long, requires = "s")]
        input: Option<PathBuf>,
        #[arg(long = "S", value_parser = lag_list)]
        s: Option<Lags>,
        #[arg(long)]
        reverse: bool,
        #[arg(long)]
        column: Option<String>,
    },
    /// Fit MTD parameters by EM.
    FitEm {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long = "S", value_parser = lag_list)]
        s: Lags,
        /// Initial parameters: fitting layout (`lambdas` with λ₀ first) or a model file.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Seed for a random start when `--init` is absent.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stop when an iteration gains less log-likelihood; `null` disables.
        #[arg(long = "M", default_value = "0.01", value_parser = parse_threshold)]
        m: Threshold,
        #[arg(long, default_value_t = 100)]
        niter: usize,
        #[arg(long)]
        oscillations: bool,
        /// Lower bound for initial probabilities.
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Equal-range binning of a numeric series.
    Discretize {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo comparison of FS, Naive and Oracle estimators.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write a model JSON, drawing omitted parameters at random.
    BuildModel {
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        alphabet: Vec<String>,
        #[arg(long, value_parser = lag_list)]
        lags: Lags,
        #[arg(long)]
        lambda0: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', conflicts_with = "no_indep")]
        p0: Option<Vec<f64>>,
        #[arg(long)]
        single_matrix: bool,
        #[arg(long)]
        no_indep: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Context counts of every window of length d+1.
    Counts {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        d: usize,
    },
    /// Train/test evaluation: discretize, select, estimate, predict, score.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        /// Bin a numeric series into k symbols first.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        args: SelectArgs,
        /// Fraction of the series used for selection and estimation.
        #[arg(long, default_value_t = 0.8)]
        train: f64,
        /// Positive symbol label (default: the last symbol).
        #[arg(long)]
        positive: Option<String>,
        #[arg(long, value_enum, default_value_t = PredictMode::Sample)]
        mode: PredictMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Comma-separated lag list such as `1,15,30`.
#[derive(Clone)]
struct Lags(Vec<usize>);

fn lag_list(s: &str) -> Result<Lags, String> {
    parse_lags(s).map(Lags)
}

#[derive(Clone, Copy)]
struct Threshold(Option<f64>);

fn parse_threshold(s: &str) -> Result<Threshold, String> {
    match s {
        "null" | "none" | "NULL" => Ok(Threshold(None)),
        _ => s.parse::<f64>().map(|v| Threshold(Some(v))).map_err(|_| format!("expected a number or null, got {s:?}")),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_model(path: &Path) -> Result<MtdModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    MtdModel::from_json(&text).with_context(|| format!("invalid model in {}", path.display()))
}

fn lag_set(lags: Lags) -> Result<LagSet> {
    LagSet::new(lags.0).map_err(|e| usage(e.to_string()))
}

fn run_select(sample: &Sample, a: &SelectArgs) -> Result<SelectionResult> {
    let candidates = a.s.clone().map(lag_set).transpose()?;
    let d = match (a.d, &candidates) {
        (Some(d), _) => d,
        (None, Some(s)) if !matches!(a.method, MethodArg::Fs | MethodArg::Fsc) => {
            s.max().ok_or_else(|| usage("--S is empty"))?
        }
        _ => return Err(usage("--d is required")),
    };
    let need_l = || a.l.ok_or_else(|| usage("--l is required for fs and fsc"));
    let params = CutParams::new(a.alpha, a.mu, a.xi)?;
    Ok(match a.method {
        MethodArg::Fs => fs_select(sample, d, need_l()?)?,
        MethodArg::Fsc => fsc_select(sample, d, need_l()?, &params)?,
        MethodArg::Cut => match &candidates {
            Some(s) => cut_select(sample, d, s, &params)?,
            None => cut_select_counts(&CountsTable::new(sample, d)?, &LagSet::range(d), &params)?,
        },
        MethodArg::Bic => {
            let universe = candidates.as_ref().map_or(d, LagSet::len);
            let opts = BicOptions {
                xi: a.xi,
                single_matrix: a.single_matrix,
                indep_part: !a.no_indep,
                byl: a.byl,
                ..BicOptions::sizes(a.minl, a.maxl.unwrap_or(universe))
            };
            bic_select(sample, d, candidates.as_ref(), &opts)?
        }
    })
}

fn print_selection(result: &SelectionResult, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(result)?);
    } else {
        print!("{}", format::selection(result));
    }
    Ok(())
}

fn freq_table(sample: &Sample, lags: &LagSet) -> Result<FreqTable> {
    let d = lags.max().ok_or_else(|| usage("--S is empty"))?;
    Ok(FreqTable::new(&CountsTable::new(sample, d)?, lags)?)
}

fn init_params(init: Option<&Path>, sample: &Sample, lags: &LagSet, seed: u64) -> Result<MtdParams> {
    let Some(path) = init else {
        let model =
            ModelBuilder::new(sample.alphabet().clone(), lags.clone()).build(&mut RandomSource::new(seed, 0))?;
        return Ok(MtdParams::from_model(&model));
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("lambda0").is_some() {
        Ok(MtdParams::from_model(&MtdModel::from_json(&text)?))
    } else {
        Ok(serde_json::from_value(value)?)
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate { model, n, seed, stream, forward, past, output: out } => {
            let model = read_model(&model)?;
            let mut rng = RandomSource::new(seed, stream);
            let sample = if forward {
                let past: Vec<usize> = past
                    .unwrap_or_default()
                    .split(',')
                    .map(|l| model.alphabet().index_of(l.trim()))
                    .collect::<std::result::Result<_, _>>()?;
                forward_sample(&model, n, &past, &mut rng)?
            } else {
                PerfectSampler::default().sample(&model, n, &mut rng)?
            };
            let mut w = output(out.as_deref())?;
            sample.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Select { input, args } => {
            let result = run_select(&input.sample()?, &args)?;
            print_selection(&result, args.json)?;
        }
        Command::Probs { input, s, matrix_form } => {
            let sample = input.sample()?;
            let freq = freq_table(&sample, &lag_set(s)?)?;
            let alphabet = sample.alphabet();
            if matrix_form {
                let rows: Vec<(String, Vec<f64>)> = freq
                    .dense_rows(mtd_core::model::DEFAULT_ROW_BUDGET)?
                    .into_iter()
                    .map(|(code, row)| (alphabet.render(&freq.codec().decode(code)), row))
                    .collect();
                print!("{}", format::matrix(alphabet, &rows));
            } else {
                let mut w = output(None)?;
                freq.write_csv(alphabet, &mut w)?;
                w.flush()?;
            }
        }
        Command::Oscillation { model, input, s, reverse, column } => {
            let osc = match (model, input) {
                (Some(m), _) => read_model(&m)?.oscillations(),
                (None, Some(path)) => {
                    let opts = IngestOptions { column, reverse, ..Default::default() };
                    let lags = lag_set(s.unwrap_or(Lags(Vec::new())))?;
                    empirical_oscillations(&ingest_series(&path, &opts)?, &lags)?
                }
                (None, None) => return Err(usage("give --model or --input with --S")),
            };
            print!("{}", format::oscillations(&osc));
        }
        Command::FitEm { input, s, init, seed, m, niter, oscillations, floor } => {
            let sample = input.sample()?;
            let lags = lag_set(s)?;
            if lags.is_empty() {
                return Err(usage("--S is empty"));
            }
            let init = init_params(init.as_deref(), &sample, &lags, seed)?;
            let opts = EmOptions { threshold: m.0, max_iter: niter, oscillations, floor };
            let fit = em_fit(&sample, &lags, &init, &opts)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
        }
        Command::Discretize { input, k, output: out } => {
            let (sample, bins) = discretize(&ingest_numeric(&input.input, &input.options())?, k)?;
            for (label, interval) in bins.alphabet().labels().iter().zip(bins.intervals()) {
                eprintln!("{label}: {interval}");
            }
            let mut w = output(out.as_deref())?;
            sample.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Bench { config, csv, json, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if workers.is_some() {
                cfg.workers = workers;
            }
            let report = run_experiment(&cfg)?;
            if let Some(p) = &csv {
                report.write_csv(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)?;
            }
            if let Some(p) = &json {
                std::fs::write(p, report.to_json()? + "\n").with_context(|| format!("cannot write {}", p.display()))?;
            }
            if csv.is_none() && json.is_none() {
                let header =
                    ["estimator", "m", "mean", "mean_std", "q1", "median", "q3", "se", "unseen"].map(String::from);
                let rows: Vec<Vec<String>> = report
                    .cells
                    .iter()
                    .map(|c| {
                        vec![
                            c.estimator.to_string(),
                            c.m.to_string(),
                            format::sig7(c.mean),
                            format::sig7(c.mean_std),
                            format::sig7(c.q1),
                            format::sig7(c.median),
                            format::sig7(c.q3),
                            format::sig7(c.se),
                            c.unseen.to_string(),
                        ]
                    })
                    .collect();
                print!("{}", format::table(&header, &rows));
                for c in report.cells.iter().filter(|c| c.estimator == Estimator::Fs) {
                    if let Some(a) = c.oracle_agreement {
                        println!("m={}: FS agreed with Oracle in {a}/{} replications", c.m, cfg.replications);
                    }
                }
            }
        }
        Command::BuildModel { alphabet, lags, lambda0, lambdas, p0, single_matrix, no_indep, seed } => {
            let mut b = ModelBuilder::new(Alphabet::new(alphabet)?, lag_set(lags)?)
                .single_matrix(single_matrix)
                .indep_part(!no_indep);
            if let Some(w) = lambda0 {
                b = b.lambda0(w);
            }
            if let Some(w) = lambdas {
                b = b.lambdas(w);
            }
            if let Some(p) = p0 {
                b = b.p0(p);
            }
            println!("{}", b.build(&mut RandomSource::new(seed, 0))?.to_json()?);
        }
        Command::Counts { input, d } => {
            let sample = input.sample()?;
            let mut w = output(None)?;
            CountsTable::new(&sample, d)?.write_csv(sample.alphabet(), &mut w)?;
            w.flush()?;
        }
        Command::Evaluate { input, k, args, train, positive, mode, seed } => {
            let sample = match k {
                Some(k) => discretize(&ingest_numeric(&input.input, &input.options())?, k)?.0,
                None => input.sample()?,
            };
            if !(train > 0.0 && train < 1.0) {
                return Err(usage("--train must lie in (0,1)"));
            }
            let train_len = (sample.len() as f64 * train).floor() as usize;
            let selection = run_select(&sample.prefix(train_len)?, &args)?;
            let lags = selection.lag_set();
            let alphabet = sample.alphabet();
            let positive = positive.unwrap_or_else(|| alphabet.label(alphabet.len() - 1).to_string());
            let metrics = evaluate_split(&sample, train_len, &lags, &positive, mode, &mut RandomSource::new(seed, 0))?;
            if args.json {
                let doc =
                    serde_json::json!({ "selected": selection.selected, "positive": positive, "metrics": metrics });
                println!("{}", serde_json::to_string_pretty(&doc)?);
            } else {
                let lags: Vec<String> = selection.selected.iter().map(usize::to_string).collect();
                println!("selected lags: {}", lags.join(" "));
                println!("TP={} TN={} FP={} FN={}", metrics.tp, metrics.tn, metrics.fp, metrics.fn_);
                let rows = [
                    ("accuracy", metrics.accuracy),
                    ("precision", metrics.precision),
                    ("sensitivity", metrics.sensitivity),
                    ("specificity", metrics.specificity),
                    ("f1", metrics.f1),
                ]
                .map(|(n, v)| vec![n.to_string(), format::sig7(v)]);
                print!("{}", format::table(&["metric".into(), "value".into()], &rows));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
