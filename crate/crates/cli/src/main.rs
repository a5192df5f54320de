//! `gmfilter`: sample graph pairs, run matched filters, reproduce figure
//! tables and brute-force micro instances.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use gmfilter::experiment::{self, ExperimentSpec, FilterSpec, Instance, ModelSpec};
use gmfilter::graph::EdgeCounting;
use gmfilter::io;
use gmfilter::oracle::{brute_force_with, Criterion, EnumerationBudget};
use gmfilter::padding::{pad, SchemeSpec};
use gmfilter::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "gmfilter", version, about = "Graph matching matched filters")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "GMF_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a template/network pair with a hidden alignment.
    Sample(SampleArgs),
    /// Run the matched filter on edge-list files.
    Match(MatchArgs),
    /// Run a declarative experiment grid and write figure tables.
    Experiment(ExperimentArgs),
    /// Exhaustively match a micro instance.
    Bruteforce(BruteArgs),
}

/// Model fields settable from the command line.
#[derive(Args, Default)]
struct ModelFlags {
    /// homogeneous | planted | rdpg | adversarial
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "n-c")]
    n_c: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// random | max-angle
    #[arg(long)]
    selection: Option<String>,
}

impl ModelFlags {
    fn apply(&self, model: &mut Map<String, Value>) {
        let mut set = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                model.insert(k.to_string(), v);
            }
        };
        set("kind", self.kind.clone().map(Value::from));
        set("n", self.n.map(Value::from));
        set("n_c", self.n_c.map(Value::from));
        set("lambda", self.lambda.map(Value::from));
        set("rho", self.rho.map(Value::from));
        set("p", self.p.map(Value::from));
        set("q", self.q.map(Value::from));
        set("beta", self.beta.map(Value::from));
        set("eps", self.eps.map(Value::from));
        set("selection", self.selection.clone().map(Value::from));
    }
}

#[derive(Args)]
struct SampleArgs {
    /// JSON file with `model`, `seeds` and `rng_seed`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
    /// Number of seed pairs to write.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

/// Matcher settings settable from the command line.
#[derive(Args)]
struct FilterFlags {
    /// naive | centered | oracle:<file> | rank:<r>
    #[arg(long)]
    scheme: Option<String>,
    /// Second-stage scheme for re-matching.
    #[arg(long)]
    rescheme: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

impl FilterFlags {
    fn apply(&self, filter: &mut Map<String, Value>) {
        let mut set = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                filter.insert(k.to_string(), v);
            }
        };
        set("scheme", self.scheme.clone().map(Value::from));
        set("rescheme", self.rescheme.clone().map(Value::from));
        set("restarts", self.restarts.map(Value::from));
        set("rng_seed", self.rng_seed.map(Value::from));
        let mut faq = filter.get("faq").and_then(|v| v.as_object().cloned()).unwrap_or_default();
        if let Some(v) = self.max_iters {
            faq.insert("max_iters".into(), v.into());
        }
        if let Some(v) = self.tol {
            faq.insert("tol".into(), v.into());
        }
        if !faq.is_empty() {
            filter.insert("faq".into(), Value::Object(faq));
        }
    }
}

#[derive(Args)]
struct MatchArgs {
    /// JSON file with `a`, `b`, `seeds`, `truth`, `filter` and
    /// `edge_counting`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Template edge list.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Network edge list.
    #[arg(long)]
    b: Option<PathBuf>,
    /// Seed pairs `template network`, one per line.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Truth sidecar written by `sample`.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterFlags,
    /// per-direction | per-pair
    #[arg(long)]
    edge_counting: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Gaussian bandwidth on normalised rank.
    #[arg(long)]
    smoothing: Option<f64>,
    #[command(flatten)]
    filter: FilterFlags,
}

#[derive(Args)]
struct BruteArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value = "centered")]
    scheme: String,
    /// template-block | frobenius
    #[arg(long, default_value = "template-block")]
    criterion: String,
    #[arg(long, default_value_t = EnumerationBudget::default().max_injections)]
    budget: u64,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_data_error() { EXIT_DATA } else { EXIT_CONFIG },
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn read_config(path: Option<&Path>) -> Result<Map<String, Value>, Failure> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(config_error(format!("{}: expected a JSON object", path.display()))),
        Err(e) => Err(config_error(format!("{}: {e}", path.display()))),
    }
}

fn from_value<T: serde::de::DeserializeOwned>(what: &str, v: Value) -> Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| config_error(format!("{what}: {e}")))
}

fn object(map: &mut Map<String, Value>, key: &str) -> Map<String, Value> {
    match map.remove(key) {
        Some(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn path_field(map: &Map<String, Value>, key: &str, base: Option<&Path>) -> Option<PathBuf> {
    let p = PathBuf::from(map.get(key)?.as_str()?);
    Some(match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    })
}

fn sample(args: SampleArgs) -> Result<(), Failure> {
    let mut cfg = read_config(args.config.as_deref())?;
    let mut model = object(&mut cfg, "model");
    args.model.apply(&mut model);
    let model: ModelSpec = from_value("model", Value::Object(model))?;
    if matches!(model, ModelSpec::Files { .. }) {
        return Err(config_error("sample needs a generative model"));
    }
    let seeds = match args.seeds {
        Some(s) => s,
        None => from_value("seeds", cfg.remove("seeds").unwrap_or(json!(0)))?,
    };
    let rng_seed = match args.rng_seed {
        Some(s) => s,
        None => from_value("rng_seed", cfg.remove("rng_seed").unwrap_or(json!(0)))?,
    };
    let truth = experiment::cmd_sample(&model, seeds, rng_seed, &args.out)?;
    eprintln!(
        "wrote {} ({} template vertices into {})",
        args.out.display(),
        truth.n_c(),
        truth.n()
    );
    Ok(())
}

fn edge_counting(flag: Option<&str>, cfg: Option<Value>) -> Result<EdgeCounting, Failure> {
    match flag {
        Some(s) => from_value("edge_counting", Value::from(s)),
        None => cfg.map_or(Ok(EdgeCounting::default()), |v| from_value("edge_counting", v)),
    }
}

fn run_match(args: MatchArgs) -> Result<(), Failure> {
    let mut cfg = read_config(args.config.as_deref())?;
    let base = args.config.as_deref().and_then(Path::parent);
    let pick = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| path_field(&cfg, key, base));
    let a = pick(&args.a, "a").ok_or_else(|| config_error("template graph (--a) is required"))?;
    let b = pick(&args.b, "b").ok_or_else(|| config_error("network graph (--b) is required"))?;
    let seeds = pick(&args.seeds, "seeds");
    let truth = pick(&args.truth, "truth");
    let mut filter = object(&mut cfg, "filter");
    args.filter.apply(&mut filter);
    let spec: FilterSpec = from_value("filter", Value::Object(filter))?;
    let counting = edge_counting(args.edge_counting.as_deref(), cfg.remove("edge_counting"))?;

    let inst = Instance::from_files(&a, &b, seeds.as_deref(), truth.as_deref(), None)?;
    let (summary, _) = experiment::cmd_match(&inst, &spec, counting, &args.out)?;
    if let Some(best) = &summary.best {
        let correct = best.correct_matches.map(|c| format!(", {c} correct")).unwrap_or_default();
        eprintln!(
            "best restart {} objective {}{correct}; outputs in {}",
            best.restart,
            best.objective1,
            args.out.display()
        );
    }
    if !summary.failures.is_empty() {
        eprintln!("{} restarts failed", summary.failures.len());
    }
    Ok(())
}

fn run_experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let mut spec = ExperimentSpec::load(&args.config).map_err(|e| match e {
        Error::Io(_) | Error::Json(_) => config_error(format!("{}: {e}", args.config.display())),
        other => other.into(),
    })?;
    if let Some(s) = args.scale {
        spec.scale = s;
    }
    if let Some(r) = args.replicates {
        spec.replicates = r;
    }
    if let Some(h) = args.smoothing {
        spec.smoothing = Some(h);
    }
    let mut filter = match serde_json::to_value(&spec.filter) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    };
    args.filter.apply(&mut filter);
    spec.filter = from_value("filter", Value::Object(filter))?;
    let out = args
        .out
        .clone()
        .or_else(|| spec.output.clone())
        .ok_or_else(|| config_error("no output directory (--out or `output`)"))?;

    let report = experiment::run_experiment(&spec)?;
    experiment::write_experiment(&report, &spec, &out)?;
    for c in &report.cells {
        match c.mean_best_correct() {
            Some(m) => eprintln!("{}: mean rank-1 correct {m:.2}", c.cell.label),
            None => eprintln!("{}: done", c.cell.label),
        }
    }
    Ok(())
}

fn bruteforce(args: BruteArgs) -> Result<(), Failure> {
    let scheme: SchemeSpec = args.scheme.parse()?;
    let criterion: Criterion = from_value("criterion", Value::from(args.criterion.as_str()))?;
    let inst = Instance::from_files(&args.a, &args.b, None, None, None)?;
    let resolved = inst.resolve_scheme(&scheme)?;
    let (at, bt) = pad(&inst.a, &inst.b, &resolved)?;
    let budget = EnumerationBudget {
        max_injections: args.budget,
    };
    let bf = brute_force_with(&at, &bt, inst.a.n(), &budget, criterion)?;
    let minimizers: Vec<&[usize]> = bf.minimizers.iter().map(|m| m.as_slice()).collect();
    let value = json!({
        "scheme": scheme.to_string(),
        "criterion": criterion,
        "objective": bf.objective,
        "count": minimizers.len(),
        "minimizers": minimizers,
    });
    match &args.out {
        Some(path) => io::write_json(&value, path)?,
        None => println!("{}", serde_json::to_string_pretty(&value).unwrap_or_default()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let outcome = match cli.command {
        Command::Sample(a) => sample(a),
        Command::Match(a) => run_match(a),
        Command::Experiment(a) => run_experiment(a),
        Command::Bruteforce(a) => bruteforce(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
