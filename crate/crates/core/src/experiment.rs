//! Declarative experiments: sampling, matching and figure-data tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faq::FaqConfig;
use crate::filter::{pair_frequencies, restart_rng, run_filter, FilterConfig, MatchResult};
use crate::graph::{correct_matches, edge_errors, EdgeCounting, Graph, Injection, SeededPair};
use crate::io;
use crate::models::{
    adversarial_naive_lambda, homogeneous_params, planted_partition_params, sample_corr_er, sample_rdpg_pair,
    shuffle_network, CoreSelection, CorrErParams, RdpgParams,
};
use crate::padding::{Scheme, SchemeSpec};

/// Version of the CSV and JSON layouts written here.
pub const SCHEMA_VERSION: u32 = 1;

/// Oracle scheme path that stands for the generating model's own
/// edge-probability matrix.
pub const MODEL_LAMBDA: &str = "model";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Homogeneous {
        n: usize,
        n_c: usize,
        lambda: f64,
        rho: f64,
    },
    Planted {
        n: usize,
        n_c: usize,
        p: f64,
        q: f64,
        rho: f64,
    },
    Rdpg {
        n: usize,
        n_c: usize,
        rho: f64,
        #[serde(default)]
        selection: CoreSelection,
    },
    Adversarial {
        n: usize,
        n_c: usize,
        beta: f64,
        rho: f64,
        eps: f64,
    },
    Files {
        a: PathBuf,
        b: PathBuf,
        #[serde(default)]
        seeds: Option<PathBuf>,
        #[serde(default)]
        truth: Option<PathBuf>,
    },
}

fn scaled(x: usize, scale: f64) -> usize {
    ((x as f64 * scale).round() as usize).max(1)
}

impl ModelSpec {
    fn scale(&mut self, factor: f64) {
        match self {
            ModelSpec::Homogeneous { n, n_c, .. }
            | ModelSpec::Planted { n, n_c, .. }
            | ModelSpec::Rdpg { n, n_c, .. }
            | ModelSpec::Adversarial { n, n_c, .. } => {
                *n = scaled(*n, factor);
                *n_c = scaled(*n_c, factor);
            }
            ModelSpec::Files { .. } => {}
        }
    }

    fn set_rho(&mut self, value: f64) -> Result<()> {
        match self {
            ModelSpec::Homogeneous { rho, .. }
            | ModelSpec::Planted { rho, .. }
            | ModelSpec::Rdpg { rho, .. }
            | ModelSpec::Adversarial { rho, .. } => {
                *rho = value;
                Ok(())
            }
            ModelSpec::Files { .. } => Err(Error::InvalidParameter("file models have no correlation to sweep".into())),
        }
    }

    fn set_q(&mut self, value: f64) -> Result<()> {
        match self {
            ModelSpec::Planted { q, .. } => {
                *q = value;
                Ok(())
            }
            _ => Err(Error::InvalidParameter("only planted models have a core density to sweep".into())),
        }
    }

    fn set_selection(&mut self, value: CoreSelection) -> Result<()> {
        match self {
            ModelSpec::Rdpg { selection, .. } => {
                *selection = value;
                Ok(())
            }
            _ => Err(Error::InvalidParameter("only rdpg models have a core selection to sweep".into())),
        }
    }

    /// Edge-probability and correlation parameters, for models that have
    /// them in closed form.
    pub fn corr_er_params(&self) -> Result<Option<CorrErParams>> {
        Ok(match *self {
            ModelSpec::Homogeneous { n, n_c, lambda, rho } => Some(homogeneous_params(n, n_c, lambda, rho)?),
            ModelSpec::Planted { n, n_c, p, q, rho } => Some(planted_partition_params(n, n_c, p, q, rho)?),
            ModelSpec::Adversarial {
                n,
                n_c,
                beta,
                rho,
                eps,
            } => Some(adversarial_naive_lambda(n, n_c, beta, rho, eps)?),
            ModelSpec::Rdpg { .. } | ModelSpec::Files { .. } => None,
        })
    }

    /// A template/network pair aligned by the identity, with the model's
    /// edge probabilities.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<(Graph, Graph, Array2<f64>)> {
        if let ModelSpec::Rdpg { n, n_c, rho, selection } = *self {
            let s = sample_rdpg_pair(&RdpgParams { n, n_c, rho, selection }, rng)?;
            return Ok((s.a, s.b, s.params.lambda));
        }
        let params = self
            .corr_er_params()?
            .ok_or_else(|| Error::InvalidParameter("file models cannot be sampled".into()))?;
        let (a, b) = sample_corr_er(&params, rng)?;
        Ok((a, b, params.lambda))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub restarts: usize,
    pub seeds: usize,
    pub scheme: SchemeSpec,
    pub rescheme: Option<SchemeSpec>,
    pub rng_seed: u64,
    pub faq: FaqConfig,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            restarts: 50,
            seeds: 0,
            scheme: SchemeSpec::Centered,
            rescheme: None,
            rng_seed: 0,
            faq: FaqConfig::default(),
        }
    }
}

/// Parameter values to cross; empty lists leave the base value alone.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    pub selection: Vec<CoreSelection>,
    pub seeds: Vec<usize>,
    pub scheme: Vec<SchemeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: ModelSpec,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Multiplies `n`, `n_c`, restarts and replicates.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub sweep: SweepSpec,
    /// Gaussian bandwidth on normalised rank for the accuracy curve.
    #[serde(default)]
    pub smoothing: Option<f64>,
    #[serde(default)]
    pub edge_counting: EdgeCounting,
}

fn default_replicates() -> usize {
    20
}

fn default_scale() -> f64 {
    1.0
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut spec = Self::from_json(&fs::read_to_string(path)?)?;
        if let ModelSpec::Files { a, b, seeds, truth } = &mut spec.model {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [Some(a), Some(b), seeds.as_mut(), truth.as_mut()].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be at least 1".into()));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {}", self.scale)));
        }
        if let Some(h) = self.smoothing {
            if !(h > 0.0) {
                return Err(Error::InvalidParameter(format!("smoothing bandwidth must be positive, got {h}")));
            }
        }
        if let ModelSpec::Files { a, b, seeds, truth } = &self.model {
            for p in [Some(a), Some(b), seeds.as_ref(), truth.as_ref()].into_iter().flatten() {
                if !p.exists() {
                    return Err(Error::InvalidParameter(format!("{} does not exist", p.display())));
                }
            }
        }
        self.filter.faq.validate()
    }

    /// The grid of settings to run, after scaling.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let mut base_model = self.model.clone();
        base_model.scale(self.scale);
        let mut base_filter = self.filter.clone();
        base_filter.restarts = scaled(base_filter.restarts, self.scale);

        fn axis<T: Clone>(values: &[T]) -> Vec<Option<T>> {
            if values.is_empty() {
                vec![None]
            } else {
                values.iter().cloned().map(Some).collect()
            }
        }
        let mut cells = Vec::new();
        for rho in axis(&self.sweep.rho) {
            for q in axis(&self.sweep.q) {
                for selection in axis(&self.sweep.selection) {
                    for seeds in axis(&self.sweep.seeds) {
                        for scheme in axis(&self.sweep.scheme) {
                            let mut model = base_model.clone();
                            let mut filter = base_filter.clone();
                            let mut label = Vec::new();
                            if let Some(v) = rho {
                                model.set_rho(v)?;
                                label.push(format!("rho={v}"));
                            }
                            if let Some(v) = q {
                                model.set_q(v)?;
                                label.push(format!("q={v}"));
                            }
                            if let Some(v) = selection {
                                model.set_selection(v)?;
                                label.push(format!("selection={}", serde_json::to_value(v)?.as_str().unwrap_or("")));
                            }
                            if let Some(v) = seeds {
                                filter.seeds = v;
                                label.push(format!("s={v}"));
                            }
                            if let Some(v) = &scheme {
                                filter.scheme = v.clone();
                                label.push(format!("scheme={v}"));
                            }
                            let label = if label.is_empty() { "all".to_string() } else { label.join("/") };
                            cells.push(Cell { label, model, filter });
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    pub fn replicate_count(&self) -> usize {
        scaled(self.replicates, self.scale)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub label: String,
    pub model: ModelSpec,
    pub filter: FilterSpec,
}

/// A pair ready for matching: seeds at the front of both graphs.
pub struct Instance {
    pub a: Graph,
    pub b: Graph,
    pub seeds: usize,
    /// In the relabelled vertex order.
    pub truth: Option<Injection>,
    /// Edge probabilities in the relabelled vertex order.
    pub lambda: Option<Array2<f64>>,
    /// Maps results back to input labels, for file inputs.
    pub pair: Option<SeededPair>,
}

impl Instance {
    /// Loads a pair from files, using the first `seeds` seed pairs.
    pub fn from_files(a: &Path, b: &Path, seeds: Option<&Path>, truth: Option<&Path>, use_seeds: Option<usize>) -> Result<Self> {
        let a = io::read_edge_list(a)?;
        let b = io::read_edge_list(b)?;
        let mut seed_pairs = match seeds {
            Some(p) => io::read_seeds(p)?,
            None => Vec::new(),
        };
        if let Some(k) = use_seeds {
            if k > seed_pairs.len() {
                return Err(Error::InvalidParameter(format!(
                    "{k} seeds requested but {} supplied",
                    seed_pairs.len()
                )));
            }
            seed_pairs.truncate(k);
        }
        let pair = SeededPair::new(&a, &b, &seed_pairs).map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::InvalidInjection(msg),
            other => other,
        })?;
        let truth = match truth {
            Some(p) => {
                let t = io::read_truth(p)?;
                if t.n_c() != a.n() || t.n() != b.n() {
                    return Err(Error::InvalidInjection(format!(
                        "truth maps {} into {} vertices, graphs have {} and {}",
                        t.n_c(),
                        t.n(),
                        a.n(),
                        b.n()
                    )));
                }
                Some(pair.from_original(&t))
            }
            None => None,
        };
        Ok(Instance {
            a: pair.a.clone(),
            b: pair.b.clone(),
            seeds: seed_pairs.len(),
            truth,
            lambda: None,
            pair: Some(pair),
        })
    }

    /// Samples a pair and hides the alignment of the non-seed vertices
    /// behind a random relabelling of the network.
    pub fn sample(model: &ModelSpec, seeds: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let (a, b, lambda) = model.sample(rng)?;
        if seeds > a.n() {
            return Err(Error::InvalidParameter(format!("{seeds} seeds exceed template order {}", a.n())));
        }
        let sh = shuffle_network(&b, a.n(), seeds, rng)?;
        Ok(Instance {
            lambda: Some(sh.relabel_matrix(&lambda)),
            a,
            b: sh.network,
            seeds,
            truth: Some(sh.truth),
            pair: None,
        })
    }

    pub fn resolve_scheme(&self, spec: &SchemeSpec) -> Result<Scheme> {
        Ok(match spec {
            SchemeSpec::Naive => Scheme::Naive,
            SchemeSpec::Centered => Scheme::Centered,
            SchemeSpec::LowRank(r) => Scheme::LowRank(*r),
            SchemeSpec::Oracle(path) if path.as_os_str() == MODEL_LAMBDA => {
                let lambda = self.lambda.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("oracle:model needs a generated model".into())
                })?;
                Scheme::Oracle(Arc::new(lambda.clone()))
            }
            SchemeSpec::Oracle(path) => {
                let m = io::read_matrix(path, self.b.n())?;
                let m = match &self.pair {
                    Some(pair) => pair.reorder_network_matrix(&m),
                    None => m,
                };
                Scheme::Oracle(Arc::new(m))
            }
        })
    }

    /// Injection in input labels.
    pub fn output_labels(&self, sigma: &Injection) -> Injection {
        match &self.pair {
            Some(pair) => pair.to_original(sigma),
            None => sigma.clone(),
        }
    }

    pub fn filter_config(&self, spec: &FilterSpec, rng_seed: u64) -> Result<FilterConfig> {
        Ok(FilterConfig {
            restarts: spec.restarts,
            seeds: self.seeds,
            scheme1: self.resolve_scheme(&spec.scheme)?,
            scheme2: spec.rescheme.as_ref().map(|s| self.resolve_scheme(s)).transpose()?,
            rng_seed,
            faq: spec.faq,
        })
    }
}

/// One ranked restart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartRecord {
    pub rank: usize,
    pub restart: usize,
    pub objective1: f64,
    pub objective2: Option<f64>,
    pub iters: usize,
    pub alpha0: f64,
    pub correct_matches: Option<usize>,
    pub edge_errors: usize,
    /// In input labels.
    pub sigma: Injection,
}

pub fn records(inst: &Instance, results: &[MatchResult], counting: EdgeCounting) -> Vec<RestartRecord> {
    results
        .iter()
        .enumerate()
        .map(|(rank, m)| RestartRecord {
            rank: rank + 1,
            restart: m.restart,
            objective1: m.objective,
            objective2: m.objective2,
            iters: m.iterations,
            alpha0: m.alpha0,
            correct_matches: inst.truth.as_ref().map(|t| correct_matches(&m.injection, t)),
            edge_errors: edge_errors(&inst.a, &inst.b, &m.injection, counting),
            sigma: inst.output_labels(&m.injection),
        })
        .collect()
}

pub const RESULT_COLUMNS: [&str; 8] = [
    "restart",
    "objective1",
    "objective2",
    "iters",
    "alpha0",
    "correct_matches",
    "edge_errors",
    "sigma",
];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl RestartRecord {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.restart.to_string(),
            self.objective1.to_string(),
            opt(self.objective2),
            self.iters.to_string(),
            self.alpha0.to_string(),
            opt(self.correct_matches),
            self.edge_errors.to_string(),
            io::format_injection(&self.sigma),
        ]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub n_c: usize,
    pub records: Vec<RestartRecord>,
    pub failures: Vec<(usize, String)>,
    #[serde(skip)]
    pub restart_seconds: Vec<f64>,
}

impl ReplicateOutcome {
    /// Correct matches of the best-ranked restart.
    pub fn best_correct(&self) -> Option<usize> {
        self.records.first().and_then(|r| r.correct_matches)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CellOutcome {
    pub cell: Cell,
    pub replicates: Vec<ReplicateOutcome>,
}

impl CellOutcome {
    /// Mean over replicates of the rank-1 correct matches.
    pub fn mean_best_correct(&self) -> Option<f64> {
        let v: Option<Vec<usize>> = self.replicates.iter().map(|r| r.best_correct()).collect();
        let v = v?;
        (!v.is_empty()).then(|| v.iter().sum::<usize>() as f64 / v.len() as f64)
    }

    /// Fraction of replicates whose best-ranked restart is fully correct.
    pub fn perfect_fraction(&self) -> Option<f64> {
        let hits: Option<Vec<bool>> = self
            .replicates
            .iter()
            .map(|r| r.best_correct().map(|c| c == r.n_c))
            .collect();
        let hits = hits?;
        (!hits.is_empty()).then(|| hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellOutcome>,
}

fn mix(seed: u64, k: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn run_replicate(cell: &Cell, k: usize, counting: EdgeCounting, files: Option<&Instance>) -> Result<ReplicateOutcome> {
    let seed = cell.filter.rng_seed;
    let sampled;
    let inst = match files {
        Some(inst) => inst,
        None => {
            let mut rng = restart_rng(seed, k);
            sampled = Instance::sample(&cell.model, cell.filter.seeds, &mut rng)?;
            &sampled
        }
    };
    let cfg = inst.filter_config(&cell.filter, mix(seed, k as u64))?;
    let run = run_filter(&inst.a, &inst.b, &cfg)?;
    Ok(ReplicateOutcome {
        replicate: k,
        n_c: inst.a.n(),
        records: records(inst, &run.results, counting),
        failures: run.failures,
        restart_seconds: run.seconds,
    })
}

/// Runs every cell and replicate. Results depend only on the spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let replicates = spec.replicate_count();
    let cells = spec.cells()?;
    let mut out = Vec::with_capacity(cells.len());
    for cell in cells {
        let files = match &cell.model {
            ModelSpec::Files { a, b, seeds, truth } => Some(Instance::from_files(
                a,
                b,
                seeds.as_deref(),
                truth.as_deref(),
                Some(cell.filter.seeds),
            )?),
            _ => None,
        };
        let reps = (0..replicates)
            .into_par_iter()
            .map(|k| run_replicate(&cell, k, spec.edge_counting, files.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        out.push(CellOutcome { cell, replicates: reps });
    }
    Ok(ExperimentReport { cells: out })
}

/// Nadaraya–Watson smoothing of `y` over `x` with a Gaussian kernel.
pub fn gaussian_smooth(x: &[f64], y: &[f64], bandwidth: f64) -> Vec<f64> {
    x.iter()
        .map(|&x0| {
            let (mut num, mut den) = (0.0, 0.0);
            for (&xi, &yi) in x.iter().zip(y) {
                let w = (-0.5 * ((xi - x0) / bandwidth).powi(2)).exp();
                num += w * yi;
                den += w;
            }
            num / den
        })
        .collect()
}

/// Mean correct matches at each rank, over replicates that reached it.
pub fn accuracy_by_rank(cell: &CellOutcome) -> Vec<(usize, f64)> {
    let max_rank = cell.replicates.iter().map(|r| r.records.len()).max().unwrap_or(0);
    (0..max_rank)
        .filter_map(|k| {
            let v: Vec<usize> = cell
                .replicates
                .iter()
                .filter_map(|r| r.records.get(k).and_then(|rec| rec.correct_matches))
                .collect();
            (!v.is_empty()).then(|| (k + 1, v.iter().sum::<usize>() as f64 / v.len() as f64))
        })
        .collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    } else {
        0.0
    };
    (m, var.sqrt())
}

#[derive(Serialize)]
struct CellSummary<'a> {
    label: &'a str,
    replicates: usize,
    mean_best_correct: Option<f64>,
    perfect_fraction: Option<f64>,
    failures: usize,
}

#[derive(Serialize)]
struct ExperimentSummary<'a> {
    schema_version: u32,
    spec: &'a ExperimentSpec,
    cells: Vec<CellSummary<'a>>,
}

/// Writes the figure-data tables. Everything except `runtime.csv` is a
/// function of the configuration alone.
pub fn write_experiment(report: &ExperimentReport, spec: &ExperimentSpec, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut rows = Vec::new();
    for c in &report.cells {
        for r in &c.replicates {
            for rec in &r.records {
                let mut row = vec![c.cell.label.clone(), r.replicate.to_string(), rec.rank.to_string()];
                row.extend(rec.fields());
                rows.push(row);
            }
        }
    }
    let mut header = vec!["cell", "replicate", "rank"];
    header.extend(RESULT_COLUMNS);
    io::write_csv(&dir.join("results.csv"), &header, rows)?;

    let mut rows = Vec::new();
    for c in &report.cells {
        for r in &c.replicates {
            let best = r.records.first();
            rows.push(vec![
                c.cell.label.clone(),
                r.replicate.to_string(),
                opt(best.map(|b| b.restart)),
                opt(best.map(|b| b.objective1)),
                opt(r.best_correct()),
                opt(r.records.iter().filter_map(|x| x.correct_matches).max()),
                r.failures.len().to_string(),
            ]);
        }
    }
    io::write_csv(
        &dir.join("replicate_summary.csv"),
        &["cell", "replicate", "best_restart", "best_objective", "best_correct", "max_correct", "failures"],
        rows,
    )?;

    let mut rows = Vec::new();
    for c in &report.cells {
        let acc = accuracy_by_rank(c);
        let restarts = c.cell.filter.restarts.max(2) - 1;
        let x: Vec<f64> = acc.iter().map(|(r, _)| (r - 1) as f64 / restarts as f64).collect();
        let y: Vec<f64> = acc.iter().map(|a| a.1).collect();
        let smooth = spec.smoothing.map(|h| gaussian_smooth(&x, &y, h));
        for (k, (rank, mean)) in acc.iter().enumerate() {
            rows.push(vec![
                c.cell.label.clone(),
                rank.to_string(),
                x[k].to_string(),
                mean.to_string(),
                opt(smooth.as_ref().map(|s| s[k])),
            ]);
        }
    }
    io::write_csv(
        &dir.join("accuracy_vs_rank.csv"),
        &["cell", "rank", "normalized_rank", "mean_correct", "smoothed_correct"],
        rows,
    )?;

    let mut rows = Vec::new();
    for c in &report.cells {
        let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for rec in c.replicates.iter().flat_map(|r| &r.records) {
            if let Some(k) = rec.correct_matches {
                let g = groups.entry(k).or_insert((0.0, 0));
                g.0 += rec.objective1;
                g.1 += 1;
            }
        }
        for (k, (sum, count)) in groups {
            rows.push(vec![
                c.cell.label.clone(),
                k.to_string(),
                (sum / count as f64).to_string(),
                count.to_string(),
            ]);
        }
    }
    io::write_csv(
        &dir.join("objective_vs_accuracy.csv"),
        &["cell", "correct_matches", "mean_objective", "restarts"],
        rows,
    )?;

    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            let secs: Vec<f64> = c.replicates.iter().flat_map(|r| r.restart_seconds.iter().copied()).collect();
            let (m, sd) = mean_sd(&secs);
            vec![c.cell.label.clone(), secs.len().to_string(), m.to_string(), sd.to_string()]
        })
        .collect();
    io::write_csv(&dir.join("runtime.csv"), &["cell", "restarts", "mean_seconds", "sd_seconds"], rows)?;

    let summary = ExperimentSummary {
        schema_version: SCHEMA_VERSION,
        spec,
        cells: report
            .cells
            .iter()
            .map(|c| CellSummary {
                label: &c.cell.label,
                replicates: c.replicates.len(),
                mean_best_correct: c.mean_best_correct(),
                perfect_fraction: c.perfect_fraction(),
                failures: c.replicates.iter().map(|r| r.failures.len()).sum(),
            })
            .collect(),
    };
    io::write_json(&summary, &dir.join("summary.json"))
}

/// Samples one pair and writes `A.edges`, `B.edges`, `truth.json`,
/// `lambda.txt` and, when `seeds > 0`, `seeds.txt`.
pub fn cmd_sample(model: &ModelSpec, seeds: usize, rng_seed: u64, dir: &Path) -> Result<Injection> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (a, b, lambda) = model.sample(&mut rng)?;
    if seeds > a.n() {
        return Err(Error::InvalidParameter(format!("{seeds} seeds exceed template order {}", a.n())));
    }
    let sh = shuffle_network(&b, a.n(), 0, &mut rng)?;
    fs::create_dir_all(dir)?;
    io::write_edge_list(&a, &dir.join("A.edges"))?;
    io::write_edge_list(&sh.network, &dir.join("B.edges"))?;
    io::write_matrix(&sh.relabel_matrix(&lambda), &dir.join("lambda.txt"))?;
    let seed_pairs: Vec<(usize, usize)> = (0..seeds).map(|i| (i, sh.truth.apply(i))).collect();
    if seeds > 0 {
        io::write_seeds(&seed_pairs, &dir.join("seeds.txt"))?;
    }
    let sidecar = io::TruthFile {
        n_c: a.n(),
        n: b.n(),
        truth: sh.truth.as_slice().to_vec(),
        rng_seed,
        model: serde_json::to_value(model)?,
    };
    io::write_json(&sidecar, &dir.join("truth.json"))?;
    Ok(sh.truth)
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchSummary {
    pub schema_version: u32,
    pub n_c: usize,
    pub n: usize,
    pub seeds: usize,
    pub restarts: usize,
    pub scheme: String,
    pub rescheme: Option<String>,
    pub rng_seed: u64,
    pub best: Option<RestartRecord>,
    pub failures: Vec<(usize, String)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchTiming {
    pub total_seconds: f64,
    pub restart_seconds: Vec<f64>,
}

/// Matches `a` into `b` and writes `results.csv`, `pairs.csv`,
/// `summary.json` and `timing.json`.
pub fn cmd_match(
    inst: &Instance,
    spec: &FilterSpec,
    counting: EdgeCounting,
    dir: &Path,
) -> Result<(MatchSummary, Vec<RestartRecord>)> {
    let start = Instant::now();
    let cfg = inst.filter_config(spec, spec.rng_seed)?;
    let run = run_filter(&inst.a, &inst.b, &cfg)?;
    let total_seconds = start.elapsed().as_secs_f64();
    let recs = records(inst, &run.results, counting);

    fs::create_dir_all(dir)?;
    io::write_csv(&dir.join("results.csv"), &RESULT_COLUMNS, recs.iter().map(|r| r.fields()))?;

    if !run.results.is_empty() {
        let original: Vec<MatchResult> = run
            .results
            .iter()
            .map(|m| MatchResult {
                injection: inst.output_labels(&m.injection),
                ..m.clone()
            })
            .collect();
        let freq = pair_frequencies(&original)?;
        let mut header = vec!["template".to_string()];
        header.extend((0..freq.counts.ncols()).map(|j| j.to_string()));
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows = freq.counts.rows().into_iter().enumerate().map(|(i, row)| {
            let mut v = vec![i.to_string()];
            v.extend(row.iter().map(|c| c.to_string()));
            v
        });
        io::write_csv(&dir.join("pairs.csv"), &header_refs, rows)?;
    }

    let summary = MatchSummary {
        schema_version: SCHEMA_VERSION,
        n_c: inst.a.n(),
        n: inst.b.n(),
        seeds: inst.seeds,
        restarts: spec.restarts,
        scheme: spec.scheme.to_string(),
        rescheme: spec.rescheme.as_ref().map(|s| s.to_string()),
        rng_seed: spec.rng_seed,
        best: recs.first().cloned(),
        failures: run.failures.clone(),
    };
    io::write_json(&summary, &dir.join("summary.json"))?;
    io::write_json(
        &MatchTiming {
            total_seconds,
            restart_seconds: run.seconds,
        },
        &dir.join("timing.json"),
    )?;
    Ok((summary, recs))
}
