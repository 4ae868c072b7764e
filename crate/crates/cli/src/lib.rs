//! Commands behind the `btda` binary. Each writes its files under an output
//! directory; everything except the `meta.json` sidecar is a pure function
//! of the configuration and seeds.

pub mod config;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mcda_core::baselines::{evaluate_bound, median, run_suite_with, SuiteResult};
use mcda_core::datagen::{label_distribution, load_dataset, save_dataset, Dataset};
use mcda_core::error::ErrorClass;
use mcda_core::mcda::train::predict_dataset;
use mcda_core::mcda::{train, Method, TrainLog};
use mcda_core::metrics::{knn_same_class_rate, BoundReport, KnnProbe};
use mcda_core::nnet::{load_checkpoint, write_checkpoint, ModelBundle};
use mcda_core::{Error, Result};

pub use config::{DataSource, ExperimentConfig};

pub const OUT_ENV: &str = "BTDA_OUT";
pub const DEFAULT_OUT: &str = "btda-runs";

/// Values given on the command line; each replaces its config counterpart.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub config: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub gammas: Vec<f64>,
    pub dataset: Option<PathBuf>,
}

/// Loads the config file (if any) and folds the flags in. For every command
/// but `sweep-gamma`, `--gamma` sets the training threshold and may be given
/// once.
pub fn resolve(flags: &Flags, gamma_is_grid: bool) -> Result<ExperimentConfig> {
    let mut cfg = match &flags.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if !flags.seeds.is_empty() {
        cfg.seeds = flags.seeds.clone();
    }
    if !flags.methods.is_empty() {
        cfg.set_methods(&flags.methods);
    }
    if let Some(p) = &flags.dataset {
        cfg.data = DataSource::File(p.clone());
    }
    if flags.out.is_some() {
        cfg.out = flags.out.clone();
    }
    match (gamma_is_grid, flags.gammas.as_slice()) {
        (_, []) => {}
        (true, g) => cfg.gammas = g.to_vec(),
        (false, [g]) => cfg.train.gamma = *g,
        (false, _) => return Err(Error::Invalid("--gamma given more than once".into())),
    }
    cfg.train.validate()?;
    Ok(cfg)
}

/// Output root: the config or `--out` value, else `$BTDA_OUT`, else
/// [`DEFAULT_OUT`].
pub fn output_root(cfg: &ExperimentConfig, env: Option<String>) -> PathBuf {
    cfg.out
        .clone()
        .or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Process exit code for a failure.
pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Config => 2,
        ErrorClass::Numeric => 3,
        ErrorClass::Io => 4,
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display(), e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path.display(), e))
}

/// Writes `meta.json` with the command name and wall-clock time. This is the
/// only file whose content varies between identical runs.
pub fn write_meta(dir: &Path, command: &str) -> Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let meta = serde_json::json!({
        "command": command,
        "created_unix": secs,
        "version": env!("CARGO_PKG_VERSION"),
    });
    write(&dir.join("meta.json"), pretty(&meta))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data {
        DataSource::File(p) => load_dataset(p),
        DataSource::Generate { spec, seed } => spec.build(*seed),
    }
}

/// Per-domain label distributions, one line per domain.
pub fn describe(ds: &Dataset) -> Result<String> {
    let mut out = String::new();
    for d in 0..ds.num_domains {
        let role = if d == 0 { "source" } else { "target" };
        let dist = label_distribution(ds, d)?;
        let shown: Vec<String> = dist.iter().map(|p| format!("{p:.3}")).collect();
        out.push_str(&format!(
            "domain {d} ({role}, {} rows): [{}]\n",
            ds.domain_rows(d).len(),
            shown.join(", ")
        ));
    }
    Ok(out)
}

/// Builds the configured benchmark and writes `dataset.btda`.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<(PathBuf, Dataset)> {
    let DataSource::Generate { spec, seed } = &cfg.data else {
        return Err(Error::Invalid(
            "generate needs a generation spec, not a dataset path".into(),
        ));
    };
    let ds = spec.build(*seed)?;
    let path = out.join("dataset.btda");
    fs::create_dir_all(out).map_err(|e| Error::io(out.display(), e))?;
    save_dataset(&ds, &path)?;
    write_meta(out, "generate")?;
    Ok((path, ds))
}

/// Directory of one (method, seed) run.
pub fn run_dir(out: &Path, method: Method, seed: u64) -> PathBuf {
    out.join(method.name()).join(format!("seed_{seed}"))
}

/// Trains every configured (method, seed) pair. Each run directory gets
/// `log.jsonl`, `summary.json` and `model.ckpt` (plus plots when enabled);
/// the root gets `results.csv` and `summary.csv`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<SuiteResult> {
    let ds = load_data(cfg)?;
    let result = run_suite_with(&ds, &cfg.methods, &cfg.seeds, &cfg.train, |spec, seed, outcome| {
        let dir = run_dir(out, spec.method, seed);
        write(&dir.join("log.jsonl"), outcome.log.to_jsonl())?;
        let mut summary = outcome.log.summary();
        summary["bound"] = serde_json::to_value(evaluate_bound(&outcome.bundle, &ds)?).expect("report serializes");
        write(&dir.join("summary.json"), pretty(&summary))?;
        write(&dir.join("model.ckpt"), write_checkpoint(&outcome.bundle))?;
        if cfg.plot {
            write_plots(&outcome.log, &dir)?;
        }
        Ok(())
    })?;
    write(&out.join("results.csv"), result.to_csv())?;
    write(&out.join("summary.csv"), result.summary_csv())?;
    write_meta(out, "train")?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub seed: u64,
    pub acc_tgt_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSweep {
    pub method: Method,
    pub rows: Vec<SweepRow>,
}

impl GammaSweep {
    /// Per-γ (gamma, mean, median) of final mean target accuracy, in grid order.
    pub fn per_gamma(&self) -> Vec<(f64, f64, f64)> {
        let mut grid: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !grid.contains(&r.gamma) {
                grid.push(r.gamma);
            }
        }
        grid.into_iter()
            .map(|g| {
                let mut acc: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.gamma == g)
                    .map(|r| r.acc_tgt_mean)
                    .collect();
                let mean = acc.iter().sum::<f64>() / acc.len() as f64;
                (g, mean, median(&mut acc))
            })
            .collect()
    }

    /// max − min over γ of the per-γ mean accuracy.
    pub fn fluctuation(&self) -> f64 {
        spread(self.per_gamma().iter().map(|p| p.1))
    }

    /// max − min over γ of the per-γ median accuracy.
    pub fn median_fluctuation(&self) -> f64 {
        spread(self.per_gamma().iter().map(|p| p.2))
    }

    /// `gamma,seed,acc_tgt_mean` rows and a closing `fluctuation` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,seed,acc_tgt_mean\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.gamma, r.seed, r.acc_tgt_mean));
        }
        out.push_str(&format!("fluctuation,,{}\n", self.fluctuation()));
        out
    }
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// Retrains the first configured method for every γ × seed and writes
/// `gamma_sweep.csv`.
pub fn cmd_sweep_gamma(cfg: &ExperimentConfig, out: &Path) -> Result<GammaSweep> {
    if cfg.gammas.is_empty() {
        return Err(Error::Empty("gamma grid".into()));
    }
    let ds = load_data(cfg)?;
    let spec = &cfg.methods[0];
    let mut rows = Vec::with_capacity(cfg.gammas.len() * cfg.seeds.len());
    for &gamma in &cfg.gammas {
        for &seed in &cfg.seeds {
            let mut tc = spec.config(&cfg.train, seed);
            tc.gamma = gamma;
            let outcome = train(&ds, &tc)?;
            rows.push(SweepRow {
                gamma,
                seed,
                acc_tgt_mean: outcome.log.last().acc_tgt_mean,
            });
        }
    }
    let sweep = GammaSweep {
        method: spec.method,
        rows,
    };
    write(&out.join("gamma_sweep.csv"), sweep.to_csv())?;
    write_meta(out, "sweep-gamma")?;
    Ok(sweep)
}

/// Class-center KNN probe over the target rows, on raw inputs or, given a
/// checkpoint, on its features. Writes `probe.csv`.
pub fn cmd_probe(cfg: &ExperimentConfig, checkpoint: Option<&Path>, out: &Path) -> Result<KnnProbe> {
    let ds = load_data(cfg)?;
    let probe = probe_targets(
        &ds,
        checkpoint.map(load_checkpoint).transpose()?.as_ref(),
        cfg.k_neighbors,
    )?;
    write(&out.join("probe.csv"), probe.to_csv())?;
    write_meta(out, "probe")?;
    Ok(probe)
}

/// [`knn_same_class_rate`] over the target rows of `ds`.
pub fn probe_targets(ds: &Dataset, bundle: Option<&ModelBundle>, k_neighbors: usize) -> Result<KnnProbe> {
    let rows = ds.target_rows();
    let labels: Vec<usize> = rows.iter().map(|&i| ds.labels[i] as usize).collect();
    let (features, dim) = match bundle {
        None => {
            let dim = ds.row_len();
            let f: Vec<f64> = rows.iter().flat_map(|&i| ds.row(i).iter().map(|&v| v as f64)).collect();
            (f, dim)
        }
        Some(b) => {
            let (all, _) = predict_dataset(b, ds)?;
            let dim = b.arch.feature_dim;
            let f: Vec<f64> = rows
                .iter()
                .flat_map(|&i| all[i * dim..(i + 1) * dim].iter().copied())
                .collect();
            (f, dim)
        }
    };
    knn_same_class_rate(&features, dim, &labels, ds.k, k_neighbors)
}

/// Bound report of a checkpoint on the configured dataset; writes
/// `bound.json`.
pub fn cmd_bound(cfg: &ExperimentConfig, checkpoint: &Path, out: &Path) -> Result<BoundReport> {
    let ds = load_data(cfg)?;
    let report = evaluate_bound(&load_checkpoint(checkpoint)?, &ds)?;
    write(
        &out.join("bound.json"),
        pretty(&serde_json::to_value(&report).expect("report serializes")),
    )?;
    write_meta(out, "bound")?;
    Ok(report)
}

/// Reads `log.jsonl` of a run directory and writes the curves as SVG into
/// `out`. Method and seed for the titles come from `summary.json` when
/// present.
pub fn cmd_plot(run: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let path = run.join("log.jsonl");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display(), e))?;
    let summary: serde_json::Value = fs::read_to_string(run.join("summary.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let method = summary["method"]
        .as_str()
        .and_then(|m| m.parse().ok())
        .unwrap_or(Method::Mcda);
    let seed = summary["seed"].as_u64().unwrap_or(0);
    let log = TrainLog::from_jsonl(method, seed, &text)?;
    write_plots(&log, out)
}

fn write_plots(log: &TrainLog, dir: &Path) -> Result<Vec<PathBuf>> {
    plot::training_curves(log)
        .into_iter()
        .map(|(stem, svg)| {
            let path = dir.join(format!("{stem}.svg"));
            write(&path, svg)?;
            Ok(path)
        })
        .collect()
}
