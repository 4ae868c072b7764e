//! Experiment files: flat `key = value` lines grouped under `[section]`
//! headers. `#` starts a comment; values may be wrapped in double quotes.
//!
//! ```text
//! [data]
//! preset = standard          # or standard_vector, or path = some.btda
//! samples_per_domain = 800
//! seed = 0
//!
//! [train]
//! epochs = 40
//! method = mcda
//!
//! [run]
//! methods = source_only, dann, mcda
//! seeds = 0, 1, 2
//! out = runs/demo
//! plot = true
//!
//! [method.dann]
//! grl_max = 0.5
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use mcda_core::baselines::{ConfigOverrides, MethodSpec};
use mcda_core::datagen::BenchmarkSpec;
use mcda_core::mcda::{Method, TrainConfig};
use mcda_core::{Error, Result};

pub const DEFAULT_GAMMAS: [f64; 5] = [0.01, 0.03, 0.05, 0.07, 0.09];
pub const DEFAULT_SAMPLES: usize = 800;
pub const DEFAULT_K_NEIGHBORS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| config_err(line, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(config_err(line, "empty section name"));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("expected `key = value`, found `{body}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(config_err(line, "missing key"));
        }
        if section.is_empty() {
            return Err(config_err(line, format!("key `{key}` outside any section")));
        }
        if let Some(prev) = entries.iter().find(|e| e.section == section && e.key == key) {
            return Err(config_err(
                line,
                format!("duplicate key `{key}` (first set on line {})", prev.line),
            ));
        }
        entries.push(Entry {
            section: section.clone(),
            key: key.to_string(),
            value: unquote(value.trim()),
            line,
        });
    }
    Ok(entries)
}

/// Drops a `#` comment that is not inside double quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> String {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
        .to_string()
}

fn value<T: FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| config_err(e.line, format!("bad value `{}` for `{}`", e.value, e.key)))
}

fn list<T: FromStr>(e: &Entry) -> Result<Vec<T>> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| config_err(e.line, format!("bad list item `{s}` for `{}`", e.key)))
        })
        .collect()
}

fn method(e: &Entry, s: &str) -> Result<Method> {
    s.parse()
        .map_err(|_| config_err(e.line, format!("unknown method `{s}`")))
}

fn unknown(e: &Entry) -> Error {
    config_err(e.line, format!("unknown key `{}` in [{}]", e.key, e.section))
}

/// Where the dataset of an experiment comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Generate { spec: BenchmarkSpec, seed: u64 },
}

/// Everything a command needs, after defaults and file values are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub train: TrainConfig,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub plot: bool,
    pub gammas: Vec<f64>,
    pub k_neighbors: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Generate {
                spec: BenchmarkSpec::standard(DEFAULT_SAMPLES),
                seed: 0,
            },
            train: TrainConfig::default(),
            methods: vec![MethodSpec::new(Method::Mcda)],
            seeds: vec![0],
            out: None,
            plot: false,
            gammas: DEFAULT_GAMMAS.to_vec(),
            k_neighbors: DEFAULT_K_NEIGHBORS,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text)?;
        let mut cfg = ExperimentConfig::default();
        let mut preset = "standard".to_string();
        let mut samples = DEFAULT_SAMPLES;
        let mut data_seed = 0;
        let mut path = None;
        let mut methods: Option<(Vec<Method>, usize)> = None;
        let mut overrides: Vec<(Method, ConfigOverrides)> = Vec::new();

        for e in &entries {
            match e.section.as_str() {
                "data" => match e.key.as_str() {
                    "path" => path = Some(PathBuf::from(&e.value)),
                    "preset" => {
                        if !matches!(e.value.as_str(), "standard" | "standard_vector") {
                            return Err(config_err(e.line, format!("unknown preset `{}`", e.value)));
                        }
                        preset = e.value.clone();
                    }
                    "samples_per_domain" => samples = value(e)?,
                    "seed" => data_seed = value(e)?,
                    _ => return Err(unknown(e)),
                },
                "train" => apply_train(&mut cfg.train, e)?,
                "run" => match e.key.as_str() {
                    "methods" => {
                        let names: Vec<String> = list(e)?;
                        let parsed = names.iter().map(|n| method(e, n)).collect::<Result<Vec<_>>>()?;
                        methods = Some((parsed, e.line));
                    }
                    "seeds" => cfg.seeds = list(e)?,
                    "out" => cfg.out = Some(PathBuf::from(&e.value)),
                    "plot" => cfg.plot = value(e)?,
                    "gammas" => cfg.gammas = list(e)?,
                    "k_neighbors" => cfg.k_neighbors = value(e)?,
                    _ => return Err(unknown(e)),
                },
                s => match s.strip_prefix("method.") {
                    Some(name) => {
                        let m = method(e, name)?;
                        let idx = match overrides.iter().position(|(o, _)| *o == m) {
                            Some(i) => i,
                            None => {
                                overrides.push((m, ConfigOverrides::default()));
                                overrides.len() - 1
                            }
                        };
                        apply_override(&mut overrides[idx].1, e)?;
                    }
                    None => return Err(config_err(e.line, format!("unknown section [{s}]"))),
                },
            }
        }

        cfg.data = match path {
            Some(p) => DataSource::File(p),
            None => DataSource::Generate {
                spec: match preset.as_str() {
                    "standard_vector" => BenchmarkSpec::standard_vector(samples),
                    _ => BenchmarkSpec::standard(samples),
                },
                seed: data_seed,
            },
        };
        let (names, line) = methods.unwrap_or((vec![cfg.train.method], 0));
        if names.is_empty() {
            return Err(config_err(line, "empty method list"));
        }
        cfg.methods = names
            .into_iter()
            .map(|m| MethodSpec {
                method: m,
                overrides: overrides
                    .iter()
                    .find(|(o, _)| *o == m)
                    .map(|(_, ov)| ov.clone())
                    .unwrap_or_default(),
            })
            .collect();
        if cfg.seeds.is_empty() {
            return Err(Error::Config {
                line: entries.iter().find(|e| e.key == "seeds").map_or(0, |e| e.line),
                msg: "empty seed list".into(),
            });
        }
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// Replaces the method list, keeping overrides of methods already named.
    pub fn set_methods(&mut self, methods: &[Method]) {
        self.methods = methods
            .iter()
            .map(|&m| {
                self.methods
                    .iter()
                    .find(|s| s.method == m)
                    .cloned()
                    .unwrap_or_else(|| MethodSpec::new(m))
            })
            .collect();
    }
}

fn apply_train(c: &mut TrainConfig, e: &Entry) -> Result<()> {
    match e.key.as_str() {
        "eta0" => c.eta0 = value(e)?,
        "alpha" => c.alpha = value(e)?,
        "beta" => c.beta = value(e)?,
        "gamma" => c.gamma = value(e)?,
        "momentum" => c.momentum = value(e)?,
        "weight_decay" => c.weight_decay = value(e)?,
        "batch_size" => c.batch_size = value(e)?,
        "epochs" => c.epochs = value(e)?,
        "grl_max" => c.grl_max = value(e)?,
        "disc_lr_mult" => c.disc_lr_mult = value(e)?,
        "balanced" => c.balanced = value(e)?,
        "augment" => c.augment = value(e)?,
        "epsilon" => c.epsilon = value(e)?,
        "method" => c.method = method(e, &e.value)?,
        _ => return Err(unknown(e)),
    }
    Ok(())
}

fn apply_override(o: &mut ConfigOverrides, e: &Entry) -> Result<()> {
    match e.key.as_str() {
        "eta0" => o.eta0 = Some(value(e)?),
        "gamma" => o.gamma = Some(value(e)?),
        "momentum" => o.momentum = Some(value(e)?),
        "weight_decay" => o.weight_decay = Some(value(e)?),
        "batch_size" => o.batch_size = Some(value(e)?),
        "epochs" => o.epochs = Some(value(e)?),
        "grl_max" => o.grl_max = Some(value(e)?),
        "disc_lr_mult" => o.disc_lr_mult = Some(value(e)?),
        "balanced" => o.balanced = Some(value(e)?),
        "augment" => o.augment = Some(value(e)?),
        _ => return Err(unknown(e)),
    }
    Ok(())
}
