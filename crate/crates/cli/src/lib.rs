//! Experiment driver behind the `gad` binary: dataset synthesis, training,
//! sampling, evaluation and step-count sweeps. Every command is a pure
//! function of its config, input files and seeds, and leaves a manifest next
//! to its outputs.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gad_core::data::{generate_sbm, generate_smooth_signals};
use gad_core::denoiser::{train, Checkpoint, GcnnDenoiser, LossTrace};
use gad_core::eval::{evaluate, MetricsReport};
use gad_core::io::{
    file_hash, load_adjacency_csv, load_signals_csv, save_adjacency_csv, save_communities_csv, save_signals_csv,
};
use gad_core::sampler::{sample_batch, ScoreModel};
use gad_core::{GadError, Method, Result, SignalDataset, Spectrum, Split};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{DataConfig, GraphSource, RunConfig, SamplerSettings, Seeds, TrainSettings};

pub const ADJACENCY_FILE: &str = "adjacency.csv";
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const COMMUNITIES_FILE: &str = "communities.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOSS_FILE: &str = "loss.csv";
pub const GENERATED_FILE: &str = "generated.csv";
pub const SAMPLE_META_FILE: &str = "sample.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const SWEEP_FILE: &str = "sweep.csv";

fn io_err(path: &Path, source: std::io::Error) -> GadError {
    GadError::Io { path: path.to_path_buf(), source }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

/// Record of one command invocation. No timestamps or host data, so reruns
/// produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub seeds: Seeds,
    /// Input files by role, with their SHA-256.
    pub inputs: BTreeMap<String, FileRecord>,
    /// Output file name to SHA-256.
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub extra: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileRecord { path: path.to_path_buf(), sha256: file_hash(path)? })
    }
}

impl Manifest {
    fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            command: command.into(),
            config: config.clone(),
            seeds: config.seeds(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            extra: Value::Null,
        }
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.insert(role.into(), FileRecord::of(path)?);
        Ok(())
    }

    fn output(&mut self, dir: &Path, name: &str) -> Result<()> {
        self.outputs.insert(name.into(), file_hash(&dir.join(name))?);
        Ok(())
    }

    fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Locations of the graph and the two signal sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub adjacency: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
}

impl DataPaths {
    pub fn in_dir(dir: &Path) -> Self {
        DataPaths { adjacency: dir.join(ADJACENCY_FILE), train: dir.join(TRAIN_FILE), test: dir.join(TEST_FILE) }
    }

    /// An explicit data directory wins; otherwise CSV sources point at their
    /// own files and SBM sources at the output directory of `gen-data`.
    pub fn resolve(config: &RunConfig, data_dir: Option<&Path>) -> Self {
        match (data_dir, &config.graph) {
            (Some(dir), _) => Self::in_dir(dir),
            (None, GraphSource::Csv { adjacency, train, test }) => {
                DataPaths { adjacency: adjacency.clone(), train: train.clone(), test: test.clone() }
            }
            (None, GraphSource::Sbm { .. }) => Self::in_dir(&config.out),
        }
    }
}

fn load_spectrum(adjacency: &Path) -> Result<Arc<Spectrum>> {
    Ok(Arc::new(Spectrum::from_graph(&load_adjacency_csv(adjacency)?)?))
}

/// Writes adjacency, train/test signals (and communities for SBM graphs) to
/// `out`.
pub fn gen_data(config: &RunConfig, out: &Path) -> Result<DataPaths> {
    config.validate()?;
    create_dir(out)?;
    let paths = DataPaths::in_dir(out);
    let mut manifest = Manifest::new("gen-data", config);
    let mut names = vec![ADJACENCY_FILE, TRAIN_FILE, TEST_FILE];
    match &config.graph {
        GraphSource::Sbm { nodes_per_community, num_communities, p_in, p_out } => {
            let seeds = config.seeds();
            let (graph, communities) =
                generate_sbm(*nodes_per_community, *num_communities, *p_in, *p_out, seeds.graph)?;
            let spectrum = Spectrum::from_graph(&graph)?;
            let d = &config.data;
            let train = generate_smooth_signals(&spectrum, &communities, d.num_train, d.tau, Split::Train, seeds.train_signals)?;
            let test = generate_smooth_signals(&spectrum, &communities, d.num_test, d.tau, Split::Test, seeds.test_signals)?;
            save_adjacency_csv(&graph, &paths.adjacency)?;
            save_signals_csv(&train, &paths.train)?;
            save_signals_csv(&test, &paths.test)?;
            save_communities_csv(&communities, &out.join(COMMUNITIES_FILE))?;
            names.push(COMMUNITIES_FILE);
        }
        GraphSource::Csv { adjacency, train, test } => {
            // parse everything first so bad inputs never reach the output dir
            let graph = load_adjacency_csv(adjacency)?;
            for (src, split) in [(train, Split::Train), (test, Split::Test)] {
                load_signals_csv(src, split)?.check_graph(graph.num_nodes())?;
            }
            for (role, src, dst) in [
                ("adjacency", adjacency, &paths.adjacency),
                ("train", train, &paths.train),
                ("test", test, &paths.test),
            ] {
                manifest.input(role, src)?;
                if src != dst {
                    std::fs::copy(src, dst).map_err(|e| io_err(dst, e))?;
                }
            }
        }
    }
    for name in names {
        manifest.output(out, name)?;
    }
    manifest.write(out)?;
    Ok(paths)
}

/// Inputs that determine a trained checkpoint. Two training runs with equal
/// keys produce identical checkpoints.
fn train_key(config: &RunConfig, method: Method, paths: &DataPaths) -> Result<Value> {
    let seeds = config.seeds();
    Ok(json!({
        "method": method,
        "process": config.process,
        "architecture": config.architecture,
        "train": config.train,
        "init_seed": seeds.init,
        "train_seed": seeds.training,
        "adjacency_sha256": file_hash(&paths.adjacency)?,
        "train_sha256": file_hash(&paths.train)?,
    }))
}

pub struct TrainOutput {
    pub checkpoint: PathBuf,
    pub loss: LossTrace,
}

/// Trains `method` on the training split and writes the checkpoint and loss
/// trace to `out`.
pub fn train_method(config: &RunConfig, method: Method, paths: &DataPaths, out: &Path) -> Result<TrainOutput> {
    let spectrum = load_spectrum(&paths.adjacency)?;
    let dataset = load_signals_csv(&paths.train, Split::Train)?;
    let graph_hash = file_hash(&paths.adjacency)?;
    let seeds = config.seeds();
    let process = config.process.build(method, spectrum.clone())?;
    let horizon = config.process.schedule.horizon();
    let mut net = GcnnDenoiser::init(spectrum, config.architecture, horizon, seeds.init)?;
    let loss = train(&mut net, &dataset, &process, &config.train.with_seed(seeds.training))?;

    create_dir(out)?;
    let checkpoint = out.join(CHECKPOINT_FILE);
    Checkpoint::new(method, &net, config.process, graph_hash).save(&checkpoint)?;
    let mut trace = String::from("iteration,loss\n");
    for (i, l) in loss.0.iter().enumerate() {
        trace.push_str(&format!("{i},{l:e}\n"));
    }
    write_file(&out.join(LOSS_FILE), &trace)?;

    let mut manifest = Manifest::new("train", &RunConfig { method, ..config.clone() });
    manifest.input("adjacency", &paths.adjacency)?;
    manifest.input("train", &paths.train)?;
    manifest.output(out, CHECKPOINT_FILE)?;
    manifest.output(out, LOSS_FILE)?;
    manifest.extra = json!({ "train_key": train_key(config, method, paths)? });
    manifest.write(out)?;
    Ok(TrainOutput { checkpoint, loss })
}

/// Loads a checkpoint against the graph in `adjacency`, refusing a graph
/// other than the one it was trained on.
pub fn load_score_model(checkpoint: &Path, adjacency: &Path) -> Result<(Checkpoint, ScoreModel)> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let spectrum = load_spectrum(adjacency)?;
    let net = ckpt.to_denoiser(spectrum.clone(), &file_hash(adjacency)?)?;
    let process = ckpt.forward_model_params.build(ckpt.method, spectrum)?;
    Ok((ckpt.clone(), ScoreModel::gcnn_tweedie(process, net)?))
}

/// Generates `num_samples` signals with `steps` reverse steps and writes them
/// with a metadata JSON to `out`.
pub fn sample(
    config: &RunConfig,
    checkpoint: &Path,
    adjacency: &Path,
    steps: usize,
    num_samples: usize,
    out: &Path,
) -> Result<PathBuf> {
    let (ckpt, model) = load_score_model(checkpoint, adjacency)?;
    let sampler = config.sampler.config(steps, config.seeds().sampling);
    let x = sample_batch(&model, &sampler, num_samples)?;
    let generated = SignalDataset::from_columns(&x, Split::Test)?;
    create_dir(out)?;
    let path = out.join(GENERATED_FILE);
    save_signals_csv(&generated, &path)?;
    let meta = json!({
        "command": "sample",
        "method": ckpt.method,
        "steps": steps,
        "num_samples": num_samples,
        "seed": sampler.seed,
        "final_denoise": sampler.final_denoise,
        "checkpoint": FileRecord::of(checkpoint)?,
        "adjacency": FileRecord::of(adjacency)?,
        "generated_sha256": file_hash(&path)?,
        "config": config,
    });
    write_json(&out.join(SAMPLE_META_FILE), &meta)?;
    Ok(path)
}

/// Compares generated signals against the test set and writes the report to
/// `out` when given.
pub fn eval(
    generated: &Path,
    test: &Path,
    adjacency: &Path,
    method: &str,
    steps: Option<usize>,
    out: Option<&Path>,
) -> Result<MetricsReport> {
    let spectrum = load_spectrum(adjacency)?;
    let gen = load_signals_csv(generated, Split::Test)?;
    let test = load_signals_csv(test, Split::Test)?;
    let report = evaluate(&gen, &test, &spectrum, method, steps)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join(METRICS_FILE), &report)?;
    }
    Ok(report)
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub steps: usize,
    pub report: MetricsReport,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("method,steps,qv_mmd,sc_mmd,dc_mmd,ammd\n");
    for r in rows {
        let dc = r.report.dc_mmd.map(|v| format!("{v:e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:e},{:e},{},{:e}\n",
            r.method, r.steps, r.report.qv_mmd, r.report.sc_mmd, dc, r.report.ammd
        ));
    }
    out
}

/// Reuses `dir/checkpoint.json` when its manifest records the same training
/// inputs, and trains afresh otherwise.
fn trained_checkpoint(config: &RunConfig, method: Method, paths: &DataPaths, dir: &Path) -> Result<PathBuf> {
    let checkpoint = dir.join(CHECKPOINT_FILE);
    if let Ok(manifest) = Manifest::load(&dir.join(MANIFEST_FILE)) {
        let same = manifest.extra.get("train_key") == Some(&train_key(config, method, paths)?);
        let intact = manifest.outputs.get(CHECKPOINT_FILE).cloned() == file_hash(&checkpoint).ok();
        if same && intact {
            return Ok(checkpoint);
        }
    }
    Ok(train_method(config, method, paths, dir)?.checkpoint)
}

fn sweep_method(config: &RunConfig, method: Method, paths: &DataPaths, out: &Path) -> Result<Vec<SweepRow>> {
    let dir = out.join(method.as_str());
    let checkpoint = trained_checkpoint(config, method, paths, &dir)?;
    let mut rows = vec![];
    for &steps in &config.sampler.sweep_steps {
        let cell = dir.join(format!("steps_{steps}"));
        let generated = sample(config, &checkpoint, &paths.adjacency, steps, config.sampler.num_samples, &cell)?;
        let report = eval(&generated, &paths.test, &paths.adjacency, method.as_str(), Some(steps), Some(&cell))?;
        rows.push(SweepRow { method, steps, report });
    }
    Ok(rows)
}

/// Generates (or ingests) the dataset once, trains one checkpoint per method,
/// samples every step count from it and writes `sweep.csv`. Methods run on
/// separate threads; each owns its subdirectory.
pub fn sweep(config: &RunConfig, out: &Path) -> Result<Vec<SweepRow>> {
    config.validate()?;
    create_dir(out)?;
    let paths = gen_data(config, &out.join("data"))?;
    let results: Vec<Result<Vec<SweepRow>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .methods
            .iter()
            .map(|&m| {
                let paths = &paths;
                scope.spawn(move || sweep_method(config, m, paths, out))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut rows = vec![];
    for r in results {
        rows.extend(r?);
    }
    write_file(&out.join(SWEEP_FILE), &sweep_csv(&rows))?;
    let mut manifest = Manifest::new("sweep", config);
    manifest.output(out, SWEEP_FILE)?;
    manifest.write(out)?;
    Ok(rows)
}
