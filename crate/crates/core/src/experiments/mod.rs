//! The three diagnostic protocols: data efficiency, concept-to-task
//! dependence and concept-variance fragility.

mod config;
mod data;
mod results;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

pub use config::{ExperimentConfig, ExperimentKind, Method, DEFAULT_FRACTIONS};
pub use data::{prepare, Prepared, RenderedPairs};
pub use results::{
    quantile, read_results_csv, records, summarize, summarize_records, write_results_csv, write_summary_csv,
    ResultRecord, RunResult, SummaryRow, RESULT_COLUMNS,
};

use crate::dataset::ConceptVector;
use crate::error::{Error, Result};
use crate::models::{
    fit_latent_probe, head_argmax, probe_predict, train_cbm, train_cme, train_vae, train_wvae, CbModel, ConceptProbe, VaeMode,
    VaeModel,
};
use crate::metrics::{concept_accuracy, label_accuracy, MetricSeries};
use crate::nn::{argmax_rows, save_network, train_supervised, LossKind, Matrix, Network, Targets, TrainConfig};
use crate::tasks::{loudness_setup, make_task, reduced_schema, TaskSpec};

/// Environment variable capping the number of concurrently running cells.
pub const WORKERS_ENV: &str = "CONCEPTBENCH_WORKERS";

const PREDICT_CHUNK: usize = 256;

#[derive(Default)]
struct CellOutput {
    series: Vec<MetricSeries>,
    notes: Vec<String>,
    artifacts: Vec<PathBuf>,
    failures: Vec<String>,
}

type Cell<'a> = Box<dyn Fn() -> Result<CellOutput> + Send + Sync + 'a>;

fn run_cells(cells: Vec<Cell<'_>>) -> Result<CellOutput> {
    let workers = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&w| w > 0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outputs: Vec<Result<CellOutput>> = pool.install(|| cells.par_iter().map(|c| c()).collect());
    let mut all = CellOutput::default();
    for o in outputs {
        match o {
            Ok(o) => {
                all.series.extend(o.series);
                all.notes.extend(o.notes);
                all.artifacts.extend(o.artifacts);
            }
            Err(e) => all.failures.push(e.to_string()),
        }
    }
    Ok(all)
}

/// Runs the protocol named in `cfg`. Model bundles are written under
/// `artifacts` when given. A failing cell does not abort the others; its
/// error is listed in [`RunResult::failures`].
pub fn run_experiment(cfg: &ExperimentConfig, artifacts: Option<&Path>) -> Result<RunResult> {
    match cfg.experiment {
        ExperimentKind::DataEfficiency => run_data_efficiency(cfg, artifacts),
        ExperimentKind::ConceptTaskDependence => run_concept_task_dependence(cfg, artifacts),
        ExperimentKind::VarianceFragility => run_variance_fragility(cfg, artifacts),
    }
}

fn finish(cfg: &ExperimentConfig, started: Instant, out: CellOutput, hashes: Vec<String>) -> RunResult {
    for n in &out.notes {
        log::warn!("{n}");
    }
    for f in &out.failures {
        log::error!("cell failed: {f}");
    }
    RunResult {
        config: cfg.clone(),
        series: out.series,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        schema_hashes: hashes,
        artifacts: out.artifacts,
        notes: out.notes,
        failures: out.failures,
    }
}

fn chunked<T>(x: &Matrix<f32>, mut f: impl FnMut(&Matrix<f32>) -> Result<Vec<T>>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(x.rows());
    for start in (0..x.rows()).step_by(PREDICT_CHUNK) {
        let rows: Vec<usize> = (start..(start + PREDICT_CHUNK).min(x.rows())).collect();
        out.extend(f(&x.gather_rows(&rows))?);
    }
    Ok(out)
}

fn head_predictions(net: &Network<f32>, segments: &[usize], x: &Matrix<f32>) -> Result<Vec<ConceptVector>> {
    chunked(x, |b| {
        let logits = net.forward(b)?;
        Ok((0..logits.rows()).map(|r| head_argmax(logits.row(r), segments)).collect())
    })
}

fn cbm_labels(m: &CbModel<f32>, x: &Matrix<f32>) -> Result<Vec<usize>> {
    chunked(x, |b| Ok(argmax_rows(&m.predict_label(b)?)))
}

fn latent_means(m: &VaeModel<f32>, x: &Matrix<f32>) -> Result<Matrix<f64>> {
    let rows = chunked(x, |b| Ok(m.encode_means(b)?.to_f64_rows()))?;
    Matrix::from_rows(&rows)
}

fn scored_accuracy(data: &Prepared, pred: &[ConceptVector]) -> Result<Vec<f64>> {
    Ok(data.scored(&concept_accuracy(pred, &data.eval_c)?.per_concept))
}

fn task_accuracy_from_concepts(task: &TaskSpec, data: &Prepared, pred: &[ConceptVector]) -> Result<f64> {
    label_accuracy(&task.labels(pred), &task.labels(&data.eval_c))
}

fn probe_accuracy(
    model: &VaeModel<f32>,
    data: &Prepared,
    probe_rows: &[usize],
    gbt: &crate::gbt::GbtConfig,
) -> Result<(ConceptProbe, Vec<ConceptVector>)> {
    let z = latent_means(model, &data.train_x.gather_rows(probe_rows))?;
    let c: Vec<ConceptVector> = probe_rows.iter().map(|&r| data.train_c[r].clone()).collect();
    let probe = fit_latent_probe(&z, &c, &data.schema.cardinalities(), gbt)?;
    let pred = probe_predict(&probe, &latent_means(model, &data.eval_x)?)?;
    Ok((probe, pred))
}

fn bundle_dir(root: Option<&Path>, parts: &[&str]) -> Option<PathBuf> {
    root.map(|r| r.join(parts.join("_")))
}

fn save_cbm(dir: &Path, m: &CbModel<f32>, schema_hash: &str) -> Result<()> {
    save_network(&m.concept_net, dir, "concept_net")?;
    save_network(&m.label_net, dir, "label_net")?;
    let manifest = json!({
        "kind": "cbm", "regime": m.regime, "lambda": m.lambda, "segments": m.segments, "schema_hash": schema_hash,
    });
    std::fs::write(dir.join("model.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

fn save_wvae(dir: &Path, m: &VaeModel<f32>, probe: &ConceptProbe, schema_hash: &str) -> Result<()> {
    save_network(&m.encoder, dir, "encoder")?;
    save_network(&m.decoder, dir, "decoder")?;
    std::fs::write(dir.join("probe.json"), serde_json::to_vec(probe)?)?;
    let kind = if m.mode == VaeMode::WeakPaired { "wvae" } else { "vae" };
    let manifest = json!({
        "kind": kind, "beta": m.beta, "averaging": m.averaging, "latent_dim": m.latent_dim,
        "likelihood": m.likelihood, "schema_hash": schema_hash,
    });
    std::fs::write(dir.join("model.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

struct CmeFit {
    source: Network<f32>,
    source_accuracy: f64,
    cme: crate::models::CmeModel,
}

/// Trains the source task model on the whole training split, then fits CME
/// on `labelled_count` points of it.
fn fit_cme(cfg: &ExperimentConfig, data: &Prepared, task: &TaskSpec, seed: u64, tcfg: &TrainConfig) -> Result<CmeFit> {
    let labels = task.labels(&data.train_c);
    let mut source = Network::new(cfg.task_model.spec(data.input, task.num_classes), seed)?;
    train_supervised(
        &mut source,
        &data.train_x,
        &Targets::single(task.num_classes, labels.clone()),
        LossKind::SparseCategoricalCe,
        tcfg,
        &mut |_, _| Ok(()),
    )?;
    let predicted = chunked(&data.eval_x, |b| Ok(argmax_rows(&source.forward(b)?)))?;
    let source_accuracy = label_accuracy(&predicted, &task.labels(&data.eval_c))?;
    let layer = match cfg.layer_id {
        Some(l) => l,
        None => source.penultimate_layer().ok_or_else(|| Error::Config("task model has no hidden layer to tap".into()))?,
    };
    let count = cfg.labelled_count.min(data.train_c.len());
    let rows = &data.permutation(seed)[..count];
    let lc: Vec<ConceptVector> = rows.iter().map(|&r| data.train_c[r].clone()).collect();
    let cme = train_cme(
        &source,
        layer,
        &data.train_x.gather_rows(rows),
        &lc,
        &data.train_x,
        &labels,
        &data.schema.cardinalities(),
        task.num_classes,
        &cfg.gbt,
    )?;
    Ok(CmeFit { source, source_accuracy, cme })
}

fn save_cme(dir: &Path, fit: &CmeFit, schema_hash: &str) -> Result<()> {
    save_network(&fit.source, dir, "source")?;
    std::fs::write(dir.join("cme.json"), serde_json::to_vec(&fit.cme)?)?;
    let manifest = json!({
        "kind": "cme", "layer_id": fit.cme.layer_id, "labelled_count": fit.cme.labelled_count,
        "source_accuracy": fit.source_accuracy, "schema_hash": schema_hash,
    });
    std::fs::write(dir.join("model.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

fn train_cfg(cfg: &ExperimentConfig, method: Method, seed: u64, eval_every: usize) -> TrainConfig {
    let epochs = cfg.epochs.get(&method).copied().unwrap_or(cfg.train.epochs);
    TrainConfig { seed, eval_every, epochs, ..cfg.train.clone() }
}

fn new_wvae(cfg: &ExperimentConfig, data: &Prepared, seed: u64) -> Result<VaeModel<f32>> {
    VaeModel::new(data.input, &cfg.vae, VaeMode::WeakPaired, seed)
}

/// Accuracy against the fraction of concept-annotated training points.
pub fn run_data_efficiency(cfg: &ExperimentConfig, artifacts: Option<&Path>) -> Result<RunResult> {
    let started = Instant::now();
    let schema = reduced_schema(cfg.dataset)?;
    let data = prepare(&schema, cfg.resolution, cfg.max_samples, cfg.eval_fraction, cfg.split_seed)?;
    let task = make_task(&schema, cfg.tasks[0])?;
    let hash = schema.hash();
    let mut fractions = cfg.fractions.clone();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    let n = data.train_c.len();
    let min_needed = schema.cardinalities().into_iter().max().unwrap_or(1);

    let mut cells: Vec<Cell> = Vec::new();
    for &method in &cfg.methods {
        for &seed in &cfg.seeds {
            let (data, task, hash, fractions, schema) = (&data, &task, &hash, &fractions, &schema);
            cells.push(Box::new(move || {
                let mut out = CellOutput::default();
                let mut s = MetricSeries::new(
                    cfg.experiment.as_str(),
                    method.as_str(),
                    cfg.dataset.as_str(),
                    task.name.as_str(),
                    seed,
                    hash,
                    "fraction",
                    data.concept_names(),
                );
                let perm = data.permutation(seed);
                let labels = task.labels(&data.train_c);
                for &p in fractions {
                    let count = ((p * n as f64).ceil() as usize).min(n);
                    if count < min_needed {
                        out.notes.push(format!(
                            "{method} seed {seed}: fraction {p} gives {count} labelled points, fewer than the {min_needed} values of the largest concept; skipped"
                        ));
                        continue;
                    }
                    let rows = &perm[..count];
                    let tcfg = train_cfg(cfg, method, seed, usize::MAX);
                    let tag = format!("{p}");
                    let dir = bundle_dir(artifacts, &[method.as_str(), task.name.as_str(), &seed.to_string(), &tag]);
                    match method {
                        Method::Cbm => {
                            let mut m = CbModel::new(data.input, &schema.cardinalities(), task.num_classes, &cfg.cbm, seed)?;
                            let x = data.train_x.gather_rows(rows);
                            let c: Vec<ConceptVector> = rows.iter().map(|&r| data.train_c[r].clone()).collect();
                            let y: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
                            train_cbm(&mut m, &x, &c, &y, &tcfg, cfg.cbm.label_steps, &mut |_, _| Ok(()))?;
                            let pred = head_predictions(&m.concept_net, &m.segments, &data.eval_x)?;
                            let task_acc = label_accuracy(&cbm_labels(&m, &data.eval_x)?, &task.labels(&data.eval_c))?;
                            s.push(p, scored_accuracy(data, &pred)?, Some(task_acc))?;
                            if let Some(d) = dir {
                                save_cbm(&d, &m, hash)?;
                                out.artifacts.push(d);
                            }
                        }
                        Method::Wvae => {
                            let mut m = new_wvae(cfg, data, seed)?;
                            let mut pairs = RenderedPairs::new(data, rows, cfg.pair_k, seed);
                            train_wvae(&mut m, &mut pairs, &tcfg, &mut |_, _| Ok(()))?;
                            let (probe, pred) = probe_accuracy(&m, data, rows, &cfg.gbt)?;
                            let task_acc = task_accuracy_from_concepts(task, data, &pred)?;
                            s.push(p, scored_accuracy(data, &pred)?, Some(task_acc))?;
                            if let Some(d) = dir {
                                save_wvae(&d, &m, &probe, hash)?;
                                out.artifacts.push(d);
                            }
                        }
                        _ => unreachable!("validated method"),
                    }
                }
                out.series.push(s);
                Ok(out)
            }));
        }
    }
    let out = run_cells(cells)?;
    Ok(finish(cfg, started, out, vec![hash.clone()]))
}

/// Source task model per task, CME from a few labels and a full-label CBM
/// as the upper bound.
pub fn run_concept_task_dependence(cfg: &ExperimentConfig, artifacts: Option<&Path>) -> Result<RunResult> {
    let started = Instant::now();
    let schema = reduced_schema(cfg.dataset)?;
    let data = prepare(&schema, cfg.resolution, cfg.max_samples, cfg.eval_fraction, cfg.split_seed)?;
    let hash = schema.hash();
    let n = data.train_c.len();
    let tasks = cfg.tasks.iter().map(|&t| make_task(&schema, t)).collect::<Result<Vec<_>>>()?;

    let mut cells: Vec<Cell> = Vec::new();
    for task in &tasks {
        for &seed in &cfg.seeds {
            let (data, hash, schema) = (&data, &hash, &schema);
            cells.push(Box::new(move || {
                let mut out = CellOutput::default();
                let series = |method: Method, kind: &str| {
                    MetricSeries::new(
                        cfg.experiment.as_str(),
                        method.as_str(),
                        cfg.dataset.as_str(),
                        task.name.as_str(),
                        seed,
                        hash,
                        kind,
                        data.concept_names(),
                    )
                };
                let labels = task.labels(&data.train_c);
                let eval_labels = task.labels(&data.eval_c);
                let seed_s = seed.to_string();
                if cfg.methods.contains(&Method::Cme) {
                    let fit = fit_cme(cfg, data, task, seed, &train_cfg(cfg, Method::Cme, seed, usize::MAX))?;
                    if fit.source_accuracy < 0.9 {
                        out.notes.push(format!(
                            "weak source: {} seed {seed} source model reaches {:.3} task accuracy",
                            task.name, fit.source_accuracy
                        ));
                    }
                    let pred = chunked(&data.eval_x, |b| fit.cme.predict_concepts(&fit.source, b))?;
                    let task_acc = label_accuracy(&chunked(&data.eval_x, |b| fit.cme.predict_label(&fit.source, b))?, &eval_labels)?;
                    out.notes.push(format!(
                        "cme {} seed {seed}: {} labelled of {n} training points ({:.2}%) and of {} in the full grid ({:.2}%)",
                        task.name,
                        fit.cme.labelled_count,
                        100.0 * fit.cme.labelled_fraction,
                        schema.total(),
                        100.0 * fit.cme.labelled_count as f64 / schema.total() as f64
                    ));
                    let mut s = series(Method::Cme, "labelled_fraction");
                    s.push(fit.cme.labelled_fraction, scored_accuracy(data, &pred)?, Some(task_acc))?;
                    out.series.push(s);
                    if let Some(d) = bundle_dir(artifacts, &["cme", task.name.as_str(), &seed_s]) {
                        save_cme(&d, &fit, hash)?;
                        out.artifacts.push(d);
                    }
                }
                if cfg.methods.contains(&Method::Cbm) {
                    let mut m = CbModel::new(data.input, &schema.cardinalities(), task.num_classes, &cfg.cbm, seed)?;
                    let tcfg = train_cfg(cfg, Method::Cbm, seed, usize::MAX);
                    train_cbm(&mut m, &data.train_x, &data.train_c, &labels, &tcfg, cfg.cbm.label_steps, &mut |_, _| Ok(()))?;
                    let pred = head_predictions(&m.concept_net, &m.segments, &data.eval_x)?;
                    let task_acc = label_accuracy(&cbm_labels(&m, &data.eval_x)?, &eval_labels)?;
                    let mut s = series(Method::Cbm, "labelled_fraction");
                    s.push(1.0, scored_accuracy(data, &pred)?, Some(task_acc))?;
                    out.series.push(s);
                    if let Some(d) = bundle_dir(artifacts, &["cbm", task.name.as_str(), &seed_s]) {
                        save_cbm(&d, &m, hash)?;
                        out.artifacts.push(d);
                    }
                }
                Ok(out)
            }));
        }
    }
    let out = run_cells(cells)?;
    Ok(finish(cfg, started, out, vec![hash.clone()]))
}

/// Per-concept accuracy against training step on loudness setups.
pub fn run_variance_fragility(cfg: &ExperimentConfig, artifacts: Option<&Path>) -> Result<RunResult> {
    let started = Instant::now();
    let setups = cfg.setups.iter().map(|s| loudness_setup(s)).collect::<Result<Vec<_>>>()?;
    let prepared = setups
        .iter()
        .map(|s| prepare(&s.schema, cfg.resolution, cfg.max_samples, cfg.eval_fraction, cfg.split_seed))
        .collect::<Result<Vec<_>>>()?;
    let tasks = setups.iter().map(|s| make_task(&s.schema, cfg.tasks[0])).collect::<Result<Vec<_>>>()?;
    let hashes: Vec<String> = setups.iter().map(|s| s.schema.hash()).collect();

    let mut cells: Vec<Cell> = Vec::new();
    for (i, setup) in setups.iter().enumerate() {
        for &method in &cfg.methods {
            for &seed in &cfg.seeds {
                let (data, task, hash) = (&prepared[i], &tasks[i], &hashes[i]);
                cells.push(Box::new(move || {
                    let mut out = CellOutput::default();
                    let mut s = MetricSeries::new(
                        cfg.experiment.as_str(),
                        method.as_str(),
                        setup.schema.dataset_id().as_str(),
                        &setup.name,
                        seed,
                        hash,
                        "step",
                        data.concept_names(),
                    );
                    let n = data.train_c.len();
                    let every = cfg.eval_every.unwrap_or_else(|| cfg.train.steps_per_epoch(n));
                    let tcfg = train_cfg(cfg, method, seed, every);
                    let total = tcfg.total_steps(n);
                    let dir = bundle_dir(artifacts, &[method.as_str(), &setup.name, &seed.to_string()]);
                    match method {
                        Method::Cbm => {
                            let mut m = CbModel::new(data.input, &setup.schema.cardinalities(), task.num_classes, &cfg.cbm, seed)?;
                            let labels = task.labels(&data.train_c);
                            let segments = m.segments.clone();
                            let mut last = 0;
                            train_cbm(&mut m, &data.train_x, &data.train_c, &labels, &tcfg, cfg.cbm.label_steps, &mut |step, net| {
                                let pred = head_predictions(net, &segments, &data.eval_x)?;
                                last = step;
                                s.push(step as f64, scored_accuracy(data, &pred)?, None)
                            })?;
                            if last < total {
                                let pred = head_predictions(&m.concept_net, &segments, &data.eval_x)?;
                                s.push(total as f64, scored_accuracy(data, &pred)?, None)?;
                            }
                            if let Some(d) = dir {
                                save_cbm(&d, &m, hash)?;
                                out.artifacts.push(d);
                            }
                        }
                        Method::Wvae => {
                            let mut m = new_wvae(cfg, data, seed)?;
                            let all: Vec<usize> = (0..n).collect();
                            let probe_rows = data.permutation(seed)[..cfg.probe_labelled.min(n)].to_vec();
                            let mut pairs = RenderedPairs::new(data, &all, cfg.pair_k, seed);
                            let mut last = 0;
                            train_wvae(&mut m, &mut pairs, &tcfg, &mut |step, model| {
                                let (_, pred) = probe_accuracy(model, data, &probe_rows, &cfg.gbt)?;
                                last = step;
                                s.push(step as f64, scored_accuracy(data, &pred)?, None)
                            })?;
                            let (probe, pred) = probe_accuracy(&m, data, &probe_rows, &cfg.gbt)?;
                            if last < total {
                                s.push(total as f64, scored_accuracy(data, &pred)?, None)?;
                            }
                            if let Some(d) = dir {
                                save_wvae(&d, &m, &probe, hash)?;
                                out.artifacts.push(d);
                            }
                        }
                        _ => unreachable!("validated method"),
                    }
                    out.series.push(s);
                    Ok(out)
                }));
            }
        }
    }
    let out = run_cells(cells)?;
    Ok(finish(cfg, started, out, hashes))
}

/// Trains a single model on the whole training split of the configured
/// dataset (or of the first listed setup) with the first seed, writes its
/// bundle to `dir` and returns its held-out accuracies.
pub fn train_model(cfg: &ExperimentConfig, method: Method, dir: &Path) -> Result<MetricSeries> {
    let seed = cfg.seeds[0];
    let (schema, setup) = match cfg.setups.first() {
        Some(name) => (loudness_setup(name)?.schema, name.clone()),
        None => (reduced_schema(cfg.dataset)?, cfg.tasks[0].as_str().to_string()),
    };
    let data = prepare(&schema, cfg.resolution, cfg.max_samples, cfg.eval_fraction, cfg.split_seed)?;
    let task = make_task(&schema, cfg.tasks[0])?;
    let hash = schema.hash();
    let n = data.train_c.len();
    let tcfg = train_cfg(cfg, method, seed, usize::MAX);
    let steps = tcfg.total_steps(n) as f64;
    let mut s = MetricSeries::new("train", method.as_str(), schema.dataset_id().as_str(), &setup, seed, &hash, "step", data.concept_names());
    match method {
        Method::Cbm => {
            let mut m = CbModel::new(data.input, &schema.cardinalities(), task.num_classes, &cfg.cbm, seed)?;
            train_cbm(&mut m, &data.train_x, &data.train_c, &task.labels(&data.train_c), &tcfg, cfg.cbm.label_steps, &mut |_, _| Ok(()))?;
            let pred = head_predictions(&m.concept_net, &m.segments, &data.eval_x)?;
            let task_acc = label_accuracy(&cbm_labels(&m, &data.eval_x)?, &task.labels(&data.eval_c))?;
            s.push(steps, scored_accuracy(&data, &pred)?, Some(task_acc))?;
            save_cbm(dir, &m, &hash)?;
        }
        Method::Vae | Method::Wvae => {
            let mode = if method == Method::Wvae { VaeMode::WeakPaired } else { VaeMode::Unsupervised };
            let mut m = VaeModel::new(data.input, &cfg.vae, mode, seed)?;
            if mode == VaeMode::WeakPaired {
                let all: Vec<usize> = (0..n).collect();
                train_wvae(&mut m, &mut RenderedPairs::new(&data, &all, cfg.pair_k, seed), &tcfg, &mut |_, _| Ok(()))?;
            } else {
                train_vae(&mut m, &data.train_x, &tcfg, &mut |_, _| Ok(()))?;
            }
            let probe_rows = data.permutation(seed)[..cfg.probe_labelled.min(n)].to_vec();
            let (probe, pred) = probe_accuracy(&m, &data, &probe_rows, &cfg.gbt)?;
            s.push(steps, scored_accuracy(&data, &pred)?, Some(task_accuracy_from_concepts(&task, &data, &pred)?))?;
            save_wvae(dir, &m, &probe, &hash)?;
        }
        Method::Cme => {
            let fit = fit_cme(cfg, &data, &task, seed, &tcfg)?;
            let pred = chunked(&data.eval_x, |b| fit.cme.predict_concepts(&fit.source, b))?;
            let labels = chunked(&data.eval_x, |b| fit.cme.predict_label(&fit.source, b))?;
            s.push(steps, scored_accuracy(&data, &pred)?, Some(label_accuracy(&labels, &task.labels(&data.eval_c))?))?;
            save_cme(dir, &fit, &hash)?;
        }
    }
    Ok(s)
}
