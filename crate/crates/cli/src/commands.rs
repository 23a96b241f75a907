use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fairegm::experiment::{make_split, run_cell, split_seed};
use fairegm::io::{export_embeddings, load_dataset, read_embeddings, write_results, write_split, LoadReport, ResultRow, SplitFiles};
use fairegm::metrics::dp_at_ks;
use fairegm::{Dataset, DenseMatrix, EvalConfig, Graph, TrainConfig};
use serde::Serialize;

use crate::config::RunPlan;

#[derive(Debug, Serialize)]
pub struct CellStatus {
    pub dataset: String,
    pub model: String,
    pub split: usize,
    pub seed: u64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
struct LoadedDataset {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<LoadReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    plan: &'a RunPlan,
    datasets: Vec<LoadedDataset>,
    cells: Vec<CellStatus>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_all(plan: &RunPlan) -> (Vec<Option<Dataset>>, Vec<LoadedDataset>) {
    let mut loaded = Vec::new();
    let mut info = Vec::new();
    for d in &plan.datasets {
        match load_dataset(&d.spec) {
            Ok(ds) => {
                eprintln!("loaded {}: {} nodes, {} edges", d.name, ds.graph.num_nodes(), ds.graph.num_edges());
                info.push(LoadedDataset { name: d.name.clone(), report: Some(ds.report.clone()), error: None });
                loaded.push(Some(ds));
            }
            Err(e) => {
                eprintln!("failed to load {}: {e}", d.name);
                info.push(LoadedDataset { name: d.name.clone(), report: None, error: Some(e.to_string()) });
                loaded.push(None);
            }
        }
    }
    (loaded, info)
}

/// Trains and evaluates every (dataset, model, split) cell. Returns the
/// number of failed cells; failures are recorded and the run continues.
pub fn run_grid(plan: &RunPlan, command: &str) -> Result<usize> {
    std::fs::create_dir_all(&plan.out).with_context(|| format!("creating {}", plan.out.display()))?;
    let (datasets, info) = load_all(plan);
    let eval = EvalConfig { ks: plan.k.clone(), ..EvalConfig::default() };
    let mut cells = Vec::new();
    let mut rows = Vec::new();

    for (dplan, ds) in plan.datasets.iter().zip(&datasets) {
        for split_index in 0..plan.splits {
            let seed = split_seed(plan.seed, split_index);
            let split = ds
                .as_ref()
                .ok_or_else(|| anyhow!("dataset did not load"))
                .and_then(|ds| make_split(&ds.graph, seed, plan.test_fraction).map_err(Into::into));
            for &model in &plan.models {
                let name = model.to_string();
                let outcome = split.as_ref().map_err(|e| anyhow!("{e}")).and_then(|split| {
                    let mut cfg = TrainConfig::new(model);
                    cfg.learning_rate = dplan.learning_rate;
                    cfg.epochs = dplan.epochs;
                    cfg.lambda_f = plan.lambda_f;
                    cfg.seed = seed;
                    cfg.threads = plan.threads;
                    let cell = run_cell(split, seed, &cfg, &eval)?;
                    let ds = ds.as_ref().expect("split exists only for loaded datasets");
                    let ids: Vec<String> = split.train_to_original.iter().map(|&v| ds.node_ids[v].clone()).collect();
                    let path = plan
                        .out
                        .join("embeddings")
                        .join(&dplan.name)
                        .join(format!("{name}_split{split_index}.csv"));
                    export_embeddings(&cell.trained.embeddings, split.train.groups(), &ids, &path)?;
                    Ok(cell.record)
                });
                match outcome {
                    Ok(record) => {
                        eprintln!(
                            "{} {name} split {split_index}: auroc {:.4} L_D {:.4e}",
                            dplan.name, record.auroc, record.divergence_sum
                        );
                        rows.push(ResultRow { dataset: dplan.name.clone(), model: name.clone(), record });
                        cells.push(CellStatus {
                            dataset: dplan.name.clone(),
                            model: name,
                            split: split_index,
                            seed,
                            status: "ok",
                            error: None,
                        });
                    }
                    Err(e) => {
                        eprintln!("{} {name} split {split_index} failed: {e:#}", dplan.name);
                        cells.push(CellStatus {
                            dataset: dplan.name.clone(),
                            model: name,
                            split: split_index,
                            seed,
                            status: "failed",
                            error: Some(format!("{e:#}")),
                        });
                    }
                }
            }
        }
    }

    write_results(&rows, &plan.out.join("results.csv"))?;
    let failed = cells.iter().filter(|c| c.status != "ok").count();
    write_json(&plan.out.join("manifest.json"), &Manifest { command, plan, datasets: info, cells })?;
    Ok(failed)
}

/// Writes the held-out splits without training anything.
pub fn run_split(plan: &RunPlan) -> Result<usize> {
    std::fs::create_dir_all(&plan.out).with_context(|| format!("creating {}", plan.out.display()))?;
    let (datasets, info) = load_all(plan);
    let mut cells = Vec::new();
    for (dplan, ds) in plan.datasets.iter().zip(&datasets) {
        for split_index in 0..plan.splits {
            let seed = split_seed(plan.seed, split_index);
            let result = ds.as_ref().ok_or_else(|| anyhow!("dataset did not load")).and_then(|ds| {
                let split = make_split(&ds.graph, seed, plan.test_fraction)?;
                let dir = plan.out.join(&dplan.name).join(format!("split{split_index}"));
                write_split(&SplitFiles::from_split(&split, &ds.node_ids), &dir)?;
                Ok(())
            });
            cells.push(CellStatus {
                dataset: dplan.name.clone(),
                model: String::new(),
                split: split_index,
                seed,
                status: if result.is_ok() { "ok" } else { "failed" },
                error: result.err().map(|e| format!("{e:#}")),
            });
        }
    }
    let failed = cells.iter().filter(|c| c.status != "ok").count();
    write_json(&plan.out.join("manifest.json"), &Manifest { command: "split", plan, datasets: info, cells })?;
    Ok(failed)
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub embeddings: PathBuf,
    pub nodes: usize,
    pub groups: usize,
    pub dp: Vec<(usize, f64)>,
}

/// DP@k of exported embeddings. Groups come from the file unless a dataset
/// is given, in which case its class count is used and node ids must match.
pub fn run_eval(embeddings: &Path, dataset: Option<&Dataset>, ks: &[usize]) -> Result<EvalReport> {
    let table = read_embeddings(embeddings)?;
    let n = table.node_ids.len();
    let (groups, num_groups) = match dataset {
        Some(ds) => {
            let index = ds.index_of();
            let groups = table
                .node_ids
                .iter()
                .map(|id| {
                    index
                        .get(id.as_str())
                        .map(|&v| ds.graph.group_of(v))
                        .ok_or_else(|| anyhow!("node '{id}' is not in dataset {}", ds.name))
                })
                .collect::<Result<Vec<_>>>()?;
            (groups, ds.graph.num_groups())
        }
        None => {
            let k = table.groups.iter().max().map_or(0, |&g| g + 1);
            (table.groups.clone(), k)
        }
    };
    if n == 0 {
        bail!("{} holds no embeddings", embeddings.display());
    }
    let g = Graph::new(n, Vec::new(), DenseMatrix::zeros(n, 1), groups, num_groups)?;
    let dp = dp_at_ks(&table.embeddings, &g, ks)?;
    Ok(EvalReport { embeddings: embeddings.to_path_buf(), nodes: n, groups: num_groups, dp })
}

pub fn print_or_write(report: &impl Serialize, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            write_json(path, report)
        }
        None => {
            println!("{}", serde_json::to_string_pretty(report)?);
            Ok(())
        }
    }
}
