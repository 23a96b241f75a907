use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fairegm::experiment::{DatasetDefaults, DEFAULT_SPLITS, DEFAULT_TEST_FRACTION};
use fairegm::metrics::DEFAULT_KS;
use fairegm::{DatasetKind, DatasetSpec, Variant};
use serde::{Deserialize, Serialize};

/// Everything a run can be configured with. A `--config` JSON file supplies
/// any subset of these keys; command-line flags override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub datasets: Vec<String>,
    pub models: Vec<String>,
    pub splits: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub lambda_f: Option<f64>,
    pub c: Vec<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub k: Vec<usize>,
    pub test_fraction: Option<f64>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    /// Reads either a config file or a `manifest.json` from an earlier run.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(plan) = value.get("plan") {
            let plan: RunPlan = serde_json::from_value(plan.clone())
                .with_context(|| format!("reading the plan in {}", path.display()))?;
            return Ok(plan.into());
        }
        serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `other` replace ours.
    pub fn overlay(mut self, other: FileConfig) -> Self {
        if !other.datasets.is_empty() {
            self.datasets = other.datasets;
        }
        if !other.models.is_empty() {
            self.models = other.models;
        }
        if !other.c.is_empty() {
            self.c = other.c;
        }
        if !other.k.is_empty() {
            self.k = other.k;
        }
        self.splits = other.splits.or(self.splits);
        self.epochs = other.epochs.or(self.epochs);
        self.lr = other.lr.or(self.lr);
        self.lambda_f = other.lambda_f.or(self.lambda_f);
        self.seed = other.seed.or(self.seed);
        self.threads = other.threads.or(self.threads);
        self.test_fraction = other.test_fraction.or(self.test_fraction);
        self.out = other.out.or(self.out);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPlan {
    pub name: String,
    pub spec: DatasetSpec,
    pub learning_rate: f64,
    pub epochs: usize,
}

/// A fully resolved run, written verbatim to `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub datasets: Vec<DatasetPlan>,
    #[serde(with = "model_names")]
    pub models: Vec<Variant>,
    pub splits: usize,
    pub lambda_f: f64,
    pub seed: u64,
    pub threads: usize,
    pub k: Vec<usize>,
    pub test_fraction: f64,
    pub out: PathBuf,
}

impl From<RunPlan> for FileConfig {
    fn from(plan: RunPlan) -> Self {
        let shared = |f: &dyn Fn(&DatasetPlan) -> f64| {
            let first = f(&plan.datasets[0]);
            plan.datasets.iter().all(|d| f(d) == first).then_some(first)
        };
        let lr = shared(&|d| d.learning_rate);
        let epochs = shared(&|d| d.epochs as f64).map(|e| e as usize);
        let mut cs: Vec<usize> = plan
            .models
            .iter()
            .filter_map(|m| match m {
                Variant::Cfo { c } => Some(*c),
                _ => None,
            })
            .collect();
        cs.dedup();
        Self {
            datasets: plan.datasets.iter().map(|d| d.spec.to_string()).collect(),
            models: plan.models.iter().map(|m| m.to_string()).collect(),
            splits: Some(plan.splits),
            epochs,
            lr,
            lambda_f: Some(plan.lambda_f),
            c: cs,
            seed: Some(plan.seed),
            threads: Some(plan.threads),
            k: plan.k,
            test_fraction: Some(plan.test_fraction),
            out: Some(plan.out),
        }
    }
}

mod model_names {
    use fairegm::Variant;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(models: &[Variant], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(models.iter().map(|m| m.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Variant>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|m| m.parse().map_err(D::Error::custom))
            .collect()
    }
}

pub const DEFAULT_MODELS: [&str; 5] = ["Base", "GFO", "CFO", "FEW", "AUG"];
pub const DEFAULT_C: [usize; 2] = [10, 100];

fn parse_models(names: &[String], cs: &[usize], lambda_f: f64) -> Result<Vec<Variant>> {
    let mut out = Vec::new();
    for name in names {
        match name.trim().to_ascii_lowercase().as_str() {
            "cfo" => out.extend(cs.iter().map(|&c| Variant::Cfo { c })),
            "aug" => out.push(Variant::Aug { lambda: lambda_f }),
            _ => out.push(name.parse().with_context(|| format!("model '{name}'"))?),
        }
    }
    if out.is_empty() {
        bail!("no models selected");
    }
    Ok(out)
}

impl FileConfig {
    /// `sweep_c` replaces the model list with one CFO per value of `c`.
    pub fn resolve(&self, sweep_c: bool) -> Result<RunPlan> {
        if self.datasets.is_empty() {
            bail!("no dataset given (use --dataset kind:path)");
        }
        let lambda_f = self.lambda_f.unwrap_or(1.0);
        let cs = if self.c.is_empty() { DEFAULT_C.to_vec() } else { self.c.clone() };
        if cs.contains(&0) {
            bail!("c must be at least 1");
        }
        let models = if sweep_c {
            cs.iter().map(|&c| Variant::Cfo { c }).collect()
        } else if self.models.is_empty() {
            let names: Vec<String> = DEFAULT_MODELS.iter().map(|s| s.to_string()).collect();
            parse_models(&names, &cs, lambda_f)?
        } else {
            parse_models(&self.models, &cs, lambda_f)?
        };
        let datasets = self
            .datasets
            .iter()
            .map(|d| {
                let spec: DatasetSpec = d.parse().with_context(|| format!("dataset '{d}'"))?;
                let name = spec.display_name();
                let defaults = if spec.kind == DatasetKind::PubmedTab {
                    DatasetDefaults::for_name("pubmed")
                } else {
                    DatasetDefaults::for_name(&name)
                };
                Ok(DatasetPlan {
                    name,
                    spec,
                    learning_rate: self.lr.unwrap_or(defaults.learning_rate),
                    epochs: self.epochs.unwrap_or(defaults.epochs),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let splits = self.splits.unwrap_or(if sweep_c { 3 } else { DEFAULT_SPLITS });
        if splits == 0 {
            bail!("--splits must be at least 1");
        }
        Ok(RunPlan {
            datasets,
            models,
            splits,
            lambda_f,
            seed: self.seed.unwrap_or(0),
            threads: self.threads.unwrap_or(1),
            k: if self.k.is_empty() { DEFAULT_KS.to_vec() } else { self.k.clone() },
            test_fraction: self.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION),
            out: self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> FileConfig {
        FileConfig { datasets: vec!["synthetic:nodes=40".into()], ..FileConfig::default() }
    }

    #[test]
    fn defaults_expand_cfo_and_aug() {
        let plan = base().resolve(false).unwrap();
        let names: Vec<String> = plan.models.iter().map(|m| m.to_string()).collect();
        assert_eq!(names, ["Base", "GFO", "CFO10", "CFO100", "FEW", "AUG1"]);
        assert_eq!(plan.splits, 5);
        assert_eq!(plan.k, [10, 20, 40]);
        assert_eq!(plan.datasets[0].epochs, 300);
    }

    #[test]
    fn aug_takes_lambda_f_and_sweep_uses_c() {
        let cfg = FileConfig {
            models: vec!["aug".into(), "AUG:100".into()],
            lambda_f: Some(0.5),
            c: vec![1, 4],
            ..base()
        };
        let plan = cfg.resolve(false).unwrap();
        assert_eq!(plan.models, [Variant::Aug { lambda: 0.5 }, Variant::Aug { lambda: 100.0 }]);
        let sweep = cfg.resolve(true).unwrap();
        assert_eq!(sweep.models, [Variant::Cfo { c: 1 }, Variant::Cfo { c: 4 }]);
        assert_eq!(sweep.splits, 3);
    }

    #[test]
    fn overlay_prefers_flags() {
        let file = FileConfig { epochs: Some(7), seed: Some(3), ..base() };
        let flags = FileConfig { epochs: Some(9), ..FileConfig::default() };
        let merged = file.overlay(flags);
        assert_eq!((merged.epochs, merged.seed), (Some(9), Some(3)));
        assert_eq!(merged.datasets.len(), 1);
    }

    #[test]
    fn pubmed_defaults() {
        let cfg = FileConfig { datasets: vec!["pubmed:/data/Pubmed-Diabetes".into()], ..FileConfig::default() };
        let plan = cfg.resolve(false).unwrap();
        assert_eq!((plan.datasets[0].learning_rate, plan.datasets[0].epochs), (1e-3, 200));
    }

    #[test]
    fn plan_round_trips_through_json() {
        let plan = base().resolve(false).unwrap();
        let text = serde_json::to_string(&plan).unwrap();
        assert!(text.contains(r#""models":["Base","GFO","CFO10","CFO100","FEW","AUG1"]"#));
        assert_eq!(serde_json::from_str::<RunPlan>(&text).unwrap(), plan);
    }

    #[test]
    fn manifest_plan_resolves_to_itself() {
        let cfg = FileConfig { lr: Some(0.5), c: vec![3, 7], ..base() };
        for sweep in [false, true] {
            let plan = cfg.resolve(sweep).unwrap();
            assert_eq!(FileConfig::from(plan.clone()).resolve(sweep).unwrap(), plan);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"epoch": 3}"#).is_err());
    }
}
