//! Repeated random train/test evaluation with SROCC, KROCC and mapped PLCC.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{krocc, plcc, srocc};
use crate::dataset::{Dataset, GeometryChoice};
use crate::error::{Error, Result};
use crate::features::{depth_features, ExtractionConfig};
use crate::metrics::{overall_features, IqaMetric};
use crate::svr::{grid_search, svr_train, SvrParams};

pub const MIN_ENTRIES: usize = 10;
pub const MIN_TEST: usize = 5;
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Depth,
    Overall,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "depth" => Ok(Task::Depth),
            "overall" => Ok(Task::Overall),
            other => Err(Error::InvalidArgument(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    Random,
    ByContent,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(SplitMode::Random),
            "by-content" | "bycontent" | "by_content" => Ok(SplitMode::ByContent),
            other => Err(Error::InvalidArgument(format!("unknown split mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub extraction: ExtractionConfig,
    pub metric: IqaMetric,
    pub geometry: GeometryChoice,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            extraction: ExtractionConfig::default(),
            metric: IqaMetric::MsSsim,
            geometry: GeometryChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub iterations: usize,
    pub seed: u64,
    pub split: SplitMode,
    pub svr: SvrParams,
    pub grid_search: bool,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            iterations: 1000,
            seed: 0,
            split: SplitMode::Random,
            svr: SvrParams::default(),
            grid_search: false,
        }
    }
}

/// Feature rows for every dataset entry, in manifest order.
///
/// Entries are processed in parallel on the current rayon pool; the output
/// does not depend on the pool size.
pub fn extract_features(dataset: &Dataset, task: Task, options: &FeatureOptions) -> Result<Vec<Vec<f64>>> {
    dataset
        .entries
        .par_iter()
        .map(|entry| {
            let distorted = dataset.load_distorted(entry, options.geometry)?;
            let config = options.extraction.for_geometry(distorted.geometry());
            match task {
                Task::Depth => Ok(depth_features(&distorted, &config)?.values().to_vec()),
                Task::Overall => {
                    let reference = dataset.load_reference(entry, options.geometry)?;
                    Ok(overall_features(&reference, &distorted, options.metric, &config)?
                        .values()
                        .to_vec())
                }
            }
        })
        .collect()
}

/// Ground-truth labels for a task; overall labels must all be present.
pub fn labels(dataset: &Dataset, task: Task) -> Result<Vec<f64>> {
    dataset
        .entries
        .iter()
        .map(|e| match task {
            Task::Depth => Ok(e.mos_depth),
            Task::Overall => e
                .mos_overall
                .ok_or_else(|| Error::Manifest(format!("'{}' has no mos_overall label", e.id))),
        })
        .collect()
}

fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

/// Train/test indices of one iteration. The test side holds 20% of the
/// entries (at least [`MIN_TEST`]); with [`SplitMode::ByContent`], whole
/// contents are assigned until the test side reaches that size.
pub fn split_indices(content_ids: &[String], split: SplitMode, seed: u64, iteration: usize) -> (Vec<usize>, Vec<usize>) {
    let n = content_ids.len();
    let target = (((1.0 - TRAIN_FRACTION) * n as f64).round() as usize).clamp(MIN_TEST.min(n), n);
    let mut rng = iteration_rng(seed, iteration);
    let mut is_test = vec![false; n];
    match split {
        SplitMode::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for &i in &order[..target] {
                is_test[i] = true;
            }
        }
        SplitMode::ByContent => {
            let mut contents: Vec<&str> = content_ids
                .iter()
                .map(String::as_str)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            contents.shuffle(&mut rng);
            let mut taken = 0;
            // Keep at least one content for training.
            for content in contents.iter().take(contents.len().saturating_sub(1)) {
                if taken >= target {
                    break;
                }
                for (i, c) in content_ids.iter().enumerate() {
                    if c == content {
                        is_test[i] = true;
                        taken += 1;
                    }
                }
            }
        }
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    let test = (0..n).filter(|&i| is_test[i]).collect();
    (train, test)
}

/// Exact median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iterations: usize,
    pub seed: u64,
    pub srocc: Vec<f64>,
    pub krocc: Vec<f64>,
    pub plcc: Vec<f64>,
    pub median_srocc: f64,
    pub median_krocc: f64,
    pub median_plcc: f64,
    /// Configuration echo: options, task, dataset size and feature width.
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

// An undefined correlation (constant predictions or constant labels in a
// split) carries no ranking information and is scored as zero.
fn defined_or_zero(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::ConstantInput) => Ok(0.0),
        other => other,
    }
}

#[derive(Debug, Clone, Copy)]
struct IterationScores {
    srocc: f64,
    krocc: f64,
    plcc: f64,
}

fn run_iteration(
    features: &[Vec<f64>],
    labels: &[f64],
    content_ids: &[String],
    options: &ProtocolOptions,
    iteration: usize,
) -> Result<IterationScores> {
    let (train, test) = split_indices(content_ids, options.split, options.seed, iteration);
    if train.len() < 2 || test.len() < MIN_TEST {
        return Err(Error::InsufficientData(format!(
            "split {iteration} has {} training and {} test entries",
            train.len(),
            test.len()
        )));
    }
    let train_x: Vec<Vec<f64>> = train.iter().map(|&i| features[i].clone()).collect();
    let train_y: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
    let params = if options.grid_search {
        grid_search(&train_x, &train_y, &options.svr)?
    } else {
        options.svr
    };
    let model = svr_train(&train_x, &train_y, &params)?;
    let predicted: Vec<f64> = test
        .iter()
        .map(|&i| model.predict(&features[i]))
        .collect::<Result<_>>()?;
    let truth: Vec<f64> = test.iter().map(|&i| labels[i]).collect();
    Ok(IterationScores {
        srocc: defined_or_zero(srocc(&predicted, &truth))?,
        krocc: defined_or_zero(krocc(&predicted, &truth))?,
        plcc: defined_or_zero(plcc(&predicted, &truth, true))?,
    })
}

/// Runs the repeated-split protocol on precomputed features.
///
/// Iteration `i` draws its split from a ChaCha stream `i` keyed by `seed`,
/// so any two feature sets evaluated with the same seed, labels and content
/// ids see identical splits. Iterations run on the current rayon pool and
/// are collected by index.
pub fn run_protocol_on_features(
    features: &[Vec<f64>],
    labels: &[f64],
    content_ids: &[String],
    options: &ProtocolOptions,
    config_echo: serde_json::Value,
) -> Result<EvalReport> {
    let n = features.len();
    if labels.len() != n || content_ids.len() != n {
        return Err(Error::LengthMismatch(n, labels.len().min(content_ids.len())));
    }
    if n < MIN_ENTRIES {
        return Err(Error::InsufficientData(format!(
            "evaluation needs at least {MIN_ENTRIES} entries, got {n}"
        )));
    }
    if options.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    let scores: Vec<IterationScores> = (0..options.iterations)
        .into_par_iter()
        .map(|i| run_iteration(features, labels, content_ids, options, i))
        .collect::<Result<_>>()?;
    let srocc: Vec<f64> = scores.iter().map(|s| s.srocc).collect();
    let krocc: Vec<f64> = scores.iter().map(|s| s.krocc).collect();
    let plcc: Vec<f64> = scores.iter().map(|s| s.plcc).collect();
    Ok(EvalReport {
        iterations: options.iterations,
        seed: options.seed,
        median_srocc: median(&srocc),
        median_krocc: median(&krocc),
        median_plcc: median(&plcc),
        srocc,
        krocc,
        plcc,
        config: config_echo,
    })
}

/// Extracts (cached) features once, then runs the repeated-split protocol.
pub fn run_protocol(
    dataset: &Dataset,
    task: Task,
    features: &FeatureOptions,
    options: &ProtocolOptions,
) -> Result<EvalReport> {
    if dataset.len() < MIN_ENTRIES {
        return Err(Error::InsufficientData(format!(
            "evaluation needs at least {MIN_ENTRIES} entries, got {}",
            dataset.len()
        )));
    }
    if task == Task::Overall {
        if let Some(e) = dataset.entries.iter().find(|e| !e.has_reference()) {
            return Err(Error::Manifest(format!("'{}' has no reference views", e.id)));
        }
    }
    let y = labels(dataset, task)?;
    let x = extract_features(dataset, task, features)?;
    let content: Vec<String> = dataset.entries.iter().map(|e| e.content_id.clone()).collect();
    let echo = serde_json::json!({
        "task": task,
        "entries": dataset.len(),
        "feature_dim": x.first().map_or(0, Vec::len),
        "features": features,
        "protocol": options,
    });
    run_protocol_on_features(&x, &y, &content, options, echo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize, contents: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{}", i % contents)).collect()
    }

    #[test]
    fn median_exact() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn random_split_sizes() {
        let c = ids(60, 6);
        let (train, test) = split_indices(&c, SplitMode::Random, 1, 0);
        assert_eq!((train.len(), test.len()), (48, 12));
        let (_, test10) = split_indices(&ids(10, 2), SplitMode::Random, 1, 0);
        assert_eq!(test10.len(), MIN_TEST);
        let again = split_indices(&c, SplitMode::Random, 1, 0);
        assert_eq!(again.1, test);
        let other = split_indices(&c, SplitMode::Random, 1, 1);
        assert_ne!(other.1, test);
    }

    #[test]
    fn by_content_split_separates_contents() {
        let c = ids(60, 6);
        for it in 0..50 {
            let (train, test) = split_indices(&c, SplitMode::ByContent, 9, it);
            let a: BTreeSet<&String> = train.iter().map(|&i| &c[i]).collect();
            let b: BTreeSet<&String> = test.iter().map(|&i| &c[i]).collect();
            assert!(a.is_disjoint(&b));
            assert!(test.len() >= 12);
            assert!(!train.is_empty());
        }
    }

    #[test]
    fn learnable_labels_give_high_rank_correlation() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 * 0.25, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + r[0] * 0.4).collect();
        let opts = ProtocolOptions {
            iterations: 10,
            seed: 3,
            ..Default::default()
        };
        let report = run_protocol_on_features(&x, &y, &ids(40, 4), &opts, serde_json::Value::Null).unwrap();
        assert!(report.median_srocc > 0.95, "{}", report.median_srocc);
        assert_eq!(report.srocc.len(), 10);
    }

    #[test]
    fn too_few_entries() {
        let x = vec![vec![1.0]; 9];
        let y = vec![1.0; 9];
        let opts = ProtocolOptions::default();
        assert!(matches!(
            run_protocol_on_features(&x, &y, &ids(9, 3), &opts, serde_json::Value::Null),
            Err(Error::InsufficientData(_))
        ));
    }
}
