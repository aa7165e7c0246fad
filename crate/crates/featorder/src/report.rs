//! File formats: FOE reports, permutation files, checkpoints and traces.

use std::path::Path;

use serde::{Deserialize, Serialize};

use featorder_core::foe::{FoeReport, COMPLEXITY_INTERPRETATION};
use featorder_core::fusion::{Block, Dims, EpochTrace, FusionParams, BLOCKS};
use featorder_core::graph::FeatureGraph;
use featorder_core::rewiring::LocalOrdering;
use featorder_core::Permutation;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoeSummary {
    pub rank: usize,
    pub dataset: String,
    pub rows: usize,
    pub columns: usize,
    pub thresholds: Vec<f64>,
    pub intrinsic_dims: Vec<usize>,
    pub idf: Vec<f64>,
    pub mean_idf: f64,
    pub success_probability: Vec<f64>,
    pub auc: f64,
    pub psi_star: f64,
    pub sensitivity: f64,
    /// `None` when the score is infinite.
    pub foe: Option<f64>,
    pub foe_infinite: bool,
    pub complexity: f64,
    pub complexity_interpretation: String,
    pub explained_variance: Vec<f64>,
    pub cumulative_variance: Vec<f64>,
    pub zero_variance_columns: Vec<String>,
    pub recommended: bool,
}

impl FoeSummary {
    pub fn new(dataset: String, rows: usize, zero_variance_columns: Vec<String>, r: &FoeReport) -> Self {
        Self {
            rank: 0,
            dataset,
            rows,
            columns: r.spectrum.len(),
            thresholds: r.thresholds.clone(),
            intrinsic_dims: r.intrinsic_dims.clone(),
            idf: r.idfs.clone(),
            mean_idf: r.mean_idf,
            success_probability: r.success_probs.clone(),
            auc: r.auc,
            psi_star: r.psi_star,
            sensitivity: r.sensitivity_s,
            foe: r.foe.value(),
            foe_infinite: r.foe.value().is_none(),
            complexity: r.complexity,
            complexity_interpretation: COMPLEXITY_INTERPRETATION.to_string(),
            explained_variance: r.spectrum.explained().to_vec(),
            cumulative_variance: r.spectrum.cumulative().to_vec(),
            zero_variance_columns,
            recommended: featorder_core::foe::ordering_recommended(r),
        }
    }

    pub fn verdict(&self) -> String {
        let v = if self.recommended { "ordering recommended" } else { "ordering not recommended" };
        format!("{}: {v} (mean IDF {:.5})", self.dataset, self.mean_idf)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub datasets: Vec<FoeSummary>,
}

impl AnalyzeReport {
    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    /// One row per dataset; list-valued fields are joined with `;`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "rank",
            "dataset",
            "rows",
            "columns",
            "thresholds",
            "intrinsic_dims",
            "success_probability",
            "mean_idf",
            "auc",
            "psi_star",
            "foe",
            "complexity",
            "recommended",
        ])
        .map_err(csv_err)?;
        for d in &self.datasets {
            w.write_record([
                d.rank.to_string(),
                d.dataset.clone(),
                d.rows.to_string(),
                d.columns.to_string(),
                join(&d.thresholds),
                join(&d.intrinsic_dims),
                join(&d.success_probability),
                d.mean_idf.to_string(),
                d.auc.to_string(),
                d.psi_star.to_string(),
                d.foe.map_or_else(|| "inf".to_string(), |f| f.to_string()),
                d.complexity.to_string(),
                d.recommended.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(format!("csv output: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| CliError::Usage(format!("csv output: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// The emitted global column order and what it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationFile {
    /// Feature index at each position.
    pub order: Vec<usize>,
    #[serde(default)]
    pub column_names: Vec<String>,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub rank_score: Option<f64>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Importance per original feature.
    #[serde(default)]
    pub importance: Vec<f64>,
    #[serde(default)]
    pub coherence_penalty: Option<f64>,
    #[serde(default)]
    pub local_quality: Vec<f64>,
}

impl PermutationFile {
    /// Single `order` column of feature indices.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["order"]).map_err(csv_err)?;
        for f in &self.order {
            w.write_record([f.to_string()]).map_err(csv_err)?;
        }
        finish_csv(w)
    }

    /// Reads either format; JSON is recognised by a leading `{`.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let bad = |message: String| CliError::Format { path: path.to_path_buf(), message };
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text).map_err(|e| bad(e.to_string()));
        }
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut order = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let cell = rec.get(0).unwrap_or("").trim();
            order.push(cell.parse().map_err(|_| bad(format!("'{cell}' is not a feature index")))?);
        }
        Ok(Self {
            order,
            column_names: Vec::new(),
            score: None,
            rank_score: None,
            alphas: Vec::new(),
            importance: Vec::new(),
            coherence_penalty: None,
            local_quality: Vec::new(),
        })
    }

    pub fn permutation(&self, path: &Path) -> Result<Permutation> {
        Permutation::new(self.order.clone()).map_err(|e| CliError::Format { path: path.to_path_buf(), message: e.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RoundLine {
    cluster: usize,
    round: usize,
    quality: f64,
    candidate_quality: f64,
    accepted: bool,
    edges_pruned: usize,
    edges_added: usize,
    clamped: usize,
    mutated: bool,
}

/// One JSON object per rewiring round, clusters in order.
pub fn rewiring_trace(locals: &[LocalOrdering]) -> Result<String> {
    let mut out = String::new();
    for l in locals {
        for t in &l.trace {
            let line = RoundLine {
                cluster: l.cluster_id,
                round: t.round,
                quality: t.quality,
                candidate_quality: t.candidate_quality,
                accepted: t.accepted,
                edges_pruned: t.edges_pruned,
                edges_added: t.edges_added,
                clamped: t.clamped,
                mutated: t.mutated,
            };
            out.push_str(&serde_json::to_string(&line).map_err(|e| CliError::Usage(e.to_string()))?);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Edge list `cluster_id,u,v,weight` over all graphs.
pub fn edge_list(graphs: &[FeatureGraph]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cluster_id", "u", "v", "weight"]).map_err(csv_err)?;
    for (j, g) in graphs.iter().enumerate() {
        for (u, v, wt) in g.edges() {
            w.write_record([j.to_string(), u.to_string(), v.to_string(), wt.to_string()]).map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

/// Loss trace with columns `epoch,task_loss,p_d,p_g,total`.
pub fn loss_trace(trace: &[EpochTrace]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "task_loss", "p_d", "p_g", "total"]).map_err(csv_err)?;
    for t in trace {
        w.write_record([
            t.epoch.to_string(),
            t.task_loss.to_string(),
            t.p_d.to_string(),
            t.p_g.to_string(),
            t.total.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

pub const CHECKPOINT_FORMAT: &str = "featorder-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimsJson {
    pub m: usize,
    pub d: usize,
    pub dk: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossJson {
    pub task: String,
    pub mode: String,
    pub lambda_d: f64,
    pub lambda_g: f64,
    pub lambda_reg: f64,
    pub class_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingJson {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub init_scale: f64,
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockJson {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// Everything needed to rebuild and apply a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dims: DimsJson,
    pub loss: LossJson,
    pub training: TrainingJson,
    pub column_names: Vec<String>,
    pub classes: Option<Vec<String>>,
    /// Column means and sample standard deviations used to standardize inputs.
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub order: Vec<usize>,
    pub gamma: Vec<f64>,
    pub coherence_penalty: f64,
    pub final_loss: Option<f64>,
    pub train_metric: String,
    pub train_metric_value: f64,
    pub blocks: Vec<BlockJson>,
}

pub fn blocks_of(params: &FusionParams) -> Vec<BlockJson> {
    BLOCKS
        .iter()
        .map(|&b| {
            let (r, c) = b.shape(params.dims());
            BlockJson { name: b.name().to_string(), shape: [r, c], values: params.block(b).to_vec() }
        })
        .collect()
}

impl Checkpoint {
    /// Rebuilds the parameter vector, checking block names and shapes.
    pub fn params(&self) -> std::result::Result<FusionParams, String> {
        let dims = Dims { m: self.dims.m, d: self.dims.d, dk: self.dims.dk, outputs: self.dims.outputs };
        if self.blocks.len() != BLOCKS.len() {
            return Err(format!("expected {} parameter blocks, found {}", BLOCKS.len(), self.blocks.len()));
        }
        let mut values = Vec::new();
        for (b, j) in BLOCKS.iter().zip(&self.blocks) {
            let (r, c) = Block::shape(*b, &dims);
            if j.name != b.name() || j.shape != [r, c] || j.values.len() != r * c {
                return Err(format!("block '{}' does not match the stored dimensions", j.name));
            }
            values.extend_from_slice(&j.values);
        }
        FusionParams::from_values(dims, values).map_err(|e| e.to_string())
    }
}
