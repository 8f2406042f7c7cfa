//! Evaluation, the hidden-neuron sweep and the recommendation query: the
//! reporting layer on top of the trained network.

use std::fmt::Write as _;

use thiserror::Error;

use crate::catalog::{AttackType, Catalog, GroupMember};
use crate::encoder::{
    decode_output, encode_sample, split, target_group, Dataset, EncodeError, FeatureRow,
    NormalizationParams, RawSample, TargetMode,
};
use crate::neuralnet::{init_mlp, train, Model, NetError, OutputActivation, TrainConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("dataset mode {dataset:?} does not match model mode {model:?}")]
    ModeMismatch {
        dataset: TargetMode,
        model: TargetMode,
    },
    #[error("neuron counts must be at least 1, got {0}")]
    InvalidNeuronCount(usize),
    #[error("runs must be at least 1")]
    ZeroRuns,
    #[error("no neuron counts given")]
    NoNeuronCounts,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// One evaluated test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// 1-based position in the test set.
    pub sample_index: usize,
    pub actual: Vec<f64>,
    pub expected_group: u8,
    pub decoded_group: u8,
    pub matched: bool,
}

/// Actual-versus-expected table over a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
    pub accuracy: f64,
}

impl EvalTable {
    /// Aligned text table; `limit` truncates the printed rows only, the
    /// accuracy line always covers the full test set.
    pub fn render_text(&self, limit: Option<usize>) -> String {
        let shown = limit.unwrap_or(self.rows.len()).min(self.rows.len());
        let mut out = String::new();
        out.push_str("s/n   actual          expected  decoded  match\n");
        for row in &self.rows[..shown] {
            let actual = row
                .actual
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                out,
                "{:<5} {:<15} {:<9} {:<8} {}",
                row.sample_index,
                actual,
                row.expected_group,
                row.decoded_group,
                if row.matched { "yes" } else { "no" }
            );
        }
        if shown < self.rows.len() {
            let _ = writeln!(out, "... ({} more rows)", self.rows.len() - shown);
        }
        let matches = self.rows.iter().filter(|r| r.matched).count();
        let _ = writeln!(
            out,
            "accuracy: {}/{} = {:.4}",
            matches,
            self.rows.len(),
            self.accuracy
        );
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("sample_index,actual,expected_group,decoded_group,match\n");
        for row in &self.rows {
            let actual = row
                .actual
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(";");
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.sample_index, actual, row.expected_group, row.decoded_group, row.matched
            );
        }
        out
    }
}

fn model_forward(model: &Model, row: &FeatureRow) -> Result<Vec<f64>, ExperimentError> {
    let input = match &model.norm {
        Some(params) => params.apply(row),
        None => *row,
    };
    Ok(model.mlp.forward(input.values())?)
}

/// Run a model over a test set and tabulate actual vs expected output.
/// The test rows must be raw (unnormalized); the model applies its own
/// stored normalization.
pub fn evaluate(model: &Model, test_set: &Dataset) -> Result<EvalTable, ExperimentError> {
    if test_set.is_empty() {
        return Err(ExperimentError::EmptyTestSet);
    }
    if test_set.mode() != model.mode {
        return Err(ExperimentError::ModeMismatch {
            dataset: test_set.mode(),
            model: model.mode,
        });
    }
    let mut rows = Vec::with_capacity(test_set.len());
    let mut matches = 0usize;
    for (i, (row, target)) in test_set.rows().iter().zip(test_set.targets()).enumerate() {
        let actual = model_forward(model, row)?;
        let decoded_group = decode_output(&actual, model.mode)?;
        let expected_group = target_group(target, test_set.mode());
        let matched = decoded_group == expected_group;
        matches += matched as usize;
        rows.push(EvalRow {
            sample_index: i + 1,
            actual,
            expected_group,
            decoded_group,
            matched,
        });
    }
    let accuracy = matches as f64 / rows.len() as f64;
    Ok(EvalTable { rows, accuracy })
}

/// Averages over the runs at one hidden-layer size.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_hidden: usize,
    pub mean_mse: f64,
    pub mean_epochs: f64,
    pub mean_seconds: f64,
}

/// The neuron-sweep report: one row per requested hidden-layer size.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub runs: usize,
}

impl SweepReport {
    pub fn render_text(&self) -> String {
        let mut out = format!("hidden  mean_mse      mean_epochs  mean_seconds  (runs={})\n", self.runs);
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<7} {:<13.6e} {:<12.1} {:.3}",
                row.n_hidden, row.mean_mse, row.mean_epochs, row.mean_seconds
            );
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("n_hidden,mean_mse,mean_epochs,mean_seconds\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.n_hidden, row.mean_mse, row.mean_epochs, row.mean_seconds
            );
        }
        out
    }
}

/// Train `runs` independent networks per neuron count and average final
/// training MSE, epochs used and wall seconds. Run seeds are
/// `master_seed + run_index` so any single run can be re-executed alone.
/// MSE and epoch metrics are deterministic; wall time is not.
pub fn run_sweep(
    dataset: &Dataset,
    neuron_counts: &[usize],
    runs: usize,
    config: &TrainConfig,
    master_seed: u64,
    normalize_inputs: bool,
) -> Result<SweepReport, ExperimentError> {
    if neuron_counts.is_empty() {
        return Err(ExperimentError::NoNeuronCounts);
    }
    if runs == 0 {
        return Err(ExperimentError::ZeroRuns);
    }
    if let Some(&bad) = neuron_counts.iter().find(|&&c| c < 1) {
        return Err(ExperimentError::InvalidNeuronCount(bad));
    }
    let activation = match dataset.mode() {
        TargetMode::Scalar => OutputActivation::Linear,
        TargetMode::OneHot => OutputActivation::TanSigmoid,
    };
    let train_data = if normalize_inputs {
        crate::encoder::normalize(dataset)?.0
    } else {
        dataset.clone()
    };
    let mut rows = Vec::with_capacity(neuron_counts.len());
    for &n_hidden in neuron_counts {
        let mut sum_mse = 0.0;
        let mut sum_epochs = 0.0;
        let mut sum_seconds = 0.0;
        for run in 0..runs {
            let seed = master_seed.wrapping_add(run as u64);
            let mlp = init_mlp([4, n_hidden, dataset.mode().width()], activation, seed)?;
            let run_config = TrainConfig { seed, ..*config };
            let (_, log) = train(mlp, &train_data, &run_config)?;
            sum_mse += log.final_train_mse();
            sum_epochs += log.epochs_used as f64;
            sum_seconds += log.wall_seconds;
        }
        rows.push(SweepRow {
            n_hidden,
            mean_mse: sum_mse / runs as f64,
            mean_epochs: sum_epochs / runs as f64,
            mean_seconds: sum_seconds / runs as f64,
        });
    }
    Ok(SweepReport { rows, runs })
}

/// What a recommendation query accepts: a named sample resolved through the
/// registry, or an already-encoded feature row.
#[derive(Debug, Clone)]
pub enum RecommendInput {
    Sample {
        attack_id: u32,
        resource: String,
        vector: String,
        attack_type: AttackType,
    },
    Features(FeatureRow),
}

/// The suggested security-pattern group for one attack sample.
#[derive(Debug, Clone)]
pub struct Recommendation {
    pub group_id: u8,
    pub category_name: String,
    pub members: Vec<GroupMember>,
    pub raw_output: Vec<f64>,
    /// Non-fatal diagnostics, e.g. an empty member list.
    pub warnings: Vec<String>,
}

/// Encode (if needed), normalize, run the network, decode, and attach the
/// decoded group's security patterns. Exactly the forward pipeline; no
/// hidden adjustments.
pub fn recommend(
    model: &Model,
    input: &RecommendInput,
    catalog: &Catalog,
) -> Result<Recommendation, ExperimentError> {
    let row = match input {
        RecommendInput::Features(row) => *row,
        RecommendInput::Sample {
            attack_id,
            resource,
            vector,
            attack_type,
        } => {
            let raw = RawSample {
                attack_id: *attack_id,
                resource: resource.clone(),
                vector: vector.clone(),
                attack_type: *attack_type,
                target_group: 1, // placeholder; not part of the encoding
            };
            encode_sample(&raw, catalog.registry())?
        }
    };
    let raw_output = model_forward(model, &row)?;
    let group_id = decode_output(&raw_output, model.mode)?;
    let group = &catalog.groups()[(group_id - 1) as usize];
    let mut warnings = Vec::new();
    if group.members.is_empty() {
        warnings.push(format!(
            "group {group_id} ({}) has no security patterns on file",
            group.category.name()
        ));
    }
    Ok(Recommendation {
        group_id,
        category_name: group.category.name().to_string(),
        members: group.members.clone(),
        raw_output,
        warnings,
    })
}

/// Split, train and evaluate once: the end-to-end run behind the `train`
/// and `evaluate` commands, reused by the sweep-style experiments.
pub struct TrainedRun {
    pub model: Model,
    pub train_mse: f64,
    pub epochs_used: usize,
    pub test_accuracy: Option<f64>,
}

/// Train a model on `train_set` (optionally normalizing inputs first) and,
/// when a test set is given, evaluate decoded accuracy on it.
pub fn train_model(
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    n_hidden: usize,
    config: &TrainConfig,
    init_seed: u64,
    normalize_inputs: bool,
) -> Result<TrainedRun, ExperimentError> {
    if n_hidden < 1 {
        return Err(ExperimentError::InvalidNeuronCount(n_hidden));
    }
    let activation = match train_set.mode() {
        TargetMode::Scalar => OutputActivation::Linear,
        TargetMode::OneHot => OutputActivation::TanSigmoid,
    };
    let (fit_data, norm): (Dataset, Option<NormalizationParams>) = if normalize_inputs {
        let (data, params) = crate::encoder::normalize(train_set)?;
        (data, Some(params))
    } else {
        (train_set.clone(), None)
    };
    let mlp = init_mlp([4, n_hidden, train_set.mode().width()], activation, init_seed)?;
    let (trained, log) = train(mlp, &fit_data, config)?;
    let model = Model {
        mlp: trained,
        mode: train_set.mode(),
        norm,
    };
    let test_accuracy = match test_set {
        Some(test) => Some(evaluate(&model, test)?.accuracy),
        None => None,
    };
    Ok(TrainedRun {
        model,
        train_mse: log.final_train_mse(),
        epochs_used: log.epochs_used,
        test_accuracy,
    })
}

/// Split a dataset and keep both halves raw; convenience used by the CLI
/// and the experiments.
pub fn split_raw(
    dataset: &Dataset,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), ExperimentError> {
    Ok(split(dataset, n_test, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encode_target, Dataset, FeatureRow, TargetMode};
    use crate::neuralnet::{Mlp, OutputActivation};

    /// A hand-built model that outputs a fixed value regardless of input:
    /// all weights zero, output bias set per test.
    fn constant_model(output: f64) -> Model {
        Model {
            mlp: Mlp {
                n_in: 4,
                n_hidden: 2,
                n_out: 1,
                w1: vec![0.0; 8],
                b1: vec![0.0; 2],
                w2: vec![0.0; 2],
                b2: vec![output],
                output_activation: OutputActivation::Linear,
            },
            mode: TargetMode::Scalar,
            norm: None,
        }
    }

    fn scalar_dataset(groups: &[u8]) -> Dataset {
        let rows = vec![FeatureRow([1.0, 2.0, 3.0, 1.0]); groups.len()];
        let targets = groups
            .iter()
            .map(|&g| encode_target(g, TargetMode::Scalar).unwrap())
            .collect();
        Dataset::new(rows, targets, TargetMode::Scalar).unwrap()
    }

    #[test]
    fn perfect_model_scores_accuracy_one() {
        let model = constant_model(5.0);
        let table = evaluate(&model, &scalar_dataset(&[5, 5, 5])).unwrap();
        assert_eq!(table.accuracy, 1.0);
        assert!(table.rows.iter().all(|r| r.matched));
    }

    #[test]
    fn accuracy_counts_decoded_matches() {
        // Constant output 5.0 matches group 5 but not group 6.
        let model = constant_model(5.0);
        let table = evaluate(&model, &scalar_dataset(&[5, 6, 5, 6, 5])).unwrap();
        assert_eq!(table.accuracy, 3.0 / 5.0);
        let recomputed =
            table.rows.iter().filter(|r| r.matched).count() as f64 / table.rows.len() as f64;
        assert_eq!(table.accuracy, recomputed);
    }

    #[test]
    fn reported_decodes_follow_the_decode_rule() {
        // 1.7707 decodes to 2 (a match against expected 2); 2.6441 against
        // an expected 6 is a mismatch decoded as 3.
        let table = evaluate(&constant_model(1.7707), &scalar_dataset(&[2])).unwrap();
        assert_eq!(table.rows[0].decoded_group, 2);
        assert!(table.rows[0].matched);

        let table = evaluate(&constant_model(2.6441), &scalar_dataset(&[6])).unwrap();
        assert_eq!(table.rows[0].decoded_group, 3);
        assert!(!table.rows[0].matched);
    }

    #[test]
    fn evaluate_rejects_empty_and_mismatched_sets() {
        let model = constant_model(1.0);
        let empty = Dataset::new(vec![], vec![], TargetMode::Scalar).unwrap();
        assert!(matches!(
            evaluate(&model, &empty),
            Err(ExperimentError::EmptyTestSet)
        ));
        let onehot = Dataset::new(
            vec![FeatureRow([1.0, 2.0, 3.0, 1.0])],
            vec![encode_target(3, TargetMode::OneHot).unwrap()],
            TargetMode::OneHot,
        )
        .unwrap();
        assert!(matches!(
            evaluate(&model, &onehot),
            Err(ExperimentError::ModeMismatch { .. })
        ));
    }

    #[test]
    fn text_rendering_includes_accuracy_line() {
        let model = constant_model(4.0);
        let table = evaluate(&model, &scalar_dataset(&[4, 4])).unwrap();
        let text = table.render_text(None);
        assert!(text.contains("accuracy: 2/2 = 1.0000"));
        let truncated = table.render_text(Some(1));
        assert!(truncated.contains("(1 more rows)"));
        assert!(truncated.contains("accuracy: 2/2"));
    }
}
