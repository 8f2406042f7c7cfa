//! From-scratch three-layer feed-forward network: tanh hidden layer, linear
//! or tanh output, exact full-batch backpropagation, RPROP updates and the
//! training loop.
//!
//! All arithmetic is in `f64`. MSE accumulation uses pairwise summation so
//! the value is bit-stable regardless of how a batch was assembled.

mod model_file;
mod rprop;
mod train;

pub use model_file::Model;
pub use rprop::{rprop_step, RpropParams, RpropState};
pub use train::{train, EpochRecord, StopReason, TrainConfig, TrainLog};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::encoder::Dataset;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("every layer size must be at least 1, got {0:?}")]
    InvalidLayerSize([usize; 3]),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input value")]
    NonFiniteInput,
    #[error("shape mismatch between predictions and targets")]
    ShapeMismatch,
    #[error("empty batch")]
    EmptyBatch,
    #[error("dataset target width {dataset} does not match network output width {network}")]
    ModeMismatch { dataset: usize, network: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("validation hold-out of {held_out} rows leaves no training data")]
    ValFractionTooLarge { held_out: usize },
    #[error("model file line {line}: {reason}")]
    ModelParse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Activation applied to the output layer. The hidden layer is always
/// tan-sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    /// Identity output; pairs with scalar group-ID targets.
    Linear,
    /// Tanh output; pairs with one-hot targets.
    TanSigmoid,
}

impl OutputActivation {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputActivation::Linear => "linear",
            OutputActivation::TanSigmoid => "tanh",
        }
    }

    pub fn parse(text: &str) -> Option<OutputActivation> {
        match text {
            "linear" => Some(OutputActivation::Linear),
            "tanh" => Some(OutputActivation::TanSigmoid),
            _ => None,
        }
    }
}

/// Three-layer perceptron. Weight matrices are row-major: `w1` is
/// `n_hidden x n_in`, `w2` is `n_out x n_hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub output_activation: OutputActivation,
}

/// Initialize a network with weights and biases drawn uniformly from
/// [-1/sqrt(fan_in), +1/sqrt(fan_in)], deterministic per seed.
pub fn init_mlp(
    layer_sizes: [usize; 3],
    output_activation: OutputActivation,
    seed: u64,
) -> Result<Mlp, NetError> {
    let [n_in, n_hidden, n_out] = layer_sizes;
    if n_in < 1 || n_hidden < 1 || n_out < 1 {
        return Err(NetError::InvalidLayerSize(layer_sizes));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |count: usize, fan_in: usize| -> Vec<f64> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        (0..count).map(|_| rng.gen_range(-bound..=bound)).collect()
    };
    let w1 = draw(n_hidden * n_in, n_in);
    let b1 = draw(n_hidden, n_in);
    let w2 = draw(n_out * n_hidden, n_hidden);
    let b2 = draw(n_out, n_hidden);
    Ok(Mlp {
        n_in,
        n_hidden,
        n_out,
        w1,
        b1,
        w2,
        b2,
        output_activation,
    })
}

impl Mlp {
    /// Hidden activations for one input: `tanh(W1 x + b1)`.
    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let mut h = Vec::with_capacity(self.n_hidden);
        for j in 0..self.n_hidden {
            let mut z = self.b1[j];
            let row = &self.w1[j * self.n_in..(j + 1) * self.n_in];
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            h.push(z.tanh());
        }
        h
    }

    fn output_from_hidden(&self, h: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_out);
        for k in 0..self.n_out {
            let mut z = self.b2[k];
            let row = &self.w2[k * self.n_hidden..(k + 1) * self.n_hidden];
            for (w, hj) in row.iter().zip(h) {
                z += w * hj;
            }
            out.push(match self.output_activation {
                OutputActivation::Linear => z,
                OutputActivation::TanSigmoid => z.tanh(),
            });
        }
        out
    }

    /// Forward pass for one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        if x.len() != self.n_in {
            return Err(NetError::DimensionMismatch {
                expected: self.n_in,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFiniteInput);
        }
        Ok(self.output_from_hidden(&self.hidden(x)))
    }
}

/// Pairwise (cascade) summation; bit-stable for a fixed element order and
/// far less drift than naive accumulation on long batches.
fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean squared error over all outputs and samples.
pub fn mse(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, NetError> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(if predictions.is_empty() {
            NetError::EmptyBatch
        } else {
            NetError::ShapeMismatch
        });
    }
    let width = targets[0].len();
    let mut squares = Vec::with_capacity(predictions.len() * width);
    for (pred, target) in predictions.iter().zip(targets) {
        if pred.len() != target.len() || target.len() != width {
            return Err(NetError::ShapeMismatch);
        }
        for (p, t) in pred.iter().zip(target) {
            let d = p - t;
            squares.push(d * d);
        }
    }
    Ok(pairwise_sum(&squares) / squares.len() as f64)
}

/// Gradients with the same shapes as the corresponding weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros_like(mlp: &Mlp) -> Gradients {
        Gradients {
            w1: vec![0.0; mlp.w1.len()],
            b1: vec![0.0; mlp.b1.len()],
            w2: vec![0.0; mlp.w2.len()],
            b2: vec![0.0; mlp.b2.len()],
        }
    }

    /// Infinity norm over every gradient component.
    pub fn inf_norm(&self) -> f64 {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |acc, g| acc.max(g.abs()))
    }
}

/// Exact gradient of the batch MSE with respect to every weight and bias,
/// plus the batch MSE itself (computed from the same forward passes).
pub(crate) fn loss_and_gradients(
    mlp: &Mlp,
    batch: &Dataset,
) -> Result<(f64, Gradients), NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    if batch.mode().width() != mlp.n_out {
        return Err(NetError::ModeMismatch {
            dataset: batch.mode().width(),
            network: mlp.n_out,
        });
    }
    if mlp.n_in != 4 {
        return Err(NetError::DimensionMismatch {
            expected: 4,
            got: mlp.n_in,
        });
    }
    let n = batch.len();
    let scale = 2.0 / (n * mlp.n_out) as f64;
    let mut grads = Gradients::zeros_like(mlp);
    let mut squares = Vec::with_capacity(n * mlp.n_out);

    for (row, target) in batch.rows().iter().zip(batch.targets()) {
        let x = row.values();
        let h = mlp.hidden(x);
        let out = mlp.output_from_hidden(&h);

        // delta2 = dL/dz2; includes the 2/(N*m) MSE factor.
        let mut delta2 = Vec::with_capacity(mlp.n_out);
        for k in 0..mlp.n_out {
            let err = out[k] - target[k];
            squares.push(err * err);
            let act_deriv = match mlp.output_activation {
                OutputActivation::Linear => 1.0,
                OutputActivation::TanSigmoid => 1.0 - out[k] * out[k],
            };
            delta2.push(scale * err * act_deriv);
        }

        for k in 0..mlp.n_out {
            let row2 = k * mlp.n_hidden;
            for j in 0..mlp.n_hidden {
                grads.w2[row2 + j] += delta2[k] * h[j];
            }
            grads.b2[k] += delta2[k];
        }

        for j in 0..mlp.n_hidden {
            let mut back = 0.0;
            for k in 0..mlp.n_out {
                back += mlp.w2[k * mlp.n_hidden + j] * delta2[k];
            }
            let delta1 = back * (1.0 - h[j] * h[j]);
            let row1 = j * mlp.n_in;
            for i in 0..mlp.n_in {
                grads.w1[row1 + i] += delta1 * x[i];
            }
            grads.b1[j] += delta1;
        }
    }

    let loss = pairwise_sum(&squares) / squares.len() as f64;
    Ok((loss, grads))
}

/// Exact gradient of the batch MSE with respect to every weight and bias.
pub fn backprop_full_batch(mlp: &Mlp, batch: &Dataset) -> Result<Gradients, NetError> {
    loss_and_gradients(mlp, batch).map(|(_, grads)| grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{Dataset, FeatureRow, TargetMode};

    fn tiny_batch() -> Dataset {
        let rows = vec![
            FeatureRow([0.1, -0.4, 0.7, 0.2]),
            FeatureRow([-0.9, 0.3, 0.5, -0.6]),
            FeatureRow([0.0, 0.0, 1.0, -1.0]),
        ];
        let targets = vec![vec![2.0], vec![5.0], vec![3.0]];
        Dataset::new(rows, targets, TargetMode::Scalar).unwrap()
    }

    #[test]
    fn init_shapes_match_layer_sizes() {
        let mlp = init_mlp([4, 90, 1], OutputActivation::Linear, 7).unwrap();
        assert_eq!(mlp.w1.len(), 90 * 4);
        assert_eq!(mlp.b1.len(), 90);
        assert_eq!(mlp.w2.len(), 90);
        assert_eq!(mlp.b2.len(), 1);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = init_mlp([4, 8, 6], OutputActivation::TanSigmoid, 123).unwrap();
        let b = init_mlp([4, 8, 6], OutputActivation::TanSigmoid, 123).unwrap();
        assert_eq!(a, b);
        let c = init_mlp([4, 8, 6], OutputActivation::TanSigmoid, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_rejects_zero_layer() {
        assert!(init_mlp([4, 0, 1], OutputActivation::Linear, 0).is_err());
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mlp = init_mlp([4, 16, 2], OutputActivation::Linear, 5).unwrap();
        let bound1 = 1.0 / 4.0f64.sqrt();
        let bound2 = 1.0 / 16.0f64.sqrt();
        assert!(mlp.w1.iter().chain(&mlp.b1).all(|w| w.abs() <= bound1));
        assert!(mlp.w2.iter().chain(&mlp.b2).all(|w| w.abs() <= bound2));
    }

    #[test]
    fn forward_zero_network_outputs_zero() {
        for act in [OutputActivation::Linear, OutputActivation::TanSigmoid] {
            let mlp = Mlp {
                n_in: 4,
                n_hidden: 3,
                n_out: 2,
                w1: vec![0.0; 12],
                b1: vec![0.0; 3],
                w2: vec![0.0; 6],
                b2: vec![0.0; 2],
                output_activation: act,
            };
            let out = mlp.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
            assert_eq!(out, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn forward_single_chain_matches_tanh() {
        // 1-1-1 net, w1=1, b1=0, w2=1, b2=0, x=0.5, linear output:
        // expected tanh(0.5).
        let mlp = Mlp {
            n_in: 1,
            n_hidden: 1,
            n_out: 1,
            w1: vec![1.0],
            b1: vec![0.0],
            w2: vec![1.0],
            b2: vec![0.0],
            output_activation: OutputActivation::Linear,
        };
        let out = mlp.forward(&[0.5]).unwrap();
        assert!((out[0] - 0.4621171573).abs() < 1e-9);
        assert_eq!(out[0], 0.5f64.tanh());
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let mlp = init_mlp([4, 3, 1], OutputActivation::Linear, 1).unwrap();
        assert!(matches!(
            mlp.forward(&[1.0, 2.0]),
            Err(NetError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            mlp.forward(&[1.0, f64::NAN, 0.0, 0.0]),
            Err(NetError::NonFiniteInput)
        ));
    }

    #[test]
    fn hidden_activations_stay_inside_unit_interval() {
        let mlp = init_mlp([4, 10, 1], OutputActivation::Linear, 3).unwrap();
        // Strictly inside (-1, 1) wherever tanh has not saturated to the
        // nearest representable 1.0.
        let h = mlp.hidden(&[0.9, -0.4, 2.0, 0.0]);
        assert!(h.iter().all(|v| v.abs() < 1.0));
        // Extreme inputs may round to exactly +-1.0 in f64 but never beyond.
        let h = mlp.hidden(&[1e6, -1e6, 42.0, 0.0]);
        assert!(h.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(
            mse(&[vec![1.0, 2.0]], &[vec![1.0, 2.0]]).unwrap(),
            0.0
        );
        let v = mse(&[vec![6.0]], &[vec![5.9999]]).unwrap();
        assert!((v - 1e-8).abs() < 1e-12);
        assert_eq!(
            mse(&[vec![1.0], vec![1.0]], &[vec![0.0], vec![0.0]]).unwrap(),
            1.0
        );
    }

    #[test]
    fn mse_rejects_bad_shapes() {
        assert!(matches!(mse(&[], &[]), Err(NetError::EmptyBatch)));
        assert!(matches!(
            mse(&[vec![1.0]], &[vec![1.0, 2.0]]),
            Err(NetError::ShapeMismatch)
        ));
    }

    #[test]
    fn zero_error_batch_gives_zero_gradients() {
        // A zero network outputs 0 everywhere; targets of 0 give zero error.
        let mlp = Mlp {
            n_in: 4,
            n_hidden: 3,
            n_out: 1,
            w1: vec![0.0; 12],
            b1: vec![0.0; 3],
            w2: vec![0.0; 3],
            b2: vec![0.0; 1],
            output_activation: OutputActivation::Linear,
        };
        let rows = vec![FeatureRow([1.0, 2.0, 3.0, 4.0])];
        let targets = vec![vec![0.0]];
        // Bypass Dataset target validation (0.0 is not a legal group) by
        // building through new() in scalar mode is fine: new() only checks
        // widths.
        let batch = Dataset::new(rows, targets, TargetMode::Scalar).unwrap();
        let grads = backprop_full_batch(&mlp, &batch).unwrap();
        assert!(grads.w1.iter().all(|&g| g == 0.0));
        assert!(grads.b1.iter().all(|&g| g == 0.0));
        assert!(grads.w2.iter().all(|&g| g == 0.0));
        assert!(grads.b2.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_shapes_match_network() {
        let mlp = init_mlp([4, 5, 1], OutputActivation::Linear, 2).unwrap();
        let grads = backprop_full_batch(&mlp, &tiny_batch()).unwrap();
        assert_eq!(grads.w1.len(), mlp.w1.len());
        assert_eq!(grads.b1.len(), mlp.b1.len());
        assert_eq!(grads.w2.len(), mlp.w2.len());
        assert_eq!(grads.b2.len(), mlp.b2.len());
    }

    #[test]
    fn backprop_rejects_mode_mismatch_and_empty_batch() {
        let mlp = init_mlp([4, 5, 6], OutputActivation::TanSigmoid, 2).unwrap();
        assert!(matches!(
            backprop_full_batch(&mlp, &tiny_batch()),
            Err(NetError::ModeMismatch { .. })
        ));
        let empty = Dataset::new(vec![], vec![], TargetMode::Scalar).unwrap();
        assert!(matches!(
            backprop_full_batch(&mlp, &empty),
            Err(NetError::EmptyBatch)
        ));
    }

    /// Central finite differences of the batch MSE, the independent oracle
    /// for the analytic gradients.
    fn numeric_gradients(mlp: &Mlp, batch: &Dataset, step: f64) -> Gradients {
        let loss = |m: &Mlp| -> f64 {
            let preds: Vec<Vec<f64>> = batch
                .rows()
                .iter()
                .map(|r| m.forward(r.values()).unwrap())
                .collect();
            mse(&preds, batch.targets()).unwrap()
        };
        let mut grads = Gradients::zeros_like(mlp);
        let fields: [(fn(&mut Mlp) -> &mut Vec<f64>, fn(&mut Gradients) -> &mut Vec<f64>); 4] = [
            (|m| &mut m.w1, |g| &mut g.w1),
            (|m| &mut m.b1, |g| &mut g.b1),
            (|m| &mut m.w2, |g| &mut g.w2),
            (|m| &mut m.b2, |g| &mut g.b2),
        ];
        for (get_weights, get_grads) in fields {
            let count = get_weights(&mut mlp.clone()).len();
            for i in 0..count {
                let mut plus = mlp.clone();
                get_weights(&mut plus)[i] += step;
                let mut minus = mlp.clone();
                get_weights(&mut minus)[i] -= step;
                get_grads(&mut grads)[i] = (loss(&plus) - loss(&minus)) / (2.0 * step);
            }
        }
        grads
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for (sizes, act, seed) in [
            ([4usize, 5, 1], OutputActivation::Linear, 11u64),
            ([4, 6, 6], OutputActivation::TanSigmoid, 12),
        ] {
            let mlp = init_mlp(sizes, act, seed).unwrap();
            let mode = if sizes[2] == 1 {
                TargetMode::Scalar
            } else {
                TargetMode::OneHot
            };
            let mut rows = Vec::new();
            let mut targets = Vec::new();
            for s in 0..8u32 {
                let f = s as f64;
                rows.push(FeatureRow([
                    (f * 0.37).sin(),
                    (f * 0.61).cos(),
                    (f * 0.13).sin(),
                    (f * 0.89).cos(),
                ]));
                targets.push(crate::encoder::encode_target((s % 6 + 1) as u8, mode).unwrap());
            }
            let batch = Dataset::new(rows, targets, mode).unwrap();
            let analytic = backprop_full_batch(&mlp, &batch).unwrap();
            let numeric = numeric_gradients(&mlp, &batch, 1e-6);
            for (a, n) in [
                (&analytic.w1, &numeric.w1),
                (&analytic.b1, &numeric.b1),
                (&analytic.w2, &numeric.w2),
                (&analytic.b2, &numeric.b2),
            ] {
                for (x, y) in a.iter().zip(n.iter()) {
                    let tol = 1e-8f64.max(1e-6 * x.abs().max(y.abs()));
                    assert!(
                        (x - y).abs() <= tol,
                        "gradient mismatch: analytic={x}, numeric={y}"
                    );
                }
            }
        }
    }
}
