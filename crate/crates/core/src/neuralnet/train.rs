//! Full-batch training loop with the four stopping criteria: goal MSE,
//! consecutive validation failures, gradient-norm floor, epoch budget.

use std::fmt;
use std::time::Instant;

use super::{loss_and_gradients, mse, Mlp, NetError, RpropParams, RpropState};
use crate::encoder::{split, Dataset};

/// Training-loop configuration.
///
/// `learning_rate` is recorded for completeness but has no effect: RPROP
/// step sizes are adapted per weight and never consult it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub goal: f64,
    pub max_epochs: usize,
    pub max_fail: usize,
    pub min_grad: f64,
    pub val_fraction: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub rprop: RpropParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            goal: 0.0,
            max_epochs: 5000,
            max_fail: 6,
            min_grad: 1e-6,
            val_fraction: 0.15,
            learning_rate: 0.01,
            seed: 0,
            rprop: RpropParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.max_fail < 1 {
            return Err(NetError::InvalidConfig("max_fail must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(NetError::InvalidConfig(
                "val_fraction must be in [0, 1)".into(),
            ));
        }
        if !(self.min_grad > 0.0) {
            return Err(NetError::InvalidConfig("min_grad must be positive".into()));
        }
        if self.max_epochs < 1 {
            return Err(NetError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        self.rprop
            .validate()
            .map_err(|e| NetError::InvalidConfig(e.to_string()))
    }
}

/// Why training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Training MSE reached the goal.
    Goal,
    /// Validation MSE failed to improve for `max_fail` consecutive epochs.
    MaxFail,
    /// Gradient infinity-norm fell below `min_grad`.
    MinGrad,
    /// Epoch budget exhausted.
    MaxEpochs,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Goal => "goal",
            StopReason::MaxFail => "max_fail",
            StopReason::MinGrad => "min_grad",
            StopReason::MaxEpochs => "max_epochs",
        })
    }
}

/// Train and validation MSE of one epoch, measured before that epoch's
/// weight update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    pub epochs_used: usize,
    pub wall_seconds: f64,
    /// 1-based epoch whose weights were returned: the best-validation epoch
    /// on a `MaxFail` stop, the last epoch otherwise.
    pub returned_epoch: usize,
}

impl TrainLog {
    /// Training MSE of the returned weights.
    pub fn final_train_mse(&self) -> f64 {
        self.epochs[self.returned_epoch - 1].train_mse
    }

    /// Running minimum of validation MSE, one entry per epoch with
    /// validation data.
    pub fn best_val_history(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        let mut out = Vec::new();
        for record in &self.epochs {
            if let Some(v) = record.val_mse {
                best = best.min(v);
                out.push(best);
            }
        }
        out
    }
}

fn dataset_mse(mlp: &Mlp, data: &Dataset) -> Result<f64, NetError> {
    let mut preds = Vec::with_capacity(data.len());
    for row in data.rows() {
        preds.push(mlp.forward(row.values())?);
    }
    mse(&preds, data.targets())
}

/// Train a network on `train_set`.
///
/// A seed-deterministic `val_fraction` share of the rows is held out for
/// early stopping; the rest feeds the full-batch gradient. Returns the
/// trained network and the epoch-by-epoch log.
pub fn train(
    mlp: Mlp,
    train_set: &Dataset,
    config: &TrainConfig,
) -> Result<(Mlp, TrainLog), NetError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    if train_set.mode().width() != mlp.n_out {
        return Err(NetError::ModeMismatch {
            dataset: train_set.mode().width(),
            network: mlp.n_out,
        });
    }

    let n_val = (config.val_fraction * train_set.len() as f64).floor() as usize;
    if n_val >= train_set.len() {
        return Err(NetError::ValFractionTooLarge { held_out: n_val });
    }
    let (fit_set, val_set) = split(train_set, n_val, config.seed)
        .map_err(|_| NetError::ValFractionTooLarge { held_out: n_val })?;

    let started = Instant::now();
    let mut mlp = mlp;
    let mut state = RpropState::new(&mlp, config.rprop)?;
    let mut log_epochs = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_snapshot: Option<(usize, Mlp)> = None;
    let mut fail_count = 0usize;

    let mut stop_reason = StopReason::MaxEpochs;
    let mut returned_epoch = config.max_epochs;

    for epoch in 1..=config.max_epochs {
        let (train_mse, grads) = loss_and_gradients(&mlp, &fit_set)?;
        let val_mse = if val_set.is_empty() {
            None
        } else {
            Some(dataset_mse(&mlp, &val_set)?)
        };
        log_epochs.push(EpochRecord { train_mse, val_mse });

        if let Some(v) = val_mse {
            if v < best_val {
                best_val = v;
                best_snapshot = Some((epoch, mlp.clone()));
                fail_count = 0;
            } else {
                fail_count += 1;
            }
        }

        if train_mse <= config.goal {
            stop_reason = StopReason::Goal;
            returned_epoch = epoch;
            break;
        }
        if val_mse.is_some() && fail_count >= config.max_fail {
            stop_reason = StopReason::MaxFail;
            let (best_epoch, snapshot) = best_snapshot.take().expect("an improving epoch precedes any failure");
            mlp = snapshot;
            returned_epoch = best_epoch;
            break;
        }
        if grads.inf_norm() < config.min_grad {
            stop_reason = StopReason::MinGrad;
            returned_epoch = epoch;
            break;
        }
        if epoch == config.max_epochs {
            stop_reason = StopReason::MaxEpochs;
            returned_epoch = epoch;
            break;
        }

        super::rprop_step(&mut mlp, &grads, &mut state)?;
    }

    let log = TrainLog {
        epochs_used: log_epochs.len(),
        epochs: log_epochs,
        stop_reason,
        wall_seconds: started.elapsed().as_secs_f64(),
        returned_epoch,
    };
    Ok((mlp, log))
}
