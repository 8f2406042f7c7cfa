//! Resilient backpropagation. Only the sign of each gradient component is
//! used; every weight carries its own adaptive step size.
//!
//! The variant implemented is iRPROP-: on a gradient sign change the step
//! size shrinks, the weight is left untouched for that epoch, and the
//! remembered gradient is zeroed so the next epoch is treated as sign-fresh.
//! There is no weight backtracking.

use thiserror::Error;

use super::{Gradients, Mlp, NetError};

/// Step-size control parameters. Defaults are the classic values with an
/// initial step of 0.07.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpropParams {
    pub delta0: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub delta_max: f64,
    pub delta_min: f64,
}

impl Default for RpropParams {
    fn default() -> Self {
        RpropParams {
            delta0: 0.07,
            eta_plus: 1.2,
            eta_minus: 0.5,
            delta_max: 50.0,
            delta_min: 1e-6,
        }
    }
}

#[derive(Debug, Error)]
pub enum RpropParamError {
    #[error("rprop parameters must satisfy eta_plus > 1 > eta_minus > 0")]
    BadEta,
    #[error("rprop parameters must satisfy 0 < delta_min <= delta0 <= delta_max")]
    BadDelta,
}

impl RpropParams {
    pub fn validate(&self) -> Result<(), RpropParamError> {
        if !(self.eta_plus > 1.0 && self.eta_minus > 0.0 && self.eta_minus < 1.0) {
            return Err(RpropParamError::BadEta);
        }
        if !(self.delta_min > 0.0 && self.delta_min <= self.delta0 && self.delta0 <= self.delta_max)
        {
            return Err(RpropParamError::BadDelta);
        }
        Ok(())
    }
}

/// Per-weight step sizes and previous gradients, one entry per weight and
/// bias of the network the state was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct RpropState {
    pub params: RpropParams,
    pub step_w1: Vec<f64>,
    pub step_b1: Vec<f64>,
    pub step_w2: Vec<f64>,
    pub step_b2: Vec<f64>,
    pub prev_w1: Vec<f64>,
    pub prev_b1: Vec<f64>,
    pub prev_w2: Vec<f64>,
    pub prev_b2: Vec<f64>,
}

impl RpropState {
    /// Fresh state: every step size at delta0, every previous gradient 0.
    pub fn new(mlp: &Mlp, params: RpropParams) -> Result<RpropState, NetError> {
        params
            .validate()
            .map_err(|e| NetError::InvalidConfig(e.to_string()))?;
        Ok(RpropState {
            params,
            step_w1: vec![params.delta0; mlp.w1.len()],
            step_b1: vec![params.delta0; mlp.b1.len()],
            step_w2: vec![params.delta0; mlp.w2.len()],
            step_b2: vec![params.delta0; mlp.b2.len()],
            prev_w1: vec![0.0; mlp.w1.len()],
            prev_b1: vec![0.0; mlp.b1.len()],
            prev_w2: vec![0.0; mlp.w2.len()],
            prev_b2: vec![0.0; mlp.b2.len()],
        })
    }

    /// Smallest and largest step size currently held.
    pub fn step_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for steps in [&self.step_w1, &self.step_b1, &self.step_w2, &self.step_b2] {
            for &s in steps.iter() {
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        (lo, hi)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn update_slice(
    weights: &mut [f64],
    grads: &[f64],
    steps: &mut [f64],
    prevs: &mut [f64],
    p: &RpropParams,
) {
    for i in 0..weights.len() {
        let g = grads[i];
        let product = g * prevs[i];
        if product > 0.0 {
            steps[i] = (steps[i] * p.eta_plus).min(p.delta_max);
            weights[i] -= sign(g) * steps[i];
            prevs[i] = g;
        } else if product < 0.0 {
            steps[i] = (steps[i] * p.eta_minus).max(p.delta_min);
            // Suppress the update this epoch and forget the sign so the
            // next epoch falls into the product == 0 branch.
            prevs[i] = 0.0;
        } else {
            weights[i] -= sign(g) * steps[i];
            prevs[i] = g;
        }
    }
}

/// Apply one RPROP update in place. Gradient shapes must match the state.
pub fn rprop_step(
    mlp: &mut Mlp,
    grads: &Gradients,
    state: &mut RpropState,
) -> Result<(), NetError> {
    for (weights, grad) in [
        (mlp.w1.len(), grads.w1.len()),
        (mlp.b1.len(), grads.b1.len()),
        (mlp.w2.len(), grads.w2.len()),
        (mlp.b2.len(), grads.b2.len()),
        (mlp.w1.len(), state.step_w1.len()),
        (mlp.b1.len(), state.step_b1.len()),
        (mlp.w2.len(), state.step_w2.len()),
        (mlp.b2.len(), state.step_b2.len()),
    ] {
        if weights != grad {
            return Err(NetError::DimensionMismatch {
                expected: weights,
                got: grad,
            });
        }
    }
    let p = state.params;
    update_slice(&mut mlp.w1, &grads.w1, &mut state.step_w1, &mut state.prev_w1, &p);
    update_slice(&mut mlp.b1, &grads.b1, &mut state.step_b1, &mut state.prev_b1, &p);
    update_slice(&mut mlp.w2, &grads.w2, &mut state.step_w2, &mut state.prev_w2, &p);
    update_slice(&mut mlp.b2, &grads.b2, &mut state.step_b2, &mut state.prev_b2, &p);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{init_mlp, OutputActivation};

    fn one_weight_net() -> Mlp {
        Mlp {
            n_in: 1,
            n_hidden: 1,
            n_out: 1,
            w1: vec![1.0],
            b1: vec![0.0],
            w2: vec![0.0],
            b2: vec![0.0],
            output_activation: OutputActivation::Linear,
        }
    }

    fn grads(w1: f64) -> Gradients {
        Gradients {
            w1: vec![w1],
            b1: vec![0.0],
            w2: vec![0.0],
            b2: vec![0.0],
        }
    }

    #[test]
    fn agreement_grows_step_and_moves_against_gradient() {
        let mut mlp = one_weight_net();
        let mut state = RpropState::new(&mlp, RpropParams::default()).unwrap();
        state.step_w1[0] = 0.1;
        state.prev_w1[0] = 1.0;
        rprop_step(&mut mlp, &grads(1.0), &mut state).unwrap();
        assert!((state.step_w1[0] - 0.12).abs() < 1e-15);
        assert!((mlp.w1[0] - (1.0 - 0.12)).abs() < 1e-15);
        assert_eq!(state.prev_w1[0], 1.0);
    }

    #[test]
    fn sign_flip_shrinks_step_and_suppresses_update() {
        let mut mlp = one_weight_net();
        let mut state = RpropState::new(&mlp, RpropParams::default()).unwrap();
        state.step_w1[0] = 0.1;
        state.prev_w1[0] = 1.0;
        rprop_step(&mut mlp, &grads(-1.0), &mut state).unwrap();
        assert!((state.step_w1[0] - 0.05).abs() < 1e-15);
        assert_eq!(mlp.w1[0], 1.0);
        assert_eq!(state.prev_w1[0], 0.0);
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut mlp = one_weight_net();
        let mut state = RpropState::new(&mlp, RpropParams::default()).unwrap();
        state.prev_w1[0] = 0.5;
        rprop_step(&mut mlp, &grads(0.0), &mut state).unwrap();
        assert_eq!(mlp.w1[0], 1.0);
        assert_eq!(state.step_w1[0], RpropParams::default().delta0);
        assert_eq!(state.prev_w1[0], 0.0);
    }

    #[test]
    fn fresh_state_moves_by_delta0() {
        let mut mlp = one_weight_net();
        let mut state = RpropState::new(&mlp, RpropParams::default()).unwrap();
        rprop_step(&mut mlp, &grads(3.5), &mut state).unwrap();
        assert!((mlp.w1[0] - (1.0 - 0.07)).abs() < 1e-15);
        assert_eq!(state.prev_w1[0], 3.5);
    }

    #[test]
    fn step_sizes_respect_bounds_under_long_sequences() {
        let mut mlp = one_weight_net();
        let params = RpropParams::default();
        let mut state = RpropState::new(&mlp, params).unwrap();
        // Alternate long runs of agreement with periodic flips.
        for epoch in 0..500 {
            let g = if epoch % 7 == 6 { -1.0 } else { 1.0 };
            rprop_step(&mut mlp, &grads(g), &mut state).unwrap();
            let (lo, hi) = state.step_range();
            assert!(lo >= params.delta_min && hi <= params.delta_max);
        }
        // Drive the step to the ceiling, then the floor.
        let mut state = RpropState::new(&mlp, params).unwrap();
        for _ in 0..100 {
            rprop_step(&mut mlp, &grads(1.0), &mut state).unwrap();
        }
        assert!(state.step_w1[0] <= params.delta_max);
        assert!((state.step_w1[0] - params.delta_max).abs() < 1e-9);
        for i in 0..200 {
            let g = if i % 2 == 0 { -1.0 } else { 1.0 };
            rprop_step(&mut mlp, &grads(g), &mut state).unwrap();
        }
        assert!(state.step_w1[0] >= params.delta_min);
    }

    #[test]
    fn moves_are_opposite_to_gradient_sign() {
        let mut mlp = init_mlp([4, 3, 2], OutputActivation::Linear, 9).unwrap();
        let mut state = RpropState::new(&mlp, RpropParams::default()).unwrap();
        for round in 0..50 {
            let g: Vec<f64> = (0..mlp.w1.len())
                .map(|i| ((i + round) as f64 * 0.7).sin())
                .collect();
            let grads = Gradients {
                w1: g.clone(),
                b1: vec![0.1; mlp.b1.len()],
                w2: vec![-0.2; mlp.w2.len()],
                b2: vec![0.0; mlp.b2.len()],
            };
            let before = mlp.clone();
            rprop_step(&mut mlp, &grads, &mut state).unwrap();
            for (i, (&w_new, &w_old)) in mlp.w1.iter().zip(&before.w1).enumerate() {
                let moved = w_new - w_old;
                if moved != 0.0 {
                    assert!(moved.signum() == -grads.w1[i].signum());
                }
            }
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut mlp = one_weight_net();
        let mut state = RpropState::new(&mlp, RpropParams::default()).unwrap();
        let bad = Gradients {
            w1: vec![0.0, 0.0],
            b1: vec![0.0],
            w2: vec![0.0],
            b2: vec![0.0],
        };
        assert!(rprop_step(&mut mlp, &bad, &mut state).is_err());
    }

    #[test]
    fn rejects_invalid_params() {
        let mlp = one_weight_net();
        let bad = RpropParams {
            eta_plus: 0.9,
            ..RpropParams::default()
        };
        assert!(RpropState::new(&mlp, bad).is_err());
    }
}
