//! Activations, losses, optimizers and weight penalties.

use std::str::FromStr;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

pub fn activation(kind: Activation, x: f64) -> f64 {
    match kind {
        Activation::Relu => x.max(0.0),
        Activation::Sigmoid => sigmoid(x),
        Activation::Tanh => x.tanh(),
    }
}

/// Elementwise activation over a slice.
pub fn activate(kind: Activation, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| activation(kind, x)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossTarget<'a> {
    Class(usize),
    Dense(&'a [f64]),
}

const PROB_FLOOR: f64 = 1e-12;

/// Mean squared error, or `-ln p(target)` with `p` clamped to at least 1e-12.
/// Cross-entropy requires `prediction` to be a distribution (sum 1 +- 1e-6).
pub fn loss(kind: LossKind, prediction: &[f64], target: LossTarget<'_>) -> Result<f64, ModelError> {
    match kind {
        LossKind::Mse => {
            let target = match target {
                LossTarget::Dense(t) => t,
                LossTarget::Class(_) => {
                    return Err(ModelError::InvalidConfig("mse needs a dense target".into()));
                }
            };
            if target.len() != prediction.len() || prediction.is_empty() {
                return Err(ModelError::ShapeMismatch { expected: prediction.len(), got: target.len() });
            }
            let sse: f64 = prediction.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
            Ok(sse / prediction.len() as f64)
        }
        LossKind::CrossEntropy => {
            let total: f64 = prediction.iter().sum();
            if prediction.is_empty() || prediction.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-6 {
                return Err(ModelError::NotADistribution);
            }
            match target {
                LossTarget::Class(c) => {
                    let p = *prediction.get(c).ok_or(ModelError::ShapeMismatch { expected: prediction.len(), got: c + 1 })?;
                    Ok(-p.max(PROB_FLOOR).ln())
                }
                LossTarget::Dense(t) => {
                    if t.len() != prediction.len() {
                        return Err(ModelError::ShapeMismatch { expected: prediction.len(), got: t.len() });
                    }
                    Ok(-t.iter().zip(prediction).map(|(ti, p)| ti * p.max(PROB_FLOOR).ln()).sum::<f64>())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    RmsProp,
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::RmsProp => "rmsprop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// RMSprop squared-gradient decay.
    pub decay: f64,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig { kind: OptimizerKind::Sgd, ..Self::adam(learning_rate) }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay: 0.9,
        }
    }

    pub fn rmsprop(learning_rate: f64) -> Self {
        OptimizerConfig { kind: OptimizerKind::RmsProp, ..Self::adam(learning_rate) }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig("learning rate must be > 0".into()));
        }
        if !unit(self.beta1) || !unit(self.beta2) || !unit(self.decay) {
            return Err(ModelError::InvalidConfig("beta1, beta2 and decay must lie in (0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(ModelError::InvalidConfig("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Step count and moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(n_params: usize) -> Self {
        OptimizerState { step: 0, first_moment: vec![0.0; n_params], second_moment: vec![0.0; n_params] }
    }
}

/// Applies one update in place.
pub fn optimizer_step(
    config: &OptimizerConfig,
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
) -> Result<(), ModelError> {
    let n = params.len();
    for len in [grads.len(), state.first_moment.len(), state.second_moment.len()] {
        if len != n {
            return Err(ModelError::ShapeMismatch { expected: n, got: len });
        }
    }
    state.step += 1;
    let lr = config.learning_rate;
    match config.kind {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam => {
            let (b1, b2) = (config.beta1, config.beta2);
            let t = state.step as i32;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            for i in 0..n {
                let g = grads[i];
                let m = &mut state.first_moment[i];
                let v = &mut state.second_moment[i];
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        }
        OptimizerKind::RmsProp => {
            let d = config.decay;
            for i in 0..n {
                let g = grads[i];
                let v = &mut state.second_moment[i];
                *v = d * *v + (1.0 - d) * g * g;
                params[i] -= lr * g / (v.sqrt() + config.epsilon);
            }
        }
    }
    Ok(())
}

/// L1 and L2 coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegularizationConfig {
    pub l1: f64,
    pub l2: f64,
}

impl RegularizationConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.l1 >= 0.0 && self.l1.is_finite() && self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(ModelError::InvalidConfig("regularization coefficients must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// `l1 * sum|w| + l2 * sum w^2`.
pub fn penalty(reg: &RegularizationConfig, weights: &[f64]) -> f64 {
    reg.l1 * weights.iter().map(|w| w.abs()).sum::<f64>() + reg.l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Adds the (sub)gradient of [`penalty`] to `grads`. Uses sign(0) = 0.
pub fn add_penalty_gradient(reg: &RegularizationConfig, weights: &[f64], grads: &mut [f64]) {
    for (g, &w) in grads.iter_mut().zip(weights) {
        let sign = if w > 0.0 {
            1.0
        } else if w < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g += reg.l1 * sign + 2.0 * reg.l2 * w;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn activation_values() {
        assert_eq!(activation(Activation::Relu, -3.0), 0.0);
        assert_eq!(activation(Activation::Relu, 2.0), 2.0);
        assert_eq!(activation(Activation::Sigmoid, 0.0), 0.5);
        assert_eq!(activation(Activation::Tanh, 0.0), 0.0);
        assert_eq!(activate(Activation::Relu, &[-1.0, 1.0]), vec![0.0, 1.0]);
        assert!(sigmoid(-800.0).is_finite() && sigmoid(800.0) == 1.0);
    }

    proptest! {
        #[test]
        fn tanh_is_odd(x in -20.0f64..20.0) {
            prop_assert_eq!(activation(Activation::Tanh, -x), -activation(Activation::Tanh, x));
        }

        #[test]
        fn softmax_normalizes(logits in proptest::collection::vec(-50.0f64..50.0, 1..10)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn penalty_is_nonnegative(w in proptest::collection::vec(-5.0f64..5.0, 0..10), l1 in 0.0f64..2.0, l2 in 0.0f64..2.0) {
            let reg = RegularizationConfig { l1, l2 };
            prop_assert!(penalty(&reg, &w) >= 0.0);
        }
    }

    #[test]
    fn loss_values() {
        let x = [0.3, 0.7];
        assert_eq!(loss(LossKind::Mse, &x, LossTarget::Dense(&x)).unwrap(), 0.0);
        assert!(loss(LossKind::CrossEntropy, &[0.0, 1.0, 0.0], LossTarget::Class(1)).unwrap() <= 1e-11);
        let uniform = [0.25; 4];
        for c in 0..4 {
            assert_abs_diff_eq!(
                loss(LossKind::CrossEntropy, &uniform, LossTarget::Class(c)).unwrap(),
                1.386_294_361_119_890_6,
                epsilon = 1e-12
            );
        }
        assert!(matches!(
            loss(LossKind::CrossEntropy, &[0.5, 0.6], LossTarget::Class(0)),
            Err(ModelError::NotADistribution)
        ));
        // clamped: a zero-probability target costs -ln(1e-12)
        assert_abs_diff_eq!(
            loss(LossKind::CrossEntropy, &[1.0, 0.0], LossTarget::Class(1)).unwrap(),
            -(1e-12f64).ln(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn sgd_step() {
        let mut p = [0.0];
        let mut s = OptimizerState::new(1);
        optimizer_step(&OptimizerConfig::sgd(0.1), &mut p, &[1.0], &mut s).unwrap();
        assert_abs_diff_eq!(p[0], -0.1, epsilon = 1e-15);
    }

    #[test]
    fn adam_first_step() {
        let mut p = [0.0];
        let mut s = OptimizerState::new(1);
        optimizer_step(&OptimizerConfig::adam(1e-3), &mut p, &[0.5], &mut s).unwrap();
        // bias-corrected moments equal the gradient at t = 1
        assert_abs_diff_eq!(p[0], -1e-3 * 0.5 / (0.5 + 1e-8), epsilon = 1e-15);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn rmsprop_first_step() {
        let mut p = [0.0];
        let mut s = OptimizerState::new(1);
        optimizer_step(&OptimizerConfig::rmsprop(0.01), &mut p, &[1.0], &mut s).unwrap();
        assert_abs_diff_eq!(p[0], -0.031_622_776, epsilon = 1e-6);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = [0.0, 1.0];
        let mut s = OptimizerState::new(2);
        assert!(matches!(
            optimizer_step(&OptimizerConfig::sgd(0.1), &mut p, &[1.0], &mut s),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn penalty_values() {
        assert_eq!(penalty(&RegularizationConfig { l1: 1.0, l2: 1.0 }, &[0.0, 0.0]), 0.0);
        assert_eq!(penalty(&RegularizationConfig { l1: 1.0, l2: 0.0 }, &[1.0, -2.0]), 3.0);
        assert_eq!(penalty(&RegularizationConfig { l1: 0.0, l2: 0.5 }, &[1.0, -2.0]), 2.5);
        let mut g = [0.0, 0.0];
        add_penalty_gradient(&RegularizationConfig { l1: 1.0, l2: 0.5 }, &[1.0, -2.0], &mut g);
        assert_eq!(g, [2.0, -3.0]);
    }
}
