use serde::{Deserialize, Serialize};

use super::scorer::Gradient;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    /// Adam with moment updates applied only to coordinates present in the
    /// step's gradient.
    Adam,
}

/// First-order optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: Vec<u32>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        let n = if kind == OptimizerKind::Adam { n_params } else { 0 };
        Self {
            kind,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: vec![0; n],
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Descend along `grad` (the gradient of the loss).
    pub fn step(&mut self, params: &mut [f64], grad: &Gradient) {
        if self.lr == 0.0 {
            return;
        }
        let g = grad.values();
        match self.kind {
            OptimizerKind::Sgd => {
                for &i in grad.touched() {
                    params[i] -= self.lr * g[i];
                }
            }
            OptimizerKind::Adam => {
                for &i in grad.touched() {
                    self.t[i] += 1;
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g[i];
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g[i] * g[i];
                    let m_hat = self.m[i] / (1.0 - BETA1.powi(self.t[i] as i32));
                    let v_hat = self.v[i] / (1.0 - BETA2.powi(self.t[i] as i32));
                    params[i] -= self.lr * m_hat / (v_hat.sqrt() + EPS);
                }
            }
        }
    }
}
