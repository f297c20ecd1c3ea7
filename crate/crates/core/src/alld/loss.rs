use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::data::PreferencePair;
use super::scorer::{Gradient, ScoreError, Scorer, Trainable};
use super::vocab::Token;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("beta must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("{which}: {source}")]
    Shape {
        which: &'static str,
        source: ScoreError,
    },
    #[error("non-finite log-probability for {which}")]
    NonFinite { which: &'static str },
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Sum,
    Mean,
}

fn checked(model: &dyn Scorer, context: &[Token], target: &[Token], which: &'static str) -> Result<(), LossError> {
    model.check(context, target).map_err(|source| LossError::Shape { which, source })
}

fn finite(x: f64, which: &'static str) -> Result<f64, LossError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(LossError::NonFinite { which })
    }
}

/// Teacher-forced negative log-likelihood of `target`; only target tokens are scored.
pub fn sft_loss<S: Scorer>(model: &S, context: &[Token], target: &[Token], reduction: Reduction) -> Result<f64, LossError> {
    checked(model, context, target, "target")?;
    let nll = -finite(model.sequence_logprob(context, target), "target")?;
    Ok(match reduction {
        Reduction::Sum => nll,
        Reduction::Mean => nll / target.len() as f64,
    })
}

/// [`sft_loss`] plus `grad += scale * d loss / dθ`.
pub fn sft_loss_grad<M: Trainable>(
    model: &M,
    context: &[Token],
    target: &[Token],
    reduction: Reduction,
    scale: f64,
    grad: &mut Gradient,
) -> Result<f64, LossError> {
    checked(model, context, target, "target")?;
    let norm = match reduction {
        Reduction::Sum => 1.0,
        Reduction::Mean => 1.0 / target.len() as f64,
    };
    let lp = model.accumulate_logprob_grad(context, target, -scale * norm, grad);
    Ok(-finite(lp, "target")? * norm)
}

/// The four sequence log-probabilities entering the loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceLogProbs {
    /// `log pi_theta(y_t | x_a)`
    pub policy_t: f64,
    /// `log pi_theta(y_a | x_a)`
    pub policy_a: f64,
    /// `log pi_ref(y_t | x_t)`
    pub ref_t: f64,
    /// `log pi_ref(y_a | x_t)`
    pub ref_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss: f64,
    /// Implicit reward margin `delta_t - delta_a`, before scaling by beta.
    pub margin: f64,
    pub delta_t: f64,
    pub delta_a: f64,
    pub logprobs: SequenceLogProbs,
}

/// Loss from precomputed log-probabilities: `softplus(-beta * margin)`.
pub fn alld_loss_from_logprobs(lp: SequenceLogProbs, beta: f64) -> Result<LossReport, LossError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(LossError::InvalidBeta(beta));
    }
    finite(lp.policy_t, "policy y_t")?;
    finite(lp.policy_a, "policy y_a")?;
    finite(lp.ref_t, "reference y_t")?;
    finite(lp.ref_a, "reference y_a")?;
    let delta_t = lp.policy_t - lp.ref_t;
    let delta_a = lp.policy_a - lp.ref_a;
    let margin = delta_t - delta_a;
    Ok(LossReport {
        loss: softplus(-beta * margin),
        margin,
        delta_t,
        delta_a,
        logprobs: lp,
    })
}

fn check_pair(policy: &dyn Scorer, reference: &dyn Scorer, pair: &PreferencePair) -> Result<(), LossError> {
    checked(policy, &pair.x_a, &pair.y_t, "policy y_t")?;
    checked(policy, &pair.x_a, &pair.y_a, "policy y_a")?;
    checked(reference, &pair.x_t, &pair.y_t, "reference y_t")?;
    checked(reference, &pair.x_t, &pair.y_a, "reference y_a")
}

fn reference_logprobs<R: Scorer>(reference: &R, pair: &PreferencePair) -> (f64, f64) {
    (
        reference.sequence_logprob(&pair.x_t, &pair.y_t),
        reference.sequence_logprob(&pair.x_t, &pair.y_a),
    )
}

/// Policy terms condition on `x_a`, reference terms on `x_t`; sequence
/// log-probabilities are summed over tokens.
pub fn alld_loss<P: Scorer, R: Scorer>(
    policy: &P,
    reference: &R,
    pair: &PreferencePair,
    beta: f64,
) -> Result<LossReport, LossError> {
    check_pair(policy, reference, pair)?;
    let (ref_t, ref_a) = reference_logprobs(reference, pair);
    alld_loss_from_logprobs(
        SequenceLogProbs {
            policy_t: policy.sequence_logprob(&pair.x_a, &pair.y_t),
            policy_a: policy.sequence_logprob(&pair.x_a, &pair.y_a),
            ref_t,
            ref_a,
        },
        beta,
    )
}

/// [`alld_loss`] plus `grad += scale * d loss / dθ` for the policy.
///
/// `d loss / d margin = -beta * sigmoid(-beta * margin)`, and the margin's
/// policy gradient is `grad log pi(y_t|x_a) - grad log pi(y_a|x_a)`.
pub fn alld_loss_grad<P: Trainable, R: Scorer>(
    policy: &P,
    reference: &R,
    pair: &PreferencePair,
    beta: f64,
    scale: f64,
    grad: &mut Gradient,
) -> Result<LossReport, LossError> {
    let report = alld_loss(policy, reference, pair, beta)?;
    let dl_dm = -beta * sigmoid(-beta * report.margin);
    policy.accumulate_logprob_grad(&pair.x_a, &pair.y_t, scale * dl_dm, grad);
    policy.accumulate_logprob_grad(&pair.x_a, &pair.y_a, -scale * dl_dm, grad);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alld::table::{TableScorer, TableShape};
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn shape() -> TableShape {
        TableShape {
            vocab: 5,
            positions: 4,
            slots: 3,
            eos: 0,
            markov: true,
        }
    }

    fn pair() -> PreferencePair {
        PreferencePair {
            id: "p".into(),
            x_a: vec![1, 2, 3],
            x_t: vec![4, 2],
            y_t: vec![3, 1, 0],
            y_a: vec![3, 2, 4, 0],
        }
    }

    #[test]
    fn softplus_stable_and_accurate() {
        for &x in &[-30.0, -1.0, 0.0, 0.3, 5.0, 30.0] {
            let naive = (1.0 + f64::exp(x)).ln();
            assert!((softplus(x) - naive).abs() < 1e-12, "{x}");
        }
        assert_eq!(softplus(800.0), 800.0);
        assert_eq!(softplus(-800.0), 0.0);
        assert!((sigmoid(-800.0)).abs() < 1e-300 && sigmoid(800.0) == 1.0);
    }

    #[test]
    fn identical_models_give_ln2() {
        let m = TableScorer::random(shape(), 0.7, &mut seed::rng(2, "t", 0));
        let mut p = pair();
        p.x_t = p.x_a.clone();
        let r = alld_loss(&m, &m.freeze(), &p, 0.4).unwrap();
        assert_eq!(r.margin, 0.0);
        assert!((r.loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn closed_form_case() {
        let lp = SequenceLogProbs {
            policy_t: -1.0,
            ref_t: -1.5,
            policy_a: -2.5,
            ref_a: -2.0,
        };
        let r = alld_loss_from_logprobs(lp, 0.4).unwrap();
        assert_eq!((r.delta_t, r.delta_a), (0.5, -0.5));
        // -ln(sigmoid(0.4)) = ln(1 + e^-0.4)
        assert!((r.loss - 0.513_015_252_399_952_6).abs() < 1e-12, "{}", r.loss);
        assert!(alld_loss_from_logprobs(lp, 0.0).is_err());
        let bad = SequenceLogProbs { policy_a: f64::NEG_INFINITY, ..lp };
        assert_eq!(alld_loss_from_logprobs(bad, 0.4), Err(LossError::NonFinite { which: "policy y_a" }));
    }

    #[test]
    fn uniform_sft_is_length_times_ln_v() {
        let m = TableScorer::zeros(shape());
        let t = [1, 2, 3, 0];
        let sum = sft_loss(&m, &[1], &t, Reduction::Sum).unwrap();
        let mean = sft_loss(&m, &[1], &t, Reduction::Mean).unwrap();
        assert!((sum - 4.0 * 5f64.ln()).abs() < 1e-12);
        assert!((mean - 5f64.ln()).abs() < 1e-12);
        assert!(matches!(sft_loss(&m, &[1], &[], Reduction::Sum), Err(LossError::Shape { .. })));
    }

    #[test]
    fn sft_matches_per_token_oracle() {
        let m = TableScorer::random(shape(), 1.0, &mut seed::rng(5, "t", 0));
        let ctx = [2u32, 4, 1];
        let target = [4u32, 1, 3, 2];
        let mut oracle = 0.0;
        for i in 0..target.len() {
            let lp = m.next_logprobs(&ctx, &target[..i]);
            let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
            oracle -= (probs[target[i] as usize] / probs.iter().sum::<f64>()).ln();
        }
        let got = sft_loss(&m, &ctx, &target, Reduction::Sum).unwrap();
        assert!((got - oracle).abs() < 1e-9);
    }

    #[test]
    fn certain_model_has_zero_sft() {
        let s = TableShape { vocab: 3, positions: 2, slots: 1, eos: 0, markov: true };
        let mut m = TableScorer::zeros(s);
        // bias rows: position 0 -> token 1, position 1 -> token 0
        m.params_mut()[1] = 800.0;
        m.params_mut()[3] = 800.0;
        assert_eq!(sft_loss(&m, &[2], &[1, 0], Reduction::Sum).unwrap(), 0.0);
    }

    #[test]
    fn beta_doubling_law() {
        let mut rng = seed::rng(6, "t", 0);
        let pol = TableScorer::random(shape(), 1.0, &mut rng);
        let refm = TableScorer::random(shape(), 1.0, &mut rng);
        let r1 = alld_loss(&pol, &refm, &pair(), 0.4).unwrap();
        let r2 = alld_loss(&pol, &refm, &pair(), 0.8).unwrap();
        assert_eq!(r1.margin, r2.margin);
        assert!((r2.loss - softplus(-0.8 * r1.margin)).abs() < 1e-12);
    }

    #[test]
    fn swapping_completions_negates_margin() {
        let mut rng = seed::rng(7, "t", 0);
        let pol = TableScorer::random(shape(), 1.0, &mut rng);
        let refm = TableScorer::random(shape(), 1.0, &mut rng);
        let p = pair();
        let swapped = PreferencePair { y_t: p.y_a.clone(), y_a: p.y_t.clone(), ..p.clone() };
        let a = alld_loss(&pol, &refm, &p, 0.4).unwrap();
        let b = alld_loss(&pol, &refm, &swapped, 0.4).unwrap();
        assert!((a.margin + b.margin).abs() < 1e-12);
        assert!((b.loss - softplus(0.4 * a.margin)).abs() < 1e-12);
    }

    #[test]
    fn small_step_moves_log_probs_apart() {
        let mut rng = seed::rng(8, "t", 0);
        let mut pol = TableScorer::random(shape(), 0.5, &mut rng);
        let refm = TableScorer::random(shape(), 0.5, &mut rng).freeze();
        let p = pair();
        let before = alld_loss(&pol, &refm, &p, 0.4).unwrap();
        let mut g = Gradient::zeros(shape().n_params());
        alld_loss_grad(&pol, &refm, &p, 0.4, 1.0, &mut g).unwrap();
        for &i in g.touched() {
            pol.params_mut()[i] -= 1e-3 * g.values()[i];
        }
        let after = alld_loss(&pol, &refm, &p, 0.4).unwrap();
        assert!(after.logprobs.policy_t >= before.logprobs.policy_t);
        assert!(after.logprobs.policy_a <= before.logprobs.policy_a);
        assert!(after.loss < before.loss);
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let tiny = TableShape { vocab: 4, positions: 3, slots: 2, eos: 0, markov: true };
        assert!(tiny.n_params() <= 200);
        let mut rng = seed::rng(9, "t", 0);
        let mut pol = TableScorer::random(tiny, 1.0, &mut rng);
        let refm = TableScorer::random(tiny, 1.0, &mut rng);
        let p = PreferencePair {
            id: "fd".into(),
            x_a: vec![1, 2],
            x_t: vec![3],
            y_t: vec![3, 1, 0],
            y_a: vec![2, 1, 0],
        };
        let mut g_alld = Gradient::zeros(tiny.n_params());
        alld_loss_grad(&pol, &refm, &p, 0.4, 1.0, &mut g_alld).unwrap();
        let mut g_sft = Gradient::zeros(tiny.n_params());
        sft_loss_grad(&pol, &p.x_a, &p.y_t, Reduction::Mean, 1.0, &mut g_sft).unwrap();
        let touched = g_alld.touched().to_vec();
        let eps = 1e-5;
        for probe in 0..50 {
            let i = if probe % 5 == 0 {
                rng.random_range(0..tiny.n_params())
            } else {
                touched[rng.random_range(0..touched.len())]
            };
            let orig = pol.params()[i];
            pol.params_mut()[i] = orig + eps;
            let (a_hi, s_hi) = (
                alld_loss(&pol, &refm, &p, 0.4).unwrap().loss,
                sft_loss(&pol, &p.x_a, &p.y_t, Reduction::Mean).unwrap(),
            );
            pol.params_mut()[i] = orig - eps;
            let (a_lo, s_lo) = (
                alld_loss(&pol, &refm, &p, 0.4).unwrap().loss,
                sft_loss(&pol, &p.x_a, &p.y_t, Reduction::Mean).unwrap(),
            );
            pol.params_mut()[i] = orig;
            assert!(rel_err(g_alld.values()[i], (a_hi - a_lo) / (2.0 * eps)) < 1e-4, "alld param {i}");
            assert!(rel_err(g_sft.values()[i], (s_hi - s_lo) / (2.0 * eps)) < 1e-4, "sft param {i}");
        }
    }

    proptest! {
        #[test]
        fn loss_is_monotone_decreasing_in_margin(m1 in -1000.0f64..1000.0, d in 0.001f64..100.0, beta in 0.01f64..5.0) {
            let at = |m: f64| alld_loss_from_logprobs(SequenceLogProbs { policy_t: m, policy_a: 0.0, ref_t: 0.0, ref_a: 0.0 }, beta).unwrap().loss;
            prop_assert!(at(m1 + d) <= at(m1));
            prop_assert!(at(m1).is_finite() && at(m1) >= 0.0);
        }

        #[test]
        fn stable_form_matches_naive(x in -700.0f64..700.0) {
            let naive = -(1.0 / (1.0 + x.exp())).ln();
            prop_assert!((softplus(x) - naive).abs() <= 1e-9 * naive.abs().max(1.0));
        }
    }
}
