//! Confidence-aware curriculum loss.
//!
//! For a task loss `ℓ`, baseline `τ` and regularization weight `λ`, the
//! SuperLoss is `L(ℓ, σ) = (ℓ − τ)·σ + λ·(ln σ)²`. Its minimizer over the
//! confidence `σ` has the closed form
//!
//! ```text
//! σ*(ℓ) = exp(−W₀(½·max(−2/e, β))),   β = (ℓ − τ) / λ
//! ```
//!
//! where `W₀` is the principal branch of the Lambert W function. `σ*` acts
//! as a per-sample weight: samples easier than the baseline (`ℓ < τ`) get
//! weights above one, harder samples get weights below one. The weight is
//! capped at `e` once `β ≤ −2/e`.

use std::f64::consts::E;

use crate::error::{Error, Result};

const INV_E: f64 = 1.0 / E;
const HALLEY_MAX_ITERS: usize = 20;
const HALLEY_STEP_TOL: f64 = 1e-14;

/// Principal branch `W₀(z)` of the Lambert W function, `z ≥ −1/e`.
pub fn lambert_w0(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::Domain("lambert_w0(NaN)".into()));
    }
    if z < -INV_E - 1e-12 {
        return Err(Error::Domain(format!(
            "lambert_w0 is defined for z >= -1/e, got {z}"
        )));
    }
    if z <= -INV_E {
        return Ok(-1.0);
    }
    if z == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if z == 0.0 {
        return Ok(0.0);
    }

    let mut w = initial_guess(z);
    for _ in 0..HALLEY_MAX_ITERS {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = (w - step).max(-1.0);
        let done = (next - w).abs() <= HALLEY_STEP_TOL * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

fn initial_guess(z: f64) -> f64 {
    if z < -0.25 {
        // Series about the branch point in p = sqrt(2(e·z + 1)).
        let p = (2.0 * (E * z + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if z <= 3.0 {
        z.ln_1p()
    } else {
        let l = z.ln();
        l - l.ln()
    }
}

/// How the loss baseline `τ` is maintained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauPolicy {
    Static(f64),
    /// `τ` is the mean of the most recent batch.
    BatchMean,
    /// `τ ← m·τ + (1 − m)·batch mean`, seeded with the first batch mean.
    Ema { momentum: f64 },
}

impl Default for TauPolicy {
    fn default() -> Self {
        TauPolicy::Ema { momentum: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumState {
    lambda: f64,
    tau: Option<f64>,
    policy: TauPolicy,
    step_count: usize,
}

impl Default for CurriculumState {
    fn default() -> Self {
        Self::new(1.0, TauPolicy::default()).expect("default curriculum is valid")
    }
}

impl CurriculumState {
    pub fn new(lambda: f64, policy: TauPolicy) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!("lambda must be positive, got {lambda}")));
        }
        let tau = match policy {
            TauPolicy::Static(v) if !v.is_finite() => {
                return Err(Error::Argument(format!("static tau must be finite, got {v}")))
            }
            TauPolicy::Static(v) => Some(v),
            TauPolicy::Ema { momentum } if !(momentum > 0.0 && momentum < 1.0) => {
                return Err(Error::Argument(format!(
                    "ema momentum must lie in (0, 1), got {momentum}"
                )))
            }
            _ => None,
        };
        Ok(Self {
            lambda,
            tau,
            policy,
            step_count: 0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `None` until the first update under the batch-mean and ema policies.
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn policy(&self) -> TauPolicy {
        self.policy
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    /// Folds a batch of detached per-sample losses into `τ`.
    pub fn update_tau(&mut self, batch_losses: &[f64]) -> Result<()> {
        if batch_losses.is_empty() {
            return Err(Error::Argument("update_tau with an empty batch".into()));
        }
        if batch_losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("batch loss passed to update_tau".into()));
        }
        let mean = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;
        match self.policy {
            TauPolicy::Static(_) => {}
            TauPolicy::BatchMean => self.tau = Some(mean),
            TauPolicy::Ema { momentum } => {
                self.tau = Some(match self.tau {
                    Some(t) => momentum * t + (1.0 - momentum) * mean,
                    None => mean,
                });
            }
        }
        self.step_count += 1;
        Ok(())
    }

    /// `σ*(ℓ)`, in `(0, e]`.
    pub fn sigma_star(&self, loss: f64) -> Result<f64> {
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("task loss {loss}")));
        }
        let tau = self
            .tau
            .ok_or_else(|| Error::Argument("tau has not been initialized".into()))?;
        let beta = (loss - tau) / self.lambda;
        let z = 0.5 * beta.max(-2.0 * INV_E);
        Ok((-lambert_w0(z)?).exp())
    }

    /// `L(ℓ, σ) = (ℓ − τ)·σ + λ·(ln σ)²` at an arbitrary confidence.
    pub fn objective(&self, loss: f64, sigma: f64) -> Result<f64> {
        let tau = self
            .tau
            .ok_or_else(|| Error::Argument("tau has not been initialized".into()))?;
        let ln = sigma.ln();
        Ok((loss - tau) * sigma + self.lambda * ln * ln)
    }

    /// SuperLoss value at the closed-form confidence, and that confidence.
    pub fn superloss(&self, loss: f64) -> Result<SampleWeight> {
        let sigma = self.sigma_star(loss)?;
        Ok(SampleWeight {
            loss,
            sigma,
            value: self.objective(loss, sigma)?,
        })
    }

    /// Weights for one batch of detached losses.
    pub fn weigh_batch(&self, losses: &[f64]) -> Result<Vec<SampleWeight>> {
        losses.iter().map(|&l| self.superloss(l)).collect()
    }
}

/// Task loss, confidence and SuperLoss value of one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleWeight {
    pub loss: f64,
    pub sigma: f64,
    pub value: f64,
}
