//! Coherence loss: a smoothed, normalized hinge.
//!
//! In terms of the margin `u = y f(x)`,
//!
//! ```text
//! l(u) = log(1 + exp((1 - u) / sigma)) / log(1 + exp(1 / sigma))
//! ```
//!
//! so `l(0) = 1` for every `sigma`, and `l` tends to `max(0, 1 - u)` as
//! `sigma -> 0`. All exponentials go through [`softplus`] and [`sigmoid`].

use serde::{Deserialize, Serialize};

use crate::dataio::Label;
use crate::error::{Error, Result};

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Temperature `sigma` together with the cached normalizer
/// `log(1 + e^{1/sigma})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CoherenceParams {
    sigma: f64,
    normalizer: f64,
}

impl TryFrom<f64> for CoherenceParams {
    type Error = Error;

    fn try_from(sigma: f64) -> Result<Self> {
        Self::new(sigma)
    }
}

impl From<CoherenceParams> for f64 {
    fn from(p: CoherenceParams) -> f64 {
        p.sigma
    }
}

impl CoherenceParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coherence sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            sigma,
            normalizer: softplus(1.0 / sigma),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Loss at margin `u`; no finiteness check.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        softplus((1.0 - u) / self.sigma) / self.normalizer
    }

    /// First derivative in the margin; always negative.
    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        -sigmoid((1.0 - u) / self.sigma) / (self.sigma * self.normalizer)
    }

    #[inline]
    pub fn second_derivative(&self, u: f64) -> f64 {
        let s = sigmoid((1.0 - u) / self.sigma);
        s * (1.0 - s) / (self.sigma * self.sigma * self.normalizer)
    }

    /// `sup_u l''(u) = 1 / (4 sigma^2 log(1 + e^{1/sigma}))`.
    pub fn curvature_bound(&self) -> f64 {
        1.0 / (4.0 * self.sigma * self.sigma * self.normalizer)
    }

    /// Two-argument form `l(y, f)`.
    pub fn value_yf(&self, y: Label, f: f64) -> f64 {
        self.value(f64::from(y) * f)
    }
}

fn check_margin(u: f64) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("non-finite margin {u}")))
    }
}

pub fn loss(margin: f64, params: &CoherenceParams) -> Result<f64> {
    check_margin(margin)?;
    Ok(params.value(margin))
}

pub fn loss_grad(margin: f64, params: &CoherenceParams) -> Result<f64> {
    check_margin(margin)?;
    Ok(params.derivative(margin))
}

pub fn curvature_bound(params: &CoherenceParams) -> f64 {
    params.curvature_bound()
}

/// Per-class multipliers on the empirical risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weight_pos: f64,
    pub weight_neg: f64,
}

impl ClassWeights {
    pub fn new(weight_pos: f64, weight_neg: f64) -> Result<Self> {
        let w = Self {
            weight_pos,
            weight_neg,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn unit() -> Self {
        Self {
            weight_pos: 1.0,
            weight_neg: 1.0,
        }
    }

    /// Inverse-frequency weights `n / (2 n_y)`, averaging 1 over the sample.
    pub fn balanced(labels: &[Label]) -> Result<Self> {
        let n = labels.len();
        let n_pos = labels.iter().filter(|&&y| y == 1).count();
        let n_neg = n - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::SingleClass);
        }
        Self::new(
            n as f64 / (2.0 * n_pos as f64),
            n as f64 / (2.0 * n_neg as f64),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for w in [self.weight_pos, self.weight_neg] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "class weights must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, y: Label) -> f64 {
        if y > 0 {
            self.weight_pos
        } else {
            self.weight_neg
        }
    }

    pub fn max(&self) -> f64 {
        self.weight_pos.max(self.weight_neg)
    }

    /// Swaps the positive and negative weights.
    pub fn swapped(&self) -> Self {
        Self {
            weight_pos: self.weight_neg,
            weight_neg: self.weight_pos,
        }
    }
}

/// `(1/n) sum_i c(y_i) l(m_i)`.
pub fn empirical_risk(
    margins: &[f64],
    labels: &[Label],
    weights: &ClassWeights,
    params: &CoherenceParams,
) -> Result<f64> {
    if margins.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} margins but {} labels",
            margins.len(),
            labels.len()
        )));
    }
    if margins.is_empty() {
        return Err(Error::InsufficientData(
            "empirical risk of no samples".into(),
        ));
    }
    let mut total = 0.0;
    for (&m, &y) in margins.iter().zip(labels) {
        check_margin(m)?;
        total += weights.weight(y) * params.value(m);
    }
    Ok(total / margins.len() as f64)
}
