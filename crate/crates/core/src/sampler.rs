//! Prior and constrained-prior draws charged against a likelihood-evaluation budget.
//!
//! Every likelihood evaluation costs one unit, including candidates that the
//! constraint rejects.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, Point};
use crate::rng::NsRng;

/// Count of likelihood evaluations against a hard cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalLedger {
    used: u64,
    budget: u64,
}

impl EvalLedger {
    pub fn new(budget: u64) -> Self {
        Self { used: 0, budget }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.used
    }

    fn charge(&mut self) -> Result<()> {
        if self.used >= self.budget {
            return Err(Error::BudgetExhausted {
                used: self.used,
                budget: self.budget,
            });
        }
        self.used += 1;
        Ok(())
    }
}

/// One evaluated draw. `value` is what the nested-sampling loop orders by;
/// it differs from `raw` only under additive perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub point: Point,
    pub raw: f64,
    pub value: f64,
}

/// Draws from a model's prior, optionally perturbing each evaluation by
/// independent `Unif[-a, a]` noise and skipping a set of excluded plateau levels.
#[derive(Debug, Clone)]
pub struct Sampler<'m, M: Model + ?Sized> {
    model: &'m M,
    noise: Option<f64>,
    excluded: Vec<f64>,
    max_attempts: u64,
}

impl<'m, M: Model + ?Sized> Sampler<'m, M> {
    pub fn new(model: &'m M, max_attempts: u64) -> Self {
        Self {
            model,
            noise: None,
            excluded: Vec::new(),
            max_attempts: max_attempts.max(1),
        }
    }

    pub fn with_noise(mut self, half_width: f64) -> Self {
        self.noise = Some(half_width);
        self
    }

    /// Levels whose exact (unperturbed) likelihood disqualifies a constrained candidate.
    pub fn excluding(mut self, levels: &[f64]) -> Self {
        self.excluded = levels.to_vec();
        self
    }

    pub fn model(&self) -> &'m M {
        self.model
    }

    fn evaluate(&self, point: Point, rng: &mut NsRng, ledger: &mut EvalLedger) -> Result<Draw> {
        ledger.charge()?;
        let raw = self.model.likelihood(&point);
        let value = match self.noise {
            Some(a) => raw + rng.random_range(-a..=a),
            None => raw,
        };
        Ok(Draw { point, raw, value })
    }

    pub fn draw_prior(&self, rng: &mut NsRng, ledger: &mut EvalLedger) -> Result<Draw> {
        if ledger.remaining() == 0 {
            ledger.charge()?;
        }
        let point = self.model.sample_prior(rng);
        self.evaluate(point, rng, ledger)
    }

    /// Rejection sampling from the prior until `value > threshold` and the
    /// raw likelihood is not an excluded level.
    pub fn draw_constrained(
        &self,
        threshold: f64,
        rng: &mut NsRng,
        ledger: &mut EvalLedger,
    ) -> Result<Draw> {
        for _ in 0..self.max_attempts {
            let d = self.draw_prior(rng, ledger)?;
            if d.value > threshold && !self.excluded.contains(&d.raw) {
                return Ok(d);
            }
        }
        Err(Error::StallDetected {
            attempts: self.max_attempts,
            threshold,
        })
    }
}

/// One exact prior draw with its likelihood.
pub fn draw_prior<M: Model + ?Sized>(
    model: &M,
    rng: &mut NsRng,
    ledger: &mut EvalLedger,
) -> Result<(Point, f64)> {
    let d = Sampler::new(model, 1).draw_prior(rng, ledger)?;
    Ok((d.point, d.raw))
}

/// Prior draw conditioned on `L > threshold`, optionally also off every declared plateau.
pub fn draw_constrained<M: Model + ?Sized>(
    model: &M,
    threshold: f64,
    exclude_plateaus: bool,
    rng: &mut NsRng,
    ledger: &mut EvalLedger,
    max_attempts: u64,
) -> Result<(Point, f64)> {
    let mut sampler = Sampler::new(model, max_attempts);
    if exclude_plateaus {
        sampler = sampler.excluding(model.declared_plateaus().unwrap_or(&[]));
    }
    let d = sampler.draw_constrained(threshold, rng, ledger)?;
    Ok((d.point, d.raw))
}
