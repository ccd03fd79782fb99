//! Nested sampling with deterministic shrinkage `X_k = X₀ e^{-k/n}`.
//!
//! Three strategies share one loop: plain, with every evaluation perturbed by
//! `Unif[-a, a]`, and split, where plateau mass is estimated up front and the
//! loop only explores the regular remainder.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, Point};
use crate::rng::NsRng;
use crate::sampler::{EvalLedger, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Vanilla,
    Randomized { a: f64 },
    Split,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Vanilla => "vanilla",
            Strategy::Randomized { .. } => "randomized",
            Strategy::Split => "split",
        }
    }

    pub fn noise(&self) -> Option<f64> {
        match *self {
            Strategy::Randomized { a } => Some(a),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_active: usize,
    pub budget_multiplier: f64,
    pub seed: u64,
    pub strategy: Strategy,
    pub remainder_term: bool,
    pub max_attempts: u64,
}

impl RunConfig {
    /// Remainder term on, `max_attempts = 10 n`.
    pub fn new(strategy: Strategy, n_active: usize, budget_multiplier: f64, seed: u64) -> Self {
        Self {
            n_active,
            budget_multiplier,
            seed,
            strategy,
            remainder_term: true,
            max_attempts: 10 * n_active as u64,
        }
    }

    pub fn without_remainder(mut self) -> Self {
        self.remainder_term = false;
        self
    }

    pub fn budget(&self) -> u64 {
        (self.budget_multiplier * self.n_active as f64).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_active == 0 {
            return bad("n_active must be positive".into());
        }
        if !(self.budget_multiplier.is_finite() && self.budget_multiplier > 0.0) {
            return bad(format!(
                "budget multiplier must be positive, got {}",
                self.budget_multiplier
            ));
        }
        if self.budget() < self.n_active as u64 {
            return bad(format!(
                "budget {} cannot hold the {} initial samples",
                self.budget(),
                self.n_active
            ));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive".into());
        }
        if let Strategy::Randomized { a } = self.strategy {
            if !(a.is_finite() && a > 0.0) {
                return bad(format!("perturbation half-width must be positive, got {a}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    BudgetExhausted,
    StallDetected,
    ActiveSetCollapsed,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::BudgetExhausted => "BudgetExhausted",
            Termination::StallDetected => "StallDetected",
            Termination::ActiveSetCollapsed => "ActiveSetCollapsed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: u64,
    #[serde(rename = "X_k")]
    pub x_k: f64,
    #[serde(rename = "L_k")]
    pub l_k: f64,
    #[serde(rename = "Z_partial")]
    pub z_partial: f64,
    pub evals_used: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub point: Point,
    pub likelihood: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSResult {
    pub strategy: Strategy,
    #[serde(rename = "Z")]
    pub z: f64,
    #[serde(rename = "log_Z")]
    pub log_z: f64,
    /// Plateau contribution `Σ L_h Δ_h`; zero outside the split strategy.
    pub plateau_evidence: f64,
    /// `X_K` times the mean active likelihood, already included in `z`.
    pub remainder: f64,
    pub trace: Vec<TraceRecord>,
    pub dead_points: Vec<WeightedPoint>,
    /// Actives left at termination, weighted by their share of the remainder.
    pub live_points: Vec<WeightedPoint>,
    pub termination: Termination,
    pub evals_used: u64,
}

impl NSResult {
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        if self.trace.is_empty() {
            w.write_record(["k", "X_k", "L_k", "Z_partial", "evals_used"])?;
        }
        for r in &self.trace {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauPartition {
    pub m: usize,
    pub levels: Vec<f64>,
    pub counts: Vec<usize>,
    pub masses: Vec<f64>,
    pub regular_actives: Vec<(Point, f64)>,
    pub xi0: f64,
    /// Initial samples that landed on a plateau, in draw order.
    pub plateau_samples: Vec<(Point, f64)>,
}

impl PlateauPartition {
    pub fn plateau_evidence(&self) -> f64 {
        self.levels
            .iter()
            .zip(&self.masses)
            .map(|(l, d)| l * d)
            .sum()
    }
}

/// Draws `m` prior samples and buckets those lying exactly on a plateau level.
///
/// Levels come from the model's declared plateaus; without a declaration every
/// likelihood value hit by at least two samples is treated as a plateau.
pub fn partition_initial<M: Model + ?Sized>(
    model: &M,
    m: usize,
    rng: &mut NsRng,
    ledger: &mut EvalLedger,
) -> Result<PlateauPartition> {
    let p = partition(&Sampler::new(model, 1), m, rng, ledger)?;
    if p.regular_actives.is_empty() {
        return Err(Error::DegeneratePartition {
            plateau_evidence: p.plateau_evidence(),
        });
    }
    Ok(p)
}

fn partition<M: Model + ?Sized>(
    sampler: &Sampler<'_, M>,
    m: usize,
    rng: &mut NsRng,
    ledger: &mut EvalLedger,
) -> Result<PlateauPartition> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "partition needs m >= 2, got {m}"
        )));
    }
    let mut draws = Vec::with_capacity(m);
    for _ in 0..m {
        let d = sampler.draw_prior(rng, ledger)?;
        draws.push((d.point, d.raw));
    }
    let levels: Vec<f64> = match sampler.model().declared_plateaus() {
        Some(levels) => levels.to_vec(),
        None => {
            let mut values: Vec<f64> = draws.iter().map(|d| d.1).collect();
            values.sort_by(f64::total_cmp);
            let mut found = Vec::new();
            for w in values.windows(2) {
                if w[0] == w[1] && found.last() != Some(&w[0]) {
                    found.push(w[0]);
                }
            }
            found
        }
    };
    let mut counts = vec![0usize; levels.len()];
    let mut regular_actives = Vec::new();
    let mut plateau_samples = Vec::new();
    for (point, l) in draws {
        match levels.iter().position(|&h| h == l) {
            Some(h) => {
                counts[h] += 1;
                plateau_samples.push((point, l));
            }
            None => regular_actives.push((point, l)),
        }
    }
    let masses = counts.iter().map(|&c| c as f64 / m as f64).collect();
    let xi0 = regular_actives.len() as f64 / m as f64;
    Ok(PlateauPartition {
        m,
        levels,
        counts,
        masses,
        regular_actives,
        xi0,
        plateau_samples,
    })
}

pub fn run<M: Model + ?Sized>(model: &M, config: &RunConfig, rng: &mut NsRng) -> Result<NSResult> {
    config.validate()?;
    match config.strategy {
        Strategy::Split => run_split(model, config, rng),
        _ => run_plain(model, config, rng),
    }
}

pub fn run_vanilla<M: Model + ?Sized>(
    model: &M,
    config: &RunConfig,
    rng: &mut NsRng,
) -> Result<NSResult> {
    expect_strategy(config, matches!(config.strategy, Strategy::Vanilla))?;
    run(model, config, rng)
}

pub fn run_randomized<M: Model + ?Sized>(
    model: &M,
    config: &RunConfig,
    rng: &mut NsRng,
) -> Result<NSResult> {
    expect_strategy(
        config,
        matches!(config.strategy, Strategy::Randomized { .. }),
    )?;
    run(model, config, rng)
}

fn expect_strategy(config: &RunConfig, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "strategy {} does not match this entry point",
            config.strategy
        )))
    }
}

fn run_plain<M: Model + ?Sized>(
    model: &M,
    config: &RunConfig,
    rng: &mut NsRng,
) -> Result<NSResult> {
    let mut sampler = Sampler::new(model, config.max_attempts);
    if let Some(a) = config.strategy.noise() {
        sampler = sampler.with_noise(a);
    }
    let mut ledger = EvalLedger::new(config.budget());
    let mut actives = Vec::with_capacity(config.n_active);
    for _ in 0..config.n_active {
        let d = sampler.draw_prior(rng, &mut ledger)?;
        actives.push((d.point, d.raw, d.value));
    }
    let state = Accumulator::new(config.strategy, 1.0, 0.0, Vec::new());
    Ok(state.explore(&sampler, actives, config, rng, ledger))
}

/// Plateau masses from `m = n` prior draws, then nested sampling on the rest
/// with `X_k = ξ₀ e^{-k/n_r}` and plateau levels excluded from replacement.
pub fn run_split<M: Model + ?Sized>(
    model: &M,
    config: &RunConfig,
    rng: &mut NsRng,
) -> Result<NSResult> {
    expect_strategy(config, matches!(config.strategy, Strategy::Split))?;
    config.validate()?;
    let mut ledger = EvalLedger::new(config.budget());
    let p = partition(
        &Sampler::new(model, 1),
        config.n_active.max(2),
        rng,
        &mut ledger,
    )?;
    let sampler = Sampler::new(model, config.max_attempts).excluding(&p.levels);
    let z_c = p.plateau_evidence();
    let dead = p
        .plateau_samples
        .iter()
        .map(|(point, l)| WeightedPoint {
            point: point.clone(),
            likelihood: *l,
            weight: l / p.m as f64,
        })
        .collect();
    let actives = p
        .regular_actives
        .into_iter()
        .map(|(pt, l)| (pt, l, l))
        .collect();
    let state = Accumulator::new(config.strategy, p.xi0, z_c, dead);
    Ok(state.explore(&sampler, actives, config, rng, ledger))
}

struct Active {
    point: Point,
    raw: f64,
    value: f64,
    order: u64,
}

struct Accumulator {
    strategy: Strategy,
    x0: f64,
    z_c: f64,
    z: f64,
    trace: Vec<TraceRecord>,
    dead: Vec<WeightedPoint>,
}

impl Accumulator {
    fn new(strategy: Strategy, x0: f64, z_c: f64, dead: Vec<WeightedPoint>) -> Self {
        Self {
            strategy,
            x0,
            z_c,
            z: z_c,
            trace: Vec::new(),
            dead,
        }
    }

    fn explore<M: Model + ?Sized>(
        mut self,
        sampler: &Sampler<'_, M>,
        initial: Vec<(Point, f64, f64)>,
        config: &RunConfig,
        rng: &mut NsRng,
        mut ledger: EvalLedger,
    ) -> NSResult {
        let n_eff = initial.len() as f64;
        let mut order = 0u64;
        let mut actives: Vec<Active> = initial
            .into_iter()
            .map(|(point, raw, value)| {
                order += 1;
                Active {
                    point,
                    raw,
                    value,
                    order: order - 1,
                }
            })
            .collect();

        let mut x_prev = self.x0;
        let mut k = 0u64;
        let termination = loop {
            let Some(lowest) = lowest_index(&actives) else {
                break Termination::ActiveSetCollapsed;
            };
            let s = actives.swap_remove(lowest);
            k += 1;
            let x_k = self.x0 * (-(k as f64) / n_eff).exp();
            let weight = (x_prev - x_k) * s.value;
            self.z += weight;
            x_prev = x_k;
            self.trace.push(TraceRecord {
                k,
                x_k,
                l_k: s.value,
                z_partial: self.z,
                evals_used: ledger.used(),
            });
            self.dead.push(WeightedPoint {
                point: s.point,
                likelihood: s.raw,
                weight,
            });
            match sampler.draw_constrained(s.value, rng, &mut ledger) {
                Ok(d) => {
                    actives.push(Active {
                        point: d.point,
                        raw: d.raw,
                        value: d.value,
                        order,
                    });
                    order += 1;
                }
                Err(Error::BudgetExhausted { .. }) => break Termination::BudgetExhausted,
                Err(_) => break Termination::StallDetected,
            }
        };

        let mut remainder = 0.0;
        let mut live_points = Vec::new();
        if config.remainder_term && !actives.is_empty() {
            actives.sort_by_key(|a| a.order);
            let mean = actives.iter().map(|a| a.value).sum::<f64>() / actives.len() as f64;
            remainder = x_prev * mean;
            let share = x_prev / actives.len() as f64;
            live_points = actives
                .into_iter()
                .map(|a| WeightedPoint {
                    weight: share * a.value,
                    point: a.point,
                    likelihood: a.raw,
                })
                .collect();
        }
        let z = self.z + remainder;
        NSResult {
            strategy: self.strategy,
            z,
            log_z: z.ln(),
            plateau_evidence: self.z_c,
            remainder,
            trace: self.trace,
            dead_points: self.dead,
            live_points,
            termination: if k == 0 {
                Termination::ActiveSetCollapsed
            } else {
                termination
            },
            evals_used: ledger.used(),
        }
    }
}

fn lowest_index(actives: &[Active]) -> Option<usize> {
    actives
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.value.total_cmp(&b.value).then(a.order.cmp(&b.order)))
        .map(|(i, _)| i)
}

/// Importance-weighted posterior mean and per-coordinate variance over dead
/// and live points.
pub fn posterior_summaries(result: &NSResult) -> Result<(Point, Vec<f64>)> {
    let points: Vec<&WeightedPoint> = result
        .dead_points
        .iter()
        .chain(&result.live_points)
        .collect();
    let Some(first) = points.first() else {
        return Err(Error::InvalidConfig(
            "posterior needs at least one dead point".into(),
        ));
    };
    let dim = first.point.dim();
    let total: f64 = points.iter().map(|p| p.weight).sum();
    if points.len() == 1 || total <= 0.0 {
        if points.len() == 1 {
            return Ok((first.point.clone(), vec![0.0; dim]));
        }
        return Err(Error::InvalidConfig("posterior weights sum to zero".into()));
    }
    let mut mean = vec![0.0; dim];
    for p in &points {
        for (m, c) in mean.iter_mut().zip(p.point.coords()) {
            *m += p.weight / total * c;
        }
    }
    let mut var = vec![0.0; dim];
    for p in &points {
        for ((v, c), m) in var.iter_mut().zip(p.point.coords()).zip(&mean) {
            *v += p.weight / total * (c - m) * (c - m);
        }
    }
    Ok((Point(mean), var))
}
