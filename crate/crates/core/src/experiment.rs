//! Replicated run grids over `(strategy, n, budget, a)`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{analytic_evidence_5d, quadrature_evidence_1d};
use crate::engine::{run, NSResult, RunConfig, Strategy, TraceRecord};
use crate::error::{Error, Result};
use crate::measures::{catalog, PiecewiseSpec, PushforwardLaw};
use crate::model::{Model, PiecewiseModel, Point, Reference5d};
use crate::rng::{derive_seed, seeded, NsRng};

/// Any model the command line can name: the 5D reference, a catalog entry or
/// a JSON problem file.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Reference(Reference5d),
    Piecewise(Box<PiecewiseModel>),
}

impl AnyModel {
    pub fn load(name: &str) -> Result<Self> {
        if name == "ref5d" {
            return Ok(AnyModel::Reference(Reference5d::default()));
        }
        if let Some(spec) = catalog::by_name(name) {
            return Ok(AnyModel::Piecewise(Box::new(PiecewiseModel::new(
                name, &spec,
            )?)));
        }
        let path = Path::new(name);
        if path.exists() {
            let spec = PiecewiseSpec::load(path)?;
            let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name);
            return Ok(AnyModel::Piecewise(Box::new(PiecewiseModel::new(
                label, &spec,
            )?)));
        }
        Err(Error::InvalidConfig(format!(
            "unknown model {name:?}: expected ref5d, one of [{}], or a problem file",
            catalog::NAMES.join(", ")
        )))
    }

    fn inner(&self) -> &dyn Model {
        match self {
            AnyModel::Reference(m) => m,
            AnyModel::Piecewise(m) => m.as_ref(),
        }
    }

    /// Exact evidence from the independent oracle for this model.
    pub fn reference_evidence(&self) -> Result<f64> {
        match self {
            AnyModel::Reference(_) => analytic_evidence_5d(10_000),
            AnyModel::Piecewise(m) => quadrature_evidence_1d(m.problem()),
        }
    }
}

impl Model for AnyModel {
    fn name(&self) -> &str {
        self.inner().name()
    }
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn sample_prior(&self, rng: &mut NsRng) -> Point {
        self.inner().sample_prior(rng)
    }
    fn likelihood(&self, x: &Point) -> f64 {
        self.inner().likelihood(x)
    }
    fn likelihood_bounds(&self) -> (f64, f64) {
        self.inner().likelihood_bounds()
    }
    fn declared_plateaus(&self) -> Option<&[f64]> {
        self.inner().declared_plateaus()
    }
    fn survival(&self, level: f64) -> Option<f64> {
        self.inner().survival(level)
    }
    fn pushforward_law(&self) -> Option<PushforwardLaw> {
        self.inner().pushforward_law()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridStrategy {
    Vanilla,
    Randomized,
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    #[serde(default = "default_model")]
    pub model: String,
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub a_values: Vec<f64>,
    pub budget_multipliers: Vec<f64>,
    pub replicates: u32,
    pub base_seed: u64,
    pub strategies: Vec<GridStrategy>,
    /// Off by default so that grids report the bare upper sum.
    #[serde(default)]
    pub remainder_term: bool,
    #[serde(default)]
    pub max_attempts: Option<u64>,
}

fn default_model() -> String {
    "ref5d".into()
}

/// One run of the grid before it executes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub cell: u32,
    pub replicate: u32,
    pub config: RunConfig,
}

impl ExperimentGrid {
    /// The full-scale protocol: three sizes, three half-widths, two budgets, 200 replicates.
    pub fn standard() -> Self {
        Self {
            model: default_model(),
            n_values: vec![50, 100, 500],
            a_values: vec![1e-3, 1e-5, 1e-7],
            budget_multipliers: vec![10.0, 40.0],
            replicates: 200,
            base_seed: 2024,
            strategies: vec![GridStrategy::Randomized, GridStrategy::Split],
            remainder_term: false,
            max_attempts: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.n_values.is_empty()
            || self.budget_multipliers.is_empty()
            || self.strategies.is_empty()
        {
            return bad("n_values, budget_multipliers and strategies must be non-empty");
        }
        if self.strategies.contains(&GridStrategy::Randomized) && self.a_values.is_empty() {
            return bad("randomized strategy needs at least one a value");
        }
        for job in self.jobs() {
            job.config.validate()?;
        }
        Ok(())
    }

    /// Cells in order strategy, n, budget, a; replicates innermost.
    pub fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        let mut cell = 0u32;
        for &strategy in &self.strategies {
            for &n in &self.n_values {
                for &mult in &self.budget_multipliers {
                    let variants: Vec<Strategy> = match strategy {
                        GridStrategy::Vanilla => vec![Strategy::Vanilla],
                        GridStrategy::Split => vec![Strategy::Split],
                        GridStrategy::Randomized => self
                            .a_values
                            .iter()
                            .map(|&a| Strategy::Randomized { a })
                            .collect(),
                    };
                    for s in variants {
                        for replicate in 0..self.replicates {
                            let seed = derive_seed(self.base_seed, cell, replicate);
                            let mut config = RunConfig::new(s, n, mult, seed);
                            config.remainder_term = self.remainder_term;
                            if let Some(m) = self.max_attempts {
                                config.max_attempts = m;
                            }
                            jobs.push(Job {
                                cell,
                                replicate,
                                config,
                            });
                        }
                        cell += 1;
                    }
                }
            }
        }
        jobs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: String,
    pub n: usize,
    pub a: Option<f64>,
    pub budget: u64,
    pub seed: u64,
    #[serde(rename = "Z_final")]
    pub z_final: f64,
    pub abs_error: f64,
    pub evals_used: u64,
    pub termination: String,
}

impl RunRecord {
    fn new(config: &RunConfig, z_ref: f64, outcome: &Result<NSResult>) -> Self {
        let (z, evals, termination) = match outcome {
            Ok(r) => (r.z, r.evals_used, r.termination.to_string()),
            Err(e) => (f64::NAN, 0, format!("Failed: {e}")),
        };
        Self {
            strategy: config.strategy.label().into(),
            n: config.n_active,
            a: config.strategy.noise(),
            budget: config.budget(),
            seed: config.seed,
            z_final: z,
            abs_error: (z - z_ref).abs(),
            evals_used: evals,
            termination,
        }
    }
}

/// One finished replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub cell: u32,
    pub replicate: u32,
    pub record: RunRecord,
    pub trace: Option<Vec<TraceRecord>>,
}

impl Outcome {
    pub fn trace_file_name(&self) -> String {
        format!("trace_cell{:03}_rep{:03}.csv", self.cell, self.replicate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Maps `f` over `items`, keeping input order. Runs on the rayon pool when the
/// `parallel` feature is on and `exec` asks for it.
pub fn map_ordered<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

pub fn run_grid(
    grid: &ExperimentGrid,
    model: &AnyModel,
    exec: Execution,
    keep_traces: bool,
) -> Result<Vec<Outcome>> {
    grid.validate()?;
    let z_ref = model.reference_evidence()?;
    let jobs = grid.jobs();
    Ok(map_ordered(&jobs, exec, |job| {
        let outcome = run(model, &job.config, &mut seeded(job.config.seed));
        Outcome {
            cell: job.cell,
            replicate: job.replicate,
            record: RunRecord::new(&job.config, z_ref, &outcome),
            trace: keep_traces.then(|| outcome.map(|r| r.trace).unwrap_or_default()),
        }
    }))
}

pub fn write_records<W: Write>(records: &[RunRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// Linear interpolation between order statistics; NaN entries are ignored.
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (v.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: String,
    pub n: usize,
    pub a: Option<f64>,
    pub budget: u64,
    pub replicates: usize,
    #[serde(rename = "Z_final")]
    pub z_final: Option<Quartiles>,
    pub abs_error: Option<Quartiles>,
    pub terminations: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub model: String,
    #[serde(rename = "Z_ref")]
    pub z_ref: f64,
    pub cells: Vec<CellSummary>,
}

impl ExperimentSummary {
    /// Groups records into cells in first-appearance order.
    pub fn from_records(model: &str, z_ref: f64, records: &[RunRecord]) -> Self {
        let mut cells: Vec<(CellKey, Vec<&RunRecord>)> = Vec::new();
        for r in records {
            let key = CellKey::of(r);
            match cells.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(r),
                None => cells.push((key, vec![r])),
            }
        }
        let cells = cells
            .into_iter()
            .map(|(_, rs)| {
                let z: Vec<f64> = rs.iter().map(|r| r.z_final).collect();
                let e: Vec<f64> = rs.iter().map(|r| r.abs_error).collect();
                let mut terminations = BTreeMap::new();
                for r in &rs {
                    *terminations.entry(r.termination.clone()).or_insert(0) += 1;
                }
                CellSummary {
                    strategy: rs[0].strategy.clone(),
                    n: rs[0].n,
                    a: rs[0].a,
                    budget: rs[0].budget,
                    replicates: rs.len(),
                    z_final: Quartiles::of(&z),
                    abs_error: Quartiles::of(&e),
                    terminations,
                }
            })
            .collect();
        Self {
            model: model.into(),
            z_ref,
            cells,
        }
    }

    pub fn cell(
        &self,
        strategy: &str,
        n: usize,
        budget: u64,
        a: Option<f64>,
    ) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.strategy == strategy && c.n == n && c.budget == budget && c.a == a)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CellKey {
    strategy: String,
    n: usize,
    a_bits: Option<u64>,
    budget: u64,
}

impl CellKey {
    fn of(r: &RunRecord) -> Self {
        Self {
            strategy: r.strategy.clone(),
            n: r.n,
            a_bits: r.a.map(f64::to_bits),
            budget: r.budget,
        }
    }
}

impl fmt::Display for CellSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.a.map_or("-".to_string(), |a| format!("{a:e}"));
        let med = self.abs_error.map_or(f64::NAN, |q| q.median);
        write!(
            f,
            "{:<10} n={:<4} budget={:<6} a={:<6} median|Z-Z_ref|={:.3e}",
            self.strategy, self.n, self.budget, a, med
        )
    }
}
