//! Sampling problems: a prior to draw from and a bounded likelihood.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measures::{PiecewiseProblem, PiecewiseSpec, PushforwardLaw};
use crate::rng::NsRng;
use crate::special::ChiSquared;

/// A parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }
}

/// A prior sampler paired with a bounded likelihood.
///
/// Implementations must be pure: the likelihood depends only on the point and
/// the prior draw only on the supplied generator.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn sample_prior(&self, rng: &mut NsRng) -> Point;

    fn likelihood(&self, x: &Point) -> f64;

    /// `(inf L, sup L)`.
    fn likelihood_bounds(&self) -> (f64, f64);

    /// Known plateau levels, strictly increasing. `None` means unknown, in
    /// which case plateau detection falls back to exact value collisions.
    fn declared_plateaus(&self) -> Option<&[f64]>;

    /// Exact `X(λ) = μ(L > λ)` when available.
    fn survival(&self, _level: f64) -> Option<f64> {
        None
    }

    /// Exact law of `X(L(x))` for `x ~ μ` when available.
    fn pushforward_law(&self) -> Option<PushforwardLaw> {
        None
    }

    fn is_declared_plateau(&self, value: f64) -> bool {
        self.declared_plateaus()
            .is_some_and(|levels| levels.contains(&value))
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_prior(&self, rng: &mut NsRng) -> Point {
        (**self).sample_prior(rng)
    }
    fn likelihood(&self, x: &Point) -> f64 {
        (**self).likelihood(x)
    }
    fn likelihood_bounds(&self) -> (f64, f64) {
        (**self).likelihood_bounds()
    }
    fn declared_plateaus(&self) -> Option<&[f64]> {
        (**self).declared_plateaus()
    }
    fn survival(&self, level: f64) -> Option<f64> {
        (**self).survival(level)
    }
    fn pushforward_law(&self) -> Option<PushforwardLaw> {
        (**self).pushforward_law()
    }
}

/// Capped Gaussian bump in five dimensions:
/// prior `N(0, 4 I₅)`, `L(x) = min(1 + exp(-‖x‖²/2), 1.01)`.
#[derive(Debug, Clone)]
pub struct Reference5d {
    plateaus: [f64; 1],
}

impl Reference5d {
    pub const DIM: usize = 5;
    pub const PRIOR_SD: f64 = 2.0;
    pub const PLATEAU: f64 = 1.01;
    pub const FLOOR: f64 = 1.0;

    /// `‖x‖²` at which the bump meets the cap: `2 ln 100`.
    pub fn plateau_radius_sq() -> f64 {
        2.0 * 100f64.ln()
    }

    /// Prior mass of the plateau, `P(χ²₅ ≤ ln(100)/2)`.
    pub fn plateau_mass() -> f64 {
        ChiSquared::new(Self::DIM as f64)
            .cdf(Self::plateau_radius_sq() / (Self::PRIOR_SD * Self::PRIOR_SD))
    }
}

impl Default for Reference5d {
    fn default() -> Self {
        Self {
            plateaus: [Self::PLATEAU],
        }
    }
}

pub fn build_reference_5d() -> Reference5d {
    Reference5d::default()
}

impl Model for Reference5d {
    fn name(&self) -> &str {
        "ref5d"
    }

    fn dim(&self) -> usize {
        Self::DIM
    }

    fn sample_prior(&self, rng: &mut NsRng) -> Point {
        Point(
            (0..Self::DIM)
                .map(|_| Self::PRIOR_SD * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
    }

    fn likelihood(&self, x: &Point) -> f64 {
        (1.0 + (-0.5 * x.norm_sq()).exp()).min(Self::PLATEAU)
    }

    fn likelihood_bounds(&self) -> (f64, f64) {
        (Self::FLOOR, Self::PLATEAU)
    }

    fn declared_plateaus(&self) -> Option<&[f64]> {
        Some(&self.plateaus)
    }

    // L > λ  ⟺  ‖x‖²/4 < -ln(λ - 1)/2, and ‖x‖²/4 ~ χ²₅
    fn survival(&self, level: f64) -> Option<f64> {
        Some(if level >= Self::PLATEAU {
            0.0
        } else if level <= Self::FLOOR {
            1.0
        } else {
            ChiSquared::new(Self::DIM as f64).cdf(-0.5 * (level - 1.0).ln())
        })
    }

    fn pushforward_law(&self) -> Option<PushforwardLaw> {
        Some(PushforwardLaw {
            atoms: vec![(0.0, Self::plateau_mass())],
        })
    }
}

/// A one-dimensional piecewise problem exposed as a [`Model`].
#[derive(Debug, Clone)]
pub struct PiecewiseModel {
    name: String,
    problem: PiecewiseProblem,
    plateaus: Vec<f64>,
}

pub fn build_piecewise_1d(spec: &PiecewiseSpec) -> Result<PiecewiseModel> {
    PiecewiseModel::new("piecewise", spec)
}

impl PiecewiseModel {
    pub fn new(name: impl Into<String>, spec: &PiecewiseSpec) -> Result<Self> {
        let problem = PiecewiseProblem::new(spec)?;
        let plateaus = problem.plateau_levels();
        Ok(Self {
            name: name.into(),
            problem,
            plateaus,
        })
    }

    pub fn problem(&self) -> &PiecewiseProblem {
        &self.problem
    }
}

impl Model for PiecewiseModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        1
    }

    fn sample_prior(&self, rng: &mut NsRng) -> Point {
        Point(vec![self.problem.sample_prior(rng.random::<f64>())])
    }

    fn likelihood(&self, x: &Point) -> f64 {
        self.problem.value(x.0[0])
    }

    fn likelihood_bounds(&self) -> (f64, f64) {
        (self.problem.inf_l(), self.problem.sup_l())
    }

    fn declared_plateaus(&self) -> Option<&[f64]> {
        Some(&self.plateaus)
    }

    fn survival(&self, level: f64) -> Option<f64> {
        Some(self.problem.survival_open(level))
    }

    fn pushforward_law(&self) -> Option<PushforwardLaw> {
        Some(self.problem.pushforward_law())
    }
}
