//! Checks on the pushforward law and independent evidence oracles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{PiecewiseProblem, PushforwardLaw};
use crate::model::{Model, PiecewiseModel, Reference5d};
use crate::quadrature::Simpson;
use crate::rng::NsRng;
use crate::special::ChiSquared;

/// Round-trip gap above which a point counts as problematic.
pub const ROUND_TRIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfReport {
    pub sample_count: usize,
    /// Exact `sup |F_emp - F_pred|`, taken over every sample and breakpoint
    /// from both sides.
    pub ks_distance: f64,
    /// Breakpoints of the predicted CDF: 0, 1 and both ends of every atom interval.
    pub grid: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
}

/// Reference CDF for a pushforward comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Against {
    Uniform,
    Law,
}

/// `Φ(xᵢ) = X(L(xᵢ))` for `N` prior draws.
pub fn pushforward_samples<M: Model + ?Sized>(
    model: &M,
    n: usize,
    rng: &mut NsRng,
) -> Result<Vec<f64>> {
    model
        .survival(model.likelihood_bounds().0)
        .ok_or(Error::MissingSurvival)?;
    Ok((0..n)
        .map(|_| {
            let x = model.sample_prior(rng);
            model.survival(model.likelihood(&x)).unwrap_or(f64::NAN)
        })
        .collect())
}

/// Kolmogorov distance between the empirical CDF of `samples` and `law`.
pub fn ks_distance(samples: &[f64], law: &PushforwardLaw) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let below = |v: f64| s.partition_point(|&x| x < v) as f64 / n;
    let at_or_below = |v: f64| s.partition_point(|&x| x <= v) as f64 / n;
    let mut d: f64 = 0.0;
    let mut check = |v: f64| {
        d = d
            .max((at_or_below(v) - law.cdf(v)).abs())
            .max((below(v) - law.cdf_left(v)).abs());
    };
    for &v in s.iter().chain(&law.breakpoints()) {
        check(v);
    }
    d.min(1.0)
}

fn report(samples: &[f64], law: &PushforwardLaw, threshold: f64) -> EcdfReport {
    let ks = ks_distance(samples, law);
    EcdfReport {
        sample_count: samples.len(),
        ks_distance: ks,
        grid: law.breakpoints(),
        threshold,
        pass: ks < threshold,
    }
}

/// Empirical law of `Φ` against the model's predicted mixed law.
pub fn verify_pushforward<M: Model + ?Sized>(
    model: &M,
    n: usize,
    rng: &mut NsRng,
    threshold: f64,
) -> Result<EcdfReport> {
    verify_pushforward_against(model, n, rng, threshold, Against::Law)
}

pub fn verify_pushforward_against<M: Model + ?Sized>(
    model: &M,
    n: usize,
    rng: &mut NsRng,
    threshold: f64,
    against: Against,
) -> Result<EcdfReport> {
    let law = match against {
        Against::Uniform => PushforwardLaw::uniform(),
        Against::Law => model.pushforward_law().ok_or(Error::MissingSurvival)?,
    };
    let samples = pushforward_samples(model, n, rng)?;
    Ok(report(&samples, &law, threshold))
}

/// Samples drawn straight from `law` checked against its own CDF.
pub fn verify_law_samples(
    law: &PushforwardLaw,
    n: usize,
    rng: &mut NsRng,
    threshold: f64,
) -> EcdfReport {
    let samples: Vec<f64> = (0..n).map(|_| law.transform(rng.random::<f64>())).collect();
    report(&samples, law, threshold)
}

/// `Z_a = E[min(1 + e^{-2S}, 1.01)]`, `S ~ χ²₅`, for the 5D reference.
pub fn analytic_evidence_5d(quad_points: usize) -> Result<f64> {
    analytic_evidence_capped(Reference5d::PLATEAU, quad_points)
}

/// `E[min(1 + e^{-2S}, cap)]` with `S ~ χ²₅`: the plateau term from the
/// chi-squared CDF plus quadrature over the uncapped tail.
pub fn analytic_evidence_capped(cap: f64, quad_points: usize) -> Result<f64> {
    if quad_points < 1000 {
        return Err(Error::InvalidConfig(format!(
            "need at least 1000 quadrature points, got {quad_points}"
        )));
    }
    if cap <= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "cap must exceed 1, got {cap}"
        )));
    }
    let chi = ChiSquared::new(Reference5d::DIM as f64);
    let s_star = if cap >= 2.0 {
        0.0
    } else {
        -0.5 * (cap - 1.0).ln()
    };
    // chi-squared 5 upper tail beyond 120 is below 1e-23
    let upper = s_star + 120.0;
    let tail = Simpson::with_panels(quad_points / 2).integrate(
        |s| (1.0 + (-2.0 * s).exp()) * chi.pdf(s),
        s_star,
        upper,
    )?;
    Ok(cap * chi.cdf(s_star) + tail + chi.sf(upper))
}

/// `∫ L dμ` by segment-aware quadrature.
pub fn quadrature_evidence_1d(problem: &PiecewiseProblem) -> Result<f64> {
    problem.expected_likelihood(2000)
}

/// Fraction of `N` prior draws whose round trip `L̃(X(L(x)))` misses `L(x)`.
pub fn problematic_mass_estimate(model: &PiecewiseModel, n: usize, rng: &mut NsRng) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one draw".into()));
    }
    let p = model.problem();
    let hits = (0..n)
        .filter(|_| {
            let x = model.sample_prior(rng).0[0];
            (p.round_trip(x) - p.value(x)).abs() > ROUND_TRIP_TOL
        })
        .count();
    Ok(hits as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::catalog;
    use crate::model::build_reference_5d;
    use crate::rng::seeded;
    use crate::special::gamma_q;

    fn model(name: &str) -> PiecewiseModel {
        PiecewiseModel::new(name, &catalog::by_name(name).unwrap()).unwrap()
    }

    #[test]
    fn reference_evidence_value() {
        let z = analytic_evidence_5d(10_000).unwrap();
        assert!((z - 1.002694).abs() < 5e-6, "{z}");
    }

    #[test]
    fn reference_evidence_matches_gamma_closed_form() {
        // E[e^{-2S}; S > s*] = 5^{-5/2} Q(5/2, 5 s*/2)
        let s_star = 0.5 * 100f64.ln();
        let chi = ChiSquared::new(5.0);
        let want =
            1.01 * chi.cdf(s_star) + chi.sf(s_star) + 5f64.powf(-2.5) * gamma_q(2.5, 2.5 * s_star);
        let got = analytic_evidence_5d(10_000).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn uncapped_evidence_is_mgf() {
        let got = analytic_evidence_capped(2.0, 10_000).unwrap();
        assert!((got - (1.0 + 5f64.powf(-2.5))).abs() < 1e-12, "{got}");
    }

    #[test]
    fn too_few_quadrature_points_rejected() {
        assert!(analytic_evidence_5d(10).is_err());
    }

    #[test]
    fn linear_pushforward_is_uniform() {
        let r = verify_pushforward_against(
            &model("linear"),
            10_000,
            &mut seeded(1),
            0.03,
            Against::Uniform,
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.grid, vec![0.0, 1.0]);
    }

    #[test]
    fn cap_fails_uniform_and_passes_law() {
        let m = model("cap");
        let u =
            verify_pushforward_against(&m, 10_000, &mut seeded(2), 0.03, Against::Uniform).unwrap();
        assert!(!u.pass && u.ks_distance > 0.4, "{u:?}");
        let l = verify_pushforward(&m, 10_000, &mut seeded(2), 0.03).unwrap();
        assert!(l.pass, "{l:?}");
        assert!(l.grid.contains(&0.5));
    }

    #[test]
    fn cap_half_the_values_are_zero() {
        let s = pushforward_samples(&model("cap"), 10_000, &mut seeded(3)).unwrap();
        let zeros = s.iter().filter(|&&v| v == 0.0).count() as f64 / 1e4;
        assert!((zeros - 0.5).abs() < 0.015, "{zeros}");
        assert!(s.iter().all(|&v| v == 0.0 || (0.5..=1.0).contains(&v)));
    }

    #[test]
    fn reference_plateau_fraction() {
        let m = build_reference_5d();
        let s = pushforward_samples(&m, 10_000, &mut seeded(4)).unwrap();
        let zeros = s.iter().filter(|&&v| v == 0.0).count() as f64 / 1e4;
        assert!((zeros - 0.194).abs() < 0.012, "{zeros}");
        assert!(
            verify_pushforward(&m, 10_000, &mut seeded(5), 0.03)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn reference_survival_matches_monte_carlo() {
        let m = build_reference_5d();
        let mut rng = seeded(6);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| m.likelihood(&m.sample_prior(&mut rng)) > 1.005)
            .count();
        let p = m.survival(1.005).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn law_samples_pass_their_own_law() {
        for (name, spec) in catalog::all() {
            let law = PiecewiseProblem::new(&spec).unwrap().pushforward_law();
            let r = verify_law_samples(&law, 10_000, &mut seeded(7), 0.03);
            assert!(r.pass, "{name}: {r:?}");
        }
    }

    #[test]
    fn uniformity_dichotomy_over_catalog() {
        for (name, spec) in catalog::all() {
            let m = PiecewiseModel::new(name, &spec).unwrap();
            let big_atom = m.problem().atoms().iter().any(|a| a.jump >= 0.1);
            let r = verify_pushforward_against(&m, 10_000, &mut seeded(8), 0.03, Against::Uniform)
                .unwrap();
            if m.problem().atoms().is_empty() {
                assert!(r.pass, "{name}: {r:?}");
            } else if big_atom {
                assert!(!r.pass, "{name}: {r:?}");
            }
        }
    }

    #[test]
    fn ks_distance_sees_both_sides_of_a_jump() {
        let law = PushforwardLaw {
            atoms: vec![(0.2, 0.3)],
        };
        // every sample at the atom: the empirical CDF jumps to 1 at 0.2 while F(0.2) = 0.5
        assert!((ks_distance(&[0.2; 10], &law) - 0.5).abs() < 1e-15);
        // every sample just right of the atom: F_emp(0.2) = 0 against F = 0.5
        assert!((ks_distance(&[0.6; 10], &law) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn quadrature_oracle_matches_hand_values() {
        for (name, want) in [("cap", 0.375), ("constant", 0.7), ("linear", 0.5)] {
            let p = PiecewiseProblem::new(&catalog::by_name(name).unwrap()).unwrap();
            assert!(
                (quadrature_evidence_1d(&p).unwrap() - want).abs() < 1e-12,
                "{name}"
            );
        }
    }

    #[test]
    fn quadrature_oracle_matches_both_sides() {
        for (name, spec) in catalog::all() {
            let p = PiecewiseProblem::new(&spec).unwrap();
            let (lhs, _) = p.paradigm_both_sides(2000).unwrap();
            assert!(
                (quadrature_evidence_1d(&p).unwrap() - lhs).abs() < 1e-10,
                "{name}"
            );
        }
    }

    #[test]
    fn problematic_points_are_null() {
        let m = model("case2");
        assert_eq!(
            problematic_mass_estimate(&m, 10_000, &mut seeded(9)).unwrap(),
            0.0
        );
        assert_eq!(m.problem().round_trip(1.5), 1.0);
        assert_eq!(
            problematic_mass_estimate(&model("linear"), 10_000, &mut seeded(9)).unwrap(),
            0.0
        );
    }
}
