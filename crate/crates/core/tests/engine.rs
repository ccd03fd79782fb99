use std::sync::atomic::{AtomicU64, Ordering};

use plateau_ns::diagnostics::{analytic_evidence_5d, quadrature_evidence_1d};
use plateau_ns::engine::*;
use plateau_ns::measures::{catalog, PushforwardLaw};
use plateau_ns::model::{build_reference_5d, Model, PiecewiseModel, Point};
use plateau_ns::rng::{seeded, NsRng};
use plateau_ns::sampler::EvalLedger;
use plateau_ns::Error;

fn catalog_model(name: &str) -> PiecewiseModel {
    PiecewiseModel::new(name, &catalog::by_name(name).unwrap()).unwrap()
}

fn run_seed<M: Model>(model: &M, config: RunConfig) -> NSResult {
    run(model, &config, &mut seeded(config.seed)).unwrap()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Hides declared plateaus so the engine must detect them from collisions.
struct Undeclared<M>(M);

impl<M: Model> Model for Undeclared<M> {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn sample_prior(&self, rng: &mut NsRng) -> Point {
        self.0.sample_prior(rng)
    }
    fn likelihood(&self, x: &Point) -> f64 {
        self.0.likelihood(x)
    }
    fn likelihood_bounds(&self) -> (f64, f64) {
        self.0.likelihood_bounds()
    }
    fn declared_plateaus(&self) -> Option<&[f64]> {
        None
    }
}

/// Counts likelihood calls independently of the ledger.
struct Counting<M> {
    inner: M,
    calls: AtomicU64,
}

impl<M: Model> Model for Counting<M> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample_prior(&self, rng: &mut NsRng) -> Point {
        self.inner.sample_prior(rng)
    }
    fn likelihood(&self, x: &Point) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.likelihood(x)
    }
    fn likelihood_bounds(&self) -> (f64, f64) {
        self.inner.likelihood_bounds()
    }
    fn declared_plateaus(&self) -> Option<&[f64]> {
        self.inner.declared_plateaus()
    }
    fn pushforward_law(&self) -> Option<PushforwardLaw> {
        self.inner.pushforward_law()
    }
}

#[test]
fn constant_likelihood_vanilla_stalls_at_c() {
    let r = run_seed(
        &catalog_model("constant"),
        RunConfig::new(Strategy::Vanilla, 20, 40.0, 1),
    );
    assert_eq!(r.termination, Termination::StallDetected);
    assert_eq!(r.iterations(), 1);
    assert!((r.z - 0.7).abs() < 1e-15, "{}", r.z);
}

#[test]
fn constant_likelihood_randomized_stays_within_noise() {
    for a in [1e-3, 1e-5] {
        let r = run_seed(
            &catalog_model("constant"),
            RunConfig::new(Strategy::Randomized { a }, 20, 10.0, 2),
        );
        assert!(r.z >= 0.7 - a && r.z <= 0.7 + a, "a={a}: {}", r.z);
        assert_eq!(r.termination, Termination::BudgetExhausted);
    }
}

#[test]
fn constant_likelihood_partition_is_degenerate() {
    let m = catalog_model("constant");
    let err = partition_initial(&m, 50, &mut seeded(3), &mut EvalLedger::new(50)).unwrap_err();
    assert_eq!(
        err,
        Error::DegeneratePartition {
            plateau_evidence: 0.7
        }
    );
    let r = run_seed(&m, RunConfig::new(Strategy::Split, 50, 10.0, 3));
    assert_eq!(r.z, 0.7);
    assert_eq!(r.termination, Termination::ActiveSetCollapsed);
    assert!(r.trace.is_empty());
    assert_eq!(r.evals_used, 50);
}

#[test]
fn vanilla_linear_matches_oracle() {
    let m = catalog_model("linear");
    let truth = quadrature_evidence_1d(m.problem()).unwrap();
    let zs: Vec<f64> = (0..30)
        .map(|s| run_seed(&m, RunConfig::new(Strategy::Vanilla, 500, 40.0, 100 + s)).z)
        .collect();
    let (mean, se) = mean_and_se(&zs);
    assert!((mean - truth).abs() < 3.0 * se, "{mean} ± {se} vs {truth}");
}

#[test]
fn split_cap_matches_oracle() {
    let m = catalog_model("cap");
    let zs: Vec<f64> = (0..30)
        .map(|s| run_seed(&m, RunConfig::new(Strategy::Split, 500, 40.0, 200 + s)).z)
        .collect();
    let (mean, se) = mean_and_se(&zs);
    assert!((mean - 0.375).abs() < 3.0 * se, "{mean} ± {se}");
}

#[test]
fn vanilla_reference_stalls_short_of_the_evidence() {
    let z_a = analytic_evidence_5d(10_000).unwrap();
    let r = run_seed(
        &build_reference_5d(),
        RunConfig::new(Strategy::Vanilla, 100, 40.0, 4).without_remainder(),
    );
    assert_eq!(r.termination, Termination::StallDetected);
    assert!(r.z < z_a);
    assert_eq!(r.trace.last().unwrap().l_k, 1.01);
}

#[test]
fn randomized_reference_does_not_stall() {
    let r = run_seed(
        &build_reference_5d(),
        RunConfig::new(Strategy::Randomized { a: 1e-5 }, 100, 40.0, 5),
    );
    assert_eq!(r.termination, Termination::BudgetExhausted);
    assert!((r.z - 1.002694).abs() < 2e-3, "{}", r.z);
}

#[test]
fn partition_reference_mass() {
    let m = build_reference_5d();
    let p = partition_initial(&m, 1000, &mut seeded(6), &mut EvalLedger::new(1000)).unwrap();
    assert_eq!(p.levels, vec![1.01]);
    assert!((p.masses[0] - 0.194).abs() < 0.04, "{}", p.masses[0]);
    assert_eq!(p.counts[0] + p.regular_actives.len(), p.m);
    assert_eq!(p.xi0, p.regular_actives.len() as f64 / 1000.0);
}

#[test]
fn partition_without_plateaus_keeps_everything() {
    let p = partition_initial(
        &catalog_model("linear"),
        100,
        &mut seeded(7),
        &mut EvalLedger::new(100),
    )
    .unwrap();
    assert!(p.levels.is_empty());
    assert_eq!(p.regular_actives.len(), 100);
    assert_eq!(p.xi0, 1.0);
}

#[test]
fn partition_detects_undeclared_plateaus_from_collisions() {
    let m = Undeclared(catalog_model("floor_cap"));
    let p = partition_initial(&m, 400, &mut seeded(8), &mut EvalLedger::new(400)).unwrap();
    assert_eq!(p.levels, vec![0.2, 0.8]);
}

#[test]
fn partition_respects_budget() {
    let err = partition_initial(
        &build_reference_5d(),
        100,
        &mut seeded(9),
        &mut EvalLedger::new(50),
    )
    .unwrap_err();
    assert!(matches!(err, Error::BudgetExhausted { .. }));
}

#[test]
fn split_reference_starts_with_plateau_lead() {
    let r = run_seed(
        &build_reference_5d(),
        RunConfig::new(Strategy::Split, 100, 40.0, 7),
    );
    let first = r.trace[0];
    assert!((first.z_partial - 0.2).abs() < 0.1, "{}", first.z_partial);
    assert!(r.plateau_evidence > 0.0 && first.z_partial > r.plateau_evidence);
}

#[test]
fn split_without_plateaus_reproduces_vanilla() {
    let m = catalog_model("bump");
    for seed in 0..5 {
        let mut v = run_seed(&m, RunConfig::new(Strategy::Vanilla, 50, 20.0, seed));
        let s = run_seed(&m, RunConfig::new(Strategy::Split, 50, 20.0, seed));
        v.strategy = Strategy::Split;
        assert_eq!(v, s);
    }
}

#[test]
fn mass_bookkeeping_and_monotone_trace() {
    let configs = [
        (Strategy::Vanilla, "linear"),
        (Strategy::Randomized { a: 1e-3 }, "cap"),
        (Strategy::Split, "floor_cap"),
    ];
    for (strategy, name) in configs {
        let r = run_seed(&catalog_model(name), RunConfig::new(strategy, 50, 20.0, 11));
        let x0 = if strategy == Strategy::Split {
            1.0 - r
                .dead_points
                .iter()
                .filter(|d| d.likelihood == 0.2 || d.likelihood == 0.8)
                .count() as f64
                / 50.0
        } else {
            1.0
        };
        let mut prev_x = x0;
        let mut shrink = 0.0;
        for w in r.trace.windows(2) {
            assert!(w[1].x_k < w[0].x_k);
            assert!(w[1].l_k >= w[0].l_k);
            assert!(w[1].z_partial >= w[0].z_partial);
        }
        for t in &r.trace {
            shrink += prev_x - t.x_k;
            prev_x = t.x_k;
        }
        assert!((shrink + prev_x - x0).abs() < 1e-12, "{name}");
        let total: f64 = r.dead_points.iter().map(|d| d.weight).sum::<f64>() + r.remainder;
        assert!((total - r.z).abs() < 1e-12, "{name}");
        let live: f64 = r.live_points.iter().map(|d| d.weight).sum();
        assert!((live - r.remainder).abs() < 1e-14);
    }
}

#[test]
fn split_estimate_is_bracketed() {
    let m = catalog_model("floor_cap");
    for seed in 0..10 {
        let r = run_seed(&m, RunConfig::new(Strategy::Split, 100, 20.0, seed));
        let regular = r
            .dead_points
            .iter()
            .filter(|d| d.likelihood != 0.2 && d.likelihood != 0.8)
            .count();
        let xi0 = 1.0 - (r.dead_points.len() - regular) as f64 / 100.0;
        assert!(r.z >= r.plateau_evidence);
        assert!(r.z <= r.plateau_evidence + xi0 * 0.8 + 1e-12);
    }
}

#[test]
fn evidence_stays_within_likelihood_bounds() {
    for (name, _) in catalog::all() {
        let m = catalog_model(name);
        let (lo, hi) = m.likelihood_bounds();
        for strategy in [Strategy::Vanilla, Strategy::Split] {
            let r = run_seed(&m, RunConfig::new(strategy, 40, 10.0, 13));
            assert!(
                r.z >= lo - 1e-12 && r.z <= hi + 1e-12,
                "{name} {strategy}: {}",
                r.z
            );
        }
    }
}

#[test]
fn ledger_matches_instrumented_count() {
    for strategy in [
        Strategy::Vanilla,
        Strategy::Randomized { a: 1e-5 },
        Strategy::Split,
    ] {
        let m = Counting {
            inner: build_reference_5d(),
            calls: AtomicU64::new(0),
        };
        let r = run_seed(&m, RunConfig::new(strategy, 50, 10.0, 14));
        assert_eq!(r.evals_used, m.calls.load(Ordering::Relaxed), "{strategy}");
        assert!(r.evals_used <= 500);
    }
}

#[test]
fn runs_are_deterministic() {
    let m = build_reference_5d();
    for strategy in [
        Strategy::Vanilla,
        Strategy::Randomized { a: 1e-7 },
        Strategy::Split,
    ] {
        let c = RunConfig::new(strategy, 30, 10.0, 15);
        let a = serde_json::to_string(&run_seed(&m, c)).unwrap();
        let b = serde_json::to_string(&run_seed(&m, c)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn trace_csv_header() {
    let r = run_seed(
        &catalog_model("linear"),
        RunConfig::new(Strategy::Vanilla, 10, 5.0, 16),
    );
    let mut buf = Vec::new();
    r.write_trace_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("k,X_k,L_k,Z_partial,evals_used\n1,"));
    assert_eq!(text.lines().count(), r.iterations() + 1);
}

#[test]
fn invalid_configs_rejected() {
    let m = catalog_model("linear");
    let bad = [
        RunConfig::new(Strategy::Vanilla, 0, 10.0, 0),
        RunConfig::new(Strategy::Vanilla, 10, 0.5, 0),
        RunConfig::new(Strategy::Randomized { a: 0.0 }, 10, 10.0, 0),
        RunConfig::new(Strategy::Randomized { a: -1e-3 }, 10, 10.0, 0),
    ];
    for c in bad {
        assert!(
            matches!(run(&m, &c, &mut seeded(0)), Err(Error::InvalidConfig(_))),
            "{c:?}"
        );
    }
    let c = RunConfig::new(Strategy::Split, 10, 10.0, 0);
    assert!(run_vanilla(&m, &c, &mut seeded(0)).is_err());
    assert!(run_randomized(&m, &c, &mut seeded(0)).is_err());
}

#[test]
fn posterior_reference_is_centred() {
    // posterior sd is about 2 per coordinate, so one run alone is too noisy for 0.05
    let m = build_reference_5d();
    let runs = 20;
    let mut mean = [0.0; 5];
    for seed in 0..runs {
        let r = run_seed(&m, RunConfig::new(Strategy::Split, 500, 40.0, 400 + seed));
        let (mu, var) = posterior_summaries(&r).unwrap();
        assert!(var.iter().all(|&v| v > 0.0));
        for (acc, c) in mean.iter_mut().zip(mu.coords()) {
            *acc += c / runs as f64;
        }
    }
    for c in mean {
        assert!(c.abs() < 0.05, "{mean:?}");
    }
}

#[test]
fn posterior_linear_mean() {
    let m = catalog_model("linear");
    let means: Vec<f64> = (0..30)
        .map(|s| {
            let r = run_seed(&m, RunConfig::new(Strategy::Vanilla, 500, 40.0, 300 + s));
            posterior_summaries(&r).unwrap().0.coords()[0]
        })
        .collect();
    let (mean, se) = mean_and_se(&means);
    assert!((mean - 2.0 / 3.0).abs() < 3.0 * se, "{mean} ± {se}");
}

#[test]
fn posterior_single_point() {
    let r = NSResult {
        strategy: Strategy::Vanilla,
        z: 0.5,
        log_z: 0.5f64.ln(),
        plateau_evidence: 0.0,
        remainder: 0.0,
        trace: Vec::new(),
        dead_points: vec![WeightedPoint {
            point: Point(vec![0.3, -1.0]),
            likelihood: 0.5,
            weight: 0.5,
        }],
        live_points: Vec::new(),
        termination: Termination::StallDetected,
        evals_used: 1,
    };
    let (mean, var) = posterior_summaries(&r).unwrap();
    assert_eq!(mean, Point(vec![0.3, -1.0]));
    assert_eq!(var, vec![0.0, 0.0]);
}
