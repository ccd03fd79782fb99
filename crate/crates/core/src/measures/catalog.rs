//! Built-in one-dimensional problems, covering every plateau case.

use super::{PiecewiseSpec, PriorSpec, SegmentSpec};

/// Half-width of the plateau of `min(exp(-2x²), 0.8)`.
pub fn capped_bump_edge() -> f64 {
    0.5 * (2.0 * 1.25f64.ln()).sqrt()
}

fn gaussian_prior() -> PriorSpec {
    PriorSpec::TruncatedGaussian {
        mean: 0.0,
        sd: 1.0,
        lo: None,
        hi: None,
    }
}

/// Looks up a built-in problem by name.
pub fn by_name(name: &str) -> Option<PiecewiseSpec> {
    let spec = match name {
        // L(x) = x
        "linear" => {
            PiecewiseSpec::uniform([0.0, 1.0], vec![SegmentSpec::linear(0.0, 1.0, 0.0, 1.0)])
        }
        // L(x) = min(x, 0.5)
        "cap" => PiecewiseSpec::uniform(
            [0.0, 1.0],
            vec![
                SegmentSpec::linear(0.0, 0.5, 0.0, 0.5),
                SegmentSpec::constant(0.5, 1.0, 0.5),
            ],
        ),
        "constant" => {
            PiecewiseSpec::uniform([0.0, 1.0], vec![SegmentSpec::constant(0.0, 1.0, 0.7)])
        }
        // L(x) = max(x, 0.3)
        "floor" => PiecewiseSpec::uniform(
            [0.0, 1.0],
            vec![
                SegmentSpec::constant(0.0, 0.3, 0.3),
                SegmentSpec::linear(0.3, 1.0, 0.3, 1.0),
            ],
        ),
        // L(x) = clamp(x, 0.2, 0.8)
        "floor_cap" => PiecewiseSpec::uniform(
            [0.0, 1.0],
            vec![
                SegmentSpec::constant(0.0, 0.2, 0.2),
                SegmentSpec::linear(0.2, 0.8, 0.2, 0.8),
                SegmentSpec::constant(0.8, 1.0, 0.8),
            ],
        ),
        // plateau strictly between inf and sup
        "mid_plateau" => PiecewiseSpec::uniform(
            [0.0, 1.0],
            vec![
                SegmentSpec::linear(0.0, 0.4, 0.0, 0.4),
                SegmentSpec::constant(0.4, 0.6, 0.4),
                SegmentSpec::linear(0.6, 1.0, 0.4, 0.8),
            ],
        ),
        // two disjoint constant pieces at one level merge into a single atom
        "twin_plateaus" => PiecewiseSpec::uniform(
            [0.0, 1.0],
            vec![
                SegmentSpec::constant(0.0, 0.2, 0.6),
                SegmentSpec::linear(0.2, 0.6, 0.1, 0.5),
                SegmentSpec::constant(0.6, 0.8, 0.6),
                SegmentSpec::linear(0.8, 1.0, 0.6, 0.9),
            ],
        ),
        // L(x) = 1 - x, floored at 0.2
        "decreasing_floor" => PiecewiseSpec::uniform(
            [0.0, 1.0],
            vec![
                SegmentSpec::linear(0.0, 0.8, 1.0, 0.2),
                SegmentSpec::constant(0.8, 1.0, 0.2),
            ],
        ),
        // exp(-2x²) under a standard normal truncated to [-2, 2]
        "bump" => PiecewiseSpec {
            domain: [-2.0, 2.0],
            prior: gaussian_prior(),
            segments: vec![
                SegmentSpec::bump(-2.0, 0.0, 0.0, 1.0, 0.0, 0.5),
                SegmentSpec::bump(0.0, 2.0, 0.0, 1.0, 0.0, 0.5),
            ],
        },
        // min(exp(-2x²), 0.8) under the same prior
        "capped_bump" => {
            let c = capped_bump_edge();
            PiecewiseSpec {
                domain: [-2.0, 2.0],
                prior: gaussian_prior(),
                segments: vec![
                    SegmentSpec::bump(-2.0, -c, 0.0, 1.0, 0.0, 0.5),
                    SegmentSpec::constant(-c, c, 0.8),
                    SegmentSpec::bump(c, 2.0, 0.0, 1.0, 0.0, 0.5),
                ],
            }
        }
        // prior mass only on [0, 1] of the domain [0, 2]; x in (1, 2] is problematic
        "case2" => PiecewiseSpec {
            domain: [0.0, 2.0],
            prior: PriorSpec::Uniform {
                lo: Some(0.0),
                hi: Some(1.0),
            },
            segments: vec![SegmentSpec::linear(0.0, 2.0, 0.0, 2.0)],
        },
        _ => return None,
    };
    Some(spec)
}

pub const NAMES: &[&str] = &[
    "linear",
    "cap",
    "constant",
    "floor",
    "floor_cap",
    "mid_plateau",
    "twin_plateaus",
    "decreasing_floor",
    "bump",
    "capped_bump",
    "case2",
];

pub fn all() -> Vec<(&'static str, PiecewiseSpec)> {
    NAMES
        .iter()
        .map(|&n| (n, by_name(n).expect("catalog entry")))
        .collect()
}
