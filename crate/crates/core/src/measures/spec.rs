//! JSON description of a one-dimensional piecewise test problem.
//!
//! ```json
//! {
//!   "domain": [0.0, 1.0],
//!   "prior": { "kind": "uniform" },
//!   "segments": [
//!     { "from": 0.0, "to": 0.5, "kind": "linear", "left": 0.0, "right": 0.5 },
//!     { "from": 0.5, "to": 1.0, "kind": "constant", "value": 0.5 }
//!   ]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Uniform on `[lo, hi]`; both default to the domain endpoints.
    Uniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
    /// Gaussian restricted to `[lo, hi]` (defaults: the domain) and renormalized.
    TruncatedGaussian {
        mean: f64,
        sd: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PieceSpec {
    /// Straight line from `left` at `from` to `right` at `to`.
    Linear {
        left: f64,
        right: f64,
    },
    Constant {
        value: f64,
    },
    /// `base + height * exp(-(x - center)^2 / (2 width^2))`; `center` must not
    /// lie strictly inside the segment.
    GaussianBump {
        #[serde(default)]
        base: f64,
        height: f64,
        center: f64,
        width: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub from: f64,
    pub to: f64,
    #[serde(flatten)]
    pub piece: PieceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSpec {
    pub domain: [f64; 2],
    pub prior: PriorSpec,
    pub segments: Vec<SegmentSpec>,
}

impl PiecewiseSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Uniform prior on the whole domain.
    pub fn uniform(domain: [f64; 2], segments: Vec<SegmentSpec>) -> Self {
        Self {
            domain,
            prior: PriorSpec::Uniform { lo: None, hi: None },
            segments,
        }
    }
}

impl SegmentSpec {
    pub fn linear(from: f64, to: f64, left: f64, right: f64) -> Self {
        Self {
            from,
            to,
            piece: PieceSpec::Linear { left, right },
        }
    }

    pub fn constant(from: f64, to: f64, value: f64) -> Self {
        Self {
            from,
            to,
            piece: PieceSpec::Constant { value },
        }
    }

    pub fn bump(from: f64, to: f64, base: f64, height: f64, center: f64, width: f64) -> Self {
        Self {
            from,
            to,
            piece: PieceSpec::GaussianBump {
                base,
                height,
                center,
                width,
            },
        }
    }
}
