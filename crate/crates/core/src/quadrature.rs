//! Adaptive composite Simpson quadrature with forced breakpoints.
//!
//! Integrands in this crate are piecewise smooth with kinks or jumps at known
//! locations, so the caller passes those locations as breakpoints and the
//! adaptive refinement only runs inside each smooth piece. Panel endpoints
//! that coincide with breakpoints are evaluated one ulp inside the panel so
//! that jump discontinuities are seen from the correct side.

use crate::error::{Error, Result};

/// Adaptive Simpson settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simpson {
    /// Absolute error target for the whole integral.
    pub abs_tol: f64,
    /// Minimum number of panels the whole range is split into before refinement.
    pub panels: usize,
    /// Total integrand evaluations allowed before giving up.
    pub max_evals: usize,
}

impl Default for Simpson {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            panels: 1000,
            max_evals: 20_000_000,
        }
    }
}

struct Budget {
    evals: usize,
    max: usize,
}

impl Simpson {
    pub fn with_panels(panels: usize) -> Self {
        Self {
            panels: panels.max(1),
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    /// Integrates `f` over `[lo, hi]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<f64> {
        self.integrate_with_breaks(f, &[lo, hi])
    }

    /// Integrates `f` between the smallest and largest entry of `breaks`,
    /// never letting a Simpson panel straddle an interior breakpoint.
    pub fn integrate_with_breaks<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64> {
        let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite()).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if pts.len() < 2 {
            return Ok(0.0);
        }
        let total = pts[pts.len() - 1] - pts[0];
        let mut budget = Budget {
            evals: 0,
            max: self.max_evals,
        };
        let mut sum = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let width = b - a;
            let panels = ((self.panels as f64 * width / total).ceil() as usize).max(1);
            let h = width / panels as f64;
            for j in 0..panels {
                let pa = a + h * j as f64;
                let pb = if j + 1 == panels {
                    b
                } else {
                    a + h * (j + 1) as f64
                };
                // one-sided values at the forced breakpoints
                let fa = if j == 0 {
                    f(pa.next_up().min(pb))
                } else {
                    f(pa)
                };
                let fb = if j + 1 == panels {
                    f(pb.next_down().max(pa))
                } else {
                    f(pb)
                };
                let m = 0.5 * (pa + pb);
                let fm = f(m);
                budget.evals += 3;
                let whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
                let tol = self.abs_tol * (pb - pa) / total;
                sum += adapt(&f, pa, pb, fa, fm, fb, whole, tol, &mut budget)?;
            }
        }
        Ok(sum)
    }
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    budget: &mut Budget,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    budget.evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Below this width further halving cannot change the sum at double precision.
    let floor = 64.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    if delta.abs() <= 15.0 * tol || (b - a) <= floor {
        return Ok(left + right + delta / 15.0);
    }
    if budget.evals > budget.max {
        return Err(Error::QuadratureNonConvergence { lo: a, hi: b });
    }
    Ok(adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, budget)?
        + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, budget)?)
}
