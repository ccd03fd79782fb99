//! Exact survival functions, generalized inverses and pushforward laws for
//! one-dimensional piecewise problems.
//!
//! A [`PiecewiseProblem`] couples a prior on an interval with a likelihood
//! built from strictly monotone or constant pieces. Every quantity here is
//! computed segment by segment from the prior CDF, with closed-form inversion
//! of the monotone pieces. Constant pieces with positive prior mass are the
//! plateaus; they show up as [`Atom`]s of the likelihood pushforward.

pub mod catalog;
mod spec;

pub use spec::{PieceSpec, PiecewiseSpec, PriorSpec, SegmentSpec};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::quadrature::Simpson;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Prior distribution on the real line with interval support.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Uniform {
        lo: f64,
        hi: f64,
    },
    TruncatedGaussian {
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
        // standard normal CDF at the lower cut and the retained mass
        phi_lo: f64,
        mass: f64,
    },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse standard normal CDF: a rough `erfc_inv` start polished by Newton steps on the exact CDF.
fn std_normal_quantile(p: f64) -> f64 {
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let d = std_normal_pdf(z);
        if d.is_nan() || d <= 0.0 {
            break;
        }
        z -= (std_normal_cdf(z) - p) / d;
    }
    z
}

impl Prior {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Prior::Uniform { lo, hi }
    }

    pub fn truncated_gaussian(mean: f64, sd: f64, lo: f64, hi: f64) -> Self {
        let phi_lo = std_normal_cdf((lo - mean) / sd);
        let phi_hi = std_normal_cdf((hi - mean) / sd);
        Prior::TruncatedGaussian {
            mean,
            sd,
            lo,
            hi,
            phi_lo,
            mass: phi_hi - phi_lo,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Prior::Uniform { lo, hi } | Prior::TruncatedGaussian { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            Prior::Uniform { lo, hi } => (x - lo) / (hi - lo),
            Prior::TruncatedGaussian {
                mean,
                sd,
                phi_lo,
                mass,
                ..
            } => ((std_normal_cdf((x - mean) / sd) - phi_lo) / mass).clamp(0.0, 1.0),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if u <= 0.0 {
            return lo;
        }
        if u >= 1.0 {
            return hi;
        }
        match *self {
            Prior::Uniform { lo, hi } => lo + u * (hi - lo),
            Prior::TruncatedGaussian {
                mean,
                sd,
                phi_lo,
                mass,
                ..
            } => (mean + sd * std_normal_quantile(phi_lo + u * mass)).clamp(lo, hi),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            Prior::Uniform { lo, hi } => 1.0 / (hi - lo),
            Prior::TruncatedGaussian { mean, sd, mass, .. } => {
                std_normal_pdf((x - mean) / sd) / (sd * mass)
            }
        }
    }

    /// Prior mass of `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            0.0
        } else {
            (self.cdf(b) - self.cdf(a)).max(0.0)
        }
    }
}

/// Likelihood piece on one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Linear {
        left: f64,
        right: f64,
    },
    Constant {
        value: f64,
    },
    GaussianBump {
        base: f64,
        height: f64,
        center: f64,
        width: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub piece: Piece,
}

impl Segment {
    pub fn value(&self, x: f64) -> f64 {
        match self.piece {
            Piece::Constant { value } => value,
            Piece::Linear { left, right } => {
                if x <= self.lo {
                    left
                } else if x >= self.hi {
                    right
                } else {
                    left + (right - left) * (x - self.lo) / (self.hi - self.lo)
                }
            }
            Piece::GaussianBump {
                base,
                height,
                center,
                width,
            } => {
                let d = (x - center) / width;
                base + height * (-0.5 * d * d).exp()
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.piece, Piece::Constant { .. })
    }

    /// True when the piece increases from `lo` to `hi` (constants count as not increasing).
    pub fn increasing(&self) -> bool {
        self.value(self.hi) > self.value(self.lo)
    }

    /// Image of `[a, b] ⊆ [lo, hi]` as `(min, max)`.
    fn image_of(&self, a: f64, b: f64) -> (f64, f64) {
        let (va, vb) = (self.value(a), self.value(b));
        if va <= vb {
            (va, vb)
        } else {
            (vb, va)
        }
    }

    /// The point in `[lo, hi]` where a monotone piece takes the value `level`,
    /// clamped to the segment when `level` lies outside its image.
    fn inverse(&self, level: f64) -> f64 {
        let (vlo, vhi) = (self.value(self.lo), self.value(self.hi));
        let (lmin, lmax) = if vlo <= vhi { (vlo, vhi) } else { (vhi, vlo) };
        let at_min = if vlo <= vhi { self.lo } else { self.hi };
        let at_max = if vlo <= vhi { self.hi } else { self.lo };
        if level <= lmin {
            return at_min;
        }
        if level >= lmax {
            return at_max;
        }
        let x = match self.piece {
            Piece::Constant { .. } => self.lo,
            Piece::Linear { left, right } => {
                self.lo + (level - left) / (right - left) * (self.hi - self.lo)
            }
            Piece::GaussianBump {
                base,
                height,
                center,
                width,
            } => {
                let ratio = ((level - base) / height).clamp(f64::MIN_POSITIVE, 1.0);
                let d = width * (-2.0 * ratio.ln()).sqrt();
                if center >= self.hi {
                    center - d
                } else {
                    center + d
                }
            }
        };
        x.clamp(self.lo, self.hi)
    }
}

/// A plateau of the likelihood: level `r`, tail mass `μ(L > r)` and jump `μ(L = r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub level: f64,
    pub tail_mass: f64,
    pub jump: f64,
}

/// Case taxonomy by whether the extreme likelihood values are plateaus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlateauCase {
    /// Neither extreme is a plateau.
    #[serde(rename = "0")]
    Zero,
    /// The infimum is a plateau (`α₁ + Δ₁ = 1`).
    A,
    /// The supremum is a plateau (`α_N = 0`).
    B,
    AB,
}

impl std::fmt::Display for PlateauCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlateauCase::Zero => "0",
            PlateauCase::A => "A",
            PlateauCase::B => "B",
            PlateauCase::AB => "AB",
        })
    }
}

/// Law of `X(L(x))` for `x ~ μ`: Dirac masses `Δᵢ` at `αᵢ` plus Lebesgue
/// measure on the rest of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardLaw {
    /// `(location αᵢ, mass Δᵢ)` sorted by location.
    pub atoms: Vec<(f64, f64)>,
}

impl PushforwardLaw {
    pub fn uniform() -> Self {
        Self { atoms: Vec::new() }
    }

    pub fn from_atoms(atoms: &[Atom]) -> Self {
        let mut pts: Vec<(f64, f64)> = atoms.iter().map(|a| (a.tail_mass, a.jump)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { atoms: pts }
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, alpha: f64) -> f64 {
        if alpha < 0.0 {
            return 0.0;
        }
        for &(loc, mass) in &self.atoms {
            if alpha >= loc && alpha < loc + mass {
                return loc + mass;
            }
        }
        alpha.min(1.0)
    }

    /// Left limit of the CDF.
    pub fn cdf_left(&self, alpha: f64) -> f64 {
        if alpha <= 0.0 {
            return 0.0;
        }
        for &(loc, mass) in &self.atoms {
            if alpha > loc && alpha <= loc + mass {
                return loc + mass;
            }
        }
        alpha.min(1.0)
    }

    /// Lebesgue measure of the uniform component's support.
    pub fn uniform_mass(&self) -> f64 {
        1.0 - self.atoms.iter().map(|a| a.1).sum::<f64>()
    }

    /// Maps a uniform variate onto the law: values inside `[αᵢ, αᵢ + Δᵢ)` collapse to `αᵢ`.
    pub fn transform(&self, u: f64) -> f64 {
        for &(loc, mass) in &self.atoms {
            if u >= loc && u < loc + mass {
                return loc;
            }
        }
        u
    }

    /// Points where the CDF jumps or changes slope: 0, 1 and both ends of each atom interval.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![0.0, 1.0];
        for &(loc, mass) in &self.atoms {
            v.push(loc);
            v.push(loc + mass);
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Interval of reals with explicit endpoint closedness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        (v > self.lo || (self.lo_closed && v == self.lo))
            && (v < self.hi || (self.hi_closed && v == self.hi))
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// A set of parameter values where `L̃(X(L(x))) ≠ L(x)`, with its prior mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblematicInterval {
    pub interval: Interval,
    pub mass: f64,
}

/// Validated one-dimensional problem.
#[derive(Debug, Clone)]
pub struct PiecewiseProblem {
    domain: (f64, f64),
    prior: Prior,
    segments: Vec<Segment>,
    inf_l: f64,
    sup_l: f64,
    atoms: Vec<Atom>,
    // monotone segments carrying prior mass, as (segment, clipped lo, clipped hi)
    regular: Vec<(Segment, f64, f64)>,
    knots: Vec<f64>,
}

impl PiecewiseProblem {
    pub fn new(spec: &PiecewiseSpec) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidSpec(msg));
        let [a, b] = spec.domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return invalid(format!("domain [{a}, {b}] is not a proper finite interval"));
        }
        let prior = match spec.prior {
            PriorSpec::Uniform { lo, hi } => {
                let (lo, hi) = (lo.unwrap_or(a), hi.unwrap_or(b));
                if !(lo < hi && lo >= a && hi <= b) {
                    return invalid(format!(
                        "uniform prior [{lo}, {hi}] must be a proper sub-interval of the domain"
                    ));
                }
                Prior::uniform(lo, hi)
            }
            PriorSpec::TruncatedGaussian { mean, sd, lo, hi } => {
                let (lo, hi) = (lo.unwrap_or(a), hi.unwrap_or(b));
                if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    return invalid(format!(
                        "truncated gaussian needs finite mean and sd > 0, got ({mean}, {sd})"
                    ));
                }
                if !(lo < hi && lo >= a && hi <= b) {
                    return invalid(format!(
                        "truncation [{lo}, {hi}] must be a proper sub-interval of the domain"
                    ));
                }
                let p = Prior::truncated_gaussian(mean, sd, lo, hi);
                if let Prior::TruncatedGaussian { mass, .. } = p {
                    if mass.is_nan() || mass <= 1e-300 {
                        return invalid("truncated gaussian retains no probability mass; density cannot be normalized".into());
                    }
                }
                p
            }
        };

        if spec.segments.is_empty() {
            return invalid("at least one segment is required".into());
        }
        let mut segments = Vec::with_capacity(spec.segments.len());
        let mut cursor = a;
        for (i, s) in spec.segments.iter().enumerate() {
            if !(s.from.is_finite() && s.to.is_finite() && s.from < s.to) {
                return invalid(format!(
                    "segment {i} [{}, {}] is empty or not finite",
                    s.from, s.to
                ));
            }
            if s.from != cursor {
                let what = if s.from < cursor {
                    "overlaps"
                } else {
                    "leaves a gap before"
                };
                return invalid(format!(
                    "segment {i} starting at {} {what} the previous one ending at {cursor}",
                    s.from
                ));
            }
            cursor = s.to;
            let piece = match s.piece {
                PieceSpec::Constant { value } => {
                    if !value.is_finite() {
                        return invalid(format!("segment {i}: constant level must be finite"));
                    }
                    Piece::Constant { value }
                }
                PieceSpec::Linear { left, right } => {
                    if !(left.is_finite() && right.is_finite()) {
                        return invalid(format!("segment {i}: linear end values must be finite"));
                    }
                    if left == right {
                        return invalid(format!("segment {i}: linear piece with equal ends is a constant; declare it as one"));
                    }
                    Piece::Linear { left, right }
                }
                PieceSpec::GaussianBump {
                    base,
                    height,
                    center,
                    width,
                } => {
                    if !(width > 0.0
                        && height != 0.0
                        && base.is_finite()
                        && height.is_finite()
                        && center.is_finite())
                    {
                        return invalid(format!(
                            "segment {i}: gaussian bump needs width > 0 and non-zero height"
                        ));
                    }
                    if center > s.from && center < s.to {
                        return invalid(format!(
                            "segment {i}: bump center {center} inside ({}, {}) makes the piece non-monotone; split the segment at the center",
                            s.from, s.to
                        ));
                    }
                    Piece::GaussianBump {
                        base,
                        height,
                        center,
                        width,
                    }
                }
            };
            let seg = Segment {
                lo: s.from,
                hi: s.to,
                piece,
            };
            if !seg.is_constant() && seg.value(seg.lo) == seg.value(seg.hi) {
                return invalid(format!(
                    "segment {i} is numerically flat; declare it as a constant"
                ));
            }
            segments.push(seg);
        }
        if cursor != b {
            return invalid(format!(
                "segments end at {cursor} but the domain ends at {b}"
            ));
        }
        Ok(Self::assemble((a, b), prior, segments))
    }

    fn assemble(domain: (f64, f64), prior: Prior, segments: Vec<Segment>) -> Self {
        let (s_lo, s_hi) = prior.support();
        let mut inf_l = f64::INFINITY;
        let mut sup_l = f64::NEG_INFINITY;
        let mut regular = Vec::new();
        let mut plateau_masses: Vec<(f64, f64)> = Vec::new();
        for seg in &segments {
            let (lmin, lmax) = seg.image_of(seg.lo, seg.hi);
            inf_l = inf_l.min(lmin);
            sup_l = sup_l.max(lmax);
            let (clo, chi) = (seg.lo.max(s_lo), seg.hi.min(s_hi));
            let mass = prior.mass(clo, chi);
            if !(clo < chi && mass > 0.0) {
                continue;
            }
            match seg.piece {
                Piece::Constant { value } => {
                    match plateau_masses.iter_mut().find(|(l, _)| *l == value) {
                        Some(entry) => entry.1 += mass,
                        None => plateau_masses.push((value, mass)),
                    }
                }
                _ => regular.push((*seg, clo, chi)),
            }
        }
        plateau_masses.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut knots = vec![inf_l, sup_l];
        for (seg, clo, chi) in &regular {
            let (lmin, lmax) = seg.image_of(*clo, *chi);
            knots.push(lmin);
            knots.push(lmax);
        }
        knots.extend(plateau_masses.iter().map(|p| p.0));
        knots.sort_by(f64::total_cmp);
        knots.dedup();

        let mut problem = Self {
            domain,
            prior,
            segments,
            inf_l,
            sup_l,
            atoms: plateau_masses
                .iter()
                .map(|&(level, jump)| Atom {
                    level,
                    tail_mass: 0.0,
                    jump,
                })
                .collect(),
            regular,
            knots,
        };
        let tails: Vec<f64> = problem
            .atoms
            .iter()
            .map(|a| problem.survival_open(a.level))
            .collect();
        for (atom, tail) in problem.atoms.iter_mut().zip(tails) {
            atom.tail_mass = tail;
        }
        problem
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn inf_l(&self) -> f64 {
        self.inf_l
    }

    pub fn sup_l(&self) -> f64 {
        self.sup_l
    }

    /// Likelihood at `x`; segments are half-open `[lo, hi)` except the last.
    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(self.domain.0, self.domain.1);
        let idx = self
            .segments
            .partition_point(|s| s.hi <= x)
            .min(self.segments.len() - 1);
        self.segments[idx].value(x)
    }

    pub fn sample_prior(&self, u: f64) -> f64 {
        self.prior.quantile(u)
    }

    /// Every level with positive prior mass, sorted by increasing level.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn plateau_levels(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.level).collect()
    }

    fn continuous_mass_ge(&self, r: f64) -> f64 {
        let mut m = 0.0;
        for (seg, clo, chi) in &self.regular {
            let (lmin, lmax) = seg.image_of(*clo, *chi);
            if r <= lmin {
                m += self.prior.mass(*clo, *chi);
            } else if r < lmax {
                let x = seg.inverse(r).clamp(*clo, *chi);
                m += if seg.increasing() {
                    self.prior.mass(x, *chi)
                } else {
                    self.prior.mass(*clo, x)
                };
            }
        }
        m
    }

    /// `ψ(r) = μ(L ≥ r)`.
    pub fn survival_closed(&self, r: f64) -> f64 {
        let mut m = self.continuous_mass_ge(r);
        for a in &self.atoms {
            if a.level >= r {
                m += a.jump;
            }
        }
        m
    }

    /// `X(λ) = μ(L > λ)`.
    pub fn survival_open(&self, level: f64) -> f64 {
        let mut m = self.continuous_mass_ge(level);
        for a in &self.atoms {
            if a.level > level {
                m += a.jump;
            }
        }
        m
    }

    /// `μ(L = λ)`.
    pub fn jump_at(&self, level: f64) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.level == level)
            .map_or(0.0, |a| a.jump)
    }

    /// `r_α = inf{r : ψ(r) ≤ α}`, clamped to `[inf L, sup L]`.
    pub fn r_alpha(&self, alpha: f64) -> f64 {
        for a in &self.atoms {
            if alpha >= a.tail_mass && alpha < a.tail_mass + a.jump {
                return a.level;
            }
        }
        if alpha >= 1.0 || self.survival_closed(self.inf_l) <= alpha {
            return self.inf_l;
        }
        // bracket (k', k] with ψ(k') > α ≥ ψ(k)
        let mut prev = self.knots[0];
        for &k in &self.knots[1..] {
            if self.survival_closed(k) <= alpha {
                return self.invert_between(alpha, prev, k);
            }
            prev = k;
        }
        self.sup_l
    }

    /// Generalized inverse `L̃(ξ) = sup{λ ∈ im L : X(λ) > ξ}`, which coincides with `r_ξ`.
    pub fn tilde_l(&self, xi: f64) -> f64 {
        self.r_alpha(xi)
    }

    /// `L̃(X(L(x)))`; equals `L(x)` except on a prior-null set.
    pub fn round_trip(&self, x: f64) -> f64 {
        self.tilde_l(self.survival_open(self.value(x)))
    }

    fn invert_between(&self, alpha: f64, lo: f64, hi: f64) -> f64 {
        let active: Vec<&(Segment, f64, f64)> = self
            .regular
            .iter()
            .filter(|(seg, clo, chi)| {
                let (lmin, lmax) = seg.image_of(*clo, *chi);
                lmin < hi && lmax > lo
            })
            .collect();
        if let [(seg, clo, chi)] = active.as_slice() {
            if let Some(r) = self.invert_single(alpha, lo, hi, seg, *clo, *chi) {
                return r;
            }
        }
        self.bisect(alpha, lo, hi)
    }

    /// Closed-form inversion when one monotone segment drives ψ on `(lo, hi]`.
    fn invert_single(
        &self,
        alpha: f64,
        lo: f64,
        hi: f64,
        seg: &Segment,
        clo: f64,
        chi: f64,
    ) -> Option<f64> {
        let own_at_hi = if seg.increasing() {
            self.prior.mass(seg.inverse(hi).clamp(clo, chi), chi)
        } else {
            self.prior.mass(clo, seg.inverse(hi).clamp(clo, chi))
        };
        let target = alpha - (self.survival_closed(hi) - own_at_hi);
        let x = if seg.increasing() {
            self.prior.quantile(self.prior.cdf(chi) - target)
        } else {
            self.prior.quantile(self.prior.cdf(clo) + target)
        };
        let r = seg.value(x.clamp(clo, chi)).clamp(lo, hi);
        ((self.survival_closed(r) - alpha).abs() <= 1e-13).then_some(r)
    }

    fn bisect(&self, alpha: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..2000 {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.survival_closed(mid) <= alpha {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    pub fn pushforward_law(&self) -> PushforwardLaw {
        PushforwardLaw::from_atoms(&self.atoms)
    }

    pub fn classify(&self) -> PlateauCase {
        const TOL: f64 = 1e-12;
        let (Some(first), Some(last)) = (self.atoms.first(), self.atoms.last()) else {
            return PlateauCase::Zero;
        };
        let a = (first.tail_mass + first.jump - 1.0).abs() <= TOL;
        let b = last.tail_mass.abs() <= TOL;
        match (a, b) {
            (true, true) => PlateauCase::AB,
            (true, false) => PlateauCase::A,
            (false, true) => PlateauCase::B,
            (false, false) => PlateauCase::Zero,
        }
    }

    /// `∫ L dμ`, integrating each segment against the prior density.
    pub fn expected_likelihood(&self, panels: usize) -> Result<f64> {
        let q = Simpson::with_panels(panels);
        let total_width = self.domain.1 - self.domain.0;
        let mut sum = 0.0;
        for a in &self.atoms {
            sum += a.level * a.jump;
        }
        for (seg, clo, chi) in &self.regular {
            let share = ((panels as f64) * (chi - clo) / total_width).ceil() as usize;
            let f = |x: f64| seg.value(x) * self.prior.pdf(x);
            sum += Simpson::with_panels(share.max(1))
                .with_tolerance(q.abs_tol)
                .integrate(f, *clo, *chi)?;
        }
        Ok(sum)
    }

    /// Both sides of `∫ L dμ = ∫₀¹ L̃(ξ) dξ`.
    pub fn paradigm_both_sides(&self, grid_size: usize) -> Result<(f64, f64)> {
        let lhs = self.expected_likelihood(grid_size)?;
        let mut breaks = self.pushforward_law().breakpoints();
        breaks.extend(self.knots.iter().map(|&k| self.survival_open(k)));
        breaks.extend(self.knots.iter().map(|&k| self.survival_closed(k)));
        breaks.retain(|b| (0.0..=1.0).contains(b));
        let rhs = Simpson::with_panels(grid_size)
            .integrate_with_breaks(|xi| self.tilde_l(xi), &breaks)?;
        Ok((lhs, rhs))
    }

    /// Parameter intervals where `L̃(X(L(x))) < L(x)`, each with its prior mass.
    ///
    /// A level `λ` is reproduced by the round trip exactly when `λ` is the
    /// infimum, an atom, or sits at or above the bottom of some charged image
    /// interval `(lmin, lmax]`. Everything else in `[inf L, sup L]` is
    /// preceded by a gap of zero mass and collapses onto a lower value.
    pub fn problematic_set(&self) -> Vec<ProblematicInterval> {
        let bad = self.unreproduced_levels();
        let mut pieces: Vec<Interval> = self
            .segments
            .iter()
            .flat_map(|seg| bad.iter().filter_map(move |levels| preimage(seg, levels)))
            .collect();
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        let mut out: Vec<Interval> = Vec::new();
        for iv in pieces {
            push_merged(&mut out, iv);
        }
        out.into_iter()
            .map(|interval| ProblematicInterval {
                interval,
                mass: self.prior.mass(interval.lo, interval.hi),
            })
            .collect()
    }

    fn unreproduced_levels(&self) -> Vec<Interval> {
        // good pieces: points (atoms, inf L) and half-open (lmin, lmax]
        let mut points: Vec<f64> = self.atoms.iter().map(|a| a.level).collect();
        points.push(self.inf_l);
        let mut halfs: Vec<(f64, f64)> = self
            .regular
            .iter()
            .map(|(seg, clo, chi)| seg.image_of(*clo, *chi))
            .filter(|(l, u)| l < u)
            .collect();
        points.sort_by(f64::total_cmp);
        halfs.sort_by(|a, b| a.0.total_cmp(&b.0));

        enum Cover {
            Point(f64),
            Half(f64, f64),
        }
        let mut pieces: Vec<Cover> = points.into_iter().map(Cover::Point).collect();
        pieces.extend(halfs.into_iter().map(|(l, u)| Cover::Half(l, u)));
        // points before half-open pieces at the same lower end
        pieces.sort_by(|x, y| {
            let key = |p: &Cover| match *p {
                Cover::Point(v) => (v, 0),
                Cover::Half(l, _) => (l, 1),
            };
            let (kx, ky) = (key(x), key(y));
            kx.0.total_cmp(&ky.0).then(kx.1.cmp(&ky.1))
        });

        let mut bad = Vec::new();
        let mut covered = self.inf_l;
        let mut included = false;
        for p in pieces {
            match p {
                Cover::Point(v) => {
                    if v < covered || (v == covered && included) {
                        continue;
                    }
                    if v == covered {
                        included = true;
                        continue;
                    }
                    bad.push(Interval {
                        lo: covered,
                        hi: v,
                        lo_closed: !included,
                        hi_closed: false,
                    });
                    covered = v;
                    included = true;
                }
                Cover::Half(l, u) => {
                    if l > covered || (l == covered && !included) {
                        bad.push(Interval {
                            lo: covered,
                            hi: l,
                            lo_closed: !included,
                            hi_closed: true,
                        });
                    }
                    if u > covered || l > covered {
                        covered = u;
                        included = true;
                    } else if u == covered {
                        included = true;
                    }
                }
            }
        }
        if covered < self.sup_l {
            bad.push(Interval {
                lo: covered,
                hi: self.sup_l,
                lo_closed: !included,
                hi_closed: true,
            });
        } else if covered == self.sup_l && !included {
            bad.push(Interval {
                lo: covered,
                hi: covered,
                lo_closed: true,
                hi_closed: true,
            });
        }
        bad.retain(|iv| !iv.is_empty());
        bad
    }
}

/// `{x ∈ seg : L(x) ∈ levels}` as a single interval (monotone or constant pieces).
fn preimage(seg: &Segment, levels: &Interval) -> Option<Interval> {
    if let Piece::Constant { value } = seg.piece {
        return levels.contains(value).then_some(Interval {
            lo: seg.lo,
            hi: seg.hi,
            lo_closed: true,
            hi_closed: true,
        });
    }
    let (lmin, lmax) = seg.image_of(seg.lo, seg.hi);
    // clip the level interval to the image
    let (lo, lo_closed) = if levels.lo > lmin {
        (levels.lo, levels.lo_closed)
    } else {
        (lmin, true)
    };
    let (hi, hi_closed) = if levels.hi < lmax {
        (levels.hi, levels.hi_closed)
    } else {
        (lmax, true)
    };
    let clipped = Interval {
        lo,
        hi,
        lo_closed,
        hi_closed,
    };
    if clipped.is_empty() {
        return None;
    }
    let (xa, xb) = (seg.inverse(lo), seg.inverse(hi));
    let iv = if seg.increasing() {
        Interval {
            lo: xa,
            hi: xb,
            lo_closed,
            hi_closed,
        }
    } else {
        Interval {
            lo: xb,
            hi: xa,
            lo_closed: hi_closed,
            hi_closed: lo_closed,
        }
    };
    (!iv.is_empty()).then_some(iv)
}

fn push_merged(out: &mut Vec<Interval>, iv: Interval) {
    if let Some(last) = out.last_mut() {
        if iv.lo < last.hi || (iv.lo == last.hi && (last.hi_closed || iv.lo_closed)) {
            if iv.hi > last.hi || (iv.hi == last.hi && iv.hi_closed) {
                last.hi = iv.hi;
                last.hi_closed = iv.hi_closed;
            }
            return;
        }
    }
    out.push(iv);
}
