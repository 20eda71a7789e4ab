//! Coupling functions `phi(a, b)` with `sign(phi(a, b)) = sign(a - b)` and
//! `|phi|` non-decreasing in `|a - b|`, their sampled axiom checks, and the
//! metric ratio `phi(a, b) / (h(a) - h(b))`.

use std::fmt;

use crate::energy::EnergyFunction;
use crate::error::{Error, Result};

/// Below this `|h(a) - h(b)|` the ratio is taken from the secant fallback.
pub const EQUAL_ARGUMENT_EPS: f64 = 1e-8;

/// Secant offset for the fallback, scaled by `max(1, |base|)`.
pub const FALLBACK_STEP: f64 = 1e-6;

/// Admissible scalar states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Real,
    /// `(0, inf)`
    Positive,
    /// `[0, inf)`
    NonNegative,
    /// `[lo, hi]`
    Interval(f64, f64),
}

impl Domain {
    pub fn contains(&self, z: f64) -> bool {
        if !z.is_finite() {
            return false;
        }
        match *self {
            Domain::Real => true,
            Domain::Positive => z > 0.0,
            Domain::NonNegative => z >= 0.0,
            Domain::Interval(lo, hi) => z >= lo && z <= hi,
        }
    }

    /// Bounded sampling window used by the default axiom grid and by custom
    /// energy registration.
    pub fn window(&self) -> (f64, f64) {
        match *self {
            Domain::Real => (-2.0, 2.0),
            Domain::Positive => (0.1, 4.0),
            Domain::NonNegative => (0.0, 4.0),
            Domain::Interval(lo, hi) => (lo, hi),
        }
    }

    /// Intersection of two domains (used for coupling/energy pairs).
    pub fn intersect(&self, other: &Domain) -> Domain {
        use Domain::*;
        match (*self, *other) {
            (Real, d) | (d, Real) => d,
            (Positive, Positive) | (Positive, NonNegative) | (NonNegative, Positive) => Positive,
            (NonNegative, NonNegative) => NonNegative,
            (Interval(lo, hi), Positive) | (Positive, Interval(lo, hi)) => {
                Interval(lo.max(f64::MIN_POSITIVE), hi)
            }
            (Interval(lo, hi), NonNegative) | (NonNegative, Interval(lo, hi)) => Interval(lo.max(0.0), hi),
            (Interval(a, b), Interval(c, d)) => Interval(a.max(c), b.min(d)),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Real => write!(f, "(-inf, inf)"),
            Domain::Positive => write!(f, "(0, inf)"),
            Domain::NonNegative => write!(f, "[0, inf)"),
            Domain::Interval(lo, hi) => write!(f, "[{lo}, {hi}]"),
        }
    }
}

/// Odd functions `psi` for `phi(a, b) = psi(a - b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OddFn {
    Tanh,
    Atan,
    Cubic,
}

impl OddFn {
    fn eval(self, z: f64) -> f64 {
        match self {
            OddFn::Tanh => z.tanh(),
            OddFn::Atan => z.atan(),
            OddFn::Cubic => z * z * z,
        }
    }
}

/// Increasing functions `g` for `phi(a, b) = g(a) - g(b)`. A decreasing `l`
/// with `phi(a, b) = l(b) - l(a)` is encoded as `g = -l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeparableFn {
    Identity,
    Ln,
    Exp,
    /// `x^p`, `p > 0`
    Power(f64),
}

impl SeparableFn {
    fn eval(self, z: f64) -> f64 {
        match self {
            SeparableFn::Identity => z,
            SeparableFn::Ln => z.ln(),
            SeparableFn::Exp => z.exp(),
            SeparableFn::Power(p) => z.powf(p),
        }
    }

    fn domain(self) -> Domain {
        match self {
            SeparableFn::Identity | SeparableFn::Exp => Domain::Real,
            SeparableFn::Ln | SeparableFn::Power(_) => Domain::Positive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingFunction {
    /// `a - b`
    Linear,
    /// `psi(a - b)`
    Odd(OddFn),
    /// `|tanh(slope (a - b))| (a - b)`
    Gain { slope: f64 },
    /// `g(a) - g(b)`
    Separable(SeparableFn),
    /// `sin(a - b)`; satisfies the sign and monotonicity axioms only for
    /// spreads below `pi` (resp. `pi / 2`).
    Sinusoidal,
}

impl CouplingFunction {
    pub fn gain(slope: f64) -> Result<Self> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::InvalidConfig(format!("gain slope must be positive, got {slope}")));
        }
        Ok(Self::Gain { slope })
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidConfig(format!("separable power must be positive, got {p}")));
        }
        Ok(Self::Separable(SeparableFn::Power(p)))
    }

    pub fn domain(&self) -> Domain {
        match self {
            CouplingFunction::Separable(g) => g.domain(),
            _ => Domain::Real,
        }
    }

    pub fn name(&self) -> String {
        match self {
            CouplingFunction::Linear => "linear".into(),
            CouplingFunction::Odd(psi) => format!("odd({psi:?})").to_lowercase(),
            CouplingFunction::Gain { slope } => format!("gain(p={slope})"),
            CouplingFunction::Separable(SeparableFn::Power(p)) => format!("separable(x^{p})"),
            CouplingFunction::Separable(g) => format!("separable({g:?})").to_lowercase(),
            CouplingFunction::Sinusoidal => "sinusoidal".into(),
        }
    }

    fn check(&self, z: f64) -> Result<()> {
        let d = self.domain();
        if d.contains(z) {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                what: "coupling",
                value: z,
                domain: d.to_string(),
            })
        }
    }

    /// `phi(a, b)`
    pub fn eval(&self, a: f64, b: f64) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(match *self {
            CouplingFunction::Linear => a - b,
            CouplingFunction::Odd(psi) => psi.eval(a - b),
            CouplingFunction::Gain { slope } => {
                let z = a - b;
                (slope * z).tanh().abs() * z
            }
            CouplingFunction::Separable(g) => g.eval(a) - g.eval(b),
            CouplingFunction::Sinusoidal => (a - b).sin(),
        })
    }
}

/// Free-function form of [`CouplingFunction::eval`].
pub fn eval_phi(phi: &CouplingFunction, a: f64, b: f64) -> Result<f64> {
    phi.eval(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    /// `phi(a, a) = 0`
    ZeroOnDiagonal,
    /// `sign(phi(a, b)) = sign(a - b)`
    Sign,
    /// `|phi(a, b)|` non-decreasing in `|a - b|` for fixed `b`
    Monotonicity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxiomReport {
    pub violations: Vec<AxiomViolation>,
    /// Grid points outside the coupling's domain, ignored.
    pub skipped: usize,
}

impl AxiomReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, axiom: Axiom) -> bool {
        self.violations.iter().any(|v| v.axiom == axiom)
    }
}

/// Full `k x k` grid over `[lo, hi]^2`.
pub fn square_grid(lo: f64, hi: f64, k: usize) -> Vec<(f64, f64)> {
    let pts: Vec<f64> = (0..k)
        .map(|s| lo + (hi - lo) * s as f64 / (k.max(2) - 1) as f64)
        .collect();
    pts.iter()
        .flat_map(|&a| pts.iter().map(move |&b| (a, b)))
        .collect()
}

/// Default 50 x 50 grid over the coupling's domain window.
pub fn default_axiom_grid(phi: &CouplingFunction) -> Vec<(f64, f64)> {
    let (lo, hi) = phi.domain().window();
    square_grid(lo, hi, 50)
}

pub fn check_coupling_axioms(phi: &CouplingFunction, grid: &[(f64, f64)]) -> AxiomReport {
    let mut report = AxiomReport::default();
    // (b, a - b, |phi|) for the ray check
    let mut rays: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(grid.len());
    for &(a, b) in grid {
        let Ok(v) = phi.eval(a, b) else {
            report.skipped += 1;
            continue;
        };
        if a == b {
            if v != 0.0 {
                report.violations.push(AxiomViolation {
                    axiom: Axiom::ZeroOnDiagonal,
                    a,
                    b,
                });
            }
        } else {
            let expected = (a - b).signum();
            if v == 0.0 || v.signum() != expected {
                report.violations.push(AxiomViolation {
                    axiom: Axiom::Sign,
                    a,
                    b,
                });
            }
        }
        rays.push((b, a - b, v.abs(), a));
    }
    rays.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    for group in rays.chunk_by(|x, y| x.0 == y.0) {
        // walk outward from the diagonal on each side
        let split = group.partition_point(|r| r.1 < 0.0);
        let (neg, pos) = group.split_at(split);
        let outward = neg.iter().rev().collect::<Vec<_>>();
        for side in [outward, pos.iter().collect::<Vec<_>>()] {
            for w in side.windows(2) {
                let (inner, outer) = (w[0], w[1]);
                if outer.2 < inner.2 * (1.0 - 1e-12) {
                    report.violations.push(AxiomViolation {
                        axiom: Axiom::Monotonicity,
                        a: outer.3,
                        b: outer.0,
                    });
                }
            }
        }
    }
    report
}

/// `phi(a, b) / (h(a) - h(b))`, the symmetric positive factor behind the
/// off-diagonal metric entries. When `|h(a) - h(b)| <= EQUAL_ARGUMENT_EPS`
/// it is replaced by the secant value at `(m + delta, m)`, `m = min(a, b)`.
pub fn ratio_phi_over_dh(phi: &CouplingFunction, energy: &EnergyFunction, a: f64, b: f64) -> Result<f64> {
    let num = phi.eval(a, b)?;
    let dh = energy.derivative(a)? - energy.derivative(b)?;
    if dh.abs() > EQUAL_ARGUMENT_EPS {
        return Ok(num / dh);
    }
    fallback_ratio(phi, energy, a.min(b))
}

/// Secant approximation of the equal-argument limit at `base`.
pub fn fallback_ratio(phi: &CouplingFunction, energy: &EnergyFunction, base: f64) -> Result<f64> {
    let delta = FALLBACK_STEP * base.abs().max(1.0);
    let dom = phi.domain().intersect(&energy.domain());
    let (hi, lo) = if dom.contains(base + delta) {
        (base + delta, base)
    } else {
        (base, base - delta)
    };
    let num = phi.eval(hi, lo)?;
    let dh = energy.derivative(hi)? - energy.derivative(lo)?;
    let r = num / dh;
    if dh == 0.0 || !r.is_finite() {
        return Err(Error::NonFiniteRatio { a: hi, b: lo });
    }
    Ok(r)
}
