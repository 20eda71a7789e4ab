//! Discrete Fisher information `J(x)`, logarithmic mean, edge densities, and
//! the dissipation identity `dE/dt = -J(x)` checked along trajectories.

use nalgebra::DVector;
use serde::Serialize;

use crate::coupling::{fallback_ratio, ratio_phi_over_dh, CouplingFunction, EQUAL_ARGUMENT_EPS};
use crate::energy::EnergyFunction;
use crate::error::{Error, Result};
use crate::gradient::GradientSystem;
use crate::integrator::{step_rk4, TrajectoryRecord};

/// Samples whose `J` falls below this fraction of the trajectory maximum
/// are measured against the floor `fraction * max J` instead of `J` itself.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeContribution {
    /// Branch `from -> to` (0-based).
    pub from: usize,
    pub to: usize,
    /// `c_to w_{to,from} phi(x_from, x_to) (h(x_from) - h(x_to)) / 2`
    pub contribution: f64,
    /// `phi(x_from, x_to) / (ln x_from - ln x_to)` when both states are
    /// positive.
    pub density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherReport {
    pub j: f64,
    pub contributions: Vec<EdgeContribution>,
}

/// `J(x) = 1/2 sum_{i,j} c_i w_ij phi(x_j, x_i) (h(x_j) - h(x_i))` over
/// ordered branches.
pub fn fisher_information(sys: &GradientSystem, x: &DVector<f64>) -> Result<FisherReport> {
    if x.len() != sys.node_count() {
        return Err(Error::DimensionMismatch {
            expected: sys.node_count(),
            got: x.len(),
        });
    }
    let c = sys.stationary();
    let energy = sys.energy();
    let mut j = 0.0;
    let mut contributions = Vec::with_capacity(sys.graph().branch_count());
    for b in sys.graph().branches() {
        let (xj, xi) = (x[b.from], x[b.to]);
        let phi = sys.coupling().eval(xj, xi)?;
        let dh = energy.derivative(xj)? - energy.derivative(xi)?;
        let contribution = 0.5 * c.get(b.to) * b.weight * phi * dh;
        j += contribution;
        let density = if xj > 0.0 && xi > 0.0 {
            Some(edge_density(sys.coupling(), xj, xi)?)
        } else {
            None
        };
        contributions.push(EdgeContribution {
            from: b.from,
            to: b.to,
            contribution,
            density,
        });
    }
    Ok(FisherReport { j, contributions })
}

/// `(a - b) / (ln a - ln b)`, continuous at `a = b`.
pub fn log_mean(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::DomainViolation {
                what: "logarithmic mean",
                value: v,
                domain: "(0, inf)".into(),
            });
        }
    }
    let dl = a.ln() - b.ln();
    if dl.abs() < EQUAL_ARGUMENT_EPS {
        return Ok(0.5 * (a + b));
    }
    Ok((a - b) / dl)
}

/// `phi(a, b) / (ln a - ln b)`; the logarithmic mean for linear coupling and
/// `sinc(a - b) lgm(a, b)` for sinusoidal coupling.
pub fn edge_density(phi: &CouplingFunction, a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::DomainViolation {
                what: "edge density",
                value: v,
                domain: "(0, inf)".into(),
            });
        }
    }
    // h = ln z + 1 has the same differences as ln
    let log_h = EnergyFunction::RelativeEntropy;
    match ratio_phi_over_dh(phi, &log_h, a, b) {
        Err(Error::NonFiniteRatio { .. }) => fallback_ratio(phi, &log_h, a.min(b)),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeBruijnSample {
    pub t: f64,
    pub j: f64,
    /// `dE/dt + J(x) - grad E . C omega` with a central difference in time.
    pub residual: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeBruijnReport {
    pub samples: Vec<DeBruijnSample>,
    pub max_abs: f64,
    pub max_relative: f64,
}

impl DeBruijnReport {
    /// Residual per record sample, `None` at the endpoints.
    pub fn column(&self, rec: &TrajectoryRecord) -> Vec<Option<f64>> {
        let mut out = vec![None; rec.len()];
        let mut it = self.samples.iter().peekable();
        for (k, t) in rec.times.iter().enumerate() {
            if let Some(s) = it.peek() {
                if s.t == *t {
                    out[k] = Some(s.residual);
                    it.next();
                }
            }
        }
        out
    }
}

/// `J(x(t))` per record sample.
pub fn fisher_series(rec: &TrajectoryRecord, sys: &GradientSystem) -> Result<Vec<f64>> {
    rec.xs.iter().map(|x| Ok(fisher_information(sys, x)?.j)).collect()
}

/// Check of `dE/dt = -J(x)` (plus drive power when driven) at interior
/// samples, with `dE/dt` taken as `(E(t + dt) - E(t - dt)) / (2 dt)`. The
/// neighbouring charges come from one RK4 step of the gradient form in each
/// direction, so the check does not depend on the monitor cadence. Relative
/// residuals are taken against `max(J(t), RELATIVE_FLOOR * max_t J)`.
pub fn debruijn_residual(rec: &TrajectoryRecord, sys: &GradientSystem) -> Result<DeBruijnReport> {
    let js = fisher_series(rec, sys)?;
    let j_max = js.iter().map(|j| j.abs()).fold(0.0, f64::max);
    let floor = RELATIVE_FLOOR * j_max;
    let drive_q = rec.drive.as_ref().map(|w| sys.stationary().charge(w));
    let field = |q: &DVector<f64>| -> Result<DVector<f64>> {
        let f = sys.gradient_vector_field(q)?;
        Ok(match &drive_q {
            Some(wq) => f + wq,
            None => f,
        })
    };
    let dt = rec.dt;
    let mut samples = Vec::new();
    for (k, q) in rec.qs.iter().enumerate().take(rec.len().saturating_sub(1)).skip(1) {
        let ahead = sys.energy_at(&step_rk4(field, q, dt)?)?;
        let behind = sys.energy_at(&step_rk4(field, q, -dt)?)?;
        let fd = (ahead - behind) / (2.0 * dt);
        let mut residual = fd + js[k];
        if let Some(wq) = &drive_q {
            residual -= sys.grad_at(q)?.dot(wq);
        }
        let scale = js[k].abs().max(floor);
        let relative = if scale > 0.0 { residual.abs() / scale } else { 0.0 };
        samples.push(DeBruijnSample {
            t: rec.times[k],
            j: js[k],
            residual,
            relative,
        });
    }
    let max_abs = samples.iter().map(|s| s.residual.abs()).fold(0.0, f64::max);
    let max_relative = samples.iter().map(|s| s.relative).fold(0.0, f64::max);
    Ok(DeBruijnReport {
        samples,
        max_abs,
        max_relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Branch, WeightedDigraph};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, FRAC_PI_2, LN_2};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn two_node(coupling: CouplingFunction, energy: EnergyFunction) -> GradientSystem {
        let g = WeightedDigraph::new(2, vec![Branch::new(1, 0, 2.0), Branch::new(0, 1, 1.0)]).unwrap();
        GradientSystem::new(g, coupling, energy).unwrap()
    }

    #[test]
    fn fisher_examples() {
        let sys = two_node(CouplingFunction::Linear, EnergyFunction::Quadratic);
        assert_eq!(fisher_information(&sys, &v(&[2.0, 2.0])).unwrap().j, 0.0);
        assert_relative_eq!(fisher_information(&sys, &v(&[0.0, 3.0])).unwrap().j, 6.0, epsilon = 1e-14);
    }

    #[test]
    fn fisher_log_form() {
        // linear phi, h = ln: J = 1/2 sum c_i w_ij lgm(x_j, x_i) (ln x_j - ln x_i)^2
        let sys = two_node(CouplingFunction::Linear, EnergyFunction::RelativeEntropy);
        let x = v(&[0.5, 2.5]);
        let rep = fisher_information(&sys, &x).unwrap();
        let c = sys.stationary();
        let mut expected = 0.0;
        for b in sys.graph().branches() {
            let (xj, xi) = (x[b.from], x[b.to]);
            expected += 0.5 * c.get(b.to) * b.weight * log_mean(xj, xi).unwrap() * (xj.ln() - xi.ln()).powi(2);
        }
        assert_relative_eq!(rep.j, expected, epsilon = 1e-14);
        for e in &rep.contributions {
            assert_relative_eq!(e.density.unwrap(), log_mean(x[e.from], x[e.to]).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn log_mean_examples() {
        assert_eq!(log_mean(3.0, 3.0).unwrap(), 3.0);
        assert_relative_eq!(log_mean(4.0, 2.0).unwrap(), 2.0 / LN_2, epsilon = 1e-14);
        assert_relative_eq!(log_mean(4.0, 2.0).unwrap(), 2.885390, epsilon = 1e-6);
        assert_relative_eq!(log_mean(E, 1.0).unwrap(), E - 1.0, epsilon = 1e-14);
        assert!(log_mean(0.0, 1.0).is_err());
        assert!(log_mean(1.0, -1.0).is_err());
    }

    #[test]
    fn edge_density_examples() {
        assert_relative_eq!(edge_density(&CouplingFunction::Linear, 4.0, 2.0).unwrap(), 2.885390, epsilon = 1e-6);
        assert_relative_eq!(edge_density(&CouplingFunction::Sinusoidal, 1.7, 1.7).unwrap(), 1.7, epsilon = 1e-5);
        let a = 1.0 + FRAC_PI_2;
        let d = edge_density(&CouplingFunction::Sinusoidal, a, 1.0).unwrap();
        assert_relative_eq!(d, (2.0 / std::f64::consts::PI) * log_mean(a, 1.0).unwrap(), epsilon = 1e-14);
        assert_relative_eq!(d, 1.0 / (1.0 + FRAC_PI_2).ln(), epsilon = 1e-14);
        assert_relative_eq!(d, 1.05908, epsilon = 1e-5);
        assert!(edge_density(&CouplingFunction::Linear, 0.0, 1.0).is_err());
    }

    #[test]
    fn fisher_equals_negative_dissipation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for coupling in [
            CouplingFunction::Linear,
            CouplingFunction::Sinusoidal,
            CouplingFunction::gain(2.0).unwrap(),
            CouplingFunction::power(2.0).unwrap(),
        ] {
            for energy in [EnergyFunction::Quadratic, EnergyFunction::RelativeEntropy, EnergyFunction::power_law(3.0).unwrap()] {
                let sys = two_node(coupling, energy);
                for _ in 0..20 {
                    let x = v(&[rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)]);
                    let j = fisher_information(&sys, &x).unwrap().j;
                    let d = sys.dissipation_rate(&sys.stationary().charge(&x)).unwrap();
                    assert!((j + d).abs() < 1e-10, "{j} vs {d}");
                }
            }
        }
    }

    /// Composite Gauss-Legendre (5 points, 200 panels) on [0, 1].
    fn quad(f: impl Fn(f64) -> f64) -> f64 {
        let nodes = [
            (0.0, 128.0 / 225.0),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let panels = 200;
        let h = 1.0 / panels as f64;
        (0..panels)
            .map(|p| {
                let mid = (p as f64 + 0.5) * h;
                nodes.iter().map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn log_mean_between_geometric_and_arithmetic(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
            let l = log_mean(a, b).unwrap();
            let tol = 1e-12 * l;
            prop_assert!((a * b).sqrt() <= l + tol);
            prop_assert!(l <= 0.5 * (a + b) + tol);
            prop_assert!(a.min(b) <= l + tol && l <= a.max(b) + tol);
        }

        #[test]
        fn linear_density_is_mean_value(a in 0.01f64..10.0, b in 0.01f64..10.0) {
            let d = edge_density(&CouplingFunction::Linear, a, b).unwrap();
            prop_assert!(a.min(b) * (1.0 - 1e-12) <= d && d <= a.max(b) * (1.0 + 1e-12));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inverse_log_mean_integral(a in 0.1f64..10.0, b in 0.1f64..10.0) {
            let integral = quad(|xi| 1.0 / (a * xi + (1.0 - xi) * b));
            let inv = 1.0 / log_mean(a, b).unwrap();
            prop_assert!((integral - inv).abs() < 1e-8, "{} vs {}", integral, inv);
        }
    }
}
