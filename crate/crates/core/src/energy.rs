//! Energy densities `H` with derivative `h = dH/dz`, and the sum-separable
//! energy `E(q) = sum_i c_i H(q_i / c_i)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::coupling::Domain;
use crate::error::{Error, Result};
use crate::graph::StationaryVector;

/// Relative mismatch tolerated between a custom `h` and the central
/// difference of its `H`.
pub const CUSTOM_CONSISTENCY_TOL: f64 = 1e-5;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied `(H, h)` pair on a declared domain.
#[derive(Clone)]
pub struct CustomEnergy {
    name: String,
    big_h: ScalarFn,
    h: ScalarFn,
    domain: Domain,
}

impl fmt::Debug for CustomEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomEnergy")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl CustomEnergy {
    /// Registers `(H, h)`; `h` must match the central difference of `H` at
    /// 101 points across the domain window.
    pub fn new(
        name: impl Into<String>,
        big_h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: Domain,
    ) -> Result<Self> {
        let name = name.into();
        let (lo, hi) = domain.window();
        let k = 100;
        for s in 0..=k {
            let z = lo + (hi - lo) * s as f64 / k as f64;
            let e = 1e-5 * z.abs().max(1.0);
            if !domain.contains(z - e) || !domain.contains(z + e) {
                continue;
            }
            let fd = (big_h(z + e) - big_h(z - e)) / (2.0 * e);
            let hz = h(z);
            if !(fd.is_finite() && hz.is_finite()) {
                return Err(Error::InconsistentEnergy(format!(
                    "{name}: non-finite value at z = {z}"
                )));
            }
            if (fd - hz).abs() > CUSTOM_CONSISTENCY_TOL * hz.abs().max(1.0) {
                return Err(Error::InconsistentEnergy(format!(
                    "{name}: h({z}) = {hz} but dH/dz = {fd}"
                )));
            }
        }
        Ok(Self {
            name,
            big_h: Arc::new(big_h),
            h: Arc::new(h),
            domain,
        })
    }

    /// `H(z) = z^4/4 - a z^2/2`. Strictly convex for `a <= 0`; for `a > 0`
    /// `h` decreases on `(-sqrt(a/3), sqrt(a/3))`.
    pub fn double_well(a: f64) -> Self {
        Self::new(
            format!("double_well(a={a})"),
            move |z| z.powi(4) / 4.0 - a * z * z / 2.0,
            move |z| z.powi(3) - a * z,
            Domain::Real,
        )
        .expect("double well is consistent")
    }

    /// Quadratic outside `[lo, hi]` and flat inside, so `h` vanishes on the
    /// whole interval.
    pub fn dead_zone(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "dead zone needs lo < hi");
        Self::new(
            format!("dead_zone([{lo}, {hi}])"),
            move |z| {
                if z < lo {
                    (z - lo).powi(2) / 2.0
                } else if z > hi {
                    (z - hi).powi(2) / 2.0
                } else {
                    0.0
                }
            },
            move |z| {
                if z < lo {
                    z - lo
                } else if z > hi {
                    z - hi
                } else {
                    0.0
                }
            },
            Domain::Real,
        )
        .expect("dead zone is consistent")
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Debug, Clone)]
pub enum EnergyFunction {
    /// `H(z) = z^2 / 2`
    Quadratic,
    /// `H(z) = z ln z`
    RelativeEntropy,
    /// `H(z) = z^p / (p (p - 1))`, `p > 1`
    PowerLaw { p: f64 },
    Custom(CustomEnergy),
}

impl EnergyFunction {
    pub fn power_law(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "power-law energy needs p > 1, got {p}"
            )));
        }
        Ok(Self::PowerLaw { p })
    }

    pub fn name(&self) -> String {
        match self {
            Self::Quadratic => "quadratic".into(),
            Self::RelativeEntropy => "relative_entropy".into(),
            Self::PowerLaw { p } => format!("power_law(p={p})"),
            Self::Custom(c) => c.name.clone(),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            Self::Quadratic => Domain::Real,
            Self::RelativeEntropy => Domain::Positive,
            Self::PowerLaw { .. } => Domain::NonNegative,
            Self::Custom(c) => c.domain,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Self::Quadratic)
    }

    fn check(&self, z: f64) -> Result<()> {
        let d = self.domain();
        if d.contains(z) {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                what: "energy density",
                value: z,
                domain: d.to_string(),
            })
        }
    }

    /// `H(z)`
    pub fn density(&self, z: f64) -> Result<f64> {
        self.check(z)?;
        Ok(match self {
            Self::Quadratic => 0.5 * z * z,
            Self::RelativeEntropy => z * z.ln(),
            Self::PowerLaw { p } => z.powf(*p) / (p * (p - 1.0)),
            Self::Custom(c) => (c.big_h)(z),
        })
    }

    /// `h(z) = dH/dz`
    pub fn derivative(&self, z: f64) -> Result<f64> {
        self.check(z)?;
        Ok(match self {
            Self::Quadratic => z,
            Self::RelativeEntropy => z.ln() + 1.0,
            Self::PowerLaw { p } => z.powf(p - 1.0) / (p - 1.0),
            Self::Custom(c) => (c.h)(z),
        })
    }

    /// Sampled strict-convexity test on `[lo, hi]`: `h` strictly increasing
    /// across `k + 1` equispaced points. Returns the first offending pair.
    pub fn h_strictly_increasing_on(&self, lo: f64, hi: f64, k: usize) -> Result<Option<(f64, f64)>> {
        let mut prev = (lo, self.derivative(lo)?);
        for s in 1..=k {
            let z = lo + (hi - lo) * s as f64 / k as f64;
            let hz = self.derivative(z)?;
            if hz <= prev.1 {
                return Ok(Some((prev.0, z)));
            }
            prev = (z, hz);
        }
        Ok(None)
    }
}

/// `E(q) = sum_i c_i H(q_i / c_i)`
pub fn eval_energy(energy: &EnergyFunction, c: &StationaryVector, q: &DVector<f64>) -> Result<f64> {
    check_len(c, q)?;
    let mut e = 0.0;
    for i in 0..q.len() {
        let ci = c.get(i);
        e += ci * energy.density(q[i] / ci)?;
    }
    Ok(e)
}

/// `dE/dq_i = h(q_i / c_i) = h(x_i)`
pub fn grad_energy(
    energy: &EnergyFunction,
    c: &StationaryVector,
    q: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(c, q)?;
    let mut g = DVector::zeros(q.len());
    for i in 0..q.len() {
        g[i] = energy.derivative(q[i] / c.get(i))?;
    }
    Ok(g)
}

/// `h` applied componentwise to a state `x`.
pub fn h_of_state(energy: &EnergyFunction, x: &DVector<f64>) -> Result<DVector<f64>> {
    let mut g = DVector::zeros(x.len());
    for i in 0..x.len() {
        g[i] = energy.derivative(x[i])?;
    }
    Ok(g)
}

fn check_len(c: &StationaryVector, q: &DVector<f64>) -> Result<()> {
    if c.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            got: q.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cvec(v: &[f64]) -> StationaryVector {
        StationaryVector::from_positive(DVector::from_column_slice(v)).unwrap()
    }

    #[test]
    fn energy_examples() {
        let c = cvec(&[0.5, 0.5]);
        let q = DVector::from_vec(vec![0.5, 0.5]);
        assert_relative_eq!(eval_energy(&EnergyFunction::Quadratic, &c, &q).unwrap(), 0.5);

        let c = cvec(&[0.2, 0.3, 0.5]);
        let q = c.values().clone();
        assert_eq!(eval_energy(&EnergyFunction::RelativeEntropy, &c, &q).unwrap(), 0.0);

        let q = DVector::zeros(3);
        assert_eq!(eval_energy(&EnergyFunction::Quadratic, &c, &q).unwrap(), 0.0);
    }

    #[test]
    fn gradient_examples() {
        let c = cvec(&[0.25, 0.75]);
        let q = DVector::from_vec(vec![0.5, -0.3]);
        let g = grad_energy(&EnergyFunction::Quadratic, &c, &q).unwrap();
        assert_relative_eq!(g, c.state(&q), epsilon = 1e-15);

        // x = (1, e) => h = ln x + 1 = (1, 2)
        let x = DVector::from_vec(vec![1.0, std::f64::consts::E]);
        let g = grad_energy(&EnergyFunction::RelativeEntropy, &c, &c.charge(&x)).unwrap();
        assert_relative_eq!(g[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g[1], 2.0, epsilon = 1e-14);

        for e in [
            EnergyFunction::Quadratic,
            EnergyFunction::RelativeEntropy,
            EnergyFunction::power_law(3.0).unwrap(),
        ] {
            let x = DVector::from_element(2, 1.7);
            let g = grad_energy(&e, &c, &c.charge(&x)).unwrap();
            assert_eq!(g[0], g[1]);
        }
    }

    #[test]
    fn domain_errors() {
        let c = cvec(&[0.5, 0.5]);
        let q = DVector::from_vec(vec![-0.1, 0.5]);
        assert!(matches!(
            eval_energy(&EnergyFunction::RelativeEntropy, &c, &q),
            Err(Error::DomainViolation { .. })
        ));
        assert!(EnergyFunction::power_law(1.0).is_err());
        let short = DVector::from_vec(vec![1.0]);
        assert!(eval_energy(&EnergyFunction::Quadratic, &c, &short).is_err());
    }

    #[test]
    fn custom_rejects_mismatched_derivative() {
        let bad = CustomEnergy::new("bad", |z| z * z, |z| z, Domain::Real);
        assert!(matches!(bad, Err(Error::InconsistentEnergy(_))));
        let ok = CustomEnergy::new("ok", |z| z * z, |z| 2.0 * z, Domain::Real);
        assert!(ok.is_ok());
    }

    #[test]
    fn convexity_sampling() {
        assert!(EnergyFunction::Quadratic
            .h_strictly_increasing_on(-2.0, 2.0, 200)
            .unwrap()
            .is_none());
        let dw = EnergyFunction::Custom(CustomEnergy::double_well(3.0));
        assert!(dw.h_strictly_increasing_on(-0.5, 0.5, 200).unwrap().is_some());
        assert!(dw.h_strictly_increasing_on(1.5, 3.0, 200).unwrap().is_none());
        let dz = EnergyFunction::Custom(CustomEnergy::dead_zone(-1.0, 1.0));
        assert!(dz.h_strictly_increasing_on(-0.5, 0.5, 10).unwrap().is_some());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let energies = [
            EnergyFunction::Quadratic,
            EnergyFunction::RelativeEntropy,
            EnergyFunction::power_law(3.0).unwrap(),
            EnergyFunction::power_law(1.5).unwrap(),
            EnergyFunction::Custom(CustomEnergy::double_well(1.0)),
        ];
        for _ in 0..100 {
            let n = rng.gen_range(1..6);
            let c = StationaryVector::from_positive(DVector::from_fn(n, |_, _| rng.gen_range(0.1..1.0)))
                .unwrap();
            let x = DVector::from_fn(n, |_, _| rng.gen_range(0.3..3.0));
            let q = c.charge(&x);
            for e in &energies {
                let g = grad_energy(e, &c, &q).unwrap();
                for i in 0..n {
                    let step = 1e-6 * q[i].abs().max(1e-3);
                    let mut qp = q.clone();
                    let mut qm = q.clone();
                    qp[i] += step;
                    qm[i] -= step;
                    let fd = (eval_energy(e, &c, &qp).unwrap() - eval_energy(e, &c, &qm).unwrap())
                        / (2.0 * step);
                    let rel = (fd - g[i]).abs() / g[i].abs().max(1.0);
                    assert!(rel < 1e-6, "{}: fd {fd} vs {} (rel {rel})", e.name(), g[i]);
                }
            }
        }
    }
}
