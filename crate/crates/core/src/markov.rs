//! Master-equation reading of the quadratic-energy gradient form:
//! `dq/dt = -K(q) C^{-1} q = -F(q)^T q` with generator `F = C^{-1} K`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::energy::EnergyFunction;
use crate::error::{Error, Result};
use crate::gradient::GradientSystem;
use crate::graph::{stationary_vector, LaplacianMatrix, StationaryVector};

/// Tolerance on `sum_i q_i = 1` for probability inputs.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    matrix: DMatrix<f64>,
    state: DVector<f64>,
    c: StationaryVector,
}

impl GeneratorMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    /// `||C F - F^T C||_inf`
    pub fn detailed_balance_defect(&self) -> f64 {
        let cm = self.c.diag();
        (&cm * &self.matrix - self.matrix.transpose() * &cm).amax()
    }

    /// `-F^T q`
    pub fn apply(&self, q: &DVector<f64>) -> DVector<f64> {
        -(self.matrix.transpose() * q)
    }

    /// Second-smallest eigenvalue of the symmetrized generator
    /// `C^{1/2} F C^{-1/2} = C^{-1/2} K C^{-1/2}`. Diagnostic only.
    pub fn spectral_gap(&self) -> f64 {
        let n = self.matrix.nrows();
        if n < 2 {
            return 0.0;
        }
        let s = DMatrix::from_fn(n, n, |i, j| {
            self.matrix[(i, j)] * self.c.get(i).sqrt() / self.c.get(j).sqrt()
        });
        let sym = (&s + s.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev[1]
    }
}

/// `F = C^{-1} K(x)`; only defined for the quadratic energy, where
/// `grad E(q) = x`.
pub fn to_generator(sys: &GradientSystem, x: &DVector<f64>) -> Result<GeneratorMatrix> {
    if !sys.energy().is_quadratic() {
        return Err(Error::WrongEnergyKind(sys.energy().name()));
    }
    let k = sys.assemble_k(x)?;
    let c = sys.stationary();
    let mut f = k.matrix().clone();
    for i in 0..f.nrows() {
        let ci = c.get(i);
        f.row_mut(i).iter_mut().for_each(|v| *v /= ci);
    }
    Ok(GeneratorMatrix {
        matrix: f,
        state: x.clone(),
        c: c.clone(),
    })
}

/// Stationary law of the generator: the normalized left null vector of `F`,
/// which coincides with the capacitances `c`.
pub fn invariant_distribution(f: &GeneratorMatrix) -> Result<StationaryVector> {
    let pi = stationary_vector(&LaplacianMatrix::from_matrix(f.matrix.clone()))?;
    let residual = (f.matrix.transpose() * pi.values()).amax();
    if residual >= 1e-10 {
        return Err(Error::SingularStructure(format!(
            "invariant distribution residual {residual:e}"
        )));
    }
    Ok(pi)
}

/// `E(q) = sum_i c_i H(q_i / c_i)` for a probability vector `q`; with
/// `H(z) = z ln z` this is `sum_i q_i ln(q_i / c_i)`, exact zeros in `q`
/// contributing nothing.
pub fn divergence_to_equilibrium(
    energy: &EnergyFunction,
    c: &StationaryVector,
    q: &DVector<f64>,
) -> Result<f64> {
    if q.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            got: q.len(),
        });
    }
    if q.iter().any(|&v| !(v >= 0.0)) || (q.sum() - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::DomainViolation {
            what: "probability vector",
            value: q.sum(),
            domain: "probability simplex".into(),
        });
    }
    let mut d = 0.0;
    for i in 0..q.len() {
        if q[i] == 0.0 && matches!(energy, EnergyFunction::RelativeEntropy) {
            continue;
        }
        let ci = c.get(i);
        d += ci * energy.density(q[i] / ci)?;
    }
    Ok(d)
}
