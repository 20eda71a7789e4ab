//! The state-dependent metric `K` and the gradient form
//! `dq/dt = -K(q) grad E(q)` with `q = C x`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::coupling::{ratio_phi_over_dh, CouplingFunction, Domain};
use crate::energy::{eval_energy, grad_energy, h_of_state, EnergyFunction};
use crate::error::{Error, Result};
use crate::graph::{
    build_laplacian, check_detailed_balance, is_strongly_connected, stationary_vector,
    LaplacianMatrix, StationaryVector, WeightedDigraph, DETAILED_BALANCE_TOL,
};

/// Default tolerance on the smallest eigenvalue in [`verify_psd`].
pub const PSD_TOL: f64 = 1e-10;

/// One undirected edge with its symmetrized flux weight
/// `(c_i w_ij + c_j w_ji) / 2`, equal to either term under detailed balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFlux {
    pub tail: usize,
    pub head: usize,
    pub flux: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    matrix: DMatrix<f64>,
    state: DVector<f64>,
    active: Vec<(usize, usize)>,
}

impl MetricMatrix {
    /// Wraps an arbitrary symmetric matrix, e.g. for factorization tests.
    pub fn from_matrix(matrix: DMatrix<f64>, state: DVector<f64>) -> Self {
        let n = matrix.nrows();
        let active = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| matrix[(i, j)] > 0.0)
            .collect();
        Self {
            matrix,
            state,
            active,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    /// Off-diagonal pairs `(i, j)`, `i < j`, with a positive entry
    /// (locally active resistors).
    pub fn active_entries(&self) -> &[(usize, usize)] {
        &self.active
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn row_sum_defect(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCheck {
    pub ok: bool,
    pub min_eigenvalue: f64,
}

pub fn verify_psd(k: &MetricMatrix, tol: f64) -> PsdCheck {
    let min_eigenvalue = min_eigenvalue(k.matrix());
    PsdCheck {
        ok: min_eigenvalue >= -tol,
        min_eigenvalue,
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// A validated detailed-balance network together with a coupling and an
/// energy density.
#[derive(Debug, Clone)]
pub struct GradientSystem {
    graph: WeightedDigraph,
    laplacian: LaplacianMatrix,
    c: StationaryVector,
    coupling: CouplingFunction,
    energy: EnergyFunction,
    edges: Vec<EdgeFlux>,
}

impl GradientSystem {
    /// Checks strong connectivity, computes `c` and requires detailed
    /// balance at [`DETAILED_BALANCE_TOL`].
    pub fn new(graph: WeightedDigraph, coupling: CouplingFunction, energy: EnergyFunction) -> Result<Self> {
        if !is_strongly_connected(&graph) {
            return Err(Error::NotStronglyConnected);
        }
        let laplacian = build_laplacian(&graph);
        let c = stationary_vector(&laplacian)?;
        let db = check_detailed_balance(&graph, &c, DETAILED_BALANCE_TOL)?;
        if !db.holds {
            return Err(Error::DetailedBalanceViolation(db.violations));
        }
        let edges = graph
            .undirected_edges()
            .into_iter()
            .map(|(tail, head)| EdgeFlux {
                tail,
                head,
                flux: 0.5 * (c.get(head) * graph.weight(head, tail) + c.get(tail) * graph.weight(tail, head)),
            })
            .collect();
        Ok(Self {
            graph,
            laplacian,
            c,
            coupling,
            energy,
            edges,
        })
    }

    /// Same network and coupling, different energy density.
    pub fn with_energy(&self, energy: EnergyFunction) -> Self {
        Self {
            energy,
            ..self.clone()
        }
    }

    pub fn graph(&self) -> &WeightedDigraph {
        &self.graph
    }

    pub fn laplacian(&self) -> &LaplacianMatrix {
        &self.laplacian
    }

    pub fn stationary(&self) -> &StationaryVector {
        &self.c
    }

    pub fn coupling(&self) -> &CouplingFunction {
        &self.coupling
    }

    pub fn energy(&self) -> &EnergyFunction {
        &self.energy
    }

    pub fn edges(&self) -> &[EdgeFlux] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// States admissible for both the coupling and the energy.
    pub fn state_domain(&self) -> Domain {
        self.coupling.domain().intersect(&self.energy.domain())
    }

    /// `1 / max_i L_ii`, or 1 for an edgeless single node.
    pub fn characteristic_time(&self) -> f64 {
        let d = self.laplacian.max_diagonal();
        if d > 0.0 {
            1.0 / d
        } else {
            1.0
        }
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Direct evaluation of `dx_i/dt = sum_j w_ij phi(x_j, x_i)`.
    pub fn x_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x)?;
        let mut f = DVector::zeros(x.len());
        for b in self.graph.branches() {
            f[b.to] += b.weight * self.coupling.eval(x[b.from], x[b.to])?;
        }
        Ok(f)
    }

    /// `phi(x_j, x_i) / (h(x_j) - h(x_i))` for one edge.
    pub fn edge_ratio(&self, x: &DVector<f64>, e: &EdgeFlux) -> Result<f64> {
        ratio_phi_over_dh(&self.coupling, &self.energy, x[e.head], x[e.tail])
    }

    /// Metric `K` at state `x`: `K_ij = -c_i w_ij phi(x_j, x_i) / (h(x_j) - h(x_i))`,
    /// diagonal completes zero row sums.
    pub fn assemble_k(&self, x: &DVector<f64>) -> Result<MetricMatrix> {
        self.check_len(x)?;
        let n = self.node_count();
        let mut k = DMatrix::zeros(n, n);
        for e in &self.edges {
            let g = e.flux * self.edge_ratio(x, e)?;
            k[(e.tail, e.head)] = -g;
            k[(e.head, e.tail)] = -g;
        }
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if j != i {
                    s -= k[(i, j)];
                }
            }
            k[(i, i)] = s;
        }
        Ok(MetricMatrix::from_matrix(k, x.clone()))
    }

    /// `E(q)`
    pub fn energy_at(&self, q: &DVector<f64>) -> Result<f64> {
        eval_energy(&self.energy, &self.c, q)
    }

    /// `grad E(q) = h(C^{-1} q)`
    pub fn grad_at(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        grad_energy(&self.energy, &self.c, q)
    }

    /// `-K(C^{-1} q) grad E(q)`
    pub fn gradient_vector_field(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(q)?;
        let x = self.c.state(q);
        let k = self.assemble_k(&x)?;
        let g = h_of_state(&self.energy, &x)?;
        Ok(-(k.matrix() * g))
    }

    /// `dE/dt = -grad E . K grad E`
    pub fn dissipation_rate(&self, q: &DVector<f64>) -> Result<f64> {
        self.check_len(q)?;
        let x = self.c.state(q);
        let k = self.assemble_k(&x)?;
        let g = h_of_state(&self.energy, &x)?;
        Ok(-g.dot(&(k.matrix() * &g)))
    }
}
