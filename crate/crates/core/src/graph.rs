//! Weighted digraphs, their Laplacian and incidence matrices, the stationary
//! vector and the detailed-balance check.
//!
//! Node indices are 0-based in the API. A branch `j -> i` with weight `w_ij`
//! lets node `j` act on node `i`: it contributes `w_ij * phi(x_j, x_i)` to
//! `dx_i/dt` and `-w_ij` to `L[i][j]`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for [`check_detailed_balance`].
pub const DETAILED_BALANCE_TOL: f64 = 1e-9;

/// Residual bound on `c^T L` accepted by [`stationary_vector`].
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl Branch {
    pub fn new(from: usize, to: usize, weight: f64) -> Self {
        Self { from, to, weight }
    }
}

/// Directed graph with strictly positive branch weights, no self-loops and at
/// most one branch per ordered node pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    node_count: usize,
    branches: Vec<Branch>,
    /// `weights[(i, j)] = w_ij`, the weight of branch `j -> i`.
    weights: DMatrix<f64>,
}

impl WeightedDigraph {
    pub fn new(node_count: usize, branches: Vec<Branch>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut weights = DMatrix::zeros(node_count, node_count);
        for b in &branches {
            if b.from >= node_count || b.to >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "branch {} -> {} references a node outside 1..={}",
                    b.from + 1,
                    b.to + 1,
                    node_count
                )));
            }
            if b.from == b.to {
                return Err(Error::InvalidGraph(format!("self-loop at node {}", b.from + 1)));
            }
            if !(b.weight.is_finite() && b.weight > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "branch {} -> {} has non-positive weight {}",
                    b.from + 1,
                    b.to + 1,
                    b.weight
                )));
            }
            if weights[(b.to, b.from)] != 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "duplicate branch {} -> {}",
                    b.from + 1,
                    b.to + 1
                )));
            }
            weights[(b.to, b.from)] = b.weight;
        }
        Ok(Self {
            node_count,
            branches,
            weights,
        })
    }

    /// Builds a graph from a symmetric set of undirected pairs, inserting both
    /// orientations with weights `(w_ij, w_ji)`.
    pub fn from_bidirected(node_count: usize, pairs: &[(usize, usize, f64, f64)]) -> Result<Self> {
        let mut branches = Vec::with_capacity(2 * pairs.len());
        for &(i, j, w_ij, w_ji) in pairs {
            branches.push(Branch::new(j, i, w_ij));
            branches.push(Branch::new(i, j, w_ji));
        }
        Self::new(node_count, branches)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// `w_ij`: weight of the branch `j -> i`, zero when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Undirected edges as `(tail, head)` in lexicographic order of
    /// `(min, max)`. Bidirected pairs are oriented low index to high index;
    /// a pair carried by a single branch keeps that branch's orientation.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let n = self.node_count;
        let mut edges = Vec::new();
        for lo in 0..n {
            for hi in (lo + 1)..n {
                let up = self.weights[(hi, lo)] > 0.0; // lo -> hi
                let down = self.weights[(lo, hi)] > 0.0; // hi -> lo
                match (up, down) {
                    (true, _) => edges.push((lo, hi)),
                    (false, true) => edges.push((hi, lo)),
                    (false, false) => {}
                }
            }
        }
        edges
    }
}

/// Graph Laplacian `L = D - W`: off-diagonals `-w_ij`, diagonal row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    /// Wraps a matrix assumed to have zero row sums and non-positive
    /// off-diagonals (checked in debug builds only for the row sums).
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        Self(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn max_diagonal(&self) -> f64 {
        self.0.diagonal().iter().copied().fold(0.0, f64::max)
    }
}

pub fn build_laplacian(g: &WeightedDigraph) -> LaplacianMatrix {
    let n = g.node_count();
    let mut l = DMatrix::zeros(n, n);
    for b in g.branches() {
        l[(b.to, b.from)] = -b.weight;
    }
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s -= l[(i, j)];
            }
        }
        l[(i, i)] = s;
    }
    LaplacianMatrix(l)
}

pub fn is_strongly_connected(g: &WeightedDigraph) -> bool {
    let n = g.node_count();
    let w = g.weights();
    // forward reachability from node 0 follows j -> i when w[(i, j)] > 0,
    // backward reachability follows the transpose
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let linked = if forward { w[(v, u)] > 0.0 } else { w[(u, v)] > 0.0 };
                if linked && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Positive left null vector of the Laplacian, normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryVector(DVector<f64>);

impl StationaryVector {
    /// Normalizes a positive vector to unit sum.
    pub fn from_positive(c: DVector<f64>) -> Result<Self> {
        if c.is_empty() || c.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::SingularStructure(
                "stationary vector must be finite and strictly positive".into(),
            ));
        }
        let s = c.sum();
        Ok(Self(c / s))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// Diagonal matrix `C`.
    pub fn diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.0)
    }

    /// `q = C x`
    pub fn charge(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0.component_mul(x)
    }

    /// `x = C^{-1} q`
    pub fn state(&self, q: &DVector<f64>) -> DVector<f64> {
        q.component_div(&self.0)
    }

    /// `sum_i c_i x_i` (the weighted mean, since `sum_i c_i = 1`).
    pub fn weighted_mean(&self, x: &DVector<f64>) -> f64 {
        self.0.dot(x)
    }
}

/// Solves `c^T L = 0` with `c_1 = 1` by LU on the remaining `(n-1)`-system,
/// then normalizes.
pub fn stationary_vector(l: &LaplacianMatrix) -> Result<StationaryVector> {
    let lm = l.matrix();
    let n = lm.nrows();
    if n == 1 {
        return StationaryVector::from_positive(DVector::from_element(1, 1.0));
    }
    let m = n - 1;
    // column k of c^T L for k = 1..n-1, unknowns c_1..c_{n-1}
    let a = DMatrix::from_fn(m, m, |k, i| lm[(i + 1, k + 1)]);
    let rhs = DVector::from_fn(m, |k, _| -lm[(0, k + 1)]);
    let lu = a.lu();
    let u = lu.u();
    let pivots: Vec<f64> = u.diagonal().iter().map(|v| v.abs()).collect();
    let pmax = pivots.iter().copied().fold(0.0, f64::max);
    let pmin = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    if !(pmax > 0.0) || pmin <= 1e-12 * pmax {
        return Err(Error::SingularStructure(
            "zero eigenvalue of the Laplacian is not simple".into(),
        ));
    }
    let tail = lu.solve(&rhs).ok_or_else(|| {
        Error::SingularStructure("zero eigenvalue of the Laplacian is not simple".into())
    })?;
    let mut c = DVector::from_element(n, 1.0);
    c.rows_mut(1, m).copy_from(&tail);
    let c = StationaryVector::from_positive(c)?;
    let residual = (c.values().transpose() * lm).amax();
    if residual >= STATIONARY_RESIDUAL_TOL {
        return Err(Error::SingularStructure(format!(
            "stationary residual {residual:e} exceeds {STATIONARY_RESIDUAL_TOL:e}"
        )));
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetailedBalanceReport {
    pub holds: bool,
    /// Violating unordered pairs `(i, j)` with `i < j`.
    pub violations: Vec<(usize, usize)>,
    /// Largest relative defect `|c_i w_ij - c_j w_ji| / max(1, flux)`.
    pub max_defect: f64,
}

/// Pairwise test of `c_i w_ij = c_j w_ji` with relative tolerance `tol`.
/// A branch without its reverse partner is always a violation.
pub fn check_detailed_balance(
    g: &WeightedDigraph,
    c: &StationaryVector,
    tol: f64,
) -> Result<DetailedBalanceReport> {
    let n = g.node_count();
    if c.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.len(),
        });
    }
    let mut violations = Vec::new();
    let mut max_defect: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let fwd = c.get(i) * g.weight(i, j);
            let bwd = c.get(j) * g.weight(j, i);
            if fwd == 0.0 && bwd == 0.0 {
                continue;
            }
            let scale = 1f64.max(fwd.abs()).max(bwd.abs());
            let defect = (fwd - bwd).abs() / scale;
            max_defect = max_defect.max(defect);
            let one_sided = (fwd == 0.0) != (bwd == 0.0);
            if one_sided || defect > tol {
                violations.push((i, j));
            }
        }
    }
    Ok(DetailedBalanceReport {
        holds: violations.is_empty(),
        violations,
        max_defect,
    })
}

/// `n x b` incidence matrix, one column per undirected edge: `+1` at the head,
/// `-1` at the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    matrix: DMatrix<f64>,
    edges: Vec<(usize, usize)>,
}

impl IncidenceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `(tail, head)` per column.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

pub fn incidence_matrix(g: &WeightedDigraph) -> IncidenceMatrix {
    let edges = g.undirected_edges();
    let mut matrix = DMatrix::zeros(g.node_count(), edges.len());
    for (e, &(tail, head)) in edges.iter().enumerate() {
        matrix[(head, e)] = 1.0;
        matrix[(tail, e)] = -1.0;
    }
    IncidenceMatrix { matrix, edges }
}
