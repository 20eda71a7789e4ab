//! RC-circuit realization of the gradient form: a capacitor bank
//! `dq/dt = u_N, v_N = grad E(q)` closed by a resistor network
//! `i_N = -B D_B B^T v_N`, so that `K = B D_B B^T`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gradient::{min_eigenvalue, GradientSystem, MetricMatrix, PSD_TOL};
use crate::graph::{IncidenceMatrix, StationaryVector};
use crate::numfmt::fmt12;

/// One resistor per undirected edge at a given state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResistorEdge {
    pub tail: usize,
    pub head: usize,
    pub conductance: f64,
}

impl ResistorEdge {
    pub fn resistance(&self) -> f64 {
        1.0 / self.conductance
    }

    pub fn strictly_passive(&self) -> bool {
        self.conductance > 0.0
    }
}

/// Edge conductances `g_e = c_i w_ij phi(x_j, x_i) / (h(x_j) - h(x_i))`,
/// in the order of [`crate::graph::incidence_matrix`].
pub fn synthesize_conductances(sys: &GradientSystem, x: &DVector<f64>) -> Result<Vec<ResistorEdge>> {
    if x.len() != sys.node_count() {
        return Err(Error::DimensionMismatch {
            expected: sys.node_count(),
            got: x.len(),
        });
    }
    sys.edges()
        .iter()
        .map(|e| {
            Ok(ResistorEdge {
                tail: e.tail,
                head: e.head,
                conductance: e.flux * sys.edge_ratio(x, e)?,
            })
        })
        .collect()
}

/// Conductance computed from the single branch `from -> to`, i.e.
/// `c_to w_{to,from} phi(x_from, x_to) / (h(x_from) - h(x_to))`.
pub fn branch_conductance(sys: &GradientSystem, from: usize, to: usize, x: &DVector<f64>) -> Result<f64> {
    let w = sys.graph().weight(to, from);
    let r = crate::coupling::ratio_phi_over_dh(sys.coupling(), sys.energy(), x[from], x[to])?;
    Ok(sys.stationary().get(to) * w * r)
}

/// Recovers `D_B` from a symmetric Laplacian `K` such that `K = B D_B B^T`.
pub fn kirchhoff_factorization(k: &MetricMatrix, b: &IncidenceMatrix) -> Result<DMatrix<f64>> {
    let km = k.matrix();
    let n = km.nrows();
    if b.matrix().nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.matrix().nrows(),
        });
    }
    let mut in_edge_set = DMatrix::from_element(n, n, false);
    let mut d = DMatrix::zeros(b.edge_count(), b.edge_count());
    for (e, &(tail, head)) in b.edges().iter().enumerate() {
        d[(e, e)] = -km[(tail, head)];
        in_edge_set[(tail, head)] = true;
        in_edge_set[(head, tail)] = true;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && km[(i, j)] != 0.0 && !in_edge_set[(i, j)] {
                return Err(Error::SparsityMismatch { i, j });
            }
        }
    }
    Ok(d)
}

/// Diagonal `D_B` from synthesized resistors.
pub fn conductance_matrix(edges: &[ResistorEdge]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        edges.len(),
        edges.iter().map(|e| e.conductance),
    ))
}

/// Node currents from node voltages through KVL, Ohm and KCL:
/// `v_B = -B^T v_N`, `i_B = D_B v_B`, `i_N = B i_B`.
pub fn resistor_network_currents(b: &IncidenceMatrix, d: &DMatrix<f64>, v_n: &DVector<f64>) -> DVector<f64> {
    let v_b = -(b.matrix().transpose() * v_n);
    let i_b = d * v_b;
    b.matrix() * i_b
}

/// Lossless storage element: charges `q`, node voltages `v_N = grad E(q)`,
/// `dq/dt = u_N`.
#[derive(Debug, Clone)]
pub struct CapacitorBank<'a> {
    sys: &'a GradientSystem,
}

impl<'a> CapacitorBank<'a> {
    pub fn new(sys: &'a GradientSystem) -> Self {
        Self { sys }
    }

    pub fn capacitances(&self) -> &StationaryVector {
        self.sys.stationary()
    }

    pub fn voltages(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.sys.grad_at(q)
    }

    pub fn charge_rate(&self, input_current: &DVector<f64>) -> DVector<f64> {
        input_current.clone()
    }

    /// Feedback interconnection with the resistor network synthesized at the
    /// current state; equals `-K(q) grad E(q)`.
    pub fn closed_loop_field(&self, b: &IncidenceMatrix, q: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.sys.stationary().state(q);
        let d = conductance_matrix(&synthesize_conductances(self.sys, &x)?);
        let v_n = self.voltages(q)?;
        Ok(self.charge_rate(&resistor_network_currents(b, &d, &v_n)))
    }
}

/// Ordered from best to worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PassivityVerdict {
    AllPassive,
    LocallyActiveButDissipative,
    NotDissipative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgePassivity {
    pub tail: usize,
    pub head: usize,
    /// `None` when `h` is flat across the edge and the resistance vanishes.
    pub conductance: Option<f64>,
    pub resistance: f64,
    pub strictly_passive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassivityReport {
    pub edges: Vec<EdgePassivity>,
    /// Smallest eigenvalue of `K`, absent when `K` cannot be assembled.
    pub min_eigenvalue: Option<f64>,
    pub verdict: PassivityVerdict,
}

impl PassivityReport {
    pub fn all_passive(&self) -> bool {
        self.verdict == PassivityVerdict::AllPassive
    }

    pub fn min_conductance(&self) -> Option<f64> {
        self.edges
            .iter()
            .map(|e| e.conductance.unwrap_or(f64::INFINITY))
            .reduce(f64::min)
    }
}

pub fn passivity_report(sys: &GradientSystem, x: &DVector<f64>) -> Result<PassivityReport> {
    let mut edges = Vec::with_capacity(sys.edges().len());
    for e in sys.edges() {
        match sys.edge_ratio(x, e) {
            Ok(r) => {
                let g = e.flux * r;
                edges.push(EdgePassivity {
                    tail: e.tail,
                    head: e.head,
                    conductance: Some(g),
                    resistance: 1.0 / g,
                    strictly_passive: g > 0.0,
                });
            }
            Err(Error::NonFiniteRatio { .. }) => edges.push(EdgePassivity {
                tail: e.tail,
                head: e.head,
                conductance: None,
                resistance: 0.0,
                strictly_passive: false,
            }),
            Err(other) => return Err(other),
        }
    }
    let min_eigenvalue = match sys.assemble_k(x) {
        Ok(k) => Some(min_eigenvalue(k.matrix())),
        Err(Error::NonFiniteRatio { .. }) => None,
        Err(other) => return Err(other),
    };
    let verdict = if edges.iter().all(|e| e.strictly_passive) {
        PassivityVerdict::AllPassive
    } else if min_eigenvalue.is_some_and(|l| l >= -PSD_TOL) {
        PassivityVerdict::LocallyActiveButDissipative
    } else {
        PassivityVerdict::NotDissipative
    };
    Ok(PassivityReport {
        edges,
        min_eigenvalue,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetlistFormat {
    Json,
    Spice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitorRecord {
    /// 1-based node id.
    pub node: usize,
    pub capacitance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResistorRecord {
    /// 1-based `(tail, head)`.
    pub nodes: (usize, usize),
    pub conductance: f64,
    pub resistance: f64,
}

/// Constant-element snapshot of the circuit at a reference state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Netlist {
    pub reference_state: Vec<f64>,
    pub capacitors: Vec<CapacitorRecord>,
    pub resistors: Vec<ResistorRecord>,
}

impl Netlist {
    pub fn synthesize(sys: &GradientSystem, x_ref: &DVector<f64>) -> Result<Self> {
        let edges = synthesize_conductances(sys, x_ref)?;
        let c = sys.stationary();
        Ok(Self {
            reference_state: x_ref.iter().copied().collect(),
            capacitors: (0..c.len())
                .map(|i| CapacitorRecord {
                    node: i + 1,
                    capacitance: c.get(i),
                })
                .collect(),
            resistors: edges
                .iter()
                .map(|e| ResistorRecord {
                    nodes: (e.tail + 1, e.head + 1),
                    conductance: e.conductance,
                    resistance: e.resistance(),
                })
                .collect(),
        })
    }

    /// Rescales to a circuit with total capacitance `total`. Capacitances and
    /// conductances scale together, so every RC time constant is unchanged.
    pub fn rescaled(&self, total: f64) -> Self {
        Self {
            reference_state: self.reference_state.clone(),
            capacitors: self
                .capacitors
                .iter()
                .map(|c| CapacitorRecord {
                    node: c.node,
                    capacitance: c.capacitance * total,
                })
                .collect(),
            resistors: self
                .resistors
                .iter()
                .map(|r| ResistorRecord {
                    nodes: r.nodes,
                    conductance: r.conductance * total,
                    resistance: r.resistance / total,
                })
                .collect(),
        }
    }

    /// `C<i> <node> 0 <value>` and `R<e> <i> <j> <resistance>` lines after a
    /// `*` header comment carrying the reference state.
    pub fn to_spice(&self) -> String {
        let state = self
            .reference_state
            .iter()
            .map(|&v| fmt12(v))
            .collect::<Vec<_>>()
            .join(", ");
        let mut out = format!("* netgrad netlist at x_ref = [{state}]\n");
        for c in &self.capacitors {
            out.push_str(&format!("C{} {} 0 {}\n", c.node, c.node, fmt12(c.capacitance)));
        }
        for (e, r) in self.resistors.iter().enumerate() {
            out.push_str(&format!(
                "R{} {} {} {}\n",
                e + 1,
                r.nodes.0,
                r.nodes.1,
                fmt12(r.resistance)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("netlist serializes")
    }
}

pub fn export_netlist(sys: &GradientSystem, x_ref: &DVector<f64>, format: NetlistFormat) -> Result<String> {
    let netlist = Netlist::synthesize(sys, x_ref)?;
    Ok(match format {
        NetlistFormat::Json => netlist.to_json(),
        NetlistFormat::Spice => netlist.to_spice(),
    })
}
