//! Scenario descriptions (the CLI's JSON input) and the built-in catalog:
//! RC consensus, opinion dynamics, porous-medium coupling, a probability
//! flow, and Kuramoto oscillator networks.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::coupling::{CouplingFunction, OddFn, SeparableFn};
use crate::energy::{CustomEnergy, EnergyFunction};
use crate::error::{Error, Result};
use crate::gradient::GradientSystem;
use crate::graph::{Branch, WeightedDigraph};
use crate::integrator::{drive_is_uniform, IntegratorConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    /// 1-based source node `j`.
    pub from: usize,
    /// 1-based target node `i`.
    pub to: usize,
    /// `w_ij`
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: usize,
    pub edges: Vec<EdgeSpec>,
}

impl GraphSpec {
    pub fn build(&self) -> Result<WeightedDigraph> {
        let mut branches = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.from == 0 || e.to == 0 {
                return Err(Error::Schema("node indices are 1-based".into()));
            }
            branches.push(Branch::new(e.from - 1, e.to - 1, e.weight));
        }
        WeightedDigraph::new(self.nodes, branches).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_graph(g: &WeightedDigraph) -> Self {
        Self {
            nodes: g.node_count(),
            edges: g
                .branches()
                .iter()
                .map(|b| EdgeSpec {
                    from: b.from + 1,
                    to: b.to + 1,
                    weight: b.weight,
                })
                .collect(),
        }
    }
}

/// `{"kind": "...", "params": {...}}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl KindSpec {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            params: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    fn number(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Schema(format!("{}: missing numeric param '{key}'", self.kind)))
    }

    fn text(&self, key: &str) -> Result<&str> {
        self.params
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Schema(format!("{}: missing string param '{key}'", self.kind)))
    }

    pub fn coupling(&self) -> Result<CouplingFunction> {
        let schema = |e: Error| Error::Schema(e.to_string());
        match self.kind.as_str() {
            "linear" => Ok(CouplingFunction::Linear),
            "sinusoidal" => Ok(CouplingFunction::Sinusoidal),
            "gain" => CouplingFunction::gain(self.number("p")?).map_err(schema),
            "odd" => match self.text("psi")? {
                "tanh" => Ok(CouplingFunction::Odd(OddFn::Tanh)),
                "atan" => Ok(CouplingFunction::Odd(OddFn::Atan)),
                "cubic" => Ok(CouplingFunction::Odd(OddFn::Cubic)),
                other => Err(Error::Schema(format!("unknown odd function '{other}'"))),
            },
            "separable" => match self.text("g")? {
                "identity" => Ok(CouplingFunction::Separable(SeparableFn::Identity)),
                "ln" => Ok(CouplingFunction::Separable(SeparableFn::Ln)),
                "exp" => Ok(CouplingFunction::Separable(SeparableFn::Exp)),
                "power" => CouplingFunction::power(self.number("p")?).map_err(schema),
                other => Err(Error::Schema(format!("unknown separable function '{other}'"))),
            },
            other => Err(Error::Schema(format!("unknown coupling kind '{other}'"))),
        }
    }

    pub fn energy(&self) -> Result<EnergyFunction> {
        match self.kind.as_str() {
            "quadratic" => Ok(EnergyFunction::Quadratic),
            "relative_entropy" => Ok(EnergyFunction::RelativeEntropy),
            "power_law" => {
                EnergyFunction::power_law(self.number("p")?).map_err(|e| Error::Schema(e.to_string()))
            }
            "double_well" => Ok(EnergyFunction::Custom(CustomEnergy::double_well(self.number("a")?))),
            "dead_zone" => {
                let (lo, hi) = (self.number("lo")?, self.number("hi")?);
                if lo >= hi {
                    return Err(Error::Schema("dead_zone needs lo < hi".into()));
                }
                Ok(EnergyFunction::Custom(CustomEnergy::dead_zone(lo, hi)))
            }
            other => Err(Error::Schema(format!("unknown energy kind '{other}'"))),
        }
    }
}

/// Integrator overrides; absent fields fall back to
/// [`IntegratorConfig::defaults_for`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_conv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FormChoice {
    X,
    Q,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetlistChoice {
    Spice,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub netlist: Option<NetlistChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<FormChoice>,
}

/// Claims a scenario makes about its own run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Reaches the predicted weighted mean within `tol_conv`.
    Converges,
    /// Driven run with a uniform drive synchronizes in the rotating frame.
    PhaseSync,
    /// Stability verdicts are reported but not asserted.
    NoConvergenceClaim,
    /// Quadratic, relative-entropy and cubic power-law energies all decay.
    DivergenceFamilyDecay,
    /// States stay strictly positive.
    Positivity,
    /// The synthesized circuit reproduces the declared capacitors/resistors.
    CircuitRoundTrip,
    /// Charges stay on the probability simplex and reach `c`.
    ProbabilitySimplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResistorSpec {
    pub from: usize,
    pub to: usize,
    pub resistance: f64,
}

/// Physical RC description a scenario was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub capacitances: Vec<f64>,
    pub resistors: Vec<ResistorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub graph: GraphSpec,
    pub coupling: KindSpec,
    pub energy: KindSpec,
    pub initial_state: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<Expectation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Builds the validated system; schema problems map to [`Error::Schema`],
    /// connectivity and detailed balance to their own variants.
    pub fn build_system(&self) -> Result<GradientSystem> {
        let graph = self.graph.build()?;
        let coupling = self.coupling.coupling()?;
        let energy = self.energy.energy()?;
        GradientSystem::new(graph, coupling, energy)
    }

    pub fn initial(&self, sys: &GradientSystem) -> Result<DVector<f64>> {
        if self.initial_state.len() != sys.node_count() {
            return Err(Error::Schema(format!(
                "initial_state has {} entries for {} nodes",
                self.initial_state.len(),
                sys.node_count()
            )));
        }
        let x0 = DVector::from_column_slice(&self.initial_state);
        let dom = sys.state_domain();
        if let Some(&bad) = x0.iter().find(|&&v| !dom.contains(v)) {
            return Err(Error::DomainViolation {
                what: "initial state",
                value: bad,
                domain: dom.to_string(),
            });
        }
        Ok(x0)
    }

    pub fn drive_vector(&self, sys: &GradientSystem) -> Result<Option<DVector<f64>>> {
        match &self.drive {
            None => Ok(None),
            Some(w) if w.len() != sys.node_count() => Err(Error::Schema(format!(
                "drive has {} entries for {} nodes",
                w.len(),
                sys.node_count()
            ))),
            Some(w) => Ok(Some(DVector::from_column_slice(w))),
        }
    }

    pub fn config(&self, sys: &GradientSystem) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::defaults_for(sys);
        if let Some(spec) = &self.integrator {
            cfg.dt = spec.dt.unwrap_or(cfg.dt);
            cfg.horizon = spec.horizon.unwrap_or(cfg.horizon);
            cfg.tol_conv = spec.tol_conv.unwrap_or(cfg.tol_conv);
            cfg.monitor_every = spec.monitor_every.unwrap_or(cfg.monitor_every);
        }
        cfg
    }

    pub fn expects(&self, e: Expectation) -> bool {
        self.expect.contains(&e)
    }

    /// Whether stability verdicts (PSD, Lyapunov, passivity, convergence)
    /// are asserted.
    pub fn claims_stability(&self) -> bool {
        !self.expects(Expectation::NoConvergenceClaim)
    }
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

fn with_horizon(scn: &mut Scenario, horizon: f64, dt: Option<f64>) {
    scn.integrator = Some(IntegratorSpec {
        dt,
        horizon: Some(horizon),
        ..Default::default()
    });
}

/// Oscillator network `dtheta_i/dt = omega_i + sum_j w_ij sin(theta_j - theta_i)`
/// with the quadratic energy (sinc metric). Synchronization is claimed only
/// for an initial spread below `pi` and a drive with a common rotating frame.
pub fn kuramoto_scenario(
    name: &str,
    graph: &WeightedDigraph,
    omega: Vec<f64>,
    theta0: Vec<f64>,
) -> Result<Scenario> {
    GradientSystem::new(graph.clone(), CouplingFunction::Sinusoidal, EnergyFunction::Quadratic)?;
    let uniform = drive_is_uniform(&DVector::from_column_slice(&omega));
    let driven = omega.iter().any(|&w| w != 0.0);
    let expect = if spread(&theta0) < PI && uniform {
        vec![if driven {
            Expectation::PhaseSync
        } else {
            Expectation::Converges
        }]
    } else {
        vec![Expectation::NoConvergenceClaim]
    };
    Ok(Scenario {
        name: name.into(),
        graph: GraphSpec::from_graph(graph),
        coupling: KindSpec::new("sinusoidal"),
        energy: KindSpec::new("quadratic"),
        initial_state: theta0,
        drive: driven.then_some(omega),
        integrator: None,
        outputs: None,
        expect,
        circuit: None,
    })
}

/// Complete graph with `w_ij = coupling / n`.
pub fn kuramoto_complete_graph(n: usize, coupling: f64) -> WeightedDigraph {
    let w = coupling / n as f64;
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j, w, w));
        }
    }
    WeightedDigraph::from_bidirected(n, &pairs).expect("complete graph is valid")
}

/// Linear RC consensus from capacitances `c_k` and edge resistances
/// `r_kj = r_jk` (1-based pairs): `w_kj = 1 / (c_k r_kj)`.
pub fn rc_consensus_scenario(
    name: &str,
    capacitances: &[f64],
    resistors: &[(usize, usize, f64)],
    x0: Vec<f64>,
) -> Result<Scenario> {
    if capacitances.iter().any(|&c| !(c.is_finite() && c > 0.0)) {
        return Err(Error::InvalidConfig("capacitances must be positive".into()));
    }
    let mut edges = Vec::with_capacity(2 * resistors.len());
    for &(k, j, r) in resistors {
        if !(r.is_finite() && r > 0.0) || k == 0 || j == 0 {
            return Err(Error::InvalidConfig(format!("invalid resistor {k}-{j}: {r}")));
        }
        // w_kj: branch j -> k
        edges.push(EdgeSpec {
            from: j,
            to: k,
            weight: 1.0 / (capacitances[k - 1] * r),
        });
        edges.push(EdgeSpec {
            from: k,
            to: j,
            weight: 1.0 / (capacitances[j - 1] * r),
        });
    }
    Ok(Scenario {
        name: name.into(),
        graph: GraphSpec {
            nodes: capacitances.len(),
            edges,
        },
        coupling: KindSpec::new("linear"),
        energy: KindSpec::new("quadratic"),
        initial_state: x0,
        drive: None,
        integrator: None,
        outputs: None,
        expect: vec![Expectation::Converges, Expectation::CircuitRoundTrip],
        circuit: Some(CircuitSpec {
            capacitances: capacitances.to_vec(),
            resistors: resistors
                .iter()
                .map(|&(from, to, resistance)| ResistorSpec { from, to, resistance })
                .collect(),
        }),
    })
}

/// Porous-medium coupling `phi(a, b) = a^p - b^p` on positive states, with the
/// relative-entropy energy.
pub fn porous_medium_scenario(name: &str, graph: &WeightedDigraph, p: f64, x0: Vec<f64>) -> Result<Scenario> {
    if let Some(&bad) = x0.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::DomainViolation {
            what: "initial state",
            value: bad,
            domain: "(0, inf)".into(),
        });
    }
    CouplingFunction::power(p)?;
    Ok(Scenario {
        name: name.into(),
        graph: GraphSpec::from_graph(graph),
        coupling: KindSpec::new("separable").with("g", "power").with("p", p),
        energy: KindSpec::new("relative_entropy"),
        initial_state: x0,
        drive: None,
        integrator: None,
        outputs: None,
        expect: vec![
            Expectation::Converges,
            Expectation::Positivity,
            Expectation::DivergenceFamilyDecay,
        ],
        circuit: None,
    })
}

/// Opinion dynamics `phi(a, b) = |tanh(p (a - b))| (a - b)`.
pub fn opinion_scenario(name: &str, graph: &WeightedDigraph, p: f64, x0: Vec<f64>) -> Result<Scenario> {
    CouplingFunction::gain(p)?;
    Ok(Scenario {
        name: name.into(),
        graph: GraphSpec::from_graph(graph),
        coupling: KindSpec::new("gain").with("p", p),
        energy: KindSpec::new("quadratic"),
        initial_state: x0,
        drive: None,
        integrator: None,
        outputs: None,
        expect: vec![Expectation::Converges],
        circuit: None,
    })
}

/// The 2-node example: `w_12 = 2`, `w_21 = 1`, `c = (1/3, 2/3)`.
pub fn two_node_graph() -> WeightedDigraph {
    WeightedDigraph::new(2, vec![Branch::new(1, 0, 2.0), Branch::new(0, 1, 1.0)]).expect("valid")
}

/// Bidirected chain with `w_21 = 1, w_12 = 2, w_32 = 1, w_23 = 3`,
/// `c = (1, 2, 6) / 9`.
pub fn chain3_graph() -> WeightedDigraph {
    WeightedDigraph::from_bidirected(3, &[(0, 1, 2.0, 1.0), (1, 2, 3.0, 1.0)]).expect("valid")
}

/// Every built-in scenario; all of them pass under their own configuration.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();

    out.push(
        rc_consensus_scenario("rc_2node", &[1.0, 2.0], &[(1, 2, 0.5)], vec![0.0, 3.0]).expect("valid"),
    );
    out.push(
        rc_consensus_scenario("rc_example2", &[1.0, 2.0], &[(1, 2, 3.0)], vec![0.0, 3.0]).expect("valid"),
    );
    out.push(
        rc_consensus_scenario(
            "rc_unit_path",
            &[1.0; 4],
            &[(1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)],
            vec![1.0, -2.0, 0.5, 3.0],
        )
        .map(|mut s| {
            with_horizon(&mut s, 40.0, None);
            s
        })
        .expect("valid"),
    );

    let mut opinion = opinion_scenario("opinion_chain", &chain3_graph(), 200.0, vec![-1.0, 0.5, 2.0]).expect("valid");
    // spread decays like 1/t near consensus, where phi ~ p z |z|
    with_horizon(&mut opinion, 7.0e3, Some(0.005));
    opinion.integrator.as_mut().unwrap().monitor_every = Some(200);
    out.push(opinion);
    let mut saturated =
        opinion_scenario("opinion_saturated", &two_node_graph(), 10.0, vec![0.0, 3.0]).expect("valid");
    with_horizon(&mut saturated, 3.5e4, Some(0.005));
    saturated.integrator.as_mut().unwrap().monitor_every = Some(400);
    saturated.outputs = Some(OutputSpec {
        netlist: None,
        form: Some(FormChoice::X),
    });
    out.push(saturated);

    out.push(porous_medium_scenario("porous_p2_2node", &two_node_graph(), 2.0, vec![1.0, 4.0]).expect("valid"));
    let mut porous3 =
        porous_medium_scenario("porous_p3_chain", &chain3_graph(), 3.0, vec![0.5, 2.0, 1.0]).expect("valid");
    with_horizon(&mut porous3, 10.0, None);
    out.push(porous3);

    out.push(Scenario {
        name: "log_entropy_2node".into(),
        graph: GraphSpec::from_graph(&two_node_graph()),
        coupling: KindSpec::new("linear"),
        energy: KindSpec::new("relative_entropy"),
        initial_state: vec![0.5, 2.0],
        drive: None,
        integrator: None,
        outputs: None,
        expect: vec![Expectation::Converges, Expectation::Positivity, Expectation::DivergenceFamilyDecay],
        circuit: None,
    });

    // q0 = (0.5, 0.3, 0.2) on the chain, x0 = q0 / c
    out.push(Scenario {
        name: "markov_chain3".into(),
        graph: GraphSpec::from_graph(&chain3_graph()),
        coupling: KindSpec::new("odd").with("psi", "atan"),
        energy: KindSpec::new("quadratic"),
        initial_state: vec![0.5 * 9.0, 0.3 * 9.0 / 2.0, 0.2 * 9.0 / 6.0],
        drive: None,
        integrator: Some(IntegratorSpec {
            horizon: Some(20.0),
            ..Default::default()
        }),
        outputs: None,
        expect: vec![Expectation::Converges, Expectation::ProbabilitySimplex],
        circuit: None,
    });

    let k4 = kuramoto_complete_graph(4, 2.0);
    let spread_pts = |s: f64| (0..4).map(|k| s * k as f64 / 3.0).collect::<Vec<_>>();
    let mut sync = kuramoto_scenario("kuramoto_sync", &k4, vec![0.0; 4], spread_pts(0.9 * PI)).expect("valid");
    with_horizon(&mut sync, 30.0, None);
    out.push(sync);
    let mut driven =
        kuramoto_scenario("kuramoto_driven_uniform", &k4, vec![0.5; 4], spread_pts(0.9 * PI)).expect("valid");
    with_horizon(&mut driven, 30.0, None);
    out.push(driven);
    let mut wide = kuramoto_scenario("kuramoto_wide_spread", &k4, vec![0.0; 4], spread_pts(1.2 * PI)).expect("valid");
    with_horizon(&mut wide, 30.0, None);
    out.push(wide);
    let hetero = kuramoto_scenario(
        "kuramoto_heterogeneous",
        &k4,
        vec![0.3, -0.1, 0.2, -0.4],
        vec![0.0, 0.2, 0.4, 0.6],
    )
    .expect("valid");
    out.push(hetero);

    out
}
