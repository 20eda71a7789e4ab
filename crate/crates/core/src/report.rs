//! Scenario pipeline: build, simulate in both forms, and collect every
//! invariant check into one [`VerificationReport`].

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{passivity_report, Netlist, PassivityVerdict};
use crate::energy::EnergyFunction;
use crate::error::{Error, Result};
use crate::gradient::{GradientSystem, PSD_TOL};
use crate::graph::{check_detailed_balance, DETAILED_BALANCE_TOL};
use crate::info::{debruijn_residual, fisher_information, DeBruijnReport};
use crate::integrator::{
    convergence_report, max_increase, max_state_discrepancy, simulate, Form, IntegratorConfig, TrajectoryRecord,
    CONSERVATION_TOL, MONOTONICITY_SLACK,
};
use crate::scenario::{builtin_scenarios, Expectation, FormChoice, Scenario};

/// Symmetry and row-sum bound for every assembled `K`.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Pointwise agreement of the two integrated forms.
pub const FORM_EQUIVALENCE_TOL: f64 = 1e-8;
/// Relative bound on the central-difference dissipation identity.
pub const DEBRUIJN_TOL: f64 = 1e-4;
/// Bound on `|J + dE/dt|`, relative to `max(1, |J|)`.
pub const FISHER_TOL: f64 = 1e-10;
/// Capacitance/resistance recovery bound for circuit round trips.
pub const ROUND_TRIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Measured but not asserted.
    Info,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub residual: Option<f64>,
}

impl Verdict {
    fn check(asserted: bool, ok: bool, residual: f64) -> Self {
        let status = match (asserted, ok) {
            (false, _) => Status::Info,
            (true, true) => Status::Pass,
            (true, false) => Status::Fail,
        };
        Self {
            status,
            residual: Some(residual),
        }
    }

    fn not_applicable() -> Self {
        Self {
            status: Status::NotApplicable,
            residual: None,
        }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedVerdict {
    pub name: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassivitySummary {
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Worst classification seen along the trajectory.
    pub classification: PassivityVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub x_inf_predicted: f64,
    pub converged_at: Option<f64>,
    pub empirical_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeSignChanges {
    /// 1-based `(tail, head)`.
    pub nodes: (usize, usize),
    pub initially_passive: bool,
    pub changes: usize,
}

/// Every check for one scenario. The key set is identical for all scenario
/// kinds; checks that do not apply carry `not_applicable`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub nodes: usize,
    pub coupling: String,
    pub energy: String,
    pub detailed_balance: Verdict,
    pub k_symmetry: Verdict,
    pub k_row_sums: Verdict,
    pub k_psd: Verdict,
    pub conservation: Verdict,
    pub lyapunov: Vec<NamedVerdict>,
    pub form_equivalence: Verdict,
    pub debruijn: Verdict,
    pub fisher_dissipation: Verdict,
    pub passivity: PassivitySummary,
    pub convergence: ConvergenceSummary,
    pub expectations: Vec<NamedVerdict>,
    pub edge_sign_changes: Vec<EdgeSignChanges>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl VerificationReport {
    fn all_verdicts(&self) -> impl Iterator<Item = &Verdict> {
        [
            &self.detailed_balance,
            &self.k_symmetry,
            &self.k_row_sums,
            &self.k_psd,
            &self.conservation,
            &self.form_equivalence,
            &self.debruijn,
            &self.fisher_dissipation,
            &self.passivity.verdict,
            &self.convergence.verdict,
        ]
        .into_iter()
        .chain(self.lyapunov.iter().map(|v| &v.verdict))
        .chain(self.expectations.iter().map(|v| &v.verdict))
    }

    /// Names of the failing checks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let top = [
            ("detailed_balance", &self.detailed_balance),
            ("k_symmetry", &self.k_symmetry),
            ("k_row_sums", &self.k_row_sums),
            ("k_psd", &self.k_psd),
            ("conservation", &self.conservation),
            ("form_equivalence", &self.form_equivalence),
            ("debruijn", &self.debruijn),
            ("fisher_dissipation", &self.fisher_dissipation),
            ("passivity", &self.passivity.verdict),
            ("convergence", &self.convergence.verdict),
        ];
        for (name, v) in top {
            if v.failed() {
                out.push(name.to_string());
            }
        }
        for v in self.lyapunov.iter().filter(|v| v.verdict.failed()) {
            out.push(format!("lyapunov:{}", v.name));
        }
        for v in self.expectations.iter().filter(|v| v.verdict.failed()) {
            out.push(format!("expect:{}", v.name));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub form: Option<FormChoice>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

/// Everything produced by one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub system: GradientSystem,
    pub config: IntegratorConfig,
    pub x_record: Option<TrajectoryRecord>,
    pub q_record: Option<TrajectoryRecord>,
    pub debruijn: DeBruijnReport,
    pub report: VerificationReport,
}

impl ScenarioRun {
    /// The x-form record when present, else the q-form one.
    pub fn primary(&self) -> &TrajectoryRecord {
        self.x_record
            .as_ref()
            .or(self.q_record.as_ref())
            .expect("at least one form is integrated")
    }
}

fn scaled(v: f64) -> f64 {
    v.abs().max(1.0)
}

pub fn run_scenario(scn: &Scenario, opts: &RunOptions) -> Result<ScenarioRun> {
    let sys = scn.build_system()?;
    let x0 = scn.initial(&sys)?;
    let drive = scn.drive_vector(&sys)?;
    let mut cfg = scn.config(&sys);
    if let Some(dt) = opts.dt {
        cfg.dt = dt;
    }
    if let Some(h) = opts.horizon {
        cfg.horizon = h;
    }
    cfg.validate().map_err(|e| Error::Schema(e.to_string()))?;
    let form = opts
        .form
        .or(scn.outputs.as_ref().and_then(|o| o.form))
        .unwrap_or_default();

    let x_record = matches!(form, FormChoice::X | FormChoice::Both)
        .then(|| simulate(&sys, &x0, &cfg, Form::X, drive.as_ref()))
        .transpose()?;
    let q_record = matches!(form, FormChoice::Q | FormChoice::Both)
        .then(|| simulate(&sys, &x0, &cfg, Form::Q, drive.as_ref()))
        .transpose()?;
    let primary = x_record.as_ref().or(q_record.as_ref()).expect("one form");
    let debruijn = debruijn_residual(primary, &sys)?;
    let report = build_report(scn, &sys, primary, x_record.as_ref().zip(q_record.as_ref()), &debruijn)?;
    Ok(ScenarioRun {
        system: sys,
        config: cfg,
        x_record,
        q_record,
        debruijn,
        report,
    })
}

pub fn verify_scenario(scn: &Scenario, opts: &RunOptions) -> Result<VerificationReport> {
    run_scenario(scn, opts).map(|r| r.report)
}

fn build_report(
    scn: &Scenario,
    sys: &GradientSystem,
    rec: &TrajectoryRecord,
    both: Option<(&TrajectoryRecord, &TrajectoryRecord)>,
    debruijn: &DeBruijnReport,
) -> Result<VerificationReport> {
    let stability = scn.claims_stability();
    let c = sys.stationary();
    let driven = rec.drive.is_some();

    let db = check_detailed_balance(sys.graph(), c, DETAILED_BALANCE_TOL)?;
    let detailed_balance = Verdict::check(true, db.holds, db.max_defect);

    // K structure and passivity at every sample
    let (mut sym, mut rows) = (0.0f64, 0.0f64);
    let mut classification = PassivityVerdict::AllPassive;
    let mut min_conductance = f64::INFINITY;
    let mut signs: Vec<EdgeSignChanges> = Vec::new();
    let mut current: Vec<bool> = Vec::new();
    for (k, x) in rec.xs.iter().enumerate() {
        let km = sys.assemble_k(x)?;
        let scale = km.matrix().amax().max(1.0);
        sym = sym.max(km.symmetry_defect() / scale);
        rows = rows.max(km.row_sum_defect() / scale);
        let p = passivity_report(sys, x)?;
        classification = classification.max(p.verdict);
        if let Some(g) = p.min_conductance() {
            min_conductance = min_conductance.min(g);
        }
        if k == 0 {
            current = p.edges.iter().map(|e| e.strictly_passive).collect();
            signs = p
                .edges
                .iter()
                .map(|e| EdgeSignChanges {
                    nodes: (e.tail + 1, e.head + 1),
                    initially_passive: e.strictly_passive,
                    changes: 0,
                })
                .collect();
        }
        for ((e, now), s) in p.edges.iter().zip(current.iter_mut()).zip(signs.iter_mut()) {
            if e.strictly_passive != *now {
                *now = e.strictly_passive;
                s.changes += 1;
            }
        }
    }
    let k_symmetry = Verdict::check(true, sym < STRUCTURE_TOL, sym);
    let k_row_sums = Verdict::check(true, rows < STRUCTURE_TOL, rows);
    let lam = rec.min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min);
    let k_psd = Verdict::check(stability, lam >= -PSD_TOL, lam);
    let passivity = PassivitySummary {
        verdict: Verdict::check(
            stability,
            classification != PassivityVerdict::NotDissipative,
            if min_conductance.is_finite() { min_conductance } else { 0.0 },
        ),
        classification,
    };

    let conv = convergence_report(rec, sys);
    let m0 = rec.weighted_mean[0];
    let conservation = Verdict::check(
        true,
        conv.max_conservation_residual < CONSERVATION_TOL * scaled(m0),
        conv.max_conservation_residual,
    );

    let lyapunov = lyapunov_verdicts(sys, rec, stability && (!driven || !rec.verdict_suppressed))?;

    let form_equivalence = match both {
        Some((a, b)) => {
            let d = max_state_discrepancy(a, b);
            Verdict::check(true, d < FORM_EQUIVALENCE_TOL, d)
        }
        None => Verdict::not_applicable(),
    };

    let debruijn_verdict = if debruijn.samples.is_empty() {
        Verdict::not_applicable()
    } else {
        Verdict::check(
            stability && !driven,
            debruijn.max_relative < DEBRUIJN_TOL,
            debruijn.max_relative,
        )
    };

    let mut fisher_defect = 0.0f64;
    for (x, q) in rec.xs.iter().zip(&rec.qs) {
        let j = fisher_information(sys, x)?.j;
        let d = sys.dissipation_rate(q)?;
        fisher_defect = fisher_defect.max((j + d).abs() / scaled(j));
    }
    let fisher_dissipation = Verdict::check(true, fisher_defect < FISHER_TOL, fisher_defect);

    let asserts_convergence = scn.expects(Expectation::Converges) || scn.expects(Expectation::PhaseSync);
    let convergence = ConvergenceSummary {
        verdict: if rec.verdict_suppressed {
            Verdict {
                status: Status::Info,
                residual: Some(conv.final_error),
            }
        } else {
            Verdict::check(
                asserts_convergence,
                conv.final_error < rec.tol_conv && conv.max_energy_increase <= MONOTONICITY_SLACK * scaled(rec.energy[0]),
                conv.final_error,
            )
        },
        x_inf_predicted: conv.predicted_x_inf,
        converged_at: rec.converged_at,
        empirical_rate: conv.empirical_rate,
    };

    let expectations = expectation_verdicts(scn, sys, rec)?;

    let mut warnings = Vec::new();
    if rec.wrap_hazard {
        warnings.push("WrapHazard: phase spread reached pi; sinc conductances may be negative".to_string());
    }
    if rec.verdict_suppressed {
        warnings.push("convergence verdict suppressed: drive has no common rotating frame".to_string());
    }
    if signs.iter().any(|s| s.changes > 0) {
        warnings.push("edge conductance changed sign along the trajectory".to_string());
    }

    let mut report = VerificationReport {
        scenario: scn.name.clone(),
        nodes: sys.node_count(),
        coupling: sys.coupling().name(),
        energy: sys.energy().name(),
        detailed_balance,
        k_symmetry,
        k_row_sums,
        k_psd,
        conservation,
        lyapunov,
        form_equivalence,
        debruijn: debruijn_verdict,
        fisher_dissipation,
        passivity,
        convergence,
        expectations,
        edge_sign_changes: signs,
        warnings,
        pass: false,
    };
    let any_failed = report.all_verdicts().any(|v| v.failed());
    report.pass = !any_failed;
    Ok(report)
}

/// States in the frame where the weighted mean is constant.
fn frame_states(rec: &TrajectoryRecord) -> Vec<DVector<f64>> {
    rec.xs
        .iter()
        .zip(&rec.times)
        .map(|(x, t)| x.add_scalar(-rec.frame_speed * t))
        .collect()
}

fn series(sys: &GradientSystem, energy: &EnergyFunction, xs: &[DVector<f64>]) -> Option<Vec<f64>> {
    let c = sys.stationary();
    xs.iter()
        .map(|x| {
            (0..x.len())
                .map(|i| energy.density(x[i]).ok().map(|h| c.get(i) * h))
                .sum::<Option<f64>>()
        })
        .collect()
}

fn lyapunov_verdicts(sys: &GradientSystem, rec: &TrajectoryRecord, asserted: bool) -> Result<Vec<NamedVerdict>> {
    let xs = frame_states(rec);
    let own = sys.energy().clone();
    let mut energies = vec![("scenario".to_string(), own)];
    for e in [
        EnergyFunction::Quadratic,
        EnergyFunction::RelativeEntropy,
        EnergyFunction::power_law(3.0)?,
    ] {
        energies.push((e.name(), e));
    }
    Ok(energies
        .into_iter()
        .map(|(name, e)| {
            let verdict = match series(sys, &e, &xs) {
                None => Verdict::not_applicable(),
                Some(s) => {
                    let inc = max_increase(&s);
                    let scale = s.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    Verdict::check(asserted, inc <= MONOTONICITY_SLACK * scale, inc)
                }
            };
            NamedVerdict { name, verdict }
        })
        .collect())
}

fn expectation_verdicts(scn: &Scenario, sys: &GradientSystem, rec: &TrajectoryRecord) -> Result<Vec<NamedVerdict>> {
    let mut out = Vec::new();
    let name = |e: Expectation| {
        serde_json::to_value(e)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    };
    for &e in &scn.expect {
        let verdict = match e {
            Expectation::Positivity => {
                let min = rec.xs.iter().map(|x| x.min()).fold(f64::INFINITY, f64::min);
                Verdict::check(true, min > 0.0, min)
            }
            Expectation::DivergenceFamilyDecay => {
                let xs = frame_states(rec);
                let mut worst = 0.0f64;
                let mut ok = true;
                for en in [
                    EnergyFunction::Quadratic,
                    EnergyFunction::RelativeEntropy,
                    EnergyFunction::power_law(3.0)?,
                ] {
                    match series(sys, &en, &xs) {
                        Some(s) => {
                            let inc = max_increase(&s);
                            worst = worst.max(inc);
                            ok &= inc <= MONOTONICITY_SLACK;
                        }
                        None => ok = false,
                    }
                }
                Verdict::check(true, ok, worst)
            }
            Expectation::ProbabilitySimplex => {
                let drift = rec.qs.iter().map(|q| (q.sum() - 1.0).abs()).fold(0.0, f64::max);
                let reach = (rec.qs.last().expect("samples") - sys.stationary().values()).amax();
                Verdict::check(true, drift < 1e-9 && reach < 1e-6, drift.max(reach))
            }
            Expectation::CircuitRoundTrip => match &scn.circuit {
                None => Verdict::check(true, false, f64::INFINITY),
                Some(circ) => {
                    let total: f64 = circ.capacitances.iter().sum();
                    let net = Netlist::synthesize(sys, &rec.xs[0])?.rescaled(total);
                    let mut err = 0.0f64;
                    for (cap, want) in net.capacitors.iter().zip(&circ.capacitances) {
                        err = err.max((cap.capacitance - want).abs() / want);
                    }
                    let mut matched = net.resistors.len() == circ.resistors.len();
                    for r in &circ.resistors {
                        let key = (r.from.min(r.to), r.from.max(r.to));
                        match net.resistors.iter().find(|n| (n.nodes.0.min(n.nodes.1), n.nodes.0.max(n.nodes.1)) == key) {
                            Some(n) => err = err.max((n.resistance - r.resistance).abs() / r.resistance),
                            None => matched = false,
                        }
                    }
                    Verdict::check(true, matched && err < ROUND_TRIP_TOL, err)
                }
            },
            // asserted through the convergence verdict
            Expectation::Converges | Expectation::PhaseSync | Expectation::NoConvergenceClaim => continue,
        };
        out.push(NamedVerdict { name: name(e), verdict });
    }
    Ok(out)
}

/// Outcome of one suite entry.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: String,
    pub outcome: Result<VerificationReport>,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(r) if r.pass)
    }
}

/// Runs every built-in scenario whose name contains `filter`, in parallel.
pub fn run_suite(filter: Option<&str>) -> Vec<SuiteEntry> {
    builtin_scenarios()
        .into_par_iter()
        .filter(|s| filter.is_none_or(|f| s.name.contains(f)))
        .map(|s| SuiteEntry {
            outcome: verify_scenario(&s, &RunOptions::default()),
            name: s.name,
        })
        .collect()
}
