//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line with the
//! measured quantity, written past the test harness capture so the lines
//! show up in plain `cargo test` output.

mod common;

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use netgrad::circuit::Netlist;
use netgrad::coupling::OddFn;
use netgrad::energy::CustomEnergy;
use netgrad::integrator::{convergence_report, energy_series, max_increase, max_state_discrepancy, CONSERVATION_TOL};
use netgrad::report::Status;
use netgrad::{
    builtin_scenarios, incidence_matrix, kirchhoff_factorization, passivity_report, run_scenario, simulate,
    to_generator, verify_psd, CouplingFunction, EnergyFunction, Expectation, Form, GradientSystem, IntegratorConfig,
    RunOptions, Scenario, ScenarioRun,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_state, random_system, two_node, v};

fn verdict(id: u32, title: &str, pass: bool, detail: String) {
    let line = format!(
        "acceptance {id} [{}] {title}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "{}", line.trim_end());
}

fn suite() -> &'static Vec<(Scenario, ScenarioRun)> {
    static RUNS: OnceLock<Vec<(Scenario, ScenarioRun)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        builtin_scenarios()
            .into_iter()
            .map(|s| {
                let run = run_scenario(&s, &RunOptions::default()).unwrap();
                (s, run)
            })
            .collect()
    })
}

fn named(name: &str) -> &'static (Scenario, ScenarioRun) {
    suite().iter().find(|(s, _)| s.name == name).unwrap()
}

#[test]
fn criterion_1_gradient_form_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut field_err, mut traj_err) = (0.0f64, 0.0f64);
    let systems = 100;
    for _ in 0..systems {
        let sys = random_system(&mut rng, 8);
        let c = sys.stationary();
        for _ in 0..5 {
            let x = random_state(&mut rng, &sys);
            let q_field = sys.gradient_vector_field(&c.charge(&x)).unwrap();
            let x_field = c.charge(&sys.x_field(&x).unwrap());
            field_err = field_err.max((q_field - x_field).amax());
        }
        let x0 = random_state(&mut rng, &sys);
        let mut cfg = IntegratorConfig::defaults_for(&sys);
        cfg.monitor_every = 200;
        let a = simulate(&sys, &x0, &cfg, Form::X, None).unwrap();
        let b = simulate(&sys, &x0, &cfg, Form::Q, None).unwrap();
        traj_err = traj_err.max(max_state_discrepancy(&a, &b));
    }
    verdict(
        1,
        "q-form field = C x-form field; x/q trajectories agree",
        field_err < 1e-9 && traj_err < 1e-8,
        format!("{systems} systems, max field error {field_err:.2e} (< 1e-9), max trajectory gap {traj_err:.2e} (< 1e-8) over 20 tau"),
    );
}

#[test]
fn criterion_2_metric_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut sym, mut rows, mut lam) = (0.0f64, 0.0f64, f64::INFINITY);
    let mut assemblies = 0;
    for _ in 0..100 {
        let sys = random_system(&mut rng, 8);
        for _ in 0..10 {
            let k = sys.assemble_k(&random_state(&mut rng, &sys)).unwrap();
            sym = sym.max(k.symmetry_defect());
            rows = rows.max(k.row_sum_defect());
            lam = lam.min(verify_psd(&k, 1e-10).min_eigenvalue);
            assemblies += 1;
        }
    }
    verdict(
        2,
        "K symmetric, zero row sums, positive semi-definite",
        sym < 1e-12 && rows < 1e-12 && lam >= -1e-10,
        format!("{assemblies} assemblies, symmetry {sym:.2e}, row sums {rows:.2e} (< 1e-12), min eigenvalue {lam:.2e} (>= -1e-10)"),
    );
}

#[test]
fn criterion_3_conservation_and_convergence() {
    let (mut drift, mut terminal) = (0.0f64, 0.0f64);
    let mut checked = Vec::new();
    for (scn, run) in suite() {
        if scn.drive.is_some() || !scn.expects(Expectation::Converges) {
            continue;
        }
        for rec in [&run.x_record, &run.q_record].into_iter().flatten() {
            let r = convergence_report(rec, &run.system);
            drift = drift.max(r.max_conservation_residual);
            terminal = terminal.max(r.final_error);
        }
        checked.push(scn.name.as_str());
    }
    verdict(
        3,
        "weighted mean conserved; terminal state at weighted mean",
        drift < CONSERVATION_TOL && terminal < 1e-6 && !checked.is_empty(),
        format!(
            "{} undriven scenarios, max drift {drift:.2e} (< 1e-9), max terminal error {terminal:.2e} (< 1e-6)",
            checked.len()
        ),
    );
}

#[test]
fn criterion_4_divergence_family_decay() {
    let family = [
        EnergyFunction::Quadratic,
        EnergyFunction::RelativeEntropy,
        EnergyFunction::power_law(3.0).unwrap(),
    ];
    let mut worst = 0.0f64;
    let mut runs = 0;
    for name in ["porous_p2_2node", "porous_p3_chain", "log_entropy_2node"] {
        let (_, run) = named(name);
        let rec = run.x_record.as_ref().unwrap();
        for e in &family {
            worst = worst.max(max_increase(&energy_series(rec, &run.system, e).unwrap()));
        }
        runs += 1;
    }
    verdict(
        4,
        "quadratic, relative-entropy and cubic energies all non-increasing",
        worst <= 1e-9,
        format!("{runs} trajectories x 3 energies, max increase {worst:.2e} (<= 1e-9)"),
    );
}

#[test]
fn criterion_5_circuit_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut factor_err = 0.0f64;
    for _ in 0..100 {
        let sys = random_system(&mut rng, 8);
        let x = random_state(&mut rng, &sys);
        let k = sys.assemble_k(&x).unwrap();
        let b = incidence_matrix(sys.graph());
        let d = kirchhoff_factorization(&k, &b).unwrap();
        let rebuilt = b.matrix() * &d * b.matrix().transpose();
        factor_err = factor_err.max((k.matrix() - rebuilt).amax());
    }

    // capacitances (1, 2), one resistor of 3 between them
    let (_, run) = named("rc_example2");
    let net = Netlist::synthesize(&run.system, &v(&[0.0, 3.0])).unwrap().rescaled(3.0);
    let cap_err = (net.capacitors[0].capacitance - 1.0)
        .abs()
        .max((net.capacitors[1].capacitance - 2.0).abs() / 2.0);
    let r_err = (net.resistors[0].resistance - 3.0).abs() / 3.0;

    // sampled strict convexity against sign of every conductance
    let grid: Vec<f64> = (0..=40).map(|k| -2.0 + 0.1 * k as f64).collect();
    let sample = |energy: EnergyFunction| {
        let sys = two_node(CouplingFunction::Linear, energy);
        let convex = sys.energy().h_strictly_increasing_on(-2.0, 2.0, 400).unwrap().is_none();
        let mut all_positive = true;
        for &a in &grid {
            for &b in &grid {
                if a == b {
                    continue;
                }
                let p = passivity_report(&sys, &v(&[a, b])).unwrap();
                all_positive &= p.edges.iter().all(|e| e.strictly_passive);
            }
        }
        (convex, all_positive)
    };
    let (cvx_q, pos_q) = sample(EnergyFunction::Quadratic);
    let (cvx_w, pos_w) = sample(EnergyFunction::Custom(CustomEnergy::double_well(1.0)));
    let prop = cvx_q == pos_q && cvx_w == pos_w && cvx_q && !cvx_w;

    verdict(
        5,
        "K = B D B^T; RC example recovered; passivity iff convexity",
        factor_err < 1e-12 && cap_err < 1e-12 && r_err < 1e-12 && prop,
        format!(
            "factorization {factor_err:.2e} (< 1e-12), capacitance error {cap_err:.1e}, resistance error {r_err:.1e}, \
             quadratic convex={cvx_q} passive={pos_q}, double well convex={cvx_w} passive={pos_w}"
        ),
    );
}

#[test]
fn criterion_6_markov_generator() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut db = 0.0f64;
    for _ in 0..100 {
        let sys = random_system(&mut rng, 8).with_energy(EnergyFunction::Quadratic);
        let x = random_state(&mut rng, &sys);
        db = db.max(to_generator(&sys, &x).unwrap().detailed_balance_defect());
    }

    let (mut simplex, mut reach) = (0.0f64, 0.0f64);
    let mut runs = 0;
    let mut check = |sys: &GradientSystem, rec: &netgrad::TrajectoryRecord| {
        for q in &rec.qs {
            simplex = simplex.max((q.sum() - 1.0).abs());
        }
        reach = reach.max((rec.qs.last().unwrap() - sys.stationary().values()).amax());
        runs += 1;
    };
    let (_, run) = named("markov_chain3");
    check(&run.system, run.q_record.as_ref().unwrap());
    for _ in 0..10 {
        // couplings with phi'(0) = 1 relax exponentially at the rate of L
        let mut sys = random_system(&mut rng, 6).with_energy(EnergyFunction::Quadratic);
        while !matches!(
            sys.coupling(),
            CouplingFunction::Linear | CouplingFunction::Odd(OddFn::Tanh | OddFn::Atan) | CouplingFunction::Sinusoidal
        ) {
            sys = random_system(&mut rng, 6).with_energy(EnergyFunction::Quadratic);
        }
        let c = sys.stationary();
        let raw: Vec<f64> = (0..sys.node_count()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let q0 = DVector::from_iterator(raw.len(), raw.iter().map(|p| p / total));
        let x0 = c.state(&q0);
        let consensus = DVector::from_element(sys.node_count(), 1.0);
        let gap = to_generator(&sys, &consensus).unwrap().spectral_gap();
        let mut cfg = IntegratorConfig::defaults_for(&sys);
        cfg.horizon = cfg.horizon.max(30.0 / gap);
        cfg.monitor_every = 100;
        let rec = simulate(&sys, &x0, &cfg, Form::Q, None).unwrap();
        check(&sys, &rec);
    }
    verdict(
        6,
        "generator reversible; probability flow stays on simplex and reaches c",
        db < 1e-10 && simplex < 1e-9 && reach < 1e-6,
        format!("||CF - F^T C|| {db:.2e} (< 1e-10), {runs} runs, simplex drift {simplex:.2e} (< 1e-9), distance to c {reach:.2e} (< 1e-6)"),
    );
}

#[test]
fn criterion_7_debruijn_identity() {
    let (scn, run) = named("log_entropy_2node");
    let rel = run.debruijn.max_relative;

    let halved = |dt_scale: f64, every: usize| {
        let opts = RunOptions {
            form: Some(netgrad::FormChoice::X),
            dt: Some(run.config.dt * dt_scale),
            horizon: None,
        };
        let mut s = scn.clone();
        s.integrator.get_or_insert_with(Default::default).monitor_every = Some(every);
        run_scenario(&s, &opts).unwrap().debruijn
    };
    let coarse = halved(1.0, 10);
    let fine = halved(0.5, 20);
    let matched = coarse.samples.len() == fine.samples.len()
        && coarse
            .samples
            .iter()
            .zip(&fine.samples)
            .all(|(a, b)| (a.t - b.t).abs() < 1e-9);
    let ratio = coarse.max_abs / fine.max_abs;

    let rec = run.x_record.as_ref().unwrap();
    let mut fisher = 0.0f64;
    for (x, dedt) in rec.xs.iter().zip(&rec.dedt) {
        let j = netgrad::fisher_information(&run.system, x).unwrap().j;
        fisher = fisher.max((j + dedt).abs());
    }
    verdict(
        7,
        "dE/dt = -J on the logarithmic scenario",
        rel < 1e-4 && matched && (3.5..4.5).contains(&ratio) && fisher < 1e-10,
        format!("max relative residual {rel:.2e} (< 1e-4), halving dt shrinks residual {ratio:.2}x, |J + dE/dt| {fisher:.2e} (< 1e-10)"),
    );
}

#[test]
fn criterion_8_kuramoto_phase_sync() {
    let (_, run) = named("kuramoto_driven_uniform");
    let rec = run.x_record.as_ref().unwrap();
    let drive_ok = rec.drive.as_ref().is_some_and(|w| w.iter().all(|&o| o == 0.5));
    let conv = convergence_report(rec, &run.system);
    let spread0 = rec.xs[0].max() - rec.xs[0].min();
    let sync = run.report.convergence.verdict.status == Status::Pass && conv.final_error < 1e-6;

    let (_, wide) = named("kuramoto_wide_spread");
    let changes: usize = wide.report.edge_sign_changes.iter().map(|e| e.changes).sum();
    let unasserted = wide.report.convergence.verdict.status == Status::Info;
    let hazard = wide.report.warnings.iter().any(|w| w.starts_with("WrapHazard"));
    verdict(
        8,
        "oscillators phase-lock in the rotating frame; wide spread unasserted",
        drive_ok && sync && changes > 0 && unasserted && hazard,
        format!(
            "spread {:.2} pi -> rotating-frame error {:.2e} (< 1e-6); spread 1.2 pi: {changes} sinc sign changes recorded, convergence {:?}",
            spread0 / std::f64::consts::PI,
            conv.final_error,
            wide.report.convergence.verdict.status
        ),
    );
}

/// `x(t) = C^{-1/2} V exp(-Lambda t) V^T C^{1/2} x0` from the symmetrized
/// Laplacian.
fn eigen_solution(sys: &GradientSystem, x0: &DVector<f64>, t: f64) -> DVector<f64> {
    let c = sys.stationary();
    let n = sys.node_count();
    let l = sys.laplacian().matrix();
    let s = DMatrix::from_fn(n, n, |i, j| c.get(i).sqrt() * l[(i, j)] / c.get(j).sqrt());
    let eig = SymmetricEigen::new((&s + s.transpose()) * 0.5);
    let y0 = DVector::from_fn(n, |i, _| c.get(i).sqrt() * x0[i]);
    let decay = DMatrix::from_diagonal(&eig.eigenvalues.map(|lam| (-lam * t).exp()));
    let y = &eig.eigenvectors * decay * eig.eigenvectors.transpose() * y0;
    DVector::from_fn(n, |i, _| y[i] / c.get(i).sqrt())
}

#[test]
fn criterion_9_rk4_order() {
    let sys = two_node(CouplingFunction::Linear, EnergyFunction::Quadratic);
    let x0 = v(&[0.0, 3.0]);
    // closed form: eigenvalue 3, x_inf = 2
    let closed = |t: f64| v(&[2.0 - 2.0 * (-3.0 * t).exp(), 2.0 + (-3.0 * t).exp()]);
    let oracle_gap = (eigen_solution(&sys, &x0, 0.7) - closed(0.7)).amax();

    let terminal = |dt: f64, horizon: f64| {
        let cfg = IntegratorConfig {
            dt,
            horizon,
            tol_conv: 1e-6,
            monitor_every: 1_000_000,
        };
        let rec = simulate(&sys, &x0, &cfg, Form::X, None).unwrap();
        let t = *rec.times.last().unwrap();
        (rec.final_state() - eigen_solution(&sys, &x0, t)).amax()
    };
    let errs: Vec<f64> = [0.05, 0.025, 0.0125].iter().map(|&dt| terminal(dt, 1.0)).collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let fourth = ratios.iter().all(|r| (14.0..18.0).contains(r));
    let cfg = IntegratorConfig::defaults_for(&sys);
    let default_err = terminal(cfg.dt, cfg.horizon);
    verdict(
        9,
        "RK4 fourth-order against the eigendecomposition solution",
        oracle_gap < 1e-14 && fourth && default_err < 1e-10,
        format!(
            "error ratios under dt halving {:.2}, {:.2} (~16), error at default dt {default_err:.2e} (< 1e-10)",
            ratios[0], ratios[1]
        ),
    );
}
