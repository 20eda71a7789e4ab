//! Fixed-step RK4 integration of the state form `dx/dt = omega + f(x)` and of
//! the charge form `dq/dt = C omega - K(q) grad E(q)`, with per-sample
//! monitors for energy, dissipation, conservation and the PSD property.

use std::io::Write;

use nalgebra::DVector;

use crate::coupling::CouplingFunction;
use crate::energy::EnergyFunction;
use crate::error::{Error, Result};
use crate::gradient::{verify_psd, GradientSystem, PSD_TOL};
use crate::numfmt::fmt12;

/// Slack allowed on energy increases between monitor samples.
pub const MONOTONICITY_SLACK: f64 = 1e-9;
/// Bound on the drift of the weighted mean.
pub const CONSERVATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    pub tol_conv: f64,
    /// Record a sample every this many steps.
    pub monitor_every: usize,
}

impl IntegratorConfig {
    /// `dt = 1e-3 tau`, horizon `20 tau`, `tau = 1 / max_i L_ii`.
    pub fn defaults_for(sys: &GradientSystem) -> Self {
        let tau = sys.characteristic_time();
        Self {
            dt: 1e-3 * tau,
            horizon: 20.0 * tau,
            tol_conv: 1e-6,
            monitor_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt.is_finite()
            && self.dt > 0.0
            && self.horizon.is_finite()
            && self.horizon > 0.0
            && self.tol_conv.is_finite()
            && self.tol_conv > 0.0
            && self.monitor_every > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// Integrate `x` directly.
    X,
    /// Integrate `q = C x` through the gradient form.
    Q,
}

/// One classical Runge-Kutta step.
pub fn step_rk4<F>(field: F, state: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = field(state)?;
    let k2 = field(&(state + &k1 * (0.5 * dt)))?;
    let k3 = field(&(state + &k2 * (0.5 * dt)))?;
    let k4 = field(&(state + &k3 * dt))?;
    Ok(state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub form: Form,
    pub dt: f64,
    pub times: Vec<f64>,
    pub xs: Vec<DVector<f64>>,
    pub qs: Vec<DVector<f64>>,
    pub energy: Vec<f64>,
    pub dedt: Vec<f64>,
    pub weighted_mean: Vec<f64>,
    pub psd_ok: Vec<bool>,
    pub min_eigenvalue: Vec<f64>,
    pub drive: Option<DVector<f64>>,
    /// Speed of the rotating frame, `sum_i c_i omega_i`.
    pub frame_speed: f64,
    /// First sample time with spread below `tol_conv`.
    pub converged_at: Option<f64>,
    /// Drive without a common rotating frame; no convergence claim is made.
    pub verdict_suppressed: bool,
    /// Sinusoidal coupling with a spread of at least `pi` at some sample.
    pub wrap_hazard: bool,
    pub tol_conv: f64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.xs.last().expect("record has samples")
    }

    /// Largest `|q - C x|` over all samples.
    pub fn transform_defect(&self, sys: &GradientSystem) -> f64 {
        self.xs
            .iter()
            .zip(&self.qs)
            .map(|(x, q)| (sys.stationary().charge(x) - q).amax())
            .fold(0.0, f64::max)
    }

    /// Writes `t,x1..xn,q1..qn,E,dEdt,wmean,psd_ok` plus any extra columns,
    /// 12 significant digits, `psd_ok` as 1/0, missing extras left empty.
    pub fn write_csv<W: Write>(&self, out: W, extra: &[(&str, Vec<Option<f64>>)]) -> Result<()> {
        let n = self.xs.first().map_or(0, |x| x.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("q{i}")));
        header.extend(["E", "dEdt", "wmean", "psd_ok"].map(String::from));
        header.extend(extra.iter().map(|(name, _)| name.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for k in 0..self.len() {
            let mut row = vec![fmt12(self.times[k])];
            row.extend(self.xs[k].iter().map(|&v| fmt12(v)));
            row.extend(self.qs[k].iter().map(|&v| fmt12(v)));
            row.push(fmt12(self.energy[k]));
            row.push(fmt12(self.dedt[k]));
            row.push(fmt12(self.weighted_mean[k]));
            row.push(if self.psd_ok[k] { "1".into() } else { "0".into() });
            for (_, col) in extra {
                row.push(col.get(k).copied().flatten().map(fmt12).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn spread(x: &DVector<f64>) -> f64 {
    x.max() - x.min()
}

/// Whether a drive admits a common rotating frame (all `omega_i` equal).
pub fn drive_is_uniform(omega: &DVector<f64>) -> bool {
    let scale = omega.amax().max(1.0);
    spread(omega) <= 1e-12 * scale
}

pub fn simulate(
    sys: &GradientSystem,
    x0: &DVector<f64>,
    cfg: &IntegratorConfig,
    form: Form,
    drive: Option<&DVector<f64>>,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let n = sys.node_count();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if let Some(w) = drive {
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
    }
    let c = sys.stationary();
    let drive_q = drive.map(|w| c.charge(w));
    let frame_speed = drive.map_or(0.0, |w| c.weighted_mean(w));
    let verdict_suppressed = drive.is_some_and(|w| !drive_is_uniform(w));

    let x_field = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let f = sys.x_field(x)?;
        Ok(match drive {
            Some(w) => f + w,
            None => f,
        })
    };
    let q_field = |q: &DVector<f64>| -> Result<DVector<f64>> {
        let f = sys.gradient_vector_field(q)?;
        Ok(match &drive_q {
            Some(wq) => f + wq,
            None => f,
        })
    };

    let steps = cfg.steps();
    let cap = steps / cfg.monitor_every + 2;
    let mut rec = TrajectoryRecord {
        form,
        dt: cfg.dt,
        times: Vec::with_capacity(cap),
        xs: Vec::with_capacity(cap),
        qs: Vec::with_capacity(cap),
        energy: Vec::with_capacity(cap),
        dedt: Vec::with_capacity(cap),
        weighted_mean: Vec::with_capacity(cap),
        psd_ok: Vec::with_capacity(cap),
        min_eigenvalue: Vec::with_capacity(cap),
        drive: drive.cloned(),
        frame_speed,
        converged_at: None,
        verdict_suppressed,
        wrap_hazard: false,
        tol_conv: cfg.tol_conv,
    };

    let sinusoidal = matches!(sys.coupling(), CouplingFunction::Sinusoidal);
    let mut record = |t: f64, x: DVector<f64>, q: DVector<f64>| -> Result<()> {
        let at = |e: Error| Error::StepDomainViolation { t, source: Box::new(e) };
        let k = sys.assemble_k(&x).map_err(at)?;
        let psd = verify_psd(&k, PSD_TOL);
        let grad = sys.grad_at(&q).map_err(at)?;
        let mut dedt = -grad.dot(&(k.matrix() * &grad));
        if let Some(wq) = &drive_q {
            dedt += grad.dot(wq);
        }
        let s = spread(&x);
        if rec.converged_at.is_none() && !verdict_suppressed && s < cfg.tol_conv {
            rec.converged_at = Some(t);
        }
        if sinusoidal && s >= std::f64::consts::PI {
            rec.wrap_hazard = true;
        }
        rec.energy.push(sys.energy_at(&q).map_err(at)?);
        rec.dedt.push(dedt);
        rec.weighted_mean.push(c.weighted_mean(&x));
        rec.psd_ok.push(psd.ok);
        rec.min_eigenvalue.push(psd.min_eigenvalue);
        rec.times.push(t);
        rec.xs.push(x);
        rec.qs.push(q);
        Ok(())
    };

    let mut state = match form {
        Form::X => x0.clone(),
        Form::Q => c.charge(x0),
    };
    let split = |s: &DVector<f64>| match form {
        Form::X => (s.clone(), c.charge(s)),
        Form::Q => (c.state(s), s.clone()),
    };
    let (x, q) = split(&state);
    record(0.0, x, q)?;
    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * cfg.dt;
        let next = match form {
            Form::X => step_rk4(x_field, &state, cfg.dt),
            Form::Q => step_rk4(q_field, &state, cfg.dt),
        };
        state = next.map_err(|e| Error::StepDomainViolation {
            t: t_prev,
            source: Box::new(e),
        })?;
        if step % cfg.monitor_every == 0 || step == steps {
            let (x, q) = split(&state);
            record(step as f64 * cfg.dt, x, q)?;
        }
    }
    Ok(rec)
}

/// Largest increase between consecutive entries (0 for a non-increasing series).
pub fn max_increase(series: &[f64]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
}

/// `sum_i c_i H(x_i)` along a recorded trajectory for an arbitrary density.
pub fn energy_series(rec: &TrajectoryRecord, sys: &GradientSystem, energy: &EnergyFunction) -> Result<Vec<f64>> {
    let c = sys.stationary();
    rec.xs
        .iter()
        .map(|x| {
            let mut e = 0.0;
            for i in 0..x.len() {
                e += c.get(i) * energy.density(x[i])?;
            }
            Ok(e)
        })
        .collect()
}

/// Largest pointwise `|x_a(t) - x_b(t)|` between two records on the same grid.
pub fn max_state_discrepancy(a: &TrajectoryRecord, b: &TrajectoryRecord) -> f64 {
    a.xs
        .iter()
        .zip(&b.xs)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Weighted mean of the initial state carried along the rotating frame
    /// to the final time.
    pub predicted_x_inf: f64,
    pub attained: DVector<f64>,
    pub final_error: f64,
    pub max_energy_increase: f64,
    pub max_conservation_residual: f64,
    /// Fitted exponential decay rate of the spread; diagnostic only.
    pub empirical_rate: Option<f64>,
    pub converged: bool,
    /// `None` when the drive has no common rotating frame.
    pub verdict: Option<bool>,
}

pub fn convergence_report(rec: &TrajectoryRecord, sys: &GradientSystem) -> ConvergenceReport {
    let c = sys.stationary();
    let m0 = c.weighted_mean(&rec.xs[0]);
    let t_end = *rec.times.last().expect("record has samples");
    let predicted = m0 + rec.frame_speed * t_end;
    let attained = rec.final_state().clone();
    let final_error = attained.iter().map(|v| (v - predicted).abs()).fold(0.0, f64::max);
    let max_conservation_residual = rec
        .times
        .iter()
        .zip(&rec.weighted_mean)
        .map(|(t, m)| (m - m0 - rec.frame_speed * t).abs())
        .fold(0.0, f64::max);
    let max_energy_increase = if rec.drive.is_some() {
        // energy is not a Lyapunov function in the fixed frame when driven
        0.0
    } else {
        max_increase(&rec.energy)
    };
    let empirical_rate = fit_rate(rec);
    let converged = rec.converged_at.is_some();
    let verdict = (!rec.verdict_suppressed).then_some(
        converged
            && final_error < rec.tol_conv
            && max_energy_increase <= MONOTONICITY_SLACK
            && max_conservation_residual < CONSERVATION_TOL,
    );
    ConvergenceReport {
        predicted_x_inf: predicted,
        attained,
        final_error,
        max_energy_increase,
        max_conservation_residual,
        empirical_rate,
        converged,
        verdict,
    }
}

fn fit_rate(rec: &TrajectoryRecord) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rec
        .times
        .iter()
        .zip(&rec.xs)
        .map(|(&t, x)| (t, spread(x)))
        .filter(|&(_, s)| s > 1e-12)
        .map(|(t, s)| (t, s.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mt, my) = (st / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| {
        (a + (p.0 - mt) * (p.1 - my), b + (p.0 - mt).powi(2))
    });
    (den > 0.0).then(|| -num / den)
}
