//! Method-of-lines integration of
//! `u_tt + n(ȧ/a)u_t − c²a⁻²Δu + m²c²u = c²f(u)` as a first-order system in
//! `(u, v = u_t)`, with classical RK4, growth-controlled step halving,
//! blow-up detection and the trace of scalar diagnostics.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{ModeRequest, Scenario};
use crate::error::{Error, Result};
use crate::field::{Field, Grid, ProfileSpec, PAR_THRESHOLD};
use crate::functionals::{
    Anchor, DiagSample, DiagnosticMode, DiagnosticsAccumulator, FunctionalSnapshot, Norms,
    PhysicalParams,
};
use crate::hypotheses::{self, fmt_f64, HypothesisReport, Theorem};
use crate::nonlinearity::Nonlinearity;
use crate::ode::{Advance, Dopri5};
use crate::scale_factor::ScaleFactor;

/// Relative growth of `‖u‖` per step above which the step is halved and retried.
pub const GROWTH_LIMIT: f64 = 0.05;

pub const TRACE_HEADER: &str =
    "t,dt,L2sq,L2sq_prime,E,I,theta,theta_prime,theta_second,theta_negk,eta,zeta,Hdiag,wrap_margin";

/// `(t, u, u_t)` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Field,
    pub v: Field,
}

impl State {
    pub fn new(t: f64, u: Field, v: Field) -> Result<Self> {
        if u.grid() != v.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(State { t, u, v })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.u.is_finite() && self.v.is_finite()
    }
}

/// Coefficients of the equation.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub sf: &'a ScaleFactor,
    pub params: &'a PhysicalParams,
    pub nl: &'a Nonlinearity,
}

fn rhs_into(
    model: &Model,
    t: f64,
    u: &Field,
    v: &[Complex64],
    lap: &mut [Complex64],
    du: &mut [Complex64],
    dv: &mut [Complex64],
) -> Result<()> {
    let kin = model.sf.eval(t)?;
    let c2 = model.params.c * model.params.c;
    let damp = model.params.n() * kin.rate();
    let stiff = c2 / (kin.a * kin.a);
    let mass = model.params.mass_sq();
    let nl = model.nl;
    u.laplacian_into(lap);
    du.copy_from_slice(v);
    let uvals = u.values();
    let kernel = |i: usize| -damp * v[i] + stiff * lap[i] - mass * uvals[i] + c2 * nl.f_unchecked(uvals[i]);
    if dv.len() >= PAR_THRESHOLD {
        dv.par_iter_mut().enumerate().for_each(|(i, o)| *o = kernel(i));
    } else {
        for (i, o) in dv.iter_mut().enumerate() {
            *o = kernel(i);
        }
    }
    Ok(())
}

/// `(u_t, u_tt)` with `u_tt = −nȧ/a·v + c²a⁻²Δu − m²c²u + c²f(u)`.
pub fn rhs(state: &State, sf: &ScaleFactor, params: &PhysicalParams, nl: &Nonlinearity) -> Result<(Field, Field)> {
    let model = Model { sf, params, nl };
    let grid = *state.grid();
    let len = grid.len();
    let mut lap = vec![Complex64::new(0.0, 0.0); len];
    let mut du = vec![Complex64::new(0.0, 0.0); len];
    let mut dv = vec![Complex64::new(0.0, 0.0); len];
    rhs_into(&model, state.t, &state.u, state.v.values(), &mut lap, &mut du, &mut dv)?;
    Ok((Field::from_values(grid, du)?, Field::from_values(grid, dv)?))
}

/// Largest stable step on `[t, t + dt]`: `cfl · h · min a / c`.
pub fn cfl_limit(grid: &Grid, sf: &ScaleFactor, c: f64, cfl: f64, t: f64, dt: f64) -> Result<f64> {
    let mut a_min = f64::INFINITY;
    for s in [0.0, 0.5, 1.0] {
        a_min = a_min.min(sf.eval(t + s * dt)?.a);
    }
    Ok(cfl * grid.spacing() * a_min / c)
}

/// Scratch buffers for repeated RK4 steps.
#[derive(Debug, Clone)]
struct Stepper {
    lap: Vec<Complex64>,
    ku: [Vec<Complex64>; 4],
    kv: [Vec<Complex64>; 4],
    stage_u: Field,
    stage_v: Vec<Complex64>,
}

impl Stepper {
    fn new(grid: Grid) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Stepper {
            lap: z.clone(),
            ku: [z.clone(), z.clone(), z.clone(), z.clone()],
            kv: [z.clone(), z.clone(), z.clone(), z.clone()],
            stage_u: Field::zeros(grid),
            stage_v: z,
        }
    }

    fn step(&mut self, model: &Model, state: &State, dt: f64) -> Result<State> {
        let offsets = [0.0, 0.5, 0.5, 1.0];
        for (s, &off) in offsets.iter().enumerate() {
            let ts = state.t + off * dt;
            if s == 0 {
                rhs_into(model, ts, &state.u, state.v.values(), &mut self.lap, &mut self.ku[0], &mut self.kv[0])?;
                continue;
            }
            let w = off * dt;
            {
                let (ku_prev, kv_prev) = (&self.ku[s - 1], &self.kv[s - 1]);
                let su = self.stage_u.values_mut();
                for i in 0..su.len() {
                    su[i] = state.u.values()[i] + ku_prev[i] * w;
                    self.stage_v[i] = state.v.values()[i] + kv_prev[i] * w;
                }
            }
            rhs_into(model, ts, &self.stage_u, &self.stage_v, &mut self.lap, &mut self.ku[s], &mut self.kv[s])?;
        }
        let grid = *state.grid();
        let h6 = dt / 6.0;
        let combine = |base: &[Complex64], k: &[Vec<Complex64>; 4]| -> Vec<Complex64> {
            (0..base.len())
                .map(|i| base[i] + (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * h6)
                .collect()
        };
        let u = combine(state.u.values(), &self.ku);
        let v = combine(state.v.values(), &self.kv);
        Ok(State {
            t: state.t + dt,
            u: Field::from_values(grid, u)?,
            v: Field::from_values(grid, v)?,
        })
    }
}

/// One classical RK4 step, with the scale factor evaluated at stage times.
pub fn step(
    state: &State,
    dt: f64,
    sf: &ScaleFactor,
    params: &PhysicalParams,
    nl: &Nonlinearity,
    cfl: f64,
) -> Result<State> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let limit = cfl_limit(state.grid(), sf, params.c, cfl, state.t, dt)?;
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    Stepper::new(*state.grid()).step(&Model { sf, params, nl }, state, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupReason {
    NormThreshold,
    StepCollapse,
    NonFinite,
}

impl BlowupReason {
    pub fn name(&self) -> &'static str {
        match self {
            BlowupReason::NormThreshold => "norm_threshold",
            BlowupReason::StepCollapse => "step_collapse",
            BlowupReason::NonFinite => "nonfinite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Reached `t_end`.
    Completed,
    /// `t_star` is an extrapolated estimate, never a certified value.
    BlowUp { reason: BlowupReason, t_star: f64 },
    /// Localized data would reach the periodic image of itself.
    WrapAroundAbort { t: f64 },
    /// A non-finite state appeared without prior rapid growth.
    NonFinite { t: f64 },
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::BlowUp { .. } => "blowup",
            Termination::WrapAroundAbort { .. } => "wrap_around_abort",
            Termination::NonFinite { .. } => "nonfinite",
        }
    }

    pub fn t_star(&self) -> Option<f64> {
        match self {
            Termination::BlowUp { t_star, .. } => Some(*t_star),
            _ => None,
        }
    }

    /// 0 completed or blow-up detected, 5 wrap-around abort, 6 non-finite.
    pub fn exit_code(&self) -> i32 {
        match self {
            Termination::Completed | Termination::BlowUp { .. } => 0,
            Termination::WrapAroundAbort { .. } => 5,
            Termination::NonFinite { .. } => 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub rows: Vec<FunctionalSnapshot>,
    pub termination: Termination,
    pub run_config_hash: String,
    pub anchor: Anchor,
    pub report: HypothesisReport,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub final_state: State,
    pub final_dt: f64,
}

impl Trace {
    pub fn blowup_detected(&self) -> bool {
        matches!(self.termination, Termination::BlowUp { .. })
    }

    pub fn t_star(&self) -> Option<f64> {
        self.termination.t_star()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.rows.len() * 320);
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let fields = [
                r.t, r.dt, r.l2sq, r.l2sq_prime, r.energy, r.nehari, r.theta, r.theta_prime,
                r.theta_second, r.theta_negk, r.eta, r.zeta, r.hdiag, r.wrap_margin,
            ];
            for (i, x) in fields.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{x:.16e}");
            }
            out.push('\n');
        }
        out
    }

    /// `key=value` summary of the run.
    pub fn summary(&self) -> String {
        let t_bound = self.report.t_bound;
        let t_star = self.t_star();
        let margin = match (t_bound, t_star) {
            (Some(b), Some(s)) => fmt_f64(b - s),
            _ => "none".into(),
        };
        let e0 = self.anchor.e_t0.abs().max(f64::MIN_POSITIVE);
        let max_energy_res = self.rows.iter().map(|r| r.energy_residual.abs()).fold(0.0, f64::max);
        let max_nehari_res = self
            .rows
            .iter()
            .filter(|r| r.nehari_residual.is_finite())
            .map(|r| r.nehari_residual.abs())
            .fold(0.0, f64::max);
        let last = self.rows.last();
        let reason = match self.termination {
            Termination::BlowUp { reason, .. } => reason.name(),
            _ => "none",
        };
        let lines = [
            ("name", self.report.name.clone()),
            ("config_hash", self.run_config_hash.clone()),
            ("termination", self.termination.name().into()),
            ("blowup_detected", self.blowup_detected().to_string()),
            ("blowup_reason", reason.into()),
            ("T_star", t_star.map(fmt_f64).unwrap_or_else(|| "none".into())),
            ("T_star_kind", "extrapolated_estimate".into()),
            ("theorem", self.report.theorem.name().into()),
            ("T_bound", t_bound.map(fmt_f64).unwrap_or_else(|| "none".into())),
            ("bound_margin", margin),
            ("diagnostic_mode", self.anchor.mode.name().into()),
            ("theta_anchored", self.anchor.t_bound.is_some().to_string()),
            ("kappa", last.map(|r| fmt_f64(r.kappa)).unwrap_or_default()),
            ("steps_accepted", self.steps_accepted.to_string()),
            ("steps_rejected", self.steps_rejected.to_string()),
            ("rows", self.rows.len().to_string()),
            ("t_final", fmt_f64(self.final_state.t)),
            ("dt_final", fmt_f64(self.final_dt)),
            ("max_energy_residual_rel", fmt_f64(max_energy_res / e0)),
            ("max_nehari_residual", fmt_f64(max_nehari_res)),
        ];
        lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Parses trace CSV text into rows of the fourteen numeric columns.
pub fn parse_trace_csv(text: &str) -> Result<Vec<[f64; 14]>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        _ => return Err(Error::parse(1, "missing or unexpected trace header")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let mut row = [0.0; 14];
            let mut count = 0;
            for (j, cell) in line.split(',').enumerate() {
                if j >= 14 {
                    return Err(Error::parse(i + 2, "too many columns"));
                }
                row[j] = cell
                    .parse()
                    .map_err(|_| Error::parse(i + 2, format!("bad number `{cell}`")))?;
                count += 1;
            }
            if count != 14 {
                return Err(Error::parse(i + 2, "too few columns"));
            }
            Ok(row)
        })
        .collect()
}

/// Distance left before localized data can wrap around: `Λ − r − c∫a⁻¹`.
///
/// `None` when some nonzero profile is not localized.
pub fn support_radius(data: &[&ProfileSpec]) -> Option<f64> {
    let mut r: f64 = 0.0;
    for spec in data {
        if spec.amplitude == 0.0 {
            continue;
        }
        r = r.max(spec.support_radius()?);
    }
    Some(r)
}

/// Zero of the secant of `y = L^{−(p−1)/4}` through the last samples, with a
/// Richardson correction when three samples are available.
pub fn extrapolate_blowup(samples: &[(f64, f64)], p: f64) -> Option<f64> {
    let q = 0.25 * (p - 1.0);
    let y: Vec<(f64, f64)> = samples.iter().map(|&(t, l)| (t, l.powf(-q))).collect();
    let secant = |a: (f64, f64), b: (f64, f64)| {
        let slope = (b.1 - a.1) / (b.0 - a.0);
        if slope < 0.0 {
            Some(b.0 - b.1 / slope)
        } else {
            None
        }
    };
    match y.len() {
        0 | 1 => None,
        2 => secant(y[0], y[1]),
        _ => {
            let k = y.len();
            let (p1, p2, p3) = (y[k - 3], y[k - 2], y[k - 1]);
            let e1 = secant(p1, p2)?;
            let e2 = secant(p2, p3)?;
            let s1 = (e1 - p1.0) * (e1 - p2.0);
            let s2 = (e2 - p2.0) * (e2 - p3.0);
            let rich = (s1 * e2 - s2 * e1) / (s1 - s2);
            if rich.is_finite() && rich >= p3.0 && (rich - e2).abs() <= (e2 - p3.0).max(0.0) {
                Some(rich)
            } else {
                Some(e2)
            }
        }
    }
    .filter(|t| t.is_finite())
}

fn anchor_for(
    scenario: &Scenario,
    report: &HypothesisReport,
    norms0: &Norms,
    kin0: &crate::scale_factor::Kinematics,
) -> Anchor {
    let (mode, t_bound) = match scenario.run.diagnostic_mode {
        ModeRequest::Fixed(DiagnosticMode::TheoremOne) => (DiagnosticMode::TheoremOne, report.t_bound_thm1),
        ModeRequest::Fixed(DiagnosticMode::TheoremTwo) => (DiagnosticMode::TheoremTwo, report.t_bound_thm2),
        ModeRequest::Fixed(DiagnosticMode::Unanchored) => (DiagnosticMode::Unanchored, None),
        ModeRequest::Auto => match report.theorem {
            Theorem::Thm1 | Theorem::Both => (DiagnosticMode::TheoremOne, report.t_bound_thm1),
            Theorem::Thm2 => (DiagnosticMode::TheoremTwo, report.t_bound_thm2),
            Theorem::None => (DiagnosticMode::Unanchored, None),
        },
    };
    Anchor::new(mode, scenario.run.t0, t_bound, norms0, kin0, &scenario.params)
}

/// Integrates a scenario from its configured data.
pub fn run(scenario: &Scenario) -> Result<Trace> {
    let (u0, u1) = scenario.initial_data()?;
    run_from(scenario, u0, u1)
}

/// Integrates a scenario from explicit initial data.
pub fn run_from(scenario: &Scenario, u0: Field, u1: Field) -> Result<Trace> {
    let sf = &scenario.scale_factor;
    let params = &scenario.params;
    let nl = &scenario.nonlinearity;
    let spec = &scenario.run;
    nl.check_potential()?;
    if spec.t_end >= sf.horizon() {
        return Err(Error::InvalidRun(format!(
            "t_end = {} must lie before the horizon {}",
            spec.t_end,
            sf.horizon()
        )));
    }
    let model = Model { sf, params, nl };
    let grid = scenario.grid;
    let report = hypotheses::evaluate_fields(scenario, &u0, &u1)?;
    let mut state = State::new(spec.t0, u0, u1)?;

    let kin0 = sf.eval(state.t)?;
    let norms0 = Norms::measure(&state.u, &state.v, nl)?;
    let anchor = anchor_for(scenario, &report, &norms0, &kin0);
    let mut acc = DiagnosticsAccumulator::new(*params, anchor);
    acc.push(DiagSample { t: state.t, kin: kin0, norms: norms0 });

    let radius = support_radius(&[&scenario.data0, &scenario.data1]);
    let wrap_margin = |acc: &DiagnosticsAccumulator| match radius {
        Some(r) => grid.half_width() - r - params.c * acc.integrals().inv_a,
        None => f64::INFINITY,
    };
    let nehari_residual = |state: &State, stepper: &mut Stepper| -> Result<f64> {
        let kin = sf.eval(state.t)?;
        let len = grid.len();
        let mut du = vec![Complex64::new(0.0, 0.0); len];
        let mut dv = vec![Complex64::new(0.0, 0.0); len];
        rhs_into(&model, state.t, &state.u, state.v.values(), &mut stepper.lap, &mut du, &mut dv)?;
        let dv = Field::from_values(grid, dv)?;
        let norms = Norms::measure(&state.u, &state.v, nl)?;
        Ok(state.u.inner_re(&dv)? + params.n() * kin.rate() * norms.re_uv + norms.nehari(&kin, params))
    };
    let mut stepper = Stepper::new(grid);
    let mut rows = Vec::new();
    let mut record = |acc: &DiagnosticsAccumulator, state: &State, dt: f64, stepper: &mut Stepper| -> Result<()> {
        let mut snap = acc.snapshot(dt)?;
        snap.nehari_residual = nehari_residual(state, stepper)?;
        snap.wrap_margin = wrap_margin(acc);
        rows.push(snap);
        Ok(())
    };
    record(&acc, &state, 0.0, &mut stepper)?;

    let l0 = norms0.l2_u;
    let mut dt = spec.dt;
    let mut history: VecDeque<(f64, f64)> = VecDeque::with_capacity(3);
    history.push_back((state.t, l0));
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut halved = false;
    let mut last_dt = 0.0;
    let p = nl.p();
    let blowup_at = |history: &VecDeque<(f64, f64)>| {
        let samples: Vec<(f64, f64)> = history.iter().copied().collect();
        let t_last = samples.last().map(|s| s.0).unwrap_or(0.0);
        extrapolate_blowup(&samples, p).filter(|t| *t >= t_last).unwrap_or(t_last)
    };

    let termination = loop {
        if state.t >= spec.t_end {
            break Termination::Completed;
        }
        let h = dt.min(spec.t_end - state.t);
        let limit = cfl_limit(&grid, sf, params.c, spec.cfl, state.t, h)?;
        if h > limit {
            return Err(Error::CflViolation { dt: h, limit });
        }
        let candidate = stepper.step(&model, &state, h)?;
        let finite = candidate.is_finite();
        let l_new = if finite { candidate.u.l2_norm_sq() } else { f64::NAN };
        let l_old = history.back().map(|s| s.1).unwrap_or(l0);
        let growth = if l_old > 0.0 { (l_new / l_old).sqrt() - 1.0 } else { 0.0 };
        if !finite || growth > GROWTH_LIMIT {
            if dt * 0.5 >= spec.dt_min {
                dt *= 0.5;
                halved = true;
                rejected += 1;
                continue;
            }
            let reason = if finite { BlowupReason::StepCollapse } else { BlowupReason::NonFinite };
            if !finite && !halved {
                break Termination::NonFinite { t: state.t };
            }
            break Termination::BlowUp { reason, t_star: blowup_at(&history) };
        }
        state = candidate;
        accepted += 1;
        last_dt = h;
        let kin = sf.eval(state.t)?;
        acc.push(DiagSample { t: state.t, kin, norms: Norms::measure(&state.u, &state.v, nl)? });
        if history.len() == 3 {
            history.pop_front();
        }
        history.push_back((state.t, l_new));

        let margin = wrap_margin(&acc);
        let threshold_hit = l0 > 0.0 && l_new >= spec.blowup_threshold * l0;
        let done = state.t >= spec.t_end;
        if margin < 0.0 || threshold_hit || done || accepted.is_multiple_of(spec.record_every) {
            record(&acc, &state, h, &mut stepper)?;
        }
        if margin < 0.0 {
            break Termination::WrapAroundAbort { t: state.t };
        }
        if threshold_hit {
            break Termination::BlowUp { reason: BlowupReason::NormThreshold, t_star: blowup_at(&history) };
        }
    };
    log::info!(
        "{}: {} after {accepted} steps ({rejected} rejected), t = {}",
        scenario.name,
        termination.name(),
        state.t
    );
    Ok(Trace {
        rows,
        termination,
        run_config_hash: scenario.config_hash(),
        anchor,
        report,
        steps_accepted: accepted,
        steps_rejected: rejected,
        final_state: state,
        final_dt: last_dt,
    })
}

/// One output time of the homogeneous reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousSample {
    pub t: f64,
    pub u: Complex64,
    pub v: Complex64,
    /// `‖u‖² = |u|²·|Ω|`
    pub l2sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousTrace {
    pub samples: Vec<HomogeneousSample>,
    /// Extrapolated blow-up time if the solution escapes before the last request.
    pub blowup_time: Option<f64>,
}

/// Relative tolerance of the homogeneous reference integrator.
pub const ORACLE_RTOL: f64 = 1e-12;

/// Threshold on `|u|²/|u₀|²` at which the oracle declares blow-up.
const ORACLE_ESCAPE: f64 = 1e24;

/// Solves `u″ + nȧ/a·u′ + m²c²u = c²f(u)` for spatially constant data with
/// adaptive Dormand–Prince steps, landing exactly on every requested time.
///
/// Times must be increasing and start at or after `run.t0`. Sampling stops
/// at the first time beyond the detected blow-up.
pub fn homogeneous_oracle(scenario: &Scenario, times: &[f64]) -> Result<HomogeneousTrace> {
    if !scenario.is_homogeneous() {
        return Err(Error::InvalidRun("homogeneous oracle requires spatially constant data".into()));
    }
    let sf = &scenario.scale_factor;
    let params = &scenario.params;
    let nl = &scenario.nonlinearity;
    let volume = scenario.grid.volume();
    let d0 = &scenario.data0;
    let d1 = &scenario.data1;
    let u0 = Complex64::from_polar(d0.amplitude, d0.phase);
    let v0 = Complex64::from_polar(d1.amplitude, d1.phase);
    let c2 = params.c * params.c;
    let mass = params.mass_sq();
    let n = params.n();
    let mut f = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let kin = sf.eval(t)?;
        let u = Complex64::new(y[0], y[1]);
        let v = Complex64::new(y[2], y[3]);
        let acc = -n * kin.rate() * v - mass * u + c2 * nl.f_unchecked(u);
        dy[0] = v.re;
        dy[1] = v.im;
        dy[2] = acc.re;
        dy[3] = acc.im;
        Ok(())
    };
    let ode = Dopri5::new(ORACLE_RTOL, 1e-14 * u0.norm().max(v0.norm()).max(1e-300));
    let mut t = scenario.run.t0;
    let mut y = vec![u0.re, u0.im, v0.re, v0.im];
    let mut h = 1e-4;
    let escape = ORACLE_ESCAPE * u0.norm_sqr().max(f64::MIN_POSITIVE);
    let mut samples = Vec::with_capacity(times.len());
    let mut tail: VecDeque<(f64, f64)> = VecDeque::with_capacity(3);
    let mut blowup_time = None;
    let sample = |t: f64, y: &[f64]| HomogeneousSample {
        t,
        u: Complex64::new(y[0], y[1]),
        v: Complex64::new(y[2], y[3]),
        l2sq: (y[0] * y[0] + y[1] * y[1]) * volume,
    };
    let mut stop = |t: f64, y: &[f64]| {
        let l = y[0] * y[0] + y[1] * y[1];
        if tail.len() == 3 {
            tail.pop_front();
        }
        tail.push_back((t, l));
        l >= escape
    };
    for &target in times {
        if target < t {
            return Err(Error::InvalidRun("oracle times must be increasing from t0".into()));
        }
        match ode.advance(&mut f, &mut t, &mut y, target, &mut h, &mut stop)? {
            Advance::Reached => samples.push(sample(t, &y)),
            Advance::Stopped { .. } | Advance::StepCollapse => {
                let pts: Vec<(f64, f64)> = tail.iter().copied().collect();
                blowup_time = Some(extrapolate_blowup(&pts, nl.p()).unwrap_or(t).max(t));
                break;
            }
        }
    }
    Ok(HomogeneousTrace { samples, blowup_time })
}

/// Blow-up time of the homogeneous reduction, if it escapes before `t_max`.
pub fn homogeneous_blowup_time(scenario: &Scenario, t_max: f64) -> Result<Option<f64>> {
    Ok(homogeneous_oracle(scenario, &[t_max])?.blowup_time)
}
