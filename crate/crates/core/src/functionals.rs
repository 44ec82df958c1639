//! Scalar functionals of a state: energy `E`, Nehari functional `I`, the
//! concavity function `θ` with its derivatives, and the auxiliary
//! diagnostics `G`, `η`, `ζ`, `H`.
//!
//! Time integrals along a trajectory are accumulated with the trapezoid rule
//! at accepted steps, so identities involving them hold to `O(dt²)`.

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::nonlinearity::Nonlinearity;
use crate::scale_factor::{Kinematics, ScaleFactor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub m: f64,
    pub c: f64,
    pub eps: f64,
    pub dim: usize,
}

impl PhysicalParams {
    pub fn new(m: f64, c: f64, eps: f64, dim: usize) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidParams(format!("m must be finite, got {m}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParams(format!("c must be > 0, got {c}")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParams(format!("eps must be > 0, got {eps}")));
        }
        if dim == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        Ok(PhysicalParams { m, c, eps, dim })
    }

    /// `m̃ = min{1, |m|}`
    pub fn m_tilde(&self) -> f64 {
        self.m.abs().min(1.0)
    }

    /// `c̃ = min{1, c}`
    pub fn c_tilde(&self) -> f64 {
        self.c.min(1.0)
    }

    /// `m²c²`
    pub fn mass_sq(&self) -> f64 {
        self.m * self.m * self.c * self.c
    }

    pub fn n(&self) -> f64 {
        self.dim as f64
    }
}

/// Spatial integrals of one state from which all functionals are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    /// `‖u‖²`
    pub l2_u: f64,
    /// `‖u_t‖²`
    pub l2_v: f64,
    /// `Re(u, u_t)`
    pub re_uv: f64,
    /// `‖∇u‖²` (discrete Dirichlet form)
    pub grad: f64,
    /// `∫F(u)`
    pub potential: f64,
    /// `Re ∫ ū f(u)`
    pub pairing: f64,
}

impl Norms {
    pub fn measure(u: &Field, v: &Field, nl: &Nonlinearity) -> Result<Self> {
        Ok(Norms {
            l2_u: u.l2_norm_sq(),
            l2_v: v.l2_norm_sq(),
            re_uv: u.inner_re(v)?,
            grad: u.dirichlet_form(),
            potential: u.integrate_potential(nl)?,
            pairing: u.integrate_pairing(nl)?,
        })
    }

    pub fn energy(&self, kin: &Kinematics, params: &PhysicalParams) -> f64 {
        let c2 = params.c * params.c;
        0.5 * self.l2_v + 0.5 * c2 * self.grad / (kin.a * kin.a) + 0.5 * params.mass_sq() * self.l2_u
            - c2 * self.potential
    }

    pub fn nehari(&self, kin: &Kinematics, params: &PhysicalParams) -> f64 {
        let c2 = params.c * params.c;
        c2 * self.grad / (kin.a * kin.a) + params.mass_sq() * self.l2_u - c2 * self.pairing
    }

    /// `E − [½‖u_t‖² + I/(ε+2) + ε/(2(ε+2))(c²a⁻²‖∇u‖² + m²c²‖u‖²)]`
    pub fn rel_e_i_gap(&self, kin: &Kinematics, params: &PhysicalParams) -> f64 {
        let eps = params.eps;
        let quad =
            params.c * params.c * self.grad / (kin.a * kin.a) + params.mass_sq() * self.l2_u;
        self.energy(kin, params)
            - (0.5 * self.l2_v
                + self.nehari(kin, params) / (eps + 2.0)
                + eps / (2.0 * (eps + 2.0)) * quad)
    }
}

fn measure_state(
    state: &State,
    sf: &ScaleFactor,
    nl: &Nonlinearity,
) -> Result<(Norms, Kinematics)> {
    let kin = sf.eval(state.t)?;
    Ok((Norms::measure(&state.u, &state.v, nl)?, kin))
}

/// `E = ½‖u_t‖² + ½c²a⁻²‖∇u‖² + ½m²c²‖u‖² − c²∫F(u)`
pub fn energy(state: &State, sf: &ScaleFactor, params: &PhysicalParams, nl: &Nonlinearity) -> Result<f64> {
    let (norms, kin) = measure_state(state, sf, nl)?;
    Ok(norms.energy(&kin, params))
}

/// `I = c²a⁻²‖∇u‖² + m²c²‖u‖² − c² Re∫ūf(u)`
pub fn nehari(state: &State, sf: &ScaleFactor, params: &PhysicalParams, nl: &Nonlinearity) -> Result<f64> {
    let kin = sf.eval(state.t)?;
    let u = &state.u;
    let c2 = params.c * params.c;
    Ok(c2 * u.dirichlet_form() / (kin.a * kin.a) + params.mass_sq() * u.l2_norm_sq()
        - c2 * u.integrate_pairing(nl)?)
}

pub fn rel_e_i_gap(
    state: &State,
    sf: &ScaleFactor,
    params: &PhysicalParams,
    nl: &Nonlinearity,
) -> Result<f64> {
    let (norms, kin) = measure_state(state, sf, nl)?;
    Ok(norms.rel_e_i_gap(&kin, params))
}

/// `ρ = m²c²ε/(2(ε+2))‖u₀‖² − E(0)`
pub fn rho(
    u0: &Field,
    u1: &Field,
    sf: &ScaleFactor,
    params: &PhysicalParams,
    nl: &Nonlinearity,
) -> Result<f64> {
    let kin = sf.eval(0.0)?;
    let norms = Norms::measure(u0, u1, nl)?;
    Ok(rho_from(&norms, &kin, params))
}

pub(crate) fn rho_from(norms: &Norms, kin: &Kinematics, params: &PhysicalParams) -> f64 {
    let eps = params.eps;
    params.mass_sq() * eps / (2.0 * (eps + 2.0)) * norms.l2_u - norms.energy(kin, params)
}

/// `δ = |m|cε/(2(ε+2)) Re(u₀,u₁) − E(t₀)`
pub fn delta(
    u0: &Field,
    u1: &Field,
    t0: f64,
    sf: &ScaleFactor,
    params: &PhysicalParams,
    nl: &Nonlinearity,
) -> Result<f64> {
    let kin = sf.eval(t0)?;
    let norms = Norms::measure(u0, u1, nl)?;
    Ok(delta_from(&norms, &kin, params))
}

pub(crate) fn delta_from(norms: &Norms, kin: &Kinematics, params: &PhysicalParams) -> f64 {
    let eps = params.eps;
    params.m.abs() * params.c * eps / (2.0 * (eps + 2.0)) * norms.re_uv - norms.energy(kin, params)
}

/// `H = 2Re(u,u_t) − 4(ε+2)E(t₀)/(|m|cε)`
pub fn hdiag(norms: &Norms, params: &PhysicalParams, e_t0: f64) -> Result<f64> {
    if params.m == 0.0 {
        return Err(Error::MasslessHdiag);
    }
    let eps = params.eps;
    Ok(2.0 * norms.re_uv - 4.0 * (eps + 2.0) * e_t0 / (params.m.abs() * params.c * eps))
}

/// Which concavity argument the diagnostics follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticMode {
    /// `κ̃ = ε+1`, `κ = ε/4`, anchored at `t₀ = 0`
    TheoremOne,
    /// `κ̃ = ε/2+1`, `κ = (κ̃−1)/4`
    TheoremTwo,
    /// No certified bound: the `(T−t)` term of `θ` is dropped.
    Unanchored,
}

impl DiagnosticMode {
    pub fn kappa_tilde(&self, eps: f64) -> f64 {
        match self {
            DiagnosticMode::TheoremOne | DiagnosticMode::Unanchored => eps + 1.0,
            DiagnosticMode::TheoremTwo => eps / 2.0 + 1.0,
        }
    }

    pub fn kappa(&self, eps: f64) -> f64 {
        (self.kappa_tilde(eps) - 1.0) / 4.0
    }

    pub fn name(&self) -> &'static str {
        match self {
            DiagnosticMode::TheoremOne => "thm1",
            DiagnosticMode::TheoremTwo => "thm2",
            DiagnosticMode::Unanchored => "unanchored",
        }
    }
}

/// Initial-time data the diagnostics are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub mode: DiagnosticMode,
    pub t0: f64,
    /// Certified bound `T` entering `θ`; `None` leaves θ diagnostic only.
    pub t_bound: Option<f64>,
    pub e_t0: f64,
    pub l2_u0: f64,
    /// `ȧ(t₀)/a(t₀)`
    pub rate_t0: f64,
}

impl Anchor {
    pub fn new(
        mode: DiagnosticMode,
        t0: f64,
        t_bound: Option<f64>,
        norms0: &Norms,
        kin0: &Kinematics,
        params: &PhysicalParams,
    ) -> Self {
        let t_bound = if mode == DiagnosticMode::Unanchored { None } else { t_bound };
        Anchor {
            mode,
            t0,
            t_bound,
            e_t0: norms0.energy(kin0, params),
            l2_u0: norms0.l2_u,
            rate_t0: kin0.rate(),
        }
    }
}

/// One accepted time level of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagSample {
    pub t: f64,
    pub kin: Kinematics,
    pub norms: Norms,
}

/// Running trapezoid integrals `∫_{t₀}^t … dτ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningIntegrals {
    /// `∫ ȧ/a ‖u‖²`
    pub rate_l2_u: f64,
    /// `∫ ȧ/a ‖u_t‖²`
    pub rate_l2_v: f64,
    /// `∫ ȧ/a Re(u,u_t)`
    pub rate_re_uv: f64,
    /// `G = ∫ (ȧ²−äa)/a² ‖u‖²`
    pub g: f64,
    /// `∫ G`
    pub int_g: f64,
    /// `∫ c² ȧ/a³ ‖∇u‖²`
    pub grad_loss: f64,
    /// `∫ 1/a`
    pub inv_a: f64,
}

impl RunningIntegrals {
    fn advance(&mut self, prev: &DiagSample, next: &DiagSample, c: f64) {
        let half = 0.5 * (next.t - prev.t);
        let trap = |f: &dyn Fn(&DiagSample) -> f64| half * (f(prev) + f(next));
        self.rate_l2_u += trap(&|s| s.kin.rate() * s.norms.l2_u);
        self.rate_l2_v += trap(&|s| s.kin.rate() * s.norms.l2_v);
        self.rate_re_uv += trap(&|s| s.kin.rate() * s.norms.re_uv);
        let g_prev = self.g;
        self.g += trap(&|s| s.kin.defect_rate() * s.norms.l2_u);
        self.int_g += half * (g_prev + self.g);
        self.grad_loss += trap(&|s| c * c * s.kin.rate() * s.norms.grad / (s.kin.a * s.kin.a));
        self.inv_a += trap(&|s| 1.0 / s.kin.a);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValues {
    pub g: f64,
    pub theta: f64,
    pub theta_prime: f64,
    pub theta_second: f64,
}

/// All scalar diagnostics at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalSnapshot {
    pub t: f64,
    /// Step that produced this row (0 for the initial row).
    pub dt: f64,
    /// `L = ‖u‖²`
    pub l2sq: f64,
    /// `L' = 2Re(u,u_t)`
    pub l2sq_prime: f64,
    pub l2_v: f64,
    pub energy: f64,
    pub nehari: f64,
    pub g: f64,
    pub theta: f64,
    pub theta_prime: f64,
    pub theta_second: f64,
    /// `θ^{−κ}`
    pub theta_negk: f64,
    pub eta: f64,
    pub zeta: f64,
    /// NaN when `m = 0`.
    pub hdiag: f64,
    pub kappa: f64,
    pub kappa_tilde: f64,
    pub mode: DiagnosticMode,
    pub anchored: bool,
    /// `∫ (nȧ/a‖u_t‖² + c²ȧ/a³‖∇u‖²)`
    pub dissipated: f64,
    /// `E(t) + dissipated − E(t₀)`
    pub energy_residual: f64,
    /// `Re(u,u_tt) + nȧ/a Re(u,u_t) + I(u)` with `u_tt` from the equation.
    pub nehari_residual: f64,
    /// Distance left before localized data can wrap around the torus.
    pub wrap_margin: f64,
}

/// Incremental accumulator for the diagnostics of one trajectory.
#[derive(Debug, Clone)]
pub struct DiagnosticsAccumulator {
    params: PhysicalParams,
    anchor: Anchor,
    integrals: RunningIntegrals,
    last: Option<DiagSample>,
}

impl DiagnosticsAccumulator {
    pub fn new(params: PhysicalParams, anchor: Anchor) -> Self {
        DiagnosticsAccumulator {
            params,
            anchor,
            integrals: RunningIntegrals::default(),
            last: None,
        }
    }

    pub fn anchor(&self) -> &Anchor {
        &self.anchor
    }

    pub fn integrals(&self) -> &RunningIntegrals {
        &self.integrals
    }

    pub fn last(&self) -> Option<&DiagSample> {
        self.last.as_ref()
    }

    pub fn push(&mut self, sample: DiagSample) {
        if let Some(prev) = &self.last {
            self.integrals.advance(prev, &sample, self.params.c);
        }
        self.last = Some(sample);
    }

    pub fn theta(&self) -> Result<ThetaValues> {
        let s = self.last.as_ref().ok_or(Error::EmptyTrace)?;
        let n = self.params.n();
        let ig = &self.integrals;
        let tail = self
            .anchor
            .t_bound
            .map(|t_bound| n * (t_bound - s.t) * self.anchor.rate_t0 * self.anchor.l2_u0)
            .unwrap_or(0.0);
        Ok(ThetaValues {
            g: ig.g,
            theta: s.norms.l2_u + n * ig.rate_l2_u + n * ig.int_g + tail,
            theta_prime: 2.0 * s.norms.re_uv + 2.0 * n * ig.rate_re_uv,
            theta_second: 2.0 * (s.norms.l2_v - s.norms.nehari(&s.kin, &self.params)),
        })
    }

    /// `η = (‖u‖² + ∫nȧ/a‖u‖²)(‖u_t‖² + ∫nȧ/a‖u_t‖²) − (Re(u,u_t) + Re∫nȧ/a(u,u_t))²`
    pub fn eta(&self) -> Result<f64> {
        let s = self.last.as_ref().ok_or(Error::EmptyTrace)?;
        let n = self.params.n();
        let ig = &self.integrals;
        let cross = s.norms.re_uv + n * ig.rate_re_uv;
        Ok((s.norms.l2_u + n * ig.rate_l2_u) * (s.norms.l2_v + n * ig.rate_l2_v) - cross * cross)
    }

    /// `ζ = −(κ̃+1)‖u_t‖² − 2I − (κ̃+3)∫nȧ/a‖u_t‖²`
    pub fn zeta(&self, kappa_tilde: f64) -> Result<f64> {
        let s = self.last.as_ref().ok_or(Error::EmptyTrace)?;
        let n = self.params.n();
        Ok(-(kappa_tilde + 1.0) * s.norms.l2_v
            - 2.0 * s.norms.nehari(&s.kin, &self.params)
            - (kappa_tilde + 3.0) * n * self.integrals.rate_l2_v)
    }

    pub fn snapshot(&self, dt: f64) -> Result<FunctionalSnapshot> {
        let s = *self.last.as_ref().ok_or(Error::EmptyTrace)?;
        let params = &self.params;
        let eps = params.eps;
        let mode = self.anchor.mode;
        let kappa_tilde = mode.kappa_tilde(eps);
        let kappa = mode.kappa(eps);
        let th = self.theta()?;
        let energy = s.norms.energy(&s.kin, params);
        let dissipated = params.n() * self.integrals.rate_l2_v + self.integrals.grad_loss;
        Ok(FunctionalSnapshot {
            t: s.t,
            dt,
            l2sq: s.norms.l2_u,
            l2sq_prime: 2.0 * s.norms.re_uv,
            l2_v: s.norms.l2_v,
            energy,
            nehari: s.norms.nehari(&s.kin, params),
            g: th.g,
            theta: th.theta,
            theta_prime: th.theta_prime,
            theta_second: th.theta_second,
            theta_negk: if th.theta > 0.0 { th.theta.powf(-kappa) } else { f64::NAN },
            eta: self.eta()?,
            zeta: self.zeta(kappa_tilde)?,
            hdiag: hdiag(&s.norms, params, self.anchor.e_t0).unwrap_or(f64::NAN),
            kappa,
            kappa_tilde,
            mode,
            anchored: self.anchor.t_bound.is_some(),
            dissipated,
            energy_residual: energy + dissipated - self.anchor.e_t0,
            nehari_residual: f64::NAN,
            wrap_margin: f64::INFINITY,
        })
    }
}

/// `(G, θ, θ', θ'')` at the last of `samples`, integrating from the first.
pub fn theta_accumulate(
    samples: &[DiagSample],
    params: &PhysicalParams,
    anchor: &Anchor,
) -> Result<ThetaValues> {
    accumulate(samples, params, anchor)?.theta()
}

/// `η` at the last of `samples`.
pub fn eta(samples: &[DiagSample], params: &PhysicalParams, anchor: &Anchor) -> Result<f64> {
    accumulate(samples, params, anchor)?.eta()
}

/// `ζ` at the last of `samples` for the given `κ̃`.
pub fn zeta(
    samples: &[DiagSample],
    params: &PhysicalParams,
    anchor: &Anchor,
    kappa_tilde: f64,
) -> Result<f64> {
    accumulate(samples, params, anchor)?.zeta(kappa_tilde)
}

fn accumulate(
    samples: &[DiagSample],
    params: &PhysicalParams,
    anchor: &Anchor,
) -> Result<DiagnosticsAccumulator> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut acc = DiagnosticsAccumulator::new(*params, *anchor);
    for s in samples {
        acc.push(*s);
    }
    Ok(acc)
}
