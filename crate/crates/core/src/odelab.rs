//! Scalar ODE oracles: the comparison inequality `h′ + γ′h > 0 ⇒ h > 0` and
//! the concavity inequality `y″ ≤ −κA y^{1+1/κ}` with its explicit vanish-time
//! bound `T̃* = t₀ + arcsin z(t₀)/√III`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::functionals::DiagnosticMode;
use crate::hypotheses::{self, fmt_f64, Theorem};
use crate::ode::{Advance, Dopri5};

/// Width of the final bracket on the vanish time.
pub const VANISH_BRACKET: f64 = 1e-12;

const SOLVE_RTOL: f64 = 1e-12;
const SOLVE_ATOL: f64 = 1e-15;

pub const ORACLE_CSV_HEADER: &str = "kappa,A,B,T,y0,y1,t_vanish,t_bound";

/// `y″ ≤ −κA y^{1+1/κ}` on `[t₀, T)` with `y(t₀) = y0`, `y′(t₀) = y1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcavityProblem {
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    pub t_end: f64,
    pub y0: f64,
    pub y1: f64,
}

impl ConcavityProblem {
    pub fn new(kappa: f64, a: f64, b: f64, t0: f64, t_end: f64, y0: f64, y1: f64) -> Result<Self> {
        let all = [kappa, a, b, t0, t_end, y0, y1];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotAdmissible("non-finite parameter".into()));
        }
        if !(kappa > 0.0 && a > 0.0 && b > 0.0) {
            return Err(Error::NotAdmissible(format!(
                "need kappa, A, B > 0, got {kappa}, {a}, {b}"
            )));
        }
        if t0 < 0.0 || y0.partial_cmp(&0.0) != Some(Ordering::Greater) {
            return Err(Error::NotAdmissible(format!("need t0 >= 0 and y0 > 0, got {t0}, {y0}")));
        }
        Ok(ConcavityProblem { kappa, a, b, t0, t_end, y0, y1 })
    }

    /// `I = 2κ²A/(2κ+1)`
    pub fn const_i(&self) -> f64 {
        2.0 * self.kappa * self.kappa * self.a / (2.0 * self.kappa + 1.0)
    }

    /// `II = y1² + I·y0^{2+1/κ}`
    pub fn const_ii(&self) -> f64 {
        self.y1 * self.y1 + self.const_i() * self.y0.powf(2.0 + 1.0 / self.kappa)
    }

    /// `III = I·y0^{1/κ}`
    pub fn const_iii(&self) -> f64 {
        self.const_i() * self.y0.powf(1.0 / self.kappa)
    }

    /// `z(t₀) = (I·y0^{2+1/κ}/II)^{1/2}`
    pub fn z0(&self) -> f64 {
        (self.const_i() * self.y0.powf(2.0 + 1.0 / self.kappa) / self.const_ii()).sqrt()
    }

    /// Smallest admissible `T`: `t₀ + π²(2κ+1)B/(8κ²A)`.
    pub fn min_horizon(&self) -> f64 {
        self.t0 + PI * PI * (2.0 * self.kappa + 1.0) * self.b / (8.0 * self.kappa * self.kappa * self.a)
    }

    /// `y0 ≥ (B(T−t₀))^{−κ}`, `y1 ≤ 0` and `T > t₀ + π²(2κ+1)B/(8κ²A)`.
    pub fn check_admissible(&self) -> Result<()> {
        let floor = (self.b * (self.t_end - self.t0)).powf(-self.kappa);
        if self.t_end.partial_cmp(&self.t0) != Some(Ordering::Greater) {
            return Err(Error::NotAdmissible(format!("T = {} must exceed t0 = {}", self.t_end, self.t0)));
        }
        if self.y0 < floor * (1.0 - 1e-12) {
            return Err(Error::NotAdmissible(format!("y0 = {} below (B(T - t0))^-kappa = {floor}", self.y0)));
        }
        if self.y1 > 0.0 {
            return Err(Error::NotAdmissible(format!("y1 = {} must be <= 0", self.y1)));
        }
        if self.t_end.partial_cmp(&self.min_horizon()) != Some(Ordering::Greater) {
            return Err(Error::NotAdmissible(format!(
                "T = {} must exceed {}",
                self.t_end,
                self.min_horizon()
            )));
        }
        Ok(())
    }
}

/// Right side used for the trajectory: the equality case or a stronger forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    /// `y″ = −κA y^{1+1/κ}`
    Equality,
    /// `y″ = −s·κA y^{1+1/κ}` with `s ≥ 1`, a strict instance of the inequality.
    Scaled(f64),
}

impl Forcing {
    fn factor(&self) -> Result<f64> {
        match *self {
            Forcing::Equality => Ok(1.0),
            Forcing::Scaled(s) if s >= 1.0 && s.is_finite() => Ok(s),
            Forcing::Scaled(s) => Err(Error::NotAdmissible(format!("forcing factor {s} must be >= 1"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcavitySolution {
    pub vanish_time: f64,
    /// Accepted `(t, y, y′)` points, starting at `t₀`, all with `y > 0`.
    pub trajectory: Vec<(f64, f64, f64)>,
}

/// Integrates the concavity ODE until `y` reaches zero.
pub fn solve_concavity(prob: &ConcavityProblem, forcing: Forcing) -> Result<ConcavitySolution> {
    let k = prob.kappa;
    let coeff = forcing.factor()? * k * prob.a;
    let expo = 1.0 + 1.0 / k;
    // odd extension keeps the right side defined past the crossing
    let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = -coeff * y[0].signum() * y[0].abs().powf(expo);
        Ok(())
    };
    let ode = Dopri5::new(SOLVE_RTOL, SOLVE_ATOL * prob.y0.max(prob.y1.abs()));
    let mut t = prob.t0;
    let mut y = vec![prob.y0, prob.y1];
    let scale = prob.const_iii().sqrt().max(1.0 / (prob.t_end - prob.t0).max(1e-300));
    let mut h = 1e-3 / scale;
    let mut trajectory = vec![(t, y[0], y[1])];
    let mut stop = |t: f64, y: &[f64]| {
        if y[0] <= 0.0 {
            return true;
        }
        trajectory.push((t, y[0], y[1]));
        false
    };
    match ode.advance(&mut f, &mut t, &mut y, prob.t_end, &mut h, &mut stop)? {
        Advance::Reached => Err(Error::NoVanishBeforeT { t_end: prob.t_end }),
        Advance::StepCollapse => Err(Error::InvariantViolation {
            module: "odelab",
            msg: format!("step size collapsed at t = {t}"),
        }),
        Advance::Stopped { h } => {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > VANISH_BRACKET {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let (cand, _) = ode.single_step(&mut f, t, &y, mid)?;
                if cand[0] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(ConcavitySolution { vanish_time: t + 0.5 * (lo + hi), trajectory })
        }
    }
}

/// `T̃* = t₀ + arcsin z(t₀)/√III`.
pub fn tstar_bound(prob: &ConcavityProblem) -> f64 {
    prob.t0 + prob.z0().min(1.0).asin() / prob.const_iii().sqrt()
}

/// Outcome of [`comparison_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonOutcome {
    /// `h′ + γ′h > 0` at every sample.
    pub hypothesis_holds: bool,
    /// `h > 0` at every sample after the first.
    pub conclusion_holds: bool,
    /// First sample index where the hypothesis or the conclusion fails.
    pub first_violation: Option<usize>,
}

impl ComparisonOutcome {
    pub fn holds(&self) -> bool {
        self.hypothesis_holds && self.conclusion_holds
    }
}

/// Checks `h′ + γ′h > 0` and `h > 0` on sampled `(t, h, γ)` with central
/// differences in the interior and one-sided differences at the ends.
pub fn comparison_check(t: &[f64], h: &[f64], gamma: &[f64]) -> Result<ComparisonOutcome> {
    let n = t.len();
    if n < 3 {
        return Err(Error::TooFewSamples { got: n, need: 3 });
    }
    if h.len() != n || gamma.len() != n {
        return Err(Error::InvalidParams("sample arrays differ in length".into()));
    }
    if h[0] < 0.0 {
        return Err(Error::InvalidParams(format!("h(t0) = {} must be >= 0", h[0])));
    }
    let diff = |x: &[f64], i: usize| {
        if i == 0 {
            (x[1] - x[0]) / (t[1] - t[0])
        } else if i == n - 1 {
            (x[n - 1] - x[n - 2]) / (t[n - 1] - t[n - 2])
        } else {
            (x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1])
        }
    };
    let mut hypothesis_holds = true;
    let mut conclusion_holds = true;
    let mut first_violation = None;
    for i in 0..n {
        let lhs = diff(h, i) + diff(gamma, i) * h[i];
        let hyp = lhs > 0.0;
        let concl = i == 0 || h[i] > 0.0;
        if !hyp {
            hypothesis_holds = false;
        }
        if !concl {
            conclusion_holds = false;
        }
        if (!hyp || !concl) && first_violation.is_none() {
            first_violation = Some(i);
        }
    }
    Ok(ComparisonOutcome { hypothesis_holds, conclusion_holds, first_violation })
}

/// Draws an admissible problem with `κ ∈ [0.1, 2]`, `A ∈ [0.5, 20]`,
/// `y1 ∈ [−2, 0]`, `y0 ∈ [0.5, 2]`, `t₀ ∈ [0, 1]`; `B` and `T` meet both
/// admissibility inequalities with 10% slack.
pub fn random_problem<R: Rng>(rng: &mut R) -> ConcavityProblem {
    let kappa: f64 = rng.gen_range(0.1..=2.0);
    let a: f64 = rng.gen_range(0.5..=20.0);
    let y1: f64 = rng.gen_range(-2.0..=0.0);
    let y0: f64 = rng.gen_range(0.5..=2.0);
    let t0: f64 = rng.gen_range(0.0..=1.0);
    let geom = PI * PI * (2.0 * kappa + 1.0) / (8.0 * kappa * kappa * a);
    // B·(T−t₀) = 1.1·y0^{−1/κ} and T − t₀ = 1.1·geom·B
    let b = (y0.powf(-1.0 / kappa) / geom).sqrt();
    let span = 1.1 * geom * b;
    ConcavityProblem { kappa, a, b, t0, t_end: t0 + span, y0, y1 }
}

pub fn random_suite(count: usize, seed: u64) -> Vec<ConcavityProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_problem(&mut rng)).collect()
}

/// One CSV row of the oracle output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub problem: ConcavityProblem,
    pub t_vanish: f64,
    pub t_bound: f64,
}

impl OracleRow {
    pub fn evaluate(problem: &ConcavityProblem) -> Result<Self> {
        problem.check_admissible()?;
        let sol = solve_concavity(problem, Forcing::Equality)?;
        Ok(OracleRow { problem: *problem, t_vanish: sol.vanish_time, t_bound: tstar_bound(problem) })
    }

    /// `t_vanish ≤ t_bound ≤ T` up to `tol`.
    pub fn chain_holds(&self, tol: f64) -> bool {
        self.t_vanish <= self.t_bound + tol && self.t_bound <= self.problem.t_end + tol
    }

    pub fn to_csv(&self) -> String {
        let p = &self.problem;
        [p.kappa, p.a, p.b, p.t_end, p.y0, p.y1, self.t_vanish, self.t_bound]
            .iter()
            .map(|x| fmt_f64(*x))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses a row written by [`OracleRow::to_csv`]; `t₀` is not part of the row.
    pub fn from_csv(line: &str, t0: f64) -> Result<Self> {
        let v: Vec<f64> = line
            .trim_end()
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|_| Error::parse(None, format!("bad number `{c}`"))))
            .collect::<Result<_>>()?;
        if v.len() != 8 {
            return Err(Error::parse(None, format!("expected 8 columns, got {}", v.len())));
        }
        Ok(OracleRow {
            problem: ConcavityProblem { kappa: v[0], a: v[1], b: v[2], t0, t_end: v[3], y0: v[4], y1: v[5] },
            t_vanish: v[6],
            t_bound: v[7],
        })
    }
}

/// The explicit problem of a scenario's `oracle.*` keys, or the one implied
/// by the blow-up theorem that applies to its data: `A = 2(ε+2)ρ` or
/// `2(ε+2)δ`, `B = (1 + nȧ(t₀)/a(t₀))‖u₀‖²`, `y = θ^{−κ}` at `t₀`.
pub fn scenario_problem(scenario: &Scenario) -> Result<ConcavityProblem> {
    let o = &scenario.oracle;
    if o.is_explicit() {
        let need = |v: Option<f64>, k: &str| {
            v.ok_or_else(|| Error::parse(None, format!("explicit oracle problem needs `oracle.{k}`")))
        };
        return ConcavityProblem::new(
            need(o.kappa, "kappa")?,
            need(o.a, "A")?,
            need(o.b, "B")?,
            o.t0.unwrap_or(0.0),
            need(o.t_end, "T")?,
            need(o.y0, "y0")?,
            o.y1.unwrap_or(0.0),
        );
    }
    let report = hypotheses::evaluate(scenario)?;
    let (mode, scalar, t_bound) = match report.theorem {
        Theorem::Thm1 | Theorem::Both => (DiagnosticMode::TheoremOne, report.rho, report.t_bound_thm1),
        Theorem::Thm2 => (DiagnosticMode::TheoremTwo, report.delta, report.t_bound_thm2),
        Theorem::None => {
            return Err(Error::NotAdmissible(
                "no blow-up theorem applies, so no concavity problem is implied".into(),
            ))
        }
    };
    let t_bound = t_bound.expect("applicable theorem has a bound");
    let eps = scenario.params.eps;
    let kappa = mode.kappa(eps);
    let t0 = report.t0_used;
    let rate = scenario.scale_factor.eval(t0)?.rate();
    let n = scenario.params.n();
    let b = (1.0 + n * rate) * report.l2_u0;
    let theta0 = report.l2_u0 * (1.0 + n * rate * (t_bound - t0));
    let theta_prime0 = 2.0 * report.re_u0_u1;
    ConcavityProblem::new(
        kappa,
        2.0 * (eps + 2.0) * scalar,
        b,
        t0,
        t_bound,
        theta0.powf(-kappa),
        -kappa * theta_prime0 * theta0.powf(-kappa - 1.0),
    )
}
