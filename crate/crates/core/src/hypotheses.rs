//! Hypothesis checks for the two blow-up theorems, the four-quadrant case
//! classification of initial data, the corollary cases for closed-form
//! scale factors, and the certified bounds `T`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::field::{make_profile, Field};
use crate::functionals::{delta_from, rho_from, Norms, PhysicalParams};
use crate::nonlinearity::Nonlinearity;
use crate::scale_factor::{c_eps, ScaleFactor};

/// Relative margin applied to every strict inequality.
pub const STRICT_MARGIN: f64 = 1e-9;

/// Relative slack applied to non-strict inequalities.
pub const NONSTRICT_TOL: f64 = 1e-12;

const EXPANSION_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Applies,
    Fails,
    /// Every hypothesis holds but `T` exceeds the horizon `T₀`.
    HorizonTooShort,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Applies => "applies",
            Outcome::Fails => "fails",
            Outcome::HorizonTooShort => "horizon_too_short",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "applies" => Some(Outcome::Applies),
            "fails" => Some(Outcome::Fails),
            "horizon_too_short" => Some(Outcome::HorizonTooShort),
            _ => None,
        }
    }
}

/// One hypothesis with its slack; `margin ≥ 0` iff it holds up to tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCheck {
    pub outcome: Outcome,
    /// Bound `T` whenever its defining scalar is positive, even if the theorem fails.
    pub t_bound: Option<f64>,
    pub conditions: Vec<Condition>,
}

impl TheoremCheck {
    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn applies(&self) -> bool {
        self.outcome == Outcome::Applies
    }
}

fn strict_positive(value: f64, scale: f64) -> bool {
    value > STRICT_MARGIN * scale.abs()
}

fn nonnegative(value: f64, scale: f64) -> bool {
    value >= -NONSTRICT_TOL * scale.abs()
}

fn expansion_condition(sf: &ScaleFactor, t_lo: f64, t_hi: f64) -> Result<Condition> {
    let t_hi = t_hi.max(t_lo);
    let holds = sf.check_monotone_expansion(t_lo, t_hi)?;
    let mut margin = f64::INFINITY;
    for i in 0..EXPANSION_SAMPLES {
        let t = t_lo + (t_hi - t_lo) * i as f64 / (EXPANSION_SAMPLES - 1) as f64;
        let k = sf.eval(t)?;
        margin = margin.min(k.adot).min(k.expansion_defect());
    }
    Ok(Condition { name: "expansion", margin, holds })
}

/// Upper end of the interval on which the expansion hypotheses are checked.
fn check_window(sf: &ScaleFactor, t0: f64, t_bound: Option<f64>) -> f64 {
    let horizon = sf.horizon();
    let inside = if horizon.is_finite() { horizon * (1.0 - 1e-9) } else { f64::INFINITY };
    let hi = match t_bound {
        Some(t) if t.is_finite() => t.min(inside),
        _ if inside.is_finite() => inside,
        _ => t0 + 1.0,
    };
    hi.max(t0)
}

fn finish(conditions: Vec<Condition>, t_bound: Option<f64>, horizon: f64) -> TheoremCheck {
    let all = conditions.iter().all(|c| c.holds);
    let outcome = match (all, t_bound) {
        (true, Some(t)) if t <= horizon => Outcome::Applies,
        (true, Some(_)) => Outcome::HorizonTooShort,
        _ => Outcome::Fails,
    };
    TheoremCheck { outcome, t_bound, conditions }
}

fn measure(u0: &Field, u1: &Field, nl: &Nonlinearity) -> Result<Norms> {
    Norms::measure(u0, u1, nl)
}

fn nehari_scale(norms: &Norms, a: f64, params: &PhysicalParams) -> f64 {
    let c2 = params.c * params.c;
    c2 * norms.grad / (a * a) + params.mass_sq() * norms.l2_u + c2 * norms.pairing.abs()
}

fn energy_scale(norms: &Norms, a: f64, params: &PhysicalParams) -> f64 {
    let c2 = params.c * params.c;
    0.5 * norms.l2_v + 0.5 * c2 * norms.grad / (a * a) + 0.5 * params.mass_sq() * norms.l2_u
        + c2 * norms.potential.abs()
}

/// `max{1, π²(1 + n·rate)‖u₀‖²/(ε²ρ)}` for `ρ > 0`.
pub fn theorem1_bound(l2_u0: f64, rho: f64, rate: f64, eps: f64, n: f64) -> f64 {
    (PI * PI * (1.0 + n * rate) * l2_u0 / (eps * eps * rho)).max(1.0)
}

/// `t₀ + max[1, 2π²(ε+4)(1 + n·rate)‖u₀‖²/(ε²(ε+2)δ)]` for `δ > 0`.
pub fn theorem2_bound(t0: f64, l2_u0: f64, delta: f64, rate: f64, eps: f64, n: f64) -> f64 {
    let core = 2.0 * PI * PI * (eps + 4.0) * (1.0 + n * rate) * l2_u0 / (eps * eps * (eps + 2.0) * delta);
    t0 + core.max(1.0)
}

/// Hypotheses of the `t₀ = 0` theorem:
/// `ρ > 0`, `Re(u₀,u₁) ≥ 0`, `ȧ ≥ 0`, `ȧ² − äa ≥ 0`, and `T ≤ T₀` where
/// `T = max{1, π²(1 + nȧ(0)/a(0))‖u₀‖²/(ε²ρ)}`.
pub fn check_theorem1(
    u0: &Field,
    u1: &Field,
    sf: &ScaleFactor,
    params: &PhysicalParams,
    nl: &Nonlinearity,
) -> Result<TheoremCheck> {
    let kin = sf.eval(0.0)?;
    let norms = measure(u0, u1, nl)?;
    let eps = params.eps;
    let n = params.n();
    let rho = rho_from(&norms, &kin, params);
    let scale = energy_scale(&norms, kin.a, params);
    let rho_ok = strict_positive(rho, scale);
    let t_bound = (rho > 0.0).then(|| theorem1_bound(norms.l2_u, rho, kin.rate(), eps, n));
    let re_scale = (norms.l2_u * norms.l2_v).sqrt();
    let conditions = vec![
        Condition { name: "rho", margin: rho, holds: rho_ok },
        Condition { name: "re_u0_u1", margin: norms.re_uv, holds: nonnegative(norms.re_uv, re_scale) },
        expansion_condition(sf, 0.0, check_window(sf, 0.0, t_bound))?,
        Condition {
            name: "horizon",
            margin: t_bound.map(|t| sf.horizon() - t).unwrap_or(f64::NAN),
            holds: true,
        },
    ];
    Ok(finish(conditions, t_bound, sf.horizon()))
}

/// Hypotheses of the time-shifted theorem at `t₀`:
/// `δ > 0`, `I(u₀) < 0`, `Re(u₀,u₁) ≥ 0`, `ȧ ≥ 0`, `ȧ² − äa ≥ 0`,
/// the `ȧ(t₀)/a(t₀)` threshold, and `T ≤ T₀` where
/// `T = t₀ + max[1, 2π²(ε+4)(1 + nȧ(t₀)/a(t₀))‖u₀‖²/(ε²(ε+2)δ)]`.
pub fn check_theorem2(
    u0: &Field,
    u1: &Field,
    t0: f64,
    sf: &ScaleFactor,
    params: &PhysicalParams,
    nl: &Nonlinearity,
) -> Result<TheoremCheck> {
    let kin = sf.eval(t0)?;
    let norms = measure(u0, u1, nl)?;
    let eps = params.eps;
    let n = params.n();
    let delta = delta_from(&norms, &kin, params);
    let scale = energy_scale(&norms, kin.a, params);
    let nehari = norms.nehari(&kin, params);
    let t_bound = (delta > 0.0).then(|| theorem2_bound(t0, norms.l2_u, delta, kin.rate(), eps, n));
    let (t0_ok, threshold) = sf.check_t0_condition(t0, params.m, params.c, eps)?;
    let re_scale = (norms.l2_u * norms.l2_v).sqrt();
    let conditions = vec![
        Condition { name: "delta", margin: delta, holds: strict_positive(delta, scale) },
        Condition {
            name: "nehari",
            margin: -nehari,
            holds: strict_positive(-nehari, nehari_scale(&norms, kin.a, params)),
        },
        Condition { name: "re_u0_u1", margin: norms.re_uv, holds: nonnegative(norms.re_uv, re_scale) },
        expansion_condition(sf, t0, check_window(sf, t0, t_bound))?,
        Condition { name: "t0_condition", margin: threshold - kin.rate(), holds: t0_ok },
        Condition {
            name: "horizon",
            margin: t_bound.map(|t| sf.horizon() - t).unwrap_or(f64::NAN),
            holds: true,
        },
    ];
    Ok(finish(conditions, t_bound, sf.horizon()))
}

/// Quadrant of the initial data among the four high-energy cases, given `I(u₀) < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseLabel {
    I,
    II,
    III,
    /// Not covered by either theorem.
    IV,
    /// `I(u₀) < 0` or `Re(u₀,u₁) ≥ 0` fails, so the table does not apply.
    None,
}

impl CaseLabel {
    pub fn name(&self) -> &'static str {
        match self {
            CaseLabel::I => "I",
            CaseLabel::II => "II",
            CaseLabel::III => "III",
            CaseLabel::IV => "IV",
            CaseLabel::None => "none",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "I" => Some(CaseLabel::I),
            "II" => Some(CaseLabel::II),
            "III" => Some(CaseLabel::III),
            "IV" => Some(CaseLabel::IV),
            "none" => Some(CaseLabel::None),
            _ => None,
        }
    }

    pub fn is_open(&self) -> bool {
        *self == CaseLabel::IV
    }
}

/// Splits by `k̃‖u₀‖² > E(t₀)` and `k̃ Re(u₀,u₁) > E(t₀)` with
/// `k̃ = m̃²c̃²ε/(2(ε+2))`.
pub fn classify_table1(
    u0: &Field,
    u1: &Field,
    t0: f64,
    sf: &ScaleFactor,
    params: &PhysicalParams,
    nl: &Nonlinearity,
) -> Result<CaseLabel> {
    let kin = sf.eval(t0)?;
    let norms = measure(u0, u1, nl)?;
    Ok(classify_norms(&norms, &kin, params))
}

fn classify_norms(
    norms: &Norms,
    kin: &crate::scale_factor::Kinematics,
    params: &PhysicalParams,
) -> CaseLabel {
    if !(norms.nehari(kin, params) < 0.0 && norms.re_uv >= 0.0) {
        return CaseLabel::None;
    }
    let eps = params.eps;
    let k = (params.m_tilde() * params.c_tilde()).powi(2) * eps / (2.0 * (eps + 2.0));
    let e0 = norms.energy(kin, params);
    match (k * norms.l2_u > e0, k * norms.re_uv > e0) {
        (true, false) => CaseLabel::I,
        (true, true) => CaseLabel::II,
        (false, true) => CaseLabel::III,
        (false, false) => CaseLabel::IV,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorollaryCase {
    I,
    II,
    III,
    IV,
    NotApplicable,
}

impl CorollaryCase {
    pub fn name(&self) -> &'static str {
        match self {
            CorollaryCase::I => "i",
            CorollaryCase::II => "ii",
            CorollaryCase::III => "iii",
            CorollaryCase::IV => "iv",
            CorollaryCase::NotApplicable => "n/a",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "i" => Some(CorollaryCase::I),
            "ii" => Some(CorollaryCase::II),
            "iii" => Some(CorollaryCase::III),
            "iv" => Some(CorollaryCase::IV),
            "n/a" => Some(CorollaryCase::NotApplicable),
            _ => None,
        }
    }
}

/// Corollary cases for the `t₀ = 0` theorem and for the time-shifted one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorollaryCases {
    pub thm1: CorollaryCase,
    pub thm2: CorollaryCase,
}

/// Maps `(H, σ, m, t₀, C_ε)` of a closed-form scale factor to corollary cases.
pub fn check_corollaries(sf: &ScaleFactor, t0: f64, params: &PhysicalParams) -> CorollaryCases {
    let na = CorollaryCases { thm1: CorollaryCase::NotApplicable, thm2: CorollaryCase::NotApplicable };
    let Some((sigma, hubble)) = sf.closed_form() else {
        return na;
    };
    let at_zero = t0 == 0.0;
    let thm1 = if !at_zero {
        CorollaryCase::NotApplicable
    } else if hubble == 0.0 {
        CorollaryCase::I
    } else if hubble > 0.0 && sigma >= -1.0 {
        CorollaryCase::II
    } else {
        CorollaryCase::NotApplicable
    };
    let n = params.n();
    let thm2 = if hubble == 0.0 {
        if at_zero { CorollaryCase::I } else { CorollaryCase::NotApplicable }
    } else if params.m == 0.0 {
        if hubble > 0.0 && sigma >= -1.0 && at_zero {
            CorollaryCase::II
        } else {
            CorollaryCase::NotApplicable
        }
    } else {
        let limit = 1.0 / (n * c_eps(params.m, params.c, params.eps));
        if hubble > 0.0 && hubble <= limit && sigma >= -1.0 && at_zero {
            CorollaryCase::III
        } else if hubble > limit && sigma > -1.0 {
            let c = c_eps(params.m, params.c, params.eps);
            let t0_min = 2.0 * c / (1.0 + sigma) - 2.0 / (n * (1.0 + sigma) * hubble);
            if t0 >= t0_min * (1.0 - STRICT_MARGIN) {
                CorollaryCase::IV
            } else {
                CorollaryCase::NotApplicable
            }
        } else {
            CorollaryCase::NotApplicable
        }
    };
    CorollaryCases { thm1, thm2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    Thm1,
    Thm2,
    Both,
    None,
}

impl Theorem {
    pub fn name(&self) -> &'static str {
        match self {
            Theorem::Thm1 => "Thm1",
            Theorem::Thm2 => "Thm2",
            Theorem::Both => "both",
            Theorem::None => "none",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "Thm1" => Some(Theorem::Thm1),
            "Thm2" => Some(Theorem::Thm2),
            "both" => Some(Theorem::Both),
            "none" => Some(Theorem::None),
            _ => None,
        }
    }
}

/// Per-condition slack; NaN where a condition does not apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    pub rho: f64,
    pub delta: f64,
    pub nehari: f64,
    pub re_u0_u1: f64,
    pub expansion: f64,
    pub t0_condition: f64,
    pub horizon_thm1: f64,
    pub horizon_thm2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub name: String,
    pub config_hash: String,
    pub theorem: Theorem,
    pub case_label: CaseLabel,
    pub thm1_outcome: Outcome,
    pub thm2_outcome: Outcome,
    pub t0_used: f64,
    pub horizon: f64,
    pub rho: f64,
    pub delta: f64,
    pub i_u0: f64,
    pub re_u0_u1: f64,
    pub e_t0: f64,
    pub l2_u0: f64,
    /// Present iff some theorem applies; the smaller bound when both do.
    pub t_bound: Option<f64>,
    pub t_bound_thm1: Option<f64>,
    pub t_bound_thm2: Option<f64>,
    pub corollary_thm1_case: CorollaryCase,
    pub corollary_thm2_case: CorollaryCase,
    pub margins: Margins,
}

impl HypothesisReport {
    /// 0 if a theorem applies, 4 if only the horizon fails, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.theorem != Theorem::None {
            0
        } else if self.thm1_outcome == Outcome::HorizonTooShort
            || self.thm2_outcome == Outcome::HorizonTooShort
        {
            4
        } else {
            3
        }
    }

    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "none".to_string());
        let m = &self.margins;
        vec![
            ("name", self.name.clone()),
            ("config_hash", self.config_hash.clone()),
            ("theorem", self.theorem.name().to_string()),
            ("case_label", self.case_label.name().to_string()),
            ("thm1_outcome", self.thm1_outcome.name().to_string()),
            ("thm2_outcome", self.thm2_outcome.name().to_string()),
            ("t0_used", fmt_f64(self.t0_used)),
            ("horizon", fmt_f64(self.horizon)),
            ("rho", fmt_f64(self.rho)),
            ("delta", fmt_f64(self.delta)),
            ("I_u0", fmt_f64(self.i_u0)),
            ("re_u0_u1", fmt_f64(self.re_u0_u1)),
            ("E_t0", fmt_f64(self.e_t0)),
            ("L_u0", fmt_f64(self.l2_u0)),
            ("T_bound", opt(self.t_bound)),
            ("T_bound_thm1", opt(self.t_bound_thm1)),
            ("T_bound_thm2", opt(self.t_bound_thm2)),
            ("corollary_thm1_case", self.corollary_thm1_case.name().to_string()),
            ("corollary_thm2_case", self.corollary_thm2_case.name().to_string()),
            ("margin_rho", fmt_f64(m.rho)),
            ("margin_delta", fmt_f64(m.delta)),
            ("margin_nehari", fmt_f64(m.nehari)),
            ("margin_re_u0_u1", fmt_f64(m.re_u0_u1)),
            ("margin_expansion", fmt_f64(m.expansion)),
            ("margin_t0_condition", fmt_f64(m.t0_condition)),
            ("margin_horizon_thm1", fmt_f64(m.horizon_thm1)),
            ("margin_horizon_thm2", fmt_f64(m.horizon_thm2)),
        ]
    }

    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        self.fields().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn csv_header() -> String {
        let probe = HypothesisReport::placeholder();
        probe.fields().into_iter().map(|(k, _)| k).collect::<Vec<_>>().join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(_, v)| v.replace(',', ";"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key=value, got `{line}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_map(&map)
    }

    pub fn from_csv_row(header: &str, row: &str) -> Result<Self> {
        let keys: Vec<&str> = header.trim_end().split(',').collect();
        let values: Vec<&str> = row.trim_end().split(',').collect();
        if keys.len() != values.len() {
            return Err(Error::parse(None, "CSV header and row lengths differ"));
        }
        let map = keys
            .into_iter()
            .zip(values)
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self::from_map(&map)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            map.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::parse(None, format!("report is missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| Error::parse(None, format!("`{k}` is not a number")))
        };
        let opt = |k: &str| -> Result<Option<f64>> {
            match get(k)? {
                "none" => Ok(None),
                _ => num(k).map(Some),
            }
        };
        let bad = |k: &str| Error::parse(None, format!("bad value for `{k}`"));
        Ok(HypothesisReport {
            name: get("name")?.to_string(),
            config_hash: get("config_hash")?.to_string(),
            theorem: Theorem::parse(get("theorem")?).ok_or_else(|| bad("theorem"))?,
            case_label: CaseLabel::parse(get("case_label")?).ok_or_else(|| bad("case_label"))?,
            thm1_outcome: Outcome::parse(get("thm1_outcome")?).ok_or_else(|| bad("thm1_outcome"))?,
            thm2_outcome: Outcome::parse(get("thm2_outcome")?).ok_or_else(|| bad("thm2_outcome"))?,
            t0_used: num("t0_used")?,
            horizon: num("horizon")?,
            rho: num("rho")?,
            delta: num("delta")?,
            i_u0: num("I_u0")?,
            re_u0_u1: num("re_u0_u1")?,
            e_t0: num("E_t0")?,
            l2_u0: num("L_u0")?,
            t_bound: opt("T_bound")?,
            t_bound_thm1: opt("T_bound_thm1")?,
            t_bound_thm2: opt("T_bound_thm2")?,
            corollary_thm1_case: CorollaryCase::parse(get("corollary_thm1_case")?)
                .ok_or_else(|| bad("corollary_thm1_case"))?,
            corollary_thm2_case: CorollaryCase::parse(get("corollary_thm2_case")?)
                .ok_or_else(|| bad("corollary_thm2_case"))?,
            margins: Margins {
                rho: num("margin_rho")?,
                delta: num("margin_delta")?,
                nehari: num("margin_nehari")?,
                re_u0_u1: num("margin_re_u0_u1")?,
                expansion: num("margin_expansion")?,
                t0_condition: num("margin_t0_condition")?,
                horizon_thm1: num("margin_horizon_thm1")?,
                horizon_thm2: num("margin_horizon_thm2")?,
            },
        })
    }

    fn placeholder() -> Self {
        HypothesisReport {
            name: String::new(),
            config_hash: String::new(),
            theorem: Theorem::None,
            case_label: CaseLabel::None,
            thm1_outcome: Outcome::Fails,
            thm2_outcome: Outcome::Fails,
            t0_used: 0.0,
            horizon: 0.0,
            rho: 0.0,
            delta: 0.0,
            i_u0: 0.0,
            re_u0_u1: 0.0,
            e_t0: 0.0,
            l2_u0: 0.0,
            t_bound: None,
            t_bound_thm1: None,
            t_bound_thm2: None,
            corollary_thm1_case: CorollaryCase::NotApplicable,
            corollary_thm2_case: CorollaryCase::NotApplicable,
            margins: Margins {
                rho: 0.0,
                delta: 0.0,
                nehari: 0.0,
                re_u0_u1: 0.0,
                expansion: 0.0,
                t0_condition: 0.0,
                horizon_thm1: 0.0,
                horizon_thm2: 0.0,
            },
        }
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_kv())
    }
}

/// Shortest round-trip decimal text.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

/// Evaluates every hypothesis for a scenario.
pub fn evaluate(scenario: &Scenario) -> Result<HypothesisReport> {
    let (u0, u1) = scenario.initial_data()?;
    evaluate_fields(scenario, &u0, &u1)
}

pub(crate) fn evaluate_fields(scenario: &Scenario, u0: &Field, u1: &Field) -> Result<HypothesisReport> {
    let sf = &scenario.scale_factor;
    let params = &scenario.params;
    let nl = &scenario.nonlinearity;
    let t0 = scenario.run.t0;

    let thm1 = if t0 == 0.0 {
        check_theorem1(u0, u1, sf, params, nl)?
    } else {
        TheoremCheck {
            outcome: Outcome::Fails,
            t_bound: None,
            conditions: vec![Condition { name: "t0_zero", margin: -t0, holds: false }],
        }
    };
    let thm2 = check_theorem2(u0, u1, t0, sf, params, nl)?;

    let kin = sf.eval(t0)?;
    let norms = Norms::measure(u0, u1, nl)?;
    let kin0 = sf.eval(0.0)?;
    let rho = rho_from(&norms, &kin0, params);
    let delta = delta_from(&norms, &kin, params);

    let theorem = match (thm1.applies(), thm2.applies()) {
        (true, true) => Theorem::Both,
        (true, false) => Theorem::Thm1,
        (false, true) => Theorem::Thm2,
        (false, false) => Theorem::None,
    };
    let t_bound = match theorem {
        Theorem::Both => Some(thm1.t_bound.unwrap().min(thm2.t_bound.unwrap())),
        Theorem::Thm1 => thm1.t_bound,
        Theorem::Thm2 => thm2.t_bound,
        Theorem::None => None,
    };
    let margin = |check: &TheoremCheck, name: &str| {
        check.condition(name).map(|c| c.margin).unwrap_or(f64::NAN)
    };
    let cor = check_corollaries(sf, t0, params);
    Ok(HypothesisReport {
        name: scenario.name.clone(),
        config_hash: scenario.config_hash(),
        theorem,
        case_label: classify_norms(&norms, &kin, params),
        thm1_outcome: thm1.outcome,
        thm2_outcome: thm2.outcome,
        t0_used: t0,
        horizon: sf.horizon(),
        rho,
        delta,
        i_u0: norms.nehari(&kin, params),
        re_u0_u1: norms.re_uv,
        e_t0: norms.energy(&kin, params),
        l2_u0: norms.l2_u,
        t_bound,
        t_bound_thm1: thm1.t_bound,
        t_bound_thm2: thm2.t_bound,
        corollary_thm1_case: cor.thm1,
        corollary_thm2_case: cor.thm2,
        margins: Margins {
            rho: margin(&thm1, "rho"),
            delta: margin(&thm2, "delta"),
            nehari: margin(&thm2, "nehari"),
            re_u0_u1: norms.re_uv,
            expansion: margin(&thm2, "expansion"),
            t0_condition: margin(&thm2, "t0_condition"),
            horizon_thm1: margin(&thm1, "horizon"),
            horizon_thm2: margin(&thm2, "horizon"),
        },
    })
}

/// Scalar to push above a margin by scaling the amplitude of `u₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationTarget {
    Rho { margin: f64 },
    Delta { margin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub amplitude: f64,
    pub value: f64,
}

const CALIBRATION_DOUBLINGS: usize = 60;
const CALIBRATION_BISECTIONS: usize = 60;

/// Smallest amplitude (to bisection accuracy) of `data0` at or above the
/// configured one for which the target scalar exceeds its margin.
pub fn calibrate_amplitude(scenario: &Scenario, target: CalibrationTarget) -> Result<Calibration> {
    let sf = &scenario.scale_factor;
    let params = &scenario.params;
    let nl = &scenario.nonlinearity;
    let t0 = scenario.run.t0;
    let u1 = make_profile(&scenario.grid, &scenario.data1)?;
    let value_at = |amplitude: f64| -> Result<f64> {
        let mut spec = scenario.data0.clone();
        spec.amplitude = amplitude;
        let u0 = make_profile(&scenario.grid, &spec)?;
        let norms = Norms::measure(&u0, &u1, nl)?;
        Ok(match target {
            CalibrationTarget::Rho { .. } => rho_from(&norms, &sf.eval(0.0)?, params),
            CalibrationTarget::Delta { .. } => delta_from(&norms, &sf.eval(t0)?, params),
        })
    };
    let margin = match target {
        CalibrationTarget::Rho { margin } | CalibrationTarget::Delta { margin } => margin,
    };
    let ok = |v: f64| v.is_finite() && v > margin;

    let base = scenario.data0.amplitude;
    let v = value_at(base)?;
    if ok(v) {
        return Ok(Calibration { amplitude: base, value: v });
    }
    let mut lo = base;
    let mut hi = if base == 0.0 { 1e-3 } else { base };
    let mut found = None;
    for _ in 0..CALIBRATION_DOUBLINGS {
        hi *= 2.0;
        let v = value_at(hi)?;
        if ok(v) {
            found = Some(v);
            break;
        }
        lo = hi;
    }
    let Some(mut v_hi) = found else {
        return Err(Error::CalibrationFailed(format!(
            "target stays at or below {margin} up to amplitude {hi:e}"
        )));
    };
    for _ in 0..CALIBRATION_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let v = value_at(mid)?;
        if ok(v) {
            hi = mid;
            v_hi = v;
        } else {
            lo = mid;
        }
    }
    Ok(Calibration { amplitude: hi, value: v_hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn torus() -> Grid {
        Grid::new(1, 64, PI).unwrap()
    }

    #[test]
    fn theorem1_minkowski_massless() {
        let g = torus();
        let sf = ScaleFactor::minkowski(1).unwrap();
        let p = PhysicalParams::new(0.0, 1.0, 1.0, 1).unwrap();
        let nl = Nonlinearity::real_abs(2.0, 1.0, 1.0).unwrap();
        let chk = check_theorem1(&Field::constant(g, c(3.0)), &Field::zeros(g), &sf, &p, &nl).unwrap();
        assert_eq!(chk.outcome, Outcome::Applies);
        assert_relative_eq!(chk.t_bound.unwrap(), PI * PI, max_relative = 1e-13);

        let small = check_theorem1(&Field::constant(g, c(0.1)), &Field::zeros(g), &sf, &p, &nl).unwrap();
        // m = 0 makes rho = -E > 0 for any focusing constant; use m = 1 for the small-data case
        assert_eq!(small.outcome, Outcome::Applies);
        let p1 = PhysicalParams::new(1.0, 1.0, 1.0, 1).unwrap();
        let small = check_theorem1(&Field::constant(g, c(0.1)), &Field::zeros(g), &sf, &p1, &nl).unwrap();
        assert_eq!(small.outcome, Outcome::Fails);
    }

    #[test]
    fn theorem1_rejects_big_rip() {
        let g = torus();
        let sf = ScaleFactor::power_law(-3.0, 1.0, 1.0, 1).unwrap();
        let p = PhysicalParams::new(0.0, 1.0, 1.0, 1).unwrap();
        let nl = Nonlinearity::real_abs(2.0, 1.0, 1.0).unwrap();
        let chk = check_theorem1(&Field::constant(g, c(3.0)), &Field::zeros(g), &sf, &p, &nl).unwrap();
        assert_eq!(chk.outcome, Outcome::Fails);
        assert!(!chk.condition("expansion").unwrap().holds);
    }

    #[test]
    fn theorem2_de_sitter_bound() {
        let g = torus();
        let sf = ScaleFactor::de_sitter(0.5, 1.0, 1).unwrap();
        let p = PhysicalParams::new(1.0, 1.0, 1.0, 1).unwrap();
        let nl = Nonlinearity::gauge_invariant(2.0, c(1.0), 1.0).unwrap();
        let chk = check_theorem2(
            &Field::constant(g, c(6.0)),
            &Field::constant(g, c(1.0)),
            0.0,
            &sf,
            &p,
            &nl,
        )
        .unwrap();
        assert_eq!(chk.outcome, Outcome::Applies);
        // 2π²·5·(1 + 0.5)·72π / (1·3·109π)
        assert_relative_eq!(chk.t_bound.unwrap(), 360.0 * PI * PI / 109.0, max_relative = 1e-13);
    }

    #[test]
    fn theorem2_massless_threshold_is_infinite() {
        let g = torus();
        let sf = ScaleFactor::de_sitter(50.0, 1.0, 1).unwrap();
        let p = PhysicalParams::new(0.0, 1.0, 1.0, 1).unwrap();
        let nl = Nonlinearity::gauge_invariant(2.0, c(1.0), 1.0).unwrap();
        let chk = check_theorem2(&Field::constant(g, c(6.0)), &Field::constant(g, c(1.0)), 0.0, &sf, &p, &nl)
            .unwrap();
        assert!(chk.condition("t0_condition").unwrap().holds);
    }

    #[test]
    fn theorem2_needs_velocity_for_massive_data() {
        let g = torus();
        let sf = ScaleFactor::minkowski(1).unwrap();
        let p = PhysicalParams::new(1.0, 1.0, 1.0, 1).unwrap();
        let nl = Nonlinearity::gauge_invariant(2.0, c(1.0), 1.0).unwrap();
        // positive energy at small amplitude
        let chk = check_theorem2(&Field::constant(g, c(0.5)), &Field::zeros(g), 0.0, &sf, &p, &nl).unwrap();
        assert_eq!(chk.outcome, Outcome::Fails);
        assert!(chk.t_bound.is_none());
    }

    #[test]
    fn corollary_cases() {
        let p = PhysicalParams::new(1.0, 1.0, 1.0, 1).unwrap();
        let mink = ScaleFactor::minkowski(1).unwrap();
        assert_eq!(check_corollaries(&mink, 0.0, &p).thm1, CorollaryCase::I);
        assert_eq!(check_corollaries(&mink, 0.0, &p).thm2, CorollaryCase::I);
        let fast = ScaleFactor::power_law(0.0, 2.0, 1.0, 1).unwrap();
        let t0 = fast.min_admissible_t0(1.0, 1.0, 1.0).unwrap().t0;
        assert_relative_eq!(t0, 5f64.sqrt(), max_relative = 1e-14);
        assert_eq!(check_corollaries(&fast, t0, &p).thm2, CorollaryCase::IV);
        assert_eq!(check_corollaries(&fast, 0.0, &p).thm2, CorollaryCase::NotApplicable);
        let ds = ScaleFactor::de_sitter(2.0, 1.0, 1).unwrap();
        assert_eq!(check_corollaries(&ds, 1.0, &p).thm2, CorollaryCase::NotApplicable);
        let slow = ScaleFactor::de_sitter(0.5, 1.0, 1).unwrap();
        assert_eq!(check_corollaries(&slow, 0.0, &p).thm2, CorollaryCase::III);
        let p0 = PhysicalParams::new(0.0, 1.0, 1.0, 1).unwrap();
        assert_eq!(check_corollaries(&ds, 0.0, &p0).thm2, CorollaryCase::II);
        assert_eq!(check_corollaries(&ds, 0.0, &p0).thm1, CorollaryCase::II);
    }

    #[test]
    fn table_quadrants() {
        let g = torus();
        let sf = ScaleFactor::minkowski(1).unwrap();
        let p = PhysicalParams::new(1.0, 1.0, 1.0, 1).unwrap();
        let nl = Nonlinearity::gauge_invariant(2.0, c(1.0), 1.0).unwrap();
        let case = |u: f64, v: f64| {
            classify_table1(&Field::constant(g, c(u)), &Field::constant(g, c(v)), 0.0, &sf, &p, &nl).unwrap()
        };
        // k̃ = 1/6; E = 2π(v²/2 + u²/2 − u³/3)
        assert_eq!(case(1.4, 0.0), CaseLabel::I);
        assert_eq!(case(6.0, 1.0), CaseLabel::II);
        assert_eq!(case(3.0, 3.5), CaseLabel::III);
        assert_eq!(case(1.4, 1.0), CaseLabel::IV);
        assert_eq!(case(0.1, 0.0), CaseLabel::None);
        assert_eq!(case(3.0, -1.0), CaseLabel::None);
    }
}
