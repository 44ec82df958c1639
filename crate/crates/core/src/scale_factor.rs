//! FLRW scale factors `a(t)`.
//!
//! Closed-form families are the power law
//! `a(t) = a0 (1 + n(1+σ)Ht/2)^{2/(n(1+σ))}` and de Sitter `a(t) = a0 e^{Ht}`.
//! Tabulated input supplies `(t, a, ȧ, ä)` knots and is interpolated with
//! cubic Hermite pieces.

use std::path::Path;

use crate::error::{Error, Result};

/// Default number of uniform samples used by sampled interval checks.
pub const DEFAULT_SAMPLES: usize = 1024;

/// Relative tolerance of the sampled sign checks, scaled by the largest
/// sampled magnitude.
pub const SAMPLE_TOL_REL: f64 = 1e-12;

/// Relative tolerance on `ȧ² − äa` for tabulated input, scaled by
/// `max(ȧ², |äa|)`; bounds the interpolation error of `ä`.
pub const TABLE_DEFECT_TOL_REL: f64 = 1e-4;

/// `a`, `ȧ` and `ä` at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub a: f64,
    pub adot: f64,
    pub addot: f64,
}

impl Kinematics {
    /// Hubble rate `ȧ/a`.
    pub fn rate(&self) -> f64 {
        self.adot / self.a
    }

    /// `ȧ² − ä a`.
    pub fn expansion_defect(&self) -> f64 {
        self.adot * self.adot - self.addot * self.a
    }

    /// `(ȧ² − ä a)/a²`, the integrand weight of `G`.
    pub fn defect_rate(&self) -> f64 {
        self.expansion_defect() / (self.a * self.a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub a: f64,
    pub adot: f64,
    pub addot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    PowerLaw { sigma: f64, hubble: f64, a0: f64 },
    DeSitter { hubble: f64, a0: f64 },
    Tabulated { knots: Vec<Knot> },
}

/// A validated scale factor on `[0, T₀)` for spatial dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFactor {
    family: Family,
    dim: usize,
}

/// Result of [`ScaleFactor::min_admissible_t0`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleT0 {
    pub t0: f64,
    pub c_eps: f64,
}

/// `C_ε = 2 / (|m| c (√(ε(ε+4)) − ε))`, defined for `m ≠ 0`.
pub fn c_eps(m: f64, c: f64, eps: f64) -> f64 {
    2.0 / (m.abs() * c * ((eps * (eps + 4.0)).sqrt() - eps))
}

/// Upper limit on `ȧ(t₀)/a(t₀)` imposed on time-shifted data.
pub fn t0_threshold(m: f64, c: f64, eps: f64, n: usize) -> f64 {
    if m == 0.0 {
        f64::INFINITY
    } else {
        m.abs() * c * ((eps * (eps + 4.0)).sqrt() - eps) / (2.0 * n as f64)
    }
}

impl ScaleFactor {
    pub fn power_law(sigma: f64, hubble: f64, a0: f64, n: usize) -> Result<Self> {
        check_dim(n)?;
        if sigma == -1.0 {
            return Err(Error::InvalidScaleFactor(
                "sigma = -1 is the de Sitter family".into(),
            ));
        }
        check_finite_params(&[sigma, hubble])?;
        check_a0(a0)?;
        Ok(ScaleFactor {
            family: Family::PowerLaw { sigma, hubble, a0 },
            dim: n,
        })
    }

    pub fn de_sitter(hubble: f64, a0: f64, n: usize) -> Result<Self> {
        check_dim(n)?;
        check_finite_params(&[hubble])?;
        check_a0(a0)?;
        Ok(ScaleFactor {
            family: Family::DeSitter { hubble, a0 },
            dim: n,
        })
    }

    /// Constant `a ≡ 1`.
    pub fn minkowski(n: usize) -> Result<Self> {
        Self::power_law(0.0, 0.0, 1.0, n)
    }

    /// Knots must start at `t = 0`, be strictly increasing, have `a > 0`,
    /// and carry derivatives consistent with the `a` increments.
    pub fn tabulated(knots: Vec<Knot>, n: usize) -> Result<Self> {
        check_dim(n)?;
        validate_knots(&knots)?;
        Ok(ScaleFactor {
            family: Family::Tabulated { knots },
            dim: n,
        })
    }

    /// Reads a CSV table with header `t,a,adot,addot`.
    pub fn from_table_file(path: &Path, n: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::tabulated(parse_table(&text)?, n)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(σ, H)` for the closed-form families (de Sitter reports `σ = −1`).
    pub fn closed_form(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::PowerLaw { sigma, hubble, .. } => Some((sigma, hubble)),
            Family::DeSitter { hubble, .. } => Some((-1.0, hubble)),
            Family::Tabulated { .. } => None,
        }
    }

    /// `T₀`; `+∞` unless `(1+σ)H < 0` or the table ends.
    pub fn horizon(&self) -> f64 {
        match &self.family {
            Family::PowerLaw { sigma, hubble, .. } => {
                let q = 0.5 * self.dim as f64 * (1.0 + sigma);
                if (1.0 + sigma) * hubble >= 0.0 {
                    f64::INFINITY
                } else {
                    -1.0 / (q * hubble)
                }
            }
            Family::DeSitter { .. } => f64::INFINITY,
            Family::Tabulated { knots } => knots.last().map(|k| k.t).unwrap_or(0.0),
        }
    }

    pub fn eval(&self, t: f64) -> Result<Kinematics> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let horizon = self.horizon();
        if t >= horizon {
            return Err(Error::TimeBeyondHorizon { t, horizon });
        }
        Ok(match &self.family {
            Family::PowerLaw { sigma, hubble, a0 } => {
                let q = 0.5 * self.dim as f64 * (1.0 + sigma);
                let s = 1.0 + q * hubble * t;
                let a = a0 * s.powf(1.0 / q);
                Kinematics {
                    a,
                    adot: a * hubble / s,
                    addot: a * hubble * hubble * (1.0 - q) / (s * s),
                }
            }
            Family::DeSitter { hubble, a0 } => {
                let a = a0 * (hubble * t).exp();
                Kinematics {
                    a,
                    adot: a * hubble,
                    addot: a * hubble * hubble,
                }
            }
            Family::Tabulated { knots } => hermite_eval(knots, t),
        })
    }

    /// `ȧ ≥ 0` and `ȧ² − äa ≥ 0` on `[t_lo, t_hi]`.
    ///
    /// The closed-form families use the exact sign analysis: the conditions
    /// hold iff `H = 0`, or `H > 0` with `σ ≥ −1`.
    pub fn check_monotone_expansion(&self, t_lo: f64, t_hi: f64) -> Result<bool> {
        self.check_monotone_expansion_with(t_lo, t_hi, DEFAULT_SAMPLES)
    }

    pub fn check_monotone_expansion_with(
        &self,
        t_lo: f64,
        t_hi: f64,
        samples: usize,
    ) -> Result<bool> {
        // validates the interval for every family
        self.eval(t_lo)?;
        self.eval(t_hi)?;
        if t_hi < t_lo {
            return Err(Error::InvalidScaleFactor(format!(
                "empty interval [{t_lo}, {t_hi}]"
            )));
        }
        if let Some((sigma, hubble)) = self.closed_form() {
            return Ok(hubble == 0.0 || (hubble > 0.0 && sigma >= -1.0));
        }
        let samples = samples.max(2);
        let mut kin = Vec::with_capacity(samples);
        for i in 0..samples {
            let t = t_lo + (t_hi - t_lo) * i as f64 / (samples - 1) as f64;
            kin.push(self.eval(t)?);
        }
        let max_rate = kin.iter().map(|k| k.adot.abs()).fold(0.0, f64::max);
        let tol_rate = SAMPLE_TOL_REL * max_rate;
        Ok(kin.iter().all(|k| {
            let scale = (k.adot * k.adot).max((k.addot * k.a).abs());
            k.adot >= -tol_rate && k.expansion_defect() >= -TABLE_DEFECT_TOL_REL * scale
        }))
    }

    /// Returns whether `ȧ(t₀)/a(t₀)` is within the threshold, and the threshold.
    pub fn check_t0_condition(&self, t0: f64, m: f64, c: f64, eps: f64) -> Result<(bool, f64)> {
        let kin = self.eval(t0)?;
        let threshold = t0_threshold(m, c, eps, self.dim);
        let ok = threshold.is_infinite() || kin.rate() <= threshold * (1.0 + 1e-12);
        Ok((ok, threshold))
    }

    /// Smallest `t₀ ≥ 0` satisfying [`ScaleFactor::check_t0_condition`] for a
    /// closed-form scale factor with `m ≠ 0`.
    pub fn min_admissible_t0(&self, m: f64, c: f64, eps: f64) -> Result<AdmissibleT0> {
        let (sigma, hubble) = self.closed_form().ok_or_else(|| {
            Error::InvalidScaleFactor("min_admissible_t0 needs a closed-form family".into())
        })?;
        if m == 0.0 {
            return Err(Error::InvalidParams(
                "min_admissible_t0 requires m != 0".into(),
            ));
        }
        let n = self.dim as f64;
        let c_eps = c_eps(m, c, eps);
        if hubble <= 1.0 / (n * c_eps) {
            return Ok(AdmissibleT0 { t0: 0.0, c_eps });
        }
        if sigma <= -1.0 {
            return Err(Error::NoAdmissibleT0);
        }
        let t0 = 2.0 * c_eps / (1.0 + sigma) - 2.0 / (n * (1.0 + sigma) * hubble);
        Ok(AdmissibleT0 { t0, c_eps })
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidScaleFactor("dimension must be positive".into()));
    }
    Ok(())
}

fn check_a0(a0: f64) -> Result<()> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::InvalidScaleFactor(format!("a0 must be > 0, got {a0}")));
    }
    Ok(())
}

fn check_finite_params(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidScaleFactor("non-finite parameter".into()));
    }
    Ok(())
}

fn validate_knots(knots: &[Knot]) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::InvalidTable("need at least two knots".into()));
    }
    if knots[0].t != 0.0 {
        return Err(Error::InvalidTable("first knot must be at t = 0".into()));
    }
    for k in knots {
        if ![k.t, k.a, k.adot, k.addot].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidTable(format!("non-finite knot at t = {}", k.t)));
        }
        if k.a <= 0.0 {
            return Err(Error::InvalidTable(format!("a <= 0 at t = {}", k.t)));
        }
    }
    for w in knots.windows(2) {
        let (k0, k1) = (w[0], w[1]);
        let h = k1.t - k0.t;
        if h <= 0.0 {
            return Err(Error::InvalidTable(format!(
                "knots not strictly increasing at t = {}",
                k1.t
            )));
        }
        // ∫ of the Hermite interpolant of ȧ must reproduce the a increment.
        let da = k1.a - k0.a;
        let integral = 0.5 * h * (k0.adot + k1.adot) + h * h * (k0.addot - k1.addot) / 12.0;
        let scale = da.abs() + 0.5 * h * (k0.adot.abs() + k1.adot.abs()) + 1e-14 * k0.a;
        if (da - integral).abs() > 1e-3 * scale {
            return Err(Error::InvalidTable(format!(
                "adot inconsistent with a on [{}, {}]",
                k0.t, k1.t
            )));
        }
        // Fritsch–Carlson region where the data are locally monotone.
        if da != 0.0 {
            let secant = da / h;
            let alpha = k0.adot / secant;
            let beta = k1.adot / secant;
            if alpha >= 0.0 && beta >= 0.0 && alpha * alpha + beta * beta > 9.0 {
                return Err(Error::InvalidTable(format!(
                    "slopes leave the monotone region on [{}, {}]",
                    k0.t, k1.t
                )));
            }
        }
    }
    Ok(())
}

fn parse_table(text: &str) -> Result<Vec<Knot>> {
    let mut knots = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.first().map(|c| c.eq_ignore_ascii_case("t")) == Some(true) {
            continue;
        }
        if cols.len() != 4 {
            return Err(Error::parse(idx + 1, "expected 4 columns t,a,adot,addot"));
        }
        let mut v = [0.0; 4];
        for (slot, col) in v.iter_mut().zip(&cols) {
            *slot = col
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad number `{col}`")))?;
        }
        knots.push(Knot {
            t: v[0],
            a: v[1],
            adot: v[2],
            addot: v[3],
        });
    }
    Ok(knots)
}

fn hermite_eval(knots: &[Knot], t: f64) -> Kinematics {
    let idx = knots.partition_point(|k| k.t <= t).clamp(1, knots.len() - 1) - 1;
    let (k0, k1) = (knots[idx], knots[idx + 1]);
    let h = k1.t - k0.t;
    let s = (t - k0.t) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let d00 = 6.0 * s2 - 6.0 * s;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = -6.0 * s2 + 6.0 * s;
    let d11 = 3.0 * s2 - 2.0 * s;
    let a = h00 * k0.a + h10 * h * k0.adot + h01 * k1.a + h11 * h * k1.adot;
    let adot = h00 * k0.adot + h10 * h * k0.addot + h01 * k1.adot + h11 * h * k1.addot;
    let addot = (d00 * k0.adot + d10 * h * k0.addot + d01 * k1.adot + d11 * h * k1.addot) / h;
    Kinematics { a, adot, addot }
}
