//! Power nonlinearities `f` with primitives `F` satisfying
//! `Re{f(u) ū} ≥ (2+ε) F(u)` and `∂ₜF(u) = Re{f(u) ∂ₜū}`.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Imaginary parts below this (relative to `max(1, |u|)`) count as zero for
/// real-only nonlinearities.
pub const REAL_TOL: f64 = 1e-13;

/// Step and relative tolerance of the chain-rule finite-difference check.
pub const CHAIN_RULE_STEP: f64 = 1e-5;
pub const CHAIN_RULE_TOL: f64 = 1e-6;

/// Relative tolerance of the structural inequality check.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `f(u) = λ |u|^{p−1} u`
    GaugeInvariantPower { p: f64, lambda: Complex64 },
    /// `f(u) = sign · |u|^p`, real `u` only
    RealAbsPower { p: f64, sign: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    GaugeInvariant,
    RealAbs,
}

/// An interval of admissible ε, possibly degenerate or unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsRange {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
}

impl EpsRange {
    pub fn contains(&self, eps: f64) -> bool {
        let above = if self.lo_open {
            eps > self.lo
        } else {
            eps >= self.lo - 1e-12 * self.lo.abs()
        };
        above && eps <= self.hi + 1e-12 * self.hi.abs()
    }
}

impl fmt::Display for EpsRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            return write!(f, "{{{}}}", self.lo);
        }
        let open = if self.lo_open { '(' } else { '[' };
        if self.hi.is_infinite() {
            write!(f, "{open}{}, inf)", self.lo)
        } else {
            write!(f, "{open}{}, {}]", self.lo, self.hi)
        }
    }
}

/// Admissible ε for a family, `p`, and the sign of a real λ
/// (ignored for `RealAbs`; zero means "complex λ, unconstrained").
pub fn admissible_eps_range(kind: FamilyKind, p: f64, lambda_sign: f64) -> EpsRange {
    match kind {
        FamilyKind::RealAbs => EpsRange {
            lo: p - 1.0,
            hi: p - 1.0,
            lo_open: false,
        },
        FamilyKind::GaugeInvariant if lambda_sign > 0.0 => EpsRange {
            lo: 0.0,
            hi: p - 1.0,
            lo_open: true,
        },
        FamilyKind::GaugeInvariant if lambda_sign < 0.0 => EpsRange {
            lo: p - 1.0,
            hi: f64::INFINITY,
            lo_open: false,
        },
        FamilyKind::GaugeInvariant => EpsRange {
            lo: 0.0,
            hi: f64::INFINITY,
            lo_open: true,
        },
    }
}

/// Energy-subcritical window for `p`: unbounded for `n ≤ 2`, `p < 1 + 2/(n−2)` otherwise.
pub fn within_subcritical_window(p: f64, n: usize) -> bool {
    p > 1.0 && (n <= 2 || p < 1.0 + 2.0 / (n as f64 - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinearity {
    family: Family,
    eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub samples: usize,
    /// Largest `max(0, (2+ε)F − Re{fū}) / max(|Re{fū}|, |(2+ε)F|)`; `None`
    /// when no real potential exists.
    pub max_inequality_violation: Option<f64>,
    /// Largest relative error of the chain rule along random straight paths.
    pub max_chain_rule_error: Option<f64>,
}

impl StructureReport {
    pub fn inequality_holds(&self) -> bool {
        self.max_inequality_violation
            .is_some_and(|v| v <= STRUCTURE_TOL)
    }

    pub fn chain_rule_holds(&self) -> bool {
        self.max_chain_rule_error.is_some_and(|v| v <= CHAIN_RULE_TOL)
    }
}

impl Nonlinearity {
    pub fn gauge_invariant(p: f64, lambda: Complex64, eps: f64) -> Result<Self> {
        check_p_eps(p, eps)?;
        if lambda == Complex64::new(0.0, 0.0) || !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(Error::InvalidNonlinearity(
                "lambda must be finite and nonzero".into(),
            ));
        }
        let sign = if lambda.im == 0.0 { lambda.re.signum() } else { 0.0 };
        let range = admissible_eps_range(FamilyKind::GaugeInvariant, p, sign);
        if !range.contains(eps) {
            return Err(Error::EpsOutOfRange {
                eps,
                range: range.to_string(),
            });
        }
        Ok(Nonlinearity {
            family: Family::GaugeInvariantPower { p, lambda },
            eps,
        })
    }

    pub fn real_abs(p: f64, sign: f64, eps: f64) -> Result<Self> {
        check_p_eps(p, eps)?;
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::InvalidNonlinearity(format!(
                "sign must be +1 or -1, got {sign}"
            )));
        }
        let range = admissible_eps_range(FamilyKind::RealAbs, p, sign);
        if !range.contains(eps) {
            return Err(Error::EpsOutOfRange {
                eps,
                range: range.to_string(),
            });
        }
        Ok(Nonlinearity {
            family: Family::RealAbsPower { p, sign },
            eps,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn p(&self) -> f64 {
        match self.family {
            Family::GaugeInvariantPower { p, .. } | Family::RealAbsPower { p, .. } => p,
        }
    }

    pub fn real_only(&self) -> bool {
        matches!(self.family, Family::RealAbsPower { .. })
    }

    pub fn is_gauge_invariant(&self) -> bool {
        matches!(self.family, Family::GaugeInvariantPower { .. })
    }

    /// Whether a real potential `F` exists (non-real λ has none).
    pub fn admits_potential(&self) -> bool {
        match self.family {
            Family::GaugeInvariantPower { lambda, .. } => lambda.im == 0.0,
            Family::RealAbsPower { .. } => true,
        }
    }

    /// Sign of `F` for large arguments: `+1` focusing, `−1` defocusing.
    pub fn focusing_sign(&self) -> f64 {
        match self.family {
            Family::GaugeInvariantPower { lambda, .. } => lambda.re.signum(),
            Family::RealAbsPower { sign, .. } => sign,
        }
    }

    pub(crate) fn check_real(&self, u: Complex64) -> Result<()> {
        if self.real_only() && u.im.abs() > REAL_TOL * u.re.abs().max(1.0) {
            return Err(Error::ComplexInputToRealNonlinearity);
        }
        Ok(())
    }

    pub(crate) fn check_potential(&self) -> Result<()> {
        if self.admits_potential() {
            Ok(())
        } else {
            Err(Error::NonRealLambdaNoPotential)
        }
    }

    /// `f(u)`.
    pub fn f(&self, u: Complex64) -> Result<Complex64> {
        self.check_real(u)?;
        Ok(self.f_unchecked(u))
    }

    /// `F(u)`.
    pub fn potential(&self, u: Complex64) -> Result<f64> {
        self.check_real(u)?;
        self.check_potential()?;
        Ok(self.potential_unchecked(u))
    }

    #[inline]
    pub(crate) fn f_unchecked(&self, u: Complex64) -> Complex64 {
        match self.family {
            Family::GaugeInvariantPower { p, lambda } => {
                let r = u.norm();
                if r == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    lambda * u * r.powf(p - 1.0)
                }
            }
            Family::RealAbsPower { p, sign } => Complex64::new(sign * u.re.abs().powf(p), 0.0),
        }
    }

    #[inline]
    pub(crate) fn potential_unchecked(&self, u: Complex64) -> f64 {
        match self.family {
            Family::GaugeInvariantPower { p, lambda } => {
                lambda.re * u.norm().powf(p + 1.0) / (p + 1.0)
            }
            Family::RealAbsPower { p, sign } => sign * u.re.abs().powf(p) * u.re / (p + 1.0),
        }
    }

    /// Checks the structural inequality on `samples` and the chain rule
    /// along deterministic pseudo-random straight paths through them.
    pub fn verify_structure(&self, samples: &[Complex64]) -> Result<StructureReport> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples { got: 0, need: 1 });
        }
        for &u in samples {
            self.check_real(u)?;
        }
        let inequality = self.admits_potential().then(|| {
            samples
                .iter()
                .map(|&u| {
                    let lhs = (self.f_unchecked(u) * u.conj()).re;
                    let rhs = (2.0 + self.eps) * self.potential_unchecked(u);
                    let scale = lhs.abs().max(rhs.abs());
                    if scale == 0.0 {
                        0.0
                    } else {
                        (rhs - lhs).max(0.0) / scale
                    }
                })
                .fold(0.0, f64::max)
        });
        let chain = self.admits_potential().then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x6b67_666c_7277);
            samples
                .iter()
                .map(|&u| {
                    let dir = if self.real_only() {
                        Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
                    } else {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    };
                    self.chain_rule_error(u, dir)
                })
                .fold(0.0, f64::max)
        });
        Ok(StructureReport {
            samples: samples.len(),
            max_inequality_violation: inequality,
            max_chain_rule_error: chain,
        })
    }

    /// Relative error of `d/ds F(u + s·w)|₀ ≈ Re{f(u) w̄}` by central differences.
    fn chain_rule_error(&self, u: Complex64, dir: Complex64) -> f64 {
        let h = CHAIN_RULE_STEP * if u.norm() > 0.0 { u.norm() } else { 1.0 };
        let fd = (self.potential_unchecked(u + dir * h) - self.potential_unchecked(u - dir * h))
            / (2.0 * h);
        let exact = (self.f_unchecked(u) * dir.conj()).re;
        let scale = self.f_unchecked(u).norm() * dir.norm();
        if scale == 0.0 {
            fd.abs()
        } else {
            (fd - exact).abs() / scale
        }
    }

    /// Sup over pairs of `|f(s)−f(v)| / (|s−v| (|s|^{p−1} + |v|^{p−1}))`.
    pub fn lipschitz_constant_fit(&self, pairs: &[(Complex64, Complex64)]) -> f64 {
        let p = self.p();
        pairs
            .iter()
            .filter(|(s, v)| s != v)
            .map(|&(s, v)| {
                let num = (self.f_unchecked(s) - self.f_unchecked(v)).norm();
                let den = (s - v).norm() * (s.norm().powf(p - 1.0) + v.norm().powf(p - 1.0));
                num / den
            })
            .fold(0.0, f64::max)
    }
}

fn check_p_eps(p: f64, eps: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidNonlinearity(format!("p must exceed 1, got {p}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidNonlinearity(format!("eps must be > 0, got {eps}")));
    }
    Ok(())
}
