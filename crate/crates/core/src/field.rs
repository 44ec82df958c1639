//! Periodic grids on `[−Λ, Λ)ⁿ`, fourth-order finite-difference operators,
//! discrete norms, and initial-data profiles.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;

/// Elementwise kernels switch to rayon above this many points.
pub(crate) const PAR_THRESHOLD: usize = 1 << 14;

/// Fourth-order second-derivative stencil `[−1, 16, −30, 16, −1] / 12`.
const D2: [f64; 3] = [-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
/// Fourth-order first-derivative stencil `[1, −8, 0, 8, −1] / 12`.
const D1: [f64; 2] = [8.0 / 12.0, -1.0 / 12.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if points_per_axis < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 points per axis, got {points_per_axis}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half width must be > 0, got {half_width}")));
        }
        Ok(Grid {
            dim,
            points_per_axis,
            half_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `(2Λ)ⁿ`
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stride of `axis` in the row-major layout (axis 0 slowest).
    fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    /// Coordinates of flat index `idx`.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let h = self.spacing();
        for (axis, slot) in x.iter_mut().enumerate().take(self.dim) {
            let i = (idx / self.stride(axis)) % self.points_per_axis;
            *slot = -self.half_width + i as f64 * h;
        }
        x
    }

    /// Flat index of `idx` shifted by `offset` cells along `axis`, periodically.
    #[inline]
    fn shifted(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.points_per_axis as isize;
        let stride = self.stride(axis);
        let i = ((idx / stride) % self.points_per_axis) as isize;
        let j = (i + offset).rem_euclid(n);
        (idx as isize + (j - i) * stride as isize) as usize
    }

    /// Minimal-image displacement `x − c` on the periodic axis.
    fn periodic_delta(&self, x: f64, c: f64) -> f64 {
        let period = 2.0 * self.half_width;
        let d = x - c;
        d - period * (d / period).round()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: Complex64) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|idx| f(&grid.coords(idx)[..grid.dim]))
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, factor: Complex64) {
        for z in &mut self.values {
            *z *= factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            Err(Error::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// Fourth-order periodic Laplacian.
    pub fn laplacian(&self) -> Field {
        let mut out = Field::zeros(self.grid);
        self.laplacian_into(&mut out.values);
        out
    }

    /// Writes `Δu` into `out` (length must match the grid).
    pub fn laplacian_into(&self, out: &mut [Complex64]) {
        assert_eq!(out.len(), self.values.len());
        let grid = self.grid;
        let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
        let u = &self.values;
        let kernel = |idx: usize| -> Complex64 {
            let mut acc = u[idx] * (D2[0] * grid.dim as f64);
            for axis in 0..grid.dim {
                acc += (u[grid.shifted(idx, axis, 1)] + u[grid.shifted(idx, axis, -1)]) * D2[1];
                acc += (u[grid.shifted(idx, axis, 2)] + u[grid.shifted(idx, axis, -2)]) * D2[2];
            }
            acc * inv_h2
        };
        if out.len() >= PAR_THRESHOLD {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(idx, o)| *o = kernel(idx));
        } else {
            for (idx, o) in out.iter_mut().enumerate() {
                *o = kernel(idx);
            }
        }
    }

    /// Fourth-order central first derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Field {
        assert!(axis < self.grid.dim);
        let grid = self.grid;
        let inv_h = 1.0 / grid.spacing();
        let u = &self.values;
        let values = (0..u.len())
            .map(|idx| {
                let d1 = u[grid.shifted(idx, axis, 1)] - u[grid.shifted(idx, axis, -1)];
                let d2 = u[grid.shifted(idx, axis, 2)] - u[grid.shifted(idx, axis, -2)];
                (d1 * D1[0] + d2 * D1[1]) * inv_h
            })
            .collect();
        Field { grid, values }
    }

    /// `‖u‖²`
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// `‖∇u‖²` from fourth-order first-derivative stencils.
    pub fn grad_norm_sq(&self) -> f64 {
        (0..self.grid.dim)
            .map(|axis| self.derivative(axis).l2_norm_sq())
            .sum()
    }

    /// `−Re(u, Δu)`, the Dirichlet form matched to [`Field::laplacian`].
    ///
    /// Energy-type functionals use this form so that the semi-discrete flow
    /// satisfies the energy and Nehari identities exactly.
    pub fn dirichlet_form(&self) -> f64 {
        let lap = self.laplacian();
        -self.inner_re_unchecked(&lap)
    }

    /// `Re(u, v) = Re ∫ u v̄`
    pub fn inner_re(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.inner_re_unchecked(other))
    }

    fn inner_re_unchecked(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// `∫ F(u)`
    pub fn integrate_potential(&self, nl: &Nonlinearity) -> Result<f64> {
        nl.check_potential()?;
        let mut acc = 0.0;
        for &z in &self.values {
            nl.check_real(z)?;
            acc += nl.potential_unchecked(z);
        }
        Ok(acc * self.grid.cell_volume())
    }

    /// `Re ∫ ū f(u)`
    pub fn integrate_pairing(&self, nl: &Nonlinearity) -> Result<f64> {
        let mut acc = 0.0;
        for &z in &self.values {
            nl.check_real(z)?;
            acc += (z.conj() * nl.f_unchecked(z)).re;
        }
        Ok(acc * self.grid.cell_volume())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Homogeneous,
    Gaussian,
    Bump,
    /// Complex plane wave `e^{i k x₁}` with `k = π·mode/Λ`.
    PlaneMod,
}

impl ProfileKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "homogeneous" => Some(ProfileKind::Homogeneous),
            "gaussian" => Some(ProfileKind::Gaussian),
            "bump" => Some(ProfileKind::Bump),
            "plane_mod" => Some(ProfileKind::PlaneMod),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProfileKind::Homogeneous => "homogeneous",
            ProfileKind::Gaussian => "gaussian",
            ProfileKind::Bump => "bump",
            ProfileKind::PlaneMod => "plane_mod",
        }
    }

    pub fn is_localized(&self) -> bool {
        matches!(self, ProfileKind::Gaussian | ProfileKind::Bump)
    }
}

/// Gaussian profiles count as supported within this many widths.
pub const GAUSSIAN_SUPPORT_WIDTHS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub amplitude: f64,
    pub width: f64,
    /// Per-axis center; a single entry is broadcast to every axis.
    pub center: Vec<f64>,
    pub mode: i64,
    /// Global phase `e^{iφ}` applied to the whole profile.
    pub phase: f64,
}

impl ProfileSpec {
    pub fn homogeneous(amplitude: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Homogeneous,
            amplitude,
            width: 1.0,
            center: vec![0.0],
            mode: 1,
            phase: 0.0,
        }
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Gaussian,
            width,
            ..Self::homogeneous(amplitude)
        }
    }

    pub fn bump(amplitude: f64, width: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Bump,
            width,
            ..Self::homogeneous(amplitude)
        }
    }

    /// Radius around the center outside of which the profile is negligible;
    /// `None` for spatially periodic kinds.
    pub fn support_radius(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::Gaussian => Some(GAUSSIAN_SUPPORT_WIDTHS * self.width),
            ProfileKind::Bump => Some(self.width),
            ProfileKind::Homogeneous | ProfileKind::PlaneMod => None,
        }
    }
}

/// Samples `spec` on `grid`.
///
/// Gaussian: `A e^{−r²/w²}`; bump: `A exp(−1/(1 − r²/w²))` for `r < w`, zero
/// outside. Distances use the periodic minimal image.
pub fn make_profile(grid: &Grid, spec: &ProfileSpec) -> Result<Field> {
    if spec.kind.is_localized() {
        if spec.width >= grid.half_width() {
            return Err(Error::WidthTooLarge {
                width: spec.width,
                half_width: grid.half_width(),
            });
        }
        let min_width = 4.0 * grid.spacing();
        if spec.width <= min_width {
            return Err(Error::WidthTooSmall {
                width: spec.width,
                min_width,
            });
        }
    }
    if !spec.amplitude.is_finite() {
        return Err(Error::InvalidGrid("non-finite amplitude".into()));
    }
    let center: Vec<f64> = (0..grid.dim())
        .map(|axis| {
            spec.center
                .get(axis)
                .or(spec.center.first())
                .copied()
                .unwrap_or(0.0)
        })
        .collect();
    let amp = Complex64::from_polar(spec.amplitude, spec.phase);
    let w2 = spec.width * spec.width;
    let field = Field::from_fn(*grid, |x| {
        let r2: f64 = x
            .iter()
            .zip(&center)
            .map(|(&xi, &ci)| grid.periodic_delta(xi, ci).powi(2))
            .sum();
        match spec.kind {
            ProfileKind::Homogeneous => amp,
            ProfileKind::Gaussian => amp * (-r2 / w2).exp(),
            ProfileKind::Bump => {
                if r2 < w2 {
                    amp * (-1.0 / (1.0 - r2 / w2)).exp()
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            ProfileKind::PlaneMod => {
                let k = std::f64::consts::PI * spec.mode as f64 / grid.half_width();
                amp * Complex64::from_polar(1.0, k * x[0])
            }
        }
    });
    Ok(field)
}
