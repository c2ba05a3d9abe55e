//! Fourier calculus on the doubly periodic square `[0, L)²`.
//!
//! Samples are stored row-major with the row index running along `y`:
//! `values[j * n + i] = f(i h, j h)` with `h = L / n`. Spectral coefficients
//! use the same layout in transform order and are normalized so that
//! `f(x) = Σ c_k exp(i k·x)`. With this choice Parseval reads
//! `∫ |f|² dx = L² Σ |c_k|²`, which is the only normalization used anywhere
//! in the crate.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{MaggError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DealiasRule {
    #[default]
    TwoThirds,
    Half,
}

impl DealiasRule {
    /// Whether integer mode index `m` survives truncation on an `n`-point axis.
    fn keeps(self, m: i64, n: usize) -> bool {
        let n = n as i64;
        match self {
            DealiasRule::TwoThirds => 3 * m.abs() <= n,
            DealiasRule::Half => 4 * m.abs() <= n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

pub struct SpectralGrid {
    n: usize,
    box_length: f64,
    rule: DealiasRule,
    modes: Vec<i64>,
    wavenumbers: Vec<f64>,
    deriv_wavenumbers: Vec<f64>,
    mask: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("box_length", &self.box_length)
            .field("rule", &self.rule)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.box_length == other.box_length && self.rule == other.rule
    }
}

/// Builds a grid with the default two-thirds dealiasing rule.
pub fn make_grid(n: usize, box_length: f64) -> Result<Arc<SpectralGrid>> {
    SpectralGrid::new(n, box_length, DealiasRule::TwoThirds)
}

impl SpectralGrid {
    pub fn new(n: usize, box_length: f64, rule: DealiasRule) -> Result<Arc<Self>> {
        if n < 8 || n % 2 != 0 {
            return Err(MaggError::InvalidGrid(format!(
                "n must be even and at least 8, got {n}"
            )));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(MaggError::InvalidGrid(format!(
                "box_length must be positive, got {box_length}"
            )));
        }
        let half = (n / 2) as i64;
        let modes: Vec<i64> = (0..n as i64)
            .map(|i| if i < half { i } else { i - n as i64 })
            .collect();
        let dk = 2.0 * PI / box_length;
        let wavenumbers: Vec<f64> = modes.iter().map(|&m| m as f64 * dk).collect();
        // the Nyquist mode has no sign, so odd derivatives drop it to keep fields real
        let deriv_wavenumbers = modes
            .iter()
            .map(|&m| if m == -half { 0.0 } else { m as f64 * dk })
            .collect();
        let mut mask = vec![false; n * n];
        for (j, &my) in modes.iter().enumerate() {
            for (i, &mx) in modes.iter().enumerate() {
                mask[j * n + i] = rule.keeps(mx, n) && rule.keeps(my, n);
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(SpectralGrid {
            n,
            box_length,
            rule,
            modes,
            wavenumbers,
            deriv_wavenumbers,
            mask,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn rule(&self) -> DealiasRule {
        self.rule
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn area(&self) -> f64 {
        self.box_length * self.box_length
    }

    /// Largest resolved wavenumber, `(n/2)·2π/L`.
    pub fn k_max(&self) -> f64 {
        (self.n / 2) as f64 * 2.0 * PI / self.box_length
    }

    /// Per-axis wavenumbers in transform order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Integer mode indices in transform order.
    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.mask
    }

    /// Index of integer mode `(mx, my)` in the coefficient array.
    pub fn mode_index(&self, mx: i64, my: i64) -> usize {
        let n = self.n as i64;
        let i = mx.rem_euclid(n) as usize;
        let j = my.rem_euclid(n) as usize;
        j * self.n + i
    }

    /// Sample coordinates `(x, y)` of flat index `idx`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let h = self.spacing();
        ((idx % self.n) as f64 * h, (idx / self.n) as f64 * h)
    }

    pub(crate) fn k2(&self, idx: usize) -> f64 {
        let kx = self.wavenumbers[idx % self.n];
        let ky = self.wavenumbers[idx / self.n];
        kx * kx + ky * ky
    }

    pub(crate) fn dk(&self, idx: usize, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.deriv_wavenumbers[idx % self.n],
            Axis::Y => self.deriv_wavenumbers[idx / self.n],
        }
    }

    fn fft_2d(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }

    /// Samples to normalized coefficients.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_2d(&mut data, &self.forward);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Normalized coefficients to samples; the imaginary part is discarded.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.fft_2d(&mut data, &self.inverse);
        data.iter().map(|c| c.re).collect()
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for j in 0..n {
        for i in (j + 1)..n {
            data.swap(j * n + i, i * n + j);
        }
    }
}

/// A real scalar field with cached spectral coefficients.
#[derive(Clone)]
pub struct Field {
    grid: Arc<SpectralGrid>,
    values: Vec<f64>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("n", &self.grid.n)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl Field {
    pub fn from_values(grid: &Arc<SpectralGrid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "sample count does not match grid");
        Field {
            grid: Arc::clone(grid),
            values,
            coeffs: OnceLock::new(),
        }
    }

    pub fn from_coeffs(grid: &Arc<SpectralGrid>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len(), "coefficient count does not match grid");
        let values = grid.inverse(&coeffs);
        Field {
            grid: Arc::clone(grid),
            values,
            coeffs: OnceLock::from(coeffs),
        }
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<SpectralGrid>, c: f64) -> Self {
        Self::from_values(grid, vec![c; grid.len()])
    }

    pub fn from_fn(grid: &Arc<SpectralGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.point(idx);
                f(x, y)
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| self.grid.forward(&self.values))
    }

    /// Drops cached coefficients so they are recomputed from the samples.
    ///
    /// States that are persisted or compared bit-for-bit go through this so a
    /// field read back from disk behaves identically to the one written.
    pub fn canonical(mut self) -> Self {
        self.coeffs = OnceLock::new();
        self
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    fn spectral_map(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Field {
        let coeffs = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(idx, &c)| f(idx, c))
            .collect();
        Field::from_coeffs(&self.grid, coeffs)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_values(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert!(self.same_grid(other));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::from_values(&self.grid, values)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product in physical space, without truncation.
    pub fn mul(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Grid quadrature of the field over the whole box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing().powi(2)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(MaggError::NonFinite(what))
        }
    }

    pub fn derivative(&self, axis: Axis) -> Field {
        let g = Arc::clone(&self.grid);
        self.spectral_map(|idx, c| c * Complex64::new(0.0, g.dk(idx, axis)))
    }

    pub fn gradient(&self) -> VecField {
        VecField::new(self.derivative(Axis::X), self.derivative(Axis::Y))
    }

    pub fn laplacian(&self) -> Field {
        let g = Arc::clone(&self.grid);
        self.spectral_map(|idx, c| c * -g.k2(idx))
    }

    /// Solves `(a + b (-Δ)^power) g = f` mode by mode.
    ///
    /// With `a = 0` the zero mode is left at zero and `f` must have zero mean.
    pub fn inverse_helmholtz(&self, a: f64, b: f64, power: u32) -> Result<Field> {
        assert!(power == 1 || power == 2, "power must be 1 or 2");
        assert!(a >= 0.0 && b > 0.0, "need a >= 0 and b > 0");
        let coeffs = self.coeffs();
        if a == 0.0 {
            let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
            let mean = coeffs[0].re;
            if coeffs[0].norm() > 1e-12 * scale.max(1e-300) && coeffs[0].norm() > 1e-300 {
                return Err(MaggError::MeanMode { mean });
            }
        }
        let g = Arc::clone(&self.grid);
        Ok(self.spectral_map(|idx, c| {
            if idx == 0 {
                return if a > 0.0 { c / a } else { Complex64::default() };
            }
            c / (a + b * g.k2(idx).powi(power as i32))
        }))
    }

    /// Zeroes coefficients outside the grid's dealiasing mask.
    pub fn dealias(&self) -> Field {
        let g = Arc::clone(&self.grid);
        self.spectral_map(|idx, c| if g.mask[idx] { c } else { Complex64::default() })
    }

    /// `Σ_k (1 + |k|²)^order |f̂_k|²`, scaled so that order 0 equals `∫ f² dx`.
    pub fn sobolev_norm_sq(&self, order: u32) -> f64 {
        let g = &self.grid;
        self.coeffs()
            .iter()
            .enumerate()
            .map(|(idx, c)| (1.0 + g.k2(idx)).powi(order as i32) * c.norm_sqr())
            .sum::<f64>()
            * g.area()
    }

    /// Spectral interpolation or truncation onto another grid of the same box.
    ///
    /// Only modes strictly below both Nyquist limits are carried over.
    pub fn resample(&self, target: &Arc<SpectralGrid>) -> Result<Field> {
        if target.box_length != self.grid.box_length {
            return Err(MaggError::GridMismatch);
        }
        let limit = (self.grid.n.min(target.n) / 2) as i64;
        let src = self.coeffs();
        let mut out = vec![Complex64::default(); target.len()];
        for my in (1 - limit)..limit {
            for mx in (1 - limit)..limit {
                out[target.mode_index(mx, my)] = src[self.grid.mode_index(mx, my)];
            }
        }
        Ok(Field::from_coeffs(target, out))
    }
}

/// Product of two fields, truncated to the dealiasing mask.
pub fn dealiased_product(a: &Field, b: &Field) -> Field {
    a.mul(b).dealias()
}

/// Two-component field on a shared grid.
#[derive(Debug, Clone)]
pub struct VecField {
    pub x: Field,
    pub y: Field,
}

impl VecField {
    pub fn new(x: Field, y: Field) -> Self {
        assert!(x.same_grid(&y), "components must share a grid");
        VecField { x, y }
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        VecField::new(Field::zeros(grid), Field::zeros(grid))
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        self.x.grid()
    }

    pub fn map_components(&self, f: impl Fn(&Field) -> Field) -> VecField {
        VecField::new(f(&self.x), f(&self.y))
    }

    pub fn add(&self, other: &VecField) -> VecField {
        VecField::new(self.x.add(&other.x), self.y.add(&other.y))
    }

    pub fn sub(&self, other: &VecField) -> VecField {
        VecField::new(self.x.sub(&other.x), self.y.sub(&other.y))
    }

    pub fn scale(&self, s: f64) -> VecField {
        self.map_components(|f| f.scale(s))
    }

    pub fn dealias(&self) -> VecField {
        self.map_components(Field::dealias)
    }

    pub fn canonical(self) -> VecField {
        VecField::new(self.x.canonical(), self.y.canonical())
    }

    pub fn divergence(&self) -> Field {
        self.x.derivative(Axis::X).add(&self.y.derivative(Axis::Y))
    }

    /// Pointwise Euclidean norm maximum.
    pub fn max_norm(&self) -> f64 {
        self.x
            .values()
            .iter()
            .zip(self.y.values())
            .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.x.sobolev_norm_sq(0) + self.y.sobolev_norm_sq(0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn resample(&self, target: &Arc<SpectralGrid>) -> Result<VecField> {
        Ok(VecField::new(self.x.resample(target)?, self.y.resample(target)?))
    }
}

/// Leray projection `(I - k kᵀ/|k|²) v̂`; the mean velocity passes through.
pub fn leray_project(v: &VecField) -> VecField {
    let grid = Arc::clone(v.grid());
    let (cx, cy) = (v.x.coeffs(), v.y.coeffs());
    let mut px = Vec::with_capacity(grid.len());
    let mut py = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let kx = grid.dk(idx, Axis::X);
        let ky = grid.dk(idx, Axis::Y);
        let k2 = kx * kx + ky * ky;
        if k2 == 0.0 {
            px.push(cx[idx]);
            py.push(cy[idx]);
            continue;
        }
        let kdotv = (cx[idx] * kx + cy[idx] * ky) / k2;
        px.push(cx[idx] - kdotv * kx);
        py.push(cy[idx] - kdotv * ky);
    }
    VecField::new(
        Field::from_coeffs(&grid, px),
        Field::from_coeffs(&grid, py),
    )
}

/// Gradient part `Q v = v - P v` and the potential `q` with `∇q = Q v`, `mean(q) = 0`.
pub fn gradient_part(v: &VecField) -> (VecField, Field) {
    let grid = Arc::clone(v.grid());
    let (cx, cy) = (v.x.coeffs(), v.y.coeffs());
    let mut pot = vec![Complex64::default(); grid.len()];
    for (idx, slot) in pot.iter_mut().enumerate() {
        let kx = grid.dk(idx, Axis::X);
        let ky = grid.dk(idx, Axis::Y);
        let k2 = kx * kx + ky * ky;
        if k2 > 0.0 {
            // q̂ = -i (k·v̂)/|k|²
            *slot = (cx[idx] * kx + cy[idx] * ky) * Complex64::new(0.0, -1.0 / k2);
        }
    }
    let q = Field::from_coeffs(&grid, pot);
    (q.gradient(), q)
}

/// `curl₂ v = ∂ₓv_y − ∂_y vₓ`.
pub fn curl2(v: &VecField) -> Field {
    v.y.derivative(Axis::X).sub(&v.x.derivative(Axis::Y))
}

/// `curl₁ w = (∂_y w, −∂ₓ w)`.
pub fn curl1(w: &Field) -> VecField {
    VecField::new(w.derivative(Axis::Y), w.derivative(Axis::X).scale(-1.0))
}
