//! Constitutive laws, double-well potentials and the energy and dissipation
//! functionals of the micropolar two-phase model and its reductions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MaggError, Result};
use crate::spectral::{curl2, dealiased_product, Axis, Field, SpectralGrid, VecField};

/// Smallest admissible distance of `|φ|` from 1 for the logarithmic potential.
pub const SEPARATION_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Quartic,
    Logarithmic,
}

/// Which member of the model hierarchy a run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Variant {
    /// Full micropolar model.
    Magg,
    /// Rotational viscosity switched off; ω still evolves but cannot feed back.
    Agg,
    /// Additionally a constant density `rho_bar`.
    ModelH { rho_bar: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub sigma: f64,
    pub eps: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub eta: [f64; 2],
    #[serde(default)]
    pub eta_r: [f64; 2],
    /// Bulk angular viscosity; only enters the three-dimensional model.
    #[serde(default = "default_angular")]
    pub c0: [f64; 2],
    #[serde(default = "default_angular")]
    pub cd: [f64; 2],
    #[serde(default = "default_ca")]
    pub ca: [f64; 2],
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    pub potential: PotentialKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub stabilization: Option<f64>,
}

fn default_angular() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_ca() -> [f64; 2] {
    [0.5, 0.5]
}

fn default_theta() -> f64 {
    1.0
}

fn default_theta0() -> f64 {
    2.0
}

fn default_variant() -> Variant {
    Variant::Magg
}

/// `f(φ) = (f₁ − f₂)/2 φ + (f₁ + f₂)/2`, extended affinely outside `[−1, 1]`.
pub fn interpolate(pair: [f64; 2], s: f64) -> f64 {
    0.5 * (pair[0] - pair[1]) * s + 0.5 * (pair[0] + pair[1])
}

pub fn coeff_of_phi(pair: [f64; 2], phi: &Field) -> Field {
    let slope = 0.5 * (pair[0] - pair[1]);
    let offset = 0.5 * (pair[0] + pair[1]);
    phi.map(|s| slope * s + offset)
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            sigma: 1.0,
            eps: 1.0,
            rho1: 1.0,
            rho2: 1.0,
            eta: [1.0, 1.0],
            eta_r: [0.0, 0.0],
            c0: default_angular(),
            cd: default_angular(),
            ca: default_ca(),
            theta: default_theta(),
            theta0: default_theta0(),
            potential: PotentialKind::Quartic,
            alpha: 0.0,
            variant: Variant::Magg,
            stabilization: None,
        }
    }
}

impl ModelParams {
    /// Checks hard invariants and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(MaggError::validation(name, format!("must be positive, got {v}")))
            }
        }
        positive("sigma", self.sigma)?;
        positive("eps", self.eps)?;
        positive("rho1", self.rho1)?;
        positive("rho2", self.rho2)?;
        for i in 0..2 {
            positive(&format!("eta[{i}]"), self.eta[i])?;
            positive(&format!("cd[{i}]"), self.cd[i])?;
            positive(&format!("ca[{i}]"), self.ca[i])?;
            positive(&format!("c0[{i}]"), self.c0[i])?;
            if !(self.eta_r[i] >= 0.0 && self.eta_r[i].is_finite()) {
                return Err(MaggError::validation(
                    format!("eta_r[{i}]"),
                    format!("must be non-negative, got {}", self.eta_r[i]),
                ));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(MaggError::validation("alpha", "must be non-negative"));
        }
        if let Some(s) = self.stabilization {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(MaggError::validation("stabilization", "must be non-negative"));
            }
        }
        if self.potential == PotentialKind::Logarithmic
            && !(self.theta > 0.0 && self.theta < self.theta0)
        {
            return Err(MaggError::validation(
                "theta0",
                format!(
                    "logarithmic potential requires 0 < θ < θ₀, got theta = {}, theta0 = {}",
                    self.theta, self.theta0
                ),
            ));
        }
        if let Variant::ModelH { rho_bar } = self.variant {
            positive("variant.model_h.rho_bar", rho_bar)?;
        }
        let mut warnings = Vec::new();
        for i in 0..2 {
            if self.cd[i] < self.ca[i] {
                warnings.push(format!("cd[{i}] < ca[{i}]"));
            }
            if 2.0 * self.c0[i] + self.ca[i] <= self.cd[i] {
                warnings.push(format!("2 c0[{i}] + ca[{i}] <= cd[{i}]"));
            }
        }
        Ok(warnings)
    }

    pub fn potential(&self) -> Potential {
        Potential {
            kind: self.potential,
            theta: self.theta,
            theta0: self.theta0,
        }
    }

    /// Stabilization constant of the Cahn–Hilliard step.
    pub fn stabilization(&self) -> f64 {
        self.stabilization.unwrap_or_else(|| {
            let bound = match self.potential {
                PotentialKind::Quartic => 1.0,
                PotentialKind::Logarithmic => self.theta0.max(1.0),
            };
            self.sigma / self.eps * bound
        })
    }

    /// Rotational viscosity pair after applying the variant.
    pub fn eta_r_effective(&self) -> [f64; 2] {
        match self.variant {
            Variant::Magg => self.eta_r,
            Variant::Agg | Variant::ModelH { .. } => [0.0, 0.0],
        }
    }

    pub fn rho_of_phi(&self, phi: &Field) -> Field {
        match self.variant {
            Variant::ModelH { rho_bar } => Field::constant(phi.grid(), rho_bar),
            _ => coeff_of_phi([self.rho1, self.rho2], phi),
        }
    }

    /// `ρ'(φ)`, constant because the density law is affine.
    pub fn rho_prime(&self) -> f64 {
        match self.variant {
            Variant::ModelH { .. } => 0.0,
            _ => 0.5 * (self.rho1 - self.rho2),
        }
    }

    /// Largest density the affine law reaches on `[−1, 1]`.
    pub fn rho_max(&self) -> f64 {
        match self.variant {
            Variant::ModelH { rho_bar } => rho_bar,
            _ => self.rho1.max(self.rho2),
        }
    }

    pub fn eta_of_phi(&self, phi: &Field) -> Field {
        coeff_of_phi(self.eta, phi)
    }

    pub fn eta_r_of_phi(&self, phi: &Field) -> Field {
        coeff_of_phi(self.eta_r_effective(), phi)
    }

    /// `(c_d + c_a)(φ)`, the micro-rotation diffusivity of the planar model.
    pub fn omega_diffusivity_of_phi(&self, phi: &Field) -> Field {
        coeff_of_phi(
            [self.cd[0] + self.ca[0], self.cd[1] + self.ca[1]],
            phi,
        )
    }

    /// Ensures density, viscosity and angular diffusivity stay positive on `phi`.
    pub fn check_positivity(&self, phi: &Field) -> Result<()> {
        let checks: [(&'static str, Field); 3] = [
            ("density", self.rho_of_phi(phi)),
            ("viscosity", self.eta_of_phi(phi)),
            ("angular diffusivity", self.omega_diffusivity_of_phi(phi)),
        ];
        for (quantity, f) in checks {
            let min = f.min();
            if !(min > 0.0) {
                return Err(MaggError::PositivityLoss { quantity, min });
            }
        }
        let min = self.eta_r_of_phi(phi).min();
        if min < 0.0 {
            return Err(MaggError::PositivityLoss {
                quantity: "rotational viscosity",
                min,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    pub theta: f64,
    pub theta0: f64,
}

impl Potential {
    pub fn quartic() -> Self {
        Potential {
            kind: PotentialKind::Quartic,
            theta: 1.0,
            theta0: 2.0,
        }
    }

    pub fn logarithmic(theta: f64, theta0: f64) -> Self {
        Potential {
            kind: PotentialKind::Logarithmic,
            theta,
            theta0,
        }
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        if self.kind == PotentialKind::Logarithmic && !(s.abs() < 1.0 - SEPARATION_FLOOR) {
            return Err(MaggError::SeparationViolation {
                value: s,
                index: None,
            });
        }
        Ok(())
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(match self.kind {
            PotentialKind::Quartic => 0.25 * (s * s - 1.0).powi(2),
            PotentialKind::Logarithmic => {
                0.5 * self.theta * ((1.0 + s) * (1.0 + s).ln() + (1.0 - s) * (1.0 - s).ln())
                    - 0.5 * self.theta0 * s * s
            }
        })
    }

    pub fn deriv(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(match self.kind {
            PotentialKind::Quartic => s * s * s - s,
            PotentialKind::Logarithmic => {
                0.5 * self.theta * ((1.0 + s) / (1.0 - s)).ln() - self.theta0 * s
            }
        })
    }

    pub fn second(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(match self.kind {
            PotentialKind::Quartic => 3.0 * s * s - 1.0,
            PotentialKind::Logarithmic => self.theta / (1.0 - s * s) - self.theta0,
        })
    }

    /// Applies `f` pointwise, reporting the first sample outside the domain.
    fn apply(&self, phi: &Field, f: impl Fn(&Self, f64) -> Result<f64>) -> Result<Field> {
        let mut out = Vec::with_capacity(phi.values().len());
        for (idx, &s) in phi.values().iter().enumerate() {
            match f(self, s) {
                Ok(v) => out.push(v),
                Err(MaggError::SeparationViolation { value, .. }) => {
                    return Err(MaggError::SeparationViolation {
                        value,
                        index: Some(idx),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Field::from_values(phi.grid(), out))
    }

    pub fn value_field(&self, phi: &Field) -> Result<Field> {
        self.apply(phi, Self::value)
    }

    pub fn deriv_field(&self, phi: &Field) -> Result<Field> {
        self.apply(phi, Self::deriv)
    }

    pub fn second_field(&self, phi: &Field) -> Result<Field> {
        self.apply(phi, Self::second)
    }
}

/// `μ = −σε Δφ + (σ/ε) F'(φ)`, with the nonlinear part truncated.
pub fn chemical_potential(phi: &Field, params: &ModelParams) -> Result<Field> {
    let fprime = params.potential().deriv_field(phi)?.dealias();
    let lap = phi.laplacian();
    let se = params.sigma * params.eps;
    let so = params.sigma / params.eps;
    Ok(lap.zip_map(&fprime, |l, f| -se * l + so * f))
}

/// Capillary forcing in the `μ∇φ` form.
pub fn capillary_force(phi: &Field, mu: &Field) -> VecField {
    VecField::new(
        dealiased_product(mu, &phi.derivative(Axis::X)),
        dealiased_product(mu, &phi.derivative(Axis::Y)),
    )
}

/// Solution snapshot at one time level.
#[derive(Debug, Clone)]
pub struct State {
    pub time: f64,
    pub u: VecField,
    pub omega: Field,
    pub phi: Field,
    pub mu: Field,
    /// Pressure with zero mean; diagnostic only.
    pub p: Field,
}

impl State {
    /// Builds a state with `μ` evaluated from `φ` and zero pressure.
    pub fn new(time: f64, u: VecField, omega: Field, phi: Field, params: &ModelParams) -> Result<Self> {
        let mu = chemical_potential(&phi, params)?;
        let p = Field::zeros(phi.grid());
        Ok(State {
            time,
            u,
            omega,
            phi,
            mu,
            p,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        self.phi.grid()
    }

    /// `1 − max|φ|`.
    pub fn separation_margin(&self) -> f64 {
        1.0 - self.phi.max_abs()
    }

    pub fn canonical(self) -> Self {
        State {
            time: self.time,
            u: self.u.canonical(),
            omega: self.omega.canonical(),
            phi: self.phi.canonical(),
            mu: self.mu.canonical(),
            p: self.p.canonical(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic_u: f64,
    pub kinetic_omega: f64,
    pub gradient: f64,
    pub potential: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DissipationBreakdown {
    pub mu_grad: f64,
    pub viscous_sym: f64,
    pub rotational_coupling: f64,
    pub omega_diffusion: f64,
    pub total: f64,
}

fn quadrature(values: impl Iterator<Item = f64>, grid: &SpectralGrid) -> f64 {
    values.sum::<f64>() * grid.spacing().powi(2)
}

/// `∫ ρ/2 |u|² + ρ/2 ω² + σε/2 |∇φ|² + σ/ε F(φ)`.
pub fn total_energy(state: &State, params: &ModelParams) -> Result<EnergyBreakdown> {
    let grid = state.grid();
    let rho = params.rho_of_phi(&state.phi);
    let (ux, uy) = (state.u.x.values(), state.u.y.values());
    let kinetic_u = quadrature(
        rho.values()
            .iter()
            .zip(ux.iter().zip(uy))
            .map(|(r, (a, b))| 0.5 * r * (a * a + b * b)),
        grid,
    );
    let kinetic_omega = quadrature(
        rho.values()
            .iter()
            .zip(state.omega.values())
            .map(|(r, w)| 0.5 * r * w * w),
        grid,
    );
    let grad = state.phi.gradient();
    let gradient = 0.5 * params.sigma * params.eps * grad.l2_norm_sq();
    let f = params.potential().value_field(&state.phi)?;
    let potential = params.sigma / params.eps * f.integral();
    Ok(EnergyBreakdown {
        kinetic_u,
        kinetic_omega,
        gradient,
        potential,
        total: kinetic_u + kinetic_omega + gradient + potential,
    })
}

/// Dissipation rate of the energy law, evaluated on the cached `μ` of `state`.
pub fn dissipation(state: &State, params: &ModelParams) -> DissipationBreakdown {
    let grid = state.grid();
    let phi = &state.phi;
    let mu_grad = state.mu.gradient().l2_norm_sq();

    let eta = params.eta_of_phi(phi);
    let dxux = state.u.x.derivative(Axis::X);
    let dyuy = state.u.y.derivative(Axis::Y);
    let dyux = state.u.x.derivative(Axis::Y);
    let dxuy = state.u.y.derivative(Axis::X);
    let viscous_sym = quadrature(
        (0..grid.len()).map(|i| {
            let shear = 0.5 * (dxuy.values()[i] + dyux.values()[i]);
            let dd = dxux.values()[i].powi(2) + dyuy.values()[i].powi(2) + 2.0 * shear * shear;
            2.0 * eta.values()[i] * dd
        }),
        grid,
    );

    let eta_r = params.eta_r_of_phi(phi);
    let curl = curl2(&state.u);
    let rotational_coupling = quadrature(
        (0..grid.len()).map(|i| {
            let rel = 0.5 * curl.values()[i] - state.omega.values()[i];
            4.0 * eta_r.values()[i] * rel * rel
        }),
        grid,
    );

    let cdca = params.omega_diffusivity_of_phi(phi);
    let gw = state.omega.gradient();
    let omega_diffusion = quadrature(
        (0..grid.len()).map(|i| {
            cdca.values()[i] * (gw.x.values()[i].powi(2) + gw.y.values()[i].powi(2))
        }),
        grid,
    );

    DissipationBreakdown {
        mu_grad,
        viscous_sym,
        rotational_coupling,
        omega_diffusion,
        total: mu_grad + viscous_sym + rotational_coupling + omega_diffusion,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::{leray_project, make_grid};

    fn grid() -> Arc<SpectralGrid> {
        make_grid(32, 2.0 * PI).unwrap()
    }

    fn unit_params() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn density_endpoints() {
        let g = grid();
        let p = ModelParams {
            rho1: 3.0,
            rho2: 1.0,
            ..unit_params()
        };
        assert_eq!(p.rho_of_phi(&Field::constant(&g, 1.0)).max_abs(), 3.0);
        let r = p.rho_of_phi(&Field::constant(&g, -1.0));
        assert_eq!((r.min(), r.max_abs()), (1.0, 1.0));
        assert_eq!(p.rho_of_phi(&Field::constant(&g, 0.0)).min(), 2.0);
        assert_eq!(p.rho_prime(), 1.0);

        let h = ModelParams {
            variant: Variant::ModelH { rho_bar: 1.7 },
            ..p
        };
        assert_eq!(h.rho_of_phi(&Field::from_fn(&g, |x, _| x.sin())).min(), 1.7);
        assert_eq!(h.rho_prime(), 0.0);
    }

    #[test]
    fn potential_closed_forms() {
        let q = Potential::quartic();
        assert_eq!(q.value(1.0).unwrap(), 0.0);
        assert_eq!(q.value(-1.0).unwrap(), 0.0);
        assert_eq!(q.deriv(0.0).unwrap(), 0.0);
        assert!((q.deriv(0.5).unwrap() + 0.375).abs() < 1e-15);

        let l = Potential::logarithmic(1.0, 2.0);
        assert_eq!(l.deriv(0.0).unwrap(), 0.0);
        assert!((l.second(0.0).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            l.deriv(1.0),
            Err(MaggError::SeparationViolation { .. })
        ));
        assert!(l.value(1.0 - 1e-10).is_err());
        assert!(l.value(-0.999).is_ok());
    }

    #[test]
    fn potential_derivative_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for pot in [Potential::quartic(), Potential::logarithmic(1.0, 2.0)] {
            for _ in 0..20 {
                let s: f64 = rng.random_range(-0.95..0.95);
                let fd = (pot.value(s + h).unwrap() - pot.value(s - h).unwrap()) / (2.0 * h);
                let exact = pot.deriv(s).unwrap();
                assert!((fd - exact).abs() < 1e-8 * (1.0 + exact.abs()), "{s}: {fd} vs {exact}");
                let fd2 = (pot.deriv(s + h).unwrap() - pot.deriv(s - h).unwrap()) / (2.0 * h);
                let exact2 = pot.second(s).unwrap();
                assert!((fd2 - exact2).abs() < 1e-6 * (1.0 + exact2.abs()));
            }
        }
    }

    #[test]
    fn chemical_potential_of_uniform_states() {
        let g = grid();
        let p = ModelParams {
            sigma: 2.0,
            eps: 0.5,
            ..unit_params()
        };
        let mu = chemical_potential(&Field::constant(&g, 0.3), &p).unwrap();
        let expect = 4.0 * (0.3f64.powi(3) - 0.3);
        assert!(mu.sub(&Field::constant(&g, expect)).max_abs() < 1e-14);

        let mu = chemical_potential(&Field::constant(&g, 1.0), &unit_params()).unwrap();
        assert!(mu.max_abs() < 1e-15);
    }

    #[test]
    fn chemical_potential_small_amplitude_is_cubic() {
        // -Δ + F''(0) annihilates sin x, so only the cubic remainder survives
        let g = grid();
        let p = unit_params();
        let mu1 = chemical_potential(&Field::from_fn(&g, |x, _| 1e-3 * x.sin()), &p).unwrap();
        let mu2 = chemical_potential(&Field::from_fn(&g, |x, _| 2e-3 * x.sin()), &p).unwrap();
        assert!(mu1.max_abs() <= 1e-8);
        let ratio = mu2.max_abs() / mu1.max_abs();
        assert!((ratio - 8.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn chemical_potential_rejects_out_of_range_log() {
        let g = grid();
        let p = ModelParams {
            potential: PotentialKind::Logarithmic,
            ..unit_params()
        };
        let phi = Field::from_fn(&g, |x, _| 1.2 * x.sin());
        match chemical_potential(&phi, &p) {
            Err(MaggError::SeparationViolation { index: Some(_), value }) => {
                assert!(value.abs() >= 1.0 - SEPARATION_FLOOR)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn capillary_examples() {
        let g = grid();
        let phi = Field::constant(&g, 0.4);
        let mu = Field::from_fn(&g, |x, y| x.cos() * y.sin());
        assert!(capillary_force(&phi, &mu).max_norm() < 1e-14);

        let phi = Field::from_fn(&g, |x, y| x.sin() + (2.0 * y).cos());
        let f = capillary_force(&phi, &Field::constant(&g, 1.3));
        assert!(leray_project(&f).max_norm() < 1e-12);

        let phi = Field::from_fn(&g, |x, _| x.sin());
        let mu = Field::from_fn(&g, |x, _| x.cos());
        let f = capillary_force(&phi, &mu);
        let expect = Field::from_fn(&g, |x, _| x.cos().powi(2));
        assert!(f.x.sub(&expect).max_abs() < 1e-13);
        assert!(f.y.max_abs() < 1e-13);
    }

    fn state(u: VecField, omega: Field, phi: Field, p: &ModelParams) -> State {
        State::new(0.0, u, omega, phi, p).unwrap()
    }

    #[test]
    fn energy_examples() {
        let g = grid();
        let p = unit_params();
        let s = state(VecField::zeros(&g), Field::zeros(&g), Field::zeros(&g), &p);
        let e = total_energy(&s, &p).unwrap();
        assert!((e.total - PI * PI).abs() < 1e-12);
        assert!((e.potential - PI * PI).abs() < 1e-12);

        let u = VecField::new(Field::from_fn(&g, |_, y| y.sin()), Field::zeros(&g));
        let s = state(u, Field::zeros(&g), Field::constant(&g, 1.0), &p);
        let e = total_energy(&s, &p).unwrap();
        assert!((e.kinetic_u - PI * PI).abs() < 1e-12);
        assert!(e.potential.abs() < 1e-14 && e.gradient.abs() < 1e-14);
        assert!((e.total - (e.kinetic_u + e.kinetic_omega + e.gradient + e.potential)).abs() <= 1e-12 * e.total);
    }

    #[test]
    fn dissipation_examples() {
        let g = grid();
        let p = ModelParams {
            eta_r: [1.0, 1.0],
            ..unit_params()
        };
        let u = VecField::new(Field::from_fn(&g, |_, y| y.sin()), Field::zeros(&g));
        let s = state(u, Field::zeros(&g), Field::constant(&g, 1.0), &p);
        let d = dissipation(&s, &p);
        assert!(d.mu_grad.abs() < 1e-20);
        assert!((d.viscous_sym - 2.0 * PI * PI).abs() < 1e-11);
        assert!((d.rotational_coupling - 2.0 * PI * PI).abs() < 1e-11);

        let s = state(VecField::zeros(&g), Field::constant(&g, 0.7), Field::constant(&g, 1.0), &p);
        let d = dissipation(&s, &p);
        assert!((d.rotational_coupling - 4.0 * 0.49 * 4.0 * PI * PI).abs() < 1e-11);
        assert!(d.omega_diffusion.abs() < 1e-20);

        let s = state(VecField::zeros(&g), Field::zeros(&g), Field::constant(&g, 1.0), &p);
        assert_eq!(dissipation(&s, &p).total, 0.0);
    }

    #[test]
    fn agg_and_model_h_drop_rotational_viscosity() {
        let p = ModelParams {
            eta_r: [0.3, 0.2],
            variant: Variant::Agg,
            ..unit_params()
        };
        assert_eq!(p.eta_r_effective(), [0.0, 0.0]);
    }

    #[test]
    fn validation() {
        let mut p = ModelParams {
            potential: PotentialKind::Logarithmic,
            theta: 2.0,
            theta0: 1.0,
            ..unit_params()
        };
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("0 < θ < θ₀"), "{err}");
        p.theta = 1.0;
        p.theta0 = 2.0;
        assert!(p.validate().unwrap().is_empty());
        p.cd = [0.1, 1.0];
        assert_eq!(p.validate().unwrap().len(), 1);
        p.eta_r = [-1.0, 0.0];
        assert!(p.validate().is_err());
    }

    #[test]
    fn positivity_monitor() {
        let g = grid();
        let p = ModelParams {
            rho1: 1.0,
            rho2: 0.1,
            ..unit_params()
        };
        assert!(p.check_positivity(&Field::constant(&g, 0.5)).is_ok());
        assert!(matches!(
            p.check_positivity(&Field::constant(&g, -1.3)),
            Err(MaggError::PositivityLoss { quantity: "density", .. })
        ));
    }
}
