//! Pointwise thermodynamics of a single species.
//!
//! The free energy density is `F(ρ, q) = h(ρ) + ½ κ(ρ) q²` with `q = ∂ₓρ`.
//! Everything here is grid-agnostic: terms such as `∂ₓ(κ(ρ) q)` are supplied
//! by the caller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Densities below this are rejected at the thermodynamic layer.
pub const RHO_MIN: f64 = 1e-8;

/// Internal energy density `h(ρ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Enthalpy {
    /// `h = c ρ²`.
    Quadratic { c: f64 },
    /// `h = c ρ^γ / (γ − 1)`, `γ > 1`.
    GammaLaw { c: f64, gamma: f64 },
}

/// Capillarity coefficient `κ(ρ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Capillarity {
    #[default]
    None,
    /// `κ = k`.
    Constant { k: f64 },
    /// `κ = k / (4ρ)`, the Bohm-potential case.
    Quantum { k: f64 },
    /// `κ = k ρ^s` with `s ∈ [−1, 0]`.
    Power { k: f64, s: f64 },
}

/// Energy law of one species.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLaw {
    pub h: Enthalpy,
    #[serde(default)]
    pub kappa: Capillarity,
}

/// Evaluation point: density, its gradient and `∂ₓ(κ(ρ) ∂ₓρ)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ThermoPoint {
    pub rho: f64,
    pub q: f64,
    pub div_kq: f64,
}

impl ThermoPoint {
    pub fn new(rho: f64, q: f64, div_kq: f64) -> Self {
        Self { rho, q, div_kq }
    }

    /// A point with no gradient information.
    pub fn flat(rho: f64) -> Self {
        Self { rho, q: 0.0, div_kq: 0.0 }
    }
}

/// Stress components `(s, r, H)`; in 1D `r` and `H` are scalars.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stress {
    pub s: f64,
    pub r: f64,
    pub h: f64,
}

#[inline]
fn guard(rho: f64) -> Result<()> {
    if rho.is_finite() && rho >= RHO_MIN {
        Ok(())
    } else {
        Err(Error::Domain(format!("density {rho:e} below {RHO_MIN:e} or not finite")))
    }
}

impl EnergyLaw {
    pub fn quadratic(c: f64) -> Self {
        Self { h: Enthalpy::Quadratic { c }, kappa: Capillarity::None }
    }

    pub fn gamma_law(c: f64, gamma: f64) -> Self {
        Self { h: Enthalpy::GammaLaw { c, gamma }, kappa: Capillarity::None }
    }

    pub fn with_kappa(mut self, kappa: Capillarity) -> Self {
        self.kappa = kappa;
        self
    }

    /// Checks parameter ranges; a passing law has strictly convex `h` and
    /// positive `κ` on `ρ > 0`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        match self.h {
            Enthalpy::Quadratic { c } if !(c > 0.0 && c.is_finite()) => {
                return bad(format!("quadratic enthalpy needs c > 0, got {c}"))
            }
            Enthalpy::GammaLaw { c, gamma } if !(c > 0.0 && c.is_finite() && gamma > 1.0 && gamma.is_finite()) => {
                return bad(format!("gamma-law enthalpy needs c > 0 and gamma > 1, got c = {c}, gamma = {gamma}"))
            }
            _ => {}
        }
        match self.kappa {
            Capillarity::None => {}
            Capillarity::Constant { k } | Capillarity::Quantum { k } => {
                if !(k > 0.0 && k.is_finite()) {
                    return bad(format!("capillarity needs k > 0, got {k}"));
                }
            }
            Capillarity::Power { k, s } => {
                if !(k > 0.0 && k.is_finite()) {
                    return bad(format!("capillarity needs k > 0, got {k}"));
                }
                if !(-1.0..=0.0).contains(&s) {
                    return bad(format!("power capillarity exponent must lie in [-1, 0], got {s}"));
                }
            }
        }
        Ok(())
    }

    pub fn has_capillarity(&self) -> bool {
        !matches!(self.kappa, Capillarity::None)
    }

    pub fn h(&self, rho: f64) -> f64 {
        match self.h {
            Enthalpy::Quadratic { c } => c * rho * rho,
            Enthalpy::GammaLaw { c, gamma } => c * rho.powf(gamma) / (gamma - 1.0),
        }
    }

    pub fn dh(&self, rho: f64) -> f64 {
        match self.h {
            Enthalpy::Quadratic { c } => 2.0 * c * rho,
            Enthalpy::GammaLaw { c, gamma } => c * gamma * rho.powf(gamma - 1.0) / (gamma - 1.0),
        }
    }

    pub fn d2h(&self, rho: f64) -> f64 {
        match self.h {
            Enthalpy::Quadratic { c } => 2.0 * c,
            Enthalpy::GammaLaw { c, gamma } => c * gamma * rho.powf(gamma - 2.0),
        }
    }

    /// `p(ρ) = ρ h′(ρ) − h(ρ)` in closed form.
    pub fn p(&self, rho: f64) -> f64 {
        match self.h {
            Enthalpy::Quadratic { c } => c * rho * rho,
            Enthalpy::GammaLaw { c, gamma } => c * rho.powf(gamma),
        }
    }

    /// `p′(ρ) = ρ h″(ρ)`, the squared sound speed.
    pub fn dp(&self, rho: f64) -> f64 {
        rho * self.d2h(rho)
    }

    pub fn kappa(&self, rho: f64) -> f64 {
        match self.kappa {
            Capillarity::None => 0.0,
            Capillarity::Constant { k } => k,
            Capillarity::Quantum { k } => k / (4.0 * rho),
            Capillarity::Power { k, s } => k * rho.powf(s),
        }
    }

    pub fn dkappa(&self, rho: f64) -> f64 {
        match self.kappa {
            Capillarity::None | Capillarity::Constant { .. } => 0.0,
            Capillarity::Quantum { k } => -k / (4.0 * rho * rho),
            Capillarity::Power { k, s } => k * s * rho.powf(s - 1.0),
        }
    }

    pub fn d2kappa(&self, rho: f64) -> f64 {
        match self.kappa {
            Capillarity::None | Capillarity::Constant { .. } => 0.0,
            Capillarity::Quantum { k } => k / (2.0 * rho * rho * rho),
            Capillarity::Power { k, s } => k * s * (s - 1.0) * rho.powf(s - 2.0),
        }
    }

    /// `κ + ρκ′` in closed form; identically zero for the quantum law.
    pub fn kappa_plus_rho_dkappa(&self, rho: f64) -> f64 {
        match self.kappa {
            Capillarity::None | Capillarity::Quantum { .. } => 0.0,
            Capillarity::Constant { k } => k,
            Capillarity::Power { k, s } => k * (1.0 + s) * rho.powf(s),
        }
    }

    /// `−1/κ(ρ)`; only meaningful with capillarity.
    fn neg_inv_kappa(&self, rho: f64) -> f64 {
        match self.kappa {
            Capillarity::None => 0.0,
            Capillarity::Constant { k } => -1.0 / k,
            Capillarity::Quantum { k } => -4.0 * rho / k,
            Capillarity::Power { k, s } => -rho.powf(-s) / k,
        }
    }

    fn d_neg_inv_kappa(&self, rho: f64) -> f64 {
        match self.kappa {
            Capillarity::None | Capillarity::Constant { .. } => 0.0,
            Capillarity::Quantum { k } => -4.0 / k,
            Capillarity::Power { k, s } => s * rho.powf(-s - 1.0) / k,
        }
    }

    /// Bregman remainder of `−1/κ`; zero for affine `−1/κ`.
    pub fn neg_inv_kappa_bregman(&self, rho: f64, rho_hat: f64) -> f64 {
        match self.kappa {
            Capillarity::None | Capillarity::Constant { .. } | Capillarity::Quantum { .. } => 0.0,
            Capillarity::Power { .. } => {
                self.neg_inv_kappa(rho) - self.neg_inv_kappa(rho_hat) - self.d_neg_inv_kappa(rho_hat) * (rho - rho_hat)
            }
        }
    }

    /// `κκ″ − 2κ′²` in closed form.
    pub fn a4_margin(&self, rho: f64) -> f64 {
        match self.kappa {
            Capillarity::None | Capillarity::Constant { .. } | Capillarity::Quantum { .. } => 0.0,
            Capillarity::Power { k, s } => k * k * (-s * s - s) * rho.powf(2.0 * s - 2.0),
        }
    }

    /// Free energy density `F(ρ, q)`.
    pub fn energy_density(&self, rho: f64, q: f64) -> f64 {
        self.h(rho) + 0.5 * self.kappa(rho) * q * q
    }

    /// `∂F/∂ρ` at fixed `q`.
    pub fn df_drho(&self, rho: f64, q: f64) -> f64 {
        self.dh(rho) + 0.5 * self.dkappa(rho) * q * q
    }

    /// `∂F/∂q` at fixed `ρ`.
    pub fn df_dq(&self, rho: f64, q: f64) -> f64 {
        self.kappa(rho) * q
    }
}

/// `p(ρ) = ρh′(ρ) − h(ρ)`.
pub fn pressure(law: &EnergyLaw, rho: f64) -> Result<f64> {
    guard(rho)?;
    Ok(law.p(rho))
}

/// Chemical potential `μ = h′(ρ) + ½κ′(ρ)q² − ∂ₓ(κ(ρ)q)`.
pub fn chemical_potential(law: &EnergyLaw, pt: &ThermoPoint) -> Result<f64> {
    guard(pt.rho)?;
    Ok(law.dh(pt.rho) + 0.5 * law.dkappa(pt.rho) * pt.q * pt.q - pt.div_kq)
}

/// Stress components `s = p + ½(κ + ρκ′)q²`, `r = ρκq`, `H = κq²`.
pub fn stress_components(law: &EnergyLaw, pt: &ThermoPoint) -> Result<Stress> {
    guard(pt.rho)?;
    let (rho, q) = (pt.rho, pt.q);
    let kappa = law.kappa(rho);
    Ok(Stress { s: law.p(rho) + 0.5 * law.kappa_plus_rho_dkappa(rho) * q * q, r: rho * kappa * q, h: kappa * q * q })
}

/// Bregman distance `h(ρ|ρ̂) = h(ρ) − h(ρ̂) − h′(ρ̂)(ρ − ρ̂)`.
pub fn relative_enthalpy(law: &EnergyLaw, rho: f64, rho_hat: f64) -> Result<f64> {
    guard(rho)?;
    guard(rho_hat)?;
    if let Enthalpy::Quadratic { c } = law.h {
        // exact square; avoids cancellation
        let d = rho - rho_hat;
        return Ok(c * d * d);
    }
    Ok(law.h(rho) - law.h(rho_hat) - law.dh(rho_hat) * (rho - rho_hat))
}

/// Relative potential energy `F(ρ, q | ρ̂, q̂)` in its sum-of-squares form
/// `h(ρ|ρ̂) + |κq − κ̂q̂|²/(2κ) + ½κ̂²q̂² (−1/κ)(ρ|ρ̂)`.
pub fn relative_potential(law: &EnergyLaw, pt: &ThermoPoint, pt_hat: &ThermoPoint) -> Result<f64> {
    let base = relative_enthalpy(law, pt.rho, pt_hat.rho)?;
    if !law.has_capillarity() {
        return Ok(base);
    }
    let k = law.kappa(pt.rho);
    let k_hat = law.kappa(pt_hat.rho);
    let w = k * pt.q - k_hat * pt_hat.q;
    let third = 0.5 * k_hat * k_hat * pt_hat.q * pt_hat.q * law.neg_inv_kappa_bregman(pt.rho, pt_hat.rho);
    Ok(base + w * w / (2.0 * k) + third)
}

/// Relative potential energy from its defining first-order Taylor remainder.
pub fn relative_potential_direct(law: &EnergyLaw, pt: &ThermoPoint, pt_hat: &ThermoPoint) -> Result<f64> {
    guard(pt.rho)?;
    guard(pt_hat.rho)?;
    let (r, q, rh, qh) = (pt.rho, pt.q, pt_hat.rho, pt_hat.q);
    Ok(law.energy_density(r, q)
        - law.energy_density(rh, qh)
        - law.df_drho(rh, qh) * (r - rh)
        - law.df_dq(rh, qh) * (q - qh))
}

/// Outcome of the structural check on a density range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A4Report {
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub samples: usize,
    /// Smallest `h″` seen; the convexity constant on the range.
    pub min_h2: f64,
    /// Smallest `κ` seen (0 without capillarity).
    pub min_kappa: f64,
    /// Smallest `κκ″ − 2κ′²` seen.
    pub min_margin: f64,
    pub passes: bool,
}

const A4_SLACK: f64 = -1e-12;

/// Samples `[rho_lo, rho_hi]` geometrically and reports the convexity and
/// capillarity margins. Failure is a report, not an error.
pub fn check_a4(law: &EnergyLaw, rho_lo: f64, rho_hi: f64) -> Result<A4Report> {
    if !(rho_lo > 0.0 && rho_lo < rho_hi && rho_hi.is_finite()) {
        return Err(Error::Precondition(format!("need 0 < rho_lo < rho_hi, got [{rho_lo}, {rho_hi}]")));
    }
    let samples = 513;
    let ratio = (rho_hi / rho_lo).ln();
    let (mut min_h2, mut min_kappa, mut min_margin) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for k in 0..samples {
        let rho = rho_lo * (ratio * k as f64 / (samples - 1) as f64).exp();
        min_h2 = min_h2.min(law.d2h(rho));
        min_kappa = min_kappa.min(law.kappa(rho));
        min_margin = min_margin.min(law.a4_margin(rho));
    }
    let kappa_ok = !law.has_capillarity() || min_kappa > 0.0;
    let passes = min_h2 >= A4_SLACK && min_margin >= A4_SLACK && min_kappa >= A4_SLACK && kappa_ok;
    Ok(A4Report { rho_lo, rho_hi, samples, min_h2, min_kappa, min_margin, passes })
}
