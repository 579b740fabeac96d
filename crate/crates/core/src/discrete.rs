//! Discrete energy and its variational derivatives on the periodic grid.
//!
//! The discrete energy of one species is
//! `E_h = Σ_c ½ [F(ρ_c, q_{c−½}) + F(ρ_c, q_{c+½})] dx`
//! with one-sided face gradients `q_{c±½}`. The chemical potential below is
//! its exact gradient divided by `dx`, which makes diffusion driven by it
//! dissipate `E_h` at the semi-discrete level.

use crate::grid::{Grid1D, ScalarField};
use crate::thermo::{self, EnergyLaw, ThermoPoint};

/// Face gradients `q_{c+½}`, indexed by face.
pub fn face_gradients(grid: &Grid1D, rho: &[f64]) -> ScalarField {
    grid.face_grad(rho)
}

/// Cell energy densities `½ [F(ρ_c, q_{c−½}) + F(ρ_c, q_{c+½})]`.
pub fn energy_density(law: &EnergyLaw, grid: &Grid1D, rho: &[f64]) -> ScalarField {
    if !law.has_capillarity() {
        return rho.iter().map(|r| law.h(*r)).collect();
    }
    let q = grid.face_grad(rho);
    (0..grid.n_cells())
        .map(|c| {
            let (qm, qp) = (q[grid.prev(c)], q[c]);
            law.h(rho[c]) + 0.25 * law.kappa(rho[c]) * (qm * qm + qp * qp)
        })
        .collect()
}

/// Discrete chemical potential
/// `μ_c = h′ + ¼κ′(q₋² + q₊²) − (κ̃₊q₊ − κ̃₋q₋)/dx`,
/// with `κ̃` the face average of `κ`.
pub fn chemical_potential(law: &EnergyLaw, grid: &Grid1D, rho: &[f64]) -> ScalarField {
    let mut out = vec![0.0; rho.len()];
    PotentialScratch::new(grid.n_cells()).chemical_potential_into(law, grid, rho, &mut out);
    out
}

/// Buffers for allocation-free evaluation of the discrete chemical
/// potential.
#[derive(Clone, Debug)]
pub struct PotentialScratch {
    q: Vec<f64>,
    kappa: Vec<f64>,
    flux: Vec<f64>,
}

impl PotentialScratch {
    pub fn new(n_cells: usize) -> Self {
        Self { q: vec![0.0; n_cells], kappa: vec![0.0; n_cells], flux: vec![0.0; n_cells] }
    }

    /// Same values as [`chemical_potential`], written into `out`.
    pub fn chemical_potential_into(&mut self, law: &EnergyLaw, grid: &Grid1D, rho: &[f64], out: &mut [f64]) {
        if !law.has_capillarity() {
            out.iter_mut().zip(rho).for_each(|(o, r)| *o = law.dh(*r));
            return;
        }
        let nc = grid.n_cells();
        let inv = 1.0 / grid.dx();
        for f in 0..nc {
            self.q[f] = (rho[grid.next(f)] - rho[f]) * inv;
            self.kappa[f] = law.kappa(rho[f]);
        }
        for f in 0..nc {
            self.flux[f] = 0.5 * (self.kappa[f] + self.kappa[grid.next(f)]) * self.q[f];
        }
        for c in 0..nc {
            let p = grid.prev(c);
            let div = (self.flux[c] - self.flux[p]) * inv;
            let (qm, qp) = (self.q[p], self.q[c]);
            let q_eff = (0.5 * (qm * qm + qp * qp)).sqrt();
            out[c] = thermo::chemical_potential(law, &ThermoPoint::new(rho[c], q_eff, div)).unwrap_or(f64::NAN);
        }
    }
}

/// Capillary stress at faces,
/// `C = −½(κ + ρκ′)q² − κq² + ∂ₓ(ρκ∂ₓρ)`, so that `∂ₓC = −ρ∂ₓμ_cap`.
pub fn capillary_face_stress(law: &EnergyLaw, grid: &Grid1D, rho: &[f64]) -> ScalarField {
    let nc = grid.n_cells();
    if !law.has_capillarity() {
        return vec![0.0; nc];
    }
    let qc = grid.grad(rho);
    let r: Vec<f64> = (0..nc).map(|c| rho[c] * law.kappa(rho[c]) * qc[c]).collect();
    let inv = 1.0 / grid.dx();
    (0..nc)
        .map(|f| {
            let e = grid.next(f);
            let rf = 0.5 * (rho[f] + rho[e]);
            let qf = (rho[e] - rho[f]) * inv;
            -0.5 * law.kappa_plus_rho_dkappa(rf) * qf * qf - law.kappa(rf) * qf * qf + (r[e] - r[f]) * inv
        })
        .collect()
}

/// Squared dispersive speed coefficient `max ρκ(ρ)`, used for the capillary
/// time-step restriction.
pub fn max_rho_kappa(law: &EnergyLaw, rho: &[f64]) -> f64 {
    if !law.has_capillarity() {
        return 0.0;
    }
    rho.iter().map(|r| r * law.kappa(*r)).fold(0.0, f64::max)
}

/// Bound on the diagonal of the discrete energy Hessian, used to size
/// diffusion sub-steps.
pub fn hessian_bound(law: &EnergyLaw, grid: &Grid1D, rho: &[f64]) -> f64 {
    let dx = grid.dx();
    let q = grid.grad(rho);
    rho.iter()
        .zip(&q)
        .map(|(r, q)| {
            law.d2h(*r)
                + 0.5 * law.d2kappa(*r).abs() * q * q
                + 2.0 * law.dkappa(*r).abs() * q.abs() / dx
                + 4.0 * law.kappa(*r) / (dx * dx)
        })
        .fold(0.0, f64::max)
}
