//! Energy and relative-energy functionals, the χ metric, energy audits and
//! convergence-rate fits.

use serde::{Deserialize, Serialize};

use crate::discrete;
use crate::error::{Error, Result};
use crate::friction;
use crate::grid::MixtureState;
use crate::model::MixtureModel;
use crate::thermo::{self, EnergyLaw, Stress, ThermoPoint};

/// Scalars recorded after every accepted step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    /// Discrete total energy.
    pub energy: f64,
    pub masses: Vec<f64>,
    pub momentum: f64,
    /// `(1/ε) ∫ ½ Σ b_ij ρ_i ρ_j |v_i − v_j|² dx` at the current state.
    pub friction_dissipation: f64,
    /// Friction dissipation accounted by the time stepper since `t = 0`.
    pub dissipated: f64,
    pub min_rho: f64,
    /// `max |∂ₓv|` of the barycentric velocity.
    pub max_grad_v: f64,
    /// `max |∂ₓ²v|` of the barycentric velocity.
    pub max_grad2_v: f64,
    /// Diffusion sub-stages used in the step (Chapman–Enskog only).
    pub stages: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chi: Option<f64>,
}

impl DiagnosticsRecord {
    /// Measures `state`; step-dependent fields are filled by the caller.
    pub fn measure(model: &MixtureModel, state: &MixtureState) -> Self {
        let diss = friction_dissipation_integral(model, state);
        let eps = model.eps();
        let friction_dissipation = if eps > 0.0 {
            diss / eps
        } else if diss == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let (max_grad_v, max_grad2_v) = match state.barycentric_velocity(f64::MIN_POSITIVE) {
            Ok(v) => {
                let g = state.grid.grad(&v);
                let l = state.grid.laplacian(&v);
                (max_abs(&g), max_abs(&l))
            }
            Err(_) => (f64::NAN, f64::NAN),
        };
        Self {
            t: state.t,
            dt: 0.0,
            energy: total_energy(model, state),
            masses: state.masses(),
            momentum: state.total_momentum(),
            friction_dissipation,
            dissipated: 0.0,
            min_rho: state.min_rho(),
            max_grad_v,
            max_grad2_v,
            stages: 0,
            chi: None,
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Discrete `∫ Σ_i (F_i(ρ_i, ∂ₓρ_i) + ½ ρ_i v_i²) dx`.
pub fn total_energy(model: &MixtureModel, state: &MixtureState) -> f64 {
    let g = &state.grid;
    (0..state.n_species())
        .map(|i| {
            let f = discrete::energy_density(model.law(i), g, &state.rho[i]);
            let e: f64 = f.iter().zip(&state.rho[i]).zip(&state.m[i]).map(|((f, r), m)| f + 0.5 * m * m / r).sum();
            e * g.dx()
        })
        .sum()
}

/// `∫ ½ Σ b_ij ρ_i ρ_j |v_i − v_j|² dx`, without the `1/ε` factor.
pub fn friction_dissipation_integral(model: &MixtureModel, state: &MixtureState) -> f64 {
    let n = state.n_species();
    if n < 2 {
        return 0.0;
    }
    let mut rho = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = 0.0;
    for c in 0..state.grid.n_cells() {
        for i in 0..n {
            rho[i] = state.rho[i][c];
            v[i] = state.m[i][c] / rho[i];
        }
        s += friction::friction_dissipation(model.b(), &rho, &v);
    }
    s * state.grid.dx()
}

/// χ with its parts and the alternative gradient weighting `1/κ(ρ̂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiReport {
    pub chi: f64,
    pub kinetic: f64,
    pub density: f64,
    /// Weighted-gradient part with weight `1/(2κ(ρ))`.
    pub gradient: f64,
    /// Weighted-gradient part with weight `1/(2κ(ρ̂))`.
    pub gradient_ref_weight: f64,
}

impl ChiReport {
    /// χ under the reference-state weighting.
    pub fn chi_ref_weight(&self) -> f64 {
        self.kinetic + self.density + self.gradient_ref_weight
    }

    /// Relative disagreement of the two weightings.
    pub fn weighting_gap(&self) -> f64 {
        let a = self.chi;
        let b = self.chi_ref_weight();
        let s = a.abs().max(b.abs());
        if s == 0.0 {
            0.0
        } else {
            (a - b).abs() / s
        }
    }
}

/// `χ = ∫ Σ ½ρ_i|v_i − v̂_i|² + (ρ_i − ρ̂_i)² + |κ(ρ_i)∂ₓρ_i − κ(ρ̂_i)∂ₓρ̂_i|²/(2κ(ρ_i)) dx`.
///
/// The reference velocities are the species velocities stored in
/// `reference`. Gradient terms average the two faces adjacent to a cell.
pub fn chi_report(model: &MixtureModel, state: &MixtureState, reference: &MixtureState) -> Result<ChiReport> {
    state.ensure_same_grid(reference)?;
    let g = &state.grid;
    let (mut kinetic, mut density, mut gradient, mut gradient_ref) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..state.n_species() {
        let law = model.law(i);
        let (r, rh) = (&state.rho[i], &reference.rho[i]);
        for c in 0..g.n_cells() {
            let dv = state.m[i][c] / r[c] - reference.m[i][c] / rh[c];
            kinetic += 0.5 * r[c] * dv * dv;
            let dr = r[c] - rh[c];
            density += dr * dr;
        }
        if law.has_capillarity() {
            let q = g.face_grad(r);
            let qh = g.face_grad(rh);
            for c in 0..g.n_cells() {
                let (k, kh) = (law.kappa(r[c]), law.kappa(rh[c]));
                let p = g.prev(c);
                let w2 = 0.5 * ((k * q[p] - kh * qh[p]).powi(2) + (k * q[c] - kh * qh[c]).powi(2));
                gradient += w2 / (2.0 * k);
                gradient_ref += w2 / (2.0 * kh);
            }
        }
    }
    let dx = g.dx();
    let (kinetic, density, gradient, gradient_ref_weight) =
        (kinetic * dx, density * dx, gradient * dx, gradient_ref * dx);
    Ok(ChiReport { chi: kinetic + density + gradient, kinetic, density, gradient, gradient_ref_weight })
}

pub fn chi(model: &MixtureModel, state: &MixtureState, reference: &MixtureState) -> Result<f64> {
    Ok(chi_report(model, state, reference)?.chi)
}

/// `∫ Σ (ρ_i − ρ̂_i)² + |v_i − v̂_i|² dx`.
pub fn l2_surrogate(state: &MixtureState, reference: &MixtureState) -> Result<f64> {
    state.ensure_same_grid(reference)?;
    let mut s = 0.0;
    for i in 0..state.n_species() {
        for c in 0..state.grid.n_cells() {
            let dr = state.rho[i][c] - reference.rho[i][c];
            let dv = state.m[i][c] / state.rho[i][c] - reference.m[i][c] / reference.rho[i][c];
            s += dr * dr + dv * dv;
        }
    }
    Ok(s * state.grid.dx())
}

/// `∫ Σ F_i(ρ_i, ∂ₓρ_i | ρ̂_i, ∂ₓρ̂_i) + ½ ρ_i |v_i − v̂_i|² dx`, with the same
/// two-face averaging as [`chi_report`].
pub fn relative_total_energy(model: &MixtureModel, state: &MixtureState, reference: &MixtureState) -> Result<f64> {
    state.ensure_same_grid(reference)?;
    let g = &state.grid;
    let mut s = 0.0;
    for i in 0..state.n_species() {
        let law = model.law(i);
        let (r, rh) = (&state.rho[i], &reference.rho[i]);
        let q = g.face_grad(r);
        let qh = g.face_grad(rh);
        for c in 0..g.n_cells() {
            let p = g.prev(c);
            let a = thermo::relative_potential(
                law,
                &ThermoPoint::new(r[c], q[p], 0.0),
                &ThermoPoint::new(rh[c], qh[p], 0.0),
            )?;
            let b = thermo::relative_potential(
                law,
                &ThermoPoint::new(r[c], q[c], 0.0),
                &ThermoPoint::new(rh[c], qh[c], 0.0),
            )?;
            let dv = state.m[i][c] / r[c] - reference.m[i][c] / rh[c];
            s += 0.5 * (a + b) + 0.5 * r[c] * dv * dv;
        }
    }
    Ok(s * g.dx())
}

/// Relative stresses: first-order Taylor remainders of `s`, `r` and `H`
/// about `pt_hat`.
pub fn relative_stresses(law: &EnergyLaw, pt: &ThermoPoint, pt_hat: &ThermoPoint) -> Result<Stress> {
    let st = thermo::stress_components(law, pt)?;
    let sh = thermo::stress_components(law, pt_hat)?;
    let (r, q) = (pt_hat.rho, pt_hat.q);
    let (dr, dq) = (pt.rho - r, pt.q - q);
    let (k, dk, d2k) = (law.kappa(r), law.dkappa(r), law.d2kappa(r));
    let kp = law.kappa_plus_rho_dkappa(r);
    let s_rho = law.dp(r) + 0.5 * (2.0 * dk + r * d2k) * q * q;
    let s_q = kp * q;
    let r_rho = kp * q;
    let r_q = r * k;
    let h_rho = dk * q * q;
    let h_q = 2.0 * k * q;
    Ok(Stress {
        s: st.s - sh.s - s_rho * dr - s_q * dq,
        r: st.r - sh.r - r_rho * dr - r_q * dq,
        h: st.h - sh.h - h_rho * dr - h_q * dq,
    })
}

/// Discrete energy balance of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    /// `max_t [E(t) + dissipated(t) − E(0)]⁺`: energy created by the scheme.
    pub excess: f64,
    /// `max_t |E(t) + dissipated(t) − E(0)|`: total discrete imbalance.
    pub defect: f64,
    pub tol: f64,
    pub passes: bool,
}

/// Default constant in the audit tolerance `C (dx² + dt) T`.
pub const AUDIT_CONSTANT: f64 = 1.0;

/// Checks `E(t) + accounted dissipation ≤ E(0) + C (dx² + dt_max) T`.
pub fn energy_audit(records: &[DiagnosticsRecord], dx: f64, constant: f64) -> EnergyAudit {
    let Some(first) = records.first() else {
        return EnergyAudit { excess: 0.0, defect: 0.0, tol: 0.0, passes: true };
    };
    let e0 = first.energy;
    let (mut excess, mut defect, mut dt_max) = (0.0f64, 0.0f64, 0.0f64);
    for r in records {
        let imbalance = r.energy + r.dissipated - e0;
        excess = excess.max(imbalance);
        defect = defect.max(imbalance.abs());
        dt_max = dt_max.max(r.dt);
    }
    let span = records.last().map_or(0.0, |r| r.t) - first.t;
    let tol = constant * (dx * dx + dt_max) * span;
    EnergyAudit { excess, defect, tol, passes: excess <= tol }
}

/// Least-squares fit of `log χ = slope · log ε + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Rows that entered the fit (positive χ and ε).
    pub used: usize,
}

pub fn convergence_rate(rows: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|(e, c)| *e > 0.0 && *c > 0.0 && c.is_finite()).map(|(e, c)| (e.ln(), c.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::Precondition(format!("rate fit needs two positive rows, got {}", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("rate fit needs distinct eps values".into()));
    }
    let slope = sxy / sxx;
    Ok(RateFit { slope, intercept: my - slope * mx, used: pts.len() })
}

/// One ε of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub sup_chi: f64,
    /// Supremum of the L2 surrogate over the same snapshots.
    pub sup_l2: f64,
    /// Largest relative gap between the two χ gradient weightings.
    pub max_weighting_gap: f64,
    pub wall_time: f64,
    /// Slope fitted on this and all previous (larger-ε) rows.
    pub slope_running: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub slope: f64,
    pub intercept: f64,
    pub l2_slope: f64,
}

impl SweepResult {
    /// Fits both metrics and fills the running slopes. Rows must have
    /// strictly decreasing ε.
    pub fn from_rows(mut rows: Vec<SweepRow>) -> Result<Self> {
        if rows.windows(2).any(|w| !(w[1].eps < w[0].eps)) {
            return Err(Error::Validation("sweep eps values must be strictly decreasing".into()));
        }
        for k in 0..rows.len() {
            let head: Vec<(f64, f64)> = rows[..=k].iter().map(|r| (r.eps, r.sup_chi)).collect();
            rows[k].slope_running = convergence_rate(&head).ok().map(|f| f.slope);
        }
        let fit = convergence_rate(&rows.iter().map(|r| (r.eps, r.sup_chi)).collect::<Vec<_>>())?;
        let l2 = convergence_rate(&rows.iter().map(|r| (r.eps, r.sup_l2)).collect::<Vec<_>>())?;
        Ok(Self { rows, slope: fit.slope, intercept: fit.intercept, l2_slope: l2.slope })
    }

    /// `sup_l2` strictly decreases as ε decreases.
    pub fn l2_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_l2 < w[0].sup_l2)
    }
}
