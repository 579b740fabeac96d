//! Method-of-lines integrators for the relaxation, Chapman–Enskog and limit
//! systems.
//!
//! All three share a first-order Rusanov convective flux, a centred
//! capillary stress and SSP-RK2 for the explicit part. Friction is applied
//! exactly per cell by backward Euler in a Strang composition; the
//! Chapman–Enskog diffusion is advanced by RKL2 super-time-stepping around
//! the transport step.
//!
//! Chapman–Enskog and limit states are stored as [`MixtureState`]s whose
//! species momenta split the barycentric momentum in proportion to density.

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::discrete;
use crate::error::{Error, Result};
use crate::friction::FrictionWorkspace;
use crate::grid::{Grid1D, MixtureState, ScalarField};
use crate::model::MixtureModel;
use crate::par::{self, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Relaxation,
    ChapmanEnskog,
    Limit,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Relaxation => "relaxation",
            SystemKind::ChapmanEnskog => "chapman_enskog",
            SystemKind::Limit => "limit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrictionMode {
    /// Exact per-cell backward Euler.
    #[default]
    ImplicitExact,
    /// Forward Euler; only stable for `dt ≲ ε / ‖τ‖`.
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FluxKind {
    #[default]
    Rusanov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub cfl: f64,
    pub t_end: f64,
    pub rho_floor: f64,
    pub flux: FluxKind,
    pub friction_mode: FrictionMode,
    /// Safety factor of the capillary and diffusive step restrictions.
    pub parabolic_safety: f64,
    /// Time between stored snapshots; only the initial and final states are
    /// kept when absent.
    pub snapshot_interval: Option<f64>,
    pub max_retries: u32,
    pub dt_max: Option<f64>,
    /// Stage cap of one RKL2 call; longer diffusion steps are subcycled.
    pub rkl2_max_stages: usize,
    /// Chapman–Enskog only: freeze the barycentric momentum and evolve the
    /// diffusion alone.
    pub hold_velocity: bool,
    pub execution: Execution,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            t_end: 0.1,
            rho_floor: 1e-6,
            flux: FluxKind::Rusanov,
            friction_mode: FrictionMode::ImplicitExact,
            parabolic_safety: 0.25,
            snapshot_interval: None,
            max_retries: 10,
            dt_max: None,
            rkl2_max_stages: 200,
            hold_velocity: false,
            execution: Execution::default(),
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and nonnegative, got {}", self.t_end));
        }
        if !(self.rho_floor > 0.0 && self.rho_floor.is_finite()) {
            return bad(format!("rho_floor must be positive, got {}", self.rho_floor));
        }
        if !(self.parabolic_safety > 0.0 && self.parabolic_safety.is_finite()) {
            return bad(format!("parabolic_safety must be positive, got {}", self.parabolic_safety));
        }
        if let Some(s) = self.snapshot_interval {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("snapshot_interval must be positive, got {s}"));
            }
        }
        if let Some(d) = self.dt_max {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("dt_max must be positive, got {d}"));
            }
        }
        if self.rkl2_max_stages < 2 {
            return bad("rkl2_max_stages must be at least 2".into());
        }
        Ok(())
    }
}

/// Smallest step before a run is abandoned.
pub const DT_MIN: f64 = 1e-12;

/// Outcome of one accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct StepInfo {
    pub dt: f64,
    /// Friction dissipation accounted in the step.
    pub dissipated: f64,
    pub retries: u32,
    /// Largest RKL2 stage count used.
    pub stages: usize,
}

/// Conserved fields advanced by the explicit integrator: densities and
/// either species momenta (relaxation) or one barycentric momentum.
#[derive(Clone, Debug, PartialEq)]
struct Fields {
    rho: Vec<ScalarField>,
    mom: Vec<ScalarField>,
}

impl Fields {
    fn axpy(&self, dt: f64, k: &Fields) -> Fields {
        let f = |a: &[ScalarField], b: &[ScalarField]| -> Vec<ScalarField> {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(x, y)| x + dt * y).collect()).collect()
        };
        Fields { rho: f(&self.rho, &k.rho), mom: f(&self.mom, &k.mom) }
    }

    fn average(&self, other: &Fields) -> Fields {
        let f = |a: &[ScalarField], b: &[ScalarField]| -> Vec<ScalarField> {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(x, y)| 0.5 * x + 0.5 * y).collect()).collect()
        };
        Fields { rho: f(&self.rho, &other.rho), mom: f(&self.mom, &other.mom) }
    }

    fn check(&self, floor: f64) -> Result<()> {
        for r in self.rho.iter().flatten() {
            if !(*r >= floor) {
                return Err(Error::Domain(format!("density {r:e} below floor {floor:e}")));
            }
        }
        if self.mom.iter().flatten().any(|m| !m.is_finite()) {
            return Err(Error::Domain("non-finite momentum".into()));
        }
        Ok(())
    }
}

/// SSP-RK2 (Heun): `U₁ = U + dt L(U)`, `U′ = ½U + ½(U₁ + dt L(U₁))`.
fn ssp_rk2(u: &Fields, dt: f64, floor: f64, rhs: impl Fn(&Fields) -> Fields) -> Result<Fields> {
    let k1 = rhs(u);
    let u1 = u.axpy(dt, &k1);
    u1.check(floor)?;
    let k2 = rhs(&u1);
    Ok(u.average(&u1.axpy(dt, &k2)))
}

/// Semi-discrete right-hand side of one species' Euler–Korteweg equations
/// with a Rusanov flux: returns `(∂ₜρ, ∂ₜm)`.
fn rhs_species(law: &crate::EnergyLaw, grid: &Grid1D, rho: &[f64], m: &[f64]) -> (ScalarField, ScalarField) {
    let nc = grid.n_cells();
    let v: Vec<f64> = m.iter().zip(rho).map(|(m, r)| m / r).collect();
    let a: Vec<f64> = v.iter().zip(rho).map(|(v, r)| v.abs() + law.dp(*r).sqrt()).collect();
    let p: Vec<f64> = rho.iter().map(|r| law.p(*r)).collect();
    let cap = discrete::capillary_face_stress(law, grid, rho);
    let mut fr = vec![0.0; nc];
    let mut fm = vec![0.0; nc];
    for f in 0..nc {
        let e = grid.next(f);
        let s = a[f].max(a[e]);
        fr[f] = 0.5 * (m[f] + m[e]) - 0.5 * s * (rho[e] - rho[f]);
        fm[f] = 0.5 * (m[f] * v[f] + p[f] + m[e] * v[e] + p[e]) - 0.5 * s * (m[e] - m[f]) - cap[f];
    }
    (neg(grid.div_flux(&fr)), neg(grid.div_flux(&fm)))
}

fn neg(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = -*x);
    v
}

/// Transport and capillarity of the relaxation system, friction excluded.
/// Returns `(∂ₜρ_i, ∂ₜm_i)` per species.
pub fn rhs_transport_capillary(model: &MixtureModel, state: &MixtureState) -> (Vec<ScalarField>, Vec<ScalarField>) {
    let f = relaxation_rhs(model, &state.grid, &Fields { rho: state.rho.clone(), mom: state.m.clone() });
    (f.rho, f.mom)
}

fn relaxation_rhs(model: &MixtureModel, grid: &Grid1D, u: &Fields) -> Fields {
    let (rho, mom) = (0..model.n()).map(|i| rhs_species(model.law(i), grid, &u.rho[i], &u.mom[i])).unzip();
    Fields { rho, mom }
}

/// Right-hand side of the mixture system: every species is carried by the
/// barycentric velocity, one momentum equation with the summed stresses.
fn mixture_rhs(model: &MixtureModel, grid: &Grid1D, u: &Fields) -> Fields {
    let nc = grid.n_cells();
    let n = model.n();
    let mom = &u.mom[0];
    let mut total = vec![0.0; nc];
    for r in &u.rho {
        total.iter_mut().zip(r).for_each(|(t, r)| *t += r);
    }
    let v: Vec<f64> = mom.iter().zip(&total).map(|(m, r)| m / r).collect();
    let mut c2 = vec![0.0; nc];
    let mut p = vec![0.0; nc];
    for i in 0..n {
        let law = model.law(i);
        for c in 0..nc {
            let r = u.rho[i][c];
            c2[c] += r / total[c] * law.dp(r);
            p[c] += law.p(r);
        }
    }
    let a: Vec<f64> = v.iter().zip(&c2).map(|(v, c2)| v.abs() + c2.sqrt()).collect();
    let mut cap = vec![0.0; nc];
    for i in 0..n {
        let ci = discrete::capillary_face_stress(model.law(i), grid, &u.rho[i]);
        cap.iter_mut().zip(&ci).for_each(|(c, x)| *c += x);
    }
    let speed: Vec<f64> = (0..nc).map(|f| a[f].max(a[grid.next(f)])).collect();
    let drho = (0..n)
        .map(|i| {
            let r = &u.rho[i];
            let fr: Vec<f64> = (0..nc)
                .map(|f| {
                    let e = grid.next(f);
                    let (wf, we) = (r[f] / total[f], r[e] / total[e]);
                    0.5 * (wf * mom[f] + we * mom[e]) - 0.5 * speed[f] * (r[e] - r[f])
                })
                .collect();
            neg(grid.div_flux(&fr))
        })
        .collect();
    let fm: Vec<f64> = (0..nc)
        .map(|f| {
            let e = grid.next(f);
            0.5 * (mom[f] * v[f] + p[f] + mom[e] * v[e] + p[e]) - 0.5 * speed[f] * (mom[e] - mom[f]) - cap[f]
        })
        .collect();
    Fields { rho: drho, mom: vec![neg(grid.div_flux(&fm))] }
}

/// Largest admissible explicit step: CFL on `max_speed`, plus the capillary
/// restriction `safety · dx² / max √(ρκ)`.
fn explicit_dt(model: &MixtureModel, grid: &Grid1D, rho: &[ScalarField], max_speed: f64, params: &SolverParams) -> f64 {
    let dx = grid.dx();
    let mut dt = params.cfl * dx / max_speed.max(f64::MIN_POSITIVE);
    let rk = (0..model.n()).map(|i| discrete::max_rho_kappa(model.law(i), &rho[i])).fold(0.0, f64::max);
    if rk > 0.0 {
        dt = dt.min(params.parabolic_safety * dx * dx / rk.sqrt());
    }
    if let Some(m) = params.dt_max {
        dt = dt.min(m);
    }
    dt
}

fn species_max_speed(model: &MixtureModel, rho: &[ScalarField], m: &[ScalarField]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..model.n() {
        let law = model.law(i);
        for (r, m) in rho[i].iter().zip(&m[i]) {
            s = s.max((m / r).abs() + law.dp(*r).sqrt());
        }
    }
    s
}

fn mixture_max_speed(model: &MixtureModel, rho: &[ScalarField], mom: &[f64]) -> f64 {
    let mut s = 0.0f64;
    for c in 0..mom.len() {
        let total: f64 = rho.iter().map(|r| r[c]).sum();
        let c2: f64 = (0..model.n()).map(|i| rho[i][c] / total * model.law(i).dp(rho[i][c])).sum();
        s = s.max((mom[c] / total).abs() + c2.sqrt());
    }
    s
}

/// Cells processed per parallel task.
const CELL_CHUNK: usize = 64;

/// Applies friction for a time `theta · ε` to every cell. Returns the
/// accounted dissipation `θ ∫ diss dx`.
fn apply_friction(
    model: &MixtureModel,
    grid: &Grid1D,
    rho: &[ScalarField],
    m: &mut [ScalarField],
    theta: f64,
    mode: FrictionMode,
    exec: Execution,
) -> Result<f64> {
    let n = model.n();
    if n < 2 || theta == 0.0 {
        return Ok(0.0);
    }
    let nc = grid.n_cells();
    let stride = n + 1;
    let mut out = vec![0.0; nc * stride];
    par::fill_chunks(exec, &mut out, CELL_CHUNK * stride, |start, chunk| {
        let mut ws = FrictionWorkspace::new(n);
        let mut r = vec![0.0; n];
        let mut mm = vec![0.0; n];
        for (k, cell) in chunk.chunks_mut(stride).enumerate() {
            let c = start / stride + k;
            for i in 0..n {
                r[i] = rho[i][c];
                mm[i] = m[i][c];
            }
            let diss = match mode {
                FrictionMode::ImplicitExact => ws.backward_euler(model.b(), &r, &mut mm, theta).unwrap_or(f64::NAN),
                FrictionMode::Explicit => ws.explicit(model.b(), &r, &mut mm, theta),
            };
            cell[..n].copy_from_slice(&mm);
            cell[n] = diss;
        }
    });
    let mut diss = 0.0;
    for c in 0..nc {
        for i in 0..n {
            m[i][c] = out[c * stride + i];
        }
        diss += out[c * stride + n];
    }
    if !diss.is_finite() {
        return Err(Error::Structural("friction cell system could not be solved".into()));
    }
    Ok(theta * diss * grid.dx())
}

/// Backward-Euler friction step of length `dt` on `state`; densities are
/// unchanged and per-cell total momentum is conserved.
pub fn implicit_friction_step(model: &MixtureModel, state: &MixtureState, dt: f64) -> Result<MixtureState> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("friction step needs dt > 0, got {dt}")));
    }
    if !(model.eps() > 0.0) {
        return Err(Error::Precondition("friction step needs eps > 0".into()));
    }
    let mut out = state.clone();
    apply_friction(
        model,
        &state.grid,
        &state.rho,
        &mut out.m,
        dt / model.eps(),
        FrictionMode::ImplicitExact,
        Execution::Sequential,
    )?;
    Ok(out)
}

/// Splits a barycentric momentum among species in proportion to density.
fn split_momentum(rho: &[ScalarField], mom: &[f64]) -> Vec<ScalarField> {
    if rho.len() == 1 {
        return vec![mom.to_vec()];
    }
    let nc = mom.len();
    let total: Vec<f64> = (0..nc).map(|c| rho.iter().map(|r| r[c]).sum()).collect();
    rho.iter().map(|r| (0..nc).map(|c| r[c] * (mom[c] / total[c])).collect()).collect()
}

fn mixture_fields(state: &MixtureState) -> Fields {
    Fields { rho: state.rho.clone(), mom: vec![state.total_momentum_field()] }
}

/// Diffusion matrices `D(ρ_{c+½})` at every face, row-major per face.
fn face_diffusion(model: &MixtureModel, grid: &Grid1D, rho: &[ScalarField], exec: Execution) -> Result<Vec<f64>> {
    let n = model.n();
    let nn = n * n;
    let nc = grid.n_cells();
    let mut out = vec![0.0; nc * nn];
    par::fill_chunks(exec, &mut out, CELL_CHUNK * nn, |start, chunk| {
        let mut ws = FrictionWorkspace::new(n);
        let mut r = vec![0.0; n];
        for (k, d) in chunk.chunks_mut(nn).enumerate() {
            let f = start / nn + k;
            let e = grid.next(f);
            for i in 0..n {
                r[i] = 0.5 * (rho[i][f] + rho[i][e]);
            }
            if ws.diffusion_matrix(model.b(), &r, d).is_err() {
                d[0] = f64::NAN;
            }
        }
    });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Structural("diffusion matrix could not be assembled".into()));
    }
    Ok(out)
}

/// `∂ₜρ_i = −∂ₓJ_i` with `J_{c+½} = −ε D_{c+½} (μ_{c+1} − μ_c) / dx` at a
/// frozen set of face matrices `D`.
struct DiffusionOp<'a> {
    model: &'a MixtureModel,
    grid: &'a Grid1D,
    d: Vec<f64>,
    scratch: discrete::PotentialScratch,
    mu: Vec<ScalarField>,
    flux: Vec<ScalarField>,
    g: Vec<f64>,
}

impl<'a> DiffusionOp<'a> {
    fn new(model: &'a MixtureModel, grid: &'a Grid1D, d: Vec<f64>) -> Self {
        let (n, nc) = (model.n(), grid.n_cells());
        Self {
            model,
            grid,
            d,
            scratch: discrete::PotentialScratch::new(nc),
            mu: vec![vec![0.0; nc]; n],
            flux: vec![vec![0.0; nc]; n],
            g: vec![0.0; n],
        }
    }

    fn apply(&mut self, rho: &[ScalarField], out: &mut [ScalarField]) {
        let n = self.model.n();
        let grid = self.grid;
        let nc = grid.n_cells();
        for i in 0..n {
            self.scratch.chemical_potential_into(self.model.law(i), grid, &rho[i], &mut self.mu[i]);
        }
        let scale = -self.model.eps() / grid.dx();
        for f in 0..nc {
            let e = grid.next(f);
            for j in 0..n {
                self.g[j] = self.mu[j][e] - self.mu[j][f];
            }
            let df = &self.d[f * n * n..(f + 1) * n * n];
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += df[i * n + j] * self.g[j];
                }
                self.flux[i][f] = scale * s;
            }
        }
        let inv = 1.0 / grid.dx();
        for i in 0..n {
            for c in 0..nc {
                out[i][c] = -(self.flux[i][c] - self.flux[i][grid.prev(c)]) * inv;
            }
        }
    }
}

fn rkl2_b(j: usize) -> f64 {
    if j <= 2 {
        1.0 / 3.0
    } else {
        let j = j as f64;
        (j * j + j - 2.0) / (2.0 * j * (j + 1.0))
    }
}

/// Stages needed for RKL2 to cover `tau` when forward Euler is stable up to
/// `dt_fe`: `tau ≤ dt_fe (s² + s − 2) / 4`.
pub fn rkl2_stages(tau: f64, dt_fe: f64) -> usize {
    let ratio = 4.0 * tau / dt_fe;
    let s = ((-1.0 + (9.0 + 4.0 * ratio).sqrt()) / 2.0).ceil();
    let mut s = (s.max(2.0)) as usize;
    while ((s * s + s - 2) as f64) < ratio {
        s += 1;
    }
    s
}

/// One RKL2 call of `s` stages over `tau` for `∂ₜy = L(y)`, in increment
/// form `Y_j = Y₀ + Δ_j` so that rounding scales with the update rather
/// than with `Y₀`.
fn rkl2(
    y0: &[ScalarField],
    tau: f64,
    s: usize,
    mut op: impl FnMut(&[ScalarField], &mut [ScalarField]),
) -> Vec<ScalarField> {
    let w1 = 4.0 / ((s * s + s - 2) as f64);
    let zeros = || y0.iter().map(|y| vec![0.0; y.len()]).collect::<Vec<ScalarField>>();
    let mut l0 = zeros();
    op(y0, &mut l0);
    let mut l = zeros();
    let mut y = zeros();
    let mut dm2 = zeros();
    let mut dm1 = zeros();
    let c1 = rkl2_b(1) * w1 * tau;
    for (d, l) in dm1.iter_mut().zip(&l0) {
        d.iter_mut().zip(l).for_each(|(d, l)| *d = c1 * l);
    }
    for j in 2..=s {
        let bj = rkl2_b(j);
        let mu = (2 * j - 1) as f64 / j as f64 * bj / rkl2_b(j - 1);
        let nu = -((j - 1) as f64) / j as f64 * bj / rkl2_b(j - 2);
        let mu_t = mu * w1 * tau;
        let gamma_t = -(1.0 - rkl2_b(j - 1)) * mu * w1 * tau;
        for i in 0..y0.len() {
            for c in 0..y0[i].len() {
                y[i][c] = y0[i][c] + dm1[i][c];
            }
        }
        op(&y, &mut l);
        // the new increment overwrites Δ_{j−2}
        for i in 0..y0.len() {
            for c in 0..y0[i].len() {
                dm2[i][c] = mu * dm1[i][c] + nu * dm2[i][c] + mu_t * l[i][c] + gamma_t * l0[i][c];
            }
        }
        std::mem::swap(&mut dm1, &mut dm2);
    }
    y0.iter().zip(&dm1).map(|(y, d)| y.iter().zip(d).map(|(y, d)| y + d).collect()).collect()
}

/// Advances the cross-diffusion `∂ₜρ_i = ε ∂ₓ Σ_j D_ij ∂ₓμ_j` over `tau`,
/// freezing `D` for each RKL2 call. Returns the largest stage count used.
fn diffuse(
    model: &MixtureModel,
    grid: &Grid1D,
    rho: &mut Vec<ScalarField>,
    tau: f64,
    params: &SolverParams,
) -> Result<usize> {
    let eps = model.eps();
    if eps == 0.0 || model.n() < 2 || tau == 0.0 {
        return Ok(0);
    }
    let n = model.n();
    let dx = grid.dx();
    let bound = |rho: &[ScalarField], d: &[f64]| -> f64 {
        let dnorm = d.chunks(n).map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let h = (0..n).map(|i| discrete::hessian_bound(model.law(i), grid, &rho[i])).fold(0.0, f64::max);
        params.parabolic_safety * dx * dx / (eps * dnorm * h).max(f64::MIN_POSITIVE)
    };
    let d = face_diffusion(model, grid, rho, params.execution)?;
    let s = rkl2_stages(tau, bound(rho, &d));
    if s > params.rkl2_max_stages {
        let a = diffuse(model, grid, rho, 0.5 * tau, params)?;
        let b = diffuse(model, grid, rho, 0.5 * tau, params)?;
        return Ok(a.max(b));
    }
    let mut op = DiffusionOp::new(model, grid, d);
    *rho = rkl2(rho, tau, s, |y, out| op.apply(y, out));
    for r in rho.iter().flatten() {
        if !(*r >= params.rho_floor) {
            return Err(Error::Domain(format!("density {r:e} below floor during diffusion")));
        }
    }
    Ok(s)
}

fn attempt_relaxation(
    model: &MixtureModel,
    state: &MixtureState,
    params: &SolverParams,
    dt: f64,
) -> Result<(Fields, f64)> {
    let grid = &state.grid;
    let theta = 0.5 * dt / model.eps();
    let mut m = state.m.clone();
    let mut dissipated =
        apply_friction(model, grid, &state.rho, &mut m, theta, params.friction_mode, params.execution)?;
    let u = Fields { rho: state.rho.clone(), mom: m };
    u.check(params.rho_floor)?;
    let mut u = ssp_rk2(&u, dt, params.rho_floor, |f| relaxation_rhs(model, grid, f))?;
    u.check(params.rho_floor)?;
    dissipated += apply_friction(model, grid, &u.rho, &mut u.mom, theta, params.friction_mode, params.execution)?;
    u.check(params.rho_floor)?;
    Ok((u, dissipated))
}

fn attempt_mixture(
    model: &MixtureModel,
    state: &MixtureState,
    params: &SolverParams,
    dt: f64,
    diffusive: bool,
) -> Result<(Fields, usize)> {
    let grid = &state.grid;
    let mut u = mixture_fields(state);
    let mut stages = 0;
    if diffusive {
        stages = stages.max(diffuse(model, grid, &mut u.rho, 0.5 * dt, params)?);
    }
    if !(diffusive && params.hold_velocity) {
        u = ssp_rk2(&u, dt, params.rho_floor, |f| mixture_rhs(model, grid, f))?;
        u.check(params.rho_floor)?;
    }
    if diffusive {
        stages = stages.max(diffuse(model, grid, &mut u.rho, 0.5 * dt, params)?);
    }
    u.check(params.rho_floor)?;
    Ok((u, stages))
}

fn retry_loop<T>(
    t: f64,
    mut dt: f64,
    params: &SolverParams,
    mut attempt: impl FnMut(f64) -> Result<T>,
) -> Result<(T, f64, u32)> {
    let mut retries = 0;
    loop {
        if dt < DT_MIN {
            return Err(Error::SolverFailure { t, reason: format!("time step {dt:e} below {DT_MIN:e}") });
        }
        match attempt(dt) {
            Ok(v) => return Ok((v, dt, retries)),
            Err(Error::Domain(reason)) => {
                if retries >= params.max_retries {
                    return Err(Error::SolverFailure {
                        t,
                        reason: format!("{reason}; gave up after {retries} step halvings"),
                    });
                }
                retries += 1;
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
}

fn clip(t: f64, dt: f64, t_target: f64) -> (f64, bool) {
    let remaining = t_target - t;
    if dt >= remaining {
        (remaining, true)
    } else {
        (dt, false)
    }
}

fn finish_time(t: f64, dt: f64, t_target: f64, full: bool) -> f64 {
    if full {
        t_target
    } else {
        t + dt
    }
}

/// One Strang step of the relaxation system towards `t_target`: half
/// friction, SSP-RK2 transport and capillarity, half friction.
pub fn step_relaxation(
    model: &MixtureModel,
    state: &MixtureState,
    params: &SolverParams,
    t_target: f64,
) -> Result<(MixtureState, StepInfo)> {
    if !(model.eps() > 0.0) {
        return Err(Error::Validation("the relaxation system needs eps > 0".into()));
    }
    let speed = species_max_speed(model, &state.rho, &state.m);
    let (dt0, _) = clip(state.t, explicit_dt(model, &state.grid, &state.rho, speed, params), t_target);
    let ((u, dissipated), dt, retries) =
        retry_loop(state.t, dt0, params, |dt| attempt_relaxation(model, state, params, dt))?;
    let full = dt == dt0 && dt0 == t_target - state.t;
    let next = MixtureState { grid: state.grid, t: finish_time(state.t, dt, t_target, full), rho: u.rho, m: u.mom };
    Ok((next, StepInfo { dt, dissipated, retries, stages: 0 }))
}

fn step_mixture(
    model: &MixtureModel,
    state: &MixtureState,
    params: &SolverParams,
    t_target: f64,
    diffusive: bool,
) -> Result<(MixtureState, StepInfo)> {
    let mom = state.total_momentum_field();
    let speed = mixture_max_speed(model, &state.rho, &mom);
    let (dt0, _) = clip(state.t, explicit_dt(model, &state.grid, &state.rho, speed, params), t_target);
    let ((u, stages), dt, retries) =
        retry_loop(state.t, dt0, params, |dt| attempt_mixture(model, state, params, dt, diffusive))?;
    let full = dt == dt0 && dt0 == t_target - state.t;
    let m = split_momentum(&u.rho, &u.mom[0]);
    let next = MixtureState { grid: state.grid, t: finish_time(state.t, dt, t_target, full), rho: u.rho, m };
    Ok((next, StepInfo { dt, dissipated: 0.0, retries, stages }))
}

/// One step of the Chapman–Enskog system: half diffusion, SSP-RK2 on the
/// barycentric transport, half diffusion. With `eps = 0` this is exactly
/// [`step_limit`].
pub fn step_chapman_enskog(
    model: &MixtureModel,
    state: &MixtureState,
    params: &SolverParams,
    t_target: f64,
) -> Result<(MixtureState, StepInfo)> {
    step_mixture(model, state, params, t_target, true)
}

/// One SSP-RK2 step of the zeroth-order limit system.
pub fn step_limit(
    model: &MixtureModel,
    state: &MixtureState,
    params: &SolverParams,
    t_target: f64,
) -> Result<(MixtureState, StepInfo)> {
    step_mixture(model, state, params, t_target, false)
}

/// Species momenta `ρ_i v̂ + ρ_i û_i` of a Chapman–Enskog state, with the
/// cell-centred diffusive momenta `ρ_i û_i = −ε Σ_j D_ij(ρ) ∂ₓμ_j`.
pub fn reconstruct_species_velocities(model: &MixtureModel, state: &MixtureState) -> Result<MixtureState> {
    let n = model.n();
    let grid = &state.grid;
    let mom = state.total_momentum_field();
    let mut out = state.clone();
    out.m = split_momentum(&state.rho, &mom);
    if n < 2 || model.eps() == 0.0 {
        return Ok(out);
    }
    let mu: Vec<ScalarField> =
        (0..n).map(|i| discrete::chemical_potential(model.law(i), grid, &state.rho[i])).collect();
    let gmu: Vec<ScalarField> = mu.iter().map(|m| grid.grad(m)).collect();
    let mut ws = FrictionWorkspace::new(n);
    let mut d = vec![0.0; n * n];
    let mut r = vec![0.0; n];
    for c in 0..grid.n_cells() {
        for i in 0..n {
            r[i] = state.rho[i][c];
        }
        ws.diffusion_matrix(model.b(), &r, &mut d)?;
        for i in 0..n {
            let s: f64 = (0..n).map(|j| d[i * n + j] * gmu[j][c]).sum();
            out.m[i][c] -= model.eps() * s;
        }
    }
    Ok(out)
}

/// Order of well-prepared initial velocities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataOrder {
    /// All species move with the barycentric velocity.
    #[default]
    Zeroth,
    /// Species velocities carry the first-order diffusive correction.
    First,
}

/// Smooth single-mode initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    /// Base densities `ρ̄_i`.
    pub base: Vec<f64>,
    /// Relative amplitudes `a_i`.
    pub amplitude: Vec<f64>,
    /// Fourier modes `k_i`.
    pub mode: Vec<u32>,
    /// Phases `φ_i`; ignored when `random_phases` is set.
    pub phase: Vec<f64>,
    pub random_phases: bool,
    pub seed: u64,
    /// Uniform part of the barycentric velocity.
    pub velocity: f64,
    /// Amplitude of a `sin(2πx/L)` barycentric velocity perturbation.
    pub velocity_amplitude: f64,
    pub order: DataOrder,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            base: vec![1.0, 1.0],
            amplitude: vec![0.1, -0.1],
            mode: vec![1, 1],
            phase: vec![],
            random_phases: false,
            seed: 0,
            velocity: 0.0,
            velocity_amplitude: 0.0,
            order: DataOrder::Zeroth,
        }
    }
}

/// Matching initial states of the relaxation system and of the reference
/// (Chapman–Enskog or limit) system.
#[derive(Clone, Debug, PartialEq)]
pub struct WellPrepared {
    pub relaxation: MixtureState,
    pub reference: MixtureState,
}

/// Builds `ρ_i = ρ̄_i (1 + a_i sin(2πk_i x/L + φ_i))` with either zeroth- or
/// first-order velocities. The relaxation state coincides with the
/// reconstructed reference state, so χ vanishes at `t = 0`.
pub fn well_prepared_init(model: &MixtureModel, grid: Grid1D, spec: &InitSpec, rho_floor: f64) -> Result<WellPrepared> {
    use rand::{Rng, SeedableRng};
    let n = model.n();
    if spec.base.len() != n || spec.amplitude.len() != n || spec.mode.len() != n {
        return Err(Error::Config(format!("init block must give base, amplitude and mode for {n} species")));
    }
    if !spec.random_phases && !spec.phase.is_empty() && spec.phase.len() != n {
        return Err(Error::Config(format!("init phase needs {n} entries")));
    }
    let phases: Vec<f64> = if spec.random_phases {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
        (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
    } else if spec.phase.is_empty() {
        vec![0.0; n]
    } else {
        spec.phase.clone()
    };
    for i in 0..n {
        let lo = spec.base[i] * (1.0 - spec.amplitude[i].abs());
        if !(spec.base[i] > 0.0) || !(lo >= rho_floor) {
            return Err(Error::Config(format!(
                "initial density of species {i} reaches {lo:e}, below the floor {rho_floor:e}"
            )));
        }
    }
    let k0 = std::f64::consts::TAU / grid.length();
    let x = grid.centers();
    let rho: Vec<ScalarField> = (0..n)
        .map(|i| {
            let k = k0 * spec.mode[i] as f64;
            x.iter().map(|x| spec.base[i] * (1.0 + spec.amplitude[i] * (k * x + phases[i]).sin())).collect()
        })
        .collect();
    let nc = grid.n_cells();
    let total: Vec<f64> = (0..nc).map(|c| rho.iter().map(|r| r[c]).sum()).collect();
    let mom: Vec<f64> =
        (0..nc).map(|c| total[c] * (spec.velocity + spec.velocity_amplitude * (k0 * x[c]).sin())).collect();
    let m = split_momentum(&rho, &mom);
    let reference = MixtureState::new(grid, 0.0, rho, m)?;
    reference.check_floor(rho_floor)?;
    let relaxation = match spec.order {
        DataOrder::Zeroth => reference.clone(),
        DataOrder::First => reconstruct_species_velocities(model, &reference)?,
    };
    Ok(WellPrepared { relaxation, reference })
}

/// Snapshots and per-step diagnostics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub system: SystemKind,
    /// States at strictly increasing snapshot times, starting at `t = 0`.
    pub snapshots: Vec<MixtureState>,
    /// One record for the initial state and one per accepted step.
    pub records: Vec<DiagnosticsRecord>,
    pub steps: usize,
    pub rejections: u32,
}

impl Trajectory {
    pub fn final_state(&self) -> &MixtureState {
        self.snapshots.last().expect("trajectory always holds the initial state")
    }

    pub fn dt_max(&self) -> f64 {
        self.records.iter().map(|r| r.dt).fold(0.0, f64::max)
    }
}

/// Snapshot times after `t = 0`: multiples of the interval, then `t_end`.
pub fn snapshot_times(params: &SolverParams) -> Vec<f64> {
    let t_end = params.t_end;
    if t_end == 0.0 {
        return vec![];
    }
    let mut out = vec![];
    if let Some(h) = params.snapshot_interval {
        let mut k = 1u64;
        loop {
            let t = k as f64 * h;
            if t >= t_end * (1.0 - 1e-12) {
                break;
            }
            out.push(t);
            k += 1;
        }
    }
    out.push(t_end);
    out
}

/// Integrates `init` to `params.t_end`.
pub fn run(model: &MixtureModel, init: &MixtureState, params: &SolverParams, which: SystemKind) -> Result<Trajectory> {
    params.validate()?;
    if init.n_species() != model.n() {
        return Err(Error::Validation(format!("state has {} species, model has {}", init.n_species(), model.n())));
    }
    init.check_floor(params.rho_floor)?;
    if which == SystemKind::Relaxation && !(model.eps() > 0.0) {
        return Err(Error::Validation("the relaxation system needs eps > 0".into()));
    }
    let mut state = init.clone();
    if which != SystemKind::Relaxation {
        state.m = split_momentum(&state.rho, &state.total_momentum_field());
    }
    let mut records = vec![DiagnosticsRecord::measure(model, &state)];
    let mut snapshots = vec![state.clone()];
    let (mut steps, mut rejections) = (0usize, 0u32);
    let mut dissipated = 0.0;
    for target in snapshot_times(params) {
        while state.t < target {
            let (next, info) = match which {
                SystemKind::Relaxation => step_relaxation(model, &state, params, target)?,
                SystemKind::ChapmanEnskog => step_chapman_enskog(model, &state, params, target)?,
                SystemKind::Limit => step_limit(model, &state, params, target)?,
            };
            state = next;
            steps += 1;
            rejections += info.retries;
            dissipated += info.dissipated;
            let mut rec = DiagnosticsRecord::measure(model, &state);
            rec.dt = info.dt;
            rec.dissipated = dissipated;
            rec.stages = info.stages;
            records.push(rec);
            log::trace!("{} t = {:.6e} dt = {:.3e}", which.name(), state.t, info.dt);
        }
        snapshots.push(state.clone());
    }
    log::debug!("{} run finished: {steps} steps, {rejections} rejections", which.name());
    Ok(Trajectory { system: which, snapshots, records, steps, rejections })
}
