//! Experiment orchestration: single runs, relaxation-versus-reference
//! comparisons, ε-sweeps and the friction-algebra checks.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SlopeBand};
use crate::diagnostics::{self, EnergyAudit, SweepResult, SweepRow};
use crate::error::{Error, Result};
use crate::friction::{self, Certificate, HypothesisNReport};
use crate::grid::MixtureState;
use crate::model::MixtureModel;
use crate::par;
use crate::solver::{self, SystemKind, Trajectory};
use crate::thermo::{self, A4Report};

/// Summary of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub system: SystemKind,
    pub eps: f64,
    pub n_cells: usize,
    pub t_end: f64,
    pub steps: usize,
    pub rejections: u32,
    pub dt_min: f64,
    pub dt_max: f64,
    pub max_rkl2_stages: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Largest relative change of any species mass.
    pub mass_drift: f64,
    /// Change of total momentum relative to [`momentum_scale`].
    pub momentum_drift: f64,
    pub min_rho: f64,
    /// Largest `|∂ₓv|` and `|∂ₓ²v|` of the barycentric velocity over the run.
    pub max_grad_v: f64,
    pub max_grad2_v: f64,
    pub audit: EnergyAudit,
}

/// Scale for momentum drift: `max(∫ Σ|m_i| dx, Σ masses)`, i.e. the
/// momentum of the mixture moving at unit speed when it is at rest.
pub fn momentum_scale(state: &MixtureState) -> f64 {
    let abs: f64 = state.m.iter().map(|m| state.grid.integrate(&m.iter().map(|v| v.abs()).collect::<Vec<_>>())).sum();
    abs.max(state.masses().iter().sum())
}

pub fn run_report(model: &MixtureModel, traj: &Trajectory, audit_constant: f64) -> RunReport {
    let init = &traj.snapshots[0];
    let fin = traj.final_state();
    let (r0, rn) = (&traj.records[0], traj.records.last().expect("records start with the initial state"));
    let mass_drift = r0
        .masses
        .iter()
        .zip(&rn.masses)
        .map(|(a, b)| (b - a).abs() / a.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let steps = &traj.records[1..];
    RunReport {
        system: traj.system,
        eps: model.eps(),
        n_cells: init.grid.n_cells(),
        t_end: fin.t,
        steps: traj.steps,
        rejections: traj.rejections,
        dt_min: if steps.is_empty() { 0.0 } else { steps.iter().map(|r| r.dt).fold(f64::INFINITY, f64::min) },
        dt_max: traj.dt_max(),
        max_rkl2_stages: traj.records.iter().map(|r| r.stages).max().unwrap_or(0),
        initial_energy: r0.energy,
        final_energy: rn.energy,
        mass_drift,
        momentum_drift: (rn.momentum - r0.momentum).abs() / momentum_scale(init),
        min_rho: traj.records.iter().map(|r| r.min_rho).fold(f64::INFINITY, f64::min),
        max_grad_v: traj.records.iter().map(|r| r.max_grad_v).fold(0.0, f64::max),
        max_grad2_v: traj.records.iter().map(|r| r.max_grad2_v).fold(0.0, f64::max),
        audit: diagnostics::energy_audit(&traj.records, init.grid.dx(), audit_constant),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub report: RunReport,
}

/// Runs `cfg.system` from the configured initial data.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let model = cfg.build_model()?;
    let wp = solver::well_prepared_init(&model, cfg.grid()?, &cfg.init, cfg.solver.rho_floor)?;
    let init = if cfg.system == SystemKind::Relaxation { &wp.relaxation } else { &wp.reference };
    let trajectory = solver::run(&model, init, &cfg.solver, cfg.system)?;
    let report = run_report(&model, &trajectory, cfg.output.audit_constant);
    Ok(Simulation { trajectory, report })
}

/// χ between the relaxation run and the reference at one snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSample {
    pub t: f64,
    pub chi: f64,
    pub l2: f64,
    pub weighting_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub eps: f64,
    pub reference: SystemKind,
    pub series: Vec<ChiSample>,
    pub sup_chi: f64,
    pub sup_l2: f64,
    pub max_weighting_gap: f64,
    pub relaxation: RunReport,
    pub reference_run: RunReport,
}

/// Species-level state of a reference snapshot used in χ: reconstructed
/// velocities for Chapman–Enskog, the common barycentric velocity for the
/// limit.
pub fn reference_for_chi(model: &MixtureModel, which: SystemKind, state: &MixtureState) -> Result<MixtureState> {
    match which {
        SystemKind::ChapmanEnskog => solver::reconstruct_species_velocities(model, state),
        _ => Ok(state.clone()),
    }
}

/// Runs relaxation and `cfg.reference` at friction scale `eps` from matching
/// well-prepared data and evaluates χ on every snapshot.
pub fn compare(cfg: &ExperimentConfig, eps: f64) -> Result<Comparison> {
    let model = cfg.build_model()?.with_eps(eps)?;
    let wp = solver::well_prepared_init(&model, cfg.grid()?, &cfg.init, cfg.solver.rho_floor)?;
    let relax = solver::run(&model, &wp.relaxation, &cfg.solver, SystemKind::Relaxation)?;
    let refr = solver::run(&model, &wp.reference, &cfg.solver, cfg.reference)?;
    if relax.snapshots.len() != refr.snapshots.len() {
        return Err(Error::GridMismatch("runs produced different snapshot counts".into()));
    }
    let mut series = Vec::with_capacity(relax.snapshots.len());
    for (a, b) in relax.snapshots.iter().zip(&refr.snapshots) {
        if a.t != b.t {
            return Err(Error::GridMismatch(format!("snapshot times differ: {} vs {}", a.t, b.t)));
        }
        let r = reference_for_chi(&model, cfg.reference, b)?;
        let rep = diagnostics::chi_report(&model, a, &r)?;
        series.push(ChiSample {
            t: a.t,
            chi: rep.chi,
            l2: diagnostics::l2_surrogate(a, &r)?,
            weighting_gap: rep.weighting_gap(),
        });
    }
    let sup = |f: fn(&ChiSample) -> f64| series.iter().map(f).fold(0.0, f64::max);
    Ok(Comparison {
        eps,
        reference: cfg.reference,
        sup_chi: sup(|s| s.chi),
        sup_l2: sup(|s| s.l2),
        max_weighting_gap: sup(|s| s.weighting_gap),
        relaxation: run_report(&model, &relax, cfg.output.audit_constant),
        reference_run: run_report(&model, &refr, cfg.output.audit_constant),
        series,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub result: SweepResult,
    pub band: Option<SlopeBand>,
    /// Whether the fitted slope lies in the band; `true` without a band.
    pub passes: bool,
    pub l2_monotone: bool,
    pub runs: Vec<Comparison>,
}

/// Assembles sweep rows from comparisons, fits slopes and applies the band.
pub fn assemble_sweep(runs: Vec<(Comparison, f64)>, band: Option<SlopeBand>) -> Result<SweepOutcome> {
    let rows = runs
        .iter()
        .map(|(c, wall)| SweepRow {
            eps: c.eps,
            sup_chi: c.sup_chi,
            sup_l2: c.sup_l2,
            max_weighting_gap: c.max_weighting_gap,
            wall_time: *wall,
            slope_running: None,
        })
        .collect();
    let result = SweepResult::from_rows(rows)?;
    let passes = band.is_none_or(|b| b.contains(result.slope));
    let l2_monotone = result.l2_monotone();
    Ok(SweepOutcome { result, band, passes, l2_monotone, runs: runs.into_iter().map(|(c, _)| c).collect() })
}

/// Runs [`compare`] for every ε of the list, up to `jobs` at a time.
pub fn sweep(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<SweepOutcome> {
    let list = cfg.eps_list();
    let results = par::map_jobs(cfg.solver.execution, jobs, list, |eps| {
        let start = Instant::now();
        let c = compare(cfg, eps)?;
        log::info!("eps = {eps:e}: sup chi = {:.6e}", c.sup_chi);
        Ok((c, start.elapsed().as_secs_f64()))
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    assemble_sweep(runs, cfg.slope_band)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSample {
    pub rho: Vec<f64>,
    pub configured: bool,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub n: usize,
    pub hypothesis: HypothesisNReport,
    pub samples: Vec<CheckSample>,
    /// Per-species structural check on the configured density range.
    pub a4: Vec<A4Report>,
    pub certificates_pass: bool,
    pub a4_pass: bool,
    pub passes: bool,
}

/// Certificates at the configured base densities and at random samples,
/// plus the per-species A4 check on `[check.rho_lo, check.rho_hi]`.
pub fn check(cfg: &ExperimentConfig) -> Result<CheckReport> {
    let model = cfg.build_model()?;
    let n = model.n();
    let c = &cfg.check;
    let hypothesis = friction::check_hypothesis_n(model.b())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(c.seed);
    let mut samples = vec![];
    if n >= 2 {
        let mut points = vec![(cfg.init.base.clone(), true)];
        for _ in 0..c.samples {
            points.push((friction::random_density(&mut rng, n, c.rho_lo, c.rho_hi), false));
        }
        for (rho, configured) in points {
            if rho.len() != n {
                return Err(Error::Config(format!("init.base needs {n} entries")));
            }
            let d2h: Vec<f64> = (0..n).map(|i| model.law(i).d2h(rho[i])).collect();
            let grad_mu: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let eps = if model.eps() > 0.0 { model.eps() } else { 1.0 };
            let certificate = friction::certify(model.b(), &rho, &d2h, &grad_mu, eps)?;
            samples.push(CheckSample { rho, configured, certificate });
        }
    }
    let a4 = model.laws().iter().map(|l| thermo::check_a4(l, c.rho_lo, c.rho_hi)).collect::<Result<Vec<_>>>()?;
    let certificates_pass = hypothesis.connected && samples.iter().all(|s| s.certificate.passes);
    let a4_pass = a4.iter().all(|r| r.passes);
    Ok(CheckReport { n, hypothesis, samples, a4, certificates_pass, a4_pass, passes: certificates_pass && a4_pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
[model]
n = 2
eps = 0.05
eps_list = [0.08, 0.04]
b = [[0.0, 1.0], [1.0, 0.0]]
[[model.laws]]
h = { kind = "quadratic", c = 1.0 }
kappa = { kind = "constant", k = 0.01 }
[[model.laws]]
h = { kind = "quadratic", c = 1.0 }
kappa = { kind = "constant", k = 0.01 }
[grid]
n_cells = 32
[solver]
t_end = 0.01
snapshot_interval = 0.005
execution = "sequential"
[init]
base = [1.0, 1.0]
amplitude = [0.1, -0.1]
mode = [1, 1]
order = "first"
[check]
samples = 10
"#,
        )
        .unwrap()
    }

    #[test]
    fn compare_starts_at_zero() {
        let c = compare(&cfg(), 0.05).unwrap();
        assert_eq!(c.series.len(), 3);
        assert!(c.series[0].chi < 1e-14);
        assert!(c.sup_chi > 0.0);
    }

    #[test]
    fn simulate_conserves() {
        let s = simulate(&cfg()).unwrap();
        assert!(s.report.mass_drift < 1e-12);
        assert!(s.report.momentum_drift < 1e-12);
        assert!(s.report.audit.passes);
    }

    #[test]
    fn sweep_orders_rows() {
        let out = sweep(&cfg(), Some(2)).unwrap();
        assert_eq!(out.result.rows.len(), 2);
        assert_eq!(out.result.rows[0].eps, 0.08);
        assert!(out.passes);
    }

    #[test]
    fn check_passes_for_quadratic_pair() {
        let r = check(&cfg()).unwrap();
        assert_eq!(r.samples.len(), 11);
        assert!(r.samples[0].configured);
        assert!(r.passes);
    }
}
