use mixrelax::config::SlopeBand;
use mixrelax::diagnostics;
use mixrelax::experiment::{self, ChiSample, Comparison, RunReport};
use mixrelax::grid::{Grid1D, MixtureState};
use mixrelax::solver::{self, DataOrder, FrictionMode, InitSpec, SolverParams, SystemKind};
use mixrelax::thermo::{Capillarity, EnergyLaw};
use mixrelax::{Execution, Matrix, MixtureModel};

fn binary(kappa: Capillarity, eps: f64) -> MixtureModel {
    let l = EnergyLaw::quadratic(1.0).with_kappa(kappa);
    MixtureModel::binary(l, l, 1.0, eps).unwrap()
}

fn params(t_end: f64) -> SolverParams {
    SolverParams { t_end, execution: Execution::Sequential, ..SolverParams::default() }
}

/// Isentropic Euler with a smooth pulse against the same scheme at four
/// times the resolution, averaged back onto the coarse cells.
#[test]
fn isentropic_euler_matches_fine_grid() {
    let law = EnergyLaw::gamma_law(1.0, 1.4);
    let model = MixtureModel::new(vec![law], Matrix::zeros(1, 1), 1.0).unwrap();
    let pulse = |g: Grid1D| {
        let rho: Vec<f64> = g.centers().iter().map(|x| 1.0 + 0.2 * (-((x - 0.5) / 0.1f64).powi(2)).exp()).collect();
        MixtureState::new(g, 0.0, vec![rho], vec![vec![0.0; g.n_cells()]]).unwrap()
    };
    let p = params(0.15);
    let coarse = solver::run(&model, &pulse(Grid1D::new(128, 1.0).unwrap()), &p, SystemKind::Limit).unwrap();
    let fine = solver::run(&model, &pulse(Grid1D::new(512, 1.0).unwrap()), &p, SystemKind::Limit).unwrap();
    let (c, f) = (coarse.final_state(), fine.final_state());
    let dx = c.grid.dx();
    let mut l1 = 0.0;
    for k in 0..128 {
        let avg = f.rho[0][4 * k..4 * k + 4].iter().sum::<f64>() / 4.0;
        l1 += (c.rho[0][k] - avg).abs() * dx;
    }
    assert!(l1 < 1e-2, "L1 distance {l1}");
    assert!(l1 > 0.0);
}

#[test]
fn stiff_relaxation_smoke_run() {
    let model = binary(Capillarity::Constant { k: 0.01 }, 1e-3);
    let grid = Grid1D::new(256, 1.0).unwrap();
    let spec = InitSpec { velocity_amplitude: 0.1, order: DataOrder::First, ..InitSpec::default() };
    let wp = solver::well_prepared_init(&model, grid, &spec, 1e-6).unwrap();
    let traj = solver::run(&model, &wp.relaxation, &params(0.1), SystemKind::Relaxation).unwrap();
    assert_eq!(traj.final_state().t, 0.1);
    assert!(traj.records.iter().all(|r| r.min_rho > 0.5));
    assert!(experiment::run_report(&model, &traj, 1.0).audit.passes);
}

#[test]
fn reruns_are_bitwise_identical() {
    let model = binary(Capillarity::Quantum { k: 0.02 }, 0.05);
    let grid = Grid1D::new(64, 1.0).unwrap();
    let spec = InitSpec { random_phases: true, seed: 11, order: DataOrder::First, ..InitSpec::default() };
    let wp = solver::well_prepared_init(&model, grid, &spec, 1e-6).unwrap();
    for kind in [SystemKind::Relaxation, SystemKind::ChapmanEnskog] {
        let init = if kind == SystemKind::Relaxation { &wp.relaxation } else { &wp.reference };
        let a = solver::run(&model, init, &params(0.02), kind).unwrap();
        let b = solver::run(&model, init, &params(0.02), kind).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn well_prepared_data_has_zero_chi() {
    let model = binary(Capillarity::Constant { k: 0.01 }, 0.05);
    let grid = Grid1D::new(128, 1.0).unwrap();
    for order in [DataOrder::Zeroth, DataOrder::First] {
        let spec = InitSpec { order, velocity_amplitude: 0.1, ..InitSpec::default() };
        let wp = solver::well_prepared_init(&model, grid, &spec, 1e-6).unwrap();
        let which = if order == DataOrder::First { SystemKind::ChapmanEnskog } else { SystemKind::Limit };
        let r = experiment::reference_for_chi(&model, which, &wp.reference).unwrap();
        assert!(diagnostics::chi(&model, &wp.relaxation, &r).unwrap() <= 1e-14);
    }
}

/// Forward-Euler friction far beyond its stability limit creates energy,
/// which the audit must flag.
#[test]
fn audit_flags_unstable_explicit_friction() {
    let model = binary(Capillarity::None, 1e-3);
    let grid = Grid1D::new(64, 1.0).unwrap();
    let mut s = MixtureState::uniform(grid, &[1.0, 1.0], 0.0).unwrap();
    s.m[0] = grid.centers().iter().map(|x| 0.1 * (std::f64::consts::TAU * x).sin()).collect();
    s.m[1] = s.m[0].iter().map(|m| -m).collect();
    let p = SolverParams { friction_mode: FrictionMode::Explicit, dt_max: Some(1e-2), ..params(0.02) };
    let bad = solver::run(&model, &s, &p, SystemKind::Relaxation).unwrap();
    let audit = experiment::run_report(&model, &bad, 1.0).audit;
    assert!(!audit.passes && audit.excess > audit.tol, "{audit:?}");
    let good =
        solver::run(&model, &s, &SolverParams { dt_max: Some(1e-2), ..params(0.02) }, SystemKind::Relaxation).unwrap();
    assert!(experiment::run_report(&model, &good, 1.0).audit.passes);
}

fn synthetic(eps: f64, chi: f64) -> (Comparison, f64) {
    let report: RunReport = serde_json::from_value(serde_json::json!({
        "system": "relaxation", "eps": eps, "n_cells": 8, "t_end": 0.0, "steps": 0, "rejections": 0,
        "dt_min": 0.0, "dt_max": 0.0, "max_rkl2_stages": 0, "initial_energy": 0.0, "final_energy": 0.0,
        "mass_drift": 0.0, "momentum_drift": 0.0, "min_rho": 1.0, "max_grad_v": 0.0, "max_grad2_v": 0.0,
        "audit": { "excess": 0.0, "defect": 0.0, "tol": 0.0, "passes": true }
    }))
    .unwrap();
    let series = vec![ChiSample { t: 0.0, chi, l2: chi, weighting_gap: 0.0 }];
    let c = Comparison {
        eps,
        reference: SystemKind::ChapmanEnskog,
        series,
        sup_chi: chi,
        sup_l2: chi,
        max_weighting_gap: 0.0,
        relaxation: report.clone(),
        reference_run: report,
    };
    (c, 0.0)
}

#[test]
fn slope_band_on_injected_data() {
    let eps = [0.08, 0.04, 0.02, 0.01];
    let band = Some(SlopeBand { min: 1.6, max: 2.4 });
    let square = eps.iter().map(|e| synthetic(*e, 3.0 * e * e)).collect();
    let out = experiment::assemble_sweep(square, band).unwrap();
    assert!((out.result.slope - 2.0).abs() < 1e-12);
    assert!(out.passes && out.l2_monotone);
    let linear = eps.iter().map(|e| synthetic(*e, *e)).collect();
    let out = experiment::assemble_sweep(linear, band).unwrap();
    assert!((out.result.slope - 1.0).abs() < 1e-12);
    assert!(!out.passes);
    let rows = out.result.rows.iter().filter_map(|r| r.slope_running).count();
    assert_eq!(rows, 3);
}
