//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 4 5 6`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use mixrelax::config::ExperimentConfig;
use mixrelax::experiment;
use mixrelax::friction::{self, FrictionInstance};
use mixrelax::solver::{self, SystemKind};
use mixrelax::thermo::{self, Capillarity, EnergyLaw, ThermoPoint};
use mixrelax::{linalg, Matrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn ensemble() -> Vec<FrictionInstance> {
    friction::ensemble(2024, 1000, 2, 8, 0.1, 10.0)
}

fn fmt_slopes(out: &experiment::SweepOutcome) -> String {
    out.result.rows.iter().map(|r| format!("eps={} chi={:.3e}", r.eps, r.sup_chi)).collect::<Vec<_>>().join(", ")
}

fn ce_rate() -> Outcome {
    let cfg = load("ce_rate.toml");
    let band = cfg.slope_band.expect("ce_rate has a band");
    let out = experiment::sweep(&cfg, None).expect("sweep runs");
    let eps0 = cfg.eps_list()[0];
    let mut coarse = cfg.clone();
    coarse.grid.n_cells /= 2;
    let c = experiment::compare(&coarse, eps0).expect("coarse comparison runs");
    let fine = out.result.rows[0].sup_chi;
    let grid_change = (c.sup_chi - fine).abs() / fine;
    let pass = band.contains(out.result.slope) && grid_change < 0.1;
    Outcome {
        pass,
        detail: format!(
            "slope {:.3} (band [{}, {}]); grid change at eps={eps0}: {:.1}%; {}",
            out.result.slope,
            band.min,
            band.max,
            100.0 * grid_change,
            fmt_slopes(&out)
        ),
    }
}

fn limit_rate() -> Outcome {
    let cfg = load("limit_rate.toml");
    let band = cfg.slope_band.expect("limit_rate has a band");
    let out = experiment::sweep(&cfg, None).expect("sweep runs");
    Outcome {
        pass: band.contains(out.result.slope),
        detail: format!("slope {:.3} (band [{}, {}]); {}", out.result.slope, band.min, band.max, fmt_slopes(&out)),
    }
}

fn isentropic() -> Outcome {
    let cfg = load("isentropic_rate.toml");
    assert!(cfg.model.laws.iter().all(|l| !l.has_capillarity()));
    let out = experiment::sweep(&cfg, None).expect("sweep runs");
    let l2: Vec<String> = out.result.rows.iter().map(|r| format!("{:.3e}", r.sup_l2)).collect();
    Outcome {
        pass: out.l2_monotone && out.result.l2_slope >= 0.8,
        detail: format!(
            "L2 slope {:.3}, monotone {}; sup L2 = [{}]",
            out.result.l2_slope,
            out.l2_monotone,
            l2.join(", ")
        ),
    }
}

/// Least-squares solution of `−τu = d`, `Σ ρ_i u_i = 0`.
fn lsq_oracle(b: &Matrix, rho: &[f64], d: &[f64]) -> Vec<f64> {
    let n = rho.len();
    let tau = friction::build_tau(b, rho).unwrap().0;
    let a = DMatrix::from_fn(n + 1, n, |i, j| if i < n { -tau[(i, j)] } else { rho[j] });
    let rhs = DVector::from_fn(n + 1, |i, _| if i < n { d[i] } else { 0.0 });
    a.svd(true, true).solve(&rhs, 1e-14).unwrap().iter().copied().collect()
}

fn constrained_solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut max_res, mut max_dev) = (0.0f64, 0.0f64);
    for inst in ensemble() {
        let n = inst.rho.len();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = friction::driving_force(&inst.rho, &g);
        let u = friction::solve_constrained(&inst.b, &inst.rho, &d).unwrap();
        max_res = max_res.max(friction::constrained_residual(&inst.b, &inst.rho, &d, &u));
        let o = lsq_oracle(&inst.b, &inst.rho, &d);
        let scale = o.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let dev = u.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        max_dev = max_dev.max(dev);
    }
    Outcome {
        pass: max_res <= 1e-10 && max_dev <= 1e-9,
        detail: format!("1000 instances: max residual {max_res:.2e}, max deviation from least squares {max_dev:.2e}"),
    }
}

fn diffusion_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut asym, mut kernel, mut min_d, mut min_par, mut two_path) =
        (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY, 0.0f64);
    let mut passed = 0;
    let all = ensemble();
    for inst in &all {
        let n = inst.rho.len();
        let d2h: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = friction::certify(&inst.b, &inst.rho, &d2h, &g, 0.1).unwrap();
        asym = asym.max(c.d_asymmetry);
        kernel = kernel.max(c.d_kernel);
        min_d = min_d.min(c.d_min_eigenvalue);
        min_par = min_par.min(c.parabolic_min_eigenvalue);
        two_path = two_path.max(c.two_path_deviation);
        passed += usize::from(c.passes && c.parabolic_min_eigenvalue > 0.0);
    }
    Outcome {
        pass: passed == all.len() && two_path <= 1e-10,
        detail: format!(
            "{passed}/{} certified; |D-D^T| {asym:.1e}, |D1| {kernel:.1e}, min eig(D) {min_d:.1e}, min parabolic eig {min_par:.2e}, two-path {two_path:.1e}",
            all.len()
        ),
    }
}

/// Largest eigenvalue of `QᵀτQ / n`, the scale of the rounding error in ν.
fn coercivity_top(b: &Matrix, rho: &[f64]) -> f64 {
    let n = rho.len();
    let tau = friction::build_tau(b, rho).unwrap().0;
    let q = friction::q_matrix(rho);
    let m = q.transpose().matmul(&tau.leading_block(n - 1)).matmul(&q);
    linalg::symmetric_eigenvalues(&m)[n - 2] / n as f64
}

/// First-order rounding error of `diss(v) − ν·spread(v)`: velocity
/// differences carry an absolute error of order `ε max|v|`, and ν an error
/// of order `ε λ_max`.
fn rounding_unit(b: &Matrix, rho: &[f64], v: &[f64], top: f64) -> f64 {
    let n = rho.len();
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let total: f64 = rho.iter().sum();
    let vbar = rho.iter().zip(v).map(|(r, v)| r * v).sum::<f64>() / total;
    let mut diss = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            diss += b[(i, j)] * rho[i] * rho[j] * (v[i] - v[j]).abs();
        }
    }
    let spread: f64 = rho.iter().zip(v).map(|(r, v)| r * r * (v - vbar).abs()).sum();
    let quad = friction::barycentric_spread(rho, v);
    f64::EPSILON * (2.0 * vmax * (diss + top * spread) + top * quad)
}

fn coercivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // worst (lhs − rhs) in units of the forward rounding error of both sides
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for inst in ensemble() {
        let nu = friction::coercivity_constant(&inst.b, &inst.rho).unwrap();
        let top = coercivity_top(&inst.b, &inst.rho);
        for _ in 0..100 {
            let v: Vec<f64> = (0..inst.rho.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = friction::friction_dissipation(&inst.b, &inst.rho, &v);
            let spread = friction::barycentric_spread(&inst.rho, &v);
            let unit = rounding_unit(&inst.b, &inst.rho, &v, top);
            worst = worst.min((lhs - nu * spread) / unit);
            count += 1;
        }
    }
    let b = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let rho = [1.0, 1.0];
    let nu = friction::coercivity_constant(&b, &rho).unwrap();
    let mut eq_gap = 0.0f64;
    for _ in 0..1000 {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let lhs = friction::friction_dissipation(&b, &rho, &v);
        let rhs = nu * friction::barycentric_spread(&rho, &v);
        eq_gap = eq_gap.max((lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE));
    }
    Outcome {
        pass: worst >= -64.0 && eq_gap <= 1e-12,
        detail: format!("{count} vectors: min slack {worst:.2} rounding units (allowed -64); symmetric n=2 equality gap {eq_gap:.1e} (nu = {nu})"),
    }
}

fn conservation_and_dissipation() -> Outcome {
    let mut lines = vec![];
    let mut pass = true;
    let mut names: Vec<_> = std::fs::read_dir(configs()).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for path in names {
        let cfg = ExperimentConfig::load(&path).unwrap();
        let model = cfg.build_model().unwrap();
        let wp = solver::well_prepared_init(&model, cfg.grid().unwrap(), &cfg.init, cfg.solver.rho_floor).unwrap();
        for kind in [cfg.system, cfg.reference] {
            let init = if kind == SystemKind::Relaxation { &wp.relaxation } else { &wp.reference };
            let traj = solver::run(&model, init, &cfg.solver, kind).unwrap();
            let rep = experiment::run_report(&model, &traj, cfg.output.audit_constant);
            let ok = rep.mass_drift <= 1e-12 && rep.momentum_drift <= 1e-12 && rep.audit.passes;
            pass &= ok;
            if !ok {
                lines.push(format!(
                    "{} {}: mass {:.1e} momentum {:.1e} excess {:.1e} tol {:.1e}",
                    path.file_name().unwrap().to_string_lossy(),
                    kind.name(),
                    rep.mass_drift,
                    rep.momentum_drift,
                    rep.audit.excess,
                    rep.audit.tol
                ));
            }
        }
    }
    // refinement of the binary relaxation run
    let base = load("relaxation_n2.toml");
    let mut audits = vec![];
    for n_cells in [64, 128, 256] {
        let mut cfg = base.clone();
        cfg.grid.n_cells = n_cells;
        audits.push(experiment::simulate(&cfg).unwrap().report.audit);
    }
    for w in audits.windows(2) {
        pass &= w[0].passes && w[1].passes && w[1].excess <= 0.5 * w[0].excess;
    }
    let orders: Vec<String> = audits.windows(2).map(|w| format!("{:.2}", (w[0].defect / w[1].defect).log2())).collect();
    let excess: Vec<String> = audits.iter().map(|a| format!("{:.1e}", a.excess)).collect();
    Outcome {
        pass,
        detail: format!(
            "all shipped configs conserve to 1e-12 and pass the audit{}; refinement excess [{}], total-defect orders [{}]",
            if lines.is_empty() { String::new() } else { format!(" except {}", lines.join("; ")) },
            excess.join(", "),
            orders.join(", ")
        ),
    }
}

fn quantum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bases = [EnergyLaw::quadratic(1.0), EnergyLaw::gamma_law(1.0, 1.4), EnergyLaw::gamma_law(0.5, 3.0)];
    let (mut worst, mut margin_max) = (0.0f64, 0.0f64);
    for base in bases {
        for k in [0.01, 0.5, 3.0] {
            let law = base.with_kappa(Capillarity::Quantum { k });
            for _ in 0..2000 {
                let rho = 10f64.powf(rng.gen_range(-1.0..1.0));
                let pt = ThermoPoint::new(rho, rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
                let s = thermo::stress_components(&law, &pt).unwrap().s;
                let p = thermo::pressure(&law, rho).unwrap();
                worst = worst.max((s - p).abs() / p.abs().max(1.0));
                margin_max = margin_max.max(law.a4_margin(rho).abs());
            }
            margin_max = margin_max.max(thermo::check_a4(&law, 0.1, 10.0).unwrap().min_margin.abs());
        }
    }
    Outcome {
        pass: worst <= 1e-14 && margin_max == 0.0,
        detail: format!("max |s - p| {worst:.1e}; max |A4 margin| {margin_max:e}"),
    }
}

fn degeneracies() -> Outcome {
    let mut cfg = load("relaxation_n2.toml");
    cfg.model.eps = 0.0;
    let model = cfg.build_model().unwrap();
    let wp = solver::well_prepared_init(&model, cfg.grid().unwrap(), &cfg.init, cfg.solver.rho_floor).unwrap();
    let ce = solver::run(&model, &wp.reference, &cfg.solver, SystemKind::ChapmanEnskog).unwrap();
    let lim = solver::run(&model, &wp.reference, &cfg.solver, SystemKind::Limit).unwrap();
    let bitwise = ce.snapshots == lim.snapshots;

    let cfg = load("single_species.toml");
    let model = cfg.build_model().unwrap();
    let wp = solver::well_prepared_init(&model, cfg.grid().unwrap(), &cfg.init, cfg.solver.rho_floor).unwrap();
    let a = solver::run(&model, &wp.relaxation, &cfg.solver, SystemKind::Relaxation).unwrap();
    let b = solver::run(&model, &wp.reference, &cfg.solver, SystemKind::Limit).unwrap();
    let mut diff = 0.0f64;
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        for (u, v) in x.rho[0].iter().zip(&y.rho[0]).chain(x.m[0].iter().zip(&y.m[0])) {
            diff = diff.max((u - v).abs());
        }
    }
    let t = a.final_state().t;
    Outcome {
        pass: bitwise && diff <= 1e-12 && a.snapshots.len() == b.snapshots.len(),
        detail: format!("eps=0 CE == limit bitwise: {bitwise}; n=1 relaxation vs limit max diff {diff:.1e} over T={t}"),
    }
}

type Criterion = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(u32, &str, Criterion); 9] = [
        (1, "Chapman-Enskog rate", ce_rate),
        (2, "zeroth-order rate", limit_rate),
        (3, "isentropic limit", isentropic),
        (4, "constrained solver oracle", constrained_solver),
        (5, "diffusion matrix structure", diffusion_structure),
        (6, "coercivity", coercivity),
        (7, "conservation and dissipation", conservation_and_dissipation),
        (8, "quantum special case", quantum),
        (9, "degeneracies", degeneracies),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {verdict} {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
