//! Friction operator algebra.
//!
//! For a density vector `ρ` and symmetric coefficients `b`, the friction
//! matrix `τ` has `τ_ij = −b_ij ρ_i ρ_j` off the diagonal and zero row sums.
//! Its leading `(n−1)` block `τ̃` is regular when the friction graph is
//! connected, which yields the constrained velocity solve, the diffusion
//! matrix `D = G Q⁻¹ τ̃⁻¹ Q⁻¹ Gᵀ` and the coercivity constant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, lu_factor_in_place, lu_solve_in_place, Lu, Matrix};

/// Relative singular value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// The friction matrix `τ(ρ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TauMatrix(pub Matrix);

impl TauMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// Largest absolute row sum; zero up to rounding.
    pub fn max_row_sum(&self) -> f64 {
        let m = &self.0;
        (0..m.rows()).map(|i| m.row(i).iter().sum::<f64>().abs()).fold(0.0, f64::max)
    }
}

/// Pointwise operators derived from `τ` at one density vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedOperators {
    pub rho: Vec<f64>,
    /// `τ̃⁻¹`, `(n−1)×(n−1)`.
    pub tau_red_inv: Matrix,
    /// `Q⁻¹_ij = δ_ij ρ_i − ρ_i ρ_j / ρ`, `(n−1)×(n−1)`.
    pub q_inv: Matrix,
    /// `D̃ = Q⁻¹ τ̃⁻¹ Q⁻¹`.
    pub d_tilde: Matrix,
    /// `D = G D̃ Gᵀ`, `n×n`.
    pub d_full: Matrix,
    /// Embedding `G`, `n×(n−1)`, with `G_ii = 1` and `G_ni = −1`.
    pub g: Matrix,
}

/// Connectivity and rank report for a friction coefficient matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisNReport {
    pub n: usize,
    /// Graph with edges `{b_ij > 0}` is connected.
    pub connected: bool,
    /// Density vector at which the rank was probed.
    pub rho_probe: Vec<f64>,
    /// Singular values of `τ(rho_probe)`, descending.
    pub singular_values: Vec<f64>,
    /// `σ_{n−1}/σ_1 > RANK_TOL` and `σ_n/σ_1 < RANK_TOL`.
    pub rank_deficiency_one: bool,
}

fn check_coefficients(b: &Matrix) -> Result<()> {
    if !b.is_square() {
        return Err(Error::Validation("friction matrix must be square".into()));
    }
    let n = b.rows();
    for i in 0..n {
        for j in 0..n {
            let v = b[(i, j)];
            if !v.is_finite() {
                return Err(Error::Validation(format!("friction coefficient b[{i}][{j}] is not finite")));
            }
            if i != j && v < 0.0 {
                return Err(Error::Validation(format!("friction coefficient b[{i}][{j}] = {v} is negative")));
            }
            if i != j && (v - b[(j, i)]).abs() > 1e-14 * v.abs().max(b[(j, i)].abs()) {
                return Err(Error::Validation(format!(
                    "friction matrix not symmetric: b[{i}][{j}] = {v}, b[{j}][{i}] = {}",
                    b[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

fn check_density(rho: &[f64]) -> Result<()> {
    match rho.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
        Some(i) => Err(Error::Domain(format!("density of species {i} is {} (must be positive)", rho[i]))),
        None => Ok(()),
    }
}

fn graph_connected(b: &Matrix) -> bool {
    let n = b.rows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && i != j && b[(i, j)] > 0.0 {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Connectivity of the friction graph plus a rank probe of `τ` at `rho`.
pub fn check_hypothesis_n_at(b: &Matrix, rho: &[f64]) -> Result<HypothesisNReport> {
    check_coefficients(b)?;
    let n = b.rows();
    if rho.len() != n {
        return Err(Error::Validation(format!("density vector has {} entries, expected {n}", rho.len())));
    }
    let connected = n == 0 || graph_connected(b);
    let tau = build_tau(b, rho)?;
    let sv = linalg::symmetric_singular_values(tau.matrix());
    let rank_deficiency_one = if n < 2 {
        true
    } else {
        let s1 = sv[0];
        s1 > 0.0 && sv[n - 2] / s1 > RANK_TOL && sv[n - 1] / s1 < RANK_TOL
    };
    Ok(HypothesisNReport { n, connected, rho_probe: rho.to_vec(), singular_values: sv, rank_deficiency_one })
}

/// Connectivity check with a rank probe at a reproducible random density
/// vector drawn from `[0.5, 2]ⁿ`.
pub fn check_hypothesis_n(b: &Matrix) -> Result<HypothesisNReport> {
    use rand::SeedableRng;
    check_coefficients(b)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let rho: Vec<f64> = (0..b.rows()).map(|_| rng.gen_range(0.5..2.0)).collect();
    check_hypothesis_n_at(b, &rho)
}

/// `τ(ρ)`.
pub fn build_tau(b: &Matrix, rho: &[f64]) -> Result<TauMatrix> {
    check_density(rho)?;
    let n = rho.len();
    if b.rows() != n || b.cols() != n {
        return Err(Error::Validation(format!("friction matrix is not {n}x{n}")));
    }
    let mut t = Matrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = -b[(i, j)] * rho[i] * rho[j];
                t[(i, j)] = v;
                diag -= v;
            }
        }
        t[(i, i)] = diag;
    }
    Ok(TauMatrix(t))
}

/// `Q⁻¹` in closed form.
pub fn q_inverse(rho: &[f64]) -> Matrix {
    let n = rho.len();
    let total: f64 = rho.iter().sum();
    Matrix::from_fn(n - 1, n - 1, |i, j| {
        let d = if i == j { rho[i] } else { 0.0 };
        d - rho[i] * rho[j] / total
    })
}

/// `Q_ij = δ_ij/ρ_j + 1/ρ_n`.
pub fn q_matrix(rho: &[f64]) -> Matrix {
    let n = rho.len();
    let last = 1.0 / rho[n - 1];
    Matrix::from_fn(n - 1, n - 1, |i, j| if i == j { 1.0 / rho[j] + last } else { last })
}

/// Embedding `G`.
pub fn embedding(n: usize) -> Matrix {
    Matrix::from_fn(n, n.saturating_sub(1), |i, j| {
        if i == j {
            1.0
        } else if i == n - 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// `τ̃⁻¹`, `Q⁻¹`, `D̃` and `D` at `rho`.
pub fn reduced_operators(b: &Matrix, rho: &[f64]) -> Result<ReducedOperators> {
    let tau = build_tau(b, rho)?;
    let n = rho.len();
    let k = n - 1;
    let tau_red_inv = if k == 0 {
        Matrix::zeros(0, 0)
    } else {
        Lu::new(&tau.0.leading_block(k))
            .map_err(|e| Error::Structural(format!("leading friction block is singular: {e}")))?
            .inverse()
    };
    let q_inv = q_inverse(rho);
    let d_tilde = q_inv.matmul(&tau_red_inv).matmul(&q_inv);
    let g = embedding(n);
    let d_full = g.matmul(&d_tilde).matmul(&g.transpose());
    Ok(ReducedOperators { rho: rho.to_vec(), tau_red_inv, q_inv, d_tilde, d_full, g })
}

/// `ρ_i u_i = −(Q⁻¹ τ̃⁻¹ d̃)_i` from precomputed operators; the last species
/// closes `Σ ρ_i u_i = 0`. Returns the momenta `ρ_i u_i`.
pub fn constrained_momenta(ops: &ReducedOperators, d: &[f64]) -> Vec<f64> {
    let n = ops.rho.len();
    let k = n - 1;
    let w = ops.tau_red_inv.matvec(&d[..k]);
    let mut out: Vec<f64> = ops.q_inv.matvec(&w).into_iter().map(|v| -v).collect();
    let s: f64 = out.iter().sum();
    out.push(-s);
    out
}

/// Unique `u` with `−Σ_j b_ij ρ_i ρ_j (u_i − u_j) = d_i` and `Σ ρ_i u_i = 0`.
pub fn solve_constrained(b: &Matrix, rho: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    if d.len() != rho.len() {
        return Err(Error::Validation("driving force and density lengths differ".into()));
    }
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sum: f64 = d.iter().sum();
    if sum.abs() > 1e-10 * norm.max(f64::MIN_POSITIVE) && sum != 0.0 {
        return Err(Error::Precondition(format!("driving force must sum to zero, sums to {sum:e}")));
    }
    let ops = reduced_operators(b, rho)?;
    Ok(constrained_momenta(&ops, d).iter().zip(rho).map(|(m, r)| m / r).collect())
}

/// `d_i = ρ_i ∇μ_i − (ρ_i/ρ) Σ_j ρ_j ∇μ_j`; the last entry closes the sum so
/// that `Σ d_i = 0` exactly.
pub fn driving_force(rho: &[f64], grad_mu: &[f64]) -> Vec<f64> {
    let n = rho.len();
    let total: f64 = rho.iter().sum();
    let mean: f64 = rho.iter().zip(grad_mu).map(|(r, g)| r * g).sum::<f64>() / total;
    let mut d: Vec<f64> = (0..n).map(|i| rho[i] * (grad_mu[i] - mean)).collect();
    if n > 0 {
        let head: f64 = d[..n - 1].iter().sum();
        d[n - 1] = -head;
    }
    d
}

/// Diffusive momenta `ρ_i u_i = −ε Σ_j D_ij ∇μ_j`.
pub fn relative_velocity_flux(ops: &ReducedOperators, eps: f64, grad_mu: &[f64]) -> Vec<f64> {
    ops.d_full.matvec(grad_mu).into_iter().map(|v| -eps * v).collect()
}

/// Reduced isentropic energy Hessian `Gᵀ diag(h″) G`.
pub fn reduced_hessian(d2h: &[f64]) -> Matrix {
    let n = d2h.len();
    let last = d2h[n - 1];
    Matrix::from_fn(n - 1, n - 1, |i, j| if i == j { d2h[i] + last } else { last })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicityReport {
    /// Spectrum of `D̃ Ẽ″`, ascending.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub passes: bool,
}

/// Spectrum of `D̃ Ẽ″` via the similar symmetric matrix `Lᵀ D̃ L`, where
/// `Ẽ″ = L Lᵀ`.
pub fn parabolicity_check(ops: &ReducedOperators, hessian_red: &Matrix) -> Result<ParabolicityReport> {
    if hessian_red.rows() != ops.d_tilde.rows() || !hessian_red.is_square() {
        return Err(Error::Validation("Hessian shape does not match the reduced operators".into()));
    }
    if hessian_red.asymmetry() > 1e-12 * hessian_red.max_abs() {
        return Err(Error::Precondition("energy Hessian is not symmetric".into()));
    }
    let l = linalg::cholesky(hessian_red)?;
    let sim = l.transpose().matmul(&ops.d_tilde).matmul(&l);
    let eigenvalues = linalg::symmetric_eigenvalues(&sim);
    let min_eigenvalue = eigenvalues.first().copied().unwrap_or(f64::INFINITY);
    Ok(ParabolicityReport { passes: min_eigenvalue > 0.0, eigenvalues, min_eigenvalue })
}

/// `ν = λ_min(Qᵀ τ̃ Q) / n`, so that
/// `½ Σ b_ij ρ_i ρ_j |v_i − v_j|² ≥ ν Σ ρ_i² |v_i − v̄|²`.
pub fn coercivity_constant(b: &Matrix, rho: &[f64]) -> Result<f64> {
    let n = rho.len();
    if n < 2 {
        return Err(Error::Precondition("coercivity needs at least two species".into()));
    }
    let tau = build_tau(b, rho)?;
    let q = q_matrix(rho);
    let m = q.transpose().matmul(&tau.0.leading_block(n - 1)).matmul(&q);
    Ok(linalg::symmetric_eigenvalues(&m)[0] / n as f64)
}

/// Friction force `f_i = −Σ_j b_ij ρ_i ρ_j (v_i − v_j)`.
pub fn friction_force(b: &Matrix, rho: &[f64], v: &[f64]) -> Vec<f64> {
    let n = rho.len();
    (0..n)
        .map(|i| {
            let mut f = 0.0;
            for j in 0..n {
                if j != i {
                    f -= b[(i, j)] * rho[i] * rho[j] * (v[i] - v[j]);
                }
            }
            f
        })
        .collect()
}

/// `½ Σ_{i,j} b_ij ρ_i ρ_j |v_i − v_j|²`.
pub fn friction_dissipation(b: &Matrix, rho: &[f64], v: &[f64]) -> f64 {
    let n = rho.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dv = v[i] - v[j];
            s += b[(i, j)] * rho[i] * rho[j] * dv * dv;
        }
    }
    s
}

/// Right-hand side `Σ ρ_i² |v_i − v̄|²` of the coercivity inequality.
pub fn barycentric_spread(rho: &[f64], v: &[f64]) -> f64 {
    let total: f64 = rho.iter().sum();
    let vbar = rho.iter().zip(v).map(|(r, v)| r * v).sum::<f64>() / total;
    rho.iter().zip(v).map(|(r, v)| r * r * (v - vbar) * (v - vbar)).sum()
}

/// Reusable buffers for the per-cell hot paths of the solvers.
#[derive(Clone, Debug)]
pub struct FrictionWorkspace {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
    col: Vec<f64>,
    tmp: Vec<f64>,
    w: Vec<f64>,
    dt: Vec<f64>,
}

impl FrictionWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            a: vec![0.0; n * n],
            piv: vec![0; n],
            col: vec![0.0; n],
            tmp: vec![0.0; n],
            w: vec![0.0; n * n],
            dt: vec![0.0; n * n],
        }
    }

    /// Writes the row-major `n×n` diffusion matrix `D(ρ)` into `out`.
    /// Same operator as [`reduced_operators`] without intermediate matrices.
    pub fn diffusion_matrix(&mut self, b: &Matrix, rho: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let k = n - 1;
        out[..n * n].iter_mut().for_each(|v| *v = 0.0);
        if k == 0 {
            return Ok(());
        }
        let total: f64 = rho.iter().sum();
        let qinv =
            |i: usize, j: usize| if i == j { rho[i] - rho[i] * rho[j] / total } else { -rho[i] * rho[j] / total };
        // leading block of τ
        for i in 0..k {
            let mut diag = 0.0;
            for j in 0..n {
                if j != i {
                    let v = b[(i, j)] * rho[i] * rho[j];
                    diag += v;
                    if j < k {
                        self.a[i * k + j] = -v;
                    }
                }
            }
            self.a[i * k + i] = diag;
        }
        lu_factor_in_place(&mut self.a[..k * k], k, &mut self.piv[..k])
            .map_err(|e| Error::Structural(format!("leading friction block is singular: {e}")))?;
        // w = τ̃⁻¹ Q⁻¹, column by column
        for j in 0..k {
            for i in 0..k {
                self.col[i] = qinv(i, j);
            }
            lu_solve_in_place(&self.a[..k * k], k, &self.piv[..k], &mut self.col[..k], &mut self.tmp[..k]);
            for i in 0..k {
                self.w[i * k + j] = self.col[i];
            }
        }
        // D̃ = Q⁻¹ w
        for i in 0..k {
            for j in 0..k {
                let mut s = 0.0;
                for l in 0..k {
                    s += qinv(i, l) * self.w[l * k + j];
                }
                self.dt[i * k + j] = s;
            }
        }
        // D = G D̃ Gᵀ
        let mut corner = 0.0;
        for i in 0..k {
            let mut row = 0.0;
            for j in 0..k {
                let v = self.dt[i * k + j];
                out[i * n + j] = v;
                row += v;
            }
            out[i * n + k] = -row;
            corner += row;
        }
        for j in 0..k {
            let mut colsum = 0.0;
            for i in 0..k {
                colsum += self.dt[i * k + j];
            }
            out[k * n + j] = -colsum;
        }
        out[k * n + k] = corner;
        Ok(())
    }

    /// Backward-Euler friction update in one cell: solves
    /// `(diag(ρ) + θ τ(ρ)) v′ = m` and overwrites `m` with `ρ v′`.
    /// Returns `diss(v′)`, the dissipation rate at the new velocities.
    pub fn backward_euler(&mut self, b: &Matrix, rho: &[f64], m: &mut [f64], theta: f64) -> Result<f64> {
        let n = self.n;
        let v0 = m[0] / rho[0];
        if (1..n).all(|i| m[i] / rho[i] == v0) {
            return Ok(0.0);
        }
        for i in 0..n {
            let mut diag = rho[i];
            for j in 0..n {
                if j != i {
                    let v = theta * b[(i, j)] * rho[i] * rho[j];
                    self.a[i * n + j] = -v;
                    diag += v;
                }
            }
            self.a[i * n + i] = diag;
        }
        lu_factor_in_place(&mut self.a, n, &mut self.piv)?;
        self.col.copy_from_slice(&m[..n]);
        lu_solve_in_place(&self.a, n, &self.piv, &mut self.col, &mut self.tmp);
        // restore exact momentum conservation lost to rounding
        let before: f64 = m[..n].iter().sum();
        for i in 0..n {
            m[i] = rho[i] * self.col[i];
        }
        let after: f64 = m[..n].iter().sum();
        let total: f64 = rho.iter().sum();
        let shift = (before - after) / total;
        for i in 0..n {
            m[i] += rho[i] * shift;
            self.col[i] += shift;
        }
        Ok(friction_dissipation(b, rho, &self.col))
    }

    /// Explicit friction update `m′ = m − θ τ v`; returns `diss(v)`.
    pub fn explicit(&mut self, b: &Matrix, rho: &[f64], m: &mut [f64], theta: f64) -> f64 {
        let n = self.n;
        for i in 0..n {
            self.col[i] = m[i] / rho[i];
        }
        let f = friction_force(b, rho, &self.col[..n]);
        for i in 0..n {
            m[i] += theta * f[i];
        }
        friction_dissipation(b, rho, &self.col[..n])
    }
}

/// A random connected friction problem.
#[derive(Clone, Debug, PartialEq)]
pub struct FrictionInstance {
    pub b: Matrix,
    pub rho: Vec<f64>,
}

/// Random connected coefficients: a random spanning tree plus extra edges,
/// weights in `[0.1, 10]` on a log scale.
pub fn random_coefficients<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let mut b = Matrix::zeros(n, n);
    let weight = |rng: &mut R| 10f64.powf(rng.gen_range(-1.0..1.0));
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let w = weight(rng);
        b[(i, j)] = w;
        b[(j, i)] = w;
    }
    for i in 0..n {
        for j in i + 1..n {
            if b[(i, j)] == 0.0 && rng.gen_bool(0.4) {
                let w = weight(rng);
                b[(i, j)] = w;
                b[(j, i)] = w;
            }
        }
    }
    b
}

/// Densities drawn log-uniformly from `[lo, hi]`.
pub fn random_density<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|_| rng.gen_range(a..=b).exp()).collect()
}

pub fn random_instance<R: Rng>(rng: &mut R, n: usize, rho_lo: f64, rho_hi: f64) -> FrictionInstance {
    FrictionInstance { b: random_coefficients(rng, n), rho: random_density(rng, n, rho_lo, rho_hi) }
}

/// Reproducible ensemble with species counts cycling through `n_min..=n_max`.
pub fn ensemble(
    seed: u64,
    count: usize,
    n_min: usize,
    n_max: usize,
    rho_lo: f64,
    rho_hi: f64,
) -> Vec<FrictionInstance> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let span = n_max - n_min + 1;
    (0..count).map(|k| random_instance(&mut rng, n_min + k % span, rho_lo, rho_hi)).collect()
}

/// Certificate for one friction problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: usize,
    pub connected: bool,
    pub rank_deficiency_one: bool,
    /// `max |D − Dᵀ| / max |D|`.
    pub d_asymmetry: f64,
    /// `max |D 1| / max |D|`.
    pub d_kernel: f64,
    /// Smallest eigenvalue of `D` relative to its largest.
    pub d_min_eigenvalue: f64,
    /// Rank of `D` with relative threshold [`RANK_TOL`].
    pub d_rank: usize,
    pub parabolic_min_eigenvalue: f64,
    pub coercivity: f64,
    /// Relative friction-row and constraint residual of the constrained solve.
    pub solve_residual: f64,
    /// Relative difference between `−εD∇μ` and `ρ ⊙ solve(ε d)`.
    pub two_path_deviation: f64,
    pub passes: bool,
}

/// Runs the full certificate suite for `(b, ρ)` with the energy Hessian
/// entries `d2h` and a probe gradient `grad_mu`.
pub fn certify(b: &Matrix, rho: &[f64], d2h: &[f64], grad_mu: &[f64], eps: f64) -> Result<Certificate> {
    let n = rho.len();
    let hyp = check_hypothesis_n_at(b, rho)?;
    if n < 2 {
        return Err(Error::Precondition("certificates need at least two species".into()));
    }
    let ops = reduced_operators(b, rho)?;
    let d = &ops.d_full;
    let scale = d.max_abs().max(f64::MIN_POSITIVE);
    let d_asymmetry = d.asymmetry() / scale;
    let d_kernel = d.matvec(&vec![1.0; n]).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    let ev = linalg::symmetric_eigenvalues(d);
    let top = ev[n - 1].abs().max(f64::MIN_POSITIVE);
    let d_min_eigenvalue = ev[0] / top;
    let d_rank = ev.iter().filter(|e| e.abs() > RANK_TOL * top).count();
    let par = parabolicity_check(&ops, &reduced_hessian(d2h))?;
    let coercivity = coercivity_constant(b, rho)?;

    let force = driving_force(rho, grad_mu);
    let scaled: Vec<f64> = force.iter().map(|v| eps * v).collect();
    let u = solve_constrained(b, rho, &scaled)?;
    let solve_residual = constrained_residual(b, rho, &scaled, &u);
    let flux = relative_velocity_flux(&ops, eps, grad_mu);
    let fscale = flux.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let two_path_deviation =
        flux.iter().zip(u.iter().zip(rho)).map(|(f, (u, r))| (f - r * u).abs()).fold(0.0, f64::max) / fscale;

    let passes = hyp.connected
        && hyp.rank_deficiency_one
        && d_asymmetry <= 1e-12
        && d_kernel <= 1e-12
        && d_min_eigenvalue >= -1e-12
        && d_rank == n - 1
        && par.passes
        && coercivity > 0.0
        && solve_residual <= 1e-10
        && two_path_deviation <= 1e-10;
    Ok(Certificate {
        n,
        connected: hyp.connected,
        rank_deficiency_one: hyp.rank_deficiency_one,
        d_asymmetry,
        d_kernel,
        d_min_eigenvalue,
        d_rank,
        parabolic_min_eigenvalue: par.min_eigenvalue,
        coercivity,
        solve_residual,
        two_path_deviation,
        passes,
    })
}

/// `max(|−τu − d|, |Σρu|)` relative to `‖d‖ + 1` and the momentum scale.
pub fn constrained_residual(b: &Matrix, rho: &[f64], d: &[f64], u: &[f64]) -> f64 {
    let f = friction_force(b, rho, u);
    let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt() + 1.0;
    let row = f.iter().zip(d).map(|(f, d)| (f - d).abs()).fold(0.0, f64::max) / dn;
    let mom: f64 = rho.iter().zip(u).map(|(r, u)| r * u).sum();
    let mscale = rho.iter().zip(u).map(|(r, u)| (r * u).abs()).sum::<f64>() + 1.0;
    row.max(mom.abs() / mscale)
}
