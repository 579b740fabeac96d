//! Periodic 1D grid, cell-centred fields and difference operators.
//!
//! Cell `c` has centre `x_c = (c + ½) dx`. Face `c` sits at `x_{c+½}`, between
//! cells `c` and `c + 1`; face-indexed arrays use that convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell-centred or face-indexed values on a [`Grid1D`].
pub type ScalarField = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n_cells: usize,
    length: f64,
    dx: f64,
}

impl Grid1D {
    pub const MIN_CELLS: usize = 8;

    pub fn new(n_cells: usize, length: f64) -> Result<Self> {
        if n_cells < Self::MIN_CELLS {
            return Err(Error::Validation(format!("grid needs at least {} cells, got {n_cells}", Self::MIN_CELLS)));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Validation(format!("grid length must be positive, got {length}")));
        }
        Ok(Self { n_cells, length, dx: length / n_cells as f64 })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self, c: usize) -> f64 {
        (c as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|c| self.x(c)).collect()
    }

    #[inline]
    pub fn next(&self, c: usize) -> usize {
        if c + 1 == self.n_cells {
            0
        } else {
            c + 1
        }
    }

    #[inline]
    pub fn prev(&self, c: usize) -> usize {
        if c == 0 {
            self.n_cells - 1
        } else {
            c - 1
        }
    }

    fn check(&self, f: &[f64]) {
        assert_eq!(f.len(), self.n_cells, "field length does not match grid");
    }

    /// Centred gradient `(f_{c+1} − f_{c−1}) / 2dx`.
    pub fn grad(&self, f: &[f64]) -> ScalarField {
        self.check(f);
        let inv = 0.5 / self.dx;
        (0..self.n_cells).map(|c| (f[self.next(c)] - f[self.prev(c)]) * inv).collect()
    }

    /// Face gradient `(f_{c+1} − f_c) / dx` at face `c`.
    pub fn face_grad(&self, f: &[f64]) -> ScalarField {
        self.check(f);
        let inv = 1.0 / self.dx;
        (0..self.n_cells).map(|c| (f[self.next(c)] - f[c]) * inv).collect()
    }

    /// Face average `(f_c + f_{c+1}) / 2` at face `c`.
    pub fn face_avg(&self, f: &[f64]) -> ScalarField {
        self.check(f);
        (0..self.n_cells).map(|c| 0.5 * (f[c] + f[self.next(c)])).collect()
    }

    /// Conservative divergence `(F_{c+½} − F_{c−½}) / dx` of face fluxes.
    pub fn div_flux(&self, face: &[f64]) -> ScalarField {
        self.check(face);
        let inv = 1.0 / self.dx;
        (0..self.n_cells).map(|c| (face[c] - face[self.prev(c)]) * inv).collect()
    }

    /// Three-point Laplacian.
    pub fn laplacian(&self, f: &[f64]) -> ScalarField {
        self.check(f);
        let inv = 1.0 / (self.dx * self.dx);
        (0..self.n_cells).map(|c| (f[self.next(c)] - 2.0 * f[c] + f[self.prev(c)]) * inv).collect()
    }

    /// `Σ f dx`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.check(f);
        f.iter().sum::<f64>() * self.dx
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.n_cells == other.n_cells && self.length == other.length
    }
}

/// Per-species densities and momenta on a shared grid, at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureState {
    pub grid: Grid1D,
    pub t: f64,
    pub rho: Vec<ScalarField>,
    pub m: Vec<ScalarField>,
}

impl MixtureState {
    pub fn new(grid: Grid1D, t: f64, rho: Vec<ScalarField>, m: Vec<ScalarField>) -> Result<Self> {
        if rho.is_empty() || rho.len() != m.len() {
            return Err(Error::Validation("density and momentum need the same positive species count".into()));
        }
        let nc = grid.n_cells();
        if rho.iter().chain(&m).any(|f| f.len() != nc) {
            return Err(Error::GridMismatch(format!("field length differs from {nc} cells")));
        }
        let s = Self { grid, t, rho, m };
        s.check_finite()?;
        Ok(s)
    }

    /// Uniform state with species densities `rho` moving at velocity `v`.
    pub fn uniform(grid: Grid1D, rho: &[f64], v: f64) -> Result<Self> {
        let nc = grid.n_cells();
        Self::new(grid, 0.0, rho.iter().map(|r| vec![*r; nc]).collect(), rho.iter().map(|r| vec![r * v; nc]).collect())
    }

    pub fn n_species(&self) -> usize {
        self.rho.len()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.rho.iter().chain(&self.m).flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain("state contains non-finite values".into()))
        }
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_floor(&self, floor: f64) -> Result<()> {
        self.check_finite()?;
        let m = self.min_rho();
        if m >= floor {
            Ok(())
        } else {
            Err(Error::Domain(format!("density {m:e} below floor {floor:e}")))
        }
    }

    pub fn velocity(&self, i: usize) -> ScalarField {
        self.m[i].iter().zip(&self.rho[i]).map(|(m, r)| m / r).collect()
    }

    pub fn total_density(&self) -> ScalarField {
        let mut out = self.rho[0].clone();
        for r in &self.rho[1..] {
            out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
        }
        out
    }

    pub fn total_momentum_field(&self) -> ScalarField {
        let mut out = self.m[0].clone();
        for r in &self.m[1..] {
            out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// `v = Σ m_i / Σ ρ_i` pointwise.
    pub fn barycentric_velocity(&self, floor: f64) -> Result<ScalarField> {
        let rho = self.total_density();
        if let Some(c) = rho.iter().position(|r| !(*r >= floor && *r > 0.0)) {
            return Err(Error::Domain(format!("total density {:e} below floor at cell {c}", rho[c])));
        }
        Ok(self.total_momentum_field().iter().zip(&rho).map(|(m, r)| m / r).collect())
    }

    pub fn masses(&self) -> Vec<f64> {
        self.rho.iter().map(|r| self.grid.integrate(r)).collect()
    }

    pub fn total_momentum(&self) -> f64 {
        self.m.iter().map(|m| self.grid.integrate(m)).sum()
    }

    pub fn ensure_same_grid(&self, other: &MixtureState) -> Result<()> {
        if !self.grid.same_as(&other.grid) || self.n_species() != other.n_species() {
            return Err(Error::GridMismatch(format!(
                "{} cells x {} species vs {} cells x {} species",
                self.grid.n_cells(),
                self.n_species(),
                other.grid.n_cells(),
                other.n_species()
            )));
        }
        Ok(())
    }
}
