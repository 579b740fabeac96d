//! The mixture model: species energy laws, friction coefficients and ε.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::friction;
use crate::linalg::Matrix;
use crate::thermo::EnergyLaw;

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureModel {
    laws: Vec<EnergyLaw>,
    b: Matrix,
    eps: f64,
}

/// Serializable mirror of [`MixtureModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub laws: Vec<EnergyLaw>,
    pub b: Vec<Vec<f64>>,
    pub eps: f64,
}

impl MixtureModel {
    /// Validates and builds a model. `eps = 0` is accepted (it selects the
    /// formal limit in the Chapman–Enskog solver) but rejected by the
    /// relaxation solver.
    pub fn new(laws: Vec<EnergyLaw>, b: Matrix, eps: f64) -> Result<Self> {
        let n = laws.len();
        if n == 0 {
            return Err(Error::Validation("a mixture needs at least one species".into()));
        }
        if b.rows() != n || b.cols() != n {
            return Err(Error::Validation(format!(
                "friction matrix is {}x{} but there are {n} species",
                b.rows(),
                b.cols()
            )));
        }
        for law in &laws {
            law.validate()?;
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Validation(format!("eps must be finite and nonnegative, got {eps}")));
        }
        let report = friction::check_hypothesis_n(&b)?;
        if !report.connected {
            return Err(Error::Validation("friction graph is not connected".into()));
        }
        Ok(Self { laws, b, eps })
    }

    /// Two species with friction coefficient `b12`.
    pub fn binary(law1: EnergyLaw, law2: EnergyLaw, b12: f64, eps: f64) -> Result<Self> {
        let b = Matrix::from_rows(&[vec![0.0, b12], vec![b12, 0.0]])?;
        Self::new(vec![law1, law2], b, eps)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        Self::new(spec.laws.clone(), Matrix::from_rows(&spec.b)?, spec.eps)
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec { laws: self.laws.clone(), b: self.b.to_rows(), eps: self.eps }
    }

    pub fn n(&self) -> usize {
        self.laws.len()
    }

    pub fn laws(&self) -> &[EnergyLaw] {
        &self.laws
    }

    pub fn law(&self, i: usize) -> &EnergyLaw {
        &self.laws[i]
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.laws.clone(), self.b.clone(), eps)
    }

    pub fn has_capillarity(&self) -> bool {
        self.laws.iter().any(EnergyLaw::has_capillarity)
    }
}
