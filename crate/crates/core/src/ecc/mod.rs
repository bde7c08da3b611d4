//! Empirical controllability covariances.
//!
//! For every candidate input the state deviations of a set of perturbed
//! runs are accumulated as Σ w·(x_k − x0_k)(x_k − x0_k)ᵀ·Δt with the left
//! rectangle rule. Per-input matrices add up to the covariance of any input
//! subset, which is what the placement search exploits.

mod empirical;
mod linear;
mod protocols;
mod store;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::netmodel::BusId;

pub use empirical::{empirical_covariance, Baseline, PerturbedRun};
pub use linear::{
    analytic_gramian, linear_impulse_covariance, linear_impulse_runs, simulate_linear_impulse, LinearSystem,
};
pub use protocols::{build_covariances, ecc_fault_specified, ecc_fault_unspecified, CandidateEcc, EccMode};
pub(crate) use store::write_atomic;
pub use store::CovarianceStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// +I
    Positive,
    /// −I
    Negative,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// One-step rectangle of area c (height c/Δt).
    Impulse,
    /// Closed-loop device switched in from t = 0 (fault-specified protocol).
    StepSchedule,
    /// c·S(t − t1) − c·S(t − t2) applied to the reactive load.
    Pulse { t1: f64, t2: f64 },
}

/// How each sample of a run is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// 1/(r·s·c²) from the nominal size.
    Size,
    /// 1/(r·s·Q_k²) from the instantaneous output; samples with Q_k = 0 are skipped.
    InstantaneousOutput,
}

/// What the perturbed runs of the fault-specified protocol are compared to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The faulted run without any var support, point by point.
    FaultedBaseline,
    /// The constant pre-disturbance equilibrium.
    PreDisturbance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationPlan {
    pub directions: Vec<Direction>,
    /// Sizes c_m (Mvar for the network protocols).
    pub sizes: Vec<f64>,
    pub shape: Shape,
    pub weighting: Weighting,
    pub reference: Reference,
    /// Monitored bus subset; `None` monitors every bus.
    pub monitored: Option<Vec<BusId>>,
}

pub const DEFAULT_SIZES: [f64; 6] = [10.0, 20.0, 40.0, 80.0, 160.0, 200.0];

impl ExcitationPlan {
    pub fn fault_specified() -> Self {
        ExcitationPlan {
            directions: vec![Direction::Positive],
            sizes: DEFAULT_SIZES.to_vec(),
            shape: Shape::StepSchedule,
            weighting: Weighting::InstantaneousOutput,
            reference: Reference::FaultedBaseline,
            monitored: None,
        }
    }

    /// Reactive-load reduction pulse on [1 s, 2 s).
    pub fn fault_unspecified() -> Self {
        ExcitationPlan {
            directions: vec![Direction::Negative],
            sizes: DEFAULT_SIZES.to_vec(),
            shape: Shape::Pulse { t1: 1.0, t2: 2.0 },
            weighting: Weighting::Size,
            reference: Reference::PreDisturbance,
            monitored: None,
        }
    }

    pub fn impulse(sizes: Vec<f64>, directions: Vec<Direction>) -> Self {
        ExcitationPlan {
            directions,
            sizes,
            shape: Shape::Impulse,
            weighting: Weighting::Size,
            reference: Reference::PreDisturbance,
            monitored: None,
        }
    }

    pub fn r(&self) -> usize {
        self.directions.len()
    }

    pub fn s(&self) -> usize {
        self.sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions.is_empty() || self.sizes.is_empty() {
            return Err(Error::InvalidInput("excitation plan needs at least one direction and one size".into()));
        }
        if self.sizes.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidInput("excitation sizes must be positive".into()));
        }
        if let Shape::Pulse { t1, t2 } = self.shape {
            if !(t1 >= 0.0 && t1 < t2) {
                return Err(Error::InvalidInput(format!("pulse needs 0 <= t1 < t2, got t1 = {t1}, t2 = {t2}")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("plan serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub bus_index: Vec<BusId>,
    /// Symmetric, pu²·s per unit of size².
    pub matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn zeros(bus_index: Vec<BusId>) -> Self {
        let n = bus_index.len();
        CovarianceMatrix { bus_index, matrix: DMatrix::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.bus_index.len()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Smallest and largest eigenvalue of the symmetric part.
    pub fn eigen_range(&self) -> (f64, f64) {
        if self.dim() == 0 {
            return (0.0, 0.0);
        }
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let ev = sym.symmetric_eigenvalues();
        (ev.min(), ev.max())
    }

    /// PSD up to round-off: λ_min ≥ −tol·max(λ_max, 0).
    pub fn is_psd(&self, tol: f64) -> bool {
        let (lo, hi) = self.eigen_range();
        lo >= -tol * hi.max(0.0)
    }

    pub fn add_assign(&mut self, other: &CovarianceMatrix) -> Result<()> {
        if self.bus_index != other.bus_index {
            return Err(Error::GridMismatch("covariances use different bus indices".into()));
        }
        self.matrix += &other.matrix;
        Ok(())
    }
}

/// W = Σ z_i W_i over the selected entries of `z`.
pub fn assemble(z: &[bool], covariances: &[CovarianceMatrix]) -> Result<CovarianceMatrix> {
    if z.len() != covariances.len() {
        return Err(Error::InvalidInput(format!(
            "selection has {} entries but {} covariances were supplied",
            z.len(),
            covariances.len()
        )));
    }
    let first = covariances.first().ok_or_else(|| Error::InvalidInput("no covariances supplied".into()))?;
    let mut out = CovarianceMatrix::zeros(first.bus_index.clone());
    for (w, &pick) in covariances.iter().zip(z) {
        if pick {
            out.add_assign(w)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> CovarianceMatrix {
        CovarianceMatrix {
            bus_index: (1..=v.len() as u32).collect(),
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v)),
        }
    }

    #[test]
    fn assemble_selections() {
        let ws = vec![diag(&[1.0, 2.0]), diag(&[3.0, 5.0])];
        assert_eq!(assemble(&[false, false], &ws).unwrap().matrix, DMatrix::zeros(2, 2));
        assert_eq!(assemble(&[false, true], &ws).unwrap(), ws[1]);
        assert_eq!(assemble(&[true, true], &ws).unwrap().matrix, &ws[0].matrix + &ws[1].matrix);
        assert!(assemble(&[true], &ws).is_err());
    }

    #[test]
    fn plan_defaults_and_hash() {
        let p = ExcitationPlan::fault_unspecified();
        p.validate().unwrap();
        assert_eq!(p.sizes, vec![10.0, 20.0, 40.0, 80.0, 160.0, 200.0]);
        assert_eq!(p.hash(), ExcitationPlan::fault_unspecified().hash());
        assert_ne!(p.hash(), ExcitationPlan::fault_specified().hash());
        let mut bad = p.clone();
        bad.sizes.push(0.0);
        assert!(bad.validate().is_err());
        bad.sizes.clear();
        assert!(bad.validate().is_err());
    }
}
