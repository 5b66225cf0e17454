//! Product-geometric stationary laws of cloud-interior gaps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Independent geometric gaps: `P(z) = prod_j rho_j^{z_j} (1 - rho_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricProductLaw {
    rhos: Vec<f64>,
}

impl GeometricProductLaw {
    /// Every parameter must lie in the open interval (0, 1).
    pub fn new(rhos: Vec<f64>) -> Result<Self> {
        if let Some((index, &rho)) = rhos.iter().enumerate().find(|(_, r)| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::LoadNotBelowOne { index, rho });
        }
        Ok(Self { rhos })
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    pub fn dim(&self) -> usize {
        self.rhos.len()
    }

    pub fn pmf(&self, z: &[u64]) -> Result<f64> {
        if z.len() != self.rhos.len() {
            return Err(Error::DimensionMismatch { expected: self.rhos.len(), got: z.len() });
        }
        Ok(self.pmf_unchecked(z))
    }

    pub(crate) fn pmf_unchecked(&self, z: &[u64]) -> f64 {
        self.rhos
            .iter()
            .zip(z)
            .map(|(&r, &k)| geometric_pmf(r, k))
            .product()
    }

    /// Marginal pmf of coordinate `j` at `k`.
    pub fn marginal_pmf(&self, j: usize, k: u64) -> f64 {
        geometric_pmf(self.rhos[j], k)
    }

    /// Mass of the box `{0..=cap}^k`: `prod_j (1 - rho_j^{cap+1})`.
    pub fn truncated_mass(&self, cap: u64) -> f64 {
        self.rhos.iter().map(|&r| 1.0 - r.powf(cap as f64 + 1.0)).product()
    }

    /// Limiting expected span of the cloud, `sum_j 1 / (1 - rho_j)`.
    pub fn expected_width(&self) -> f64 {
        self.rhos.iter().map(|&r| 1.0 / (1.0 - r)).sum()
    }

    /// Mean of coordinate `j`, `rho / (1 - rho)`.
    pub fn marginal_mean(&self, j: usize) -> f64 {
        self.rhos[j] / (1.0 - self.rhos[j])
    }
}

/// `rho^k (1 - rho)`.
pub fn geometric_pmf(rho: f64, k: u64) -> f64 {
    match i32::try_from(k) {
        Ok(k) => rho.powi(k) * (1.0 - rho),
        Err(_) => 0.0,
    }
}

/// Expected width computed directly from the loads; errors on any load >= 1.
pub fn expected_cloud_width(rhos: &[f64]) -> Result<f64> {
    Ok(GeometricProductLaw::new(rhos.to_vec())?.expected_width())
}
