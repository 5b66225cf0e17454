//! Closed-form constants for fluctuations of a single stable cloud.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hv, interior_loads, RateSystem};

/// Speed and diffusivity of `X_1(t)`: `(X_1(t) - speed t) / sqrt(t)` is
/// asymptotically `N(0, sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltConstants {
    pub speed: f64,
    pub sigma2: f64,
}

/// Two-particle constants: speed `(b1 b2 - a1 a2) / (a2 + b1)` and
/// variance `(a1 a2 + b1 b2) / (a2 + b1)`.
pub fn clt_constants_two_particle(rates: &RateSystem) -> Result<CltConstants> {
    rates.require_standard()?;
    if rates.particles() != 2 {
        return Err(Error::NotTwoParticles(rates.particles()));
    }
    let (a1, a2) = (rates.a()[0], rates.a()[1]);
    let (b1, b2) = (rates.b()[0], rates.b()[1]);
    let arrival = a1 + b2;
    let service = a2 + b1;
    if arrival >= service {
        return Err(Error::UnstablePair { arrival, service });
    }
    Ok(CltConstants { speed: (b1 * b2 - a1 * a2) / service, sigma2: (a1 * a2 + b1 * b2) / service })
}

/// Loads of a single stable cloud; errors if any load is not below one.
pub fn single_cloud_loads(rates: &RateSystem) -> Result<Vec<f64>> {
    let rho = interior_loads(rates, rates.full_interval())?;
    if rho.iter().any(|&r| !(r < 1.0)) {
        return Err(Error::NotSingleCloud);
    }
    Ok(rho)
}

/// Rate of returns of the gap process to the packed state,
/// `(a_1 + b_{N+1}) prod_i (1 - rho_i)`; mean excursion length is its inverse.
pub fn excursion_rate(rates: &RateSystem) -> Result<f64> {
    let rho = single_cloud_loads(rates)?;
    let exits = rates.a()[0] + rates.b()[rates.gaps()];
    Ok(exits * rho.iter().map(|r| 1.0 - r).product::<f64>())
}

/// Speed of the whole system viewed as one cloud.
pub fn whole_system_speed(rates: &RateSystem) -> Result<f64> {
    hv(rates, rates.full_interval())
}
