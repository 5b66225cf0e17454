//! The gap process as an open Jackson network of M/M/1 queues in series.
//!
//! Queue `i` holds the `eta_i` empty sites between particles `i` and `i+1`.
//! Customers arrive from outside when the extreme particles step outward,
//! and a served customer moves to a neighbouring queue when an interior
//! particle steps into the gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiscreteInterval, RateSystem};

/// Default tolerance for the nonlinear traffic equation.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration cap for the nonlinear traffic equation.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Arrival rates, service rates and nearest-neighbour routing of the dual
/// queueing network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacksonParams {
    /// Gap label of the first queue (1 for the full system).
    pub first_gap: usize,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// `p_left[k] = P_{k+1, k}` in 0-based queue indices (length `n - 1`).
    pub p_left: Vec<f64>,
    /// `p_right[k] = P_{k, k+1}` in 0-based queue indices (length `n - 1`).
    pub p_right: Vec<f64>,
}

impl JacksonParams {
    /// Number of queues.
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Routing probability between 0-based queues `i` and `j`.
    pub fn p(&self, i: usize, j: usize) -> f64 {
        if j + 1 == i {
            self.p_left[j]
        } else if i + 1 == j {
            self.p_right[i]
        } else {
            0.0
        }
    }

    /// Exit probability `1 - sum_j P_{ij}` of 0-based queue `i`.
    pub fn exit_probability(&self, i: usize) -> f64 {
        let n = self.n();
        let left = if i > 0 { self.p_left[i - 1] } else { 0.0 };
        let right = if i + 1 < n { self.p_right[i] } else { 0.0 };
        1.0 - left - right
    }

    /// Applies `x -> x P + lambda`.
    fn route(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        for j in 0..n {
            let mut v = self.lambda[j];
            if j > 0 {
                v += x[j - 1] * self.p_right[j - 1];
            }
            if j + 1 < n {
                v += x[j + 1] * self.p_left[j];
            }
            out[j] = v;
        }
    }

    /// `sup_j |nu_j - ((nu ^ mu) P + lambda)_j|`.
    pub fn general_residual(&self, nu: &[f64]) -> f64 {
        let clamped: Vec<f64> = nu.iter().zip(&self.mu).map(|(&v, &m)| v.min(m)).collect();
        let mut image = vec![0.0; self.n()];
        self.route(&clamped, &mut image);
        nu.iter().zip(&image).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `sup_j |(nu (I - P))_j - lambda_j|`.
    pub fn stable_residual(&self, nu: &[f64]) -> f64 {
        let mut image = vec![0.0; self.n()];
        self.route(nu, &mut image);
        // image = nu P + lambda, so nu (I - P) - lambda = nu - image.
        nu.iter().zip(&image).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Throughputs, loads and the set of stable queues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSolution {
    pub first_gap: usize,
    pub nu: Vec<f64>,
    pub rho: Vec<f64>,
    /// Gap labels with `rho < 1 - tol`.
    pub stable_set: Vec<usize>,
    /// Gap labels with `|rho - 1| <= tol`; the exact dichotomy is unresolved.
    pub critical: Vec<usize>,
    pub iterations: usize,
    pub residual: f64,
}

impl TrafficSolution {
    fn assemble(params: &JacksonParams, nu: Vec<f64>, tol: f64, iterations: usize, residual: f64) -> Self {
        let rho: Vec<f64> = nu.iter().zip(&params.mu).map(|(v, m)| v / m).collect();
        let label = |k: usize| params.first_gap + k;
        let stable_set = (0..rho.len()).filter(|&k| rho[k] < 1.0 - tol).map(label).collect();
        let critical = (0..rho.len()).filter(|&k| (rho[k] - 1.0).abs() <= tol).map(label).collect();
        Self { first_gap: params.first_gap, nu, rho, stable_set, critical, iterations, residual }
    }

    pub fn all_stable(&self) -> bool {
        self.stable_set.len() == self.rho.len()
    }
}

/// Network parameters of the full system.
pub fn to_jackson(rates: &RateSystem) -> JacksonParams {
    reduced_params(rates, rates.full_interval()).expect("full interval has at least two particles")
}

/// Network parameters of the sub-system formed by the particles in
/// `interval`, over its interior gaps.
pub fn reduced_params(rates: &RateSystem, interval: DiscreteInterval) -> Result<JacksonParams> {
    rates.check_interval(interval)?;
    if interval.len < 2 {
        return Err(Error::IntervalTooShort { first: interval.first, len: interval.len });
    }
    let l = interval.first;
    let gaps: Vec<usize> = interval.interior_gaps().collect();
    let n = gaps.len();
    let mu: Vec<f64> = gaps.iter().map(|&i| rates.b_of(i) + rates.a_of(i + 1)).collect();
    let mut lambda = vec![0.0; n];
    if n == 1 {
        lambda[0] = rates.a_of(l) + rates.b_of(l + 1);
    } else {
        lambda[0] = rates.a_of(l);
        lambda[n - 1] = rates.b_of(interval.last());
    }
    let p_left = (1..n).map(|k| rates.b_of(gaps[k]) / mu[k]).collect();
    let p_right = (0..n - 1).map(|k| rates.a_of(gaps[k] + 1) / mu[k]).collect();
    Ok(JacksonParams { first_gap: l, lambda, mu, p_left, p_right })
}

/// Solves the tridiagonal system with sub-diagonal `lower[k]` (row `k+1`),
/// diagonal `diag` and super-diagonal `upper[k]` (row `k`).
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(lower.len() + 1 == n.max(1) && upper.len() + 1 == n.max(1) && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let sub = if i > 0 { lower[i - 1] } else { 0.0 };
        let denom = diag[i] - if i > 0 { sub * c[i - 1] } else { 0.0 };
        if !denom.is_finite() || denom.abs() <= f64::EPSILON * diag[i].abs().max(1.0) * 1e-3 {
            return Err(Error::SingularSystem { row: i + 1 });
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - if i > 0 { sub * d[i - 1] } else { 0.0 }) / denom;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Solves the linear traffic equation `nu (I - P) = lambda` exactly.
///
/// Column `j` of `nu (I - P)` reads `nu_j - nu_{j-1} P_{j-1,j} - nu_{j+1} P_{j+1,j}`,
/// a tridiagonal system in `nu`. Loads are returned whether or not they are
/// below one.
pub fn solve_stable_traffic(params: &JacksonParams) -> Result<TrafficSolution> {
    let n = params.n();
    let lower: Vec<f64> = params.p_right.iter().map(|p| -p).collect();
    let upper: Vec<f64> = params.p_left.iter().map(|p| -p).collect();
    let diag = vec![1.0; n];
    let nu = thomas(&lower, &diag, &upper, &params.lambda)?;
    let residual = params.stable_residual(&nu);
    Ok(TrafficSolution::assemble(params, nu, DEFAULT_TOL, 0, residual))
}

/// Starting point of the nonlinear iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Lambda,
    Mu,
    Zero,
    Given(Vec<f64>),
}

/// Solves `nu = (nu ^ mu) P + lambda` by fixed-point iteration from `lambda`.
pub fn solve_general_traffic(params: &JacksonParams, tol: f64, max_iter: usize) -> Result<TrafficSolution> {
    solve_general_traffic_from(params, Start::Lambda, tol, max_iter)
}

/// Fixed-point iteration from an explicit start. From `lambda` the iterates
/// are componentwise non-decreasing.
pub fn solve_general_traffic_from(
    params: &JacksonParams,
    start: Start,
    tol: f64,
    max_iter: usize,
) -> Result<TrafficSolution> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidTolerance(tol));
    }
    let n = params.n();
    let mut nu = match start {
        Start::Lambda => params.lambda.clone(),
        Start::Mu => params.mu.clone(),
        Start::Zero => vec![0.0; n],
        Start::Given(v) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
            v
        }
    };
    let mut clamped = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for iter in 1..=max_iter {
        for k in 0..n {
            clamped[k] = nu[k].min(params.mu[k]);
        }
        params.route(&clamped, &mut next);
        change = nu.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut nu, &mut next);
        if change < tol {
            let residual = params.general_residual(&nu);
            return Ok(TrafficSolution::assemble(params, nu, tol, iter, residual));
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rs(a: &[f64], b: &[f64]) -> RateSystem {
        RateSystem::new(a.to_vec(), b.to_vec()).unwrap()
    }

    fn dog_sheep(a: f64, n: usize) -> RateSystem {
        let mut av = vec![1.0; n + 1];
        av[0] = a;
        rs(&av, &vec![1.0; n + 1])
    }

    #[test]
    fn parameters_two_particles() {
        let p = to_jackson(&rs(&[0.2, 1.0], &[1.0, 1.0]));
        assert_eq!(p.lambda, vec![1.2]);
        assert_eq!(p.mu, vec![2.0]);
        assert!(p.p_left.is_empty() && p.p_right.is_empty());
    }

    #[test]
    fn parameters_three_particles() {
        let p = to_jackson(&rs(&[0.5, 0.3, 0.1], &[0.6, 0.7, 0.8]));
        assert_relative_eq!(p.lambda[0], 0.5);
        assert_relative_eq!(p.lambda[1], 0.8);
        assert_relative_eq!(p.mu[0], 0.9, max_relative = 1e-15);
        assert_relative_eq!(p.mu[1], 0.8, max_relative = 1e-15);
        assert_relative_eq!(p.p(0, 1), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.p(1, 0), 0.875, max_relative = 1e-15);
        assert_eq!(p.p(0, 0), 0.0);
    }

    #[test]
    fn totally_asymmetric_routes_left_only() {
        let p = to_jackson(&rs(&[0.0; 4], &[2.0, 1.0, 1.5, 0.7]));
        assert!(p.p_right.iter().all(|&x| x == 0.0));
        assert!(p.p_left.iter().all(|&x| x == 1.0));
        assert_eq!(p.exit_probability(2), 0.0);
        assert!(p.exit_probability(0) > 0.0);
    }

    #[test]
    fn stable_solve_examples() {
        let s = solve_stable_traffic(&to_jackson(&rs(&[0.2, 1.0], &[1.0, 1.0]))).unwrap();
        assert_relative_eq!(s.nu[0], 1.2);
        assert_relative_eq!(s.rho[0], 0.6, max_relative = 1e-15);

        let s = solve_stable_traffic(&to_jackson(&dog_sheep(0.2, 4))).unwrap();
        for j in 1..=4 {
            assert_relative_eq!(s.rho[j - 1], 0.2 + 0.8 * j as f64 / 5.0, max_relative = 1e-13);
        }
        assert!(s.all_stable());

        let s = solve_stable_traffic(&to_jackson(&rs(&[0.5, 1.0, 1.0], &[1.0, 1.0, 0.5]))).unwrap();
        assert_relative_eq!(s.rho[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(s.rho[1], 0.5, max_relative = 1e-14);
        // Implied speed rho_1 b_1 - a_1.
        assert!((s.rho[0] * 1.0 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn general_solve_examples() {
        let p = to_jackson(&rs(&[0.5, 0.3, 0.1], &[0.6, 0.7, 0.8]));
        let s = solve_general_traffic(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_relative_eq!(s.nu[0], 1.2, max_relative = 1e-11);
        assert_relative_eq!(s.nu[1], 1.1, max_relative = 1e-11);
        assert_relative_eq!(s.rho[0], 4.0 / 3.0, max_relative = 1e-11);
        assert_relative_eq!(s.rho[1], 1.375, max_relative = 1e-11);
        assert!(s.stable_set.is_empty());
        assert!(s.residual < DEFAULT_TOL * 10.0);

        let p = to_jackson(&dog_sheep(0.2, 4));
        let g = solve_general_traffic(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let l = solve_stable_traffic(&p).unwrap();
        for (x, y) in g.rho.iter().zip(&l.rho) {
            assert!((x - y).abs() < 1e-10);
        }
        assert_eq!(g.stable_set, vec![1, 2, 3, 4]);
    }

    #[test]
    fn general_solve_from_every_start() {
        let p = to_jackson(&rs(&[0.0, 0.0, 0.0], &[2.0, 1.0, 1.5]));
        let tol = 1e-12;
        let base = solve_general_traffic(&p, tol, DEFAULT_MAX_ITER).unwrap();
        assert_relative_eq!(base.rho[0], 0.5, max_relative = 1e-10);
        assert_relative_eq!(base.rho[1], 1.5, max_relative = 1e-10);
        assert_eq!(base.stable_set, vec![1]);
        for start in [Start::Mu, Start::Zero, Start::Given(vec![10.0, 10.0])] {
            let s = solve_general_traffic_from(&p, start, tol, DEFAULT_MAX_ITER).unwrap();
            for (x, y) in s.nu.iter().zip(&base.nu) {
                assert!((x - y).abs() < 10.0 * tol);
            }
        }
    }

    #[test]
    fn general_solve_errors() {
        let p = to_jackson(&dog_sheep(0.2, 4));
        assert_eq!(solve_general_traffic(&p, 0.0, 10), Err(Error::InvalidTolerance(0.0)));
        assert!(matches!(solve_general_traffic(&p, 1e-12, 3), Err(Error::NoConvergence { iterations: 3, .. })));
    }

    #[test]
    fn reduced_parameters() {
        let r = rs(&[0.5, 0.3, 0.1, 0.9], &[0.6, 0.7, 0.8, 1.1]);
        assert_eq!(reduced_params(&r, r.full_interval()).unwrap(), to_jackson(&r));

        let r = rs(&[0.0, 0.0, 0.0], &[2.0, 1.0, 1.5]);
        let p = reduced_params(&r, DiscreteInterval::new(1, 2)).unwrap();
        assert_eq!(p.lambda, vec![1.0]);
        assert_eq!(p.mu, vec![2.0]);

        let r = rs(&[0.5, 0.3, 0.1, 0.9, 0.2], &[0.6, 0.7, 0.8, 1.1, 0.4]);
        let i = DiscreteInterval::new(2, 3);
        let p = reduced_params(&r, i).unwrap();
        assert_eq!(p.first_gap, 2);
        assert_eq!(p.lambda, vec![0.3, 1.1]);
        assert_relative_eq!(p.mu[0], 0.7 + 0.1);
        let s = solve_general_traffic(&p, 1e-13, DEFAULT_MAX_ITER).unwrap();
        // Reduced balance in load form with unit clamps outside the interval.
        let rho = |g: usize| if i.interior_gaps().contains(&g) { s.rho[g - 2] } else { 1.0 };
        for g in i.interior_gaps() {
            let lhs = (r.b_of(g) + r.a_of(g + 1)) * rho(g);
            let rhs = rho(g - 1).min(1.0) * r.a_of(g) + rho(g + 1).min(1.0) * r.b_of(g + 1);
            assert!((lhs - rhs).abs() < 1e-11);
        }
        assert!(matches!(
            reduced_params(&r, DiscreteInterval::new(3, 1)),
            Err(Error::IntervalTooShort { .. })
        ));
    }

    #[test]
    fn thomas_detects_singularity() {
        assert!(matches!(
            thomas(&[1.0], &[1.0, 1.0], &[1.0], &[1.0, 2.0]),
            Err(Error::SingularSystem { row: 2 })
        ));
        let x = thomas(&[1.0, 1.0], &[4.0, 4.0, 4.0], &[1.0, 1.0], &[5.0, 6.0, 5.0]).unwrap();
        for v in x {
            assert_relative_eq!(v, 1.0, max_relative = 1e-15);
        }
    }
}
