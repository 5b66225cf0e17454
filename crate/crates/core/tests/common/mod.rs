//! Instance generators and property checks shared by the property suite and
//! the acceptance harness.

#![allow(dead_code)]

use exclusion_clouds::jackson::{reduced_params, solve_general_traffic_from, solve_stable_traffic, Start, DEFAULT_MAX_ITER, DEFAULT_TOL};
use exclusion_clouds::model::prefix_products_favour_right;
use exclusion_clouds::partition::{analyze_with, cloud_partition, MergePolicy};
use exclusion_clouds::verify::{partition_oracle, ORACLE_TOL};
use exclusion_clouds::{alpha, analyze, beta, hv, to_jackson, CloudReport, DiscreteInterval, RateSystem};
use proptest::prelude::*;
use rand::Rng;

pub type Check = Result<(), String>;

/// Uniform draw from the open interval (0, hi).
pub fn open_uniform<R: Rng>(rng: &mut R, hi: f64) -> f64 {
    loop {
        let x = rng.random_range(0.0..hi);
        if x > 0.0 {
            return x;
        }
    }
}

/// Rates uniform on (0, 2); each left rate is zeroed with probability `p_zero`.
pub fn random_rates<R: Rng>(rng: &mut R, particles: usize, p_zero: f64) -> RateSystem {
    let a = (0..particles)
        .map(|_| if rng.random_bool(p_zero) { 0.0 } else { open_uniform(rng, 2.0) })
        .collect();
    let b = (0..particles).map(|_| open_uniform(rng, 2.0)).collect();
    RateSystem::new(a, b).expect("rates in (0, 2) are valid")
}

/// Proptest strategy: 2..=max_particles particles, left rates sometimes zero.
pub fn rates_strategy(max_particles: usize, allow_zero_a: bool) -> impl Strategy<Value = RateSystem> {
    (2..=max_particles).prop_flat_map(move |p| {
        let a = if allow_zero_a {
            prop_oneof![1 => Just(0.0), 4 => 1e-3..2.0f64].boxed()
        } else {
            (1e-3..2.0f64).boxed()
        };
        (prop::collection::vec(a, p), prop::collection::vec(1e-3..2.0f64, p))
            .prop_map(|(a, b)| RateSystem::new(a, b).expect("valid rates"))
    })
}

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0)
}

fn intervals(r: &RateSystem) -> impl Iterator<Item = DiscreteInterval> {
    let p = r.particles();
    (1..=p).flat_map(move |l| (1..=p + 1 - l).map(move |m| DiscreteInterval::new(l, m)))
}

/// `beta(l; m) = 1/b_e + (a_e/b_e) beta(l; m-1)` and the explicit double sum.
pub fn beta_recurrence(r: &RateSystem) -> Check {
    for iv in intervals(r) {
        let bm = beta(r, iv).map_err(|e| e.to_string())?;
        let e = iv.last();
        let expected = if iv.len == 1 {
            1.0 / r.b_of(e)
        } else {
            let prev = beta(r, DiscreteInterval::new(iv.first, iv.len - 1)).unwrap();
            1.0 / r.b_of(e) + r.a_of(e) / r.b_of(e) * prev
        };
        if !rel_close(bm, expected, 1e-12) {
            return Err(format!("beta{iv} = {bm}, recurrence gives {expected}"));
        }
        // sum_k (1/b_k) prod_{u in (k, last]} a_u / b_u
        let sum: f64 = iv
            .labels()
            .map(|k| (k + 1..=e).map(|u| r.a_of(u) / r.b_of(u)).product::<f64>() / r.b_of(k))
            .sum();
        if !rel_close(bm, sum, 1e-11) {
            return Err(format!("beta{iv} = {bm}, double sum gives {sum}"));
        }
    }
    Ok(())
}

/// `alpha(I u J) = alpha(I) alpha(J)` for adjacent intervals.
pub fn alpha_multiplicative(r: &RateSystem) -> Check {
    for iv in intervals(r).filter(|iv| iv.len >= 2) {
        let whole = alpha(r, iv).unwrap();
        for split in 1..iv.len {
            let left = alpha(r, DiscreteInterval::new(iv.first, split)).unwrap();
            let right = alpha(r, DiscreteInterval::new(iv.first + split, iv.len - split)).unwrap();
            if !rel_close(whole, left * right, 1e-12) {
                return Err(format!("alpha{iv} = {whole} but split at {split} gives {}", left * right));
            }
        }
    }
    Ok(())
}

/// The load formula evaluated at the last particle of a block equals one.
pub fn boundary_normalization(r: &RateSystem) -> Check {
    for iv in intervals(r) {
        let (al, be, v) = (alpha(r, iv).unwrap(), beta(r, iv).unwrap(), hv(r, iv).unwrap());
        let total = al + be * v;
        let scale = al.abs().max((be * v).abs()).max(1.0);
        if (total - 1.0).abs() > 1e-12 * scale {
            return Err(format!("alpha + beta hv = {total} on {iv}"));
        }
    }
    Ok(())
}

/// `v_{i+1} - v_i = (rho_i - 1)^+ mu_i` for every gap.
pub fn speed_gap_identity(r: &RateSystem) -> Check {
    let rep = analyze(r).map_err(|e| e.to_string())?;
    for i in 1..=r.gaps() {
        let mu = r.b_of(i) + r.a_of(i + 1);
        let lhs = rep.speeds[i] - rep.speeds[i - 1];
        let rhs = (rep.rho[i - 1] - 1.0).max(0.0) * mu;
        let scale = rep.speeds.iter().map(|v| v.abs()).fold(mu, f64::max);
        if (lhs - rhs).abs() > 1e-9 * scale {
            return Err(format!("gap {i}: speed difference {lhs} vs {rhs}"));
        }
    }
    Ok(())
}

/// Interior loads of every stable cloud solve its own linear traffic equation.
pub fn interior_balance(r: &RateSystem) -> Check {
    let rep = analyze(r).map_err(|e| e.to_string())?;
    for law in &rep.stationary {
        let params = reduced_params(r, law.cloud).unwrap();
        let nu: Vec<f64> = law.law.rhos().iter().zip(&params.mu).map(|(x, m)| x * m).collect();
        let scale = params.mu.iter().cloned().fold(0.0, f64::max);
        let res = params.stable_residual(&nu);
        if res > 1e-10 * scale {
            return Err(format!("cloud {}: balance residual {res}", law.cloud));
        }
    }
    Ok(())
}

fn critical(rep: &CloudReport) -> bool {
    rep.flags.critical_tie
}

/// Mirroring the system reverses the partition and negates the reversed speeds.
pub fn reflection_duality(r: &RateSystem) -> Check {
    let rep = analyze(r).map_err(|e| e.to_string())?;
    let refl = r.reflect();
    let back = analyze(&refl).map_err(|e| e.to_string())?;
    if critical(&rep) || critical(&back) {
        return Ok(());
    }
    if back.partition != rep.partition.reversed() {
        return Err(format!("reflected partition {} vs reversed {}", back.partition, rep.partition.reversed()));
    }
    let n = r.particles();
    for i in 0..n {
        let (x, y) = (back.speeds[i], -rep.speeds[n - 1 - i]);
        let scale = rep.speeds.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if (x - y).abs() > 1e-9 * scale {
            return Err(format!("speed {}: {x} vs {y}", i + 1));
        }
    }
    for g in 0..r.gaps() {
        let (x, y) = (back.rho[g], rep.rho[r.gaps() - 1 - g]);
        if !rel_close(x, y, 1e-9) {
            return Err(format!("load {}: {x} vs {y}", g + 1));
        }
    }
    Ok(())
}

/// Every merge policy ends at the same partition.
pub fn merge_policy_invariance(r: &RateSystem, seed: u64) -> Check {
    let (rep, _) = analyze_with(r, MergePolicy::All).map_err(|e| e.to_string())?;
    if critical(&rep) {
        return Ok(());
    }
    for policy in [MergePolicy::Leftmost, MergePolicy::Rightmost, MergePolicy::Random(seed)] {
        let (p, _) = cloud_partition(r, policy).unwrap();
        if p != rep.partition {
            return Err(format!("{policy:?} gives {p}, All gives {}", rep.partition));
        }
    }
    Ok(())
}

/// All speeds are positive exactly when every prefix product of `a` is
/// below that of `b`. Instances within rounding of either boundary are skipped.
pub fn prefix_product_equivalence(r: &RateSystem) -> Check {
    let rep = analyze(r).map_err(|e| e.to_string())?;
    let min_speed = rep.speeds.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut log_ratio = 0.0;
    let mut near_tie = false;
    for (a, b) in r.a().iter().zip(r.b()) {
        if *a == 0.0 {
            break;
        }
        log_ratio += a.ln() - b.ln();
        near_tie |= log_ratio.abs() < 1e-9;
    }
    if near_tie || min_speed.abs() < 1e-9 || critical(&rep) {
        return Ok(());
    }
    let claimed = prefix_products_favour_right(r);
    if claimed != (min_speed > 0.0) {
        return Err(format!("prefix criterion {claimed} but smallest speed {min_speed}"));
    }
    Ok(())
}

/// Merging and the fixed-point oracle agree; returns the largest load gap.
pub fn oracle_equivalence(r: &RateSystem) -> Result<Option<f64>, String> {
    let rep = analyze(r).map_err(|e| e.to_string())?;
    if critical(&rep) {
        return Ok(None);
    }
    let oracle = partition_oracle(r, ORACLE_TOL).map_err(|e| e.to_string())?;
    if oracle != rep.partition {
        return Err(format!("oracle {oracle} vs merging {}", rep.partition));
    }
    let sol = exclusion_clouds::solve_general_traffic(&to_jackson(r), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let mut worst: f64 = 0.0;
    for law in &rep.stationary {
        for g in law.cloud.interior_gaps() {
            worst = worst.max((rep.rho[g - 1] - sol.rho[g - 1]).abs());
        }
    }
    Ok(Some(worst))
}

/// The linear solve satisfies its equation, the nonlinear iteration reaches
/// the same point from several starts, and from `lambda` it only increases.
pub fn traffic_solvers(r: &RateSystem) -> Check {
    let params = to_jackson(r);
    let lin = solve_stable_traffic(&params).map_err(|e| e.to_string())?;
    let scale = lin.nu.iter().cloned().fold(1.0, f64::max);
    if lin.residual > 1e-10 * scale {
        return Err(format!("linear residual {}", lin.residual));
    }
    let base = solve_general_traffic_from(&params, Start::Lambda, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
    for start in [Start::Mu, Start::Zero] {
        let other = solve_general_traffic_from(&params, start.clone(), DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
        for (x, y) in base.nu.iter().zip(&other.nu) {
            if !rel_close(*x, *y, 1e-8) {
                return Err(format!("start {start:?}: {x} vs {y}"));
            }
        }
    }
    if base.all_stable() {
        for (x, y) in base.nu.iter().zip(&lin.nu) {
            if !rel_close(*x, *y, 1e-8) {
                return Err(format!("stable system: fixed point {x} vs linear {y}"));
            }
        }
    }
    let mut nu = params.lambda.clone();
    for step in 0..50 {
        let next = solve_general_traffic_from(&params, Start::Given(nu.clone()), f64::MAX, 1).unwrap().nu;
        if let Some(k) = (0..nu.len()).find(|&k| next[k] < nu[k] - 1e-12 * nu[k].abs().max(1.0)) {
            return Err(format!("iterate {step} decreased at queue {k}"));
        }
        nu = next;
    }
    Ok(())
}
