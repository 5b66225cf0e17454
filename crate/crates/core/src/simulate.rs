//! Exact event-driven simulation of the particle system and its gap process.
//!
//! In every state the enabled moves are: particle `i` left at rate `a_i` when
//! `i = 1` or gap `i - 1` is positive, particle `i` right at rate `b_i` when
//! `i = N + 1` or gap `i` is positive. The holding time is exponential with
//! the total enabled rate and the move is picked proportionally to its rate.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` with the word
//! stream set to the replica index, so replica `r` of master seed `s` is a
//! fixed, independent stream.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::clt::{excursion_rate, whole_system_speed, single_cloud_loads};
use crate::error::{Error, Result};
use crate::jackson::JacksonParams;
use crate::model::RateSystem;
use crate::stats;

/// Recorded in output metadata so runs can be reproduced.
pub const RNG_ID: &str = "chacha8/rand_chacha-0.9/seed_from_u64(seed)+set_stream(replica)";

/// Pairwise joints are stored densely on `{0..=PAIR_CAP}^2`; larger values
/// land in the overflow index `PAIR_CAP + 1`.
pub const PAIR_CAP: u32 = 64;
/// Joint occupation is kept only for systems with at most this many gaps.
pub const JOINT_MAX_GAPS: usize = 6;
/// Joint coordinates above this are stored as `JOINT_CAP + 1`.
pub const JOINT_CAP: u32 = 255;
/// Fraction of the horizon discarded when no burn-in is given.
pub const DEFAULT_BURN_IN_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub seed: u64,
    /// Stream index; replicas of one seed differ only here.
    pub replica: u64,
    /// Starting gaps; `None` is the packed configuration `X_i(0) = i`.
    pub initial_gaps: Option<Vec<u64>>,
    /// Start of the occupation window; `None` means 10% of the horizon.
    pub burn_in: Option<f64>,
    /// Times at which positions are recorded.
    pub sample_times: Vec<f64>,
    pub track_occupation: bool,
    pub track_excursions: bool,
}

impl SimConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        SimConfig {
            horizon,
            seed,
            replica: 0,
            initial_gaps: None,
            burn_in: None,
            sample_times: Vec::new(),
            track_occupation: true,
            track_excursions: false,
        }
    }

    pub fn with_replica(mut self, replica: u64) -> Self {
        self.replica = replica;
        self
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn with_initial_gaps(mut self, gaps: Vec<u64>) -> Self {
        self.initial_gaps = Some(gaps);
        self
    }

    pub fn with_sample_times(mut self, times: Vec<f64>) -> Self {
        self.sample_times = times;
        self
    }

    pub fn with_excursions(mut self) -> Self {
        self.track_excursions = true;
        self
    }

    pub fn without_occupation(mut self) -> Self {
        self.track_occupation = false;
        self
    }

    pub fn effective_burn_in(&self) -> f64 {
        self.burn_in.unwrap_or(DEFAULT_BURN_IN_FRACTION * self.horizon)
    }

    fn validate(&self, gaps: usize) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidSimConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        let burn = self.effective_burn_in();
        if !(burn >= 0.0 && burn < self.horizon) {
            return Err(Error::InvalidSimConfig(format!(
                "burn-in {burn} must lie in [0, horizon = {})",
                self.horizon
            )));
        }
        if let Some(g) = &self.initial_gaps {
            if g.len() != gaps {
                return Err(Error::InvalidSimConfig(format!("{} initial gaps given, system has {gaps}", g.len())));
            }
        }
        if self.sample_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidSimConfig("sample times must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Occupation times of the gap process over the post-burn-in window.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupation {
    /// Length of the accumulation window.
    pub window: f64,
    /// `marginals[g - 1][k]`: time with gap `g` equal to `k`.
    pub marginals: Vec<Vec<f64>>,
    /// Dense `(PAIR_CAP + 2)^2` tables for each gap pair `g < h`, in
    /// lexicographic order.
    pub pairs: Vec<Vec<f64>>,
    /// Full joint occupation with clamped coordinates, when `N <= JOINT_MAX_GAPS`.
    pub joint: Option<BTreeMap<[u32; JOINT_MAX_GAPS], f64>>,
    gaps: usize,
}

const PAIR_SIDE: usize = PAIR_CAP as usize + 2;

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl Occupation {
    pub fn new(gaps: usize) -> Self {
        let npairs = gaps * gaps.saturating_sub(1) / 2;
        Occupation {
            window: 0.0,
            marginals: vec![Vec::new(); gaps],
            pairs: vec![vec![0.0; PAIR_SIDE * PAIR_SIDE]; npairs],
            joint: (gaps <= JOINT_MAX_GAPS).then(BTreeMap::new),
            gaps,
        }
    }

    pub fn gaps(&self) -> usize {
        self.gaps
    }

    fn add(&mut self, eta: &[u64], dt: f64) {
        self.window += dt;
        for (m, &e) in self.marginals.iter_mut().zip(eta) {
            let k = e as usize;
            if m.len() <= k {
                m.resize(k + 1, 0.0);
            }
            m[k] += dt;
        }
        let n = self.gaps;
        let clamp = |e: u64| e.min(PAIR_CAP as u64 + 1) as usize;
        let mut idx = 0;
        for i in 0..n {
            let ci = clamp(eta[i]) * PAIR_SIDE;
            for &ej in &eta[i + 1..] {
                self.pairs[idx][ci + clamp(ej)] += dt;
                idx += 1;
            }
        }
        if let Some(joint) = self.joint.as_mut() {
            let mut key = [0u32; JOINT_MAX_GAPS];
            for (k, &e) in key.iter_mut().zip(eta) {
                *k = e.min(JOINT_CAP as u64 + 1) as u32;
            }
            *joint.entry(key).or_insert(0.0) += dt;
        }
    }

    /// Adds another replica's occupation. Order of merging does not matter.
    pub fn merge(&mut self, other: &Occupation) -> Result<()> {
        if other.gaps != self.gaps {
            return Err(Error::DimensionMismatch { expected: self.gaps, got: other.gaps });
        }
        self.window += other.window;
        for (m, o) in self.marginals.iter_mut().zip(&other.marginals) {
            if m.len() < o.len() {
                m.resize(o.len(), 0.0);
            }
            for (x, y) in m.iter_mut().zip(o) {
                *x += y;
            }
        }
        for (p, o) in self.pairs.iter_mut().zip(&other.pairs) {
            for (x, y) in p.iter_mut().zip(o) {
                *x += y;
            }
        }
        if let (Some(j), Some(o)) = (self.joint.as_mut(), other.joint.as_ref()) {
            for (k, v) in o {
                *j.entry(*k).or_insert(0.0) += v;
            }
        }
        Ok(())
    }

    /// Fraction of the window during which gap `gap` was at most `bound`.
    pub fn fraction_at_most(&self, gap: usize, bound: u64) -> Result<f64> {
        self.check_gap(gap)?;
        if self.window <= 0.0 {
            return Err(Error::EmptyWindow);
        }
        let m = &self.marginals[gap - 1];
        let upto = (bound as usize + 1).min(m.len());
        Ok(m[..upto].iter().sum::<f64>() / self.window)
    }

    fn check_gap(&self, gap: usize) -> Result<()> {
        if gap == 0 || gap > self.gaps {
            return Err(Error::GapOutOfRange { gap, gaps: self.gaps });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    /// Displacement of the leftmost particle over the excursion.
    pub y: i64,
    /// Duration, including the holding time in the packed state.
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub positions: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub horizon: f64,
    pub burn_in: f64,
    pub seed: u64,
    pub replica: u64,
    pub initial_positions: Vec<i64>,
    pub final_positions: Vec<i64>,
    /// `X_i(T) - X_i(0)`.
    pub displacement: Vec<i64>,
    pub event_count: u64,
    pub occupation: Option<Occupation>,
    pub excursions: Vec<Excursion>,
    pub snapshots: Vec<Snapshot>,
}

/// Runs one trajectory up to the horizon.
pub fn simulate(rates: &RateSystem, cfg: &SimConfig) -> Result<SimStats> {
    rates.require_standard()?;
    let n = rates.gaps();
    cfg.validate(n)?;
    let (a, b) = (rates.a(), rates.b());
    let p = n + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.replica);

    let mut eta: Vec<u64> = cfg.initial_gaps.clone().unwrap_or_else(|| vec![0; n]);
    let mut x: Vec<i64> = Vec::with_capacity(p);
    x.push(1);
    for (i, &g) in eta.iter().enumerate() {
        x.push(x[i] + 1 + g as i64);
    }
    let initial_positions = x.clone();
    let mut nonzero = eta.iter().filter(|&&e| e > 0).count();

    let horizon = cfg.horizon;
    let burn_in = cfg.effective_burn_in();
    let mut occupation = cfg.track_occupation.then(|| Occupation::new(n));
    let mut excursions = Vec::new();
    let mut exc_start: Option<(f64, i64)> = (cfg.track_excursions && nonzero == 0).then_some((0.0, x[0]));

    let mut samples: Vec<f64> = cfg.sample_times.iter().copied().filter(|&s| s <= horizon).collect();
    samples.sort_by(f64::total_cmp);
    let mut next_sample = 0;
    let mut snapshots = Vec::with_capacity(samples.len());

    // Move k < p is particle k going left, k >= p is particle k - p going right.
    let mut move_rates = vec![0.0; 2 * p];
    let mut t = 0.0;
    let mut event_count = 0u64;
    loop {
        let mut total = 0.0;
        for i in 0..p {
            let left = if i == 0 || eta[i - 1] > 0 { a[i] } else { 0.0 };
            let right = if i == n || eta[i] > 0 { b[i] } else { 0.0 };
            move_rates[i] = left;
            move_rates[p + i] = right;
            total += left + right;
        }
        assert!(total > 0.0, "rightmost particle always moves at a positive rate");
        let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
        let t_next = t + hold;

        while next_sample < samples.len() && samples[next_sample] < t_next {
            snapshots.push(Snapshot { time: samples[next_sample], positions: x.clone() });
            next_sample += 1;
        }
        if let Some(occ) = occupation.as_mut() {
            let lo = t.max(burn_in);
            let hi = t_next.min(horizon);
            if hi > lo {
                occ.add(&eta, hi - lo);
            }
        }
        if t_next > horizon {
            break;
        }

        let mut u = rng.random::<f64>() * total;
        let mut chosen = None;
        for (k, &r) in move_rates.iter().enumerate() {
            if r > 0.0 {
                chosen = Some(k);
                if u < r {
                    break;
                }
                u -= r;
            }
        }
        let k = chosen.expect("some move is enabled");
        if k < p {
            let i = k;
            x[i] -= 1;
            if i > 0 {
                eta[i - 1] -= 1;
                if eta[i - 1] == 0 {
                    nonzero -= 1;
                }
            }
            if i < n {
                eta[i] += 1;
                if eta[i] == 1 {
                    nonzero += 1;
                }
            }
        } else {
            let i = k - p;
            x[i] += 1;
            if i < n {
                eta[i] -= 1;
                if eta[i] == 0 {
                    nonzero -= 1;
                }
            }
            if i > 0 {
                eta[i - 1] += 1;
                if eta[i - 1] == 1 {
                    nonzero += 1;
                }
            }
        }
        debug_assert!(x.windows(2).all(|w| w[0] < w[1]), "particle order violated: {x:?}");
        event_count += 1;
        t = t_next;

        if cfg.track_excursions && nonzero == 0 {
            if let Some((t0, x0)) = exc_start {
                excursions.push(Excursion { y: x[0] - x0, kappa: t - t0 });
            }
            exc_start = Some((t, x[0]));
        }
    }

    let displacement = x.iter().zip(&initial_positions).map(|(f, i)| f - i).collect();
    Ok(SimStats {
        horizon,
        burn_in,
        seed: cfg.seed,
        replica: cfg.replica,
        initial_positions,
        final_positions: x,
        displacement,
        event_count,
        occupation,
        excursions,
        snapshots,
    })
}

/// Runs replicas `0..replicas` of `cfg` (its own replica index is ignored).
/// Results are returned in replica order whatever the thread schedule.
pub fn simulate_replicas(rates: &RateSystem, cfg: &SimConfig, replicas: u64) -> Result<Vec<SimStats>> {
    let run = |r: u64| simulate(rates, &cfg.clone().with_replica(r));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..replicas).into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..replicas).map(run).collect()
    }
}

/// Pools the occupation of several runs.
pub fn pooled_occupation(runs: &[SimStats]) -> Result<Occupation> {
    let mut iter = runs.iter().filter_map(|s| s.occupation.as_ref());
    let mut acc = iter.next().cloned().ok_or(Error::EmptyWindow)?;
    for o in iter {
        acc.merge(o)?;
    }
    Ok(acc)
}

/// `displacement / horizon` per particle.
pub fn empirical_speeds(stats: &SimStats, horizon: f64) -> Vec<f64> {
    stats.displacement.iter().map(|&d| d as f64 / horizon).collect()
}

/// Mean empirical speed and its standard error across replicas, per particle.
pub fn replica_speeds(runs: &[SimStats]) -> Vec<(f64, f64)> {
    let Some(first) = runs.first() else { return Vec::new() };
    (0..first.displacement.len())
        .map(|i| {
            let v: Vec<f64> = runs.iter().map(|s| s.displacement[i] as f64 / s.horizon).collect();
            (stats::mean(&v), stats::standard_error(&v))
        })
        .collect()
}

/// Normalized occupation law over a set of gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    pub gaps: Vec<usize>,
    /// A coordinate equal to this value stands for "this value or more".
    pub overflow: Option<u32>,
    pub probs: BTreeMap<Vec<u32>, f64>,
}

impl EmpiricalLaw {
    /// Total-variation distance to independent geometrics with the given
    /// parameters, one per selected gap.
    pub fn tv_to_geometric(&self, rhos: &[f64]) -> Result<f64> {
        if rhos.len() != self.gaps.len() {
            return Err(Error::DimensionMismatch { expected: self.gaps.len(), got: rhos.len() });
        }
        let q = |z: &[u32]| -> f64 {
            z.iter()
                .zip(rhos)
                .map(|(&k, &r)| match self.overflow {
                    Some(m) if k >= m => r.powi(m as i32),
                    _ => r.powi(k as i32) * (1.0 - r),
                })
                .product()
        };
        let mut diff = 0.0;
        let mut covered = 0.0;
        for (z, &p) in &self.probs {
            let qz = q(z);
            covered += qz;
            diff += (p - qz).abs();
        }
        Ok(0.5 * (diff + (1.0 - covered).max(0.0)))
    }

    /// Marginal pmf of the `k`-th selected gap (0-based position in `gaps`).
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for (z, &p) in &self.probs {
            let v = z[k] as usize;
            if out.len() <= v {
                out.resize(v + 1, 0.0);
            }
            out[v] += p;
        }
        out
    }

    /// Total-variation distance between the law and the product of its own
    /// marginals.
    pub fn tv_to_marginal_product(&self) -> f64 {
        let marginals: Vec<Vec<f64>> = (0..self.gaps.len()).map(|k| self.marginal(k)).collect();
        let mut diff = 0.0;
        let mut covered = 0.0;
        for (z, &p) in &self.probs {
            let q: f64 = z.iter().zip(&marginals).map(|(&v, m)| m[v as usize]).product();
            covered += q;
            diff += (p - q).abs();
        }
        0.5 * (diff + (1.0 - covered).max(0.0))
    }
}

/// Occupation law of the selected gap labels (1-based, strictly increasing).
pub fn empirical_gap_law(occ: &Occupation, gaps: &[usize]) -> Result<EmpiricalLaw> {
    if occ.window <= 0.0 {
        return Err(Error::EmptyWindow);
    }
    for &g in gaps {
        occ.check_gap(g)?;
    }
    if gaps.is_empty() || gaps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSimConfig("gap selection must be non-empty and increasing".into()));
    }
    let w = occ.window;
    let mut probs = BTreeMap::new();
    let overflow = match gaps {
        [g] => {
            for (k, &t) in occ.marginals[g - 1].iter().enumerate() {
                if t > 0.0 {
                    probs.insert(vec![k as u32], t / w);
                }
            }
            None
        }
        [g, h] => {
            let table = &occ.pairs[pair_index(occ.gaps, g - 1, h - 1)];
            for (idx, &t) in table.iter().enumerate() {
                if t > 0.0 {
                    probs.insert(vec![(idx / PAIR_SIDE) as u32, (idx % PAIR_SIDE) as u32], t / w);
                }
            }
            Some(PAIR_CAP + 1)
        }
        _ => {
            let joint = occ.joint.as_ref().ok_or(Error::JointUnavailable { max: JOINT_MAX_GAPS })?;
            for (key, &t) in joint {
                let z: Vec<u32> = gaps.iter().map(|&g| key[g - 1]).collect();
                *probs.entry(z).or_insert(0.0) += t / w;
            }
            Some(JOINT_CAP + 1)
        }
    };
    Ok(EmpiricalLaw { gaps: gaps.to_vec(), overflow, probs })
}

/// Excursions of the gap process away from the packed state over one run
/// of `cfg`. Refuses systems that are not a single stable cloud.
pub fn extract_excursions(rates: &RateSystem, cfg: &SimConfig) -> Result<Vec<Excursion>> {
    single_cloud_loads(rates)?;
    let cfg = cfg.clone().with_excursions().without_occupation();
    Ok(simulate(rates, &cfg)?.excursions)
}

/// Excursion-based moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionSummary {
    pub count: usize,
    /// Analytical return rate to the packed state.
    pub alpha: f64,
    pub mean_kappa: f64,
    pub se_kappa: f64,
    pub mean_y: f64,
    pub se_y: f64,
    pub mean_z: f64,
    pub se_z: f64,
    /// `alpha * Var(Z)`.
    pub sigma2: f64,
}

pub fn summarize_excursions(excursions: &[Excursion], rates: &RateSystem) -> Result<ExcursionSummary> {
    if excursions.len() < 2 {
        return Err(Error::InsufficientExcursions { needed: 2, got: excursions.len() });
    }
    let alpha = excursion_rate(rates)?;
    let speed = whole_system_speed(rates)?;
    let kappa: Vec<f64> = excursions.iter().map(|e| e.kappa).collect();
    let y: Vec<f64> = excursions.iter().map(|e| e.y as f64).collect();
    let z: Vec<f64> = y.iter().zip(&kappa).map(|(y, k)| y - speed * k).collect();
    Ok(ExcursionSummary {
        count: excursions.len(),
        alpha,
        mean_kappa: stats::mean(&kappa),
        se_kappa: stats::standard_error(&kappa),
        mean_y: stats::mean(&y),
        se_y: stats::standard_error(&y),
        mean_z: stats::mean(&z),
        se_z: stats::standard_error(&z),
        sigma2: alpha * stats::sample_variance(&z),
    })
}

/// Diffusivity estimate `alpha * Var(Z_k)` with `Z_k = Y_k - v kappa_k`.
pub fn estimate_sigma2(excursions: &[Excursion], rates: &RateSystem) -> Result<f64> {
    summarize_excursions(excursions, rates).map(|s| s.sigma2)
}

/// Simulates the open Jackson network directly and returns its queue-length
/// occupation over `[burn_in, horizon]`. Used to cross-check the gap process.
pub fn simulate_jackson(params: &JacksonParams, cfg: &SimConfig) -> Result<Occupation> {
    let n = params.n();
    cfg.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.replica);
    let mut q: Vec<u64> = cfg.initial_gaps.clone().unwrap_or_else(|| vec![0; n]);
    let burn_in = cfg.effective_burn_in();
    let mut occ = Occupation::new(n);
    let arrivals: f64 = params.lambda.iter().sum();
    let mut t = 0.0;
    loop {
        let busy: f64 = q.iter().zip(&params.mu).filter(|(&k, _)| k > 0).map(|(_, m)| m).sum();
        let total = arrivals + busy;
        let t_next = t + rng.sample::<f64, _>(Exp1) / total;
        let (lo, hi) = (t.max(burn_in), t_next.min(cfg.horizon));
        if hi > lo {
            occ.add(&q, hi - lo);
        }
        if t_next > cfg.horizon {
            return Ok(occ);
        }
        t = t_next;
        let mut u = rng.random::<f64>() * total;
        if u < arrivals {
            for (i, &l) in params.lambda.iter().enumerate() {
                if u < l || i == n - 1 {
                    q[i] += 1;
                    break;
                }
                u -= l;
            }
            continue;
        }
        u -= arrivals;
        let mut server = None;
        for i in 0..n {
            if q[i] > 0 {
                server = Some(i);
                if u < params.mu[i] {
                    break;
                }
                u -= params.mu[i];
            }
        }
        let i = server.expect("a busy server exists");
        q[i] -= 1;
        let r = rng.random::<f64>();
        let to_left = if i > 0 { params.p(i, i - 1) } else { 0.0 };
        let to_right = if i + 1 < n { params.p(i, i + 1) } else { 0.0 };
        if r < to_left {
            q[i - 1] += 1;
        } else if r < to_left + to_right {
            q[i + 1] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jackson::to_jackson;
    use approx::assert_relative_eq;

    fn rs(a: &[f64], b: &[f64]) -> RateSystem {
        RateSystem::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let r = rs(&[0.2, 0.3, 1.0], &[1.0, 0.8, 1.0]);
        let cfg = SimConfig::new(500.0, 11).with_sample_times(vec![1.0, 100.0, 250.5]).with_excursions();
        let s1 = simulate(&r, &cfg).unwrap();
        let s2 = simulate(&r, &cfg).unwrap();
        assert_eq!(s1, s2);
        let s3 = simulate(&r, &cfg.clone().with_replica(1)).unwrap();
        assert_ne!(s1.final_positions, s3.final_positions);
    }

    #[test]
    fn snapshots_keep_order() {
        let r = rs(&[1.0, 0.1, 2.0, 0.5], &[0.3, 1.5, 0.2, 1.0]);
        let times: Vec<f64> = (0..=200).map(|k| k as f64).collect();
        let s = simulate(&r, &SimConfig::new(200.0, 3).with_sample_times(times)).unwrap();
        assert_eq!(s.snapshots.len(), 201);
        for snap in &s.snapshots {
            assert!(snap.positions.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(s.snapshots[0].positions, vec![1, 2, 3, 4]);
    }

    #[test]
    fn occupation_covers_window() {
        let r = rs(&[0.2, 1.0, 0.5], &[1.0, 1.0, 1.2]);
        let s = simulate(&r, &SimConfig::new(1000.0, 5)).unwrap();
        let occ = s.occupation.unwrap();
        assert_relative_eq!(occ.window, 900.0, max_relative = 1e-12);
        for m in &occ.marginals {
            assert_relative_eq!(m.iter().sum::<f64>(), 900.0, max_relative = 1e-12);
        }
        for p in &occ.pairs {
            assert_relative_eq!(p.iter().sum::<f64>(), 900.0, max_relative = 1e-12);
        }
        assert_relative_eq!(occ.joint.unwrap().values().sum::<f64>(), 900.0, max_relative = 1e-12);
    }

    #[test]
    fn initial_gaps_respected() {
        let r = rs(&[0.0, 0.0], &[1.0, 1.0]);
        let s = simulate(&r, &SimConfig::new(1e-9, 1).with_burn_in(0.0).with_initial_gaps(vec![3])).unwrap();
        assert_eq!(s.initial_positions, vec![1, 5]);
    }

    #[test]
    fn rejects_bad_configs() {
        let r = rs(&[0.2, 1.0], &[1.0, 1.0]);
        assert!(simulate(&r, &SimConfig::new(0.0, 1)).is_err());
        assert!(simulate(&r, &SimConfig::new(10.0, 1).with_burn_in(10.0)).is_err());
        assert!(simulate(&r, &SimConfig::new(10.0, 1).with_initial_gaps(vec![0, 0])).is_err());
    }

    #[test]
    fn free_particle_is_poisson() {
        use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};
        // Particle 2 never waits: a rate-1 Poisson walker.
        let r = rs(&[0.0, 0.0], &[1.0, 1.0]);
        let horizon = 4.0;
        let counts: Vec<i64> = (0..1000)
            .map(|seed| simulate(&r, &SimConfig::new(horizon, seed).without_occupation()).unwrap().displacement[1])
            .collect();
        let pois = Poisson::new(horizon).unwrap();
        // Bins 0..=1, 2, ..., 8, >= 9 keep expected counts above 5.
        let bin = |k: i64| (k.clamp(1, 9) - 1) as usize;
        let mut observed = [0.0f64; 9];
        for &c in &counts {
            observed[bin(c)] += 1.0;
        }
        let mut expected = [0.0f64; 9];
        for k in 0..9u64 {
            expected[bin(k as i64)] += 1000.0 * pois.pmf(k);
        }
        expected[8] = 1000.0 - expected[..8].iter().sum::<f64>();
        let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
        let p = 1.0 - ChiSquared::new(8.0).unwrap().cdf(chi2);
        assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn dog_and_sheep_single_gap_law() {
        let r = rs(&[0.2, 1.0], &[1.0, 1.0]);
        let s = simulate(&r, &SimConfig::new(1e5, 21)).unwrap();
        let law = empirical_gap_law(s.occupation.as_ref().unwrap(), &[1]).unwrap();
        let tv = law.tv_to_geometric(&[0.6]).unwrap();
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn singleton_speeds() {
        let r = rs(&[0.5, 0.3, 0.1], &[0.6, 0.7, 0.8]);
        let runs = simulate_replicas(&r, &SimConfig::new(1e4, 8).without_occupation(), 16).unwrap();
        for ((m, se), v) in replica_speeds(&runs).into_iter().zip([0.1, 0.4, 0.7]) {
            assert!((m - v).abs() <= 3.0 * se, "{m} +- {se} vs {v}");
        }
    }

    #[test]
    fn reflected_speeds_are_negated_and_reversed() {
        let r = rs(&[0.2, 0.5, 0.4], &[1.0, 0.6, 0.9]);
        let cfg = SimConfig::new(1e4, 2).without_occupation();
        let fwd = replica_speeds(&simulate_replicas(&r, &cfg, 16).unwrap());
        let back = replica_speeds(&simulate_replicas(&r.reflect(), &cfg, 16).unwrap());
        for (f, b) in fwd.iter().zip(back.iter().rev()) {
            let se = (f.1 * f.1 + b.1 * b.1).sqrt();
            assert!((f.0 + b.0).abs() <= 4.0 * se, "{f:?} vs {b:?}");
        }
    }

    #[test]
    fn merge_is_order_free() {
        let r = rs(&[0.2, 1.0, 0.5], &[1.0, 1.0, 1.2]);
        let runs = simulate_replicas(&r, &SimConfig::new(200.0, 9), 3).unwrap();
        let occ: Vec<&Occupation> = runs.iter().map(|s| s.occupation.as_ref().unwrap()).collect();
        let mut ab = occ[0].clone();
        ab.merge(occ[1]).unwrap();
        ab.merge(occ[2]).unwrap();
        let mut cb = occ[2].clone();
        cb.merge(occ[0]).unwrap();
        cb.merge(occ[1]).unwrap();
        assert_relative_eq!(ab.window, cb.window, max_relative = 1e-14);
        for (x, y) in ab.marginals.iter().flatten().zip(cb.marginals.iter().flatten()) {
            assert_relative_eq!(*x, *y, max_relative = 1e-12);
        }
        assert_eq!(ab.joint.as_ref().unwrap().len(), cb.joint.as_ref().unwrap().len());
    }

    #[test]
    fn gap_law_selection_and_pairs() {
        let r = rs(&[0.5, 1.0, 1.0], &[1.0, 1.0, 0.5]);
        let s = simulate(&r, &SimConfig::new(2e4, 4)).unwrap();
        let occ = s.occupation.unwrap();
        let pair = empirical_gap_law(&occ, &[1, 2]).unwrap();
        assert_relative_eq!(pair.probs.values().sum::<f64>(), 1.0, max_relative = 1e-12);
        let m = pair.marginal(0);
        let direct = empirical_gap_law(&occ, &[1]).unwrap();
        for (k, p) in m.iter().enumerate().take(PAIR_CAP as usize) {
            assert_relative_eq!(*p, direct.probs.get(&vec![k as u32]).copied().unwrap_or(0.0), epsilon = 1e-12);
        }
        assert!(empirical_gap_law(&occ, &[3]).is_err());
        assert!(empirical_gap_law(&occ, &[2, 1]).is_err());
        let empty = Occupation::new(2);
        assert_eq!(empirical_gap_law(&empty, &[1]), Err(Error::EmptyWindow));
    }

    #[test]
    fn excursion_means() {
        let r = rs(&[0.2, 1.0], &[1.0, 1.0]);
        let exc = extract_excursions(&r, &SimConfig::new(5e4, 17)).unwrap();
        assert!(exc.len() > 10_000);
        let s = summarize_excursions(&exc, &r).unwrap();
        assert!((s.mean_kappa - 1.0 / s.alpha).abs() <= 3.0 * s.se_kappa);
        assert!((s.mean_y - 0.4 / s.alpha).abs() <= 3.0 * s.se_y);
        assert!(s.mean_z.abs() <= 3.0 * s.se_z);
    }

    #[test]
    fn excursions_need_single_cloud() {
        let r = rs(&[0.5, 0.5], &[0.5, 0.5]);
        assert_eq!(extract_excursions(&r, &SimConfig::new(10.0, 1)), Err(Error::NotSingleCloud));
        assert_eq!(estimate_sigma2(&[], &rs(&[0.2, 1.0], &[1.0, 1.0])), Err(Error::InsufficientExcursions { needed: 2, got: 0 }));
    }

    #[test]
    fn sigma2_pooling_halves() {
        let r = rs(&[0.2, 1.0], &[1.0, 1.0]);
        let exc = extract_excursions(&r, &SimConfig::new(4e4, 23)).unwrap();
        let (lo, hi) = exc.split_at(exc.len() / 2);
        let full = estimate_sigma2(&exc, &r).unwrap();
        let halves = (estimate_sigma2(lo, &r).unwrap() + estimate_sigma2(hi, &r).unwrap()) / 2.0;
        assert!((full - halves).abs() / full < 0.05, "{full} vs {halves}");
    }

    #[test]
    fn gap_process_matches_jackson_network() {
        let r = rs(&[0.3, 0.8, 0.6], &[1.1, 0.9, 0.7]);
        let cfg = SimConfig::new(5e4, 31);
        let gap = pooled_occupation(&simulate_replicas(&r, &cfg, 8).unwrap()).unwrap();
        let params = to_jackson(&r);
        let mut net = Occupation::new(2);
        for rep in 100..108 {
            net.merge(&simulate_jackson(&params, &cfg.clone().with_replica(rep)).unwrap()).unwrap();
        }
        for g in 1..=2 {
            let p = empirical_gap_law(&gap, &[g]).unwrap().marginal(0);
            let q = empirical_gap_law(&net, &[g]).unwrap().marginal(0);
            let tv = stats::tv_distance(&p, &q);
            assert!(tv < 0.02, "gap {g}: tv = {tv}");
        }
    }

    #[test]
    fn replicas_are_uncorrelated() {
        let r = rs(&[0.2, 1.0], &[1.0, 1.0]);
        let runs = simulate_replicas(&r, &SimConfig::new(50.0, 77).without_occupation(), 1000).unwrap();
        let d: Vec<f64> = runs.iter().map(|s| s.displacement[0] as f64).collect();
        // Neighbouring stream indices are the most likely to share structure.
        let r = stats::correlation(&d[..999], &d[1..]);
        assert!(r.abs() < 0.05, "lag-1 correlation {r}");
    }
}
