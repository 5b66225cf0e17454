//! Independent oracles and the statistical harness that compares the
//! closed-form analysis with them and with simulation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::clt::{clt_constants_two_particle, excursion_rate};
use crate::error::{Error, Result};
use crate::jackson::{solve_general_traffic, to_jackson, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::law::GeometricProductLaw;
use crate::model::{DiscreteInterval, OrderedPartition, RateSystem};
use crate::partition::analyze;
use crate::report::sig;
use crate::simulate::{
    extract_excursions, pooled_occupation, replica_speeds, simulate_replicas, summarize_excursions, SimConfig, RNG_ID,
};
use crate::stats;

/// Largest truncated state space the oracle will build.
pub const STATE_BUDGET: usize = 10_000_000;
/// Direct banded elimination is used while `states * bandwidth^2` stays below this.
const DIRECT_WORK_LIMIT: f64 = 1e9;
const GS_TOL: f64 = 1e-14;
const GS_MAX_SWEEPS: usize = 100_000;

/// The gap chain restricted to `{0..=cap}^N`, jumps leaving the box suppressed.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedChainSpec {
    pub rates: RateSystem,
    pub cap: u32,
}

impl TruncatedChainSpec {
    pub fn new(rates: RateSystem, cap: u32) -> Result<Self> {
        rates.require_standard()?;
        if cap < 1 {
            return Err(Error::ChainSolve("cap must be at least 1".into()));
        }
        let spec = TruncatedChainSpec { rates, cap };
        let states = spec.state_count();
        if states > STATE_BUDGET as f64 {
            return Err(Error::StateBudget { states: states.min(usize::MAX as f64) as usize, budget: STATE_BUDGET });
        }
        Ok(spec)
    }

    fn state_count(&self) -> f64 {
        (self.cap as f64 + 1.0).powi(self.rates.gaps() as i32)
    }

    fn side(&self) -> usize {
        self.cap as usize + 1
    }

    /// Outgoing transitions `(target, rate)` of state `s`.
    fn transitions(&self, s: usize, eta: &mut [u32], out: &mut Vec<(usize, f64)>) {
        out.clear();
        let n = eta.len();
        let side = self.side();
        let mut rem = s;
        for e in eta.iter_mut() {
            *e = (rem % side) as u32;
            rem /= side;
        }
        let stride = |g: usize| side.pow(g as u32);
        let (a, b) = (self.rates.a(), self.rates.b());
        for i in 0..=n {
            // Left move of particle i: gap i-1 shrinks, gap i grows.
            if a[i] > 0.0 && (i == 0 || eta[i - 1] > 0) && (i == n || eta[i] < self.cap) {
                let mut t = s;
                if i > 0 {
                    t -= stride(i - 1);
                }
                if i < n {
                    t += stride(i);
                }
                out.push((t, a[i]));
            }
            // Right move of particle i: gap i shrinks, gap i-1 grows.
            if (i == n || eta[i] > 0) && (i == 0 || eta[i - 1] < self.cap) {
                let mut t = s;
                if i < n {
                    t -= stride(i);
                }
                if i > 0 {
                    t += stride(i - 1);
                }
                out.push((t, b[i]));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    /// Banded Gaussian elimination on the balance equations.
    Direct,
    /// Gauss-Seidel with aggregation and Anderson mixing, to a relative
    /// residual of `1e-14`.
    Iterative,
}

/// Stationary law of a truncated chain, indexed with gap 1 varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedLaw {
    pub gaps: usize,
    pub cap: u32,
    pub probs: Vec<f64>,
    pub method: SolveMethod,
    /// Largest balance-equation violation relative to the largest outflow.
    pub residual: f64,
}

impl TruncatedLaw {
    pub fn get(&self, z: &[u32]) -> f64 {
        let side = self.cap as usize + 1;
        let idx = z.iter().rev().fold(0, |acc, &k| acc * side + k as usize);
        self.probs[idx]
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn marginal(&self, gap: usize) -> Vec<f64> {
        let side = self.cap as usize + 1;
        let stride = side.pow(gap as u32 - 1);
        let mut out = vec![0.0; side];
        for (s, &p) in self.probs.iter().enumerate() {
            out[(s / stride) % side] += p;
        }
        out
    }

    /// Largest pointwise difference to a product-geometric law on the box.
    pub fn sup_norm_to(&self, law: &GeometricProductLaw) -> Result<f64> {
        if law.dim() != self.gaps {
            return Err(Error::DimensionMismatch { expected: self.gaps, got: law.dim() });
        }
        let side = self.cap as usize + 1;
        let mut z = vec![0u64; self.gaps];
        let mut worst: f64 = 0.0;
        for (s, &p) in self.probs.iter().enumerate() {
            let mut rem = s;
            for zj in z.iter_mut() {
                *zj = (rem % side) as u64;
                rem /= side;
            }
            worst = worst.max((p - law.pmf_unchecked(&z)).abs());
        }
        Ok(worst)
    }
}

/// Solves `pi Q = 0`, `sum pi = 1` for the truncated chain, choosing a
/// direct banded solve when it is cheap and Gauss-Seidel otherwise.
pub fn truncated_stationary(spec: &TruncatedChainSpec) -> Result<TruncatedLaw> {
    let bw = spec.side().pow(spec.rates.gaps() as u32 - 1) as f64;
    if spec.state_count() * bw * bw <= DIRECT_WORK_LIMIT {
        truncated_stationary_with(spec, SolveMethod::Direct)
    } else {
        truncated_stationary_with(spec, SolveMethod::Iterative)
    }
}

pub fn truncated_stationary_with(spec: &TruncatedChainSpec, method: SolveMethod) -> Result<TruncatedLaw> {
    let chain = Chain::build(spec);
    let mut pi = match method {
        SolveMethod::Direct => chain.banded_solve()?,
        SolveMethod::Iterative => chain.iterative_solve()?,
    };
    let total: f64 = pi.iter().sum();
    if !(total.is_finite() && total > 0.0) || pi.iter().any(|&p| p < -1e-12) {
        return Err(Error::ChainSolve("solution is not a probability vector".into()));
    }
    for p in pi.iter_mut() {
        *p = p.max(0.0) / total;
    }
    let residual = chain.residual(&pi);
    Ok(TruncatedLaw { gaps: chain.gaps, cap: spec.cap, probs: pi, method, residual })
}

/// Truncated generator stored by incoming transitions.
struct Chain {
    states: usize,
    side: usize,
    gaps: usize,
    outflow: Vec<f64>,
    start: Vec<usize>,
    sources: Vec<u32>,
    rates: Vec<f64>,
}

impl Chain {
    fn build(spec: &TruncatedChainSpec) -> Chain {
        let gaps = spec.rates.gaps();
        let states = spec.state_count() as usize;
        let mut eta = vec![0u32; gaps];
        let mut buf = Vec::new();
        let mut outflow = vec![0.0; states];
        let mut start = vec![0usize; states + 1];
        for s in 0..states {
            spec.transitions(s, &mut eta, &mut buf);
            for &(t, r) in &buf {
                start[t + 1] += 1;
                outflow[s] += r;
            }
        }
        for s in 0..states {
            start[s + 1] += start[s];
        }
        let mut fill = start.clone();
        let mut sources = vec![0u32; start[states]];
        let mut rates = vec![0.0; start[states]];
        for s in 0..states {
            spec.transitions(s, &mut eta, &mut buf);
            for &(t, r) in &buf {
                sources[fill[t]] = s as u32;
                rates[fill[t]] = r;
                fill[t] += 1;
            }
        }
        Chain { states, side: spec.side(), gaps, outflow, start, sources, rates }
    }

    #[inline]
    fn inflow(&self, pi: &[f64], t: usize) -> f64 {
        let range = self.start[t]..self.start[t + 1];
        self.sources[range.clone()].iter().zip(&self.rates[range]).map(|(&u, &r)| pi[u as usize] * r).sum()
    }

    /// Largest balance violation relative to the largest outflow.
    fn residual(&self, pi: &[f64]) -> f64 {
        let scale = self.outflow.iter().cloned().fold(0.0, f64::max);
        (0..self.states).map(|t| (self.inflow(pi, t) - pi[t] * self.outflow[t]).abs()).fold(0.0, f64::max) / scale
    }

    /// Fixes `pi_0 = 1` and eliminates the remaining balance equations, whose
    /// matrix is banded with half-width `(cap+1)^(N-1)` and column diagonally
    /// dominant, so no pivoting is needed.
    fn banded_solve(&self) -> Result<Vec<f64>> {
        let bw = self.side.pow(self.gaps as u32 - 1);
        let m = self.states - 1;
        let width = 2 * bw + 1;
        // Row i (state i + 1) stores columns i - bw ..= i + bw.
        let mut band = vec![0.0; m * width];
        let mut rhs = vec![0.0; m];
        let at = |i: usize, j: usize| i * width + (j + bw - i);
        for i in 0..m {
            let t = i + 1;
            band[at(i, i)] = self.outflow[t];
            for k in self.start[t]..self.start[t + 1] {
                let u = self.sources[k] as usize;
                if u == 0 {
                    rhs[i] += self.rates[k];
                } else {
                    band[at(i, u - 1)] -= self.rates[k];
                }
            }
        }
        for k in 0..m {
            let pivot = band[at(k, k)];
            if pivot.abs() < f64::MIN_POSITIVE {
                return Err(Error::ChainSolve(format!("zero pivot at state {}", k + 1)));
            }
            let last = (k + bw).min(m - 1);
            for i in k + 1..=last {
                let f = band[at(i, k)] / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..=last {
                    band[at(i, j)] -= f * band[at(k, j)];
                }
                rhs[i] -= f * rhs[k];
            }
        }
        let mut x = vec![0.0; m];
        for k in (0..m).rev() {
            let last = (k + bw).min(m - 1);
            let mut acc = rhs[k];
            for j in k + 1..=last {
                acc -= band[at(k, j)] * x[j];
            }
            x[k] = acc / band[at(k, k)];
        }
        let mut pi = Vec::with_capacity(self.states);
        pi.push(1.0);
        pi.extend(x);
        Ok(pi)
    }

    /// Gauss-Seidel sweeps interleaved with iterative aggregation: for each
    /// gap coordinate the states are lumped by its value, the lumped chain (a
    /// birth-death chain, since every move changes a coordinate by at most
    /// one) is solved exactly and the iterate rescaled to match it.
    fn iterative_solve(&self) -> Result<Vec<f64>> {
        let (states, side) = (self.states, self.side);
        let mut pi = vec![1.0 / states as f64; states];
        let mut residual = f64::INFINITY;
        // Lumpings: each coordinate, each prefix sum and each suffix sum of
        // the gaps. Every move shifts each of these by at most one.
        let coords: Vec<Vec<usize>> = (0..states)
            .map(|s| (0..self.gaps).map(|g| (s / side.pow(g as u32)) % side).collect())
            .collect();
        let mut lumpings: Vec<std::ops::Range<usize>> = (0..self.gaps).map(|g| g..g + 1).collect();
        lumpings.extend((2..=self.gaps).map(|k| 0..k));
        lumpings.extend((1..self.gaps.saturating_sub(1)).map(|k| k..self.gaps));
        let levels: Vec<Vec<u16>> = lumpings
            .iter()
            .map(|r| coords.iter().map(|z| z[r.clone()].iter().sum::<usize>() as u16).collect())
            .collect();
        drop(coords);
        let nlevels = self.gaps * (side - 1) + 1;
        let mut scratch = Lumping::new(nlevels);
        // Anderson mixing over the last few sweep outputs.
        let mut xs: std::collections::VecDeque<Vec<f64>> = std::collections::VecDeque::new();
        let mut gs: std::collections::VecDeque<Vec<f64>> = std::collections::VecDeque::new();
        for sweep in 0..GS_MAX_SWEEPS {
            let mut g = pi.clone();
            self.sweep(&mut g, &levels, &mut scratch);
            xs.push_back(pi.clone());
            gs.push_back(g.clone());
            if xs.len() > ANDERSON_DEPTH + 1 {
                xs.pop_front();
                gs.pop_front();
            }
            pi = match anderson_step(&xs, &gs) {
                Some(mixed) => mixed,
                None => {
                    if xs.len() > 1 {
                        xs.clear();
                        gs.clear();
                    }
                    g
                }
            };
            if sweep % 4 == 3 {
                residual = self.residual(&pi);
                if residual < GS_TOL {
                    return Ok(pi);
                }
            }
        }
        Err(Error::ChainSolve(format!("iterative solve stalled at relative residual {residual:e}")))
    }

    /// One lumping correction per level function, then a forward and a
    /// backward Gauss-Seidel pass, then renormalization.
    fn sweep(&self, pi: &mut [f64], levels: &[Vec<u16>], w: &mut Lumping) {
        let states = self.states;
        for level in levels {
            w.mass.fill(0.0);
            w.up.fill(0.0);
            w.down.fill(0.0);
            for t in 0..states {
                let lt = level[t];
                w.mass[lt as usize] += pi[t];
                for k in self.start[t]..self.start[t + 1] {
                    let u = self.sources[k] as usize;
                    let lu = level[u];
                    if lt == lu + 1 {
                        w.up[lu as usize] += pi[u] * self.rates[k];
                    } else if lu == lt + 1 {
                        w.down[lu as usize] += pi[u] * self.rates[k];
                    }
                }
            }
            // Flows are probability-weighted, so the lumped balance reads
            // xi_{k+1} / xi_k = (up_k / mass_k) / (down_{k+1} / mass_{k+1}).
            let top = level.iter().copied().max().unwrap_or(0) as usize + 1;
            w.xi[0] = 1.0;
            let mut ok = w.mass[0] > 0.0;
            for k in 0..top - 1 {
                let denom = w.down[k + 1] * w.mass[k];
                if !(denom > 0.0 && w.mass[k + 1] > 0.0) {
                    ok = false;
                    break;
                }
                w.xi[k + 1] = w.xi[k] * w.up[k] * w.mass[k + 1] / denom;
            }
            if !ok {
                continue;
            }
            let total: f64 = w.xi[..top].iter().sum();
            for k in 0..top {
                w.xi[k] /= total * w.mass[k];
            }
            for t in 0..states {
                pi[t] *= w.xi[level[t] as usize];
            }
        }
        for t in 0..states {
            pi[t] = self.inflow(pi, t) / self.outflow[t];
        }
        for t in (0..states).rev() {
            pi[t] = self.inflow(pi, t) / self.outflow[t];
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
    }
}

const ANDERSON_DEPTH: usize = 6;

struct Lumping {
    mass: Vec<f64>,
    up: Vec<f64>,
    down: Vec<f64>,
    xi: Vec<f64>,
}

impl Lumping {
    fn new(levels: usize) -> Self {
        Lumping { mass: vec![0.0; levels], up: vec![0.0; levels], down: vec![0.0; levels], xi: vec![0.0; levels] }
    }
}

/// Anderson-mixed next iterate from inputs `xs` and sweep outputs `gs`.
/// `None` when the history is too short or the mix is not a usable density.
fn anderson_step(xs: &std::collections::VecDeque<Vec<f64>>, gs: &std::collections::VecDeque<Vec<f64>>) -> Option<Vec<f64>> {
    let h = xs.len();
    if h < 2 {
        return None;
    }
    let n = xs[0].len();
    let f = |j: usize, i: usize| gs[j][i] - xs[j][i];
    let m = h - 1;
    // Columns df_j = f_{j+1} - f_j; least squares for the latest residual.
    let mut ata = vec![0.0; m * m];
    let mut atb = vec![0.0; m];
    for i in 0..n {
        let fl = f(h - 1, i);
        let mut col = [0.0; ANDERSON_DEPTH];
        for j in 0..m {
            col[j] = f(j + 1, i) - f(j, i);
        }
        for j in 0..m {
            atb[j] += col[j] * fl;
            for k in 0..=j {
                ata[j * m + k] += col[j] * col[k];
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            ata[k * m + j] = ata[j * m + k];
        }
    }
    let trace: f64 = (0..m).map(|j| ata[j * m + j]).sum();
    for j in 0..m {
        ata[j * m + j] += 1e-12 * trace + f64::MIN_POSITIVE;
    }
    let gamma = solve_dense(&mut ata, &mut atb, m)?;
    let mut out = gs[h - 1].clone();
    for (j, &c) in gamma.iter().enumerate() {
        for i in 0..n {
            out[i] -= c * (gs[j + 1][i] - gs[j][i]);
        }
    }
    let mut total = 0.0;
    for p in out.iter_mut() {
        *p = p.max(0.0);
        total += *p;
    }
    if !(total.is_finite() && total > 0.0) {
        return None;
    }
    out.iter_mut().for_each(|p| *p /= total);
    Some(out)
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for k in 0..m {
        let p = (k..m).max_by(|&i, &j| a[i * m + k].abs().total_cmp(&a[j * m + k].abs()))?;
        if a[p * m + k] == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..m {
                a.swap(k * m + j, p * m + j);
            }
            b.swap(k, p);
        }
        for i in k + 1..m {
            let f = a[i * m + k] / a[k * m + k];
            for j in k..m {
                a[i * m + j] -= f * a[k * m + j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let acc = b[k] - (k + 1..m).map(|j| a[k * m + j] * x[j]).sum::<f64>();
        x[k] = acc / a[k * m + k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Cuts the particle line at every gap whose fixed-point load is at least `1 - tol`.
pub fn partition_oracle(rates: &RateSystem, tol: f64) -> Result<OrderedPartition> {
    let sol = solve_general_traffic(&to_jackson(rates), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(partition_from_loads(&sol.rho, tol))
}

pub(crate) fn partition_from_loads(rho: &[f64], tol: f64) -> OrderedPartition {
    let mut parts = Vec::new();
    let mut first = 1;
    for (g, &r) in rho.iter().enumerate() {
        if r >= 1.0 - tol {
            parts.push(DiscreteInterval::span(first, g + 1));
            first = g + 2;
        }
    }
    parts.push(DiscreteInterval::span(first, rho.len() + 1));
    OrderedPartition::new(parts, rho.len() + 1).expect("cuts produce a tiling")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::NotApplicable => "n/a",
        })
    }
}

/// One comparison. `metric <= threshold` passes unless noted otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub analytical: f64,
    pub observed: f64,
    pub metric: f64,
    pub threshold: f64,
    pub status: Status,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub note: String,
}

impl Check {
    fn graded(name: String, analytical: f64, observed: f64, metric: f64, threshold: f64) -> Self {
        let status = if metric <= threshold { Status::Pass } else { Status::Fail };
        Check { name, analytical, observed, metric, threshold, status, seed: None, horizon: None, note: String::new() }
    }

    /// Passes when `metric >= minimum`; used for p-values.
    fn at_least(name: String, observed: f64, minimum: f64) -> Self {
        let mut c = Check::graded(name, f64::NAN, observed, observed, minimum);
        c.status = if observed >= minimum { Status::Pass } else { Status::Fail };
        c
    }

    fn skipped(name: &str, note: &str) -> Self {
        Check {
            name: name.to_string(),
            analytical: f64::NAN,
            observed: f64::NAN,
            metric: f64::NAN,
            threshold: f64::NAN,
            status: Status::NotApplicable,
            seed: None,
            horizon: None,
            note: note.to_string(),
        }
    }

    fn run(mut self, seed: u64, horizon: f64) -> Self {
        self.seed = Some(seed);
        self.horizon = Some(horizon);
        self
    }

    fn noted(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub critical_notes: Vec<String>,
    pub rng: String,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let _ = writeln!(
            out,
            "{:<w$}  {:>6}  {:>16}  {:>16}  {:>12}  {:>10}  {:>6}  {:>10}  note",
            "check", "status", "analytical", "observed", "metric", "threshold", "seed", "horizon"
        );
        let num = |x: f64| if x.is_nan() { "-".to_string() } else { sig(x, 8) };
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<w$}  {:>6}  {:>16}  {:>16}  {:>12}  {:>10}  {:>6}  {:>10}  {}",
                c.name,
                c.status.to_string(),
                num(c.analytical),
                num(c.observed),
                num(c.metric),
                num(c.threshold),
                c.seed.map_or("-".into(), |s| s.to_string()),
                c.horizon.map_or("-".into(), |h| sig(h, 6)),
                c.note
            );
        }
        for n in &self.critical_notes {
            let _ = writeln!(out, "{n}");
        }
        let _ = writeln!(out, "rng: {}", self.rng);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimBudget {
    pub horizon: f64,
    pub replicas: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Shift every analytical speed by one half, so that speed checks must fail.
    pub corrupt_expected: bool,
    /// Cap for the truncated-chain comparison; a size-based default otherwise.
    pub cap: Option<u32>,
}

/// Tolerance used to cut the fixed-point oracle's partition.
pub const ORACLE_TOL: f64 = 1e-9;
/// Interior and boundary loads of analyzer and oracle must agree this closely.
pub const LOAD_AGREEMENT: f64 = 1e-8;
/// Standard errors allowed between an empirical and an analytical mean.
pub const SE_MULTIPLIER: f64 = 3.0;
/// Largest total-variation distance for an interior-gap marginal.
pub const MARGINAL_TV: f64 = 0.02;
/// Bound `B` in the boundary-gap occupation `{eta <= B}`.
pub const ESCAPE_BOUND: u64 = 10;
/// Target count of excursions for the renewal-based estimates.
pub const EXCURSION_TARGET: f64 = 2e4;

fn default_cap(gaps: usize) -> Option<u32> {
    match gaps {
        1 => Some(60),
        2 => Some(40),
        3 => Some(24),
        _ => None,
    }
}

/// Relative tolerance on a sample variance from `r` replicas: 10%, widened
/// to three standard errors `sqrt(2 / (r - 1))` when few replicas are used.
pub fn variance_tolerance(replicas: u64) -> f64 {
    (SE_MULTIPLIER * (2.0 / (replicas as f64 - 1.0)).sqrt()).max(0.10)
}

/// Runs every applicable check on one instance.
pub fn verify_instance(rates: &RateSystem, budget: SimBudget, options: VerifyOptions) -> Result<VerificationReport> {
    let report = analyze(rates)?;
    let n = rates.gaps();
    let critical = report.flags.critical_tie;
    let mut checks = Vec::new();
    let critical_notes: Vec<String> = report.critical.iter().map(|c| c.to_string()).collect();

    // 1. analyzer vs fixed-point oracle.
    let oracle = solve_general_traffic(&to_jackson(rates), DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let oracle_partition = partition_from_loads(&oracle.rho, ORACLE_TOL);
    let same = oracle_partition == report.partition;
    let mut c = Check::graded(
        "oracle partition".into(),
        report.partition.len() as f64,
        oracle_partition.len() as f64,
        if same { 0.0 } else { 1.0 },
        0.0,
    )
    .noted(format!("{} vs {}", report.partition, oracle_partition));
    if critical && !same {
        c.status = Status::NotApplicable;
        c.note.push_str("; critical tie");
    }
    checks.push(c);
    let load_diff = report
        .rho
        .iter()
        .zip(&oracle.rho)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max);
    checks.push(Check::graded("oracle loads".into(), 0.0, load_diff, load_diff, LOAD_AGREEMENT));

    // 2. truncated-chain stationary law.
    let cap = options.cap.or_else(|| default_cap(n));
    match (report.stationary.as_slice(), cap) {
        ([law], Some(cap)) if report.is_single_cloud() && !critical => {
            let spec = TruncatedChainSpec::new(rates.clone(), cap)?;
            let solved = truncated_stationary(&spec)?;
            let sup = solved.sup_norm_to(&law.law)?;
            let rho_max = law.law.rhos().iter().cloned().fold(0.0, f64::max);
            let threshold = (2.0 * rho_max.powi(cap as i32)).max(1e-6);
            checks.push(
                Check::graded("truncated chain sup-norm".into(), 0.0, sup, sup, threshold)
                    .noted(format!("cap {cap}, {:?} solve", solved.method)),
            );
        }
        _ => checks.push(Check::skipped("truncated chain sup-norm", "needs one stable cloud with at most 3 gaps")),
    }

    let statistical_skip = if critical { Some("critical tie") } else { None };
    let seed = budget.seed;
    let horizon = budget.horizon;
    let runs = if statistical_skip.is_none() {
        simulate_replicas(rates, &SimConfig::new(horizon, seed), budget.replicas)?
    } else {
        Vec::new()
    };

    // 3. speeds.
    let shift = if options.corrupt_expected { 0.5 } else { 0.0 };
    if let Some(why) = statistical_skip {
        checks.push(Check::skipped("speeds", why));
    } else if budget.replicas < 2 {
        checks.push(Check::skipped("speeds", "needs at least 2 replicas"));
    } else {
        for (i, ((m, se), &v)) in replica_speeds(&runs).into_iter().zip(&report.speeds).enumerate() {
            let expected = v + shift;
            let z = (m - expected).abs() / se;
            checks.push(Check::graded(format!("speed x_{}", i + 1), expected, m, z, SE_MULTIPLIER).run(seed, horizon));
        }
    }

    // 4. interior-gap marginals.
    let interior: Vec<(usize, f64)> = report
        .stationary
        .iter()
        .flat_map(|c| c.cloud.interior_gaps().zip(c.law.rhos().iter().copied()))
        .collect();
    if interior.is_empty() {
        checks.push(Check::skipped("gap marginals", "no cloud with interior gaps"));
    } else if let Some(why) = statistical_skip {
        checks.push(Check::skipped("gap marginals", why));
    } else {
        let occ = pooled_occupation(&runs)?;
        for (g, rho) in interior {
            let law = crate::simulate::empirical_gap_law(&occ, &[g])?;
            let tv = law.tv_to_geometric(&[rho])?;
            let mean = law.probs.iter().map(|(z, p)| z[0] as f64 * p).sum::<f64>();
            checks.push(
                Check::graded(format!("gap {g} marginal tv"), rho / (1.0 - rho), mean, tv, MARGINAL_TV)
                    .run(seed, horizon)
                    .noted("analytical/observed are means"),
            );
        }
    }

    // 5. boundary-gap escape.
    let parts = report.partition.parts();
    let escaping: Vec<usize> = (0..parts.len().saturating_sub(1))
        .filter(|&k| report.cloud_speeds[k + 1] > report.cloud_speeds[k])
        .map(|k| parts[k].last())
        .collect();
    if escaping.is_empty() {
        checks.push(Check::skipped("boundary escape", "no separating boundary gap"));
    } else if let Some(why) = statistical_skip {
        checks.push(Check::skipped("boundary escape", why));
    } else {
        let reps = budget.replicas.clamp(2, 16);
        let escape_seed = seed.wrapping_add(1);
        let horizons = [horizon / 4.0, horizon / 2.0, horizon];
        let mut fractions: Vec<Vec<(f64, f64)>> = vec![Vec::new(); escaping.len()];
        for &h in &horizons {
            let runs = simulate_replicas(rates, &SimConfig::new(h, escape_seed).with_burn_in(0.0), reps)?;
            for (k, &g) in escaping.iter().enumerate() {
                let f: Vec<f64> = runs
                    .iter()
                    .map(|s| s.occupation.as_ref().expect("occupation tracked").fraction_at_most(g, ESCAPE_BOUND))
                    .collect::<Result<_>>()?;
                fractions[k].push((stats::mean(&f), stats::standard_error(&f)));
            }
        }
        for (k, &g) in escaping.iter().enumerate() {
            let f = &fractions[k];
            let worst = f
                .windows(2)
                .map(|w| (w[1].0 - w[0].0) / (w[0].1.hypot(w[1].1)).max(f64::MIN_POSITIVE))
                .fold(f64::NEG_INFINITY, f64::max);
            checks.push(
                Check::graded(format!("gap {g} escape"), 0.0, f[2].0, worst, 2.0)
                    .run(escape_seed, horizon)
                    .noted(format!(
                        "P(eta <= {ESCAPE_BOUND}) at T/4, T/2, T: {} {} {}",
                        sig(f[0].0, 4),
                        sig(f[1].0, 4),
                        sig(f[2].0, 4)
                    )),
            );
        }
    }

    // 6. two-particle central limit.
    let replica_var = (budget.replicas >= 2 && !runs.is_empty()).then(|| {
        let v = report.speeds[0];
        let w: Vec<f64> = runs.iter().map(|s| (s.displacement[0] as f64 - v * horizon) / horizon.sqrt()).collect();
        (stats::sample_variance(&w), stats::jarque_bera(&w).1)
    });
    let var_tol = variance_tolerance(budget.replicas);
    match (clt_constants_two_particle(rates), replica_var) {
        (Ok(clt), Some((var, p))) if !critical => {
            let rel = (var - clt.sigma2).abs() / clt.sigma2;
            checks.push(Check::graded("clt variance".into(), clt.sigma2, var, rel, var_tol).run(seed, horizon));
            checks.push(
                Check::at_least("clt normality".into(), p, 1e-3)
                    .run(seed, horizon)
                    .noted("Jarque-Bera p-value, passes at or above the threshold"),
            );
        }
        _ => checks.push(Check::skipped("clt variance", "needs a stable two-particle system")),
    }

    // 7. excursion estimator.
    match (excursion_rate(rates), replica_var) {
        (Ok(alpha), Some((var, _))) if !critical => {
            let exc_seed = seed.wrapping_add(2);
            let exc_horizon = (EXCURSION_TARGET / alpha).clamp(horizon, 50.0 * horizon);
            let exc = extract_excursions(rates, &SimConfig::new(exc_horizon, exc_seed))?;
            match summarize_excursions(&exc, rates) {
                Ok(s) => {
                    checks.push(
                        Check::graded(
                            "excursion mean length".into(),
                            1.0 / alpha,
                            s.mean_kappa,
                            (s.mean_kappa - 1.0 / alpha).abs() / s.se_kappa,
                            SE_MULTIPLIER,
                        )
                        .run(exc_seed, exc_horizon)
                        .noted(format!("{} excursions", s.count)),
                    );
                    let tol = var_tol.max(0.15);
                    checks.push(
                        Check::graded("excursion sigma2".into(), var, s.sigma2, (s.sigma2 - var).abs() / var, tol)
                            .run(exc_seed, exc_horizon)
                            .noted("analytical column holds the replica variance"),
                    );
                }
                Err(e) => checks.push(Check::skipped("excursion sigma2", &e.to_string())),
            }
        }
        _ => checks.push(Check::skipped("excursion sigma2", "needs one stable cloud and replicas")),
    }

    Ok(VerificationReport { checks, critical_notes, rng: RNG_ID.to_string() })
}
