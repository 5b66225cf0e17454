//! Rate systems, discrete intervals, ordered partitions and the closed-form
//! scalar quantities attached to a block of consecutive particles.
//!
//! Labels are 1-based throughout the public API: particles are `1..=N+1`
//! and gap `i` sits between particles `i` and `i + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible `|sum log(a_u / b_u)|` over any run of particles.
pub const MAX_LOG_RATIO_SPAN: f64 = 600.0;

/// Which positivity assumption a rate system satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// `a_i >= 0` and `b_i > 0` for every particle.
    Standard,
    /// Only the mirrored form holds: `a_i > 0`, `b_i >= 0` with some `b_i = 0`.
    MirroredOnly,
}

/// Jump rates of `N + 1` particles: `a[i]` to the left, `b[i]` to the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSystem {
    a: Vec<f64>,
    b: Vec<f64>,
    assumption: Assumption,
}

impl RateSystem {
    /// Validates the rates: equal lengths, at least two particles, finite
    /// `a_i >= 0`, finite `b_i > 0`, and ratio products inside double range.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch { a: a.len(), b: b.len() });
        }
        if a.len() < 2 {
            return Err(Error::TooFewParticles(a.len()));
        }
        for (i, (&ai, &bi)) in a.iter().zip(&b).enumerate() {
            if !ai.is_finite() || ai < 0.0 {
                return Err(Error::InvalidLeftRate { label: i + 1, value: ai });
            }
            if !bi.is_finite() || bi <= 0.0 {
                return Err(Error::InvalidRightRate { label: i + 1, value: bi });
            }
        }
        check_ratio_span(&a, &b)?;
        Ok(Self { a, b, assumption: Assumption::Standard })
    }

    /// Number of particles `N + 1`.
    pub fn particles(&self) -> usize {
        self.a.len()
    }

    /// Number of gaps `N`.
    pub fn gaps(&self) -> usize {
        self.a.len() - 1
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Left rate of particle `label` (1-based).
    pub fn a_of(&self, label: usize) -> f64 {
        self.a[label - 1]
    }

    /// Right rate of particle `label` (1-based).
    pub fn b_of(&self, label: usize) -> f64 {
        self.b[label - 1]
    }

    pub fn assumption(&self) -> Assumption {
        self.assumption
    }

    /// Mirror image under `x -> -x`: `a'_i = b_{N+2-i}`, `b'_i = a_{N+2-i}`.
    ///
    /// When some `a_i` is zero the image has a zero right rate and is
    /// flagged [`Assumption::MirroredOnly`]; analytical operations refuse it.
    pub fn reflect(&self) -> RateSystem {
        let a: Vec<f64> = self.b.iter().rev().copied().collect();
        let b: Vec<f64> = self.a.iter().rev().copied().collect();
        let assumption = if b.iter().all(|&x| x > 0.0) && a.iter().all(|&x| x >= 0.0) {
            Assumption::Standard
        } else {
            Assumption::MirroredOnly
        };
        RateSystem { a, b, assumption }
    }

    /// Restriction to the particles of `interval`, relabelled from 1.
    pub fn restrict(&self, interval: DiscreteInterval) -> Result<RateSystem> {
        self.check_interval(interval)?;
        let range = interval.first - 1..interval.last();
        Ok(RateSystem {
            a: self.a[range.clone()].to_vec(),
            b: self.b[range].to_vec(),
            assumption: self.assumption,
        })
    }

    pub(crate) fn require_standard(&self) -> Result<()> {
        match self.assumption {
            Assumption::Standard => Ok(()),
            Assumption::MirroredOnly => Err(Error::MirroredAssumption),
        }
    }

    pub(crate) fn check_interval(&self, interval: DiscreteInterval) -> Result<()> {
        self.require_standard()?;
        if interval.first == 0 || interval.len == 0 || interval.last() > self.particles() {
            return Err(Error::IntervalOutOfBounds {
                first: interval.first,
                len: interval.len,
                particles: self.particles(),
            });
        }
        Ok(())
    }

    /// The whole system `[1; N+1]`.
    pub fn full_interval(&self) -> DiscreteInterval {
        DiscreteInterval { first: 1, len: self.particles() }
    }
}

fn check_ratio_span(a: &[f64], b: &[f64]) -> Result<()> {
    // Max |partial sum| over runs of positive a_u is max prefix - min prefix
    // within each zero-free segment.
    let mut seg_start = 0;
    let mut prefix = 0.0_f64;
    let (mut lo, mut hi) = (0.0_f64, 0.0_f64);
    let (mut lo_at, mut hi_at) = (0usize, 0usize);
    for (u, (&au, &bu)) in a.iter().zip(b).enumerate() {
        if au == 0.0 {
            seg_start = u + 1;
            prefix = 0.0;
            lo = 0.0;
            hi = 0.0;
            lo_at = u + 1;
            hi_at = u + 1;
            continue;
        }
        prefix += (au / bu).ln();
        let span = (prefix - lo).abs().max((prefix - hi).abs());
        if span > MAX_LOG_RATIO_SPAN {
            let from = if (prefix - lo).abs() >= (prefix - hi).abs() { lo_at } else { hi_at };
            return Err(Error::RatioRange { first: from.max(seg_start) + 1, last: u + 1, log_span: span });
        }
        if prefix < lo {
            lo = prefix;
            lo_at = u + 1;
        }
        if prefix > hi {
            hi = prefix;
            hi_at = u + 1;
        }
    }
    Ok(())
}

/// The discrete interval `[first; len] = {first, ..., first + len - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteInterval {
    pub first: usize,
    pub len: usize,
}

impl DiscreteInterval {
    pub fn new(first: usize, len: usize) -> Self {
        Self { first, len }
    }

    /// Interval with the given first and last labels.
    pub fn span(first: usize, last: usize) -> Self {
        Self { first, len: last + 1 - first }
    }

    pub fn last(&self) -> usize {
        self.first + self.len - 1
    }

    pub fn contains(&self, label: usize) -> bool {
        label >= self.first && label <= self.last()
    }

    pub fn is_singleton(&self) -> bool {
        self.len == 1
    }

    /// Gap labels strictly inside the interval: `first..=last-1`.
    pub fn interior_gaps(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.len - 1
    }

    pub fn labels(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last()
    }

    /// Union with the interval immediately to the right.
    pub fn join(&self, right: DiscreteInterval) -> DiscreteInterval {
        debug_assert_eq!(self.last() + 1, right.first);
        DiscreteInterval { first: self.first, len: self.len + right.len }
    }
}

impl std::fmt::Display for DiscreteInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.len == 1 {
            write!(f, "{{{}}}", self.first)
        } else {
            write!(f, "{{{}..{}}}", self.first, self.last())
        }
    }
}

/// Contiguous, left-to-right decomposition of `1..=N+1` into intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderedPartition {
    parts: Vec<DiscreteInterval>,
}

impl OrderedPartition {
    /// Checks that `parts` tile `1..=particles` in increasing order.
    pub fn new(parts: Vec<DiscreteInterval>, particles: usize) -> Result<Self> {
        let mut next = 1;
        for p in &parts {
            if p.len == 0 {
                return Err(Error::InvalidPartition("empty part".into()));
            }
            if p.first != next {
                return Err(Error::InvalidPartition(format!(
                    "part {p} starts at {} but label {next} is next",
                    p.first
                )));
            }
            next = p.last() + 1;
        }
        if next != particles + 1 {
            return Err(Error::InvalidPartition(format!(
                "parts cover 1..={} but there are {particles} particles",
                next - 1
            )));
        }
        Ok(Self { parts })
    }

    /// Builds a partition from consecutive part sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut first = 1;
        let mut parts = Vec::with_capacity(sizes.len());
        for &len in sizes {
            parts.push(DiscreteInterval { first, len });
            first += len;
        }
        Self::new(parts, first - 1)
    }

    pub fn singletons(particles: usize) -> Self {
        Self { parts: (1..=particles).map(|i| DiscreteInterval::new(i, 1)).collect() }
    }

    pub fn whole(particles: usize) -> Self {
        Self { parts: vec![DiscreteInterval::new(1, particles)] }
    }

    pub fn parts(&self) -> &[DiscreteInterval] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn particles(&self) -> usize {
        self.parts.last().map_or(0, |p| p.last())
    }

    /// Non-singleton parts, in order.
    pub fn non_singletons(&self) -> impl Iterator<Item = DiscreteInterval> + '_ {
        self.parts.iter().copied().filter(|p| !p.is_singleton())
    }

    /// Gap labels separating successive parts.
    pub fn boundary_gaps(&self) -> Vec<usize> {
        self.parts[..self.parts.len().saturating_sub(1)].iter().map(|p| p.last()).collect()
    }

    /// Index of the part containing `label`.
    pub fn part_of(&self, label: usize) -> Option<usize> {
        self.parts.iter().position(|p| p.contains(label))
    }

    /// Image under the particle-order reversal `i -> N + 2 - i`.
    pub fn reversed(&self) -> OrderedPartition {
        let n1 = self.particles();
        let parts = self
            .parts
            .iter()
            .rev()
            .map(|p| DiscreteInterval::new(n1 + 1 - p.last(), p.len))
            .collect();
        Self { parts }
    }

    /// Sizes of the parts, left to right.
    pub fn sizes(&self) -> Vec<usize> {
        self.parts.iter().map(|p| p.len).collect()
    }
}

impl std::fmt::Display for OrderedPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (k, p) in self.parts.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// `alpha(I) = prod_{u in I} a_u / b_u`.
pub fn alpha(rates: &RateSystem, interval: DiscreteInterval) -> Result<f64> {
    rates.check_interval(interval)?;
    Ok(interval.labels().map(|u| rates.a_of(u) / rates.b_of(u)).product())
}

/// `beta(I)` through the backward recurrence
/// `beta(l; m) = 1/b_e + (a_e / b_e) beta(l; m-1)`, `e = l + m - 1`.
pub fn beta(rates: &RateSystem, interval: DiscreteInterval) -> Result<f64> {
    rates.check_interval(interval)?;
    let mut acc = 0.0;
    for e in interval.labels() {
        acc = 1.0 / rates.b_of(e) + rates.a_of(e) / rates.b_of(e) * acc;
    }
    Ok(acc)
}

/// Intrinsic speed `(1 - alpha(I)) / beta(I)` of a putative cloud.
pub fn hv(rates: &RateSystem, interval: DiscreteInterval) -> Result<f64> {
    let al = alpha(rates, interval)?;
    let be = beta(rates, interval)?;
    Ok((1.0 - al) / be)
}

/// Load `alpha(l; j+1-l) + beta(l; j+1-l) hv(I)` of interior gap `gap` of
/// `interval`.
pub fn hrho(rates: &RateSystem, interval: DiscreteInterval, gap: usize) -> Result<f64> {
    rates.check_interval(interval)?;
    if interval.len < 2 {
        return Err(Error::IntervalTooShort { first: interval.first, len: interval.len });
    }
    if !interval.interior_gaps().contains(&gap) {
        return Err(Error::NotInterior { gap, first: interval.first, len: interval.len });
    }
    Ok(interior_loads(rates, interval)?[gap - interval.first])
}

/// All interior loads of `interval`.
///
/// The loads satisfy `b_j rho_j = a_j rho_{j-1} + v` with `rho = 1` just
/// outside the interval on the left and at its last gap. Unrolled from the
/// left this is `alpha + beta * v`, which cancels badly once `alpha` is large.
/// Both the forward and the backward recurrence are run with a first-order
/// rounding-error estimate, and each gap takes the better of the two.
pub fn interior_loads(rates: &RateSystem, interval: DiscreteInterval) -> Result<Vec<f64>> {
    rates.check_interval(interval)?;
    if interval.len < 2 {
        return Err(Error::IntervalTooShort { first: interval.first, len: interval.len });
    }
    let v = hv(rates, interval)?;
    let n = interval.len - 1;
    let first = interval.first;
    let u = f64::EPSILON;

    let mut fwd = vec![0.0; n];
    let mut fwd_err = vec![0.0; n];
    let (mut prev, mut prev_err) = (1.0, 0.0);
    for k in 0..n {
        let j = first + k;
        let (a, b) = (rates.a_of(j), rates.b_of(j));
        let rho = (a * prev + v) / b;
        let err = (a * prev_err + u * ((a * prev).abs() + v.abs())) / b + u * rho.abs();
        fwd[k] = rho;
        fwd_err[k] = err;
        (prev, prev_err) = (rho, err);
    }

    // rho_{j-1} = (b_j rho_j - v) / a_j, from rho_last = 1.
    let (mut next, mut next_err) = (1.0, 0.0);
    let mut out = fwd;
    for k in (0..n).rev() {
        let j = first + k + 1;
        let (a, b) = (rates.a_of(j), rates.b_of(j));
        if a == 0.0 {
            break;
        }
        let rho = (b * next - v) / a;
        let err = (b * next_err + u * ((b * next).abs() + v.abs())) / a + u * rho.abs();
        if err < fwd_err[k] {
            out[k] = rho;
        }
        (next, next_err) = (rho, err);
    }
    Ok(out)
}

/// `alpha(first; j+1-first) + beta(first; j+1-first) * speed`; evaluating at
/// `j = last` with `speed = hv(I)` returns 1 up to rounding.
#[cfg(test)]
pub(crate) fn load_at(rates: &RateSystem, first: usize, gap: usize, speed: f64) -> f64 {
    let (mut al, mut be) = (1.0, 0.0);
    for u in first..=gap {
        al *= rates.a_of(u) / rates.b_of(u);
        be = 1.0 / rates.b_of(u) + rates.a_of(u) / rates.b_of(u) * be;
    }
    al + be * speed
}

/// Whether every prefix satisfies `a_1 ... a_k < b_1 ... b_k`; equivalent to
/// all asymptotic speeds being positive.
pub fn prefix_products_favour_right(rates: &RateSystem) -> bool {
    let mut log_ratio = 0.0_f64;
    for (&ai, &bi) in rates.a().iter().zip(rates.b()) {
        if ai == 0.0 {
            // Every longer prefix has a zero product on the left.
            return true;
        }
        log_ratio += ai.ln() - bi.ln();
        if log_ratio >= 0.0 {
            return false;
        }
    }
    true
}
