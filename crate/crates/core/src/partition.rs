//! Speed-comparison merging into stable clouds and assembly of the full
//! analytical report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clt::{clt_constants_two_particle, CltConstants};
use crate::error::{Error, Result};
use crate::jackson::{reduced_params, solve_general_traffic, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::law::GeometricProductLaw;
use crate::model::{hv, interior_loads, prefix_products_favour_right, DiscreteInterval, OrderedPartition, RateSystem};

/// Relative band inside which two speeds count as equal.
pub const TIE_TOL: f64 = 1e-12;
/// Band around 1 inside which a load is reported as critical.
pub const LOAD_TOL: f64 = 1e-10;

/// Which decreasing adjacency to merge on each pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MergePolicy {
    Leftmost,
    Rightmost,
    /// Merge every decreasing adjacency at once; runs collapse together.
    #[default]
    All,
    /// Uniform choice among decreasing adjacencies, from a fixed seed.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MergeAction {
    /// 1-based indices `j` of parts merged with part `j + 1`.
    Merge(Vec<usize>),
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub iteration: usize,
    pub partition: OrderedPartition,
    pub speeds: Vec<f64>,
    pub action: MergeAction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeTrace {
    pub steps: Vec<MergeStep>,
}

impl std::fmt::Display for MergeTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for step in &self.steps {
            write!(f, "k={} {} speeds=[", step.iteration, step.partition)?;
            for (i, v) in step.speeds.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", crate::report::sig(*v, 12))?;
            }
            match &step.action {
                MergeAction::Merge(js) => {
                    let js: Vec<String> = js.iter().map(|j| j.to_string()).collect();
                    writeln!(f, "] merge j={}", js.join(","))?
                }
                MergeAction::Stop => writeln!(f, "] stop")?,
            }
        }
        Ok(())
    }
}

/// Characteristic rate magnitude of a block, used to scale tie bands.
fn rate_scale(rates: &RateSystem, interval: DiscreteInterval) -> f64 {
    interval
        .labels()
        .map(|u| rates.a_of(u) + rates.b_of(u))
        .fold(0.0, f64::max)
}

fn tie_band(rates: &RateSystem, left: DiscreteInterval, right: DiscreteInterval) -> f64 {
    TIE_TOL * rate_scale(rates, left.join(right))
}

/// Runs the merging procedure from singletons until part speeds are
/// non-decreasing left to right.
pub fn cloud_partition(rates: &RateSystem, policy: MergePolicy) -> Result<(OrderedPartition, MergeTrace)> {
    rates.require_standard()?;
    let mut parts = OrderedPartition::singletons(rates.particles()).parts().to_vec();
    let mut speeds: Vec<f64> = parts.iter().map(|&p| hv(rates, p)).collect::<Result<_>>()?;
    let mut rng = match policy {
        MergePolicy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut trace = MergeTrace::default();
    for iteration in 0.. {
        // 0-based j with speed(j) > speed(j+1) beyond the tie band.
        let decreasing: Vec<usize> = (0..parts.len().saturating_sub(1))
            .filter(|&j| speeds[j] - speeds[j + 1] > tie_band(rates, parts[j], parts[j + 1]))
            .collect();
        let snapshot = OrderedPartition::new(parts.clone(), rates.particles())?;
        if decreasing.is_empty() {
            trace.steps.push(MergeStep { iteration, partition: snapshot.clone(), speeds, action: MergeAction::Stop });
            return Ok((snapshot, trace));
        }
        let chosen: Vec<usize> = match policy {
            MergePolicy::Leftmost => vec![decreasing[0]],
            MergePolicy::Rightmost => vec![*decreasing.last().unwrap()],
            MergePolicy::All => decreasing,
            MergePolicy::Random(_) => {
                let rng = rng.as_mut().unwrap();
                vec![decreasing[rng.random_range(0..decreasing.len())]]
            }
        };
        trace.steps.push(MergeStep {
            iteration,
            partition: snapshot,
            speeds: speeds.clone(),
            action: MergeAction::Merge(chosen.iter().map(|j| j + 1).collect()),
        });
        // Merge from the right so earlier indices stay valid; a run j, j+1
        // collapses three parts into one.
        for &j in chosen.iter().rev() {
            let joined = parts[j].join(parts[j + 1]);
            parts.splice(j..=j + 1, [joined]);
            speeds.remove(j + 1);
            speeds[j] = f64::NAN;
        }
        for (p, v) in parts.iter().zip(speeds.iter_mut()) {
            if v.is_nan() {
                *v = hv(rates, *p)?;
            }
        }
    }
    unreachable!()
}

/// Loads of every gap given the cloud partition: interior gaps take the
/// closed-form cloud loads, boundary gaps the clamped local balance.
pub fn full_loads(rates: &RateSystem, partition: &OrderedPartition) -> Result<Vec<f64>> {
    rates.require_standard()?;
    if partition.particles() != rates.particles() {
        return Err(Error::DimensionMismatch { expected: rates.particles(), got: partition.particles() });
    }
    let n = rates.gaps();
    let mut rho = vec![f64::NAN; n];
    for part in partition.non_singletons() {
        let loads = interior_loads(rates, part)?;
        for (g, r) in part.interior_gaps().zip(loads) {
            rho[g - 1] = r;
        }
    }
    // Neighbours that are boundary gaps (or outside 1..=N) clamp to 1.
    let clamped = |g: usize, rho: &[f64]| -> f64 {
        if g == 0 || g > n || rho[g - 1].is_nan() {
            1.0
        } else {
            rho[g - 1].min(1.0)
        }
    };
    let boundary = partition.boundary_gaps();
    let mut values = Vec::with_capacity(boundary.len());
    for &g in &boundary {
        let num = clamped(g - 1, &rho) * rates.a_of(g) + clamped(g + 1, &rho) * rates.b_of(g + 1);
        values.push(num / (rates.b_of(g) + rates.a_of(g + 1)));
    }
    for (&g, r) in boundary.iter().zip(values) {
        if r < 1.0 - LOAD_TOL {
            return Err(Error::BoundaryLoadBelowOne { gap: g, rho: r });
        }
        rho[g - 1] = r;
    }
    Ok(rho)
}

/// Per-particle speeds `(1 ^ rho_i) b_i - (1 ^ rho_{i-1}) a_i`, with
/// `rho_0 = rho_{N+1} = 1`.
pub fn particle_speeds(rates: &RateSystem, loads: &[f64]) -> Result<Vec<f64>> {
    let n = rates.gaps();
    if loads.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: loads.len() });
    }
    let clamp = |g: usize| if g == 0 || g > n { 1.0 } else { loads[g - 1].min(1.0) };
    let v: Vec<f64> = (1..=n + 1)
        .map(|i| clamp(i) * rates.b_of(i) - clamp(i - 1) * rates.a_of(i))
        .collect();
    for i in 1..=n {
        let band = TIE_TOL * (rates.a_of(i) + rates.b_of(i) + rates.a_of(i + 1) + rates.b_of(i + 1));
        if v[i] < v[i - 1] - band {
            return Err(Error::NonMonotoneSpeeds { label: i });
        }
    }
    Ok(v)
}

/// Stationary law of the interior gaps of one stable cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudLaw {
    pub cloud: DiscreteInterval,
    pub law: GeometricProductLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub all_singletons: bool,
    pub single_cloud: bool,
    pub all_speeds_positive: bool,
    /// Some classification sits inside a floating-point tie band.
    pub critical_tie: bool,
}

/// Cases the exact dichotomy cannot settle numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CriticalNote {
    /// Adjacent clouds with equal speeds; long-run separation unresolved.
    EqualSpeeds { left: DiscreteInterval, right: DiscreteInterval, speed: f64 },
    /// A load within the critical band of 1.
    UnitLoad { gap: usize, rho: f64 },
}

impl std::fmt::Display for CriticalNote {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CriticalNote::EqualSpeeds { left, right, speed } => write!(
                f,
                "critical tie: clouds {left} and {right} share speed {} (behavior unresolved)",
                crate::report::sig(*speed, 12)
            ),
            CriticalNote::UnitLoad { gap, rho } => {
                write!(f, "critical tie: gap {gap} has load {} within the unit band", crate::report::sig(*rho, 12))
            }
        }
    }
}

/// Complete analytical description of the long-run behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudReport {
    pub partition: OrderedPartition,
    /// One load per gap; below one inside clouds, at least one between them.
    pub rho: Vec<f64>,
    /// One speed per particle.
    pub speeds: Vec<f64>,
    /// One speed per part.
    pub cloud_speeds: Vec<f64>,
    /// One law per non-singleton part.
    pub stationary: Vec<CloudLaw>,
    /// One expected span per non-singleton part.
    pub expected_widths: Vec<f64>,
    pub flags: Flags,
    pub critical: Vec<CriticalNote>,
    pub clt: Option<CltConstants>,
}

impl CloudReport {
    /// Whether the cloud partition has a single part.
    pub fn is_single_cloud(&self) -> bool {
        self.partition.len() == 1
    }
}

/// Full analysis under the default merge policy.
pub fn analyze(rates: &RateSystem) -> Result<CloudReport> {
    analyze_with(rates, MergePolicy::default()).map(|(r, _)| r)
}

/// Full analysis, also returning the merge trace.
pub fn analyze_with(rates: &RateSystem, policy: MergePolicy) -> Result<(CloudReport, MergeTrace)> {
    let (partition, trace) = cloud_partition(rates, policy)?;
    let rho = full_loads(rates, &partition)?;
    let speeds = particle_speeds(rates, &rho)?;
    let cloud_speeds: Vec<f64> = partition.parts().iter().map(|&p| hv(rates, p)).collect::<Result<_>>()?;

    let mut stationary = Vec::new();
    let mut expected_widths = Vec::new();
    let mut critical = Vec::new();
    for part in partition.non_singletons() {
        let loads: Vec<f64> = part.interior_gaps().map(|g| rho[g - 1]).collect();
        match GeometricProductLaw::new(loads) {
            Ok(law) => {
                expected_widths.push(law.expected_width());
                stationary.push(CloudLaw { cloud: part, law });
            }
            Err(_) => {
                // Interior load at (or rounding past) 1: unresolved.
                for g in part.interior_gaps() {
                    if rho[g - 1] >= 1.0 - LOAD_TOL {
                        critical.push(CriticalNote::UnitLoad { gap: g, rho: rho[g - 1] });
                    }
                }
            }
        }
    }
    for (k, w) in partition.parts().windows(2).enumerate() {
        if (cloud_speeds[k + 1] - cloud_speeds[k]).abs() <= tie_band(rates, w[0], w[1]) {
            critical.push(CriticalNote::EqualSpeeds { left: w[0], right: w[1], speed: cloud_speeds[k] });
        }
    }
    for (g, &r) in rho.iter().enumerate() {
        let already = critical.iter().any(|c| matches!(c, CriticalNote::UnitLoad { gap, .. } if *gap == g + 1));
        if (r - 1.0).abs() <= LOAD_TOL && !already {
            critical.push(CriticalNote::UnitLoad { gap: g + 1, rho: r });
        }
    }

    let all_singletons = rates
        .b()
        .iter()
        .zip(rates.a())
        .map(|(b, a)| b - a)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[0] <= w[1]);
    let single_cloud = interior_loads(rates, rates.full_interval())?.iter().all(|&r| r < 1.0);
    let flags = Flags {
        all_singletons,
        single_cloud,
        all_speeds_positive: prefix_products_favour_right(rates),
        critical_tie: !critical.is_empty(),
    };
    let clt = if single_cloud && rates.gaps() == 1 { clt_constants_two_particle(rates).ok() } else { None };

    Ok((
        CloudReport { partition, rho, speeds, cloud_speeds, stationary, expected_widths, flags, critical, clt },
        trace,
    ))
}

/// Whether `candidate` is the cloud partition: every part is internally
/// stable under its own reduced traffic equation and every boundary gap
/// carries a load of at least one.
pub fn check_partition(rates: &RateSystem, candidate: &OrderedPartition) -> bool {
    if candidate.particles() != rates.particles() {
        return false;
    }
    for part in candidate.non_singletons() {
        let Ok(params) = reduced_params(rates, part) else { return false };
        let Ok(sol) = solve_general_traffic(&params, DEFAULT_TOL, DEFAULT_MAX_ITER) else { return false };
        if !sol.all_stable() {
            return false;
        }
    }
    full_loads(rates, candidate).is_ok()
}
