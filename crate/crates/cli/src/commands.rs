use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use exclusion_clouds::config::{parse_config, ConfigFile};
use exclusion_clouds::report::{report_text, report_value, sig, snapshots_csv, to_canonical_json, Meta, VERSION};
use exclusion_clouds::simulate::{pooled_occupation, replica_speeds, RNG_ID};
use exclusion_clouds::verify::{verify_instance, SimBudget, VerifyOptions};
use exclusion_clouds::{analyze_with, simulate_replicas, MergePolicy, RateSystem, SimConfig};

use crate::error::CliError;
use crate::Budget;

type CmdResult = Result<ExitCode, CliError>;

const DEFAULT_HORIZON: f64 = 1e4;
const CRITICAL_EXIT: u8 = 3;
const VERIFY_FAIL_EXIT: u8 = 1;

fn load(path: &Path) -> Result<(ConfigFile, RateSystem), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    let cfg = parse_config(&text).map_err(|source| CliError::Config { path: path.into(), source })?;
    let rates = cfg.rates().map_err(|source| CliError::Rates { path: path.into(), source })?;
    Ok((cfg, rates))
}

fn positive_horizon(flag: Option<f64>, cfg: &ConfigFile) -> Result<f64, CliError> {
    let h = flag.or(cfg.horizon).unwrap_or(DEFAULT_HORIZON);
    if !(h.is_finite() && h > 0.0) {
        return Err(CliError::Usage(format!("horizon must be positive, got {h}")));
    }
    Ok(h)
}

pub fn analyze(path: &Path, json: bool, trace_merges: bool) -> CmdResult {
    let (cfg, rates) = load(path)?;
    let (report, trace) = analyze_with(&rates, MergePolicy::All)?;
    if json {
        let mut value = report_value(&report, &Meta { seed: cfg.seed, rng: None });
        if trace_merges {
            let steps = serde_json::to_value(&trace.steps).expect("trace serializes");
            value.as_object_mut().expect("report is an object").insert("merge_trace".into(), steps);
        }
        println!("{}", to_canonical_json(&value));
    } else {
        print!("{}", report_text(&report));
        if trace_merges {
            print!("merge trace:\n{trace}");
        }
    }
    Ok(if report.flags.critical_tie { ExitCode::from(CRITICAL_EXIT) } else { ExitCode::SUCCESS })
}

pub struct SimulateOptions {
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub burn_in: Option<f64>,
    pub out_csv: Option<PathBuf>,
    pub snapshots: usize,
}

fn fmt_or_dash(x: f64) -> String {
    if x.is_finite() {
        sig(x, 6)
    } else {
        "-".into()
    }
}

pub fn simulate(path: &Path, opts: &SimulateOptions) -> CmdResult {
    let (cfg, rates) = load(path)?;
    let horizon = positive_horizon(opts.horizon, &cfg)?;
    let seed = opts.seed.or(cfg.seed).unwrap_or(0);
    let replicas = opts.replicas.or(cfg.replicas).unwrap_or(1);
    if replicas == 0 {
        return Err(CliError::Usage("at least one replica is required".into()));
    }
    if opts.out_csv.is_some() && opts.snapshots == 0 {
        return Err(CliError::Usage("--snapshots must be positive".into()));
    }
    let mut sim = SimConfig::new(horizon, seed);
    sim.burn_in = opts.burn_in.or(cfg.burn_in);
    sim.initial_gaps = cfg.initial_gaps.clone();
    if opts.out_csv.is_some() {
        let k = opts.snapshots;
        sim.sample_times = (0..=k).map(|j| horizon * j as f64 / k as f64).collect();
    }
    let runs = simulate_replicas(&rates, &sim, replicas)?;
    if let Some(out) = &opts.out_csv {
        std::fs::write(out, snapshots_csv(&runs)).map_err(|source| CliError::Write { path: out.clone(), source })?;
    }

    let (report, _) = analyze_with(&rates, MergePolicy::All)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "particles {}, horizon {}, replicas {replicas}, burn-in {}",
        rates.particles(),
        sig(horizon, 12),
        sig(sim.effective_burn_in(), 12)
    );
    let _ = writeln!(out, "speeds (mean +/- SE over replicas, analytical):");
    for (i, ((m, se), v)) in replica_speeds(&runs).into_iter().zip(&report.speeds).enumerate() {
        let _ = writeln!(out, "  x_{}  {} +/- {}  {}", i + 1, sig(m, 6), fmt_or_dash(se), sig(*v, 6));
    }
    let occ = pooled_occupation(&runs)?;
    let _ = writeln!(out, "gap marginals (pooled occupation after burn-in):");
    for (g, times) in occ.marginals.iter().enumerate() {
        let w = occ.window;
        let mean: f64 = times.iter().enumerate().map(|(k, t)| k as f64 * t).sum::<f64>() / w;
        let p0 = times.first().copied().unwrap_or(0.0) / w;
        let p10: f64 = times.iter().take(11).sum::<f64>() / w;
        let rho = report.rho[g];
        let analytical = if rho < 1.0 { sig(rho / (1.0 - rho), 6) } else { "unbounded".into() };
        let _ = writeln!(
            out,
            "  gap {}  mean {}  P(0) {}  P(<=10) {}  analytical mean {analytical}",
            g + 1,
            sig(mean, 6),
            sig(p0, 6),
            sig(p10, 6)
        );
    }
    let _ = writeln!(out, "meta:\n  seed {seed}\n  rng {RNG_ID}\n  version {VERSION}");
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn preset(budget: Budget) -> SimBudget {
    let (horizon, replicas) = match budget {
        Budget::Small => (1e4, 8),
        Budget::Default => (1e5, 16),
        Budget::Large => (1e6, 32),
    };
    SimBudget { horizon, replicas, seed: 1 }
}

pub fn verify(path: &Path, budget: Budget, seed: Option<u64>, corrupt_expected: bool) -> CmdResult {
    let (cfg, rates) = load(path)?;
    let mut b = preset(budget);
    b.horizon = positive_horizon(cfg.horizon.or(Some(b.horizon)), &cfg)?;
    b.replicas = cfg.replicas.unwrap_or(b.replicas);
    b.seed = seed.or(cfg.seed).unwrap_or(b.seed);
    if b.replicas < 2 {
        return Err(CliError::Usage("verification needs at least two replicas".into()));
    }
    let cap = cfg
        .cap
        .map(|c| u32::try_from(c).map_err(|_| CliError::Usage(format!("cap {c} is too large"))))
        .transpose()?;
    let report = verify_instance(&rates, b, VerifyOptions { corrupt_expected, cap })?;
    print!("{}", report.table());
    let failed = report.failures();
    if failed == 0 {
        println!("result: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("result: FAIL ({failed} checks)");
        Ok(ExitCode::from(VERIFY_FAIL_EXIT))
    }
}

pub fn trace(path: &Path, horizon: Option<f64>, seed: Option<u64>, replica: u64, every: f64) -> CmdResult {
    let (cfg, rates) = load(path)?;
    let horizon = positive_horizon(horizon, &cfg)?;
    if !(every.is_finite() && every > 0.0) {
        return Err(CliError::Usage(format!("--every must be positive, got {every}")));
    }
    let steps = (horizon / every).floor() as usize;
    let times = (0..=steps).map(|k| k as f64 * every).collect();
    let mut sim = SimConfig::new(horizon, seed.or(cfg.seed).unwrap_or(0))
        .with_replica(replica)
        .with_sample_times(times)
        .without_occupation();
    sim.initial_gaps = cfg.initial_gaps.clone();
    let run = exclusion_clouds::simulate(&rates, &sim)?;
    print!("{}", snapshots_csv(&[run]));
    Ok(ExitCode::SUCCESS)
}
