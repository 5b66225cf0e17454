//! Human-readable and canonical JSON renderings of analysis results.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::model::DiscreteInterval;
use crate::partition::CloudReport;
use crate::simulate::SimStats;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `x` rounded to `digits` significant digits, printed without trailing zeros.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let rounded: f64 = format!("{:.*e}", digits - 1, x).parse().unwrap_or(x);
    let mag = rounded.abs();
    if (1e-5..1e15).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn join_sig(xs: &[f64]) -> String {
    xs.iter().map(|&x| sig(x, 12)).collect::<Vec<_>>().join(" ")
}

/// Metadata attached to machine-readable output.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub seed: Option<u64>,
    pub rng: Option<String>,
}

impl Meta {
    pub fn none() -> Self {
        Meta { seed: None, rng: None }
    }
}

fn interval_pair(p: DiscreteInterval) -> Value {
    json!([p.first, p.last()])
}

/// Structured form of a report. Object keys come out sorted because
/// `serde_json::Map` is ordered by key.
pub fn report_value(report: &CloudReport, meta: &Meta) -> Value {
    let mut flags = Map::new();
    flags.insert("all_singletons".into(), report.flags.all_singletons.into());
    flags.insert("all_speeds_positive".into(), report.flags.all_speeds_positive.into());
    flags.insert("critical_tie".into(), report.flags.critical_tie.into());
    flags.insert("single_cloud".into(), report.flags.single_cloud.into());
    flags.insert(
        "notes".into(),
        Value::Array(report.critical.iter().map(|c| Value::String(c.to_string())).collect()),
    );

    let widths: Vec<Value> = report
        .stationary
        .iter()
        .zip(&report.expected_widths)
        .map(|(c, &w)| json!({ "cloud": interval_pair(c.cloud), "width": w }))
        .collect();

    let clt = match report.clt {
        Some(c) => json!({ "sigma2": c.sigma2, "speed": c.speed }),
        None => Value::Null,
    };

    json!({
        "partition": report.partition.parts().iter().map(|&p| interval_pair(p)).collect::<Vec<_>>(),
        "rho": report.rho,
        "speeds": report.speeds,
        "cloud_speeds": report.cloud_speeds,
        "widths": widths,
        "flags": Value::Object(flags),
        "clt": clt,
        "meta": {
            "seed": meta.seed,
            "rng": meta.rng,
            "version": VERSION,
        },
    })
}

/// Canonical JSON text: sorted keys, shortest round-trip numbers, two-space indent.
pub fn to_canonical_json(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("Value serialization cannot fail")
}

pub fn report_json(report: &CloudReport, meta: &Meta) -> String {
    to_canonical_json(&report_value(report, meta))
}

/// Plain-text report, numbers to 12 significant digits.
pub fn report_text(report: &CloudReport) -> String {
    let mut out = String::new();
    let n = report.speeds.len();
    let _ = writeln!(out, "particles: {n}");
    let _ = writeln!(out, "partition: {}", report.partition);
    let _ = writeln!(out, "clouds:");
    let mut laws = report.stationary.iter().zip(&report.expected_widths);
    let mut next = laws.next();
    for (part, &v) in report.partition.parts().iter().zip(&report.cloud_speeds) {
        let _ = write!(out, "  {part}  speed {}", sig(v, 12));
        if let Some((law, &w)) = next {
            if law.cloud == *part {
                let _ = write!(out, "  width {}", sig(w, 12));
                next = laws.next();
            }
        }
        out.push('\n');
    }
    let _ = writeln!(out, "rho: {}", join_sig(&report.rho));
    let _ = writeln!(out, "speeds: {}", join_sig(&report.speeds));
    let f = &report.flags;
    let _ = writeln!(
        out,
        "flags: single_cloud={} all_singletons={} all_speeds_positive={} critical_tie={}",
        f.single_cloud, f.all_singletons, f.all_speeds_positive, f.critical_tie
    );
    if let Some(c) = report.clt {
        let _ = writeln!(out, "clt: speed {} sigma2 {}", sig(c.speed, 12), sig(c.sigma2, 12));
    }
    for note in &report.critical {
        let _ = writeln!(out, "{note}");
    }
    out
}

/// Sampled positions of every run as CSV: `replica,time,x_1,...`, times to
/// six decimals. Runs appear in the given order.
pub fn snapshots_csv(runs: &[SimStats]) -> String {
    let mut out = String::from("replica,time");
    let n = runs.first().map_or(0, |r| r.initial_positions.len());
    for i in 1..=n {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for run in runs {
        for snap in &run.snapshots {
            let _ = write!(out, "{},{:.6}", run.replica, snap.time);
            for x in &snap.positions {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
    }
    out
}
