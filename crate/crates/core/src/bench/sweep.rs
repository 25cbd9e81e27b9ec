use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::load::{run_load, LoadMetrics};
use super::target::LoadTarget;
use super::{BenchError, LoadMode, LoadSpec};

pub const CSV_HEADER: &str = "axis,offered_rate,throughput_tps,avg_latency_ms,p95_ms,process_time_s";

const RATE_SATURATION: f64 = 0.9;
const WORKER_GAIN: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Rate,
    Workers,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Rate => "rate",
            SweepAxis::Workers => "workers",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub metrics: LoadMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationReport {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub saturation_point: f64,
    /// False when no point met the saturation rule and the last point was
    /// reported instead.
    pub saturated: bool,
}

impl SaturationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let m = &p.metrics;
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{:.3},{:.3},{:.3}",
                format_axis(p.axis_value),
                m.offered_rate,
                m.achieved_throughput,
                m.avg_latency_ms,
                m.latency_p95_ms,
                m.process_time_s
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let value = format_axis(self.saturation_point);
        let unit = match self.axis {
            SweepAxis::Rate => "tps",
            SweepAxis::Workers => "workers",
        };
        if self.points.is_empty() {
            format!("{} sweep: no points", self.axis.as_str())
        } else if self.saturated {
            format!("{} sweep: saturation at {value} {unit}", self.axis.as_str())
        } else {
            format!("{} sweep: unsaturated up to {value} {unit}", self.axis.as_str())
        }
    }
}

fn format_axis(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn ascending<T: PartialOrd>(values: &[T]) -> bool {
    values.windows(2).all(|w| w[0] < w[1])
}

/// Open-loop run per rate. Saturation is the smallest rate whose achieved
/// throughput falls below 90% of offered; otherwise the largest rate,
/// flagged unsaturated.
pub async fn sweep_rates(
    rates: &[f64],
    base: &LoadSpec,
    target: &dyn LoadTarget,
) -> Result<SaturationReport, BenchError> {
    if rates.len() < 4 {
        return Err(BenchError::InvalidSpec(format!(
            "rate sweep needs at least 4 points, got {}",
            rates.len()
        )));
    }
    if !ascending(rates) {
        return Err(BenchError::InvalidSpec("rates must be strictly ascending".into()));
    }
    let mut points = Vec::with_capacity(rates.len());
    for &rate in rates {
        let spec = LoadSpec {
            send_rate: rate,
            mode: LoadMode::OpenLoop,
            ..base.clone()
        };
        let metrics = run_load(&spec, target).await?;
        points.push(SweepPoint {
            axis_value: rate,
            metrics,
        });
    }
    let hit = points
        .iter()
        .find(|p| p.metrics.achieved_throughput < RATE_SATURATION * p.metrics.offered_rate)
        .map(|p| p.axis_value);
    Ok(SaturationReport {
        axis: SweepAxis::Rate,
        saturation_point: hit.unwrap_or(*rates.last().unwrap()),
        saturated: hit.is_some(),
        points,
    })
}

/// Closed-loop runs paced at `base.sendRate`, one per worker count.
/// Saturation is the smallest count after which throughput improves by less
/// than 5%; otherwise the largest count.
pub async fn sweep_workers(
    counts: &[usize],
    base: &LoadSpec,
    target: &dyn LoadTarget,
) -> Result<SaturationReport, BenchError> {
    if counts.is_empty() || counts[0] == 0 {
        return Err(BenchError::InvalidSpec(
            "worker sweep needs positive worker counts".into(),
        ));
    }
    if !ascending(counts) {
        return Err(BenchError::InvalidSpec(
            "worker counts must be strictly ascending".into(),
        ));
    }
    let mut points = Vec::with_capacity(counts.len());
    for &workers in counts {
        let spec = LoadSpec {
            workers,
            mode: LoadMode::PacedClosedLoop,
            ..base.clone()
        };
        let metrics = run_load(&spec, target).await?;
        points.push(SweepPoint {
            axis_value: workers as f64,
            metrics,
        });
    }
    let hit = points
        .windows(2)
        .find(|w| w[1].metrics.achieved_throughput < WORKER_GAIN * w[0].metrics.achieved_throughput)
        .map(|w| w[0].axis_value);
    Ok(SaturationReport {
        axis: SweepAxis::Workers,
        saturation_point: hit.unwrap_or(*counts.last().unwrap() as f64),
        saturated: hit.is_some() || counts.len() == 1,
        points,
    })
}

/// Write the CSV to `out` and the one-line summary next to it
/// (`<out>.summary.txt`). Returns the summary.
pub fn report(rep: &SaturationReport, out: impl AsRef<Path>) -> Result<String, BenchError> {
    let out = out.as_ref();
    let io = |p: &Path, e: std::io::Error| BenchError::Io(format!("{}: {e}", p.display()));
    std::fs::write(out, rep.to_csv()).map_err(|e| io(out, e))?;
    let summary = rep.summary();
    let mut summary_path = PathBuf::from(out).into_os_string();
    summary_path.push(".summary.txt");
    let summary_path = PathBuf::from(summary_path);
    std::fs::write(&summary_path, format!("{summary}\n")).map_err(|e| io(&summary_path, e))?;
    Ok(summary)
}
