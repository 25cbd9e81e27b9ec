use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::target::{LoadTarget, WorkerChannel};
use super::{BenchError, LoadMode, LoadSpec};

/// Results over the completed requests of one run.
///
/// Latency is measured from request send to response receipt on an
/// already-established connection.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadMetrics {
    pub offered_rate: f64,
    pub achieved_throughput: f64,
    pub avg_latency_ms: f64,
    pub latency_p95_ms: f64,
    pub min_latency_ms: f64,
    pub process_time_s: f64,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Default)]
struct Sink {
    latencies: Vec<Duration>,
    failed: usize,
    first_error: Option<String>,
    last_done: Option<Instant>,
}

impl Sink {
    fn record(&mut self, sent: Instant, outcome: Result<(), String>) {
        let now = Instant::now();
        match outcome {
            Ok(()) => self.latencies.push(now - sent),
            Err(e) => {
                self.failed += 1;
                self.first_error.get_or_insert(e);
            }
        }
        self.last_done = Some(self.last_done.map_or(now, |t| t.max(now)));
    }
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Issue `spec.totalTx` requests at `spec.sendRate` across `spec.workers`
/// senders. Request `i` is scheduled at `t0 + i / sendRate`; worker `w`
/// owns requests `w, w + W, w + 2W, ...`.
pub async fn run_load(spec: &LoadSpec, target: &dyn LoadTarget) -> Result<LoadMetrics, BenchError> {
    spec.validate()?;
    let mut channels = Vec::with_capacity(spec.workers);
    for _ in 0..spec.workers {
        channels.push(target.open_worker(spec.target_method).await?);
    }
    let sink = Arc::new(Mutex::new(Sink::default()));
    let interval = Duration::from_secs_f64(1.0 / spec.send_rate);
    let t0 = Instant::now() + Duration::from_millis(5);

    let mut workers = tokio::task::JoinSet::new();
    for (w, channel) in channels.into_iter().enumerate() {
        let indices: Vec<usize> = (w..spec.total_tx).step_by(spec.workers).collect();
        workers.spawn(worker(spec.mode, channel, indices, t0, interval, sink.clone()));
    }
    while let Some(joined) = workers.join_next().await {
        joined.map_err(|e| BenchError::Target(format!("worker panicked: {e}")))?;
    }

    let sink = Arc::try_unwrap(sink)
        .map_err(|_| BenchError::Target("request still in flight".into()))?
        .into_inner()
        .unwrap();
    let completed = sink.latencies.len();
    if sink.failed * 10 > spec.total_tx {
        return Err(BenchError::Aborted {
            failed: sink.failed,
            total: spec.total_tx,
            first_error: sink.first_error.unwrap_or_default(),
        });
    }
    let process_time = sink
        .last_done
        .map_or(Duration::ZERO, |end| end.saturating_duration_since(t0));
    let mut ms: Vec<f64> = sink.latencies.iter().map(|d| d.as_secs_f64() * 1e3).collect();
    ms.sort_by(f64::total_cmp);
    let avg = if ms.is_empty() {
        0.0
    } else {
        ms.iter().sum::<f64>() / ms.len() as f64
    };
    let secs = process_time.as_secs_f64();
    Ok(LoadMetrics {
        offered_rate: spec.send_rate,
        achieved_throughput: if secs > 0.0 { completed as f64 / secs } else { 0.0 },
        avg_latency_ms: avg,
        latency_p95_ms: nearest_rank(&ms, 0.95),
        min_latency_ms: ms.first().copied().unwrap_or(0.0),
        process_time_s: secs,
        completed,
        failed: sink.failed,
    })
}

async fn worker(
    mode: LoadMode,
    channel: Arc<dyn WorkerChannel>,
    indices: Vec<usize>,
    t0: Instant,
    interval: Duration,
    sink: Arc<Mutex<Sink>>,
) {
    let mut in_flight = tokio::task::JoinSet::new();
    tokio::time::sleep_until(t0.into()).await;
    for i in indices {
        if mode != LoadMode::ClosedLoop {
            let due = t0 + interval.mul_f64(i as f64);
            if due > Instant::now() {
                tokio::time::sleep_until(due.into()).await;
            }
        }
        let sent = Instant::now();
        let request = channel.request();
        match mode {
            LoadMode::OpenLoop => {
                let sink = sink.clone();
                in_flight.spawn(async move {
                    let outcome = request.await;
                    sink.lock().unwrap().record(sent, outcome);
                });
            }
            LoadMode::ClosedLoop | LoadMode::PacedClosedLoop => {
                let outcome = request.await;
                sink.lock().unwrap().record(sent, outcome);
            }
        }
    }
    while in_flight.join_next().await.is_some() {}
}
