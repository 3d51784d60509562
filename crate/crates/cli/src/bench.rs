//! Workload benchmarking: warm-up plus measured runs per query, timeout
//! clamping, nearest-rank percentiles and result-hash equivalence.

use std::fmt;

use serde::{Deserialize, Serialize};
use slowsql::exec::{execute, Backend, ExecStatus, ExecutionOutcome, ExecutorConfig};

/// Nearest-rank percentile of an ascending slice: the `ceil(p * n)`-th value.
pub fn nearest_rank(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
}

pub fn summarize(latencies: &[f64]) -> Option<LatencySummary> {
    let mut v: Vec<f64> = latencies.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(LatencySummary {
        mean: v.iter().sum::<f64>() / v.len() as f64,
        median: nearest_rank(&v, 0.5)?,
        p75: nearest_rank(&v, 0.75)?,
        p95: nearest_rank(&v, 0.95)?,
    })
}

/// One query's measured result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub status: ExecStatus,
    /// Mean measured latency; the timeout value for timeouts, absent on error.
    pub latency_seconds: Option<f64>,
    pub result_hash: Option<String>,
    pub error: Option<String>,
}

impl Measurement {
    fn from_outcome(o: &ExecutionOutcome, clamp: f64) -> Self {
        let latency_seconds = match o.status {
            ExecStatus::Ok => Some(o.latency_seconds.min(clamp)),
            ExecStatus::Timeout => Some(clamp),
            ExecStatus::Error => None,
        };
        Measurement {
            status: o.status,
            latency_seconds,
            result_hash: o.result_hash.map(|h| format!("{h:016x}")),
            error: o.error_message.clone(),
        }
    }

    fn transport(message: String) -> Self {
        Measurement { status: ExecStatus::Error, latency_seconds: None, result_hash: None, error: Some(message) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub index: usize,
    pub sql: String,
    pub original: Measurement,
    pub rewrite_sql: Option<String>,
    pub rewrite: Option<Measurement>,
    /// Whether the rewrite reproduced the original's result multiset.
    pub equivalent: Option<bool>,
}

impl BenchEntry {
    /// The measurement that enters the aggregates: the rewrite when present.
    pub fn measured(&self) -> &Measurement {
        self.rewrite.as_ref().unwrap_or(&self.original)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub backend_id: String,
    pub timeout_seconds: f64,
    pub entries: Vec<BenchEntry>,
    pub latency: Option<LatencySummary>,
    /// Aggregates of the originals when rewrites were benchmarked.
    pub baseline_latency: Option<LatencySummary>,
    pub equivalence_rate: Option<f64>,
    pub timeout_count: usize,
    pub error_count: usize,
}

/// Share of `Some(true)` among the non-`None` flags.
pub fn equivalence_rate(flags: impl IntoIterator<Item = Option<bool>>) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for f in flags.into_iter().flatten() {
        total += 1;
        hit += usize::from(f);
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

fn measure(sql: &str, backend: &dyn Backend, cfg: &ExecutorConfig) -> Measurement {
    match execute(sql, backend, cfg) {
        Ok(o) => Measurement::from_outcome(&o, cfg.timeout_seconds),
        Err(e) => {
            log::warn!("{e}");
            Measurement::transport(e.to_string())
        }
    }
}

/// Benchmarks each original (and its rewrite, when given) in order.
pub fn run_bench(originals: &[String], rewrites: Option<&[String]>, backend: &dyn Backend, cfg: &ExecutorConfig) -> BenchReport {
    let entries: Vec<BenchEntry> = originals
        .iter()
        .enumerate()
        .map(|(index, sql)| {
            let original = measure(sql, backend, cfg);
            let rewrite_sql = rewrites.and_then(|r| r.get(index)).cloned();
            let rewrite = rewrite_sql.as_deref().map(|r| measure(r, backend, cfg));
            let equivalent = rewrite.as_ref().map(|r| {
                original.status == ExecStatus::Ok && r.status == ExecStatus::Ok && r.result_hash == original.result_hash
            });
            BenchEntry { index, sql: sql.clone(), original, rewrite_sql, rewrite, equivalent }
        })
        .collect();
    report_from(backend.id(), cfg.timeout_seconds, entries)
}

/// Aggregates already measured entries.
pub fn report_from(backend_id: String, timeout_seconds: f64, entries: Vec<BenchEntry>) -> BenchReport {
    let measured: Vec<f64> = entries.iter().filter_map(|e| e.measured().latency_seconds).collect();
    let has_rewrites = entries.iter().any(|e| e.rewrite.is_some());
    let baseline: Vec<f64> = entries.iter().filter_map(|e| e.original.latency_seconds).collect();
    BenchReport {
        backend_id,
        timeout_seconds,
        latency: summarize(&measured),
        baseline_latency: if has_rewrites { summarize(&baseline) } else { None },
        equivalence_rate: equivalence_rate(entries.iter().map(|e| e.equivalent)),
        timeout_count: entries.iter().filter(|e| e.measured().status == ExecStatus::Timeout).count(),
        error_count: entries.iter().filter(|e| e.measured().status == ExecStatus::Error).count(),
        entries,
    }
}

/// Seconds with two decimals, or four below one second.
pub fn fmt_seconds(x: f64) -> String {
    if x >= 1.0 {
        format!("{x:.2}")
    } else {
        format!("{x:.4}")
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>5}  {:>10}  {:>8}  {:>10}", "query", "latency_s", "status", "equivalent")?;
        for e in &self.entries {
            let m = e.measured();
            let lat = m.latency_seconds.map_or_else(|| "-".to_string(), fmt_seconds);
            let eq = e.equivalent.map_or("-", |b| if b { "yes" } else { "no" });
            writeln!(f, "{:>5}  {:>10}  {:>8}  {:>10}", e.index + 1, lat, format!("{:?}", m.status).to_lowercase(), eq)?;
        }
        let row = |f: &mut fmt::Formatter<'_>, name: &str, s: &Option<LatencySummary>| match s {
            Some(s) => writeln!(
                f,
                "{name:<9} mean {}  median {}  p75 {}  p95 {}",
                fmt_seconds(s.mean),
                fmt_seconds(s.median),
                fmt_seconds(s.p75),
                fmt_seconds(s.p95)
            ),
            None => writeln!(f, "{name:<9} n/a"),
        };
        if self.baseline_latency.is_some() {
            row(f, "original", &self.baseline_latency)?;
            row(f, "rewrite", &self.latency)?;
        } else {
            row(f, "latency", &self.latency)?;
        }
        if let Some(r) = self.equivalence_rate {
            writeln!(f, "equivalence rate {r:.2}")?;
        }
        writeln!(f, "timeouts {}  errors {}", self.timeout_count, self.error_count)
    }
}
