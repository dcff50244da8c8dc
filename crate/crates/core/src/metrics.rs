//! Latency and throughput instrumentation.
//!
//! Latencies go into a fixed histogram of 1 ms buckets covering 0..1 s plus
//! one overflow bucket, so percentiles are reproducible and allocation-free
//! after construction.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub const BUCKET_NS: u64 = 1_000_000;
pub const BUCKETS: usize = 1000;
/// Trailing window for the achieved frame rate.
pub const FPS_WINDOW_NS: u64 = 3_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    Empty,
    Quantile,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::Empty => f.write_str("histogram is empty"),
            MetricsError::Quantile => f.write_str("quantile must lie in (0, 1)"),
        }
    }
}

impl core::error::Error for MetricsError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyHistogram {
    counts: Vec<u64>,
    total: u64,
    max_ns: u64,
}

impl Default for LatencyHistogram {
    fn default() -> Self {
        Self::new()
    }
}

impl LatencyHistogram {
    pub fn new() -> Self {
        Self { counts: vec![0; BUCKETS + 1], total: 0, max_ns: 0 }
    }

    pub fn record(&mut self, ns: u64) {
        let b = ((ns / BUCKET_NS) as usize).min(BUCKETS);
        self.counts[b] += 1;
        self.total += 1;
        self.max_ns = self.max_ns.max(ns);
    }

    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Smallest bucket upper bound whose cumulative count reaches `q * total`.
    /// Samples beyond 1 s report the largest observed value.
    pub fn percentile(&self, q: f64) -> Result<u64, MetricsError> {
        if self.total == 0 {
            return Err(MetricsError::Empty);
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(MetricsError::Quantile);
        }
        let target = q * self.total as f64;
        let mut cum = 0u64;
        for (i, &c) in self.counts.iter().enumerate() {
            cum += c;
            if c > 0 && cum as f64 >= target {
                return Ok(if i == BUCKETS { self.max_ns } else { (i as u64 + 1) * BUCKET_NS });
            }
        }
        Ok(self.max_ns)
    }
}

/// Timing of one frame through the pipeline, nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LatencyRecord {
    pub frame_id: u64,
    pub capture_ns: u64,
    pub condition_ns: u64,
    /// `None` for dropped frames.
    pub stylize_rtt_ns: Option<u64>,
    pub handoff_ns: u64,
    pub end_to_end_ns: u64,
    pub dropped: bool,
}

impl LatencyRecord {
    pub fn is_consistent(&self) -> bool {
        let stages = [self.capture_ns, self.condition_ns, self.stylize_rtt_ns.unwrap_or(0), self.handoff_ns];
        let max = stages.into_iter().max().unwrap_or(0);
        self.end_to_end_ns >= max && !(self.dropped && self.stylize_rtt_ns.is_some())
    }
}

/// Immutable metrics view. Rates are fixed-point so the wire form is exact:
/// `achieved_mfps` is frames per 1000 s, `drop_rate_ppm` parts per million.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricsSnapshot {
    pub window_ns: u64,
    pub achieved_mfps: u64,
    pub drop_rate_ppm: u32,
    pub p50_ns: u64,
    pub p95_ns: u64,
    pub p99_ns: u64,
    pub frames_in: u64,
    pub frames_out: u64,
    pub frames_dropped: u64,
}

impl MetricsSnapshot {
    pub fn fps(&self) -> f64 {
        self.achieved_mfps as f64 / 1000.0
    }

    pub fn drop_rate(&self) -> f64 {
        self.drop_rate_ppm as f64 / 1e6
    }
}

/// Accumulates pipeline events; owned by the publishing stage.
#[derive(Debug, Clone, Default)]
pub struct MetricsAggregator {
    hist: LatencyHistogram,
    emits: VecDeque<u64>,
    first_ns: Option<u64>,
    frames_in: u64,
    frames_out: u64,
    frames_dropped: u64,
}

impl MetricsAggregator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn note_start(&mut self, now_ns: u64) {
        self.first_ns.get_or_insert(now_ns);
    }

    pub fn set_frames_in(&mut self, n: u64) {
        self.frames_in = n;
    }

    pub fn add_dropped(&mut self, n: u64) {
        self.frames_dropped += n;
    }

    pub fn record(&mut self, rec: &LatencyRecord, now_ns: u64) {
        self.note_start(now_ns);
        if rec.dropped {
            self.frames_dropped += 1;
            return;
        }
        self.hist.record(rec.end_to_end_ns);
        self.frames_out += 1;
        self.emits.push_back(now_ns);
        self.trim(now_ns);
    }

    fn trim(&mut self, now_ns: u64) {
        while self.emits.front().is_some_and(|&t| now_ns.saturating_sub(t) > FPS_WINDOW_NS) {
            self.emits.pop_front();
        }
    }

    pub fn histogram(&self) -> &LatencyHistogram {
        &self.hist
    }

    pub fn snapshot(&mut self, now_ns: u64) -> MetricsSnapshot {
        self.trim(now_ns);
        let age = self.first_ns.map_or(0, |t| now_ns.saturating_sub(t));
        let window_ns = age.min(FPS_WINDOW_NS);
        let achieved_mfps = if window_ns == 0 {
            0
        } else {
            (self.emits.len() as u128 * 1_000_000_000_000u128 / window_ns as u128) as u64
        };
        let drop_rate_ppm = if self.frames_in == 0 {
            0
        } else {
            ((self.frames_dropped.min(self.frames_in) as u128 * 1_000_000) / self.frames_in as u128) as u32
        };
        let pct = |q| self.hist.percentile(q).unwrap_or(0);
        MetricsSnapshot {
            window_ns,
            achieved_mfps,
            drop_rate_ppm,
            p50_ns: pct(0.5),
            p95_ns: pct(0.95),
            p99_ns: pct(0.99),
            frames_in: self.frames_in,
            frames_out: self.frames_out,
            frames_dropped: self.frames_dropped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MS: u64 = 1_000_000;

    #[test]
    fn single_sample() {
        let mut h = LatencyHistogram::new();
        h.record(5 * MS);
        assert_eq!(h.percentile(0.5).unwrap(), 6 * MS);
        assert_eq!(h.percentile(0.99).unwrap(), 6 * MS);
    }

    #[test]
    fn uniform_samples() {
        let mut h = LatencyHistogram::new();
        for ms in 1..=100 {
            h.record(ms * MS);
        }
        // direct count: the 50th sample (50 ms) sits in bucket [50, 51)
        assert!((h.percentile(0.5).unwrap() as i64 - 50 * MS as i64).abs() <= MS as i64);
        assert!((h.percentile(0.99).unwrap() as i64 - 99 * MS as i64).abs() <= MS as i64);
    }

    #[test]
    fn empty_and_bad_quantile() {
        let mut h = LatencyHistogram::new();
        assert_eq!(h.percentile(0.5), Err(MetricsError::Empty));
        h.record(1);
        assert_eq!(h.percentile(1.0), Err(MetricsError::Quantile));
    }

    #[test]
    fn overflow_reports_max() {
        let mut h = LatencyHistogram::new();
        h.record(3_000 * MS);
        assert_eq!(h.percentile(0.5).unwrap(), 3_000 * MS);
    }

    #[test]
    fn aggregator_fps_and_drops() {
        let mut a = MetricsAggregator::new();
        a.note_start(0);
        for i in 0..30u64 {
            let rec = LatencyRecord { frame_id: i, end_to_end_ns: 40 * MS, stylize_rtt_ns: Some(MS), ..Default::default() };
            a.record(&rec, (i + 1) * 100 * MS);
        }
        a.set_frames_in(40);
        a.add_dropped(10);
        let s = a.snapshot(3_000 * MS);
        assert_eq!(s.fps(), 10.0);
        assert_eq!(s.drop_rate_ppm, 250_000);
        assert_eq!(s.p50_ns, 41 * MS);
    }

    #[test]
    fn record_consistency() {
        let ok = LatencyRecord { capture_ns: 3, condition_ns: 5, stylize_rtt_ns: Some(50), handoff_ns: 1, end_to_end_ns: 60, ..Default::default() };
        assert!(ok.is_consistent());
        assert!(!LatencyRecord { end_to_end_ns: 10, ..ok }.is_consistent());
        assert!(!LatencyRecord { dropped: true, ..ok }.is_consistent());
    }

    proptest! {
        #[test]
        fn percentiles_are_ordered(samples in proptest::collection::vec(0u64..2_000_000_000, 1..300)) {
            let mut h = LatencyHistogram::new();
            for s in &samples { h.record(*s); }
            let (a, b, c) = (h.percentile(0.5).unwrap(), h.percentile(0.95).unwrap(), h.percentile(0.99).unwrap());
            prop_assert!(a <= b && b <= c);
        }
    }
}
