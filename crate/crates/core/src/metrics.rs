//! Per-run statistics: packet and frame delays, A-MPDU sizes, channel
//! airtime and AP buffer occupancy.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac::Ampdu;
use crate::traffic::{Packet, VideoFrame};

/// Packet accounting over a whole run, warm-up included.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketCounts {
    pub generated: u64,
    pub delivered: u64,
    pub dropped_buffer: u64,
    pub dropped_retx: u64,
    /// Still buffered or in flight when the run ended.
    pub residual: u64,
}

impl PacketCounts {
    pub fn is_conserved(&self) -> bool {
        self.generated == self.delivered + self.dropped_buffer + self.dropped_retx + self.residual
    }
}

/// Step series of AP buffer occupancy over the measurement window.
#[derive(Clone, Debug, Default)]
pub struct BufferSeries {
    pub capacity: usize,
    /// `(time, occupancy)` at every change, starting at the window start.
    pub steps: Vec<(Duration, u32)>,
    pub end: Duration,
}

impl BufferSeries {
    pub fn new(capacity: usize, start: Duration, initial: u32) -> Self {
        Self { capacity, steps: vec![(start, initial)], end: start }
    }

    pub fn constant(capacity: usize, level: u32, start: Duration, end: Duration) -> Self {
        Self { capacity, steps: vec![(start, level)], end }
    }

    pub fn record(&mut self, t: Duration, level: u32) {
        match self.steps.last_mut() {
            Some(last) if last.1 == level => {}
            Some(last) if last.0 == t => last.1 = level,
            _ => self.steps.push((t, level)),
        }
    }

    pub fn close(&mut self, end: Duration) {
        self.end = end;
    }

    fn span(&self) -> Duration {
        self.steps.first().map_or(Duration::ZERO, |s| self.end.saturating_sub(s.0))
    }

    fn segments(&self) -> impl Iterator<Item = (Duration, u32)> + '_ {
        self.steps.iter().enumerate().map(move |(i, &(t, level))| {
            let next = self.steps.get(i + 1).map_or(self.end, |s| s.0);
            (next.saturating_sub(t), level)
        })
    }

    /// Time-weighted mean number of buffered packets.
    pub fn mean_level(&self) -> f64 {
        let span = self.span().as_secs_f64();
        if span == 0.0 {
            return self.steps.first().map_or(0.0, |s| s.1 as f64);
        }
        self.segments().map(|(d, l)| d.as_secs_f64() * l as f64).sum::<f64>() / span
    }

    /// Share of the window during which the buffer held at least one packet.
    pub fn nonempty_fraction(&self) -> f64 {
        let span = self.span().as_secs_f64();
        if span == 0.0 {
            return 0.0;
        }
        self.segments().filter(|&(_, l)| l > 0).map(|(d, _)| d.as_secs_f64()).sum::<f64>() / span
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunMetrics {
    /// Downlink video packets: delivery minus enqueue.
    pub dl_packet_delays: Vec<Duration>,
    /// Complete frames: last delivery minus first generation.
    pub vf_delays: Vec<Duration>,
    pub ul_packet_delays: Vec<Duration>,
    /// AP A-MPDU sizes, one sample per transmission attempt.
    pub ampdu_sizes: Vec<u32>,
    /// Channel busy time inside the measurement window.
    pub airtime_busy: Duration,
    /// Length of the measurement window.
    pub window: Duration,
    pub buffer: BufferSeries,
    pub counts: PacketCounts,
    pub retransmissions: u64,
    pub collisions: u64,
    /// Measured frames that lost a packet or were unfinished at the end.
    pub incomplete_frames: u64,
}

impl RunMetrics {
    /// Appends one delay sample for a delivered downlink video packet and
    /// returns it. Other packets are ignored.
    pub fn record_delivery(&mut self, pkt: &Packet) -> Option<Duration> {
        let delay = pkt.delivery_time?.checked_sub(pkt.enqueue_time?)?;
        if pkt.is_video() {
            self.dl_packet_delays.push(delay);
        } else {
            self.ul_packet_delays.push(delay);
        }
        Some(delay)
    }

    /// One sample per A-MPDU, however many of its MPDUs get through.
    pub fn record_ampdu(&mut self, ampdu: &Ampdu) {
        self.ampdu_sizes.push(ampdu.len() as u32);
    }
}

/// Time from the first packet leaving the server to the last one being
/// delivered. `None` when any packet is undelivered.
pub fn vf_delay(frame: &VideoFrame, packets: &[Packet]) -> Option<Duration> {
    let mut first: Option<Duration> = None;
    let mut last: Option<Duration> = None;
    for p in packets.iter().filter(|p| p.frame_id == Some(frame.frame_id)) {
        let d = p.delivery_time?;
        first = Some(first.map_or(p.gen_time, |f| f.min(p.gen_time)));
        last = Some(last.map_or(d, |l| l.max(d)));
    }
    Some(last?.saturating_sub(first?))
}

/// Busy share of the channel over `duration`.
pub fn airtime_fraction(metrics: &RunMetrics, duration: Duration) -> f64 {
    if duration.is_zero() {
        return 0.0;
    }
    (metrics.airtime_busy.as_secs_f64() / duration.as_secs_f64()).clamp(0.0, 1.0)
}

/// Time-weighted mean AP queue length over the buffer capacity.
pub fn buffer_occupancy(metrics: &RunMetrics) -> f64 {
    if metrics.buffer.capacity == 0 {
        return 0.0;
    }
    metrics.buffer.mean_level() / metrics.buffer.capacity as f64
}

/// Share of time the AP buffer is non-empty.
pub fn buffer_busy_fraction(metrics: &RunMetrics) -> f64 {
    metrics.buffer.nonempty_fraction()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p99: f64,
    pub p9999: f64,
    pub min: f64,
    pub max: f64,
}

/// Nearest-rank percentile of sorted samples: element `⌈q·n⌉`.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn summarize(samples: &[f64]) -> Result<Summary> {
    if samples.is_empty() {
        return Err(Error::Empty("cannot summarize an empty sample set"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    Ok(Summary {
        count: s.len(),
        // Rounding can push the mean a hair outside [min, max] for equal samples.
        mean: mean.clamp(s[0], s[s.len() - 1]),
        p50: nearest_rank(&s, 0.50),
        p99: nearest_rank(&s, 0.99),
        p9999: nearest_rank(&s, 0.9999),
        min: s[0],
        max: s[s.len() - 1],
    })
}

pub fn to_ms(d: &[Duration]) -> Vec<f64> {
    d.iter().map(|d| d.as_secs_f64() * 1e3).collect()
}

/// Summary of durations, in milliseconds.
pub fn summarize_ms(d: &[Duration]) -> Result<Summary> {
    summarize(&to_ms(d))
}

/// Empirical CDF as `(value, F(value))` at each sorted sample.
pub fn ecdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
}

pub fn mean(samples: &[f64]) -> Option<f64> {
    (!samples.is_empty()).then(|| samples.iter().sum::<f64>() / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{Direction, StreamLabel};

    fn us(v: u64) -> Duration {
        Duration::from_micros(v)
    }

    #[test]
    fn delivery_delay() {
        let mut m = RunMetrics::default();
        let mut p = Packet::new(0, StreamLabel::SrtpVideo, Direction::Downlink, 1243, us(0));
        p.enqueue_time = Some(us(10));
        p.delivery_time = Some(us(1210));
        assert_eq!(m.record_delivery(&p), Some(us(1200)));
        assert_eq!(m.dl_packet_delays, vec![us(1200)]);
    }

    #[test]
    fn one_sample_per_ampdu() {
        let mut m = RunMetrics::default();
        let a = Ampdu { mpdus: (0..14).collect(), total_bytes: 14 * 1243, tx_start: us(0), tx_end: us(1) };
        m.record_ampdu(&a);
        assert_eq!(m.ampdu_sizes, vec![14]);
    }

    #[test]
    fn vf_delay_single_packet() {
        let f = VideoFrame { frame_id: 2, gen_time: us(0), size: 1243, n_batches: 1, period: us(11_111) };
        let mut p = Packet::new(0, StreamLabel::SrtpVideo, Direction::Downlink, 1243, us(100));
        p.frame_id = Some(2);
        assert_eq!(vf_delay(&f, std::slice::from_ref(&p)), None);
        p.delivery_time = Some(us(500));
        assert_eq!(vf_delay(&f, &[p]), Some(us(400)));
    }

    #[test]
    fn summary_mean() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.p50, 2.0);
        assert_eq!(s.p99, 4.0);
        assert_eq!((s.min, s.max), (1.0, 4.0));
    }

    #[test]
    fn summary_constant() {
        let s = summarize(&[0.7; 33]).unwrap();
        assert_eq!(s.p50, 0.7);
        assert_eq!(s.p9999, 0.7);
        assert_eq!(s.mean, 0.7);
    }

    #[test]
    fn summary_empty() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn nearest_rank_picks_sample() {
        let v: Vec<f64> = (1..=10_000).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.9999), 9_999.0);
        assert_eq!(nearest_rank(&v, 0.99), 9_900.0);
    }

    #[test]
    fn airtime() {
        let m = RunMetrics { airtime_busy: Duration::from_millis(3_500), ..Default::default() };
        assert!((airtime_fraction(&m, Duration::from_secs(10)) - 0.35).abs() < 1e-12);
        assert_eq!(airtime_fraction(&RunMetrics::default(), Duration::from_secs(10)), 0.0);
    }

    #[test]
    fn occupancy_constant_and_empty() {
        let m = RunMetrics { buffer: BufferSeries::constant(1000, 260, us(0), us(1_000_000)), ..Default::default() };
        assert!((buffer_occupancy(&m) - 0.26).abs() < 1e-12);
        assert_eq!(buffer_busy_fraction(&m), 1.0);
        let m = RunMetrics { buffer: BufferSeries::constant(1000, 0, us(0), us(1_000_000)), ..Default::default() };
        assert_eq!(buffer_occupancy(&m), 0.0);
        assert_eq!(buffer_busy_fraction(&m), 0.0);
    }

    #[test]
    fn occupancy_time_weighted() {
        let mut b = BufferSeries::new(10, us(0), 0);
        b.record(us(100), 4);
        b.record(us(300), 0);
        b.close(us(1000));
        // 4 packets for 200 of 1000 µs
        assert!((b.mean_level() - 0.8).abs() < 1e-12);
        assert!((b.nonempty_fraction() - 0.2).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ecdf_shape(v in prop::collection::vec(-1e6f64..1e6, 1..300)) {
                let e = ecdf(&v);
                prop_assert_eq!(e.len(), v.len());
                prop_assert!((e[0].1 - 1.0 / v.len() as f64).abs() < 1e-12);
                prop_assert_eq!(e.last().unwrap().1, 1.0);
                for w in e.windows(2) {
                    prop_assert!(w[1].0 >= w[0].0);
                    prop_assert!(w[1].1 > w[0].1);
                }
            }

            #[test]
            fn summary_ordering(v in prop::collection::vec(0f64..1e4, 1..500)) {
                let s = summarize(&v).unwrap();
                prop_assert!(s.min <= s.mean && s.mean <= s.max);
                prop_assert!(s.p50 <= s.p99 && s.p99 <= s.p9999 && s.p9999 <= s.max);
            }
        }
    }
}
