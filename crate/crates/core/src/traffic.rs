//! VR traffic model.
//!
//! Video frames of constant size are generated every `1/fps`, split into a
//! uniformly drawn number of equal batches and handed to a paced sender that
//! releases bursts on a fixed global grid. Uplink carries a periodic
//! controller stream.

use std::collections::VecDeque;
use std::fmt;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::TrafficConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "DL")]
    Downlink,
    #[serde(rename = "UL")]
    Uplink,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Downlink => "DL",
            Direction::Uplink => "UL",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StreamLabel {
    #[serde(rename = "STUN")]
    Stun,
    #[serde(rename = "SRTP-audio")]
    SrtpAudio,
    #[serde(rename = "SRTP-video")]
    SrtpVideo,
    #[serde(rename = "SRTCP")]
    Srtcp,
    #[serde(rename = "DTLS")]
    Dtls,
    #[serde(rename = "generic-UDP")]
    GenericUdp,
}

impl StreamLabel {
    pub const ALL: [StreamLabel; 6] = [
        StreamLabel::Stun,
        StreamLabel::SrtpAudio,
        StreamLabel::SrtpVideo,
        StreamLabel::Srtcp,
        StreamLabel::Dtls,
        StreamLabel::GenericUdp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StreamLabel::Stun => "STUN",
            StreamLabel::SrtpAudio => "SRTP-audio",
            StreamLabel::SrtpVideo => "SRTP-video",
            StreamLabel::Srtcp => "SRTCP",
            StreamLabel::Dtls => "DTLS",
            StreamLabel::GenericUdp => "generic-UDP",
        }
    }
}

impl fmt::Display for StreamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VideoFrame {
    pub frame_id: u64,
    pub gen_time: Duration,
    pub size: u64,
    pub n_batches: u32,
    pub period: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Batch {
    pub parent_frame: u64,
    pub batch_index: u32,
    pub size: u64,
    /// Packet sizes in send order; all full-size except possibly the last.
    pub packets: Vec<u32>,
    /// Earliest instant the pacer may send this batch.
    pub release_time: Duration,
}

impl Batch {
    pub fn n_packets(&self) -> usize {
        self.packets.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Packet {
    pub packet_id: u64,
    pub stream: StreamLabel,
    pub direction: Direction,
    /// Parent video frame, for video packets.
    pub frame_id: Option<u64>,
    pub size: u32,
    pub gen_time: Duration,
    pub enqueue_time: Option<Duration>,
    pub delivery_time: Option<Duration>,
    pub retx_count: u32,
}

impl Packet {
    pub fn new(packet_id: u64, stream: StreamLabel, direction: Direction, size: u32, gen_time: Duration) -> Self {
        Self {
            packet_id,
            stream,
            direction,
            frame_id: None,
            size,
            gen_time,
            enqueue_time: None,
            delivery_time: None,
            retx_count: 0,
        }
    }

    pub fn is_video(&self) -> bool {
        self.stream == StreamLabel::SrtpVideo
    }
}

fn ms(v: f64) -> Duration {
    Duration::from_nanos((v * 1e6).round() as u64)
}

/// Frame period `1/fps`.
pub fn frame_period(fps: f64) -> Duration {
    Duration::from_nanos((1e9 / fps).round() as u64)
}

/// Generation instant of frame `frame_id`, computed without accumulating rounding error.
pub fn frame_time(fps: f64, frame_id: u64) -> Duration {
    Duration::from_nanos((frame_id as f64 * 1e9 / fps).round() as u64)
}

/// Frame size in bytes, `⌈BR / fps / 8⌉`.
pub fn frame_size(cfg: &TrafficConfig) -> u64 {
    (cfg.bitrate_mbps * 1e6 / cfg.fps / 8.0 - 1e-9).ceil() as u64
}

/// `⌈T / τ⌉`, the most batches a frame can span before the next one is due.
pub fn max_batches(cfg: &TrafficConfig) -> u32 {
    let ratio = 1e3 / cfg.fps / cfg.inter_batch_time_ms;
    ((ratio - 1e-9).ceil() as u32).max(1)
}

pub fn next_video_frame<R: Rng + ?Sized>(cfg: &TrafficConfig, rng: &mut R, frame_id: u64) -> Result<VideoFrame> {
    if !cfg.fps.is_finite() || cfg.fps <= 0.0 {
        return Err(Error::Trace(format!("invalid frame rate {}", cfg.fps)));
    }
    Ok(VideoFrame {
        frame_id,
        gen_time: frame_time(cfg.fps, frame_id),
        size: frame_size(cfg),
        n_batches: rng.gen_range(1..=max_batches(cfg)),
        period: frame_period(cfg.fps),
    })
}

/// Splits a frame into equal batches (remainder bytes go to the last
/// batches) and each batch into full-size packets plus one truncated tail.
pub fn packetize_frame(frame: &VideoFrame, cfg: &TrafficConfig) -> Vec<Batch> {
    let n = frame.n_batches.max(1) as u64;
    let base = frame.size / n;
    let extra = frame.size % n;
    let lp = cfg.packet_size_bytes as u64;
    let tau = ms(cfg.inter_batch_time_ms);
    (0..n)
        .map(|k| {
            let size = base + u64::from(k >= n - extra);
            let full = size / lp;
            let mut packets = vec![lp as u32; full as usize];
            if !size.is_multiple_of(lp) {
                packets.push((size % lp) as u32);
            }
            Batch {
                parent_frame: frame.frame_id,
                batch_index: k as u32,
                size,
                packets,
                release_time: frame.gen_time + tau * k as u32,
            }
        })
        .collect()
}

/// Paced sender: bursts pending batches at fixed grid instants `k·τ`.
#[derive(Clone, Debug)]
pub struct Pacer {
    interval_ns: f64,
    gap: Duration,
    pending: VecDeque<Batch>,
    last_emit: Option<Duration>,
    next_id: u64,
}

impl Pacer {
    pub fn new(cfg: &TrafficConfig) -> Self {
        Self {
            interval_ns: cfg.inter_batch_time_ms * 1e6,
            gap: Duration::from_nanos((cfg.intra_batch_gap_us * 1e3).round() as u64),
            pending: VecDeque::new(),
            last_emit: None,
            next_id: 0,
        }
    }

    /// Continue packet numbering from `id`.
    pub fn with_first_id(mut self, id: u64) -> Self {
        self.next_id = id;
        self
    }

    pub fn push(&mut self, batch: Batch) {
        self.pending.push_back(batch);
    }

    pub fn push_all(&mut self, batches: impl IntoIterator<Item = Batch>) {
        self.pending.extend(batches);
    }

    pub fn pending_batches(&self) -> usize {
        self.pending.len()
    }

    pub fn grid_instant(&self, k: u64) -> Duration {
        Duration::from_nanos((k as f64 * self.interval_ns).round() as u64)
    }

    /// Index of the first grid instant at or after `t`.
    pub fn grid_index_at_or_after(&self, t: Duration) -> u64 {
        let mut k = (t.as_nanos() as f64 / self.interval_ns).floor() as u64;
        while self.grid_instant(k) < t {
            k += 1;
        }
        k
    }

    /// Next grid instant at which some pending batch becomes eligible.
    pub fn next_tick(&self) -> Option<Duration> {
        let earliest = self.pending.iter().map(|b| b.release_time).min()?;
        Some(self.grid_instant(self.grid_index_at_or_after(earliest)))
    }

    /// Emits every packet of every batch released by `now`, in generation
    /// order, spaced by the intra-batch gap. Returns nothing when idle.
    pub fn release(&mut self, now: Duration) -> Vec<Packet> {
        let mut out = Vec::new();
        let mut t = match self.last_emit {
            Some(last) => (last + self.gap).max(now),
            None => now,
        };
        let mut keep = VecDeque::with_capacity(self.pending.len());
        while let Some(batch) = self.pending.pop_front() {
            if batch.release_time > now {
                keep.push_back(batch);
                continue;
            }
            for &size in &batch.packets {
                let mut p = Packet::new(self.next_id, StreamLabel::SrtpVideo, Direction::Downlink, size, t);
                p.frame_id = Some(batch.parent_frame);
                self.next_id += 1;
                self.last_emit = Some(t);
                out.push(p);
                t += self.gap;
            }
        }
        self.pending = keep;
        out
    }
}

/// Downlink video generator: frames, batching and pacing.
#[derive(Clone, Debug)]
pub struct VideoSource {
    cfg: TrafficConfig,
    pacer: Pacer,
    next_frame: u64,
}

impl VideoSource {
    pub fn new(cfg: &TrafficConfig) -> Self {
        Self { cfg: cfg.clone(), pacer: Pacer::new(cfg), next_frame: 0 }
    }

    pub fn next_frame_time(&self) -> Duration {
        frame_time(self.cfg.fps, self.next_frame)
    }

    /// Generates the next frame and queues its batches at the pacer.
    /// Returns the frame and its packet count.
    pub fn generate_frame<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(VideoFrame, usize)> {
        let frame = next_video_frame(&self.cfg, rng, self.next_frame)?;
        self.next_frame += 1;
        let batches = packetize_frame(&frame, &self.cfg);
        let packets = batches.iter().map(Batch::n_packets).sum();
        self.pacer.push_all(batches);
        Ok((frame, packets))
    }

    pub fn pacer(&self) -> &Pacer {
        &self.pacer
    }

    pub fn pacer_mut(&mut self) -> &mut Pacer {
        &mut self.pacer
    }
}

/// Everything the video source emits in `[0, duration)`: the frames, the
/// packets and, per grid instant visited, how many packets left.
#[derive(Clone, Debug, Default)]
pub struct VideoTrace {
    pub frames: Vec<VideoFrame>,
    pub packets: Vec<Packet>,
    pub ticks: Vec<(Duration, usize)>,
}

impl VideoTrace {
    /// Share of pacer grid instants that carried no packets.
    pub fn idle_fraction(&self) -> f64 {
        if self.ticks.is_empty() {
            return 0.0;
        }
        self.ticks.iter().filter(|(_, n)| *n == 0).count() as f64 / self.ticks.len() as f64
    }
}

/// Runs the video source on its own over `[0, duration)`. Every grid instant
/// between the first frame and the last emission is visited, so idle
/// instants are recorded too.
pub fn generate_video<R: Rng + ?Sized>(cfg: &TrafficConfig, duration: Duration, rng: &mut R) -> Result<VideoTrace> {
    let mut src = VideoSource::new(cfg);
    let mut out = VideoTrace::default();
    let mut k = 0u64;
    loop {
        let tick = src.pacer().grid_instant(k);
        if tick >= duration {
            break;
        }
        while src.next_frame_time() <= tick {
            out.frames.push(src.generate_frame(rng)?.0);
        }
        let pkts = src.pacer_mut().release(tick);
        out.ticks.push((tick, pkts.len()));
        out.packets.extend(pkts.into_iter().filter(|p| p.gen_time < duration));
        k += 1;
    }
    Ok(out)
}

/// Periodic uplink controller packets: `⌊duration / period⌋` packets of fixed size.
pub fn ul_controller_stream(cfg: &TrafficConfig, duration: Duration) -> Vec<Packet> {
    periodic(
        StreamLabel::Dtls,
        Direction::Uplink,
        cfg.ul_packet_size_bytes,
        ms(cfg.ul_period_ms),
        Duration::ZERO,
        duration,
    )
}

fn periodic(
    stream: StreamLabel,
    direction: Direction,
    size: u32,
    period: Duration,
    offset: Duration,
    duration: Duration,
) -> Vec<Packet> {
    if period.is_zero() || offset >= duration {
        return Vec::new();
    }
    let count = ((duration - offset).as_nanos() / period.as_nanos()) as u64;
    (0..count).map(|k| Packet::new(0, stream, direction, size, offset + period * k as u32)).collect()
}

/// Side streams with negligible load: (stream, direction, bytes, period ms).
pub const AUX_STREAMS: [(StreamLabel, Direction, u32, f64); 7] = [
    (StreamLabel::Stun, Direction::Downlink, 122, 1287.42),
    (StreamLabel::SrtpAudio, Direction::Downlink, 83, 20.0),
    (StreamLabel::Dtls, Direction::Downlink, 107, 8.33),
    (StreamLabel::GenericUdp, Direction::Downlink, 112, 8.26),
    (StreamLabel::Stun, Direction::Uplink, 124, 1287.48),
    (StreamLabel::Srtcp, Direction::Uplink, 435, 62.5),
    (StreamLabel::GenericUdp, Direction::Uplink, 148, 443.75),
];

/// Uplink controller packets plus, when enabled, the auxiliary streams,
/// sorted by generation time. Packet ids are left at zero.
pub fn background_streams(cfg: &TrafficConfig, duration: Duration) -> Vec<Packet> {
    let mut out = if cfg.ul_enabled { ul_controller_stream(cfg, duration) } else { Vec::new() };
    if cfg.aux_streams {
        for (i, &(label, dir, size, period)) in AUX_STREAMS.iter().enumerate() {
            // Stagger start times so the side streams do not line up.
            let offset = Duration::from_micros(137 * (i as u64 + 1));
            out.extend(periodic(label, dir, size, ms(period), offset, duration));
        }
    }
    out.sort_by_key(|p| p.gen_time);
    out
}
