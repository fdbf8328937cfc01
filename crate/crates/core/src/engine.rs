//! Discrete-event core: virtual clock, event queue, channel arbitration
//! between the AP and its client, and multi-run orchestration.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::mac::{apply_per, Enqueue, MacStation, Role};
use crate::metrics::{BufferSeries, RunMetrics};
use crate::phy::{us, Phy};
use crate::traffic::{background_streams, Direction, Packet, VideoSource};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    FrameGen,
    PacerTick,
    /// A packet reaches a station's transmit buffer.
    Arrival(Box<Packet>),
    /// Next packet of the uplink and side streams.
    Background,
    /// A backoff countdown reaches zero. Stale tokens are ignored.
    BackoffExpiry(u64),
    /// BlockAck received: the exchange of `station` completes.
    BackRx(usize),
    /// End of a collided exchange (CTS or BlockAck timeout).
    CollisionEnd(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub time: Duration,
    pub ordinal: u64,
    pub kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; earliest (time, ordinal) must pop first.
        (other.time, other.ordinal).cmp(&(self.time, self.ordinal))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Future event list ordered by time, ties broken by insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    now: Duration,
    next_ordinal: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Duration {
        self.now
    }

    pub fn schedule(&mut self, time: Duration, kind: EventKind) {
        assert!(time >= self.now, "event scheduled in the past: {time:?} < {:?}", self.now);
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;
        self.heap.push(Event { time, ordinal, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        let ev = self.heap.pop()?;
        self.now = ev.time;
        Some(ev)
    }

    pub fn peek_time(&self) -> Option<Duration> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

const AP: usize = 0;
const CLIENT: usize = 1;

#[derive(Debug)]
struct Station {
    mac: MacStation,
    rts_cts: bool,
    /// Instant the backoff countdown (re)started; `None` while frozen.
    countdown: Option<Duration>,
}

#[derive(Debug, Default)]
struct FrameState {
    remaining: usize,
    failed: bool,
    first_gen: Option<Duration>,
    last_delivery: Duration,
    measured: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub config: SimConfig,
    pub seed: u64,
    #[serde(skip)]
    pub metrics: RunMetrics,
    /// Delivered packets, when capture was requested.
    #[serde(skip)]
    pub delivered: Vec<Packet>,
}

/// One simulation run. Owns every piece of mutable state it touches.
pub struct Simulation {
    cfg: SimConfig,
    seed: u64,
    phy: Phy,
    aifs: Duration,
    sifs: Duration,
    slot: Duration,
    warmup: Duration,
    end: Duration,
    traffic_rng: ChaCha8Rng,
    mac_rng: ChaCha8Rng,
    queue: EventQueue,
    video: Option<VideoSource>,
    tick_pending: Option<Duration>,
    background: Vec<Packet>,
    background_next: usize,
    stations: [Station; 2],
    busy: bool,
    idle_since: Duration,
    token: u64,
    frames: HashMap<u64, FrameState>,
    metrics: RunMetrics,
    next_packet_id: u64,
    capture: bool,
    delivered: Vec<Packet>,
    clock_regressions: u64,
}

impl Simulation {
    pub fn new(cfg: &SimConfig, seed: u64) -> Result<Self> {
        let phy = Phy::new(&cfg.phy)?;
        let mac = &cfg.mac;
        let stations = [
            Station { mac: MacStation::new(Role::Ap, mac), rts_cts: mac.rts_cts_enabled, countdown: None },
            Station { mac: MacStation::new(Role::Client, mac), rts_cts: mac.ul_rts_cts_enabled, countdown: None },
        ];
        let mut traffic_rng = ChaCha8Rng::seed_from_u64(seed);
        traffic_rng.set_stream(0);
        let mut mac_rng = ChaCha8Rng::seed_from_u64(seed);
        mac_rng.set_stream(1);
        let end = cfg.duration();
        let warmup = cfg.warmup().min(end);
        let mut metrics = RunMetrics {
            buffer: BufferSeries::new(mac.ap_buffer, warmup, 0),
            window: end - warmup,
            ..Default::default()
        };
        metrics.buffer.close(end);
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            phy,
            aifs: us(mac.aifs_us),
            sifs: us(mac.sifs_us),
            slot: us(mac.slot_us),
            warmup,
            end,
            traffic_rng,
            mac_rng,
            queue: EventQueue::new(),
            video: Some(VideoSource::new(&cfg.traffic)),
            tick_pending: None,
            background: background_streams(&cfg.traffic, end),
            background_next: 0,
            stations,
            busy: false,
            idle_since: Duration::ZERO,
            token: 0,
            frames: HashMap::new(),
            metrics,
            next_packet_id: 0,
            capture: false,
            delivered: Vec::new(),
            clock_regressions: 0,
        })
    }

    /// Turns the video source off; only background and injected packets flow.
    pub fn without_video(mut self) -> Self {
        self.video = None;
        self
    }

    pub fn without_background(mut self) -> Self {
        self.background.clear();
        self
    }

    /// Keep every delivered packet in the result.
    pub fn capture_packets(mut self) -> Self {
        self.capture = true;
        self
    }

    /// Schedules an extra packet at its `gen_time`, routed by direction.
    pub fn inject(&mut self, pkt: Packet) {
        self.queue.schedule(pkt.gen_time, EventKind::Arrival(Box::new(pkt)));
    }

    pub fn run(mut self) -> RunResult {
        if self.video.is_some() {
            self.queue.schedule(Duration::ZERO, EventKind::FrameGen);
        }
        if let Some(p) = self.background.first() {
            self.queue.schedule(p.gen_time, EventKind::Background);
        }
        let mut last = Duration::ZERO;
        while let Some(t) = self.queue.peek_time() {
            if t >= self.end {
                break;
            }
            let ev = self.queue.pop().expect("peeked");
            if ev.time < last {
                self.clock_regressions += 1;
            }
            last = ev.time;
            self.dispatch(ev);
        }
        self.finish()
    }

    fn dispatch(&mut self, ev: Event) {
        let now = ev.time;
        match ev.kind {
            EventKind::FrameGen => self.on_frame(now),
            EventKind::PacerTick => self.on_tick(now),
            EventKind::Arrival(p) => self.on_arrival(*p, now),
            EventKind::Background => self.on_background(now),
            EventKind::BackoffExpiry(token) if token == self.token => self.on_access(now),
            EventKind::BackoffExpiry(_) => {}
            EventKind::BackRx(s) => self.on_back(s, now),
            EventKind::CollisionEnd(who) => self.on_collision_end(&who, now),
        }
    }

    fn on_frame(&mut self, now: Duration) {
        let Some(video) = self.video.as_mut() else { return };
        let (frame, packets) = video.generate_frame(&mut self.traffic_rng).expect("validated traffic config");
        self.frames.insert(
            frame.frame_id,
            FrameState { remaining: packets, measured: frame.gen_time >= self.warmup, ..Default::default() },
        );
        let next = video.next_frame_time();
        if next < self.end {
            self.queue.schedule(next, EventKind::FrameGen);
        }
        self.arm_pacer(now);
    }

    fn arm_pacer(&mut self, now: Duration) {
        let Some(video) = self.video.as_ref() else { return };
        let Some(tick) = video.pacer().next_tick() else { return };
        let tick = tick.max(now);
        if self.tick_pending.is_some_and(|p| p <= tick) {
            return;
        }
        self.tick_pending = Some(tick);
        self.queue.schedule(tick, EventKind::PacerTick);
    }

    fn on_tick(&mut self, now: Duration) {
        if self.tick_pending != Some(now) {
            return;
        }
        self.tick_pending = None;
        let Some(video) = self.video.as_mut() else { return };
        for p in video.pacer_mut().release(now) {
            let t = p.gen_time;
            self.queue.schedule(t, EventKind::Arrival(Box::new(p)));
        }
        self.arm_pacer(now);
    }

    fn on_background(&mut self, now: Duration) {
        let p = self.background[self.background_next].clone();
        self.background_next += 1;
        if let Some(next) = self.background.get(self.background_next) {
            self.queue.schedule(next.gen_time, EventKind::Background);
        }
        self.on_arrival(p, now);
    }

    fn on_arrival(&mut self, mut pkt: Packet, now: Duration) {
        let s = match pkt.direction {
            Direction::Downlink => AP,
            Direction::Uplink => CLIENT,
        };
        pkt.packet_id = self.next_packet_id;
        self.next_packet_id += 1;
        self.metrics.counts.generated += 1;
        let frame = pkt.frame_id;
        let gen = pkt.gen_time;
        if let Some(f) = frame.and_then(|id| self.frames.get_mut(&id)) {
            f.first_gen = Some(f.first_gen.map_or(gen, |g| g.min(gen)));
        }
        match self.stations[s].mac.enqueue(pkt, now) {
            Enqueue::Dropped => {
                self.metrics.counts.dropped_buffer += 1;
                if let Some(id) = frame {
                    self.fail_frame(id);
                }
                return;
            }
            Enqueue::Accepted => self.sample_buffer(now),
        }
        let st = &mut self.stations[s];
        if st.mac.backoff.is_none() && st.mac.in_flight().is_empty() {
            st.mac.draw_backoff(&mut self.mac_rng);
            st.countdown = (!self.busy).then(|| now.max(self.idle_since) + self.aifs);
            self.reschedule();
        }
    }

    fn tx_time(&self, s: usize) -> Option<Duration> {
        let st = &self.stations[s];
        Some(st.countdown? + self.slot * st.mac.backoff?)
    }

    fn reschedule(&mut self) {
        if self.busy {
            return;
        }
        let Some(t) = (0..2).filter_map(|s| self.tx_time(s)).min() else { return };
        self.token += 1;
        self.queue.schedule(t, EventKind::BackoffExpiry(self.token));
    }

    fn on_access(&mut self, now: Duration) {
        let collisions = self.cfg.mac.collisions_enabled;
        let mut winners = Vec::with_capacity(2);
        for s in 0..2 {
            let Some(t) = self.tx_time(s) else { continue };
            // A station whose countdown ends within the same slot cannot
            // sense the other transmission in time.
            let wins = if collisions { t < now + self.slot } else { t == now && winners.is_empty() };
            if wins {
                winners.push(s);
            }
        }
        debug_assert!(!winners.is_empty());
        for s in 0..2 {
            let slot = self.slot;
            let st = &mut self.stations[s];
            if winners.contains(&s) {
                st.mac.backoff = None;
            } else if let (Some(b), Some(start)) = (st.mac.backoff, st.countdown) {
                let elapsed = now.saturating_sub(start).as_nanos() / slot.as_nanos();
                st.mac.backoff = Some(b.saturating_sub(elapsed as u32));
            }
            st.countdown = None;
        }
        self.busy = true;

        if let [s] = winners[..] {
            self.start_exchange(s, now);
        } else {
            self.start_collision(&winners, now);
        }
    }

    fn protection(&self, s: usize) -> Duration {
        if self.stations[s].rts_cts {
            self.phy.rts() + self.sifs + self.phy.cts() + self.sifs
        } else {
            Duration::ZERO
        }
    }

    fn start_exchange(&mut self, s: usize, now: Duration) {
        let ampdu = self.stations[s].mac.assemble_ampdu(now).expect("backoff implies queued packets");
        let data = self.phy.data_ppdu(ampdu.total_bytes, ampdu.len());
        let end = now + self.protection(s) + data + self.sifs + self.phy.back();
        if s == AP && now >= self.warmup {
            self.metrics.record_ampdu(&ampdu);
        }
        self.add_busy(now, end);
        self.queue.schedule(end, EventKind::BackRx(s));
    }

    fn start_collision(&mut self, who: &[usize], now: Duration) {
        let mut end = now;
        for &s in who {
            let ampdu = self.stations[s].mac.assemble_ampdu(now).expect("backoff implies queued packets");
            let d = if self.stations[s].rts_cts {
                self.phy.rts() + self.sifs + self.phy.cts()
            } else {
                if s == AP && now >= self.warmup {
                    self.metrics.record_ampdu(&ampdu);
                }
                self.phy.data_ppdu(ampdu.total_bytes, ampdu.len()) + self.sifs + self.phy.back()
            };
            end = end.max(now + d);
        }
        if now >= self.warmup {
            self.metrics.collisions += 1;
        }
        self.add_busy(now, end);
        self.queue.schedule(end, EventKind::CollisionEnd(who.to_vec()));
    }

    fn add_busy(&mut self, from: Duration, to: Duration) {
        let a = from.max(self.warmup);
        let b = to.min(self.end);
        if b > a {
            self.metrics.airtime_busy += b - a;
        }
    }

    fn on_back(&mut self, s: usize, now: Duration) {
        let flags = {
            let mpdus: Vec<u64> = self.stations[s].mac.in_flight().iter().map(|p| p.packet_id).collect();
            let ampdu = crate::mac::Ampdu { mpdus, total_bytes: 0, tx_start: now, tx_end: now };
            apply_per(&ampdu, self.cfg.mac.per, &mut self.mac_rng)
        };
        self.resolve(s, &flags, now);
        self.finish_exchange(now);
    }

    fn on_collision_end(&mut self, who: &[usize], now: Duration) {
        for &s in who {
            if self.stations[s].rts_cts {
                self.stations[s].mac.abort_exchange();
            } else {
                let flags = vec![false; self.stations[s].mac.in_flight().len()];
                self.resolve(s, &flags, now);
            }
        }
        self.finish_exchange(now);
    }

    fn resolve(&mut self, s: usize, flags: &[bool], now: Duration) {
        let out = self.stations[s].mac.handle_back(flags, now);
        if now >= self.warmup {
            self.metrics.retransmissions += out.requeued as u64;
        }
        self.metrics.counts.delivered += out.delivered.len() as u64;
        self.metrics.counts.dropped_retx += out.dropped.len() as u64;
        for p in &out.dropped {
            if let Some(id) = p.frame_id {
                self.fail_frame(id);
            }
        }
        for p in out.delivered {
            if p.enqueue_time.is_some_and(|t| t >= self.warmup) {
                self.metrics.record_delivery(&p);
            }
            if let Some(id) = p.frame_id {
                self.deliver_frame_packet(id, now);
            }
            if self.capture {
                self.delivered.push(p);
            }
        }
        if s == AP {
            self.sample_buffer(now);
        }
    }

    fn deliver_frame_packet(&mut self, id: u64, now: Duration) {
        let Some(f) = self.frames.get_mut(&id) else { return };
        f.remaining = f.remaining.saturating_sub(1);
        f.last_delivery = f.last_delivery.max(now);
        if f.remaining == 0 {
            let f = self.frames.remove(&id).expect("present");
            if f.measured && !f.failed {
                let first = f.first_gen.unwrap_or(f.last_delivery);
                self.metrics.vf_delays.push(f.last_delivery - first);
            } else if f.measured {
                self.metrics.incomplete_frames += 1;
            }
        }
    }

    fn fail_frame(&mut self, id: u64) {
        if let Some(f) = self.frames.get_mut(&id) {
            f.failed = true;
            f.remaining = f.remaining.saturating_sub(1);
            if f.remaining == 0 {
                let f = self.frames.remove(&id).expect("present");
                if f.measured {
                    self.metrics.incomplete_frames += 1;
                }
            }
        }
    }

    fn finish_exchange(&mut self, now: Duration) {
        self.busy = false;
        self.idle_since = now;
        for st in &mut self.stations {
            if st.mac.backoff.is_none() && st.mac.has_pending() {
                st.mac.draw_backoff(&mut self.mac_rng);
            }
            if st.mac.backoff.is_some() {
                st.countdown = Some(now + self.aifs);
            }
        }
        self.reschedule();
    }

    fn sample_buffer(&mut self, now: Duration) {
        if now >= self.warmup {
            let level = self.stations[AP].mac.occupancy() as u32;
            self.metrics.buffer.record(now, level);
        } else {
            let level = self.stations[AP].mac.occupancy() as u32;
            self.metrics.buffer.steps[0].1 = level;
        }
    }

    fn finish(mut self) -> RunResult {
        let residual: usize = self.stations.iter().map(|s| s.mac.occupancy()).sum();
        self.metrics.counts.residual = residual as u64;
        self.metrics.incomplete_frames += self.frames.values().filter(|f| f.measured && !f.failed).count() as u64;
        self.metrics.buffer.close(self.end);
        debug_assert_eq!(self.clock_regressions, 0);
        RunResult { config: self.cfg, seed: self.seed, metrics: self.metrics, delivered: self.delivered }
    }
}

/// Runs one simulation of `cfg` with the given seed.
pub fn run_simulation(cfg: &SimConfig, seed: u64) -> Result<RunResult> {
    Ok(Simulation::new(cfg, seed)?.run())
}

/// Per-run seeds derived from the base seed and the run index.
pub fn run_seeds(base: u64, runs: u32) -> Vec<u64> {
    (0..runs as u64).map(|i| splitmix64(base ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15))).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// All `cfg.runs` runs of one configuration, in parallel.
pub fn run_all(cfg: &SimConfig) -> Result<Vec<RunResult>> {
    run_seeds(cfg.seed, cfg.runs).into_par_iter().map(|s| run_simulation(cfg, s)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Fps,
    InterBatchTime,
    Bitrate,
    McsIndex,
    Per,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Fps => "fps",
            SweepAxis::InterBatchTime => "inter_batch_time",
            SweepAxis::Bitrate => "bitrate",
            SweepAxis::McsIndex => "mcs_index",
            SweepAxis::Per => "per",
        }
    }

    /// Copy of `base` with this axis set to `value`. Bitrate is in Mbps and
    /// inter-batch time in ms.
    pub fn apply(self, base: &SimConfig, value: f64) -> SimConfig {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Fps => cfg.traffic.fps = value,
            SweepAxis::InterBatchTime => cfg.traffic.inter_batch_time_ms = value,
            SweepAxis::Bitrate => cfg.traffic.bitrate_mbps = value,
            SweepAxis::McsIndex => cfg.phy.mcs_index = value as u8,
            SweepAxis::Per => cfg.mac.per = value,
        }
        cfg
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fps" => SweepAxis::Fps,
            "inter_batch_time" | "tau" => SweepAxis::InterBatchTime,
            "bitrate" => SweepAxis::Bitrate,
            "mcs_index" | "mcs" => SweepAxis::McsIndex,
            "per" => SweepAxis::Per,
            other => return Err(Error::UnknownAxis(other.to_string())),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub result: RunResult,
}

/// Every `(value, seed)` pair of the sweep, run in parallel and returned in
/// value-major order.
pub fn run_sweep(base: &SimConfig, axis: SweepAxis, values: &[f64], seeds: &[u64]) -> Result<Vec<SweepPoint>> {
    let configs = values.iter().map(|&v| axis.apply(base, v).validate().map(|c| (v, c))).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(f64, &SimConfig, u64)> =
        configs.iter().flat_map(|(v, c)| seeds.iter().map(move |&s| (*v, c, s))).collect();
    jobs.into_par_iter()
        .map(|(value, cfg, seed)| Ok(SweepPoint { value, seed, result: run_simulation(cfg, seed)? }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::single_packet_latency;
    use crate::traffic::StreamLabel;

    fn short(fps: f64) -> SimConfig {
        let mut cfg = SimConfig { duration_s: 2.0, ..Default::default() };
        cfg.traffic.fps = fps;
        cfg
    }

    #[test]
    fn queue_orders_by_time_then_insertion() {
        let mut q = EventQueue::new();
        q.schedule(Duration::from_micros(5), EventKind::PacerTick);
        q.schedule(Duration::from_micros(1), EventKind::BackoffExpiry(1));
        q.schedule(Duration::from_micros(5), EventKind::FrameGen);
        q.schedule(Duration::from_micros(1), EventKind::BackoffExpiry(2));
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).map(|e| e.kind).collect();
        assert_eq!(
            order,
            vec![EventKind::BackoffExpiry(1), EventKind::BackoffExpiry(2), EventKind::PacerTick, EventKind::FrameGen]
        );
    }

    #[test]
    #[should_panic(expected = "in the past")]
    fn queue_rejects_past_events() {
        let mut q = EventQueue::new();
        q.schedule(Duration::from_micros(5), EventKind::PacerTick);
        q.pop();
        q.schedule(Duration::from_micros(4), EventKind::PacerTick);
    }

    #[test]
    fn single_packet_composition() {
        let mut cfg = SimConfig::default();
        cfg.mac.per = 0.0;
        cfg.traffic.ul_enabled = false;
        cfg.warmup_ms = 0.0;
        cfg.duration_s = 0.1;
        let seed = 42;
        let mut sim = Simulation::new(&cfg, seed).unwrap().without_video().capture_packets();
        let t0 = Duration::from_millis(20);
        sim.inject(Packet::new(0, StreamLabel::SrtpVideo, Direction::Downlink, 1243, t0));
        let res = sim.run();
        assert_eq!(res.metrics.dl_packet_delays.len(), 1);
        let delay = res.metrics.dl_packet_delays[0];

        // Same mac stream, same first draw.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut st = MacStation::new(Role::Ap, &cfg.mac);
        let slots = st.draw_backoff(&mut rng);
        let base = single_packet_latency(1243, &cfg.phy, &cfg.mac, false).unwrap().total;
        assert_eq!(delay, base + Duration::from_micros(9) * slots);
    }

    #[test]
    fn deterministic() {
        let cfg = short(60.0);
        let a = run_simulation(&cfg, 7).unwrap();
        let b = run_simulation(&cfg, 7).unwrap();
        assert_eq!(a.metrics.dl_packet_delays, b.metrics.dl_packet_delays);
        assert_eq!(a.metrics.vf_delays, b.metrics.vf_delays);
        assert_eq!(a.metrics.ampdu_sizes, b.metrics.ampdu_sizes);
        assert_eq!(a.metrics.counts, b.metrics.counts);
        let c = run_simulation(&cfg, 8).unwrap();
        assert_ne!(a.metrics.dl_packet_delays, c.metrics.dl_packet_delays);
    }

    #[test]
    fn conservation_and_bounds() {
        for fps in [30.0, 90.0] {
            let cfg = short(fps);
            let r = run_simulation(&cfg, 3).unwrap();
            let m = &r.metrics;
            assert!(m.counts.is_conserved(), "{:?}", m.counts);
            assert!(m.airtime_busy <= m.window);
            assert!(m.ampdu_sizes.iter().all(|&n| (1..=256).contains(&n)));
            assert!(m.dl_packet_delays.iter().all(|d| !d.is_zero()));
            assert_eq!(m.counts.dropped_buffer, 0);
        }
    }

    #[test]
    fn per_zero_single_contender_has_no_retransmissions() {
        let mut cfg = short(90.0);
        cfg.mac.per = 0.0;
        cfg.traffic.ul_enabled = false;
        let r = run_simulation(&cfg, 5).unwrap();
        assert_eq!(r.metrics.retransmissions, 0);
        assert_eq!(r.metrics.collisions, 0);
        assert_eq!(r.metrics.counts.dropped_retx, 0);
    }

    #[test]
    fn unknown_axis() {
        assert!(matches!("gop".parse::<SweepAxis>(), Err(Error::UnknownAxis(_))));
        assert_eq!("inter_batch_time".parse::<SweepAxis>().unwrap(), SweepAxis::InterBatchTime);
    }

    #[test]
    fn empty_sweep() {
        let out = run_sweep(&SimConfig::default(), SweepAxis::Fps, &[], &[1, 2]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn sweep_runs_are_independent() {
        let base = short(60.0);
        let fwd = run_sweep(&base, SweepAxis::Per, &[0.0, 0.2], &[1, 2]).unwrap();
        let rev = run_sweep(&base, SweepAxis::Per, &[0.2, 0.0], &[2, 1]).unwrap();
        for p in &fwd {
            let q = rev.iter().find(|q| q.value == p.value && q.seed == p.seed).unwrap();
            assert_eq!(p.result.metrics.dl_packet_delays, q.result.metrics.dl_packet_delays);
        }
    }

    #[test]
    fn seeds_differ() {
        let s = run_seeds(1, 10);
        let uniq: std::collections::HashSet<_> = s.iter().collect();
        assert_eq!(uniq.len(), 10);
        assert_eq!(s, run_seeds(1, 10));
    }
}
