//! Per-station EDCA state: transmit buffer, contention window, A-MPDU
//! assembly and BlockAck handling.

use std::collections::VecDeque;
use std::time::Duration;

use rand::Rng;
use serde::Serialize;

use crate::config::MacConfig;
use crate::traffic::Packet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Role {
    Ap,
    Client,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enqueue {
    Accepted,
    Dropped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ampdu {
    pub mpdus: Vec<u64>,
    pub total_bytes: u64,
    pub tx_start: Duration,
    pub tx_end: Duration,
}

impl Ampdu {
    pub fn len(&self) -> usize {
        self.mpdus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mpdus.is_empty()
    }
}

/// What a BlockAck did to the in-flight MPDUs.
#[derive(Debug, Default)]
pub struct BackOutcome {
    pub delivered: Vec<Packet>,
    pub requeued: usize,
    pub dropped: Vec<Packet>,
}

#[derive(Clone, Debug)]
pub struct MacStation {
    pub role: Role,
    capacity: usize,
    queue: VecDeque<Packet>,
    in_flight: Vec<Packet>,
    cw: u32,
    cw_min: u32,
    cw_max: u32,
    max_ampdu: usize,
    max_retx: u32,
    cw_reset_on_partial: bool,
    /// Remaining backoff slots, when a backoff is in progress.
    pub backoff: Option<u32>,
    pub buffer_drops: u64,
    pub retx_drops: u64,
}

impl MacStation {
    pub fn new(role: Role, mac: &MacConfig) -> Self {
        let capacity = match role {
            Role::Ap => mac.ap_buffer,
            Role::Client => mac.client_buffer,
        };
        Self {
            role,
            capacity,
            queue: VecDeque::new(),
            in_flight: Vec::new(),
            cw: mac.cw_min,
            cw_min: mac.cw_min,
            cw_max: mac.cw_max,
            max_ampdu: mac.max_ampdu,
            max_retx: mac.max_retx,
            cw_reset_on_partial: mac.cw_reset_on_partial,
            backoff: None,
            buffer_drops: 0,
            retx_drops: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn cw(&self) -> u32 {
        self.cw
    }

    /// Packets held by the station, including MPDUs awaiting a BlockAck.
    pub fn occupancy(&self) -> usize {
        self.queue.len() + self.in_flight.len()
    }

    /// Packets waiting for a transmission opportunity.
    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub fn has_pending(&self) -> bool {
        !self.queue.is_empty()
    }

    pub fn queue(&self) -> impl Iterator<Item = &Packet> {
        self.queue.iter()
    }

    pub fn in_flight(&self) -> &[Packet] {
        &self.in_flight
    }

    /// Tail-drops when the buffer is full.
    pub fn enqueue(&mut self, mut pkt: Packet, now: Duration) -> Enqueue {
        if self.occupancy() >= self.capacity {
            self.buffer_drops += 1;
            return Enqueue::Dropped;
        }
        pkt.enqueue_time = Some(now);
        self.queue.push_back(pkt);
        Enqueue::Accepted
    }

    /// Draws a fresh backoff uniformly from `[0, cw]`.
    pub fn draw_backoff<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u32 {
        let slots = rng.gen_range(0..=self.cw);
        self.backoff = Some(slots);
        slots
    }

    /// Doubles the contention window, capped at `cw_max`.
    pub fn on_failure(&mut self) {
        self.cw = (self.cw * 2 + 1).min(self.cw_max);
    }

    pub fn on_success(&mut self) {
        self.cw = self.cw_min;
    }

    /// Moves up to `max_ampdu` head-of-line packets into a new A-MPDU.
    /// Retransmissions sit at the head, so they always go first.
    pub fn assemble_ampdu(&mut self, now: Duration) -> Option<Ampdu> {
        debug_assert!(self.in_flight.is_empty(), "previous A-MPDU not resolved");
        let n = self.queue.len().min(self.max_ampdu);
        if n == 0 {
            return None;
        }
        self.in_flight.extend(self.queue.drain(..n));
        Some(Ampdu {
            mpdus: self.in_flight.iter().map(|p| p.packet_id).collect(),
            total_bytes: self.in_flight.iter().map(|p| p.size as u64).sum(),
            tx_start: now,
            tx_end: now,
        })
    }

    /// Returns the in-flight MPDUs to the head of the queue untouched, as
    /// after an RTS that got no CTS.
    pub fn abort_exchange(&mut self) {
        for p in self.in_flight.drain(..).rev() {
            self.queue.push_front(p);
        }
        self.on_failure();
    }

    /// Resolves the in-flight A-MPDU from per-MPDU success flags.
    pub fn handle_back(&mut self, flags: &[bool], now: Duration) -> BackOutcome {
        assert_eq!(flags.len(), self.in_flight.len(), "flags do not match the A-MPDU");
        let mut out = BackOutcome::default();
        let mut failed = Vec::new();
        for (mut p, &ok) in self.in_flight.drain(..).zip(flags) {
            if ok {
                p.delivery_time = Some(now);
                out.delivered.push(p);
            } else if p.retx_count >= self.max_retx {
                self.retx_drops += 1;
                out.dropped.push(p);
            } else {
                p.retx_count += 1;
                failed.push(p);
            }
        }
        out.requeued = failed.len();
        for p in failed.into_iter().rev() {
            self.queue.push_front(p);
        }

        let any = !out.delivered.is_empty();
        let all = flags.iter().all(|&f| f);
        if all || (any && self.cw_reset_on_partial) {
            self.on_success();
        } else {
            self.on_failure();
        }
        out
    }
}

/// Independent per-MPDU losses with probability `per`.
pub fn apply_per<R: Rng + ?Sized>(ampdu: &Ampdu, per: f64, rng: &mut R) -> Vec<bool> {
    ampdu.mpdus.iter().map(|_| !rng.gen_bool(per)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{Direction, StreamLabel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pkt(id: u64) -> Packet {
        Packet::new(id, StreamLabel::SrtpVideo, Direction::Downlink, 1243, Duration::ZERO)
    }

    fn ap() -> MacStation {
        MacStation::new(Role::Ap, &MacConfig::default())
    }

    fn fill(st: &mut MacStation, n: u64) {
        for i in 0..n {
            assert_eq!(st.enqueue(pkt(i), Duration::from_micros(i)), Enqueue::Accepted);
        }
    }

    #[test]
    fn tail_drop_at_capacity() {
        let mut st = ap();
        fill(&mut st, 999);
        assert_eq!(st.enqueue(pkt(999), Duration::ZERO), Enqueue::Accepted);
        assert_eq!(st.enqueue(pkt(1000), Duration::ZERO), Enqueue::Dropped);
        assert_eq!(st.buffer_drops, 1);
        assert_eq!(st.occupancy(), 1000);
    }

    #[test]
    fn enqueue_stamps_time() {
        let mut st = ap();
        st.enqueue(pkt(1), Duration::from_micros(10));
        assert_eq!(st.queue().next().unwrap().enqueue_time, Some(Duration::from_micros(10)));
    }

    #[test]
    fn client_buffer_is_smaller() {
        assert_eq!(MacStation::new(Role::Client, &MacConfig::default()).capacity(), 150);
    }

    #[test]
    fn backoff_range() {
        let mut st = ap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<u32> = (0..2000).map(|_| st.draw_backoff(&mut rng)).collect();
        assert!(draws.iter().all(|&d| d <= 31));
        assert!(draws.contains(&0) && draws.contains(&31));
    }

    #[test]
    fn cw_doubles_then_resets() {
        let mut st = ap();
        let mut seq = vec![st.cw()];
        for _ in 0..6 {
            st.on_failure();
            seq.push(st.cw());
        }
        assert_eq!(seq, [31, 63, 127, 255, 511, 1023, 1023]);
        st.on_success();
        assert_eq!(st.cw(), 31);
    }

    #[test]
    fn ampdu_sizes() {
        let mut st = ap();
        fill(&mut st, 300);
        assert_eq!(st.assemble_ampdu(Duration::ZERO).unwrap().len(), 256);
        let mut st = ap();
        fill(&mut st, 14);
        let a = st.assemble_ampdu(Duration::ZERO).unwrap();
        assert_eq!(a.len(), 14);
        assert_eq!(a.total_bytes, 14 * 1243);
        assert_eq!(a.mpdus, (0..14).collect::<Vec<_>>());
        assert!(ap().assemble_ampdu(Duration::ZERO).is_none());
    }

    #[test]
    fn per_extremes() {
        let mut st = ap();
        fill(&mut st, 50);
        let a = st.assemble_ampdu(Duration::ZERO).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(apply_per(&a, 0.0, &mut rng).iter().all(|&f| f));
        assert!(apply_per(&a, 1.0, &mut rng).iter().all(|&f| !f));
    }

    #[test]
    fn per_binomial() {
        let a =
            Ampdu { mpdus: (0..10_000).collect(), total_bytes: 0, tx_start: Duration::ZERO, tx_end: Duration::ZERO };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fails = apply_per(&a, 0.1, &mut rng).iter().filter(|&&f| !f).count() as i64;
        // 3 sigma of Binomial(10000, 0.1) = 90
        assert!((fails - 1000).abs() <= 90, "{fails}");
    }

    #[test]
    fn back_all_success() {
        let mut st = ap();
        fill(&mut st, 20);
        st.on_failure();
        st.assemble_ampdu(Duration::ZERO).unwrap();
        let out = st.handle_back(&[true; 20], Duration::from_micros(500));
        assert_eq!(out.delivered.len(), 20);
        assert_eq!(st.occupancy(), 0);
        assert_eq!(st.cw(), 31);
        assert!(out.delivered.iter().all(|p| p.delivery_time == Some(Duration::from_micros(500))));
    }

    #[test]
    fn back_drops_after_max_retx() {
        let mut st = ap();
        let mut p = pkt(1);
        p.retx_count = 7;
        st.enqueue(p, Duration::ZERO);
        st.assemble_ampdu(Duration::ZERO);
        let out = st.handle_back(&[false], Duration::ZERO);
        assert_eq!(out.dropped.len(), 1);
        assert_eq!(st.retx_drops, 1);
        assert_eq!(st.occupancy(), 0);
        assert_eq!(st.cw(), 63);
    }

    #[test]
    fn failed_mpdus_go_first() {
        let mut st = ap();
        fill(&mut st, 4);
        st.assemble_ampdu(Duration::ZERO);
        st.enqueue(pkt(10), Duration::ZERO);
        st.enqueue(pkt(11), Duration::ZERO);
        let out = st.handle_back(&[true, false, true, false], Duration::ZERO);
        assert_eq!(out.requeued, 2);
        assert_eq!(st.cw(), 31);
        let next = st.assemble_ampdu(Duration::ZERO).unwrap();
        assert_eq!(next.mpdus, vec![1, 3, 10, 11]);
        assert_eq!(st.in_flight()[0].retx_count, 1);
    }

    #[test]
    fn strict_cw_reset() {
        let mac = MacConfig { cw_reset_on_partial: false, ..Default::default() };
        let mut st = MacStation::new(Role::Ap, &mac);
        fill(&mut st, 2);
        st.assemble_ampdu(Duration::ZERO);
        st.handle_back(&[true, false], Duration::ZERO);
        assert_eq!(st.cw(), 63);
    }

    #[test]
    fn abort_restores_order() {
        let mut st = ap();
        fill(&mut st, 3);
        st.assemble_ampdu(Duration::ZERO);
        st.enqueue(pkt(7), Duration::ZERO);
        st.abort_exchange();
        assert_eq!(st.queue().map(|p| p.packet_id).collect::<Vec<_>>(), vec![0, 1, 2, 7]);
        assert!(st.queue().all(|p| p.retx_count == 0));
        assert_eq!(st.cw(), 63);
    }
}
