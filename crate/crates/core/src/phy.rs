//! HE (802.11ax) data rates and on-air durations.

use std::time::Duration;

use serde::Serialize;

use crate::config::{MacConfig, PhyConfig};
use crate::error::{Error, Result};

/// SERVICE field bits prepended to every PSDU.
pub const SERVICE_BITS: u64 = 16;
/// Tail bits appended to every PSDU.
pub const TAIL_BITS: u64 = 6;
/// HE OFDM symbol duration without guard interval.
pub const HE_SYMBOL_NS: u64 = 12_800;
/// Legacy OFDM symbol duration (3.2 µs + 0.8 µs GI).
pub const LEGACY_SYMBOL_NS: u64 = 4_000;

/// (bits per subcarrier, coding rate numerator, denominator) for HE MCS 0..=11.
const MCS_TABLE: [(u32, u32, u32); 12] = [
    (1, 1, 2),
    (2, 1, 2),
    (2, 3, 4),
    (4, 1, 2),
    (4, 3, 4),
    (6, 2, 3),
    (6, 3, 4),
    (6, 5, 6),
    (8, 3, 4),
    (8, 5, 6),
    (10, 3, 4),
    (10, 5, 6),
];

/// HE data subcarriers for a full-band RU.
pub fn data_subcarriers(width_mhz: u16) -> Option<u32> {
    match width_mhz {
        20 => Some(234),
        40 => Some(468),
        80 => Some(980),
        160 => Some(1960),
        _ => None,
    }
}

fn mcs_params(phy: &PhyConfig) -> Result<(u32, f64)> {
    let unsupported = || Error::UnsupportedMcs { mcs: phy.mcs_index, width_mhz: phy.channel_width_mhz };
    let &(bits, num, den) = MCS_TABLE.get(phy.mcs_index as usize).ok_or_else(unsupported)?;
    let nsd = data_subcarriers(phy.channel_width_mhz).ok_or_else(unsupported)?;
    Ok((nsd, bits as f64 * num as f64 / den as f64))
}

/// Data bits carried by one HE OFDM symbol across all spatial streams.
pub fn bits_per_symbol(phy: &PhyConfig) -> Result<f64> {
    let (nsd, coded) = mcs_params(phy)?;
    Ok(nsd as f64 * coded * phy.spatial_streams as f64)
}

pub fn symbol_duration(phy: &PhyConfig) -> Duration {
    Duration::from_nanos(HE_SYMBOL_NS + phy.guard_interval_ns as u64)
}

/// PHY data rate in bits per second.
pub fn phy_rate(phy: &PhyConfig) -> Result<f64> {
    Ok(bits_per_symbol(phy)? / symbol_duration(phy).as_secs_f64())
}

/// Precomputed PHY timing for one link configuration.
#[derive(Clone, Debug)]
pub struct Phy {
    bits_per_symbol: f64,
    symbol: Duration,
    preamble: Duration,
    delimiter_bytes: u64,
    rts: Duration,
    cts: Duration,
    back: Duration,
}

impl Phy {
    pub fn new(phy: &PhyConfig) -> Result<Self> {
        let legacy = |bytes: u32| legacy_frame_airtime(bytes, phy.control_rate_mbps, phy.legacy_preamble_us);
        Ok(Self {
            bits_per_symbol: bits_per_symbol(phy)?,
            symbol: symbol_duration(phy),
            preamble: us(phy.he_preamble_us),
            delimiter_bytes: phy.mpdu_delimiter_bytes as u64,
            rts: legacy(phy.rts_bytes),
            cts: legacy(phy.cts_bytes),
            back: legacy(phy.back_bytes),
        })
    }

    /// Number of OFDM symbols needed for an A-MPDU payload; at least one.
    pub fn data_symbols(&self, total_mpdu_bytes: u64, n_mpdus: usize) -> u64 {
        let bits = SERVICE_BITS + 8 * (total_mpdu_bytes + n_mpdus as u64 * self.delimiter_bytes) + TAIL_BITS;
        ((bits as f64 / self.bits_per_symbol).ceil() as u64).max(1)
    }

    pub fn data_ppdu(&self, total_mpdu_bytes: u64, n_mpdus: usize) -> Duration {
        self.preamble + self.symbol * self.data_symbols(total_mpdu_bytes, n_mpdus) as u32
    }

    pub fn preamble(&self) -> Duration {
        self.preamble
    }

    pub fn rts(&self) -> Duration {
        self.rts
    }

    pub fn cts(&self) -> Duration {
        self.cts
    }

    pub fn back(&self) -> Duration {
        self.back
    }
}

/// Duration of a control frame sent at a legacy OFDM rate.
pub fn legacy_frame_airtime(bytes: u32, rate_mbps: f64, preamble_us: f64) -> Duration {
    let bits_per_symbol = rate_mbps * LEGACY_SYMBOL_NS as f64 / 1e3;
    let bits = SERVICE_BITS + 8 * bytes as u64 + TAIL_BITS;
    let symbols = (bits as f64 / bits_per_symbol).ceil() as u32;
    us(preamble_us) + Duration::from_nanos(LEGACY_SYMBOL_NS) * symbols
}

/// Airtime of an HE SU PPDU carrying `n_mpdus` MPDUs totalling `total_mpdu_bytes`.
pub fn data_ppdu_airtime(total_mpdu_bytes: u64, n_mpdus: usize, phy: &PhyConfig) -> Result<Duration> {
    Ok(Phy::new(phy)?.data_ppdu(total_mpdu_bytes, n_mpdus.max(1)))
}

pub(crate) fn us(v: f64) -> Duration {
    Duration::from_nanos((v * 1e3).round() as u64)
}

/// Component durations of one channel access, in transmission order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AirtimeBreakdown {
    pub aifs: Duration,
    pub backoff: Duration,
    pub rts: Duration,
    pub cts: Duration,
    pub data_ppdu: Duration,
    pub back: Duration,
    pub sifs_total: Duration,
    pub total: Duration,
}

impl AirtimeBreakdown {
    pub fn sum_of_parts(&self) -> Duration {
        self.aifs + self.backoff + self.rts + self.cts + self.data_ppdu + self.back + self.sifs_total
    }
}

/// Time for one packet to cross an idle link: AIFS, optional mean backoff
/// (`cw_min / 2` slots), RTS/CTS when enabled, the data PPDU and the BlockAck.
pub fn single_packet_latency(
    packet_bytes: u32,
    phy: &PhyConfig,
    mac: &MacConfig,
    include_mean_backoff: bool,
) -> Result<AirtimeBreakdown> {
    let p = Phy::new(phy)?;
    let sifs = us(mac.sifs_us);
    let (rts, cts, n_sifs) =
        if mac.rts_cts_enabled { (p.rts(), p.cts(), 3) } else { (Duration::ZERO, Duration::ZERO, 1) };
    let backoff = if include_mean_backoff { us(mac.slot_us * mac.cw_min as f64 / 2.0) } else { Duration::ZERO };
    let mut b = AirtimeBreakdown {
        aifs: us(mac.aifs_us),
        backoff,
        rts,
        cts,
        data_ppdu: p.data_ppdu(packet_bytes as u64, 1),
        back: p.back(),
        sifs_total: sifs * n_sifs,
        total: Duration::ZERO,
    };
    b.total = b.sum_of_parts();
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table4() -> (PhyConfig, MacConfig) {
        (PhyConfig::default(), MacConfig::default())
    }

    /// Counts symbols by draining the payload one symbol at a time.
    fn symbols_by_counting(payload_bits: f64, per_symbol: f64) -> u64 {
        let mut left = payload_bits;
        let mut n = 0;
        loop {
            n += 1;
            left -= per_symbol;
            if left <= 0.0 {
                return n;
            }
        }
    }

    #[test]
    fn rate_mcs11_80mhz_2ss() {
        let r = phy_rate(&PhyConfig::default()).unwrap() / 1e6;
        // 980 * 10 * 5/6 * 2 / 13.6 µs
        assert!((r - 1200.98).abs() < 0.01, "{r}");
    }

    #[test]
    fn rate_mcs0_20mhz() {
        let phy = PhyConfig { mcs_index: 0, channel_width_mhz: 20, spatial_streams: 1, ..Default::default() };
        let r = phy_rate(&phy).unwrap() / 1e6;
        assert!((r - 8.60).abs() < 0.01, "{r}");
    }

    #[test]
    fn rate_rejects_mcs12() {
        let phy = PhyConfig { mcs_index: 12, ..Default::default() };
        assert!(matches!(phy_rate(&phy), Err(Error::UnsupportedMcs { mcs: 12, .. })));
    }

    #[test]
    fn ampdu_of_14_by_symbol_counting() {
        let phy = PhyConfig::default();
        let bits = (16 + 8 * 14 * (1243 + 4) + 6) as f64;
        let n = symbols_by_counting(bits, 980.0 * 10.0 * 5.0 / 6.0 * 2.0);
        assert_eq!(n, 9);
        let want = Duration::from_nanos(44_000 + n * 13_600);
        assert_eq!(data_ppdu_airtime(14 * 1243, 14, &phy).unwrap(), want);
        assert_eq!(want.as_nanos(), 166_400);
    }

    #[test]
    fn empty_payload_is_one_symbol() {
        let phy = PhyConfig::default();
        assert_eq!(data_ppdu_airtime(0, 1, &phy).unwrap(), Duration::from_nanos(44_000 + 13_600));
    }

    #[test]
    fn doubling_mpdus_less_than_doubles_airtime() {
        let phy = PhyConfig::default();
        for n in [1usize, 4, 14, 64, 128] {
            let one = data_ppdu_airtime(n as u64 * 1243, n, &phy).unwrap();
            let two = data_ppdu_airtime(2 * n as u64 * 1243, 2 * n, &phy).unwrap();
            assert!(two < one * 2, "n={n}");
        }
    }

    #[test]
    fn control_frames_at_24mbps() {
        let p = Phy::new(&PhyConfig::default()).unwrap();
        assert_eq!(p.rts(), Duration::from_micros(28));
        assert_eq!(p.cts(), Duration::from_micros(28));
        assert_eq!(p.back(), Duration::from_micros(32));
    }

    #[test]
    fn latency_anchor() {
        let (phy, mac) = table4();
        let b = single_packet_latency(1243, &phy, &mac, true).unwrap();
        // 34 + 139.5 + 28 + 16 + 28 + 16 + 57.6 + 16 + 32
        assert_eq!(b.total, Duration::from_nanos(367_100));
        assert!((b.total.as_secs_f64() * 1e3 - 0.374).abs() <= 0.0374);
    }

    #[test]
    fn mean_backoff_difference() {
        let (phy, mac) = table4();
        let with = single_packet_latency(1243, &phy, &mac, true).unwrap();
        let without = single_packet_latency(1243, &phy, &mac, false).unwrap();
        assert_eq!(with.total - without.total, Duration::from_nanos(139_500));
    }

    #[test]
    fn zero_byte_packet_is_overhead_only() {
        let (phy, mac) = table4();
        let b = single_packet_latency(0, &phy, &mac, false).unwrap();
        let p = Phy::new(&phy).unwrap();
        assert_eq!(b.data_ppdu, p.preamble() + symbol_duration(&phy));
        assert_eq!(b.total, b.aifs + b.rts + b.cts + b.back + b.sifs_total + b.data_ppdu);
    }

    #[test]
    fn no_rts_cts_drops_control_frames() {
        let (phy, mut mac) = table4();
        mac.rts_cts_enabled = false;
        let b = single_packet_latency(1243, &phy, &mac, false).unwrap();
        assert_eq!(b.rts, Duration::ZERO);
        assert_eq!(b.sifs_total, Duration::from_micros(16));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rate_monotone(mcs in 0u8..11, wi in 0usize..3, ss in 1u8..8) {
                let widths = [20u16, 40, 80, 160];
                let base = PhyConfig { mcs_index: mcs, channel_width_mhz: widths[wi], spatial_streams: ss, ..Default::default() };
                let r = phy_rate(&base).unwrap();
                let higher_mcs = PhyConfig { mcs_index: mcs + 1, ..base.clone() };
                let wider = PhyConfig { channel_width_mhz: widths[wi + 1], ..base.clone() };
                let more_ss = PhyConfig { spatial_streams: ss + 1, ..base };
                prop_assert!(phy_rate(&higher_mcs).unwrap() >= r);
                prop_assert!(phy_rate(&wider).unwrap() >= r);
                prop_assert!(phy_rate(&more_ss).unwrap() >= r);
            }

            #[test]
            fn ppdu_monotone_in_bytes(bytes in 0u64..400_000, extra in 0u64..5_000, n in 1usize..256) {
                let phy = PhyConfig::default();
                let p = Phy::new(&phy).unwrap();
                let a = p.data_ppdu(bytes, n);
                prop_assert!(p.data_ppdu(bytes + extra, n) >= a);
                prop_assert!(a >= p.preamble());
            }

            #[test]
            fn breakdown_sums(bytes in 0u32..12_000, mean in any::<bool>(), rts in any::<bool>(), mcs in 0u8..=11) {
                let phy = PhyConfig { mcs_index: mcs, ..Default::default() };
                let mac = MacConfig { rts_cts_enabled: rts, ..Default::default() };
                let b = single_packet_latency(bytes, &phy, &mac, mean).unwrap();
                prop_assert_eq!(b.total, b.sum_of_parts());
            }
        }
    }
}
