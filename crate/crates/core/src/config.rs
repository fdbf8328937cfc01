//! Simulation configuration.
//!
//! Every duration carries its unit in the field name. Any field left out of a
//! config file falls back to the default link, MAC and traffic parameters
//! (5 GHz, 80 MHz, MCS 11, 2 SS, 50 Mbps at 90 fps).

use std::fmt;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// OFDM PHY parameters plus the framing constants used for airtime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    pub mcs_index: u8,
    pub channel_width_mhz: u16,
    pub spatial_streams: u8,
    pub guard_interval_ns: u16,
    pub band: String,
    /// HE SU PPDU preamble duration.
    pub he_preamble_us: f64,
    /// Legacy (non-HT) rate used for RTS, CTS and BlockAck frames.
    pub control_rate_mbps: f64,
    pub legacy_preamble_us: f64,
    /// A-MPDU delimiter bytes added to every MPDU.
    pub mpdu_delimiter_bytes: u32,
    pub rts_bytes: u32,
    pub cts_bytes: u32,
    pub back_bytes: u32,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            mcs_index: 11,
            channel_width_mhz: 80,
            spatial_streams: 2,
            guard_interval_ns: 800,
            band: "5GHz".to_string(),
            he_preamble_us: 44.0,
            control_rate_mbps: 24.0,
            legacy_preamble_us: 20.0,
            mpdu_delimiter_bytes: 4,
            rts_bytes: 20,
            cts_bytes: 14,
            back_bytes: 32,
        }
    }
}

/// EDCA channel access and buffering parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacConfig {
    pub aifs_us: f64,
    pub sifs_us: f64,
    pub slot_us: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    /// Maximum MPDUs per A-MPDU.
    pub max_ampdu: usize,
    /// Retransmissions allowed per MPDU before it is dropped.
    pub max_retx: u32,
    /// Per-MPDU error probability.
    pub per: f64,
    pub ap_buffer: usize,
    pub client_buffer: usize,
    /// RTS/CTS protection for downlink A-MPDUs.
    pub rts_cts_enabled: bool,
    /// RTS/CTS protection for uplink frames.
    pub ul_rts_cts_enabled: bool,
    /// Model collisions between the AP and the client.
    pub collisions_enabled: bool,
    /// Reset CW after a partially successful A-MPDU. When false, CW resets only
    /// if every MPDU got through.
    pub cw_reset_on_partial: bool,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            aifs_us: 34.0,
            sifs_us: 16.0,
            slot_us: 9.0,
            cw_min: 31,
            cw_max: 1023,
            max_ampdu: 256,
            max_retx: 7,
            per: 0.1,
            ap_buffer: 1000,
            client_buffer: 150,
            rts_cts_enabled: true,
            ul_rts_cts_enabled: true,
            collisions_enabled: true,
            cw_reset_on_partial: true,
        }
    }
}

/// Video and controller traffic parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub fps: f64,
    pub bitrate_mbps: f64,
    /// Maximum video packet size.
    pub packet_size_bytes: u32,
    /// Pacer interval between batch transmission points.
    pub inter_batch_time_ms: f64,
    /// Spacing between consecutive packets leaving the server.
    pub intra_batch_gap_us: f64,
    pub ul_enabled: bool,
    pub ul_period_ms: f64,
    pub ul_packet_size_bytes: u32,
    /// Low-rate STUN, audio, RTCP and generic UDP side streams.
    pub aux_streams: bool,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            fps: 90.0,
            bitrate_mbps: 50.0,
            packet_size_bytes: 1243,
            inter_batch_time_ms: 5.56,
            intra_batch_gap_us: 5.0,
            ul_enabled: true,
            ul_period_ms: 4.16,
            ul_packet_size_bytes: 175,
            aux_streams: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub phy: PhyConfig,
    pub mac: MacConfig,
    pub traffic: TrafficConfig,
    pub duration_s: f64,
    /// Leading interval excluded from every metric.
    pub warmup_ms: f64,
    pub runs: u32,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            phy: PhyConfig::default(),
            mac: MacConfig::default(),
            traffic: TrafficConfig::default(),
            duration_s: 10.0,
            warmup_ms: 500.0,
            runs: 10,
            seed: 1,
        }
    }
}

/// One violated configuration invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl SimConfig {
    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.duration_s)
    }

    pub fn warmup(&self) -> Duration {
        Duration::from_secs_f64(self.warmup_ms / 1e3)
    }

    /// Reads a TOML config. Missing fields take their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    /// Returns the config unchanged when every invariant holds, otherwise all
    /// of the violations at once.
    pub fn validate(self) -> Result<Self> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &'static str, message: &str| out.push(Violation { field, message: message.to_string() });

        let phy = &self.phy;
        if phy.mcs_index > 11 {
            bad("phy.mcs_index", "unsupported MCS");
        }
        if ![20, 40, 80, 160].contains(&phy.channel_width_mhz) {
            bad("phy.channel_width_mhz", "channel width must be 20, 40, 80 or 160 MHz");
        }
        if !(1..=8).contains(&phy.spatial_streams) {
            bad("phy.spatial_streams", "spatial streams must be in 1..=8");
        }
        if ![800, 1600, 3200].contains(&phy.guard_interval_ns) {
            bad("phy.guard_interval_ns", "guard interval must be 800, 1600 or 3200 ns");
        }
        if !(phy.he_preamble_us >= 0.0 && phy.legacy_preamble_us >= 0.0) {
            bad("phy.preamble", "preamble durations must be non-negative");
        }
        if !positive(phy.control_rate_mbps) {
            bad("phy.control_rate_mbps", "control rate must be positive");
        }

        let mac = &self.mac;
        if !(0.0..=1.0).contains(&mac.per) {
            bad("mac.per", "per out of range");
        }
        if mac.cw_min > mac.cw_max {
            bad("mac.cw_min", "cw_min exceeds cw_max");
        }
        if mac.max_ampdu < 1 {
            bad("mac.max_ampdu", "max_ampdu must be at least 1");
        }
        if mac.ap_buffer < 1 {
            bad("mac.ap_buffer", "buffer must hold at least 1 packet");
        }
        if mac.client_buffer < 1 {
            bad("mac.client_buffer", "buffer must hold at least 1 packet");
        }
        if !(mac.aifs_us >= 0.0 && mac.sifs_us >= 0.0) {
            bad("mac.aifs_us", "interframe spaces must be non-negative");
        }
        if !positive(mac.slot_us) {
            bad("mac.slot_us", "slot must be positive");
        }

        let t = &self.traffic;
        if !positive(t.fps) {
            bad("traffic.fps", "fps must be positive");
        }
        if !positive(t.bitrate_mbps) {
            bad("traffic.bitrate_mbps", "bitrate must be positive");
        }
        if t.packet_size_bytes == 0 {
            bad("traffic.packet_size_bytes", "packet size must be positive");
        }
        if !positive(t.inter_batch_time_ms) {
            bad("traffic.inter_batch_time_ms", "inter-batch time must be positive");
        }
        if t.intra_batch_gap_us.is_nan() || t.intra_batch_gap_us < 0.0 {
            bad("traffic.intra_batch_gap_us", "intra-batch gap must be non-negative");
        }
        if t.ul_enabled && !positive(t.ul_period_ms) {
            bad("traffic.ul_period_ms", "uplink period must be positive");
        }
        if t.ul_enabled && t.ul_packet_size_bytes == 0 {
            bad("traffic.ul_packet_size_bytes", "uplink packet size must be positive");
        }

        if !positive(self.duration_s) {
            bad("duration_s", "duration must be positive");
        }
        if self.warmup_ms.is_nan() || self.warmup_ms < 0.0 || self.warmup_ms / 1e3 >= self.duration_s {
            bad("warmup_ms", "warm-up must be non-negative and shorter than the run");
        }
        if self.runs < 1 {
            bad("runs", "at least one run is required");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(cfg: SimConfig) -> Vec<String> {
        match cfg.validate() {
            Err(Error::Invalid(v)) => v.into_iter().map(|v| v.message).collect(),
            other => panic!("expected violations, got {other:?}"),
        }
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.clone().validate().unwrap(), cfg);
        assert_eq!(cfg.mac.aifs_us, cfg.mac.sifs_us + 2.0 * cfg.mac.slot_us);
    }

    #[test]
    fn per_out_of_range() {
        let mut cfg = SimConfig::default();
        cfg.mac.per = 1.5;
        assert_eq!(messages(cfg), ["per out of range"]);
    }

    #[test]
    fn cw_order() {
        let mut cfg = SimConfig::default();
        cfg.mac.cw_min = 1023;
        cfg.mac.cw_max = 31;
        assert_eq!(messages(cfg), ["cw_min exceeds cw_max"]);
    }

    #[test]
    fn reports_every_violation() {
        let mut cfg = SimConfig::default();
        cfg.mac.per = -0.1;
        cfg.phy.mcs_index = 12;
        cfg.traffic.fps = 0.0;
        cfg.runs = 0;
        let m = messages(cfg);
        assert_eq!(m.len(), 4, "{m:?}");
        assert!(m.contains(&"unsupported MCS".to_string()));
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(SimConfig::from_toml("").unwrap(), SimConfig::default());
    }

    #[test]
    fn partial_override() {
        let cfg = SimConfig::from_toml("[traffic]\nfps = 60\n").unwrap();
        let mut want = SimConfig::default();
        want.traffic.fps = 60.0;
        assert_eq!(cfg, want);
    }

    #[test]
    fn malformed_document() {
        let err = SimConfig::from_toml("[traffic\nfps = ").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        let err = SimConfig::from_toml("[traffic]\nfsp = 60\n").unwrap_err();
        assert!(err.to_string().contains("fsp"), "{err}");
    }

    #[test]
    fn invalid_values_in_file() {
        let err = SimConfig::from_toml("[mac]\nper = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("per out of range"));
    }
}
