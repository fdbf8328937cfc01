//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes the simulation configuration as JSON (any subset of
//! the TOML schema; missing fields take their defaults) and returns JSON.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use wifivr::metrics::{buffer_busy_fraction, buffer_occupancy, ecdf, summarize, to_ms};
use wifivr::phy::{phy_rate, single_packet_latency};
use wifivr::traffic::generate_video;
use wifivr::{run_simulation, SimConfig};

/// Most points sent back for one ECDF curve.
const ECDF_POINTS: usize = 400;

fn config(json: &str) -> Result<SimConfig, String> {
    let cfg: SimConfig = if json.trim().is_empty() {
        SimConfig::default()
    } else {
        serde_json::from_str(json).map_err(|e| format!("config: {e}"))?
    };
    cfg.validate().map_err(|e| e.to_string())
}

fn us(d: Duration) -> f64 {
    d.as_secs_f64() * 1e6
}

#[derive(Serialize)]
struct Breakdown {
    phy_rate_mbps: f64,
    /// `(label, µs)` in transmission order.
    parts: Vec<(&'static str, f64)>,
    total_us: f64,
    total_without_backoff_us: f64,
}

pub fn breakdown_json(cfg_json: &str, packet_bytes: u32) -> Result<String, String> {
    let cfg = config(cfg_json)?;
    let err = |e: wifivr::Error| e.to_string();
    let b = single_packet_latency(packet_bytes, &cfg.phy, &cfg.mac, true).map_err(err)?;
    let out = Breakdown {
        phy_rate_mbps: phy_rate(&cfg.phy).map_err(err)? / 1e6,
        parts: vec![
            ("AIFS", us(b.aifs)),
            ("backoff", us(b.backoff)),
            ("RTS", us(b.rts)),
            ("CTS", us(b.cts)),
            ("data", us(b.data_ppdu)),
            ("BACK", us(b.back)),
            ("SIFS", us(b.sifs_total)),
        ],
        total_us: us(b.total),
        total_without_backoff_us: us(b.total - b.backoff),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct RunView {
    dl_delay_mean_ms: Option<f64>,
    dl_delay_p9999_ms: Option<f64>,
    vf_delay_mean_ms: Option<f64>,
    ampdu_mean: Option<f64>,
    airtime: f64,
    buffer_occupancy: f64,
    buffer_busy: f64,
    retransmissions: u64,
    collisions: u64,
    dl_delay_ecdf: Vec<(f64, f64)>,
    vf_delay_ecdf: Vec<(f64, f64)>,
    /// Count of A-MPDUs by size, index = size.
    ampdu_histogram: Vec<u64>,
}

/// Keeps at most `n` evenly spaced points of a curve, always including the last.
fn thin(points: Vec<(f64, f64)>, n: usize) -> Vec<(f64, f64)> {
    if points.len() <= n {
        return points;
    }
    let step = points.len() as f64 / n as f64;
    let mut out: Vec<_> = (0..n).map(|i| points[(i as f64 * step) as usize]).collect();
    out.push(*points.last().expect("non-empty"));
    out
}

pub fn simulate_json(cfg_json: &str, seed: u64) -> Result<String, String> {
    let cfg = config(cfg_json)?;
    let r = run_simulation(&cfg, seed).map_err(|e| e.to_string())?;
    let m = &r.metrics;
    let dl = to_ms(&m.dl_packet_delays);
    let vf = to_ms(&m.vf_delays);
    let ampdu: Vec<f64> = m.ampdu_sizes.iter().map(|&n| f64::from(n)).collect();
    let mut hist = vec![0u64; m.ampdu_sizes.iter().max().map_or(0, |&n| n as usize + 1)];
    for &n in &m.ampdu_sizes {
        hist[n as usize] += 1;
    }
    let dl_s = summarize(&dl).ok();
    let out = RunView {
        dl_delay_mean_ms: dl_s.map(|s| s.mean),
        dl_delay_p9999_ms: dl_s.map(|s| s.p9999),
        vf_delay_mean_ms: summarize(&vf).ok().map(|s| s.mean),
        ampdu_mean: summarize(&ampdu).ok().map(|s| s.mean),
        airtime: wifivr::metrics::airtime_fraction(m, m.window),
        buffer_occupancy: buffer_occupancy(m),
        buffer_busy: buffer_busy_fraction(m),
        retransmissions: m.retransmissions,
        collisions: m.collisions,
        dl_delay_ecdf: thin(ecdf(&dl), ECDF_POINTS),
        vf_delay_ecdf: thin(ecdf(&vf), ECDF_POINTS),
        ampdu_histogram: hist,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Timeline {
    /// Frame generation instants, ms.
    frames_ms: Vec<f64>,
    /// Batch count drawn for each frame.
    batches: Vec<u32>,
    /// `(send time ms, frame id)` per packet.
    packets: Vec<(f64, u64)>,
}

pub fn timeline_json(cfg_json: &str, seed: u64, duration_ms: f64) -> Result<String, String> {
    let cfg = config(cfg_json)?;
    if duration_ms.is_nan() || duration_ms <= 0.0 || duration_ms > 10_000.0 {
        return Err("duration must be in (0, 10000] ms".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = generate_video(&cfg.traffic, Duration::from_secs_f64(duration_ms / 1e3), &mut rng)
        .map_err(|e| e.to_string())?;
    let out = Timeline {
        frames_ms: v.frames.iter().map(|f| f.gen_time.as_secs_f64() * 1e3).collect(),
        batches: v.frames.iter().map(|f| f.n_batches).collect(),
        packets: v.packets.iter().map(|p| (p.gen_time.as_secs_f64() * 1e3, p.frame_id.unwrap_or(0))).collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Airtime breakdown of a single packet crossing an idle link.
#[wasm_bindgen]
pub fn airtime_breakdown(cfg_json: &str, packet_bytes: u32) -> Result<String, JsError> {
    breakdown_json(cfg_json, packet_bytes).map_err(|e| JsError::new(&e))
}

/// One simulation run: headline numbers, delay ECDFs and the A-MPDU histogram.
#[wasm_bindgen]
pub fn simulate(cfg_json: &str, seed: u32) -> Result<String, JsError> {
    simulate_json(cfg_json, u64::from(seed)).map_err(|e| JsError::new(&e))
}

/// Packet send times of the paced video source alone.
#[wasm_bindgen]
pub fn traffic_timeline(cfg_json: &str, seed: u32, duration_ms: f64) -> Result<String, JsError> {
    timeline_json(cfg_json, u64::from(seed), duration_ms).map_err(|e| JsError::new(&e))
}
