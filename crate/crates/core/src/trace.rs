//! Packet-trace ingestion and analysis.
//!
//! Traces are CSV files with one UDP datagram per row. The canonical header is
//!
//! ```text
//! timestamp,length,src_port,dst_port,direction,rtp_payload_type,rtp_ssrc,rtp_timestamp,rtp_marker
//! ```
//!
//! `timestamp` is in seconds with up to microsecond precision, `direction` is
//! `DL` or `UL`, and the four `rtp_*` columns are optional (absent or empty).
//! Common tshark field names are accepted as aliases, see [`COLUMN_ALIASES`].

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{Direction, Packet, StreamLabel};

/// RTP media clock used for video timestamps.
pub const RTP_VIDEO_CLOCK_HZ: f64 = 90_000.0;

pub const VIDEO_PAYLOAD_TYPE: u8 = 96;
pub const AUDIO_PAYLOAD_TYPE: u8 = 111;

/// Default inter-packet gap above which a new batch starts.
pub const DEFAULT_GAP_THRESHOLD: Duration = Duration::from_millis(1);

/// Bin width used to find the modal batch spacing.
pub const SPACING_BIN_MS: f64 = 0.1;

pub const CANONICAL_HEADER: [&str; 9] = [
    "timestamp",
    "length",
    "src_port",
    "dst_port",
    "direction",
    "rtp_payload_type",
    "rtp_ssrc",
    "rtp_timestamp",
    "rtp_marker",
];

/// Accepted header spellings for each canonical column.
pub const COLUMN_ALIASES: [(&str, &[&str]); 9] = [
    ("timestamp", &["timestamp", "frame.time_epoch", "time_epoch"]),
    ("length", &["length", "frame.len", "udp.length", "len"]),
    ("src_port", &["src_port", "udp.srcport", "srcport"]),
    ("dst_port", &["dst_port", "udp.dstport", "dstport"]),
    ("direction", &["direction", "dir"]),
    ("rtp_payload_type", &["rtp_payload_type", "rtp.p_type"]),
    ("rtp_ssrc", &["rtp_ssrc", "rtp.ssrc"]),
    ("rtp_timestamp", &["rtp_timestamp", "rtp.timestamp"]),
    ("rtp_marker", &["rtp_marker", "rtp.marker"]),
];

const MANDATORY: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Capture time in microseconds.
    pub timestamp_us: u64,
    pub length: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub direction: Direction,
    pub rtp_payload_type: Option<u8>,
    pub rtp_ssrc: Option<u32>,
    pub rtp_timestamp: Option<u32>,
    pub rtp_marker: Option<bool>,
}

impl TraceRecord {
    fn flow(&self) -> (Direction, u16, u16) {
        (self.direction, self.src_port, self.dst_port)
    }
}

/// A row that could not be parsed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedTrace {
    /// Records sorted by timestamp (stable, so file order breaks ties).
    pub records: Vec<TraceRecord>,
    pub skipped: Vec<SkippedRow>,
}

/// Parses seconds with an optional fraction into whole microseconds,
/// truncating digits beyond the sixth decimal.
pub fn parse_seconds_us(s: &str) -> Option<u64> {
    let s = s.trim();
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let secs: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let mut micros = 0u64;
    for i in 0..6 {
        micros = micros * 10 + frac.as_bytes().get(i).map_or(0, |b| u64::from(b - b'0'));
    }
    secs.checked_mul(1_000_000)?.checked_add(micros)
}

pub fn format_seconds_us(us: u64) -> String {
    format!("{}.{:06}", us / 1_000_000, us % 1_000_000)
}

fn parse_int<T: TryFrom<u64>>(s: &str) -> Option<T> {
    let s = s.trim();
    let v = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok()?,
        None => s.parse().ok()?,
    };
    T::try_from(v).ok()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn parse_direction(s: &str) -> Option<Direction> {
    match s.trim().to_ascii_uppercase().as_str() {
        "DL" | "DOWNLINK" => Some(Direction::Downlink),
        "UL" | "UPLINK" => Some(Direction::Uplink),
        _ => None,
    }
}

fn optional<T>(
    row: &csv::StringRecord,
    idx: Option<usize>,
    name: &str,
    f: impl Fn(&str) -> Option<T>,
) -> Result<Option<T>, String> {
    match idx.and_then(|i| row.get(i)).map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => f(v).map(Some).ok_or_else(|| format!("bad {name} {v:?}")),
    }
}

fn parse_row(row: &csv::StringRecord, cols: &[Option<usize>; 9]) -> Result<TraceRecord, String> {
    let field = |k: usize| row.get(cols[k].expect("mandatory column")).map(str::trim).unwrap_or("");
    let req = |k: usize| -> Result<&str, String> {
        let v = field(k);
        if v.is_empty() {
            Err(format!("empty {}", CANONICAL_HEADER[k]))
        } else {
            Ok(v)
        }
    };
    let bad = |k: usize, v: &str| format!("bad {} {v:?}", CANONICAL_HEADER[k]);

    let ts = req(0)?;
    let timestamp_us = parse_seconds_us(ts).ok_or_else(|| bad(0, ts))?;
    let len = req(1)?;
    let length: u32 = parse_int(len).filter(|&l| l > 0).ok_or_else(|| bad(1, len))?;
    let sp = req(2)?;
    let src_port = parse_int(sp).ok_or_else(|| bad(2, sp))?;
    let dp = req(3)?;
    let dst_port = parse_int(dp).ok_or_else(|| bad(3, dp))?;
    let dir = req(4)?;
    let direction = parse_direction(dir).ok_or_else(|| bad(4, dir))?;
    Ok(TraceRecord {
        timestamp_us,
        length,
        src_port,
        dst_port,
        direction,
        rtp_payload_type: optional(row, cols[5], CANONICAL_HEADER[5], parse_int)?,
        rtp_ssrc: optional(row, cols[6], CANONICAL_HEADER[6], parse_int)?,
        rtp_timestamp: optional(row, cols[7], CANONICAL_HEADER[7], parse_int)?,
        rtp_marker: optional(row, cols[8], CANONICAL_HEADER[8], parse_bool)?,
    })
}

/// Reads a trace from any reader. Missing mandatory columns are a hard
/// error; malformed rows are skipped and reported with their line number.
pub fn read_trace<R: Read>(input: R) -> Result<ParsedTrace> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::Trace(format!("cannot read header: {e}")))?.clone();
    let mut cols = [None; 9];
    for (k, (_, aliases)) in COLUMN_ALIASES.iter().enumerate() {
        cols[k] = headers.iter().position(|h| aliases.iter().any(|a| h.eq_ignore_ascii_case(a)));
    }
    let missing: Vec<&str> = (0..MANDATORY).filter(|&k| cols[k].is_none()).map(|k| CANONICAL_HEADER[k]).collect();
    if !missing.is_empty() {
        return Err(Error::Trace(format!("missing mandatory column(s): {}", missing.join(", "))));
    }

    let mut out = ParsedTrace::default();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.skipped.push(SkippedRow { line, reason: e.to_string() });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, &cols) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.skipped.push(SkippedRow { line, reason }),
        }
    }
    out.records.sort_by_key(|r| r.timestamp_us);
    Ok(out)
}

pub fn parse_trace(path: impl AsRef<Path>) -> Result<ParsedTrace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(file)
}

/// Writes records under the canonical header.
pub fn write_trace<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Trace(format!("write failed: {e}"));
    w.write_record(CANONICAL_HEADER).map_err(wrap)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in records {
        w.write_record([
            format_seconds_us(r.timestamp_us),
            r.length.to_string(),
            r.src_port.to_string(),
            r.dst_port.to_string(),
            r.direction.to_string(),
            opt(r.rtp_payload_type.map(|v| v.to_string())),
            opt(r.rtp_ssrc.map(|v| v.to_string())),
            opt(r.rtp_timestamp.map(|v| v.to_string())),
            opt(r.rtp_marker.map(|v| u8::from(v).to_string())),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Trace(format!("write failed: {e}")))
}

pub fn save_trace(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(records, std::io::BufWriter::new(file))
}

/// Which packet instant becomes the trace timestamp on export.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportTime {
    /// When the sender emitted the packet.
    Generation,
    /// When the receiver got it; undelivered packets are left out.
    Delivery,
}

fn stream_index(label: StreamLabel) -> u16 {
    StreamLabel::ALL.iter().position(|&l| l == label).unwrap_or(0) as u16
}

/// Server and client UDP ports used for a stream in exported traces.
pub fn export_ports(label: StreamLabel, dir: Direction) -> (u16, u16) {
    let server = 50_000 + stream_index(label);
    let client = 60_000 + stream_index(label);
    match dir {
        Direction::Downlink => (server, client),
        Direction::Uplink => (client, server),
    }
}

fn export_ssrc(label: StreamLabel) -> Option<u32> {
    match label {
        StreamLabel::SrtpVideo => Some(0x5652_0001),
        StreamLabel::SrtpAudio => Some(0x5652_0002),
        _ => None,
    }
}

/// Converts simulated packets into trace records. Video packets carry the
/// RTP timestamp `frame_id · 90000 / fps` and the marker on each frame's last
/// packet; audio packets carry an SSRC and payload type only.
pub fn records_from_packets(packets: &[Packet], fps: f64, time: ExportTime) -> Vec<TraceRecord> {
    let mut out = Vec::with_capacity(packets.len());
    for (i, p) in packets.iter().enumerate() {
        let t = match time {
            ExportTime::Generation => p.gen_time,
            ExportTime::Delivery => match p.delivery_time {
                Some(t) => t,
                None => continue,
            },
        };
        let (src_port, dst_port) = export_ports(p.stream, p.direction);
        let mut rec = TraceRecord {
            timestamp_us: t.as_micros() as u64,
            length: p.size,
            src_port,
            dst_port,
            direction: p.direction,
            rtp_payload_type: None,
            rtp_ssrc: export_ssrc(p.stream),
            rtp_timestamp: None,
            rtp_marker: None,
        };
        match p.stream {
            StreamLabel::SrtpVideo => {
                let frame = p.frame_id.unwrap_or(0);
                rec.rtp_payload_type = Some(VIDEO_PAYLOAD_TYPE);
                rec.rtp_timestamp = Some(((frame as f64 * RTP_VIDEO_CLOCK_HZ / fps).round() as u64) as u32);
                let next_frame = packets[i + 1..].iter().find(|q| q.is_video()).and_then(|q| q.frame_id);
                rec.rtp_marker = Some(next_frame != p.frame_id);
            }
            StreamLabel::SrtpAudio => rec.rtp_payload_type = Some(AUDIO_PAYLOAD_TYPE),
            _ => {}
        }
        out.push(rec);
    }
    out.sort_by_key(|r| r.timestamp_us);
    out
}

/// Thresholds for labelling flows that carry no RTP fields. A flow is the
/// set of records sharing direction and port pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    /// RTP flows with a mean size at or above this are video.
    pub video_min_size: f64,
    /// Non-RTP video flows also need a mean spacing at or below this.
    pub video_max_gap_ms: f64,
    pub audio_size: (f64, f64),
    pub audio_period_ms: (f64, f64),
    pub stun_size: (f64, f64),
    pub stun_min_period_ms: f64,
    pub dtls_size: (f64, f64),
    pub dtls_period_ms: (f64, f64),
    pub srtcp_size: (f64, f64),
    pub srtcp_period_ms: (f64, f64),
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            video_min_size: 600.0,
            video_max_gap_ms: 2.0,
            audio_size: (60.0, 110.0),
            audio_period_ms: (15.0, 25.0),
            stun_size: (100.0, 140.0),
            stun_min_period_ms: 500.0,
            dtls_size: (150.0, 200.0),
            dtls_period_ms: (2.0, 10.0),
            srtcp_size: (300.0, 600.0),
            srtcp_period_ms: (30.0, 200.0),
        }
    }
}

fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&v)
}

/// Mean size and mean spacing (ms) of a group of records.
fn shape(records: &[TraceRecord], idx: &[usize]) -> (f64, Option<f64>) {
    let size = idx.iter().map(|&i| f64::from(records[i].length)).sum::<f64>() / idx.len() as f64;
    let gap = (idx.len() > 1).then(|| {
        let span = records[idx[idx.len() - 1]].timestamp_us - records[idx[0]].timestamp_us;
        span as f64 / 1e3 / (idx.len() - 1) as f64
    });
    (size, gap)
}

fn heuristic_label(cfg: &ClassifyConfig, size: f64, gap: Option<f64>) -> StreamLabel {
    let Some(gap) = gap else {
        return StreamLabel::GenericUdp;
    };
    if size >= cfg.video_min_size && gap <= cfg.video_max_gap_ms {
        StreamLabel::SrtpVideo
    } else if within(size, cfg.audio_size) && within(gap, cfg.audio_period_ms) {
        StreamLabel::SrtpAudio
    } else if within(size, cfg.stun_size) && gap >= cfg.stun_min_period_ms {
        StreamLabel::Stun
    } else if within(size, cfg.dtls_size) && within(gap, cfg.dtls_period_ms) {
        StreamLabel::Dtls
    } else if within(size, cfg.srtcp_size) && within(gap, cfg.srtcp_period_ms) {
        StreamLabel::Srtcp
    } else {
        StreamLabel::GenericUdp
    }
}

/// Labels every record. Records with an SSRC are grouped by SSRC and split
/// into video and audio by mean size; the rest are grouped into flows and
/// labelled by the size/period rules of `cfg`. Anything unmatched is
/// generic UDP.
pub fn classify_streams(records: &[TraceRecord], cfg: &ClassifyConfig) -> Vec<StreamLabel> {
    let mut labels = vec![StreamLabel::GenericUdp; records.len()];
    let mut rtp: BTreeMap<(Direction, u32), Vec<usize>> = BTreeMap::new();
    let mut flows: BTreeMap<(Direction, u16, u16), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        match r.rtp_ssrc {
            Some(ssrc) => rtp.entry((r.direction, ssrc)).or_default().push(i),
            None => flows.entry(r.flow()).or_default().push(i),
        }
    }
    for idx in rtp.values() {
        let (size, _) = shape(records, idx);
        let label = if size >= cfg.video_min_size { StreamLabel::SrtpVideo } else { StreamLabel::SrtpAudio };
        for &i in idx {
            labels[i] = label;
        }
    }
    for idx in flows.values() {
        let (size, gap) = shape(records, idx);
        let label = heuristic_label(cfg, size, gap);
        for &i in idx {
            labels[i] = label;
        }
    }
    labels
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub label: StreamLabel,
    pub direction: Direction,
    pub packet_count: usize,
    pub mean_packet_size: f64,
    pub mean_inter_packet_ms: f64,
    /// Bytes over the span between the stream's first and last record.
    pub load_mbps: f64,
}

/// Per (direction, label) statistics. Streams with a single record report
/// zero spacing and load.
pub fn summarize_streams(records: &[TraceRecord], labels: &[StreamLabel]) -> Vec<StreamSummary> {
    let mut groups: BTreeMap<(Direction, StreamLabel), Vec<usize>> = BTreeMap::new();
    for (i, (r, &l)) in records.iter().zip(labels).enumerate() {
        groups.entry((r.direction, l)).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|((direction, label), idx)| {
            let (size, gap) = shape(records, &idx);
            let bytes: u64 = idx.iter().map(|&i| u64::from(records[i].length)).sum();
            let span_us = records[idx[idx.len() - 1]].timestamp_us - records[idx[0]].timestamp_us;
            StreamSummary {
                label,
                direction,
                packet_count: idx.len(),
                mean_packet_size: size,
                mean_inter_packet_ms: gap.unwrap_or(0.0),
                load_mbps: if span_us == 0 { 0.0 } else { bytes as f64 * 8.0 / span_us as f64 },
            }
        })
        .collect()
}

/// Records of one stream, in order.
pub fn select(records: &[TraceRecord], labels: &[StreamLabel], dir: Direction, label: StreamLabel) -> Vec<TraceRecord> {
    records.iter().zip(labels).filter(|(r, &l)| l == label && r.direction == dir).map(|(r, _)| r.clone()).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Batches {
    /// `(first index, packet count)` of each batch.
    pub bounds: Vec<(usize, usize)>,
    /// Spacing between consecutive batch starts, ms.
    pub start_spacings_ms: Vec<f64>,
}

impl Batches {
    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    /// Mean of the spacings falling in the most populated bin of width
    /// [`SPACING_BIN_MS`]; the lowest such bin wins ties.
    pub fn modal_spacing_ms(&self) -> Option<f64> {
        let mut bins: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
        for &s in &self.start_spacings_ms {
            let e = bins.entry((s / SPACING_BIN_MS).floor() as u64).or_default();
            e.0 += 1;
            e.1 += s;
        }
        let (_, &(n, sum)) = bins.iter().rev().max_by_key(|(_, (n, _))| *n)?;
        Some(sum / n as f64)
    }
}

/// Splits sorted records into batches wherever the gap to the previous record
/// exceeds `gap_threshold`.
pub fn detect_batches(records: &[TraceRecord], gap_threshold: Duration) -> Batches {
    let thr = u64::try_from(gap_threshold.as_micros()).unwrap_or(u64::MAX);
    let mut out = Batches::default();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].timestamp_us - records[i - 1].timestamp_us > thr {
            if i > start {
                out.bounds.push((start, i - start));
            }
            start = i;
        }
    }
    out.start_spacings_ms = out
        .bounds
        .windows(2)
        .map(|w| (records[w[1].0].timestamp_us - records[w[0].0].timestamp_us) as f64 / 1e3)
        .collect();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceFrame {
    pub rtp_timestamp: u32,
    pub first_us: u64,
    pub last_us: u64,
    pub bytes: u64,
    pub packets: usize,
    pub batches: usize,
}

impl TraceFrame {
    pub fn assembly_delay_ms(&self) -> f64 {
        (self.last_us - self.first_us) as f64 / 1e3
    }
}

/// Groups consecutive records sharing an RTP timestamp into frames, counting
/// batches inside each frame with `gap_threshold`.
pub fn reconstruct_frames(records: &[TraceRecord], gap_threshold: Duration) -> Result<Vec<TraceFrame>> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    if records.iter().any(|r| r.rtp_timestamp.is_none()) {
        return Err(Error::Trace(
            "frame reconstruction needs RTP timestamps; this trace has none, use batch-level analysis instead".into(),
        ));
    }
    let thr = u64::try_from(gap_threshold.as_micros()).unwrap_or(u64::MAX);
    let mut frames: Vec<TraceFrame> = Vec::new();
    let mut prev_us = 0;
    for r in records {
        let ts = r.rtp_timestamp.expect("checked above");
        match frames.last_mut() {
            Some(f) if f.rtp_timestamp == ts => {
                f.batches += usize::from(r.timestamp_us - prev_us > thr);
                f.last_us = r.timestamp_us;
                f.bytes += u64::from(r.length);
                f.packets += 1;
            }
            _ => frames.push(TraceFrame {
                rtp_timestamp: ts,
                first_us: r.timestamp_us,
                last_us: r.timestamp_us,
                bytes: u64::from(r.length),
                packets: 1,
                batches: 1,
            }),
        }
        prev_us = r.timestamp_us;
    }
    Ok(frames)
}

/// Spacing between the first packets of consecutive frames, ms.
pub fn inter_frame_ms(frames: &[TraceFrame]) -> Vec<f64> {
    frames.windows(2).map(|w| (w[1].first_us - w[0].first_us) as f64 / 1e3).collect()
}

pub fn assembly_delays(frames: &[TraceFrame]) -> Vec<f64> {
    frames.iter().map(TraceFrame::assembly_delay_ms).collect()
}

/// Interarrival jitter in ms, smoothed as `J += (|D| - J) / 16` over
/// consecutive records. The sender-side spacing comes from RTP timestamps
/// at `clock_hz` when every record has one, otherwise from the mean arrival
/// spacing.
pub fn interarrival_jitter(records: &[TraceRecord], clock_hz: f64) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::Trace("jitter needs at least two records".into()));
    }
    let arrivals: Vec<f64> = records.iter().map(|r| r.timestamp_us as f64 / 1e3).collect();
    let sent: Option<Vec<f64>> =
        records.iter().map(|r| r.rtp_timestamp.map(|t| f64::from(t) * 1e3 / clock_hz)).collect();
    let nominal = (arrivals[arrivals.len() - 1] - arrivals[0]) / (arrivals.len() - 1) as f64;
    let mut j = 0.0;
    for i in 1..arrivals.len() {
        let send_gap = sent.as_ref().map_or(nominal, |s| s[i] - s[i - 1]);
        let d = (arrivals[i] - arrivals[i - 1]) - send_gap;
        j += (d.abs() - j) / 16.0;
    }
    Ok(j)
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeOptions {
    pub gap_threshold: Duration,
    /// Fail instead of skipping frame analysis when RTP timestamps are missing.
    pub require_frames: bool,
    pub classify: ClassifyConfig,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { gap_threshold: DEFAULT_GAP_THRESHOLD, require_frames: false, classify: ClassifyConfig::default() }
    }
}

/// Everything derived from a trace's downlink video stream.
#[derive(Clone, Debug, Serialize)]
pub struct TraceAnalysis {
    pub record_count: usize,
    pub streams: Vec<StreamSummary>,
    pub video_packet_sizes: Vec<f64>,
    pub video_inter_packet_ms: Vec<f64>,
    pub batches: Batches,
    pub batch_sizes: Vec<f64>,
    /// Present when the video stream carries RTP timestamps.
    pub frames: Option<Vec<TraceFrame>>,
    pub jitter_ms: Option<f64>,
}

impl TraceAnalysis {
    pub fn inter_frame_ms(&self) -> Vec<f64> {
        self.frames.as_deref().map(inter_frame_ms).unwrap_or_default()
    }

    pub fn assembly_delays_ms(&self) -> Vec<f64> {
        self.frames.as_deref().map(assembly_delays).unwrap_or_default()
    }

    pub fn frame_sizes(&self) -> Vec<f64> {
        self.frames.iter().flatten().map(|f| f.bytes as f64).collect()
    }

    pub fn batches_per_frame(&self) -> Vec<f64> {
        self.frames.iter().flatten().map(|f| f.batches as f64).collect()
    }

    /// Frame rate implied by the mean inter-frame time.
    pub fn recovered_fps(&self) -> Option<f64> {
        crate::metrics::mean(&self.inter_frame_ms()).filter(|&m| m > 0.0).map(|m| 1e3 / m)
    }
}

pub fn analyze(records: &[TraceRecord], opts: &AnalyzeOptions) -> Result<TraceAnalysis> {
    let labels = classify_streams(records, &opts.classify);
    let streams = summarize_streams(records, &labels);
    let video = select(records, &labels, Direction::Downlink, StreamLabel::SrtpVideo);
    let has_ts = !video.is_empty() && video.iter().all(|r| r.rtp_timestamp.is_some());
    if opts.require_frames && !has_ts {
        return Err(Error::Trace(
            "frame analysis requested but the video stream has no RTP timestamps; use batch-level analysis instead"
                .into(),
        ));
    }
    let frames = if has_ts { Some(reconstruct_frames(&video, opts.gap_threshold)?) } else { None };
    let batches = detect_batches(&video, opts.gap_threshold);
    let clock = if has_ts { RTP_VIDEO_CLOCK_HZ } else { 1.0 };
    Ok(TraceAnalysis {
        record_count: records.len(),
        streams,
        video_packet_sizes: video.iter().map(|r| f64::from(r.length)).collect(),
        video_inter_packet_ms: video.windows(2).map(|w| (w[1].timestamp_us - w[0].timestamp_us) as f64 / 1e3).collect(),
        batch_sizes: batches.bounds.iter().map(|&(_, n)| n as f64).collect(),
        batches,
        frames,
        jitter_ms: interarrival_jitter(&video, clock).ok(),
    })
}

/// Count of records per label, for checking that labels partition a trace.
pub fn label_counts(labels: &[StreamLabel]) -> HashMap<StreamLabel, usize> {
    let mut m = HashMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}
