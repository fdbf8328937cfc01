//! Run and trace reports: pooled summaries, QoS verdicts, JSON/CSV output
//! and side-by-side comparison of shared metrics.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::engine::{RunResult, SweepAxis, SweepPoint};
use crate::error::{Error, Result};
use crate::metrics::{self, buffer_busy_fraction, buffer_occupancy, ecdf, summarize, PacketCounts, Summary};
use crate::trace::{StreamSummary, TraceAnalysis};

pub const RTT_THRESHOLD_MS: f64 = 20.0;
pub const JITTER_THRESHOLD_MS: f64 = 15.0;
/// Tolerated packet loss, as a fraction (0.001 %).
pub const LOSS_THRESHOLD: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QosThresholds {
    pub rtt_ms: f64,
    pub jitter_ms: f64,
    pub loss_rate: f64,
}

impl Default for QosThresholds {
    fn default() -> Self {
        Self { rtt_ms: RTT_THRESHOLD_MS, jitter_ms: JITTER_THRESHOLD_MS, loss_rate: LOSS_THRESHOLD }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QosVerdict {
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl QosThresholds {
    /// One verdict per measured quantity; a value passes when strictly below
    /// its threshold.
    pub fn verdicts(&self, rtt_ms: Option<f64>, jitter_ms: Option<f64>, loss_rate: Option<f64>) -> Vec<QosVerdict> {
        [
            ("rtt_ms", rtt_ms, self.rtt_ms),
            ("jitter_ms", jitter_ms, self.jitter_ms),
            ("loss_rate", loss_rate, self.loss_rate),
        ]
        .into_iter()
        .filter_map(|(name, v, thr)| {
            v.map(|value| QosVerdict { metric: name.to_string(), value, threshold: thr, pass: value < thr })
        })
        .collect()
    }
}

/// Statistics pooled over every run of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub seeds: Vec<u64>,
    pub dl_delay_ms: Option<Summary>,
    pub ul_delay_ms: Option<Summary>,
    pub vf_delay_ms: Option<Summary>,
    pub ampdu_size: Option<Summary>,
    /// Means of the per-run values.
    pub airtime: f64,
    pub buffer_occupancy: f64,
    pub buffer_busy: f64,
    pub counts: PacketCounts,
    pub retransmissions: u64,
    pub collisions: u64,
    pub incomplete_frames: u64,
    /// Dropped packets over generated packets.
    pub loss_rate: f64,
}

fn pooled(results: &[RunResult], f: impl Fn(&RunResult) -> Vec<f64>) -> Option<Summary> {
    let all: Vec<f64> = results.iter().flat_map(f).collect();
    summarize(&all).ok()
}

fn mean_of(results: &[RunResult], f: impl Fn(&RunResult) -> f64) -> f64 {
    results.iter().map(f).sum::<f64>() / results.len() as f64
}

pub fn summarize_runs(results: &[RunResult]) -> Result<SimSummary> {
    if results.is_empty() {
        return Err(Error::Empty("no runs to summarize"));
    }
    let mut counts = PacketCounts::default();
    let (mut retx, mut coll, mut incomplete) = (0, 0, 0);
    for r in results {
        let c = r.metrics.counts;
        counts.generated += c.generated;
        counts.delivered += c.delivered;
        counts.dropped_buffer += c.dropped_buffer;
        counts.dropped_retx += c.dropped_retx;
        counts.residual += c.residual;
        retx += r.metrics.retransmissions;
        coll += r.metrics.collisions;
        incomplete += r.metrics.incomplete_frames;
    }
    let dropped = counts.dropped_buffer + counts.dropped_retx;
    Ok(SimSummary {
        seeds: results.iter().map(|r| r.seed).collect(),
        dl_delay_ms: pooled(results, |r| metrics::to_ms(&r.metrics.dl_packet_delays)),
        ul_delay_ms: pooled(results, |r| metrics::to_ms(&r.metrics.ul_packet_delays)),
        vf_delay_ms: pooled(results, |r| metrics::to_ms(&r.metrics.vf_delays)),
        ampdu_size: pooled(results, |r| r.metrics.ampdu_sizes.iter().map(|&n| f64::from(n)).collect()),
        airtime: mean_of(results, |r| metrics::airtime_fraction(&r.metrics, r.metrics.window)),
        buffer_occupancy: mean_of(results, |r| buffer_occupancy(&r.metrics)),
        buffer_busy: mean_of(results, |r| buffer_busy_fraction(&r.metrics)),
        counts,
        retransmissions: retx,
        collisions: coll,
        incomplete_frames: incomplete,
        loss_rate: if counts.generated == 0 { 0.0 } else { dropped as f64 / counts.generated as f64 },
    })
}

impl SimSummary {
    /// Metrics that a trace analysis can also produce, or that a second
    /// simulation can be compared on.
    pub fn comparable(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<f64>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("frame_delay_ms", self.vf_delay_ms.map(|s| s.mean));
        put("dl_packet_delay_ms", self.dl_delay_ms.map(|s| s.mean));
        put("ampdu_size", self.ampdu_size.map(|s| s.mean));
        put("airtime", Some(self.airtime));
        put("buffer_occupancy", Some(self.buffer_occupancy));
        m
    }
}

/// Shared-metric view of a trace analysis.
pub fn trace_comparable(a: &TraceAnalysis) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: Option<f64>| {
        if let Some(v) = v {
            m.insert(k.to_string(), v);
        }
    };
    put("frame_delay_ms", metrics::mean(&a.assembly_delays_ms()));
    put("batch_spacing_ms", a.batches.modal_spacing_ms());
    put("frame_size_bytes", metrics::mean(&a.frame_sizes()));
    put("fps", a.recovered_fps());
    put("video_packet_size_bytes", metrics::mean(&a.video_packet_sizes));
    put("jitter_ms", a.jitter_ms);
    m
}

/// Machine-readable record of one command invocation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: Vec<String>,
    pub config: Option<SimConfig>,
    /// Distribution summaries by metric name.
    pub tables: BTreeMap<String, Summary>,
    pub scalars: BTreeMap<String, f64>,
    pub comparable: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub streams: Vec<StreamSummary>,
    pub qos: Vec<QosVerdict>,
    pub notes: Vec<String>,
    pub outputs: Vec<String>,
}

impl Report {
    pub fn for_simulation(command: Vec<String>, cfg: &SimConfig, s: &SimSummary, qos: &QosThresholds) -> Self {
        let mut tables = BTreeMap::new();
        for (k, v) in [
            ("dl_delay_ms", s.dl_delay_ms),
            ("ul_delay_ms", s.ul_delay_ms),
            ("vf_delay_ms", s.vf_delay_ms),
            ("ampdu_size", s.ampdu_size),
        ] {
            if let Some(v) = v {
                tables.insert(k.to_string(), v);
            }
        }
        let c = s.counts;
        let scalars = BTreeMap::from([
            ("runs".to_string(), s.seeds.len() as f64),
            ("airtime".to_string(), s.airtime),
            ("buffer_occupancy".to_string(), s.buffer_occupancy),
            ("buffer_busy".to_string(), s.buffer_busy),
            ("loss_rate".to_string(), s.loss_rate),
            ("generated".to_string(), c.generated as f64),
            ("delivered".to_string(), c.delivered as f64),
            ("dropped_buffer".to_string(), c.dropped_buffer as f64),
            ("dropped_retx".to_string(), c.dropped_retx as f64),
            ("residual".to_string(), c.residual as f64),
            ("retransmissions".to_string(), s.retransmissions as f64),
            ("collisions".to_string(), s.collisions as f64),
            ("incomplete_frames".to_string(), s.incomplete_frames as f64),
        ]);
        Report {
            command,
            config: Some(cfg.clone()),
            tables,
            scalars,
            comparable: s.comparable(),
            streams: Vec::new(),
            qos: qos.verdicts(None, None, Some(s.loss_rate)),
            notes: vec![
                "percentiles are nearest-rank over samples pooled across all runs".into(),
                "buffer_occupancy is the time-weighted mean AP queue length over its capacity; buffer_busy is the share of time the AP queue is non-empty".into(),
            ],
            outputs: Vec::new(),
        }
    }

    pub fn for_trace(command: Vec<String>, a: &TraceAnalysis, skipped_rows: usize, qos: &QosThresholds) -> Self {
        let mut tables = BTreeMap::new();
        for (k, v) in [
            ("video_packet_size_bytes", a.video_packet_sizes.clone()),
            ("video_inter_packet_ms", a.video_inter_packet_ms.clone()),
            ("batch_spacing_ms", a.batches.start_spacings_ms.clone()),
            ("batch_size_packets", a.batch_sizes.clone()),
            ("frame_size_bytes", a.frame_sizes()),
            ("inter_frame_ms", a.inter_frame_ms()),
            ("assembly_delay_ms", a.assembly_delays_ms()),
            ("batches_per_frame", a.batches_per_frame()),
        ] {
            if let Ok(s) = summarize(&v) {
                tables.insert(k.to_string(), s);
            }
        }
        let mut scalars = BTreeMap::from([
            ("records".to_string(), a.record_count as f64),
            ("skipped_rows".to_string(), skipped_rows as f64),
            ("video_packets".to_string(), a.video_packet_sizes.len() as f64),
            ("batches".to_string(), a.batches.len() as f64),
        ]);
        if let Some(f) = &a.frames {
            scalars.insert("frames".to_string(), f.len() as f64);
        }
        let mut notes = Vec::new();
        if a.frames.is_none() {
            notes.push("no RTP timestamps on the video stream: frame-level metrics omitted".into());
        }
        if skipped_rows > 0 {
            notes.push(format!("{skipped_rows} malformed row(s) skipped"));
        }
        Report {
            command,
            config: None,
            tables,
            scalars,
            comparable: trace_comparable(a),
            streams: a.streams.clone(),
            qos: qos.verdicts(None, a.jitter_ms, None),
            notes,
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Plain-text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if !self.tables.is_empty() {
            s += &format!(
                "{:<26}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}\n",
                "metric", "count", "mean", "p50", "p99", "p99.99", "max"
            );
            for (k, t) in &self.tables {
                s += &format!(
                    "{:<26}{:>10}{:>10.3}{:>10.3}{:>10.3}{:>10.3}{:>10.3}\n",
                    k, t.count, t.mean, t.p50, t.p99, t.p9999, t.max
                );
            }
        }
        for (k, v) in &self.scalars {
            s += &format!("{k:<26}{v:>10.4}\n");
        }
        for st in &self.streams {
            s += &format!(
                "{:<4}{:<14}{:>8} pkts {:>9.2} B {:>9.3} ms {:>9.3} Mbps\n",
                st.direction, st.label, st.packet_count, st.mean_packet_size, st.mean_inter_packet_ms, st.load_mbps
            );
        }
        for q in &self.qos {
            s += &format!(
                "QoS {:<10} {:.6} vs {} -> {}\n",
                q.metric,
                q.value,
                q.threshold,
                if q.pass { "ok" } else { "VIOLATED" }
            );
        }
        for n in &self.notes {
            s += &format!("note: {n}\n");
        }
        s
    }
}

/// Long-format sample dump: `run,seed,metric,value`.
pub fn write_samples<W: Write>(results: &[RunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Trace(format!("sample dump: {e}"));
    w.write_record(["run", "seed", "metric", "value"]).map_err(wrap)?;
    for (i, r) in results.iter().enumerate() {
        let m = &r.metrics;
        let groups: [(&str, Vec<f64>); 4] = [
            ("dl_delay_ms", metrics::to_ms(&m.dl_packet_delays)),
            ("ul_delay_ms", metrics::to_ms(&m.ul_packet_delays)),
            ("vf_delay_ms", metrics::to_ms(&m.vf_delays)),
            ("ampdu_size", m.ampdu_sizes.iter().map(|&n| f64::from(n)).collect()),
        ];
        let (run, seed) = (i.to_string(), r.seed.to_string());
        for (name, values) in groups {
            for v in values {
                w.write_record([run.as_str(), seed.as_str(), name, &v.to_string()]).map_err(wrap)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Trace(format!("sample dump: {e}")))
}

/// ECDF dump: `value,cdf`.
pub fn write_ecdf<W: Write>(samples: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Trace(format!("ecdf dump: {e}"));
    w.write_record(["value", "cdf"]).map_err(wrap)?;
    for (x, p) in ecdf(samples) {
        w.write_record([x.to_string(), p.to_string()]).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Trace(format!("ecdf dump: {e}")))
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub runs: usize,
    pub dl_delay_mean_ms: Option<f64>,
    pub dl_delay_p9999_ms: Option<f64>,
    pub vf_delay_mean_ms: Option<f64>,
    pub ampdu_mean: Option<f64>,
    pub airtime: f64,
    pub buffer_occupancy: f64,
    pub buffer_busy: f64,
    pub loss_rate: f64,
}

/// Groups sweep points by value, in first-appearance order.
pub fn sweep_table(axis: SweepAxis, points: &[SweepPoint]) -> Result<Vec<SweepRow>> {
    let mut values: Vec<f64> = Vec::new();
    for p in points {
        if !values.contains(&p.value) {
            values.push(p.value);
        }
    }
    values
        .into_iter()
        .map(|v| {
            let runs: Vec<RunResult> = points.iter().filter(|p| p.value == v).map(|p| p.result.clone()).collect();
            let s = summarize_runs(&runs)?;
            Ok(SweepRow {
                axis: axis.as_str().to_string(),
                value: v,
                runs: runs.len(),
                dl_delay_mean_ms: s.dl_delay_ms.map(|x| x.mean),
                dl_delay_p9999_ms: s.dl_delay_ms.map(|x| x.p9999),
                vf_delay_mean_ms: s.vf_delay_ms.map(|x| x.mean),
                ampdu_mean: s.ampdu_size.map(|x| x.mean),
                airtime: s.airtime,
                buffer_occupancy: s.buffer_occupancy,
                buffer_busy: s.buffer_busy,
                loss_rate: s.loss_rate,
            })
        })
        .collect()
}

pub fn write_sweep_table<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let wrap = |e: csv::Error| Error::Trace(format!("sweep table: {e}"));
    w.write_record([
        "axis",
        "value",
        "runs",
        "dl_delay_mean_ms",
        "dl_delay_p9999_ms",
        "vf_delay_mean_ms",
        "ampdu_mean",
        "airtime",
        "buffer_occupancy",
        "buffer_busy",
        "loss_rate",
    ])
    .map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Trace(format!("sweep table: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub left: Option<f64>,
    pub right: Option<f64>,
    /// `left - right`, when both sides have the metric.
    pub difference: Option<f64>,
    /// Difference relative to the right-hand value.
    pub relative: Option<f64>,
}

/// Side-by-side table over the union of metric names. A metric missing on
/// either side yields empty difference cells rather than an error.
pub fn compare(left: &BTreeMap<String, f64>, right: &BTreeMap<String, f64>) -> Vec<ComparisonRow> {
    let mut names: Vec<&String> = left.keys().chain(right.keys()).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .map(|k| {
            let (l, r) = (left.get(k).copied(), right.get(k).copied());
            let difference = l.zip(r).map(|(l, r)| l - r);
            let relative = l.zip(r).and_then(|(l, r)| match (l - r, r) {
                (0.0, _) => Some(0.0),
                (_, 0.0) => None,
                (d, r) => Some(d / r.abs()),
            });
            ComparisonRow { metric: k.clone(), left: l, right: r, difference, relative }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |v| format!("{v:.6}"))
}

pub fn comparison_text(rows: &[ComparisonRow]) -> String {
    let mut s = format!("{:<26}{:>14}{:>14}{:>14}{:>12}\n", "metric", "left", "right", "difference", "relative");
    for r in rows {
        let rel = r.relative.map_or_else(|| "N/A".to_string(), |v| format!("{:+.2}%", v * 100.0));
        s += &format!(
            "{:<26}{:>14}{:>14}{:>14}{:>12}\n",
            r.metric,
            cell(r.left),
            cell(r.right),
            cell(r.difference),
            rel
        );
    }
    s
}

pub fn write_comparison<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Trace(format!("comparison: {e}"));
    w.write_record(["metric", "left", "right", "difference", "relative"]).map_err(wrap)?;
    for r in rows {
        let c = |v: Option<f64>| v.map_or_else(|| "N/A".to_string(), |v| v.to_string());
        w.write_record([r.metric.clone(), c(r.left), c(r.right), c(r.difference), c(r.relative)]).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Trace(format!("comparison: {e}")))
}
