use std::time::Duration;

use proptest::prelude::*;
use tempfile::TempDir;

use wifivr::metrics::{buffer_busy_fraction, buffer_occupancy, ecdf, to_ms};
use wifivr::phy::single_packet_latency;
use wifivr::report::{summarize_runs, QosThresholds, Report};
use wifivr::trace::{parse_trace, records_from_packets, save_trace, ExportTime};
use wifivr::traffic::Direction;
use wifivr::{run_simulation, SimConfig, Simulation};

fn config(fps: f64, tau_ms: f64, per: f64, mcs: u8) -> SimConfig {
    let mut cfg = SimConfig { duration_s: 1.0, warmup_ms: 100.0, ..SimConfig::default() };
    cfg.traffic.fps = fps;
    cfg.traffic.inter_batch_time_ms = tau_ms;
    cfg.mac.per = per;
    cfg.phy.mcs_index = mcs;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn engine_invariants(
        fps in prop::sample::select(vec![30.0, 60.0, 72.0, 90.0, 120.0]),
        tau in 0.5f64..8.0,
        per in 0.0f64..0.4,
        mcs in 5u8..=11,
        seed in any::<u64>(),
    ) {
        let cfg = config(fps, tau, per, mcs);
        let r = Simulation::new(&cfg, seed).unwrap().capture_packets().run();
        let m = &r.metrics;
        prop_assert!(m.counts.is_conserved(), "{:?}", m.counts);
        prop_assert!(m.airtime_busy <= m.window);
        prop_assert!(m.ampdu_sizes.iter().all(|&n| n >= 1 && n as usize <= cfg.mac.max_ampdu));

        let occ = buffer_occupancy(m);
        let busy = buffer_busy_fraction(m);
        prop_assert!((0.0..=1.0).contains(&occ) && (0.0..=1.0).contains(&busy));

        // A delivered packet at least spends one exchange on the air: the
        // single-packet latency without backoff, less the AIFS it may have
        // skipped by arriving just before a TXOP began.
        let latency = single_packet_latency(cfg.traffic.packet_size_bytes, &cfg.phy, &cfg.mac, false).unwrap();
        let floor = latency.total - latency.aifs;
        prop_assert!(m.dl_packet_delays.iter().all(|&d| d >= floor));

        for p in r.delivered.iter().filter(|p| p.direction == Direction::Downlink) {
            let t = p.delivery_time.unwrap();
            prop_assert!(t >= p.gen_time);
            prop_assert!(p.retx_count <= cfg.mac.max_retx);
        }

        // A frame is never faster than its slowest packet's own delay.
        if let (Some(vf), Some(pkt)) = (m.vf_delays.iter().max(), m.dl_packet_delays.iter().min()) {
            prop_assert!(*vf >= *pkt);
        }
    }

    #[test]
    fn ecdf_of_delays_is_a_distribution(seed in any::<u64>()) {
        let r = run_simulation(&config(90.0, 5.56, 0.1, 11), seed).unwrap();
        let curve = ecdf(&to_ms(&r.metrics.dl_packet_delays));
        prop_assert!(curve.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        prop_assert_eq!(curve.last().map(|p| p.1), Some(1.0));
    }
}

#[test]
fn heavier_load_needs_more_airtime() {
    let airtime = |bitrate: f64| {
        let mut cfg = config(60.0, 5.56, 0.1, 11);
        cfg.traffic.bitrate_mbps = bitrate;
        let r = run_simulation(&cfg, 11).unwrap();
        r.metrics.airtime_busy
    };
    assert!(airtime(150.0) > airtime(20.0));
}

#[test]
fn config_file_round_trip() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("cfg.toml");
    let cfg = config(72.0, 3.0, 0.05, 9);
    cfg.save(&path).unwrap();
    assert_eq!(SimConfig::load(&path).unwrap(), cfg);
}

#[test]
fn report_file_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(60.0, 5.56, 0.1, 11);
    let runs: Vec<_> = [1, 2].iter().map(|&s| run_simulation(&cfg, s).unwrap()).collect();
    let report = Report::for_simulation(
        vec!["simulate".into()],
        &cfg,
        &summarize_runs(&runs).unwrap(),
        &QosThresholds::default(),
    );
    let path = tmp.path().join("summary.json");
    std::fs::write(&path, report.to_json()).unwrap();
    assert_eq!(Report::load(&path).unwrap(), report);
}

#[test]
fn delivered_trace_file_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(90.0, 5.56, 0.1, 11);
    let r = Simulation::new(&cfg, 4).unwrap().capture_packets().run();
    let records = records_from_packets(&r.delivered, cfg.traffic.fps, ExportTime::Delivery);
    assert!(!records.is_empty());
    let path = tmp.path().join("trace.csv");
    save_trace(&records, &path).unwrap();
    let parsed = parse_trace(&path).unwrap();
    assert!(parsed.skipped.is_empty());
    assert_eq!(parsed.records, records);
    assert!(parsed.records.windows(2).all(|w| w[0].timestamp_us <= w[1].timestamp_us));
    assert!(parsed.records.last().unwrap().timestamp_us <= Duration::from_secs(1).as_micros() as u64);
}
