//! Property tests for the stream formats, surface semantics, variability
//! sampling, filtering, and the fit/eval identity.

use proptest::prelude::*;

use tsisc_core::cell_model::{self, DecayModel, VariabilitySpec};
use tsisc_core::digital_surface::{PlaneSel, SaeMap};
use tsisc_core::events::{
    self, generate_synthetic, inject_noise, read_stream, write_stream, EventRecord, Label, Polarity, PolarityMode,
    ReadOptions, SceneConfig, StreamFormat, StreamHeader,
};
use tsisc_core::stcf::{denoise_stream, Classification, StcfConfig, StcfState};

fn arb_polarity() -> impl Strategy<Value = Polarity> {
    prop_oneof![Just(Polarity::Off), Just(Polarity::On)]
}

fn arb_label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Noise), Just(Label::Signal)]
}

/// Sorted in-bounds stream over a small sensor, with or without labels.
fn arb_stream(max_len: usize) -> impl Strategy<Value = (StreamHeader, Vec<EventRecord>)> {
    (2u16..24, 2u16..24, proptest::bool::ANY).prop_flat_map(move |(w, h, labeled)| {
        let event = (0u64..1_000_000, 0..w, 0..h, arb_polarity(), arb_label()).prop_map(
            move |(t_us, x, y, p, label)| EventRecord {
                t_us,
                x,
                y,
                p,
                label: labeled.then_some(label),
            },
        );
        proptest::collection::vec(event, 0..max_len).prop_map(move |mut events| {
            events.sort_by_key(|e| e.t_us);
            let duration = events.last().map_or(0, |e| e.t_us);
            let header = StreamHeader {
                width: w,
                height: h,
                duration_us: duration,
                polarity_mode: PolarityMode::Merged,
                has_labels: labeled,
            };
            (header, events)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Binary round-trip is bit-exact for any valid stream.
    #[test]
    fn binary_round_trip_bit_exact((header, events) in arb_stream(200)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.evb");
        write_stream(&header, &events, &path, StreamFormat::Binary).unwrap();
        let (h2, e2) = read_stream(&path, StreamFormat::Binary, ReadOptions::default()).unwrap();
        prop_assert_eq!(&h2, &header);
        prop_assert_eq!(&e2, &events);
        let bytes = std::fs::read(&path).unwrap();
        let path2 = dir.path().join("s2.evb");
        write_stream(&h2, &e2, &path2, StreamFormat::Binary).unwrap();
        prop_assert_eq!(bytes, std::fs::read(&path2).unwrap());
    }

    /// CSV preserves every field at microsecond precision.
    #[test]
    fn csv_round_trip((header, events) in arb_stream(120)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_stream(&header, &events, &path, StreamFormat::Csv).unwrap();
        let (h2, e2) = read_stream(&path, StreamFormat::Csv, ReadOptions::default()).unwrap();
        prop_assert_eq!(&h2, &header);
        prop_assert_eq!(&e2, &events);
    }

    /// Noise injection keeps the stream sorted and the signal subsequence
    /// equals the (clean) input.
    #[test]
    fn noise_injection_preserves_signal((header, events) in arb_stream(150), rate in 0.0f64..400.0, seed in any::<u64>()) {
        let header = StreamHeader { duration_us: header.duration_us.max(10_000), ..header };
        // Clean input: ground truth before any noise is added.
        let clean: Vec<EventRecord> = events.iter().map(|e| EventRecord { label: None, ..*e }).collect();
        let (_, out) = inject_noise(&clean, &header, rate, seed).unwrap();
        prop_assert!(out.windows(2).all(|w| w[0].t_us <= w[1].t_us));
        let signal: Vec<EventRecord> = out.iter().filter(|e| e.label == Some(Label::Signal)).copied().collect();
        let relabeled: Vec<EventRecord> = clean.iter().map(|e| EventRecord { label: Some(Label::Signal), ..*e }).collect();
        prop_assert_eq!(signal, relabeled);
    }

    /// Per-pixel time-surface values never increase as the query time advances
    /// over a frozen map.
    #[test]
    fn global_ts_monotone_in_query_time((_, events) in arb_stream(80), dt1 in 0u64..50_000, dt2 in 0u64..50_000) {
        let mut map = SaeMap::new(24, 24, PolarityMode::Merged);
        for ev in &events {
            let ev = EventRecord { x: ev.x % 24, y: ev.y % 24, ..*ev };
            map.sae_write(&ev).unwrap();
        }
        let t0 = map.latest_t();
        let (a, b) = (t0 + dt1.min(dt2), t0 + dt1.max(dt2));
        let sa = map.global_ts(a, 10_000.0, PlaneSel::Merged).unwrap();
        let sb = map.global_ts(b, 10_000.0, PlaneSel::Merged).unwrap();
        for (va, vb) in sa.iter().zip(sb.iter()) {
            prop_assert!(vb <= va);
            prop_assert!((0.0..=1.0).contains(&va));
        }
    }

    /// Patch center is exactly 1 for the triggering event.
    #[test]
    fn patch_center_is_one((_, events) in arb_stream(60), r in 1usize..4) {
        let mut map = SaeMap::new(24, 24, PolarityMode::Merged);
        for ev in &events {
            map.sae_write(ev).unwrap();
            let patch = map.patch_ts(ev, r, 10_000.0).unwrap();
            prop_assert_eq!(patch.center_value(), 1.0);
            prop_assert!(patch.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    /// Split mode: writes to one polarity never alter the other's surface.
    #[test]
    fn polarity_planes_isolated((_, events) in arb_stream(80)) {
        let mut map = SaeMap::new(24, 24, PolarityMode::Split);
        let mut on_only = SaeMap::new(24, 24, PolarityMode::Split);
        for ev in &events {
            map.sae_write(ev).unwrap();
            if ev.p == Polarity::On {
                on_only.sae_write(ev).unwrap();
            }
        }
        let t = map.latest_t().max(on_only.latest_t());
        let full = map.global_ts(t, 10_000.0, PlaneSel::Plane(Polarity::On)).unwrap();
        let only = on_only.global_ts(t, 10_000.0, PlaneSel::Plane(Polarity::On)).unwrap();
        prop_assert_eq!(full.max_abs_diff(&only), 0.0);
    }

    /// Raising the threshold never converts a noise decision to signal.
    #[test]
    fn threshold_monotone((_, events) in arb_stream(150), th in 0u32..8) {
        let run = |threshold: u32| {
            let config = StcfConfig { threshold, ..Default::default() };
            let mut state = StcfState::timestamp(24, 24, &config);
            denoise_stream(&events, &config, &mut state).unwrap().0.decisions
        };
        let lo = run(th);
        let hi = run(th + 1);
        for (a, b) in lo.iter().zip(hi.iter()) {
            if *b == Classification::Signal {
                prop_assert_eq!(*a, Classification::Signal);
            }
        }
    }

    /// Fitting noiseless samples of a well-conditioned model reproduces its
    /// curve within 1e-6 V across the sampled range.
    #[test]
    fn fit_recovers_noiseless_models(
        a1_frac in 0.25f64..0.75,
        tau1 in 3_000.0f64..12_000.0,
        ratio in 2.5f64..6.0,
        b in 0.0f64..0.25,
    ) {
        let tau2 = tau1 * ratio;
        let amp = 1.0 - b;
        let truth = DecayModel::new(amp * a1_frac, tau1, amp * (1.0 - a1_frac), tau2, b, 1.0, "truth").unwrap();
        let samples: Vec<(f64, f64)> = (0..=12).map(|i| {
            let dt = i as f64 * 3_000.0;
            (dt, truth.eval(dt).unwrap())
        }).collect();
        let (fitted, report) = cell_model::fit(&samples).unwrap();
        prop_assert!(report.mse < 1e-10, "mse {}", report.mse);
        for i in 0..=72 {
            let dt = i as f64 * 500.0;
            let err = (fitted.eval(dt).unwrap() - truth.eval(dt).unwrap()).abs();
            prop_assert!(err < 1e-6, "err {err} at {dt}");
        }
    }

    /// Sampled cells satisfy the model contract and the reset pin.
    #[test]
    fn sampled_cells_valid(cell in 0u64..5_000, seed in any::<u64>()) {
        let nominal = DecayModel::cmem_20ff();
        let spec = VariabilitySpec { seed, ..VariabilitySpec::calibrated(0) };
        let m = cell_model::sample_cell(&nominal, &spec, cell).unwrap();
        m.validate().unwrap();
        prop_assert!((m.eval(0.0).unwrap() - 1.0).abs() <= 1e-9);
    }

    /// Jitter-free synthetic streams match the closed-form crossing times.
    #[test]
    fn synthetic_edge_matches_closed_form(w in 2u16..12, h in 2u16..12, lane_us in 50u64..500) {
        let speed = 1.0e6 / lane_us as f64;
        let config = SceneConfig {
            width: w,
            height: h,
            duration_us: lane_us * w as u64,
            edge_speed_px_s: speed,
            ..Default::default()
        };
        let (_, events) = generate_synthetic(&config).unwrap();
        prop_assert_eq!(events.len(), w as usize * h as usize);
        for ev in &events {
            prop_assert_eq!(ev.t_us, ev.x as u64 * lane_us);
        }
    }
}

/// Filtered output of a th=0 run is the input itself (everything passes).
#[test]
fn th_zero_identity_on_synthetic() {
    let (header, events) = generate_synthetic(&SceneConfig {
        width: 16,
        height: 16,
        duration_us: 100_000,
        edge_speed_px_s: 640.0,
        ..Default::default()
    })
    .unwrap();
    let config = StcfConfig { threshold: 0, ..Default::default() };
    let mut state = StcfState::timestamp(header.width, header.height, &config);
    let (_, filtered) = denoise_stream(&events, &config, &mut state).unwrap();
    assert_eq!(filtered, events);
}

/// Replay streams events straight from an iterator: a million events pass
/// through while resident state stays one array plus the requested surfaces.
#[test]
fn replay_streams_million_events() {
    use tsisc_core::array_sim::{AnalogArray, AnalogArrayConfig, Architecture};
    use tsisc_core::cell_model::DecayModel;

    let nominal = DecayModel::cmem_20ff();
    let config = AnalogArrayConfig::new(320, 240, Architecture::ThreeD);
    let mut array = AnalogArray::new(config, &nominal, &VariabilitySpec::zero(0)).unwrap();
    // Deterministic on-the-fly generator; never materialized as a Vec.
    let events = (0..1_000_000u64).map(|i| {
        let x = ((i * 2_654_435_761) % 320) as u16;
        let y = ((i * 40_503) % 240) as u16;
        EventRecord::new(i, x, y, Polarity::On)
    });
    let surfaces = array.replay(events, &[500_000, 999_999]).unwrap();
    assert_eq!(surfaces.len(), 2);
    assert!(surfaces[1].max() > 0.99, "freshest writes read near V_reset");
    assert!(array.stats().events.is_empty(), "no per-event state accumulates");
}

/// Streams, maps, arrays and models are value objects that can cross threads;
/// parameter sweeps parallelize over independent instances.
#[test]
fn core_types_are_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<EventRecord>();
    check::<StreamHeader>();
    check::<SaeMap>();
    check::<tsisc_core::array_sim::AnalogArray>();
    check::<DecayModel>();
    check::<tsisc_core::surface::Surface>();
    check::<tsisc_core::cost_model::CostInputs>();
}

/// Unlabeled originals pick up the signal label when noise is injected.
#[test]
fn noise_injection_labels_unlabeled_input() {
    let header = StreamHeader::new(8, 8, 100_000);
    let input = vec![EventRecord::new(50, 1, 1, Polarity::On)];
    let (hdr, out) = events::inject_noise(&input, &header, 50.0, 3).unwrap();
    assert!(hdr.has_labels);
    assert!(out.iter().all(|e| e.label.is_some()));
    assert_eq!(out.iter().filter(|e| e.label == Some(Label::Signal)).count(), 1);
}
