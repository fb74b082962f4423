//! Shared fixtures for the pipeline benchmarks.

use tsisc_core::events::{generate_synthetic, inject_noise, EventRecord, SceneConfig, StreamHeader};

/// QVGA-scale labeled stream: wrapping edge sweep plus Poisson noise.
pub fn qvga_stream(duration_us: u64, noise_hz_per_px: f64) -> (StreamHeader, Vec<EventRecord>) {
    let scene = SceneConfig {
        width: 320,
        height: 240,
        duration_us,
        edge_speed_px_s: 640.0,
        jitter_sigma_us: 100.0,
        seed: 7,
        ..Default::default()
    };
    let (header, signal) = generate_synthetic(&scene).expect("bench scene");
    inject_noise(&signal, &header, noise_hz_per_px, 8).expect("bench noise")
}
