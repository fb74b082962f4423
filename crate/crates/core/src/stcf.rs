//! Spatiotemporal correlation filter denoising.
//!
//! An event is signal when enough of its patch neighbors fired recently:
//! the timestamp back-end counts neighbors with `t_now - SAE <= tau_tw`, the
//! voltage back-end counts neighbors whose cell voltage still sits at or
//! above `V_tw = f(tau_tw)`. With zero variability and no droop the two
//! decisions agree exactly, by monotonicity of the decay curve.

use thiserror::Error;

use crate::array_sim::{AnalogArray, AnalogArrayConfig, Architecture, ArrayError};
use crate::cell_model::{DecayModel, ModelError, VariabilitySpec};
use crate::digital_surface::{PlaneSel, SaeMap, SurfaceError};
use crate::events::{EventRecord, Label, Polarity, PolarityMode};

#[derive(Debug, Error)]
pub enum StcfError {
    #[error("config error: {0}")]
    Config(String),
    #[error("labeled stream required for {0}")]
    MissingLabels(&'static str),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Timestamp,
    Voltage,
}

/// How polarity enters the support decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StcfPolarity {
    /// One merged plane for both polarities.
    #[default]
    Merged,
    /// Per-polarity planes; support counted on the event's own plane.
    Split,
    /// Per-polarity planes; a neighbor supports if either plane is fresh.
    SplitMergedDecision,
}

impl StcfPolarity {
    fn polarity_mode(self) -> PolarityMode {
        match self {
            StcfPolarity::Merged => PolarityMode::Merged,
            _ => PolarityMode::Split,
        }
    }

    fn plane_sel(self, p: Polarity) -> PlaneSel {
        match self {
            StcfPolarity::Merged | StcfPolarity::SplitMergedDecision => PlaneSel::Merged,
            StcfPolarity::Split => PlaneSel::Plane(p),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StcfConfig {
    /// Patch radius; the patch is `(2r+1) x (2r+1)` around the event.
    pub radius: usize,
    /// Correlation time window, microseconds.
    pub tau_tw_us: u64,
    /// Minimum supporting neighbors for a signal classification.
    pub threshold: u32,
    pub backend: Backend,
    pub polarity: StcfPolarity,
    /// Write events into state even when classified noise.
    pub write_noise: bool,
}

impl Default for StcfConfig {
    fn default() -> Self {
        Self {
            radius: 1,
            tau_tw_us: 24_000,
            threshold: 2,
            backend: Backend::Timestamp,
            polarity: StcfPolarity::default(),
            write_noise: true,
        }
    }
}

impl StcfConfig {
    pub fn max_support(&self) -> u32 {
        let side = 2 * self.radius as u32 + 1;
        side * side - 1
    }

    pub fn validate(&self) -> Result<(), StcfError> {
        if self.radius == 0 {
            return Err(StcfError::Config("patch radius must be >= 1".into()));
        }
        if self.tau_tw_us == 0 {
            return Err(StcfError::Config("correlation window must be > 0".into()));
        }
        if self.threshold > self.max_support() {
            return Err(StcfError::Config(format!(
                "threshold {} exceeds max support {} for radius {}",
                self.threshold,
                self.max_support(),
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Noise,
    Signal,
}

/// Filter state: the digital SAE map or the analog array plus its voltage
/// threshold.
pub enum StcfState {
    Timestamp(SaeMap),
    Voltage { array: AnalogArray, v_tw: f64 },
}

impl StcfState {
    /// Digital reference state.
    pub fn timestamp(width: u16, height: u16, config: &StcfConfig) -> Self {
        StcfState::Timestamp(SaeMap::new(width, height, config.polarity.polarity_mode()))
    }

    /// Analog state on a 3D array; `V_tw` derives from the decay curve at the
    /// configured window.
    pub fn voltage(
        width: u16,
        height: u16,
        config: &StcfConfig,
        model: &DecayModel,
        variability: &VariabilitySpec,
    ) -> Result<Self, StcfError> {
        let mut cfg = AnalogArrayConfig::new(width, height, Architecture::ThreeD);
        cfg.polarity_mode = config.polarity.polarity_mode();
        Self::voltage_with(cfg, config, model, variability)
    }

    /// Analog state on an explicit array configuration (e.g. 2D with droop).
    pub fn voltage_with(
        mut array_config: AnalogArrayConfig,
        config: &StcfConfig,
        model: &DecayModel,
        variability: &VariabilitySpec,
    ) -> Result<Self, StcfError> {
        array_config.polarity_mode = config.polarity.polarity_mode();
        let v_tw = model.v_threshold_for_window(config.tau_tw_us as f64)?;
        let array = AnalogArray::new(array_config, model, variability)?;
        Ok(StcfState::Voltage { array, v_tw })
    }

    fn dims(&self) -> (u16, u16) {
        match self {
            StcfState::Timestamp(map) => (map.width(), map.height()),
            StcfState::Voltage { array, .. } => (array.config().width, array.config().height),
        }
    }

    fn supports(&self, x: u16, y: u16, ev: &EventRecord, config: &StcfConfig) -> bool {
        match self {
            StcfState::Timestamp(map) => match map.stored(x, y, config.polarity.plane_sel(ev.p)) {
                None => false,
                // checked_sub: a future-stamped neighbor (unsorted input)
                // never supports, matching the voltage back-end's rejection
                // of time regressions.
                Some(t) => ev.t_us.checked_sub(t).is_some_and(|dt| dt <= config.tau_tw_us),
            },
            StcfState::Voltage { array, v_tw } => {
                let plane = match config.polarity {
                    StcfPolarity::Merged | StcfPolarity::SplitMergedDecision => None,
                    StcfPolarity::Split => Some(ev.p),
                };
                array.voltage_unchecked(x, y, plane, ev.t_us) >= *v_tw
            }
        }
    }

    fn write(&mut self, ev: &EventRecord) -> Result<(), StcfError> {
        match self {
            StcfState::Timestamp(map) => map.sae_write(ev)?,
            StcfState::Voltage { array, .. } => array.write_event(ev)?,
        }
        Ok(())
    }
}

/// Classifies one event against state reflecting all earlier events, then
/// writes it into the state (noise events too, unless `write_noise` is off).
/// Returns the decision and the support count.
pub fn classify_event(state: &mut StcfState, ev: &EventRecord, config: &StcfConfig) -> Result<(Classification, u32), StcfError> {
    let (width, height) = state.dims();
    if ev.x >= width || ev.y >= height {
        return Err(StcfError::Surface(SurfaceError::OutOfBounds { x: ev.x, y: ev.y, width, height }));
    }
    let r = config.radius as i64;
    let mut support = 0u32;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx == 0 && dy == 0 {
                continue; // the cell's own history never supports itself
            }
            let x = ev.x as i64 + dx;
            let y = ev.y as i64 + dy;
            if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
                continue;
            }
            if state.supports(x as u16, y as u16, ev, config) {
                support += 1;
            }
        }
    }
    let class = if support >= config.threshold { Classification::Signal } else { Classification::Noise };
    if config.write_noise || class == Classification::Signal {
        state.write(ev)?;
    }
    Ok((class, support))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl ConfusionCounts {
    fn record(&mut self, label: Label, class: Classification) {
        match (label, class) {
            (Label::Signal, Classification::Signal) => self.true_positives += 1,
            (Label::Noise, Classification::Signal) => self.false_positives += 1,
            (Label::Noise, Classification::Noise) => self.true_negatives += 1,
            (Label::Signal, Classification::Noise) => self.false_negatives += 1,
        }
    }

    pub fn tpr(&self) -> f64 {
        let p = self.true_positives + self.false_negatives;
        if p == 0 {
            0.0
        } else {
            self.true_positives as f64 / p as f64
        }
    }

    pub fn fpr(&self) -> f64 {
        let n = self.false_positives + self.true_negatives;
        if n == 0 {
            0.0
        } else {
            self.false_positives as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: u32,
    pub fpr: f64,
    pub tpr: f64,
}

/// Outcome of a denoise run: per-event decisions and support counts, the
/// confusion matrix when labels were present, and ROC/AUC after a sweep.
#[derive(Debug, Clone, Default)]
pub struct DenoiseOutcome {
    pub decisions: Vec<Classification>,
    pub supports: Vec<u32>,
    pub confusion: Option<ConfusionCounts>,
    pub roc: Vec<RocPoint>,
    pub auc: Option<f64>,
}

/// Single event-driven pass; returns the outcome and the events classified
/// signal. The confusion matrix is filled when every event carries a label.
pub fn denoise_stream(
    events: &[EventRecord],
    config: &StcfConfig,
    state: &mut StcfState,
) -> Result<(DenoiseOutcome, Vec<EventRecord>), StcfError> {
    config.validate()?;
    let mut outcome = DenoiseOutcome::default();
    outcome.decisions.reserve(events.len());
    outcome.supports.reserve(events.len());
    let mut confusion = ConfusionCounts::default();
    let mut all_labeled = true;
    let mut filtered = Vec::new();
    for ev in events {
        let (class, support) = classify_event(state, ev, config)?;
        outcome.decisions.push(class);
        outcome.supports.push(support);
        match ev.label {
            Some(label) => confusion.record(label, class),
            None => all_labeled = false,
        }
        if class == Classification::Signal {
            filtered.push(*ev);
        }
    }
    if all_labeled && !events.is_empty() {
        outcome.confusion = Some(confusion);
    }
    Ok((outcome, filtered))
}

/// Sweeps the support threshold over `0..=max_support`, producing one
/// (FPR, TPR) point per threshold and the trapezoidal AUC with the (0,0) and
/// (1,1) endpoints appended. Requires a fully labeled stream.
///
/// With `write_noise` on (the default) state evolution is decision-free, so a
/// single pass collects every support count; otherwise each threshold replays
/// the stream against a fresh state from the factory.
pub fn roc_curve<F>(
    events: &[EventRecord],
    config: &StcfConfig,
    mut state_factory: F,
) -> Result<DenoiseOutcome, StcfError>
where
    F: FnMut() -> Result<StcfState, StcfError>,
{
    config.validate()?;
    if events.is_empty() || events.iter().any(|e| e.label.is_none()) {
        return Err(StcfError::MissingLabels("roc_curve"));
    }
    let mut roc = Vec::new();
    let mut base_outcome = None;
    if config.write_noise {
        let mut state = state_factory()?;
        let (outcome, _) = denoise_stream(events, config, &mut state)?;
        for th in 0..=config.max_support() {
            let mut confusion = ConfusionCounts::default();
            for (ev, &support) in events.iter().zip(&outcome.supports) {
                let class = if support >= th { Classification::Signal } else { Classification::Noise };
                confusion.record(ev.label.unwrap(), class);
            }
            roc.push(RocPoint { threshold: th, fpr: confusion.fpr(), tpr: confusion.tpr() });
        }
        base_outcome = Some(outcome);
    } else {
        for th in 0..=config.max_support() {
            let cfg = StcfConfig { threshold: th, ..config.clone() };
            let mut state = state_factory()?;
            let (outcome, _) = denoise_stream(events, &cfg, &mut state)?;
            let confusion = outcome.confusion.expect("stream fully labeled");
            roc.push(RocPoint { threshold: th, fpr: confusion.fpr(), tpr: confusion.tpr() });
        }
    }
    let auc = auc_trapezoid(&roc);
    let mut outcome = base_outcome.unwrap_or_default();
    outcome.roc = roc;
    outcome.auc = Some(auc);
    Ok(outcome)
}

/// Trapezoidal area under the (FPR, TPR) points, endpoints appended.
pub fn auc_trapezoid(points: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: u64, x: u16, y: u16) -> EventRecord {
        EventRecord::new(t, x, y, Polarity::On)
    }

    fn lev(t: u64, x: u16, y: u16, label: Label) -> EventRecord {
        EventRecord::labeled(t, x, y, Polarity::On, label)
    }

    #[test]
    fn first_event_has_no_support() {
        let config = StcfConfig { threshold: 1, ..Default::default() };
        let mut state = StcfState::timestamp(16, 16, &config);
        let (class, support) = classify_event(&mut state, &ev(0, 8, 8), &config).unwrap();
        assert_eq!(support, 0);
        assert_eq!(class, Classification::Noise);
    }

    #[test]
    fn three_fresh_neighbors_pass_th3() {
        // The worked example: three valid historical events in the patch.
        let config = StcfConfig { threshold: 3, ..Default::default() };
        let mut state = StcfState::timestamp(16, 16, &config);
        for (i, (x, y)) in [(7u16, 7u16), (8, 7), (9, 8)].iter().enumerate() {
            classify_event(&mut state, &ev(i as u64 * 100, *x, *y), &config).unwrap();
        }
        let (class, support) = classify_event(&mut state, &ev(1_000, 8, 8), &config).unwrap();
        assert_eq!(support, 3);
        assert_eq!(class, Classification::Signal);
    }

    #[test]
    fn window_boundary_is_inclusive() {
        let config = StcfConfig { threshold: 1, ..Default::default() };
        let mut state = StcfState::timestamp(8, 8, &config);
        classify_event(&mut state, &ev(0, 3, 3), &config).unwrap();
        // exactly tau_tw later: still supported
        let (class, _) = classify_event(&mut state, &ev(config.tau_tw_us, 4, 3), &config).unwrap();
        assert_eq!(class, Classification::Signal);
        // one microsecond past the window: noise (timestamp backend)
        let mut state = StcfState::timestamp(8, 8, &config);
        classify_event(&mut state, &ev(0, 3, 3), &config).unwrap();
        let (class, _) = classify_event(&mut state, &ev(config.tau_tw_us + 1, 4, 3), &config).unwrap();
        assert_eq!(class, Classification::Noise);
    }

    #[test]
    fn voltage_backend_agrees_at_boundary_without_variability() {
        let model = DecayModel::cmem_20ff();
        let config = StcfConfig { threshold: 1, backend: Backend::Voltage, ..Default::default() };
        for offset in [0i64, 1] {
            let mut state = StcfState::voltage(8, 8, &config, &model, &VariabilitySpec::zero(0)).unwrap();
            classify_event(&mut state, &ev(0, 3, 3), &config).unwrap();
            let t = (config.tau_tw_us as i64 + offset) as u64;
            let (class, _) = classify_event(&mut state, &ev(t, 4, 3), &config).unwrap();
            let expect = if offset <= 0 { Classification::Signal } else { Classification::Noise };
            assert_eq!(class, expect, "offset {offset}");
        }
    }

    #[test]
    fn self_history_excluded() {
        let config = StcfConfig { threshold: 1, ..Default::default() };
        let mut state = StcfState::timestamp(8, 8, &config);
        classify_event(&mut state, &ev(0, 3, 3), &config).unwrap();
        let (class, support) = classify_event(&mut state, &ev(100, 3, 3), &config).unwrap();
        assert_eq!(support, 0, "repeated noise at one pixel gains no self-support");
        assert_eq!(class, Classification::Noise);
    }

    #[test]
    fn th_zero_passes_everything() {
        let config = StcfConfig { threshold: 0, ..Default::default() };
        let events: Vec<EventRecord> = (0..20).map(|i| ev(i * 10, (i % 4) as u16, (i / 4 % 4) as u16)).collect();
        let mut state = StcfState::timestamp(8, 8, &config);
        let (_, filtered) = denoise_stream(&events, &config, &mut state).unwrap();
        assert_eq!(filtered, events);
        // idempotent: refiltering the output changes nothing
        let mut state2 = StcfState::timestamp(8, 8, &config);
        let (_, refiltered) = denoise_stream(&filtered, &config, &mut state2).unwrap();
        assert_eq!(refiltered, filtered);
    }

    #[test]
    fn threshold_monotonicity() {
        let events: Vec<EventRecord> = (0..60)
            .map(|i| ev(i * 1_000, (i % 6) as u16 + 1, ((i / 2) % 6) as u16 + 1))
            .collect();
        let mut prev_signals = u64::MAX;
        for th in 0..=8u32 {
            let config = StcfConfig { threshold: th, ..Default::default() };
            let mut state = StcfState::timestamp(8, 8, &config);
            let (outcome, _) = denoise_stream(&events, &config, &mut state).unwrap();
            let signals = outcome.decisions.iter().filter(|&&c| c == Classification::Signal).count() as u64;
            assert!(signals <= prev_signals, "raising th never adds signal decisions");
            prev_signals = signals;
        }
    }

    #[test]
    fn perfect_separation_gives_auc_one() {
        // Every signal event gains at least one fresh neighbor (the leading
        // noise write seeds the cluster); noise events sit isolated at
        // support 0, so signal and noise scores never overlap.
        let mut events = vec![lev(500, 9, 10, Label::Noise)];
        for i in 0..30u64 {
            events.push(lev(1_000 + i, (10 + i % 3) as u16, (10 + i / 10) as u16, Label::Signal));
        }
        events.push(lev(500_000, 40, 40, Label::Noise));
        events.push(lev(900_000, 2, 44, Label::Noise));
        events.sort_by_key(|e| e.t_us);
        let config = StcfConfig { threshold: 1, ..Default::default() };
        let outcome = roc_curve(&events, &config, || Ok(StcfState::timestamp(64, 64, &config))).unwrap();
        let auc = outcome.auc.unwrap();
        assert!((auc - 1.0).abs() < 1e-12, "auc = {auc}");
    }

    #[test]
    fn shuffled_labels_give_half_auc() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut aucs = Vec::new();
        for seed in 0..4u64 {
            let (header, signal) = crate::events::generate_synthetic(&crate::events::SceneConfig {
                width: 24,
                height: 24,
                duration_us: 400_000,
                edge_speed_px_s: 240.0,
                seed,
                ..Default::default()
            })
            .unwrap();
            let (_, mut events) = crate::events::inject_noise(&signal, &header, 20.0, seed).unwrap();
            let mut labels: Vec<Option<Label>> = events.iter().map(|e| e.label).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            labels.shuffle(&mut rng);
            for (e, l) in events.iter_mut().zip(labels) {
                e.label = l;
            }
            let config = StcfConfig::default();
            let outcome = roc_curve(&events, &config, || Ok(StcfState::timestamp(24, 24, &config))).unwrap();
            aucs.push(outcome.auc.unwrap());
        }
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        assert!((mean - 0.5).abs() < 0.05, "shuffled-label AUCs {aucs:?}");
    }

    #[test]
    fn noiseless_edge_recall_above_95_percent() {
        // Edge events support each other along the sweep: neighbors in the
        // previous column fired one crossing interval earlier, well inside
        // the 24 ms window.
        let (header, events) = crate::events::generate_synthetic(&crate::events::SceneConfig {
            width: 32,
            height: 32,
            duration_us: 500_000,
            edge_speed_px_s: 256.0,
            ..Default::default()
        })
        .unwrap();
        let config = StcfConfig { threshold: 1, ..Default::default() };
        let mut state = StcfState::timestamp(header.width, header.height, &config);
        let (outcome, _) = denoise_stream(&events, &config, &mut state).unwrap();
        let recall = outcome.confusion.unwrap().tpr();
        assert!(recall > 0.95, "recall = {recall}");
    }

    #[test]
    fn pure_noise_mostly_rejected() {
        // Sparse Poisson noise: the chance of 2+ patch neighbors inside the
        // window is far below 0.1 (binomial bound on 8 neighbors).
        let header = crate::events::StreamHeader::new(64, 64, 2_000_000);
        let (_, events) = crate::events::inject_noise(&[], &header, 1.0, 11).unwrap();
        let config = StcfConfig { threshold: 2, ..Default::default() };
        let mut state = StcfState::timestamp(64, 64, &config);
        let (outcome, _) = denoise_stream(&events, &config, &mut state).unwrap();
        let fpr = outcome.confusion.unwrap().fpr();
        assert!(fpr < 0.1, "fpr = {fpr}");
    }

    #[test]
    fn roc_requires_labels() {
        let config = StcfConfig::default();
        let events = vec![ev(0, 1, 1)];
        let err = roc_curve(&events, &config, || Ok(StcfState::timestamp(8, 8, &config))).unwrap_err();
        assert!(matches!(err, StcfError::MissingLabels(_)));
    }

    #[test]
    fn threshold_exceeding_patch_rejected() {
        let config = StcfConfig { radius: 1, threshold: 9, ..Default::default() };
        assert!(matches!(config.validate(), Err(StcfError::Config(_))));
    }
}
