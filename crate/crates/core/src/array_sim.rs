//! Event-driven simulation of the analog pixel-array time-surface.
//!
//! Two architectures: 3D (each pixel writes its cell through a dedicated
//! vertical bond; no cell ever disturbs another) and 2D crossbar (cells share
//! write word lines per row and write bit lines per column). In 2D mode a
//! write half-selects every row mate: their word line opens and stored charge
//! bleeds into the inactive bit line, modeled as one multiplicative droop
//! factor `exp(-T_p/tau_on)` per pulse. Column mates get a fixed `delta_v`
//! coupled in (0 by default).
//!
//! State is per cell only (last write time, sampled decay parameters, droop
//! factor); voltages are evaluated lazily at read time, so replaying a stream
//! needs memory proportional to the array, not the event count.

use thiserror::Error;

use crate::cell_model::{sample_cell, DecayModel, ModelError, VariabilitySpec};
use crate::events::{EventRecord, Polarity, PolarityMode};
use crate::surface::Surface;

const EMPTY: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum ArrayError {
    #[error("event at ({x},{y}) out of bounds for {width}x{height}")]
    OutOfBounds { x: u16, y: u16, width: u16, height: u16 },
    #[error("time regression: event at {t} precedes latest processed time {latest}")]
    TimeRegression { t: u64, latest: u64 },
    #[error("read at {t} precedes latest processed time {latest}")]
    ReadInPast { t: u64, latest: u64 },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Architecture {
    /// Per-pixel vertical write path; no half-select disturbances.
    #[default]
    ThreeD,
    /// Crossbar with shared row/column lines; half-select droop applies.
    TwoD,
}

/// Half-select disturbance parameters (2D mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSelectParams {
    /// Write pulse duration in nanoseconds.
    pub pulse_ns: f64,
    /// On-state discharge time constant of the open switch, nanoseconds.
    pub tau_on_ns: f64,
    /// Fixed voltage coupled into column mates per write (volts).
    pub delta_v: f64,
}

impl Default for HalfSelectParams {
    fn default() -> Self {
        Self { pulse_ns: 5.0, tau_on_ns: 100.0, delta_v: 0.0 }
    }
}

impl HalfSelectParams {
    /// Multiplicative droop per half-select pulse on a row mate.
    pub fn droop_factor(&self) -> f64 {
        (-self.pulse_ns / self.tau_on_ns).exp()
    }
}

#[derive(Debug, Clone)]
pub struct AnalogArrayConfig {
    pub width: u16,
    pub height: u16,
    pub polarity_mode: PolarityMode,
    pub architecture: Architecture,
    pub half_select: HalfSelectParams,
    /// Record one (event index, dt, dV) entry per disturbed cell. Off by
    /// default: a 2D write disturbs a whole row and column, so per-event
    /// records grow with stream length times array side.
    pub record_events: bool,
    /// Cap on recorded disturbance entries; overflow is counted, not stored.
    pub record_limit: usize,
    /// First half-select histogram bin width (microseconds).
    pub histogram_bin_us: u64,
    pub histogram_bins: usize,
}

impl AnalogArrayConfig {
    pub fn new(width: u16, height: u16, architecture: Architecture) -> Self {
        Self {
            width,
            height,
            polarity_mode: PolarityMode::Merged,
            architecture,
            half_select: HalfSelectParams::default(),
            record_events: false,
            record_limit: 1_000_000,
            histogram_bin_us: 1_000,
            histogram_bins: 100,
        }
    }
}

/// One recorded half-select disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSelectEvent {
    /// Index of the aggressor write in the processed stream.
    pub event_index: u64,
    /// Elapsed time since the victim's own last write, microseconds.
    pub dt_us: u64,
    /// Instantaneous voltage lost by the victim.
    pub dv_volts: f64,
}

/// Histogram of first half-select times (elapsed since the victim's write).
/// Row and column disturbances both count; a write whose cell is rewritten
/// before any disturbance contributes no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width_us: u64,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
    pub sum_dt_us: u128,
}

impl Histogram {
    fn new(bin_width_us: u64, bins: usize) -> Self {
        Self { bin_width_us, counts: vec![0; bins], overflow: 0, total: 0, sum_dt_us: 0 }
    }

    fn record(&mut self, dt_us: u64) {
        let bin = (dt_us / self.bin_width_us) as usize;
        match self.counts.get_mut(bin) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
        self.total += 1;
        self.sum_dt_us += dt_us as u128;
    }

    pub fn mean_dt_us(&self) -> Option<f64> {
        (self.total > 0).then(|| self.sum_dt_us as f64 / self.total as f64)
    }

    /// Fraction of entries in bins fully below `dt_us`.
    pub fn fraction_below(&self, dt_us: u64) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let full_bins = (dt_us / self.bin_width_us) as usize;
        let below: u64 = self.counts.iter().take(full_bins).sum();
        below as f64 / self.total as f64
    }
}

/// Aggregate half-select statistics; only 2D mode produces entries.
#[derive(Debug, Clone)]
pub struct HalfSelectStats {
    pub events: Vec<HalfSelectEvent>,
    /// Per-event records beyond the configured cap (counted, not stored).
    pub dropped_records: u64,
    pub first_half_select: Histogram,
    pub row_disturb_count: u64,
    pub column_disturb_count: u64,
}

impl HalfSelectStats {
    fn new(config: &AnalogArrayConfig) -> Self {
        Self {
            events: Vec::new(),
            dropped_records: 0,
            first_half_select: Histogram::new(config.histogram_bin_us, config.histogram_bins),
            row_disturb_count: 0,
            column_disturb_count: 0,
        }
    }

    fn record(&mut self, limit: usize, entry: HalfSelectEvent) {
        if self.events.len() < limit {
            self.events.push(entry);
        } else {
            self.dropped_records += 1;
        }
    }
}

struct Plane {
    last_write: Vec<u64>,
    droop: Vec<f64>,
    /// Compact per-cell decay parameters (a1, tau1, a2, tau2, b).
    cells: Vec<[f64; 5]>,
    /// Pending first-half-select tracking: write time awaiting its first
    /// disturbance, or EMPTY.
    pending_hs: Vec<u64>,
}

impl Plane {
    fn new(n: usize, nominal: &DecayModel, spec: &VariabilitySpec, index_base: u64) -> Result<Self, ModelError> {
        let mut cells = Vec::with_capacity(n);
        for i in 0..n {
            let m = sample_cell(nominal, spec, index_base + i as u64)?;
            cells.push([m.a1, m.tau1_us, m.a2, m.tau2_us, m.b]);
        }
        Ok(Self { last_write: vec![EMPTY; n], droop: vec![1.0; n], cells, pending_hs: vec![EMPTY; n] })
    }

    #[inline]
    fn eval_cell(&self, idx: usize, dt_us: u64) -> f64 {
        let [a1, tau1, a2, tau2, b] = self.cells[idx];
        let dt = dt_us as f64;
        a1 * (-dt / tau1).exp() + a2 * (-dt / tau2).exp() + b
    }
}

/// Per-pixel analog state with lazy voltage evaluation.
pub struct AnalogArray {
    config: AnalogArrayConfig,
    v_reset: f64,
    planes: Vec<Plane>,
    latest_t: u64,
    processed: u64,
    stats: HalfSelectStats,
}

impl AnalogArray {
    pub fn new(config: AnalogArrayConfig, nominal: &DecayModel, variability: &VariabilitySpec) -> Result<Self, ArrayError> {
        if config.width == 0 || config.height == 0 {
            return Err(ArrayError::Config("resolution must be at least 1x1".into()));
        }
        if config.half_select.pulse_ns < 0.0 || config.half_select.tau_on_ns <= 0.0 || config.half_select.delta_v < 0.0 {
            return Err(ArrayError::Config("half-select parameters out of range".into()));
        }
        nominal.validate()?;
        let n = config.width as usize * config.height as usize;
        let n_planes = match config.polarity_mode {
            PolarityMode::Merged => 1,
            PolarityMode::Split => 2,
        };
        let planes = (0..n_planes)
            .map(|p| Plane::new(n, nominal, variability, (p * n) as u64))
            .collect::<Result<Vec<_>, _>>()?;
        let stats = HalfSelectStats::new(&config);
        Ok(Self { config, v_reset: nominal.v_reset, planes, latest_t: 0, processed: 0, stats })
    }

    pub fn config(&self) -> &AnalogArrayConfig {
        &self.config
    }

    pub fn v_reset(&self) -> f64 {
        self.v_reset
    }

    pub fn latest_t(&self) -> u64 {
        self.latest_t
    }

    pub fn stats(&self) -> &HalfSelectStats {
        &self.stats
    }

    fn plane_index(&self, p: Polarity) -> usize {
        match self.config.polarity_mode {
            PolarityMode::Merged => 0,
            PolarityMode::Split => p.as_u8() as usize,
        }
    }

    #[inline]
    fn idx(&self, x: u16, y: u16) -> usize {
        y as usize * self.config.width as usize + x as usize
    }

    /// Applies one event write. In 2D mode every other cell on the target's
    /// row is droop-multiplied and every other cell on its column loses
    /// `delta_v`; disturbance statistics are recorded for non-empty victims.
    /// Split polarity mode keeps one physical crossbar per polarity, so
    /// disturbances stay within the written plane.
    pub fn write_event(&mut self, ev: &EventRecord) -> Result<(), ArrayError> {
        let (w, h) = (self.config.width, self.config.height);
        if ev.x >= w || ev.y >= h {
            return Err(ArrayError::OutOfBounds { x: ev.x, y: ev.y, width: w, height: h });
        }
        if ev.t_us < self.latest_t {
            return Err(ArrayError::TimeRegression { t: ev.t_us, latest: self.latest_t });
        }
        let event_index = self.processed;
        let plane_i = self.plane_index(ev.p);
        let target = self.idx(ev.x, ev.y);

        if self.config.architecture == Architecture::TwoD {
            let g = self.config.half_select.droop_factor();
            let delta_v = self.config.half_select.delta_v;
            let record = self.config.record_events;
            let limit = self.config.record_limit;
            let plane = &mut self.planes[plane_i];
            // Green case: row mates share the active word line.
            let row_base = ev.y as usize * w as usize;
            for x in 0..w as usize {
                let idx = row_base + x;
                if idx == target || plane.last_write[idx] == EMPTY {
                    continue;
                }
                let dt = ev.t_us - plane.last_write[idx];
                let dv = plane.droop[idx] * plane.eval_cell(idx, dt) * (1.0 - g);
                plane.droop[idx] *= g;
                self.stats.row_disturb_count += 1;
                if record {
                    self.stats.record(limit, HalfSelectEvent { event_index, dt_us: dt, dv_volts: dv });
                }
                if plane.pending_hs[idx] != EMPTY {
                    self.stats.first_half_select.record(ev.t_us - plane.pending_hs[idx]);
                    plane.pending_hs[idx] = EMPTY;
                }
            }
            // Blue case: column mates share the active bit line; capacitive
            // coupling bleeds a fixed delta_v (default 0).
            for y in 0..h as usize {
                let idx = y * w as usize + ev.x as usize;
                if idx == target || plane.last_write[idx] == EMPTY {
                    continue;
                }
                let dt = ev.t_us - plane.last_write[idx];
                if delta_v > 0.0 {
                    let f = plane.eval_cell(idx, dt);
                    let v = plane.droop[idx] * f;
                    let dv = delta_v.min(v);
                    plane.droop[idx] = if f > 0.0 { ((v - dv) / f).max(0.0) } else { 0.0 };
                    if record {
                        self.stats.record(limit, HalfSelectEvent { event_index, dt_us: dt, dv_volts: dv });
                    }
                }
                self.stats.column_disturb_count += 1;
                if plane.pending_hs[idx] != EMPTY {
                    self.stats.first_half_select.record(ev.t_us - plane.pending_hs[idx]);
                    plane.pending_hs[idx] = EMPTY;
                }
            }
        }

        let plane = &mut self.planes[plane_i];
        plane.last_write[target] = ev.t_us;
        plane.droop[target] = 1.0;
        plane.pending_hs[target] = if self.config.architecture == Architecture::TwoD { ev.t_us } else { EMPTY };
        self.latest_t = self.latest_t.max(ev.t_us);
        self.processed += 1;
        Ok(())
    }

    /// Lazy per-cell voltage at `t_read`: `droop * f_cell(t_read - last_write)`,
    /// clamped to `[0, V_reset]`; never-written cells read 0.
    pub fn voltage_at(&self, x: u16, y: u16, plane: Option<Polarity>, t_read: u64) -> Result<f64, ArrayError> {
        if x >= self.config.width || y >= self.config.height {
            return Err(ArrayError::OutOfBounds { x, y, width: self.config.width, height: self.config.height });
        }
        if t_read < self.latest_t {
            return Err(ArrayError::ReadInPast { t: t_read, latest: self.latest_t });
        }
        Ok(self.voltage_unchecked(x, y, plane, t_read))
    }

    #[inline]
    pub(crate) fn voltage_unchecked(&self, x: u16, y: u16, plane: Option<Polarity>, t_read: u64) -> f64 {
        let idx = self.idx(x, y);
        let read_plane = |p: &Plane| -> f64 {
            let lw = p.last_write[idx];
            if lw == EMPTY {
                return 0.0;
            }
            let v = p.droop[idx] * p.eval_cell(idx, t_read - lw);
            v.clamp(0.0, self.v_reset)
        };
        match (plane, self.config.polarity_mode) {
            (Some(pol), PolarityMode::Split) => read_plane(&self.planes[pol.as_u8() as usize]),
            (Some(_), PolarityMode::Merged) | (None, PolarityMode::Merged) => read_plane(&self.planes[0]),
            (None, PolarityMode::Split) => self.planes.iter().map(read_plane).fold(0.0, f64::max),
        }
    }

    /// Full-array voltage surface at `t_read`. `plane = None` reads the merged
    /// view (freshest polarity in split mode).
    pub fn read_surface(&self, t_read: u64, plane: Option<Polarity>) -> Result<Surface, ArrayError> {
        if t_read < self.latest_t {
            return Err(ArrayError::ReadInPast { t: t_read, latest: self.latest_t });
        }
        let mut out = Surface::new(self.config.width as usize, self.config.height as usize);
        for y in 0..self.config.height {
            for x in 0..self.config.width {
                out.set(x as usize, y as usize, self.voltage_unchecked(x, y, plane, t_read));
            }
        }
        Ok(out)
    }

    /// Streams events and read instants in time order, producing one surface
    /// per read time. Events at exactly a read instant are written first.
    pub fn replay<I>(&mut self, events: I, read_times: &[u64]) -> Result<Vec<Surface>, ArrayError>
    where
        I: IntoIterator<Item = EventRecord>,
    {
        let mut surfaces = Vec::with_capacity(read_times.len());
        let mut reads = read_times.iter().copied().peekable();
        for ev in events {
            while let Some(&r) = reads.peek() {
                if r < ev.t_us {
                    surfaces.push(self.read_surface(r, None)?);
                    reads.next();
                } else {
                    break;
                }
            }
            self.write_event(&ev)?;
        }
        for r in reads {
            surfaces.push(self.read_surface(r, None)?);
        }
        Ok(surfaces)
    }
}

/// Replays a stream through a 2D array and returns the distribution of first
/// half-select times.
pub fn first_half_select_histogram(
    events: &[EventRecord],
    config: AnalogArrayConfig,
    nominal: &DecayModel,
    variability: &VariabilitySpec,
) -> Result<Histogram, ArrayError> {
    if config.architecture != Architecture::TwoD {
        return Err(ArrayError::Config("first half-select histogram requires the 2D architecture".into()));
    }
    let mut array = AnalogArray::new(config, nominal, variability)?;
    for ev in events {
        array.write_event(ev)?;
    }
    Ok(array.stats.first_half_select)
}
