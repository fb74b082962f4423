//! Exact digital reference: SAE timestamp map, exponential time-surface,
//! event-centered patches, and finite-width counter wrap emulation.
//!
//! The SAE stores the most recent event timestamp per pixel (per polarity in
//! split mode). A time-surface value is `exp(-(t - SAE)/tau)`, 1 for a pixel
//! written at the query instant and approaching 0 with age; never-written
//! pixels read 0. With a finite counter width configured, stored values wrap
//! modulo `2^n_T` counter ticks, reproducing the overflow artifact of real
//! timestamp memories: a sufficiently old pixel aliases back to "fresh".

use thiserror::Error;

use crate::events::{EventRecord, Polarity, PolarityMode};
use crate::surface::Surface;

/// Default decay constant for reference surfaces (10 ms).
pub const DEFAULT_TAU_US: f64 = 10_000.0;

const EMPTY: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("event at ({x},{y}) out of bounds for {width}x{height}")]
    OutOfBounds { x: u16, y: u16, width: u16, height: u16 },
    #[error("query time {t} precedes latest written timestamp {latest} (clock inversion)")]
    ClockInversion { t: u64, latest: u64 },
    #[error("stale center: event at ({x},{y}) t={t} is not the most recent write (SAE={sae})")]
    StaleCenter { x: u16, y: u16, t: u64, sae: u64 },
    #[error("config error: {0}")]
    Config(String),
}

/// Finite timestamp-counter emulation: stored values are
/// `floor(t / tick_us) mod 2^bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterSpec {
    pub bits: u32,
    pub tick_us: u64,
}

impl CounterSpec {
    pub fn wrap_period_us(&self) -> u64 {
        (1u64 << self.bits).saturating_mul(self.tick_us)
    }
}

/// Which polarity plane a read addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlaneSel {
    /// Merged map: the single plane. Split map: freshest of both planes.
    #[default]
    Merged,
    Plane(Polarity),
}

/// Surface of Active Events: per-pixel (and per-polarity when split) most
/// recent event timestamp, with optional finite-counter wrap emulation.
#[derive(Debug, Clone)]
pub struct SaeMap {
    width: u16,
    height: u16,
    polarity_mode: PolarityMode,
    counter: Option<CounterSpec>,
    planes: Vec<Vec<u64>>,
    latest_t: u64,
    any_written: bool,
}

impl SaeMap {
    pub fn new(width: u16, height: u16, polarity_mode: PolarityMode) -> Self {
        let n_planes = match polarity_mode {
            PolarityMode::Merged => 1,
            PolarityMode::Split => 2,
        };
        Self {
            width,
            height,
            polarity_mode,
            counter: None,
            planes: vec![vec![EMPTY; width as usize * height as usize]; n_planes],
            latest_t: 0,
            any_written: false,
        }
    }

    pub fn with_counter(mut self, counter: CounterSpec) -> Self {
        assert!(counter.bits >= 1 && counter.bits <= 63, "counter bits must be in 1..=63");
        assert!(counter.tick_us > 0, "counter tick must be > 0");
        self.counter = Some(counter);
        self
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn polarity_mode(&self) -> PolarityMode {
        self.polarity_mode
    }

    pub fn latest_t(&self) -> u64 {
        self.latest_t
    }

    fn plane_index(&self, p: Polarity) -> usize {
        match self.polarity_mode {
            PolarityMode::Merged => 0,
            PolarityMode::Split => p.as_u8() as usize,
        }
    }

    fn idx(&self, x: u16, y: u16) -> usize {
        y as usize * self.width as usize + x as usize
    }

    /// Writes the event timestamp into its pixel (and polarity plane).
    pub fn sae_write(&mut self, ev: &EventRecord) -> Result<(), SurfaceError> {
        if ev.x >= self.width || ev.y >= self.height {
            return Err(SurfaceError::OutOfBounds { x: ev.x, y: ev.y, width: self.width, height: self.height });
        }
        let stored = match &self.counter {
            Some(c) => (ev.t_us / c.tick_us) & ((1u64 << c.bits) - 1),
            None => ev.t_us,
        };
        let idx = self.idx(ev.x, ev.y);
        let plane = self.plane_index(ev.p);
        self.planes[plane][idx] = stored;
        self.latest_t = self.latest_t.max(ev.t_us);
        self.any_written = true;
        Ok(())
    }

    /// Raw stored cell value: the timestamp, or the wrapped counter value when
    /// a counter is configured. `None` for never-written cells.
    pub fn stored(&self, x: u16, y: u16, sel: PlaneSel) -> Option<u64> {
        let idx = self.idx(x, y);
        match sel {
            PlaneSel::Plane(p) => {
                let v = self.planes[self.plane_index(p)][idx];
                (v != EMPTY).then_some(v)
            }
            PlaneSel::Merged => self
                .planes
                .iter()
                .map(|pl| pl[idx])
                .filter(|&v| v != EMPTY)
                .max(),
        }
    }

    /// Elapsed microseconds since the stored write, as the counter sees it.
    /// With wrap emulation this is the aliased elapsed time.
    fn elapsed_us(&self, stored: u64, t: u64) -> u64 {
        match &self.counter {
            None => t - stored,
            Some(c) => {
                let mask = (1u64 << c.bits) - 1;
                let now_ticks = (t / c.tick_us) & mask;
                let diff = now_ticks.wrapping_sub(stored) & mask;
                diff * c.tick_us
            }
        }
    }

    fn check_query_time(&self, t: u64) -> Result<(), SurfaceError> {
        if self.any_written && t < self.latest_t {
            return Err(SurfaceError::ClockInversion { t, latest: self.latest_t });
        }
        Ok(())
    }

    /// Time-surface value of one cell at query time `t`.
    pub fn value_at(&self, x: u16, y: u16, sel: PlaneSel, t: u64, tau_us: f64) -> f64 {
        match self.stored(x, y, sel) {
            None => 0.0,
            Some(stored) => match sel {
                PlaneSel::Plane(_) => (-(self.elapsed_us(stored, t) as f64) / tau_us).exp(),
                PlaneSel::Merged => {
                    // Freshest plane wins; with a single plane this is it.
                    let idx = self.idx(x, y);
                    self.planes
                        .iter()
                        .map(|pl| pl[idx])
                        .filter(|&v| v != EMPTY)
                        .map(|s| (-(self.elapsed_us(s, t) as f64) / tau_us).exp())
                        .fold(0.0, f64::max)
                }
            },
        }
    }

    /// Full-array exponential time-surface at query time `t`:
    /// `value(x,y) = exp(-(t - SAE(x,y))/tau)`, 0 for never-written cells.
    pub fn global_ts(&self, t: u64, tau_us: f64, sel: PlaneSel) -> Result<Surface, SurfaceError> {
        if tau_us.is_nan() || tau_us <= 0.0 {
            return Err(SurfaceError::Config(format!("tau {tau_us} must be > 0")));
        }
        self.check_query_time(t)?;
        let mut out = Surface::new(self.width as usize, self.height as usize);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(x as usize, y as usize, self.value_at(x, y, sel, t, tau_us));
            }
        }
        Ok(out)
    }

    /// Event-centered time-surface patch per the patch definition: cell values
    /// `exp(-(t_k - T_k(u,p))/tau)` over a `(2r+1)x(2r+1)` window, polarity
    /// plane of the center event (split mode), out-of-image cells 0.
    pub fn patch_ts(&self, center: &EventRecord, radius: usize, tau_us: f64) -> Result<TimeSurfacePatch, SurfaceError> {
        if tau_us.is_nan() || tau_us <= 0.0 {
            return Err(SurfaceError::Config(format!("tau {tau_us} must be > 0")));
        }
        if center.x >= self.width || center.y >= self.height {
            return Err(SurfaceError::OutOfBounds { x: center.x, y: center.y, width: self.width, height: self.height });
        }
        let sel = match self.polarity_mode {
            PolarityMode::Merged => PlaneSel::Merged,
            PolarityMode::Split => PlaneSel::Plane(center.p),
        };
        let expect = match &self.counter {
            Some(c) => (center.t_us / c.tick_us) & ((1u64 << c.bits) - 1),
            None => center.t_us,
        };
        match self.stored(center.x, center.y, sel) {
            Some(s) if s == expect => {}
            other => {
                return Err(SurfaceError::StaleCenter { x: center.x, y: center.y, t: center.t_us, sae: other.unwrap_or(EMPTY) })
            }
        }
        let side = 2 * radius + 1;
        let mut values = vec![0.0f64; side * side];
        for dy in 0..side {
            for dx in 0..side {
                let x = center.x as i64 + dx as i64 - radius as i64;
                let y = center.y as i64 + dy as i64 - radius as i64;
                if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
                    continue;
                }
                values[dy * side + dx] = self.value_at(x as u16, y as u16, sel, center.t_us, tau_us);
            }
        }
        Ok(TimeSurfacePatch { center: *center, radius, tau_us, values })
    }
}

/// Time-context patch around one event; center value is exactly 1.
#[derive(Debug, Clone)]
pub struct TimeSurfacePatch {
    pub center: EventRecord,
    pub radius: usize,
    pub tau_us: f64,
    /// Row-major `(2r+1) x (2r+1)` values in `[0, 1]`.
    pub values: Vec<f64>,
}

impl TimeSurfacePatch {
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn get(&self, dx: usize, dy: usize) -> f64 {
        self.values[dy * self.side() + dx]
    }

    pub fn center_value(&self) -> f64 {
        self.get(self.radius, self.radius)
    }
}

/// One query instant's wrap errors: pixels whose finite-width surface value
/// differs from the infinite-precision value by more than the tolerance.
#[derive(Debug, Clone)]
pub struct WrapQueryErrors {
    pub t_us: u64,
    pub flagged: Vec<(u16, u16)>,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone)]
pub struct WrapErrorReport {
    pub per_query: Vec<WrapQueryErrors>,
    pub max_abs_error: f64,
}

impl WrapErrorReport {
    pub fn total_flagged(&self) -> usize {
        self.per_query.iter().map(|q| q.flagged.len()).sum()
    }
}

/// Replays a stream through a finite-width SAE map and an infinite-precision
/// one, comparing their time-surfaces at each query instant. Whenever the
/// stream spans more than one wrap period, stale pixels alias back to fresh
/// in the finite-width map and get flagged here.
pub fn wrap_error_demo(
    width: u16,
    height: u16,
    events: &[EventRecord],
    counter: CounterSpec,
    tau_us: f64,
    query_times: &[u64],
    tolerance: f64,
) -> Result<WrapErrorReport, SurfaceError> {
    let mut wrapped = SaeMap::new(width, height, PolarityMode::Merged).with_counter(counter);
    let mut exact = SaeMap::new(width, height, PolarityMode::Merged);
    let mut queries = query_times.to_vec();
    queries.sort_unstable();

    let mut per_query = Vec::with_capacity(queries.len());
    let mut max_abs_error = 0.0f64;
    let mut ev_iter = events.iter().peekable();
    for &q in &queries {
        while let Some(ev) = ev_iter.peek() {
            if ev.t_us <= q {
                wrapped.sae_write(ev)?;
                exact.sae_write(ev)?;
                ev_iter.next();
            } else {
                break;
            }
        }
        let sw = wrapped.global_ts(q, tau_us, PlaneSel::Merged)?;
        let se = exact.global_ts(q, tau_us, PlaneSel::Merged)?;
        let mut flagged = Vec::new();
        let mut q_max = 0.0f64;
        for y in 0..height {
            for x in 0..width {
                let d = (sw.get(x as usize, y as usize) - se.get(x as usize, y as usize)).abs();
                q_max = q_max.max(d);
                if d > tolerance {
                    flagged.push((x, y));
                }
            }
        }
        max_abs_error = max_abs_error.max(q_max);
        per_query.push(WrapQueryErrors { t_us: q, flagged, max_abs_error: q_max });
    }
    Ok(WrapErrorReport { per_query, max_abs_error })
}
