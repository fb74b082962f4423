//! Nonlinear least-squares fitting of the retention curve to voltage traces.
//!
//! Free parameters are `(A1, tau1, tau2, b)` with `A2 = V(0) - A1 - b` pinned.
//! The optimizer is a derivative-free Nelder-Mead simplex with deterministic
//! initialization (tau1 = 5 ms, tau2 = 30 ms, b = min(V), A1 = A2 =
//! (V(0)-b)/2) followed by fixed restart cycles, converging when the relative
//! MSE improvement stays below 1e-10 for 10 iterations. Candidate parameters
//! are kept inside a validity region (positive taus, bounded amplitudes,
//! monotone decreasing curve above its floor); without the amplitude bound
//! the MSE surface has a degenerate ridge at tau1 -> tau2 where both
//! amplitudes blow up with opposite signs.

use thiserror::Error;

use super::{strictly_decreasing, stays_above_floor, DecayModel, ModelError};

/// One trace point: (elapsed microseconds, volts).
pub type FitSample = (f64, f64);

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least 6 samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples must span [0, 30 ms]: got [{min_us}, {max_us}] us")]
    BadSpan { min_us: f64, max_us: f64 },
    #[error("bad sample at index {index}: {msg}")]
    BadSample { index: usize, msg: String },
    #[error("no convergence after {iterations} iterations (best MSE {mse}); best-so-far model attached")]
    NonConverged { model: Box<DecayModel>, mse: f64, iterations: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Amplitude box `|A1|, |A2| <= amp_limit * V(0)`; conditioning guard.
    pub amp_limit: f64,
    pub max_iterations: u64,
    /// Converged when relative MSE improvement < rel_tol for `patience` iterations.
    pub rel_tol: f64,
    pub patience: u32,
    pub restart_cycles: u32,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { amp_limit: 4.0, max_iterations: 200_000, rel_tol: 1e-10, patience: 10, restart_cycles: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub mse: f64,
    pub iterations: u64,
    /// Set when tau2 is unidentifiable: near-zero second amplitude or
    /// near-equal time constants (single-exponential data).
    pub degenerate: bool,
}

pub fn fit(samples: &[FitSample]) -> Result<(DecayModel, FitReport), FitError> {
    fit_with(samples, &FitOptions::default())
}

pub fn fit_with(samples: &[FitSample], opts: &FitOptions) -> Result<(DecayModel, FitReport), FitError> {
    if samples.len() < 6 {
        return Err(FitError::TooFewSamples(samples.len()));
    }
    let mut pts: Vec<FitSample> = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (min_dt, max_dt) = (pts[0].0, pts[pts.len() - 1].0);
    if min_dt != 0.0 || max_dt < 30_000.0 {
        return Err(FitError::BadSpan { min_us: min_dt, max_us: max_dt });
    }
    let v0 = pts[0].1;
    for (i, &(dt, v)) in pts.iter().enumerate() {
        if !dt.is_finite() || !v.is_finite() || v <= 0.0 || v > v0 + 1e-12 {
            return Err(FitError::BadSample { index: i, msg: format!("({dt}, {v}) outside (0, V(0)={v0}]") });
        }
    }
    let v_min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let domain = max_dt.max(super::MONOTONE_DOMAIN_US);
    let amp_limit = opts.amp_limit * v0;

    let objective = |p: &[f64]| -> f64 {
        let (a1, tau1, tau2, b) = (p[0], p[1], p[2], p[3]);
        let a2 = v0 - a1 - b;
        let mut wall = 0.0;
        if tau1 <= 0.0 {
            wall += 1.0 - tau1;
        }
        if tau2 <= 0.0 {
            wall += 1.0 - tau2;
        }
        if b < 0.0 {
            wall += -b;
        }
        if b > v0 {
            wall += b - v0;
        }
        if a1.abs() > amp_limit {
            wall += a1.abs() - amp_limit;
        }
        if a2.abs() > amp_limit {
            wall += a2.abs() - amp_limit;
        }
        if wall > 0.0 {
            return 1e3 * (1.0 + wall);
        }
        if !strictly_decreasing(a1, tau1, a2, tau2, domain) || !stays_above_floor(a1, tau1, a2, tau2, domain) {
            return 1e3;
        }
        let mut sse = 0.0;
        for &(dt, v) in &pts {
            let f = a1 * (-dt / tau1).exp() + a2 * (-dt / tau2).exp() + b;
            let r = f - v;
            sse += r * r;
        }
        sse / pts.len() as f64
    };

    // Spec initialization rule.
    let mut x = vec![(v0 - v_min) / 2.0, 5_000.0, 30_000.0, v_min];
    let mut best = objective(&x);
    let mut iterations = 0u64;
    let mut converged = false;
    for _cycle in 0..=opts.restart_cycles {
        let (nx, nv, iters, conv) =
            nelder_mead_full(&objective, &x, opts.max_iterations.saturating_sub(iterations), opts.rel_tol, opts.patience);
        iterations += iters;
        let improved = best - nv > opts.rel_tol * best.abs();
        if nv < best {
            best = nv;
            x = nx;
        }
        converged = conv;
        if !improved || iterations >= opts.max_iterations {
            break;
        }
    }

    let (a1, tau1, tau2, b) = (x[0], x[1], x[2], x[3]);
    let a2 = v0 - a1 - b;
    let degenerate = a2.abs() < 1e-3 * v0 || a1.abs() < 1e-3 * v0 || (tau1 / tau2 - 1.0).abs() < 0.01;
    let report = FitReport { mse: best, iterations, degenerate };
    let model = DecayModel::new(a1, tau1, a2, tau2, b.max(0.0), v0, "fit")?;
    if !converged {
        return Err(FitError::NonConverged { model: Box::new(model), mse: best, iterations });
    }
    Ok((model, report))
}

/// Minimal Nelder-Mead returning just the optimum; used for small internal
/// calibration searches.
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], max_iter: u64, rel_tol: f64) -> (Vec<f64>, f64) {
    let (x, v, _, _) = nelder_mead_full(f, x0, max_iter, rel_tol, 10);
    (x, v)
}

/// Adaptive Nelder-Mead (coefficients scaled by dimension). Returns
/// (best point, best value, iterations, converged-by-patience).
fn nelder_mead_full<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    max_iter: u64,
    rel_tol: f64,
    patience: u32,
) -> (Vec<f64>, f64, u64, bool) {
    let n = x0.len();
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / n as f64, 0.75 - 0.5 / n as f64, 1.0 - 1.0 / n as f64);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut xi = x0.to_vec();
        xi[i] = if xi[i] != 0.0 { xi[i] * 1.05 } else { 0.00025 };
        simplex.push(xi);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    let mut iterations = 0u64;
    let mut stall = 0u32;
    let mut prev_best = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best_i = order[0];
        let worst_i = order[n];
        let second_worst = values[order[n - 1]];

        let best_val = values[best_i];
        let improvement = if prev_best.is_finite() {
            (prev_best - best_val) / prev_best.abs().max(1e-300)
        } else {
            1.0
        };
        // Stalls only count once the simplex itself has collapsed in value;
        // mid-run plateaus with a spread-out simplex are routine. The
        // absolute floor catches exactly-representable data where the MSE
        // heads to zero and relative measures never settle.
        let spread = values[worst_i] - best_val;
        let tight = spread <= (1e-8 * best_val.abs()).max(1e-24);
        if (improvement < rel_tol || best_val.abs() <= 1e-24) && tight {
            stall += 1;
            if stall >= patience {
                let x = simplex[best_i].clone();
                return (x, best_val, iterations, true);
            }
        } else {
            stall = 0;
        }
        prev_best = best_val;

        let mut centroid = vec![0.0f64; n];
        for &i in order.iter().take(n) {
            for (c, xi) in centroid.iter_mut().zip(&simplex[i]) {
                *c += xi;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let worst = simplex[worst_i].clone();
        let reflect: Vec<f64> = centroid.iter().zip(&worst).map(|(c, w)| c + alpha * (c - w)).collect();
        let fr = f(&reflect);

        if fr < values[best_i] {
            let expand: Vec<f64> = centroid.iter().zip(&reflect).map(|(c, r)| c + beta * (r - c)).collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[worst_i] = expand;
                values[worst_i] = fe;
            } else {
                simplex[worst_i] = reflect;
                values[worst_i] = fr;
            }
            continue;
        }
        if fr < second_worst {
            simplex[worst_i] = reflect;
            values[worst_i] = fr;
            continue;
        }
        let (contract, fc) = if fr < values[worst_i] {
            let c: Vec<f64> = centroid.iter().zip(&reflect).map(|(c, r)| c + gamma * (r - c)).collect();
            let v = f(&c);
            (c, v)
        } else {
            let c: Vec<f64> = centroid.iter().zip(&worst).map(|(c, w)| c - gamma * (c - w)).collect();
            let v = f(&c);
            (c, v)
        };
        if fc < values[worst_i].min(fr) {
            simplex[worst_i] = contract;
            values[worst_i] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        let best_x = simplex[best_i].clone();
        for i in 0..=n {
            if i == best_i {
                continue;
            }
            let xi: Vec<f64> = best_x.iter().zip(&simplex[i]).map(|(b, x)| b + delta * (x - b)).collect();
            values[i] = f(&xi);
            simplex[i] = xi;
        }
    }
    let mut best_i = 0;
    for i in 1..=n {
        if values[i] < values[best_i] {
            best_i = i;
        }
    }
    (simplex[best_i].clone(), values[best_i], iterations, false)
}

// ---------------------------------------------------------------------------

/// Monotone cubic (Fritsch-Carlson) interpolation through sorted knots.
/// Used to derive in-between calibration samples from published anchors.
pub fn pchip_interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    let n = knots.len();
    assert!(n >= 2, "need at least two knots");
    if t <= knots[0].0 {
        return knots[0].1;
    }
    if t >= knots[n - 1].0 {
        return knots[n - 1].1;
    }
    let h: Vec<f64> = (0..n - 1).map(|i| knots[i + 1].0 - knots[i].0).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (knots[i + 1].1 - knots[i].1) / h[i]).collect();
    let mut m = vec![0.0f64; n];
    m[0] = endpoint_tangent(h[0], h.get(1).copied().unwrap_or(h[0]), d[0], d.get(1).copied().unwrap_or(d[0]));
    m[n - 1] = endpoint_tangent(
        h[n - 2],
        if n >= 3 { h[n - 3] } else { h[n - 2] },
        d[n - 2],
        if n >= 3 { d[n - 3] } else { d[n - 2] },
    );
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    let seg = (0..n - 1).find(|&i| t <= knots[i + 1].0).unwrap();
    let s = (t - knots[seg].0) / h[seg];
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * knots[seg].1 + h10 * h[seg] * m[seg] + h01 * knots[seg + 1].1 + h11 * h[seg] * m[seg + 1]
}

fn endpoint_tangent(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
