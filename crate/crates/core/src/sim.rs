//! Fixed-step hybrid simulation of the quantized synchronization loop.
//!
//! The coupled system is integrated with classical fourth-order Runge-Kutta
//! on a uniform grid chosen so that every sampling instant `t_k = k*Ts` lands
//! exactly on a grid point. At each `t_k` the coder reads the output error
//! `eps(t_k)`, one bit crosses the channel, the decoder reconstructs the
//! quantized value, and the control `u = K * eps_bar` is held constant until
//! the next sample (zero-order hold).
//!
//! Within a sampling interval the master and the slave evolve independently
//! (the hold input is constant), so each subsystem is advanced by its own
//! Runge-Kutta step; this is exactly the coupled-system step and keeps a
//! slave with `K = 0` bit-identical to an autonomous run.

use crate::codec::{coder_step, decoder_step, CoderConfig};
use crate::error::{Error, Result};
use crate::lurie::{LurieSystem, Nonlinearity};
use rayon::prelude::*;

/// State-norm ceiling; beyond it the run is declared divergent.
const DIVERGENCE_LIMIT: f64 = 1e6;
/// Hard cap for the integration step (seconds).
const MAX_DT: f64 = 2e-3;

/// Full configuration of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sys: LurieSystem,
    /// Output-feedback gain `K`.
    pub gain: f64,
    pub coder: CoderConfig,
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    /// Horizon in seconds.
    pub t_fin: f64,
    /// Integration step; `Ts/dt` must be a positive integer.
    pub dt: f64,
    /// Integration steps between recorded trace rows.
    pub record_stride: usize,
}

impl SimConfig {
    /// Default integration step for a sampling period: `Ts/20`, tightened so
    /// it never exceeds 2 ms, while keeping `Ts/dt` integral.
    pub fn default_dt(ts: f64) -> f64 {
        let divisor = 20.0f64.max((ts / MAX_DT).ceil());
        ts / divisor
    }

    /// Integration steps per sampling interval.
    pub fn steps_per_sample(&self) -> Result<u64> {
        let ratio = self.coder.ts / self.dt;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "Ts/dt must be a positive integer; Ts = {}, dt = {} gives {ratio}",
                self.coder.ts, self.dt
            )));
        }
        Ok(rounded as u64)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sys.n();
        if self.x0.len() != n || self.z0.len() != n {
            return Err(Error::Config(format!(
                "initial states must have dimension {n}, got {} and {}",
                self.x0.len(),
                self.z0.len()
            )));
        }
        if !(self.t_fin > 0.0) {
            return Err(Error::Config(format!(
                "t_fin must be positive, got {}",
                self.t_fin
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        self.steps_per_sample()?;
        Ok(())
    }
}

/// One recorded grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// `e = x - z`, componentwise.
    pub e: Vec<f64>,
    /// `eps = C e` at this instant.
    pub eps: f64,
    /// Held decoder output.
    pub eps_bar: f64,
    /// Held control `K * eps_bar`.
    pub u: f64,
    /// Quantization error `C e(t_k) - eps_bar[k]`, held over the interval.
    pub delta_q: f64,
    /// Sampling error `C e(t) - C e(t_k)`.
    pub delta_s: f64,
    /// Total error: the sum of the two recorded components.
    pub delta: f64,
    /// Range used at the most recent sampling instant.
    pub m_k: f64,
    /// Most recent channel bit.
    pub bit: i8,
    /// Capture flag of the most recent sample.
    pub overflow: bool,
}

/// Per-sample channel record: one line per transmitted bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    pub k: u64,
    pub t: f64,
    pub bit: i8,
    pub m_k: f64,
    pub eps: f64,
    pub eps_bar: f64,
    /// Euclidean norm of the state error at this sample.
    pub e_norm: f64,
    /// True when `|eps| > 2 M[k]` (capture lost at this sample).
    pub overflow: bool,
}

/// Result of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub n: usize,
    pub dt: f64,
    /// Requested horizon.
    pub t_fin: f64,
    pub rows: Vec<TraceRow>,
    pub samples: Vec<SampleRecord>,
    /// Set when the state norm blew past the divergence guard; rows and
    /// samples up to that instant are retained.
    pub diverged_at: Option<f64>,
}

/// Flattened system for the integration loop: row-major `A`, plus `B`, `C`.
struct FlatSystem {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    phi: Nonlinearity,
}

impl FlatSystem {
    fn new(sys: &LurieSystem) -> Self {
        let n = sys.n();
        let mut a = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(sys.a()[(i, j)]);
            }
        }
        FlatSystem {
            n,
            a,
            b: sys.b().iter().copied().collect(),
            c: sys.c().iter().copied().collect(),
            phi: *sys.phi(),
        }
    }

    fn output(&self, s: &[f64]) -> f64 {
        let mut y = 0.0;
        for i in 0..self.n {
            y += self.c[i] * s[i];
        }
        y
    }

    /// `out = A s + B (phi(C s) + u)`.
    fn deriv(&self, s: &[f64], u: f64, out: &mut [f64]) {
        let w = self.phi.eval(self.output(s)) + u;
        for i in 0..self.n {
            let row = &self.a[i * self.n..(i + 1) * self.n];
            let mut acc = 0.0;
            for j in 0..self.n {
                acc += row[j] * s[j];
            }
            out[i] = acc + self.b[i] * w;
        }
    }
}

/// Scratch buffers for one subsystem's Runge-Kutta step.
struct RkScratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl RkScratch {
    fn new(n: usize) -> Self {
        RkScratch {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

fn rk4_step(sys: &FlatSystem, s: &mut [f64], u: f64, dt: f64, w: &mut RkScratch) {
    let n = sys.n;
    sys.deriv(s, u, &mut w.k1);
    for i in 0..n {
        w.tmp[i] = s[i] + 0.5 * dt * w.k1[i];
    }
    sys.deriv(&w.tmp, u, &mut w.k2);
    for i in 0..n {
        w.tmp[i] = s[i] + 0.5 * dt * w.k2[i];
    }
    sys.deriv(&w.tmp, u, &mut w.k3);
    for i in 0..n {
        w.tmp[i] = s[i] + dt * w.k3[i];
    }
    sys.deriv(&w.tmp, u, &mut w.k4);
    for i in 0..n {
        s[i] += dt / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
}

fn norm(s: &[f64]) -> f64 {
    s.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrate the uncontrolled system (`u = 0`) for `steps` grid steps and
/// return the final state. Bit-identical to the slave half of a closed-loop
/// run with `K = 0`.
pub fn integrate_autonomous(sys: &LurieSystem, s0: &[f64], dt: f64, steps: u64) -> Result<Vec<f64>> {
    if s0.len() != sys.n() {
        return Err(Error::Config(format!(
            "initial state must have dimension {}, got {}",
            sys.n(),
            s0.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let flat = FlatSystem::new(sys);
    let mut scratch = RkScratch::new(sys.n());
    let mut s = s0.to_vec();
    for _ in 0..steps {
        rk4_step(&flat, &mut s, 0.0, dt, &mut scratch);
    }
    Ok(s)
}

/// Run the closed loop. Returns the trace even when the divergence guard
/// fires; check [`SimTrace::diverged_at`].
pub fn run_simulation(cfg: &SimConfig) -> Result<SimTrace> {
    cfg.validate()?;
    let n = cfg.sys.n();
    let flat = FlatSystem::new(&cfg.sys);
    let steps_per_sample = cfg.steps_per_sample()?;
    let total_steps = ((cfg.t_fin / cfg.dt) + 1e-9).floor() as u64;

    let mut x = cfg.x0.clone();
    let mut z = cfg.z0.clone();
    let mut sx = RkScratch::new(n);
    let mut sz = RkScratch::new(n);

    let mut coder = cfg.coder.initial_state();
    let mut decoder = cfg.coder.initial_state();

    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let mut diverged_at = None;

    // Held values, refreshed at each sampling instant.
    let mut eps_bar = 0.0;
    let mut u = 0.0;
    let mut eps_at_sample = 0.0;
    let mut delta_q = 0.0;
    let mut m_used = cfg.coder.m0;
    let mut bit: i8 = 1;
    let mut overflow = false;
    let mut e = vec![0.0; n];

    for step in 0..=total_steps {
        let t = step as f64 * cfg.dt;

        if step % steps_per_sample == 0 {
            let k = step / steps_per_sample;
            for i in 0..n {
                e[i] = x[i] - z[i];
            }
            let eps = flat.output(&e);
            m_used = coder.m;
            let (word, _, next_coder) = coder_step(&coder, &cfg.coder, eps);
            let (decoded, next_decoder) = decoder_step(&decoder, &cfg.coder, word);
            coder = next_coder;
            decoder = next_decoder;
            debug_assert_eq!(coder, decoder);
            eps_bar = decoded;
            u = cfg.gain * eps_bar;
            eps_at_sample = eps;
            delta_q = eps - eps_bar;
            bit = word.value() as i8;
            overflow = eps.abs() > 2.0 * m_used;
            samples.push(SampleRecord {
                k,
                t,
                bit,
                m_k: m_used,
                eps,
                eps_bar,
                e_norm: norm(&e),
                overflow,
            });
        }

        if step % cfg.record_stride as u64 == 0 || step == total_steps {
            for i in 0..n {
                e[i] = x[i] - z[i];
            }
            let eps_t = flat.output(&e);
            let delta_s = eps_t - eps_at_sample;
            rows.push(TraceRow {
                t,
                x: x.clone(),
                z: z.clone(),
                e: e.clone(),
                eps: eps_t,
                eps_bar,
                u,
                delta_q,
                delta_s,
                delta: delta_q + delta_s,
                m_k: m_used,
                bit,
                overflow,
            });
        }

        if step == total_steps {
            break;
        }
        rk4_step(&flat, &mut x, 0.0, cfg.dt, &mut sx);
        rk4_step(&flat, &mut z, u, cfg.dt, &mut sz);

        let bad = x.iter().chain(z.iter()).any(|v| !v.is_finite())
            || norm(&x) > DIVERGENCE_LIMIT
            || norm(&z) > DIVERGENCE_LIMIT;
        if bad {
            diverged_at = Some((step + 1) as f64 * cfg.dt);
            break;
        }
    }

    Ok(SimTrace {
        n,
        dt: cfg.dt,
        t_fin: cfg.t_fin,
        rows,
        samples,
        diverged_at,
    })
}

/// Normalized synchronization error over the recorded rows:
/// the peak of `|e|` over the last fifth of the horizon, relative to the peak
/// of `|x|` over the whole run.
pub fn metric_q(trace: &SimTrace) -> Result<f64> {
    if trace.rows.is_empty() {
        return Err(Error::DegenerateMetric("trace has no rows".into()));
    }
    let t_start = 0.8 * trace.t_fin;
    let mut e_max = f64::NEG_INFINITY;
    let mut x_max = 0.0f64;
    for row in &trace.rows {
        x_max = x_max.max(norm(&row.x));
        if row.t >= t_start - 1e-12 {
            e_max = e_max.max(norm(&row.e));
        }
    }
    if e_max == f64::NEG_INFINITY {
        return Err(Error::DegenerateMetric(format!(
            "no rows recorded past 0.8 * t_fin = {t_start}"
        )));
    }
    if x_max == 0.0 {
        return Err(Error::DegenerateMetric(
            "master trajectory is identically zero".into(),
        ));
    }
    Ok(e_max / x_max)
}

/// First instant after which `|e|` stays below `band` through the end of the
/// recorded trace. `None` when the final row still violates the band.
pub fn transient_time(trace: &SimTrace, band: f64) -> Option<f64> {
    let last_violation = trace.rows.iter().rposition(|row| norm(&row.e) >= band);
    match last_violation {
        None => trace.rows.first().map(|r| r.t),
        Some(idx) if idx + 1 < trace.rows.len() => Some(trace.rows[idx + 1].t),
        Some(_) => None,
    }
}

/// Per-sample comparison of `|e[k]|` against the geometric envelope
/// `2 * M0 * rho^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    /// `|eps[k]|` per sample.
    pub eps_k: Vec<f64>,
    /// `|e[k]|` per sample.
    pub e_norm_k: Vec<f64>,
    /// `2 * M0 * rho^k` per sample.
    pub bound: Vec<f64>,
    /// Worst `|e[k]| - bound[k]` over all samples.
    pub worst_excess: f64,
    /// True when every sample satisfies `|e[k]| <= bound[k] + tol`.
    pub satisfied: bool,
}

/// Check the exponential decay envelope on the recorded samples.
pub fn check_decay_bound(trace: &SimTrace, rho: f64, m0: f64, tol: f64) -> BoundCheck {
    let mut bound = Vec::with_capacity(trace.samples.len());
    let mut eps_k = Vec::with_capacity(trace.samples.len());
    let mut e_norm_k = Vec::with_capacity(trace.samples.len());
    let mut level = 2.0 * m0;
    let mut worst = f64::NEG_INFINITY;
    for sample in &trace.samples {
        bound.push(level);
        eps_k.push(sample.eps.abs());
        e_norm_k.push(sample.e_norm);
        worst = worst.max(sample.e_norm - level);
        level *= rho;
    }
    BoundCheck {
        eps_k,
        e_norm_k,
        bound,
        worst_excess: worst,
        satisfied: worst <= tol,
    }
}

/// Aggregated run metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Normalized synchronization error; `None` when undefined.
    pub q: Option<f64>,
    /// Settling instant for the configured band; `None` when never settled.
    pub transient_time: Option<f64>,
    pub bound: BoundCheck,
}

/// Band used by the reported transient time.
pub const TRANSIENT_BAND: f64 = 0.1;

pub fn compute_metrics(trace: &SimTrace, rho: f64, m0: f64, tol: f64) -> Metrics {
    Metrics {
        q: metric_q(trace).ok(),
        transient_time: transient_time(trace, TRANSIENT_BAND),
        bound: check_decay_bound(trace, rho, m0, tol),
    }
}

/// One row of the rate-sweep table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Transmission rate in bit/s.
    pub rate: f64,
    pub ts: f64,
    pub rho: f64,
    /// Normalized synchronization error; `+inf` marks a divergent run.
    pub q: f64,
    pub bound_satisfied: bool,
    pub diverged: bool,
}

/// Run one simulation per rate with `Ts = 1/R` and `rho = exp(-eta*Ts)`,
/// re-deriving the integration grid per run. Runs execute independently (and
/// possibly concurrently); the table is sorted by rate, so permuting the
/// input list cannot change the output. A divergent run is recorded with a
/// `+inf` error metric and the sweep continues.
pub fn sweep_rates(base: &SimConfig, rates: &[f64], eta: f64) -> Result<Vec<SweepRow>> {
    for &r in rates {
        if !(r > 0.0) {
            return Err(Error::Config(format!("rates must be positive, got {r}")));
        }
    }
    let mut rows = rates
        .par_iter()
        .map(|&rate| -> Result<SweepRow> {
            let ts = 1.0 / rate;
            let rho = (-eta * ts).exp();
            let dt = SimConfig::default_dt(ts);
            let coder = CoderConfig::new(base.coder.m0, rho, base.coder.m_inf, ts)?;
            let cfg = SimConfig {
                sys: base.sys.clone(),
                gain: base.gain,
                coder,
                x0: base.x0.clone(),
                z0: base.z0.clone(),
                t_fin: base.t_fin,
                dt,
                record_stride: (ts / dt).round() as usize,
            };
            let trace = run_simulation(&cfg)?;
            let diverged = trace.diverged_at.is_some();
            let q = if diverged {
                f64::INFINITY
            } else {
                metric_q(&trace)?
            };
            let bound = check_decay_bound(&trace, rho, base.coder.m0, 1e-6 * base.coder.m0);
            Ok(SweepRow {
                rate,
                ts,
                rho,
                q,
                bound_satisfied: !diverged && bound.satisfied,
                diverged,
            })
        })
        .collect::<Result<Vec<SweepRow>>>()?;
    rows.sort_by(|a, b| a.rate.partial_cmp(&b.rate).expect("finite rates"));
    Ok(rows)
}
