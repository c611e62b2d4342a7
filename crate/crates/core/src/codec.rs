//! Binary quantizer with a time-based zooming range, and the mirrored
//! coder/decoder state machines.
//!
//! One bit crosses the channel per sampling instant. Both endpoints run the
//! same range schedule
//!
//! ```text
//! M[k+1] = rho * (M[k] - M_inf) + M_inf
//! ```
//!
//! computed with the identical floating-point operation order, so the coder
//! and decoder ranges agree bit-for-bit after any number of steps. With
//! `M_inf = 0` this is the pure geometric schedule `M[k] = M0 * rho^k`; a
//! positive `M_inf` keeps the range separated from zero.

use crate::error::{Error, Result};

/// Zooming-quantizer parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoderConfig {
    /// Initial range (output units); must capture the initial error.
    pub m0: f64,
    /// Range decay per sample, `0 < rho <= 1`.
    pub rho: f64,
    /// Limit range, `0 <= m_inf < m0`. Zero selects the pure geometric
    /// schedule.
    pub m_inf: f64,
    /// Sampling period in seconds.
    pub ts: f64,
}

impl CoderConfig {
    pub fn new(m0: f64, rho: f64, m_inf: f64, ts: f64) -> Result<Self> {
        if !(m0 > 0.0) {
            return Err(Error::Config(format!("M0 must be positive, got {m0}")));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1], got {rho}")));
        }
        if !(m_inf >= 0.0 && m_inf < m0) {
            return Err(Error::Config(format!(
                "M_inf must satisfy 0 <= M_inf < M0, got M_inf = {m_inf}, M0 = {m0}"
            )));
        }
        if !(ts > 0.0) {
            return Err(Error::Config(format!("Ts must be positive, got {ts}")));
        }
        Ok(CoderConfig { m0, rho, m_inf, ts })
    }

    pub fn initial_state(&self) -> CoderState {
        CoderState { k: 0, m: self.m0 }
    }
}

/// Step counter and current range; identical on both sides of the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoderState {
    pub k: u64,
    pub m: f64,
}

/// One binary channel symbol from the alphabet `{+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Codeword {
    Plus,
    Minus,
}

impl Codeword {
    pub fn value(self) -> f64 {
        match self {
            Codeword::Plus => 1.0,
            Codeword::Minus => -1.0,
        }
    }

    /// Sign of the input with the convention `sign(0) = +1`.
    pub fn from_sign(y: f64) -> Self {
        if y >= 0.0 {
            Codeword::Plus
        } else {
            Codeword::Minus
        }
    }
}

/// Binary quantizer: `+M` for `y >= 0`, `-M` for `y < 0`.
pub fn quantize(y: f64, m: f64) -> f64 {
    debug_assert!(m > 0.0);
    if y >= 0.0 {
        m
    } else {
        -m
    }
}

/// Shared range update; the single definition keeps both endpoints bit-exact.
/// The range is floored at the smallest positive normal so a pure geometric
/// schedule never underflows to zero.
fn advance(state: &CoderState, cfg: &CoderConfig) -> CoderState {
    let mut m = cfg.rho * (state.m - cfg.m_inf) + cfg.m_inf;
    if m < f64::MIN_POSITIVE {
        m = f64::MIN_POSITIVE;
    }
    CoderState { k: state.k + 1, m }
}

/// Encode one sample: emit the sign bit, the quantized value `M[k] * bit`,
/// and the advanced state.
pub fn coder_step(state: &CoderState, cfg: &CoderConfig, eps: f64) -> (Codeword, f64, CoderState) {
    let word = Codeword::from_sign(eps);
    let value = state.m * word.value();
    (word, value, advance(state, cfg))
}

/// Decode one received bit: reproduce `M[k] * bit` and advance the mirrored
/// range schedule.
pub fn decoder_step(state: &CoderState, cfg: &CoderConfig, word: Codeword) -> (f64, CoderState) {
    let value = state.m * word.value();
    (value, advance(state, cfg))
}

/// Samples in `[0, duration]` (the instant `k = 0` included) and the channel
/// rate in bit/s. One bit per sample, so the rate is `1/Ts`.
pub fn bit_budget(cfg: &CoderConfig, duration: f64) -> Result<(u64, f64)> {
    if !(duration >= 0.0) {
        return Err(Error::Config(format!(
            "duration must be non-negative, got {duration}"
        )));
    }
    let count = (duration / cfg.ts).floor() as u64 + 1;
    Ok((count, 1.0 / cfg.ts))
}
