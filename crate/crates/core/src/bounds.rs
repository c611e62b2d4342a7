//! Design constants for the quantized synchronization loop and the
//! comparison-sequence machinery behind the exponential error bound.
//!
//! Once a passification certificate `(P, K, eta)` is fixed, the hybrid error
//! dynamics admit a per-sample comparison recursion
//!
//! ```text
//! W[k+1] <= q W[k] + r b[k]
//! ```
//!
//! for `W = sqrt(V)`, `V = e' P e / 2`, where `q` and `r` depend on the
//! sampling period and two gain constants `a0`, `b0` of the system. Keeping
//! `q < rho < 1` and seeding the coder range as `M[k] = M0 rho^k` with `M0`
//! from [`initial_range`] makes the error envelope decay like `rho^k`.
//!
//! `W0` conventions: the comparison variable is `W = sqrt(V)`, and the
//! envelope is seeded with a design scalar `W0 >= W(0)`. The default choice
//! [`default_w0`] evaluates `sqrt(e(0)' P e(0) / 2)` from the configured
//! initial condition.

use crate::error::{Error, Result};
use crate::lurie::{hmp_check, LurieSystem};
use crate::passify::PassificationCertificate;
use nalgebra::DVector;

/// System-level gain constants entering the comparison recursion:
/// `a0 = (|C*Ak| + |C*B| |C|) / sqrt(lambda_min)`, `b0 = |C*B| (K + L_phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorGains {
    pub a0: f64,
    pub b0: f64,
}

/// Compute `a0` and `b0` from a verified certificate. Norms are Euclidean.
pub fn error_gains(
    sys: &LurieSystem,
    cert: &PassificationCertificate,
    l_phi: f64,
) -> Result<ErrorGains> {
    if !(cert.lambda_min() > 0.0) {
        return Err(Error::Config(format!(
            "certificate has non-positive lambda_min = {}",
            cert.lambda_min()
        )));
    }
    let a_k = sys.a_closed(cert.gain());
    let c_ak = sys.c() * &a_k;
    let cb = sys.cb().abs();
    let a0 = (c_ak.norm() + cb * sys.c().norm()) / cert.lambda_min().sqrt();
    let b0 = cb * (cert.gain() + l_phi);
    Ok(ErrorGains { a0, b0 })
}

/// Contraction factor of the comparison recursion:
///
/// ```text
/// q = max( exp(-eta'*Ts) + Ts*a0*(K+L)* (1 - exp(-eta'*Ts)) / (2*eta'*(1 - Ts*b0)*sqrt(lam)),
///          Ts*a0*(K+L) / (2*(eta - eta')*(1 - Ts*b0)*sqrt(lam)) )
/// ```
///
/// Requires `Ts*b0 < 1` and `0 < eta' < eta`.
#[allow(clippy::too_many_arguments)]
pub fn contraction_factor(
    a0: f64,
    gain: f64,
    l_phi: f64,
    ts: f64,
    eta: f64,
    eta_prime: f64,
    b0: f64,
    lambda_min: f64,
) -> Result<f64> {
    if !(eta_prime > 0.0 && eta_prime < eta) {
        return Err(Error::Config(format!(
            "rates must satisfy 0 < eta' < eta, got eta' = {eta_prime}, eta = {eta}"
        )));
    }
    if !(ts > 0.0) {
        return Err(Error::Config(format!("Ts must be positive, got {ts}")));
    }
    if !(lambda_min > 0.0) {
        return Err(Error::Config(format!(
            "lambda_min must be positive, got {lambda_min}"
        )));
    }
    if ts * b0 >= 1.0 {
        return Err(Error::Feasibility(format!(
            "Ts * b0 = {} >= 1; decrease the sampling period",
            ts * b0
        )));
    }
    let decay = (-eta_prime * ts).exp();
    let common = ts * a0 * (gain + l_phi) / ((1.0 - ts * b0) * lambda_min.sqrt());
    let branch_hold = decay + common * (1.0 - decay) / (2.0 * eta_prime);
    let branch_floor = common / (2.0 * (eta - eta_prime));
    Ok(branch_hold.max(branch_floor))
}

/// Gain of the comparison recursion:
/// `r = max( (1 - exp(-eta'*Ts)) / (2*eta'),  1 / (2*(eta - eta')) )`.
pub fn sequence_gain(eta: f64, eta_prime: f64, ts: f64) -> Result<f64> {
    if !(eta_prime > 0.0 && eta_prime < eta) {
        return Err(Error::Config(format!(
            "rates must satisfy 0 < eta' < eta, got eta' = {eta_prime}, eta = {eta}"
        )));
    }
    if !(ts > 0.0) {
        return Err(Error::Config(format!("Ts must be positive, got {ts}")));
    }
    let first = (1.0 - (-eta_prime * ts).exp()) / (2.0 * eta_prime);
    let second = 1.0 / (2.0 * (eta - eta_prime));
    Ok(first.max(second))
}

/// Initial coder range making the envelope decay at rate `rho`:
/// `M0 = W0 (rho - q)(1 - Ts*b0) sqrt(lambda_min) / (r (K + L_phi))`.
///
/// Requires `q < rho < 1` and `Ts*b0 < 1`.
#[allow(clippy::too_many_arguments)]
pub fn initial_range(
    w0: f64,
    rho: f64,
    q: f64,
    ts: f64,
    b0: f64,
    lambda_min: f64,
    r: f64,
    gain: f64,
    l_phi: f64,
) -> Result<f64> {
    if rho <= q {
        return Err(Error::Feasibility(format!(
            "rho = {rho} must exceed the contraction factor q = {q}"
        )));
    }
    if rho >= 1.0 {
        return Err(Error::Feasibility(format!("rho = {rho} must be below 1")));
    }
    if ts * b0 >= 1.0 {
        return Err(Error::Feasibility(format!(
            "Ts * b0 = {} >= 1; decrease the sampling period",
            ts * b0
        )));
    }
    Ok(w0 * (rho - q) * (1.0 - ts * b0) * lambda_min.sqrt() / (r * (gain + l_phi)))
}

/// Sampling-period threshold below which the loop contracts:
///
/// ```text
/// Ts_max = (1/(K+L)) * min( 2*eta'*sqrt(lam)/a0,  2*(eta-eta')*sqrt(lam)/a0,  1/|C*B| )
/// ```
pub fn sampling_threshold(
    gain: f64,
    l_phi: f64,
    eta: f64,
    eta_prime: f64,
    lambda_min: f64,
    a0: f64,
    cb_norm: f64,
) -> Result<f64> {
    if !(eta_prime > 0.0 && eta_prime < eta) {
        return Err(Error::Config(format!(
            "rates must satisfy 0 < eta' < eta, got eta' = {eta_prime}, eta = {eta}"
        )));
    }
    let sq = lambda_min.sqrt();
    let first = 2.0 * eta_prime * sq / a0;
    let second = 2.0 * (eta - eta_prime) * sq / a0;
    let third = 1.0 / cb_norm;
    Ok(first.min(second).min(third) / (gain + l_phi))
}

/// One comparison step: `W_next = q*W + r*b`.
pub fn envelope_step(w: f64, b: f64, q: f64, r: f64) -> f64 {
    q * w + r * b
}

/// Closed form of the iterated comparison:
/// `W[k] = q^k W0 + r * sum_{i=0}^{k-1} b[i] q^{k-1-i}`.
pub fn envelope_bound(w0: f64, b: &[f64], q: f64, r: f64, k: usize) -> f64 {
    assert!(k <= b.len(), "need b[0..k] to evaluate the bound at step {k}");
    let mut acc = 0.0;
    // Horner-style accumulation keeps the powers of q implicit.
    for &bi in b[..k].iter() {
        acc = acc * q + bi;
    }
    w0 * q.powi(k as i32) + r * acc
}

/// Outcome of the continuous-time consistency check.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeOdeReport {
    /// Worst observed `W(t_{k+1}) - (q W(t_k) + r b[k])` over all intervals.
    pub max_excess: f64,
    /// True when the excess never exceeded the allowed slack.
    pub passed: bool,
    pub q: f64,
    pub r: f64,
}

/// Integrate the equality case of the comparison differential inequality,
///
/// ```text
/// W' = -eta*W + (a/2)*sup_{t_k <= t' <= t} W(t') + b[k]/2,
/// ```
///
/// with a fine fixed step, and confirm the per-interval recursion
/// `W(t_{k+1}) <= q W(t_k) + r b[k] + slack` at every sample. Here
/// `q = max(exp(-eta'*Ts) + a(1-exp(-eta'*Ts))/(2*eta'), a/(2*(eta-eta')))`;
/// the check fails fast (as an error, not a panic) when `q >= 1`.
#[allow(clippy::too_many_arguments)]
pub fn envelope_ode_check(
    eta: f64,
    eta_prime: f64,
    a: f64,
    b: &[f64],
    ts: f64,
    w0: f64,
    substeps: usize,
    slack: f64,
) -> Result<EnvelopeOdeReport> {
    if !(eta_prime > 0.0 && eta_prime < eta) {
        return Err(Error::Config(format!(
            "rates must satisfy 0 < eta' < eta, got eta' = {eta_prime}, eta = {eta}"
        )));
    }
    if !(a >= 0.0 && w0 >= 0.0 && ts > 0.0) || b.iter().any(|&bi| bi < 0.0) {
        return Err(Error::Config(
            "a, W0 and every b[k] must be non-negative, Ts positive".into(),
        ));
    }
    if substeps == 0 {
        return Err(Error::Config("substeps must be positive".into()));
    }
    let decay = (-eta_prime * ts).exp();
    let q = (decay + a * (1.0 - decay) / (2.0 * eta_prime)).max(a / (2.0 * (eta - eta_prime)));
    if q >= 1.0 {
        return Err(Error::Feasibility(format!(
            "comparison factor q = {q} >= 1; the recursion does not contract"
        )));
    }
    let r = sequence_gain(eta, eta_prime, ts)?;

    let h = ts / substeps as f64;
    let mut w = w0;
    let mut max_excess = f64::NEG_INFINITY;
    for &bk in b {
        let w_start = w;
        let mut sup = w;
        for _ in 0..substeps {
            // RK4 with the sup term frozen over the substep; the running sup
            // is refreshed at substep boundaries.
            let f = |wv: f64| -eta * wv + 0.5 * a * sup + 0.5 * bk;
            let k1 = f(w);
            let k2 = f(w + 0.5 * h * k1);
            let k3 = f(w + 0.5 * h * k2);
            let k4 = f(w + h * k3);
            w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if w > sup {
                sup = w;
            }
        }
        let bound = q * w_start + r * bk;
        max_excess = max_excess.max(w - bound);
    }
    Ok(EnvelopeOdeReport {
        max_excess,
        passed: max_excess <= slack,
        q,
        r,
    })
}

/// Default envelope seed from the configured initial error:
/// `W0 = sqrt(e0' P e0 / 2)`.
pub fn default_w0(cert: &PassificationCertificate, e0: &DVector<f64>) -> f64 {
    (0.5 * e0.dot(&(cert.p() * e0))).sqrt()
}

/// Everything the design report needs, with feasibility verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignConstants {
    pub l_phi: f64,
    pub a0: f64,
    pub b0: f64,
    pub eta: f64,
    pub eta_prime: f64,
    pub eta0: f64,
    pub lambda_min: f64,
    pub ts: f64,
    pub rho: f64,
    pub w0: f64,
    /// Contraction factor at `ts`, when `Ts*b0 < 1`.
    pub q: Option<f64>,
    pub r: f64,
    /// Coder range seed at `(rho, q)`, when feasible.
    pub m0_bound: Option<f64>,
    pub ts_threshold: f64,
    /// `Ts*b0 < 1`, `q < rho < 1` and `0 < eta' < eta < eta0` all hold.
    pub contraction_ok: bool,
    /// `ts` is below the sampling threshold.
    pub threshold_ok: bool,
    /// Set when the configured `rho` (e.g. from the `exp(-eta*Ts)` rule) does
    /// not exceed `q`, i.e. figure-reproduction settings conflict with the
    /// contraction requirements.
    pub rho_conflict: bool,
}

/// Assemble the full constants chain for a given certificate and coder
/// settings.
pub fn derive_design(
    sys: &LurieSystem,
    cert: &PassificationCertificate,
    eta_prime: f64,
    ts: f64,
    rho: f64,
    w0: f64,
) -> Result<DesignConstants> {
    let l_phi = sys.phi_lipschitz();
    let gains = error_gains(sys, cert, l_phi)?;
    let eta = cert.eta();
    let hmp = hmp_check(&sys.transfer_function());
    let r = sequence_gain(eta, eta_prime, ts)?;
    let q = match contraction_factor(
        gains.a0,
        cert.gain(),
        l_phi,
        ts,
        eta,
        eta_prime,
        gains.b0,
        cert.lambda_min(),
    ) {
        Ok(v) => Some(v),
        Err(Error::Feasibility(_)) => None,
        Err(e) => return Err(e),
    };
    let ts_threshold = sampling_threshold(
        cert.gain(),
        l_phi,
        eta,
        eta_prime,
        cert.lambda_min(),
        gains.a0,
        sys.cb().abs(),
    )?;
    let m0_bound = q.and_then(|qv| {
        initial_range(
            w0,
            rho,
            qv,
            ts,
            gains.b0,
            cert.lambda_min(),
            r,
            cert.gain(),
            l_phi,
        )
        .ok()
    });
    let contraction_ok = match q {
        Some(qv) => qv < rho && rho < 1.0 && eta_prime < eta && eta < hmp.eta0,
        None => false,
    };
    let rho_conflict = matches!(q, Some(qv) if rho <= qv);
    Ok(DesignConstants {
        l_phi,
        a0: gains.a0,
        b0: gains.b0,
        eta,
        eta_prime,
        eta0: hmp.eta0,
        lambda_min: cert.lambda_min(),
        ts,
        rho,
        w0,
        q,
        r,
        m0_bound,
        ts_threshold,
        contraction_ok,
        threshold_ok: ts < ts_threshold,
        rho_conflict,
    })
}

/// Deterministic recommendation of a contraction-compatible
/// `(Ts, rho, M0)` triple. Fractions of the sampling threshold are tried and
/// the one maximizing the achievable range `M0` (with `rho` at the midpoint
/// of `(q, 1)`) wins; `None` when no tried fraction contracts.
pub fn recommend_coder(
    sys: &LurieSystem,
    cert: &PassificationCertificate,
    eta_prime: f64,
    w0: f64,
) -> Result<Option<(f64, f64, f64)>> {
    let l_phi = sys.phi_lipschitz();
    let gains = error_gains(sys, cert, l_phi)?;
    let ts_max = sampling_threshold(
        cert.gain(),
        l_phi,
        cert.eta(),
        eta_prime,
        cert.lambda_min(),
        gains.a0,
        sys.cb().abs(),
    )?;
    let mut best: Option<(f64, f64, f64)> = None;
    for fraction in [0.9, 0.75, 0.5, 0.25, 0.1, 0.05, 0.02, 0.01] {
        let ts = fraction * ts_max;
        let q = match contraction_factor(
            gains.a0,
            cert.gain(),
            l_phi,
            ts,
            cert.eta(),
            eta_prime,
            gains.b0,
            cert.lambda_min(),
        ) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if q >= 1.0 {
            continue;
        }
        let rho = 0.5 * (1.0 + q);
        let m0 = initial_range(
            w0,
            rho,
            q,
            ts,
            gains.b0,
            cert.lambda_min(),
            sequence_gain(cert.eta(), eta_prime, ts)?,
            cert.gain(),
            l_phi,
        )?;
        if best.map_or(true, |(_, _, prev)| m0 > prev) {
            best = Some((ts, rho, m0));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::passify::find_certificate;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chua() -> LurieSystem {
        LurieSystem::chua(10.0, 15.6, 0.33, 0.945).unwrap()
    }

    #[test]
    fn chua_b0_is_exact() {
        // |C*B| = p = 10, K + L_phi = 12.22 -> b0 = 122.2.
        let sys = chua();
        let cert = find_certificate(&sys, 10.0, 0.3).unwrap();
        let gains = error_gains(&sys, &cert, 2.22).unwrap();
        assert_relative_eq!(gains.b0, 122.2, epsilon = 1e-12);
        // a0 = (|C*Ak| + |C*B|*|C|) / sqrt(lambda_min) with
        // C*Ak = [-(p + p*K), p, 0].
        let want = ((110.0f64 * 110.0 + 100.0).sqrt() + 10.0) / cert.lambda_min().sqrt();
        assert_relative_eq!(gains.a0, want, max_relative = 1e-12);
    }

    #[test]
    fn scalar_gains() {
        // A = -1, B = C = 1, P = 1, K = 0, L = 0: a0 = (1 + 1)/1 = 2, b0 = 0.
        let sys = crate::lurie::LurieSystem::new(
            nalgebra::DMatrix::from_row_slice(1, 1, &[-1.0]),
            nalgebra::DVector::from_vec(vec![1.0]),
            nalgebra::RowDVector::from_vec(vec![1.0]),
            crate::lurie::Nonlinearity::piecewise_linear(0.0, 0.0).unwrap(),
        )
        .unwrap();
        let cert = find_certificate(&sys, 0.0, 0.5).unwrap();
        let gains = error_gains(&sys, &cert, 0.0).unwrap();
        assert_relative_eq!(gains.a0, 2.0, epsilon = 1e-12);
        assert_eq!(gains.b0, 0.0);
    }

    #[test]
    fn b0_linear_in_total_gain() {
        let sys = chua();
        let cert = find_certificate(&sys, 10.0, 0.3).unwrap();
        let g1 = error_gains(&sys, &cert, 1.0).unwrap();
        let g2 = error_gains(&sys, &cert, 3.0).unwrap();
        // b0 = |CB| (K + L): slope |CB| = 10 per unit of L.
        assert_relative_eq!(g2.b0 - g1.b0, 20.0, epsilon = 1e-10);
    }

    #[test]
    fn contraction_degenerate_a0() {
        // a0 = 0 kills both correction terms: q = exp(-eta'*Ts).
        let q = contraction_factor(0.0, 1.0, 0.0, 0.1, 0.5, 0.25, 0.0, 1.0).unwrap();
        assert_relative_eq!(q, (-0.025f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn contraction_approaches_one_from_below() {
        // Ts -> 0 with the hold branch dominating: q -> 1 from below.
        let mut prev = f64::NEG_INFINITY;
        for &ts in &[1e-2, 1e-3, 1e-4, 1e-5] {
            let q = contraction_factor(1.0, 1.0, 0.5, ts, 0.5, 0.25, 1.0, 1.0).unwrap();
            assert!(q < 1.0);
            assert!(q > prev);
            prev = q;
        }
    }

    #[test]
    fn contraction_rejects_saturated_sampling() {
        match contraction_factor(1.0, 10.0, 2.22, 0.1, 0.3, 0.15, 122.2, 0.1) {
            Err(Error::Feasibility(_)) => {}
            other => panic!("expected feasibility error, got {other:?}"),
        }
    }

    /// Dual-path oracle: an independently coded expression for q.
    #[test]
    fn contraction_matches_independent_expression() {
        let sys = chua();
        let cert = find_certificate(&sys, 10.0, 0.3).unwrap();
        let l_phi = 2.22;
        let gains = error_gains(&sys, &cert, l_phi).unwrap();
        let (ts, eta, eta_p) = (0.004, 0.3, 0.15);
        let q = contraction_factor(
            gains.a0, 10.0, l_phi, ts, eta, eta_p, gains.b0, cert.lambda_min(),
        )
        .unwrap();
        // Re-derivation through the comparison-inequality coefficient
        // a = Ts*a0*(K+L)/((1-b0*Ts)*sqrt(lam)), q = max(e + a(1-e)/(2n'), a/(2(n-n'))).
        let lam = cert.lambda_min();
        let a = ts * gains.a0 * (10.0 + l_phi) / ((1.0 - gains.b0 * ts) * lam.sqrt());
        let e = (-eta_p * ts).exp();
        let q_independent = (e + a * (1.0 - e) / (2.0 * eta_p)).max(a / (2.0 * (eta - eta_p)));
        assert_relative_eq!(q, q_independent, max_relative = 1e-14);
    }

    #[test]
    fn sequence_gain_examples() {
        // eta = 0.3, eta' = 0.15, Ts = 0.04: max(0.019940..., 10/3) = 10/3.
        let r = sequence_gain(0.3, 0.15, 0.04).unwrap();
        assert_relative_eq!(r, 10.0 / 3.0, epsilon = 1e-12);
        // Large Ts: the hold branch tends to 1/(2 eta').
        let r_long = sequence_gain(10.0, 0.01, 1e4).unwrap();
        assert_relative_eq!(r_long, 50.0, max_relative = 1e-6);
        // eta - eta' -> 0+: diverges through the floor branch.
        let r_tight = sequence_gain(0.3, 0.3 - 1e-9, 0.04).unwrap();
        assert!(r_tight > 1e8);
    }

    #[test]
    fn initial_range_properties() {
        // rho = q gives zero range.
        let m0 = initial_range(1.0, 0.9, 0.9, 0.01, 1.0, 0.1, 2.0, 10.0, 2.22);
        assert!(matches!(m0, Err(Error::Feasibility(_))));
        let m0a = initial_range(1.0, 0.95, 0.9, 0.01, 1.0, 0.1, 2.0, 10.0, 2.22).unwrap();
        let m0b = initial_range(2.0, 0.95, 0.9, 0.01, 1.0, 0.1, 2.0, 10.0, 2.22).unwrap();
        assert!(m0a > 0.0);
        // Doubling W0 doubles M0.
        assert_relative_eq!(m0b, 2.0 * m0a, epsilon = 1e-15);
    }

    /// Dual-path oracle for the full Chua-derived range formula.
    #[test]
    fn initial_range_matches_independent_expression() {
        let sys = chua();
        let cert = find_certificate(&sys, 10.0, 0.3).unwrap();
        let l_phi = 2.22;
        let gains = error_gains(&sys, &cert, l_phi).unwrap();
        // Pick a contraction-compatible sampling period.
        let ts = 0.4
            * sampling_threshold(10.0, l_phi, 0.3, 0.15, cert.lambda_min(), gains.a0, 10.0)
                .unwrap();
        let q = contraction_factor(
            gains.a0, 10.0, l_phi, ts, 0.3, 0.15, gains.b0, cert.lambda_min(),
        )
        .unwrap();
        assert!(q < 1.0);
        let rho = 0.5 * (1.0 + q);
        let r = sequence_gain(0.3, 0.15, ts).unwrap();
        let m0 = initial_range(2.0, rho, q, ts, gains.b0, cert.lambda_min(), r, 10.0, l_phi)
            .unwrap();
        let lam = cert.lambda_min();
        let m0_independent =
            2.0 * (rho - q) * (1.0 - ts * gains.b0) * lam.sqrt() / (r * (10.0 + l_phi));
        assert!(m0 > 0.0);
        assert_relative_eq!(m0, m0_independent, max_relative = 1e-14);
    }

    #[test]
    fn threshold_third_branch_for_chua_gains() {
        // With K = 10, L = 2.22, |CB| = 10, the rate-independent branch alone
        // caps Ts at 1/122.2.
        let ts = sampling_threshold(10.0, 2.22, 0.3, 0.15, 1e12, 1e-9, 10.0).unwrap();
        assert_relative_eq!(ts, 1.0 / 122.2, max_relative = 1e-12);
    }

    #[test]
    fn threshold_monotonicity() {
        // Larger K shrinks the admissible sampling period.
        let t1 = sampling_threshold(5.0, 2.22, 0.3, 0.15, 0.1, 100.0, 10.0).unwrap();
        let t2 = sampling_threshold(10.0, 2.22, 0.3, 0.15, 0.1, 100.0, 10.0).unwrap();
        assert!(t2 < t1);
        // a0 -> infinity forces Ts -> 0 through the first two branches.
        let t3 = sampling_threshold(10.0, 2.22, 0.3, 0.15, 0.1, 1e12, 10.0).unwrap();
        assert!(t3 < 1e-10);
    }

    #[test]
    fn envelope_step_examples() {
        assert_eq!(envelope_step(1.0, 0.0, 0.5, 2.0), 0.5);
        assert_eq!(envelope_step(0.0, 1.0, 0.5, 2.0), 2.0);
    }

    #[test]
    fn envelope_bound_examples() {
        // b = 0: pure geometric decay.
        assert_relative_eq!(
            envelope_bound(3.0, &[0.0; 10], 0.5, 2.0, 10),
            3.0 * 0.5f64.powi(10),
            epsilon = 1e-15
        );
        // k = 1 agrees with a single step.
        let b = [0.7];
        assert_relative_eq!(
            envelope_bound(1.0, &b, 0.5, 2.0, 1),
            envelope_step(1.0, 0.7, 0.5, 2.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn recursion_matches_closed_form_on_random_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let q: f64 = rng.random_range(0.1..0.99);
            let r: f64 = rng.random_range(0.1..5.0);
            let w0: f64 = rng.random_range(0.0..10.0);
            let len = rng.random_range(1..40usize);
            let b: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..2.0)).collect();
            let mut w = w0;
            for (k, &bk) in b.iter().enumerate() {
                w = envelope_step(w, bk, q, r);
                let closed = envelope_bound(w0, &b, q, r, k + 1);
                assert_relative_eq!(w, closed, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn matched_drive_gives_exact_rho_decay() {
        // b[k] = ((rho - q)/r) rho^k W0 turns the recursion into W[k] = rho^k W0.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let q: f64 = rng.random_range(0.05..0.95);
            let rho: f64 = rng.random_range(q + 0.01..0.999);
            let r: f64 = rng.random_range(0.5..4.0);
            let w0: f64 = rng.random_range(0.1..5.0);
            let b: Vec<f64> = (0..30)
                .map(|k| (rho - q) / r * rho.powi(k) * w0)
                .collect();
            let mut w = w0;
            for (k, &bk) in b.iter().enumerate() {
                w = envelope_step(w, bk, q, r);
                let want = rho.powi(k as i32 + 1) * w0;
                assert_relative_eq!(w, want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn ode_check_pure_exponential() {
        // a = 0, b = 0: W(t_{k+1}) = exp(-eta Ts) W(t_k), below q = exp(-eta' Ts).
        let report = envelope_ode_check(0.5, 0.25, 0.0, &[0.0; 5], 0.2, 1.0, 2000, 1e-9).unwrap();
        assert!(report.passed, "excess {}", report.max_excess);
        assert!(report.max_excess < 0.0);
    }

    #[test]
    fn ode_check_constant_drive_settles_below_geometric_limit() {
        // Constant b: the recursion limit is r*b/(1-q) plus transient.
        let (eta, eta_p, ts) = (1.0, 0.5, 0.1);
        let a = 0.3;
        let b = vec![0.8; 200];
        let report = envelope_ode_check(eta, eta_p, a, &b, ts, 5.0, 2000, 1e-6).unwrap();
        assert!(report.passed);
        // Iterate the recursion to its limit and compare orders of magnitude.
        let limit = report.r * 0.8 / (1.0 - report.q);
        let mut w = 5.0;
        for _ in 0..200 {
            w = envelope_step(w, 0.8, report.q, report.r);
        }
        assert!(w <= limit + 1e-9);
    }

    #[test]
    fn ode_check_random_feasible_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..20 {
            let eta: f64 = rng.random_range(0.1..2.0);
            let eta_p: f64 = eta * rng.random_range(0.2..0.8);
            let ts: f64 = rng.random_range(0.01..0.5);
            // q < 1 iff a < 2*min(eta', eta - eta').
            let a = 2.0 * eta_p.min(eta - eta_p) * rng.random_range(0.1..0.8);
            let b: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
            let report =
                envelope_ode_check(eta, eta_p, a, &b, ts, rng.random_range(0.0..3.0), 10_000, 1e-6)
                    .unwrap();
            assert!(
                report.passed,
                "excess {} with q = {}",
                report.max_excess, report.q
            );
        }
    }

    #[test]
    fn ode_check_reports_non_contraction() {
        // a too large: q >= 1 must surface as an error, not a panic.
        match envelope_ode_check(0.5, 0.25, 10.0, &[0.0; 3], 0.1, 1.0, 100, 1e-6) {
            Err(Error::Feasibility(_)) => {}
            other => panic!("expected feasibility error, got {other:?}"),
        }
    }

    #[test]
    fn q_monotone_in_sampled_directions() {
        // Sampled finite differences around a Chua-like operating point.
        let base = (120.0, 10.0, 2.22, 2e-4, 0.3, 0.15, 122.2, 0.09);
        let q_at = |a0: f64, gain: f64, l: f64, ts: f64, lam: f64| {
            contraction_factor(a0, gain, l, ts, base.4, base.5, base.6, lam).unwrap()
        };
        let q0 = q_at(base.0, base.1, base.2, base.3, base.7);
        assert!(q_at(base.0 * 1.1, base.1, base.2, base.3, base.7) >= q0);
        assert!(q_at(base.0, base.1 + 1.0, base.2, base.3, base.7) >= q0);
        assert!(q_at(base.0, base.1, base.2 + 0.5, base.3, base.7) >= q0);
        assert!(q_at(base.0, base.1, base.2, base.3 * 1.5, base.7) >= q0);
        assert!(q_at(base.0, base.1, base.2, base.3, base.7 * 1.2) <= q0);
    }

    #[test]
    fn first_order_expansion_error_shrinks_quadratically() {
        // |q_exact - q_first_order| = O(Ts^2): successive halvings shrink the
        // error by about 4.
        let (a0, gain, l, eta, eta_p, b0, lam) = (50.0, 10.0, 2.22, 0.3, 0.15, 122.2, 0.09);
        let err_at = |ts: f64| {
            let exact =
                contraction_factor(a0, gain, l, ts, eta, eta_p, b0, lam).unwrap();
            let first_order = (1.0 - eta_p * ts
                + ts * ts * a0 * (gain + l) / (2.0 * lam.sqrt()))
            .max(ts * a0 * (gain + l) / (2.0 * (eta - eta_p) * lam.sqrt()));
            (exact - first_order).abs()
        };
        let mut ts = 1e-5;
        let mut prev = err_at(ts);
        for _ in 0..3 {
            ts /= 2.0;
            let cur = err_at(ts);
            let ratio = prev / cur;
            // At least quadratic shrink; higher-order terms may push it past 4.
            assert!(ratio > 3.2, "expected >= ~4x shrink, got {ratio} at Ts = {ts}");
            prev = cur;
        }
    }

    #[test]
    fn feasibility_chain_admits_rho() {
        // Whenever q < 1 and Ts is below the threshold, the midpoint
        // rho = (1+q)/2 yields a positive range.
        let sys = chua();
        let cert = find_certificate(&sys, 10.0, 0.3).unwrap();
        let l_phi = sys.phi_lipschitz();
        let gains = error_gains(&sys, &cert, l_phi).unwrap();
        let ts_max = sampling_threshold(
            10.0, l_phi, 0.3, 0.15, cert.lambda_min(), gains.a0, 10.0,
        )
        .unwrap();
        for fraction in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let ts = fraction * ts_max;
            let q = contraction_factor(
                gains.a0, 10.0, l_phi, ts, 0.3, 0.15, gains.b0, cert.lambda_min(),
            )
            .unwrap();
            assert!(q < 1.0, "q = {q} at fraction {fraction}");
            let rho = 0.5 * (1.0 + q);
            let r = sequence_gain(0.3, 0.15, ts).unwrap();
            let m0 = initial_range(
                1.0, rho, q, ts, gains.b0, cert.lambda_min(), r, 10.0, l_phi,
            )
            .unwrap();
            assert!(m0 > 0.0 && m0.is_finite());
        }
    }

    #[test]
    fn derive_design_flags_figure_mode_conflict() {
        // Paper-style settings (Ts = 0.04) violate Ts*b0 < 1, so q is absent
        // and the contraction verdict is false.
        let sys = chua();
        let cert = find_certificate(&sys, 10.0, 0.3).unwrap();
        let d = derive_design(&sys, &cert, 0.15, 0.04, (-0.3f64 * 0.04).exp(), 1.0).unwrap();
        assert!(d.q.is_none());
        assert!(!d.contraction_ok);
        assert!(!d.threshold_ok);
        // At a contraction-compatible Ts the verdicts flip.
        let rec = recommend_coder(&sys, &cert, 0.15, 1.0).unwrap().unwrap();
        let d2 = derive_design(&sys, &cert, 0.15, rec.0, rec.1, 1.0).unwrap();
        assert!(d2.contraction_ok, "{d2:?}");
        assert!(d2.threshold_ok);
        assert!(!d2.rho_conflict);
        assert!(d2.m0_bound.unwrap() > 0.0);
    }
}
