//! Passification certificates: search and verification.
//!
//! A certificate is a triple `(P, K, eta)` with `P = P'` positive definite
//! satisfying
//!
//! ```text
//! P*Ak + Ak'*P <= -2*eta*P,    P*B = C',    Ak = A - B*K*C.
//! ```
//!
//! Such a pair `(P, K)` exists if and only if the transfer function is
//! hyper-minimum-phase, and then any sufficiently large gain works. The
//! search solves `P*B = C'` exactly (it is a rank-n linear constraint on
//! symmetric matrices when `B != 0`) and explores the remaining
//! `n*(n-1)/2`-dimensional affine family with multi-start Nelder-Mead on
//!
//! ```text
//! max( lambda_max(P*Ak + Ak'*P + 2*eta*P),  margin - lambda_min(P) )
//! ```
//!
//! declaring feasibility when the objective is at most `-1e-6`. Minimizing
//! the max pushes the closed-loop residual down and `lambda_min(P)` up at the
//! same time, so the reported certificate is comfortably interior whenever
//! one exists.

use crate::error::{Error, InfeasibilityReport, Result};
use crate::linalg;
use crate::lurie::{hmp_check, LurieSystem};
use crate::neldermead;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Feasibility is declared when the search objective reaches this level.
const FEASIBLE_OBJECTIVE: f64 = -1e-6;
/// Number of random restarts before a `(K, eta)` pair is declared infeasible.
const RESTARTS: usize = 32;
/// Default tolerance for certificate verification.
pub const DEFAULT_TOL: f64 = 1e-8;
const SEARCH_SEED: u64 = 0x5EED_CE27;

/// A verified storage-function witness for output-feedback passivity with
/// decay rate `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PassificationCertificate {
    p: DMatrix<f64>,
    gain: f64,
    eta: f64,
    lambda_min: f64,
    residual_lmi: f64,
    residual_pb: f64,
}

impl PassificationCertificate {
    /// Wrap a candidate `P` after verifying it against `sys` at the default
    /// tolerance. `P` must be exactly symmetric and actually certify.
    pub fn from_parts(sys: &LurieSystem, p: DMatrix<f64>, gain: f64, eta: f64) -> Result<Self> {
        let report = verify_certificate(sys, &p, gain, eta, DEFAULT_TOL)?;
        if !report.pass {
            return Err(Error::Feasibility(format!(
                "candidate P fails verification: residual_lmi = {:e}, residual_pb = {:e}, lambda_min = {:e}",
                report.residual_lmi, report.residual_pb, report.lambda_min
            )));
        }
        Ok(PassificationCertificate {
            p,
            gain,
            eta,
            lambda_min: report.lambda_min,
            residual_lmi: report.residual_lmi,
            residual_pb: report.residual_pb,
        })
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn residual_lmi(&self) -> f64 {
        self.residual_lmi
    }

    pub fn residual_pb(&self) -> f64 {
        self.residual_pb
    }
}

/// Verification outcome for a candidate `(P, K, eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// `lambda_max(P*Ak + Ak'*P + 2*eta*P)`; non-positive within tolerance
    /// for a valid certificate.
    pub residual_lmi: f64,
    /// `max |P*B - C'|`.
    pub residual_pb: f64,
    /// Smallest eigenvalue of `P`.
    pub lambda_min: f64,
    /// `(P > 0) && residual_lmi <= tol && residual_pb <= tol`.
    pub pass: bool,
}

/// Check a candidate certificate. Rejects non-symmetric `P` before any
/// eigenanalysis; `tol` bounds both residuals.
pub fn verify_certificate(
    sys: &LurieSystem,
    p: &DMatrix<f64>,
    gain: f64,
    eta: f64,
    tol: f64,
) -> Result<CertificateReport> {
    if tol <= 0.0 {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let n = sys.n();
    if p.nrows() != n || p.ncols() != n {
        return Err(Error::Config(format!(
            "P must be {n}x{n}, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let asym = linalg::max_asymmetry(p);
    if asym > 0.0 {
        return Err(Error::NonSymmetric(format!(
            "P deviates from its transpose by {asym:e}"
        )));
    }
    let a_k = sys.a_closed(gain);
    let s = p * &a_k + a_k.transpose() * p + p * (2.0 * eta);
    // S is symmetric in exact arithmetic; fold rounding asymmetry before Jacobi.
    let residual_lmi = linalg::lambda_max(&linalg::symmetrize(&s));
    let pb = p * sys.b();
    let residual_pb = (0..n)
        .map(|i| (pb[i] - sys.c()[i]).abs())
        .fold(0.0f64, f64::max);
    let lambda_min = linalg::lambda_min(p);
    let pass = lambda_min > 0.0 && residual_lmi <= tol && residual_pb <= tol;
    Ok(CertificateReport {
        residual_lmi,
        residual_pb,
        lambda_min,
        pass,
    })
}

/// Smallest eigenvalue of a symmetric matrix; rejects asymmetric input.
pub fn lambda_min_of(p: &DMatrix<f64>) -> Result<f64> {
    if p.nrows() != p.ncols() {
        return Err(Error::Config("matrix must be square".into()));
    }
    let asym = linalg::max_asymmetry(p);
    if asym > 0.0 {
        return Err(Error::NonSymmetric(format!(
            "matrix deviates from its transpose by {asym:e}"
        )));
    }
    Ok(linalg::lambda_min(p))
}

/// Search for a certificate at the given gain and decay rate.
///
/// Fails structurally (no gain can help) when the system is not
/// hyper-minimum-phase; otherwise runs the multi-start search and returns
/// either a certificate that passes [`verify_certificate`] at `1e-8` or an
/// [`InfeasibilityReport`] suggesting a larger gain.
pub fn find_certificate(
    sys: &LurieSystem,
    gain: f64,
    eta: f64,
) -> Result<PassificationCertificate> {
    let tf = sys.transfer_function();
    let hmp = hmp_check(&tf);
    if !hmp.is_hmp {
        return Err(Error::NotHyperMinimumPhase(
            hmp.reason
                .unwrap_or_else(|| "numerator test failed".into()),
        ));
    }
    if !(eta > 0.0) {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }

    let b = sys.b();
    let btb = b.dot(b);
    if btb == 0.0 {
        return Err(Error::Config("B must be nonzero".into()));
    }

    // Particular symmetric solution of P*B = C' :
    //   P0 = (v*B' + B*v')/(B'B) - (B'v) * B*B'/(B'B)^2,   v = C'.
    let v = sys.c().transpose();
    let p0 = (&v * b.transpose() + b * v.transpose()) / btb
        - (b * b.transpose()) * (b.dot(&v) / (btb * btb));

    // Orthonormal basis of the orthogonal complement of B spans the null
    // space: symmetric N with N*B = 0 are exactly those supported on it.
    let u = orthogonal_complement(b);
    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    for i in 0..u.len() {
        for j in i..u.len() {
            basis.push(&u[i] * u[j].transpose() + &u[j] * u[i].transpose());
        }
    }
    let dim = basis.len();

    let a_k = sys.a_closed(gain);
    let margin = 0.01 * sys.c().norm() / b.norm();
    let assemble = |theta: &[f64]| -> DMatrix<f64> {
        let mut p = p0.clone();
        for (t, e) in theta.iter().zip(&basis) {
            p += e * *t;
        }
        // Exact symmetry: mirror the upper triangle.
        let n = p.nrows();
        for i in 0..n {
            for j in i + 1..n {
                let val = p[(i, j)];
                p[(j, i)] = val;
            }
        }
        p
    };
    let objective = |theta: &[f64]| -> f64 {
        let p = assemble(theta);
        let s = &p * &a_k + a_k.transpose() * &p + &p * (2.0 * eta);
        let lmax = linalg::lambda_max(&linalg::symmetrize(&s));
        let lmin = linalg::lambda_min(&p);
        lmax.max(margin - lmin)
    };

    let scale = 1.0 + p0.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(SEARCH_SEED);
    let mut best_theta = vec![0.0; dim];
    let mut best_value = f64::INFINITY;
    for restart in 0..RESTARTS {
        let start: Vec<f64> = if restart == 0 {
            vec![0.0; dim]
        } else {
            (0..dim)
                .map(|_| rng.random_range(-2.0 * scale..2.0 * scale))
                .collect()
        };
        let (theta, value) = neldermead::minimize(
            objective,
            &start,
            0.3 * scale,
            neldermead::Options::default(),
        );
        // Strictly-lower comparison keeps the earliest restart on ties.
        if value < best_value {
            best_value = value;
            best_theta = theta;
        }
    }

    if best_value <= FEASIBLE_OBJECTIVE {
        let p = assemble(&best_theta);
        return PassificationCertificate::from_parts(sys, p, gain, eta);
    }
    Err(Error::SearchInfeasible(InfeasibilityReport {
        gain,
        eta,
        eta0: hmp.eta0,
        best_objective: best_value,
        restarts: RESTARTS,
        hint: if eta >= hmp.eta0 {
            format!(
                "eta = {eta} is not below the numerator stability degree eta0 = {}; lower eta",
                hmp.eta0
            )
        } else {
            "increase the gain K: any sufficiently large gain is feasible for an HMP system"
                .to_string()
        },
    }))
}

/// Convenience: double the gain from 1 until [`find_certificate`] succeeds.
/// Returns the first feasible `(K, certificate)`; gives up above `1e6`.
pub fn find_certificate_with_gain_search(
    sys: &LurieSystem,
    eta: f64,
) -> Result<(f64, PassificationCertificate)> {
    let mut gain = 1.0;
    let mut last_err = None;
    while gain <= 1e6 {
        match find_certificate(sys, gain, eta) {
            Ok(cert) => return Ok((gain, cert)),
            Err(e @ Error::NotHyperMinimumPhase(_)) => return Err(e),
            Err(e) => last_err = Some(e),
        }
        gain *= 2.0;
    }
    Err(last_err.unwrap_or_else(|| Error::Feasibility("gain search exhausted".into())))
}

/// Orthonormal basis of `span(b)`-perp via Gram-Schmidt over the coordinate
/// directions.
fn orthogonal_complement(b: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = b.len();
    let mut basis: Vec<DVector<f64>> = vec![b / b.norm()];
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut cand = DVector::zeros(n);
        cand[i] = 1.0;
        for q in &basis {
            let proj = q.dot(&cand);
            cand -= q * proj;
        }
        let norm = cand.norm();
        if norm > 1e-10 {
            basis.push(cand / norm);
        }
    }
    basis.remove(0);
    basis
}
