//! Real polynomials with complex root extraction for low degrees.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Real polynomial stored with ascending powers: `coeffs[k]` multiplies `x^k`.
///
/// Trailing (highest-power) zero coefficients are kept as given; [`Poly::degree`]
/// reports the index of the highest exactly nonzero coefficient. Coefficients
/// are treated as exact inputs, so degree detection uses no tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        Poly { coeffs }
    }

    /// Ascending coefficients, as stored.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|&c| c != 0.0)
    }

    /// Coefficient of `x^k` (zero beyond the stored length).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(vec![0.0]);
        }
        Poly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as f64 + 1.0) * c)
                .collect(),
        )
    }

    /// All complex roots. Degree 1 and 2 use closed forms; higher degrees use
    /// Durand-Kerner iteration followed by a Newton polish. Residuals are
    /// checked against a 1e-10 scale-relative tolerance.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let deg = self
            .degree()
            .ok_or_else(|| Error::Config("zero polynomial has no roots".into()))?;
        if deg == 0 {
            return Ok(Vec::new());
        }
        // Monic normalization.
        let lead = self.coeffs[deg];
        let monic: Vec<f64> = self.coeffs[..=deg].iter().map(|c| c / lead).collect();
        match deg {
            1 => Ok(vec![Complex64::new(-monic[0], 0.0)]),
            2 => Ok(quadratic_roots(monic[1], monic[0])),
            _ => durand_kerner(&monic, self),
        }
    }
}

impl std::fmt::Display for Poly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let deg = self.degree().unwrap_or(0);
        let mut first = true;
        for k in (0..=deg).rev() {
            let c = self.coeff(k);
            if c == 0.0 && deg > 0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { "-" } else { "+" })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let mag = c.abs();
            match k {
                0 => write!(f, "{mag}")?,
                1 => write!(f, "{mag}*x")?,
                _ => write!(f, "{mag}*x^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

/// Roots of `x^2 + b x + c` with a cancellation-safe formulation.
fn quadratic_roots(b: f64, c: f64) -> Vec<Complex64> {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // Avoid subtracting nearly equal quantities.
        let q = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if q == 0.0 {
            (0.0, 0.0)
        } else {
            (q, c / q)
        };
        vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]
    } else {
        let re = -b / 2.0;
        let im = (-disc).sqrt() / 2.0;
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn durand_kerner(monic: &[f64], original: &Poly) -> Result<Vec<Complex64>> {
    let deg = monic.len() - 1;
    let eval = |x: Complex64| -> Complex64 {
        monic
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    };
    // Cauchy-style radius bound keeps the start points near the root annulus.
    let radius = 1.0
        + monic[..deg]
            .iter()
            .fold(0.0f64, |m, &c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg)
        .map(|k| seed.powu(k as u32 + 1) * radius)
        .collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                // Perturb coincident iterates.
                roots[i] += Complex64::new(1e-8, 1e-8);
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * radius.max(1.0) {
            break;
        }
    }
    // Newton polish on the original (unscaled) polynomial.
    let dp = original.derivative();
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = dp.eval_complex(*r);
            if d.norm() == 0.0 {
                break;
            }
            *r -= original.eval_complex(*r) / d;
        }
    }
    // Residual gate.
    let lead = original.coeff(original.degree().unwrap());
    for r in &roots {
        let scale = lead.abs() * r.norm().max(1.0).powi(deg as i32);
        let res = original.eval_complex(*r).norm();
        if res > 1e-10 * scale.max(1.0) {
            return Err(Error::Config(format!(
                "root refinement did not converge: residual {res:e} at {r}"
            )));
        }
    }
    Ok(roots)
}
