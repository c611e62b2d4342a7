//! Lurie-form system models, exact transfer functions and the
//! hyper-minimum-phase (HMP) test.
//!
//! A Lurie system splits into a linear triple `(A, B, C)` and a scalar output
//! nonlinearity acting through the input channel:
//!
//! ```text
//! x' = A x + B phi(y),   y = C x
//! ```
//!
//! The transfer function `W(s) = C (sI - A)^-1 B = num(s) / den(s)` is
//! computed exactly (up to rounding) with the Faddeev-LeVerrier recursion, so
//! no eigensolver is involved for the polynomial coefficients themselves.

use crate::error::{Error, Result};
use crate::poly::Poly;
use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

/// Scalar output nonlinearity.
///
/// The piecewise-linear family `phi(y) = m0*y + m1*(|y+1| - |y-1|)` covers the
/// Chua diode characteristic; `Custom` is an escape hatch for other maps, in
/// which case the caller supplies the Lipschitz constant.
#[derive(Debug, Clone, Copy)]
pub enum Nonlinearity {
    PiecewiseLinear { m0: f64, m1: f64 },
    Custom { f: fn(f64) -> f64, lipschitz: f64 },
}

impl PartialEq for Nonlinearity {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Nonlinearity::PiecewiseLinear { m0: a0, m1: a1 },
                Nonlinearity::PiecewiseLinear { m0: b0, m1: b1 },
            ) => a0 == b0 && a1 == b1,
            (
                Nonlinearity::Custom { f: fa, lipschitz: la },
                Nonlinearity::Custom { f: fb, lipschitz: lb },
            ) => std::ptr::fn_addr_eq(*fa, *fb) && la == lb,
            _ => false,
        }
    }
}

impl Nonlinearity {
    /// `phi(y) = m0*y + m1*(|y+1| - |y-1|)`; requires `m0, m1 >= 0` so the
    /// reported Lipschitz constant is exact.
    pub fn piecewise_linear(m0: f64, m1: f64) -> Result<Self> {
        if !(m0 >= 0.0 && m1 >= 0.0) || !m0.is_finite() || !m1.is_finite() {
            return Err(Error::Config(format!(
                "piecewise-linear slopes must be finite and non-negative, got m0 = {m0}, m1 = {m1}"
            )));
        }
        Ok(Nonlinearity::PiecewiseLinear { m0, m1 })
    }

    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Nonlinearity::PiecewiseLinear { m0, m1 } => pwl_eval(m0, m1, y),
            Nonlinearity::Custom { f, .. } => f(y),
        }
    }

    /// Global Lipschitz constant. For the piecewise-linear family this is the
    /// inner-segment slope `m0 + 2*m1`, which is exact.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Nonlinearity::PiecewiseLinear { m0, m1 } => m0 + 2.0 * m1,
            Nonlinearity::Custom { lipschitz, .. } => lipschitz,
        }
    }
}

/// `m0*y + m1*(|y+1| - |y-1|)`.
pub fn pwl_eval(m0: f64, m1: f64, y: f64) -> f64 {
    m0 * y + m1 * ((y + 1.0).abs() - (y - 1.0).abs())
}

/// State-space Lurie model with a single input and a single output.
#[derive(Debug, Clone, PartialEq)]
pub struct LurieSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
    phi: Nonlinearity,
}

impl LurieSystem {
    /// Build from explicit matrices. Dimensions must be consistent and all
    /// entries finite.
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: RowDVector<f64>,
        phi: Nonlinearity,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::Config("state dimension must be at least 1".into()));
        }
        if a.ncols() != n {
            return Err(Error::Config(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.len() != n || c.len() != n {
            return Err(Error::Config(format!(
                "B and C must have length {n}, got {} and {}",
                b.len(),
                c.len()
            )));
        }
        if a.iter().any(|v| !v.is_finite())
            || b.iter().any(|v| !v.is_finite())
            || c.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Config("matrix entries must be finite".into()));
        }
        Ok(LurieSystem { a, b, c, phi })
    }

    /// The Chua circuit in Lurie form:
    ///
    /// ```text
    ///     [ -p   p   0 ]       [ p ]
    /// A = [  1  -1   1 ],  B = [ 0 ],  C = [1 0 0],
    ///     [  0  -q   0 ]       [ 0 ]
    /// ```
    ///
    /// with the piecewise-linear diode `phi`. Requires `p > 0`, `q > 0` (the
    /// HMP property of the numerator `p*(s^2 + s + q)` holds exactly there).
    pub fn chua(p: f64, q: f64, m0: f64, m1: f64) -> Result<Self> {
        if !(p > 0.0) || !(q > 0.0) {
            return Err(Error::Config(format!(
                "Chua parameters must satisfy p > 0 and q > 0, got p = {p}, q = {q}"
            )));
        }
        let a = DMatrix::from_row_slice(3, 3, &[-p, p, 0.0, 1.0, -1.0, 1.0, 0.0, -q, 0.0]);
        let b = DVector::from_vec(vec![p, 0.0, 0.0]);
        let c = RowDVector::from_vec(vec![1.0, 0.0, 0.0]);
        LurieSystem::new(a, b, c, Nonlinearity::piecewise_linear(m0, m1)?)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    pub fn phi(&self) -> &Nonlinearity {
        &self.phi
    }

    pub fn phi_eval(&self, y: f64) -> f64 {
        self.phi.eval(y)
    }

    pub fn phi_lipschitz(&self) -> f64 {
        self.phi.lipschitz()
    }

    /// Scalar `C * B`.
    pub fn cb(&self) -> f64 {
        (&self.c * &self.b)[(0, 0)]
    }

    /// Closed-loop matrix `A - B K C` for a scalar output gain.
    pub fn a_closed(&self, gain: f64) -> DMatrix<f64> {
        &self.a - &self.b * gain * &self.c
    }

    /// Exact transfer function `W(s) = C (sI - A)^-1 B` via Faddeev-LeVerrier.
    ///
    /// The denominator is the (monic) characteristic polynomial of `A`; the
    /// numerator has degree at most `n - 1`.
    pub fn transfer_function(&self) -> RationalTransfer {
        let n = self.n();
        // M_1 = I, c_1 = -tr(A); M_{k+1} = A M_k + c_k I, c_{k+1} = -tr(A M_{k+1})/(k+1).
        // (sI - A)^-1 = (M_1 s^{n-1} + ... + M_n) / (s^n + c_1 s^{n-1} + ... + c_n)
        let mut den = vec![0.0; n + 1];
        den[n] = 1.0;
        let mut num = vec![0.0; n];
        let mut m_k = DMatrix::<f64>::identity(n, n);
        let mut c_k = -(self.a.clone() * &m_k).trace();
        den[n - 1] = c_k;
        num[n - 1] = (&self.c * &m_k * &self.b)[(0, 0)];
        for k in 2..=n {
            m_k = &self.a * &m_k + DMatrix::<f64>::identity(n, n) * c_k;
            num[n - k] = (&self.c * &m_k * &self.b)[(0, 0)];
            c_k = -(&self.a * &m_k).trace() / k as f64;
            den[n - k] = c_k;
        }
        RationalTransfer {
            num: Poly::new(num),
            den: Poly::new(den),
            n,
        }
    }
}

/// Rational transfer function `num(s) / den(s)` with a monic denominator of
/// degree equal to the state dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransfer {
    num: Poly,
    den: Poly,
    n: usize,
}

impl RationalTransfer {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        let n = den
            .degree()
            .ok_or_else(|| Error::Config("denominator must be nonzero".into()))?;
        if den.coeff(n) != 1.0 {
            return Err(Error::Config(
                "denominator must be monic (leading coefficient 1)".into(),
            ));
        }
        if let Some(dn) = num.degree() {
            if dn >= n {
                return Err(Error::Config(format!(
                    "numerator degree {dn} must be below denominator degree {n}"
                )));
            }
        }
        Ok(RationalTransfer { num, den, n })
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    /// Denominator degree (state dimension of the realization).
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }
}

/// Outcome of the hyper-minimum-phase test.
#[derive(Debug, Clone, PartialEq)]
pub struct HmpReport {
    /// True iff the numerator has degree `n - 1`, strictly positive
    /// coefficients and all roots in the open left half-plane.
    pub is_hmp: bool,
    /// Stability degree of the numerator: `min(-Re r)` over its roots.
    /// Meaningful (positive) only when `is_hmp` holds; 0.0 otherwise.
    pub eta0: f64,
    /// Numerator degree, if the numerator is nonzero.
    pub num_degree: Option<usize>,
    /// Numerator roots (empty when the numerator is constant or zero).
    pub numerator_roots: Vec<Complex64>,
    /// Diagnostic for a failed test.
    pub reason: Option<String>,
}

/// Hyper-minimum-phase test on a transfer function.
///
/// The check is by explicit root computation, which also yields the stability
/// degree. The positive-coefficient test is strict, with no tolerance:
/// coefficients are exact inputs.
pub fn hmp_check(tf: &RationalTransfer) -> HmpReport {
    let n = tf.order();
    let fail = |reason: String, deg: Option<usize>, roots: Vec<Complex64>| HmpReport {
        is_hmp: false,
        eta0: 0.0,
        num_degree: deg,
        numerator_roots: roots,
        reason: Some(reason),
    };
    let deg = match tf.num().degree() {
        Some(d) => d,
        None => return fail("numerator is identically zero".into(), None, Vec::new()),
    };
    if deg + 1 != n {
        return fail(
            format!("numerator degree {deg} differs from n - 1 = {}", n - 1),
            Some(deg),
            Vec::new(),
        );
    }
    for k in 0..=deg {
        if tf.num().coeff(k) <= 0.0 {
            return fail(
                format!(
                    "numerator coefficient of s^{k} is {} (must be strictly positive)",
                    tf.num().coeff(k)
                ),
                Some(deg),
                Vec::new(),
            );
        }
    }
    let roots = match tf.num().roots() {
        Ok(r) => r,
        Err(e) => return fail(format!("root computation failed: {e}"), Some(deg), Vec::new()),
    };
    let max_re = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return fail(
            format!("numerator has a root with real part {max_re} >= 0"),
            Some(deg),
            roots,
        );
    }
    HmpReport {
        is_hmp: true,
        eta0: -max_re,
        num_degree: Some(deg),
        numerator_roots: roots,
        reason: None,
    }
}
