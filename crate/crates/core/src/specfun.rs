//! Complementary error function and exponential integral.
//!
//! Both are evaluated with fixed series / continued-fraction recipes written
//! out here, so results do not depend on the platform libm. The closed-form
//! channel expressions subtract large, nearly equal erfc/Ei groups, and ulp
//! drift between targets would otherwise show up in the last digits.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Below this argument erfc is taken as 1 − erf from the power series; above
/// it the Laplace continued fraction is used.
const ERFC_SERIES_LIMIT: f64 = 2.5;

/// Below |x| = 1.5 Ei uses the γ + ln|x| + Σ xᵏ/(k·k!) series.
const EI_SERIES_LIMIT: f64 = 1.5;

const MAX_ITER: usize = 500;

/// Accuracy contract the special functions are validated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for Accuracy {
    fn default() -> Self {
        Accuracy {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
        }
    }
}

impl Accuracy {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::domain("abs_tol", abs_tol, "must be > 0"));
        }
        if !(rel_tol > 0.0) {
            return Err(Error::domain("rel_tol", rel_tol, "must be > 0"));
        }
        Ok(Accuracy { abs_tol, rel_tol })
    }

    /// True when `value` is within either tolerance of `reference`.
    pub fn accepts(&self, value: f64, reference: f64) -> bool {
        let diff = (value - reference).abs();
        diff <= self.abs_tol || diff <= self.rel_tol * reference.abs()
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("x", x, "erfc requires a finite argument"));
    }
    Ok(erfc_f(x))
}

/// Scaled complementary error function exp(x²)·erfc(x) for x ≥ 0.
pub fn erfcx(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain("x", x, "erfcx requires finite x >= 0"));
    }
    Ok(erfcx_f(x))
}

/// Exponential integral Ei(x) for negative x, i.e. −E₁(−x).
pub fn expint_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) || !x.is_finite() {
        return Err(Error::domain("x", x, "Ei is only provided for finite x < 0"));
    }
    Ok(ei_neg_f(x))
}

pub(crate) fn erfc_f(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_f(-x);
    }
    if x < ERFC_SERIES_LIMIT {
        1.0 - erf_series(x)
    } else {
        let x2 = x * x;
        if x2 > 745.0 {
            return 0.0;
        }
        (-x2).exp() * erfc_cf(x)
    }
}

pub(crate) fn erfcx_f(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < ERFC_SERIES_LIMIT {
        (x * x).exp() * (1.0 - erf_series(x))
    } else {
        erfc_cf(x)
    }
}

/// erf(x) = (2/√π)·e^{−x²}·Σ 2ⁿx^{2n+1}/(2n+1)!!, all terms positive.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..MAX_ITER {
        term *= 2.0 * x2 / (2 * n + 1) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// Laplace continued fraction for erfcx, x ≥ ERFC_SERIES_LIMIT, by modified Lentz:
/// erfcx(x) = (1/√π) / (x + (1/2)/(x + 1/(x + (3/2)/(x + …)))).
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..MAX_ITER {
        let a = n as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    INV_SQRT_PI / f
}

pub(crate) fn ei_neg_f(x: f64) -> f64 {
    debug_assert!(x < 0.0);
    let z = -x;
    if z < EI_SERIES_LIMIT {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..MAX_ITER {
            term *= x / k as f64;
            let contrib = term / k as f64;
            sum += contrib;
            if contrib.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        EULER_GAMMA + z.ln() + sum
    } else {
        -expint_e1_cf(z)
    }
}

/// E₁(z) for z ≥ EI_SERIES_LIMIT via the Lentz-evaluated continued fraction
/// e^{−z}/(z + 1 − 1/(z + 3 − 4/(z + 5 − …))).
fn expint_e1_cf(z: f64) -> f64 {
    if z > 745.0 {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}
