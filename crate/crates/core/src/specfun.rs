//! Special functions used by the volume formulas and the bound chain.
//!
//! Bessel functions of order 0 and 1 come from `libm` (a port of the fdlibm
//! rational/asymptotic scheme). Everything else is evaluated here: the
//! Khintchine constants of spherical sums, the closed-form moment generating
//! bound `f_k`, the Gaussian-limit probability `phi(k)`, and the Orlicz pair
//! `(L, M)` used in the duality bound.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BesselKind {
    J0,
    J1,
    /// `j_1(x) = 2 J_1(x) / x`, continuous at 0 with value 1.
    J1Normalized,
}

/// Checked Bessel evaluation.
pub fn bessel(kind: BesselKind, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(invalid(format!("Bessel argument must be finite, got {x}")));
    }
    Ok(match kind {
        BesselKind::J0 => j0(x),
        BesselKind::J1 => j1(x),
        BesselKind::J1Normalized => j1_normalized(x),
    })
}

#[inline]
pub fn j0(x: f64) -> f64 {
    libm::j0(x)
}

#[inline]
pub fn j1(x: f64) -> f64 {
    libm::j1(x)
}

#[inline]
pub fn j1_normalized(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 8.0 + x2 * x2 / 192.0
    } else {
        2.0 * libm::j1(x) / x
    }
}

/// `sin(x)/x`, with a short series near the origin.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `b_{p,k}^p` for the sharp Khintchine constant of sums of uniform vectors
/// on `S^{k-1}`.
///
/// Even integer `p = 2m` uses the exact product `Π_{i<m} (1 + 2i/k)`, so
/// `b_{2,k} = 1` holds exactly.
pub fn khintchine_b_pow(p: f64, k: usize) -> Result<f64> {
    check_khintchine(p, k)?;
    let kf = k as f64;
    let half = p / 2.0;
    if half.fract() == 0.0 && half <= 1e4 {
        let m = half as usize;
        return Ok((0..m).map(|i| 1.0 + 2.0 * i as f64 / kf).product());
    }
    let log_ratio = libm::lgamma((p + kf) / 2.0) - libm::lgamma(kf / 2.0);
    Ok((half * (2.0 / kf).ln() + log_ratio).exp())
}

/// The sharp Khintchine constant `b_{p,k} = sqrt(2/k) (Γ((p+k)/2) / Γ(k/2))^{1/p}`.
pub fn khintchine_b(p: f64, k: usize) -> Result<f64> {
    let pow = khintchine_b_pow(p, k)?;
    Ok(pow.powf(1.0 / p))
}

fn check_khintchine(p: f64, k: usize) -> Result<()> {
    if !p.is_finite() || p < 2.0 {
        return Err(domain(format!("Khintchine exponent must satisfy p >= 2, got {p}")));
    }
    if k < 2 {
        return Err(domain(format!("sphere dimension must satisfy k >= 2, got {k}")));
    }
    Ok(())
}

/// `f_k(c) = (1 - 2c/k)^{-k/2}` for `0 <= c < k/2`.
pub fn mgf_closed_form(c: f64, k: usize) -> Result<f64> {
    let kf = k as f64;
    if k < 2 {
        return Err(domain(format!("k must be >= 2, got {k}")));
    }
    if !(c >= 0.0 && c < kf / 2.0) {
        return Err(domain(format!(
            "mgf argument must lie in [0, k/2) = [0, {}), got {c}",
            kf / 2.0
        )));
    }
    Ok((1.0 - 2.0 * c / kf).powf(-kf / 2.0))
}

/// Partial sum of `Σ_m c^m b_{2m,k}^{2m} / m!` over the first `terms` terms,
/// together with an upper bound on the omitted remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub partial: f64,
    pub remainder_bound: f64,
}

pub fn mgf_series(c: f64, k: usize, terms: usize) -> Result<SeriesValue> {
    mgf_closed_form(c, k)?;
    let half_k = k as f64 / 2.0;
    let mut term = 1.0;
    let mut partial = 0.0;
    for m in 0..terms {
        partial += term;
        term *= c * (half_k + m as f64) / (half_k * (m as f64 + 1.0));
    }
    // Successive term ratios (c/(k/2)) (k/2 + m)/(m + 1) are nonincreasing for
    // k >= 2, so the tail is dominated by a geometric series.
    let ratio = c * (half_k + terms as f64) / (half_k * (terms as f64 + 1.0));
    let remainder_bound = if term == 0.0 { 0.0 } else { term / (1.0 - ratio) };
    Ok(SeriesValue {
        partial,
        remainder_bound,
    })
}

/// `phi(k) = Q(k/2, k/2)`: the limiting probability that a normalized
/// Gaussian vector in `R^k` leaves the unit ball.
pub fn gaussian_limit_phi(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(domain(format!("k must be >= 2, got {k}")));
    }
    let a = k as f64 / 2.0;
    gamma_q(a, a)
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    check_gamma(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    })
}

/// Regularized upper incomplete gamma function `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    check_gamma(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    })
}

fn check_gamma(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() || !(x >= 0.0) || !x.is_finite() {
        return Err(domain(format!(
            "incomplete gamma needs a > 0 and x >= 0, got a = {a}, x = {x}"
        )));
    }
    Ok(())
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - libm::lgamma(a)).exp()
}

// Modified Lentz evaluation of the Legendre continued fraction for Q(a, x).
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x + a * x.ln() - libm::lgamma(a)).exp() * h
}

/// The pair of mutually conjugate Orlicz functions
/// `L(x) = s (e^x - x - 1)` and `M(x) = (s + x) log(1 + x/s) - x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrliczPair {
    orlicz_scale: f64,
}

impl OrliczPair {
    pub fn new(orlicz_scale: f64) -> Result<Self> {
        if !(orlicz_scale > 0.0) || !orlicz_scale.is_finite() {
            return Err(domain(format!("Orlicz scale must be positive, got {orlicz_scale}")));
        }
        Ok(Self { orlicz_scale })
    }

    pub fn scale(&self) -> f64 {
        self.orlicz_scale
    }

    pub fn l(&self, x: f64) -> Result<f64> {
        check_orlicz_arg(x)?;
        Ok(self.orlicz_scale * (x.exp_m1() - x))
    }

    pub fn m(&self, x: f64) -> Result<f64> {
        check_orlicz_arg(x)?;
        let s = self.orlicz_scale;
        Ok((s + x) * (x / s).ln_1p() - x)
    }
}

pub fn orlicz_l(pair: &OrliczPair, x: f64) -> Result<f64> {
    pair.l(x)
}

pub fn orlicz_m(pair: &OrliczPair, x: f64) -> Result<f64> {
    pair.m(x)
}

fn check_orlicz_arg(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(domain(format!("Orlicz functions are defined on x >= 0, got {x}")));
    }
    Ok(())
}
