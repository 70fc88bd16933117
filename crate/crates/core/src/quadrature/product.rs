//! Half-line integrals of oscillatory products
//!
//! ```text
//!   ∫_0^∞ s^p · K0(t s) · Π_j K(c_j s) ds
//! ```
//!
//! where either `K = sinc`, `K0 = cos` or `K = j1`, `K0 = J0`.
//!
//! The integral is split at a truncation point `S`. `[0, S]` is covered by
//! panels of half-period length and integrated adaptively. The tail past `S`
//! comes from one of three sources, whichever allows the smallest `S`:
//! an exact trigonometric expansion (sinc kernel), a Hankel asymptotic
//! expansion (Bessel kernel), or a bound on the integrand envelope that is
//! driven below the tail tolerance.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::expint::power_oscillatory_tail;
use super::gauss_kronrod::{adaptive, NeumaierSum};
use crate::error::{Error, Result};
use crate::specfun::{j0, j1_normalized, sinc};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kernel {
    Sinc,
    Bessel,
}

/// Sup of `x^{3/2} |j1(x)|`, rounded up.
const J1N_ENVELOPE: f64 = 1.66;
/// Sup of `x^{1/2} |J0(x)|`, rounded up.
const J0_ENVELOPE: f64 = 0.8;

/// Largest factor count for which the 2^m-term expansions are attempted.
const MAX_EXPANSION_FACTORS: usize = 12;
/// Allowed amplification `Π 1/(c_j S)` in the trigonometric expansion.
const SINC_CONDITION_LIMIT: f64 = 1e3;
/// Minimal Bessel argument at `S` for the Hankel expansion.
const HANKEL_MIN_ARG: f64 = 32.0;
/// Number of Hankel correction terms kept beyond the leading one.
const HANKEL_TERMS: usize = 10;
const PANEL_DEPTH: u32 = 30;

pub(crate) struct ProductIntegral<'a> {
    pub kernel: Kernel,
    /// Positive frequencies of the product factors.
    pub coeffs: &'a [f64],
    /// Frequency of the `cos` or `J0` factor (its sign is irrelevant).
    pub t: f64,
    /// Power of `s` multiplying the integrand.
    pub power: i32,
}

pub(crate) struct Budget {
    pub abs_tol: f64,
    pub tail_tol: f64,
    pub max_panels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tail {
    Expansion,
    Envelope,
}

impl ProductIntegral<'_> {
    fn integrand(&self, s: f64) -> f64 {
        let weight = s.powi(self.power);
        match self.kernel {
            Kernel::Sinc => {
                let mut v = weight * (self.t * s).cos();
                for &c in self.coeffs {
                    v *= sinc(c * s);
                }
                v
            }
            Kernel::Bessel => {
                let mut v = weight * j0(self.t * s);
                for &c in self.coeffs {
                    v *= j1_normalized(c * s);
                }
                v
            }
        }
    }

    pub(crate) fn evaluate(&self, budget: &Budget) -> Result<f64> {
        let t = self.t.abs();
        let top = self.coeffs.iter().fold(t, |m, &c| m.max(c));
        let h = PI / top;
        let limit = h * budget.max_panels as f64;

        let mut best: Option<(f64, Tail)> = None;
        if let Some(s) = self.expansion_start(h) {
            if s <= limit {
                best = Some((s, Tail::Expansion));
            }
        }
        if let Some(s) = self.envelope_start(h, limit, budget.tail_tol) {
            if s <= limit && best.is_none_or(|(b, _)| s < b) {
                best = Some((s, Tail::Envelope));
            }
        }

        let panel_tol = 0.5 * budget.abs_tol;
        let Some((cut, tail)) = best else {
            let (partial, _) = self.panels(limit, h, panel_tol);
            return Err(Error::ConvergenceFailure {
                reason: format!(
                    "integrand decays too slowly to reach tail tolerance {} within {} panels",
                    budget.tail_tol, budget.max_panels
                ),
                partial,
            });
        };

        let (head, converged) = self.panels(cut, h, panel_tol);
        if !converged {
            return Err(Error::ConvergenceFailure {
                reason: "panel refinement did not meet the tolerance".into(),
                partial: head,
            });
        }
        let tail_value = match tail {
            Tail::Expansion => match self.kernel {
                Kernel::Sinc => self.trig_tail(cut),
                Kernel::Bessel => self.hankel_tail(cut),
            },
            Tail::Envelope => 0.0,
        };
        Ok(head + tail_value)
    }

    fn panels(&self, cut: f64, h: f64, tol: f64) -> (f64, bool) {
        let count = (cut / h).ceil().max(1.0) as usize;
        let mut sum = NeumaierSum::default();
        let mut converged = true;
        let f = |s: f64| self.integrand(s);
        for i in 0..count {
            let a = i as f64 * h;
            let b = ((i + 1) as f64 * h).min(cut);
            if b <= a {
                break;
            }
            let r = adaptive(&f, a, b, tol * (b - a) / cut, PANEL_DEPTH);
            converged &= r.converged;
            sum.add(r.value);
        }
        (sum.value(), converged)
    }

    // ---- envelope tail -------------------------------------------------

    /// Bound on `∫_S^∞ |integrand|`, or infinity if the bound is not integrable.
    fn envelope_tail(&self, s0: f64) -> f64 {
        let mut log_coef = 0.0;
        let mut exponent = self.power as f64;
        match self.kernel {
            Kernel::Sinc => {
                for &c in self.coeffs {
                    if c * s0 >= 1.0 {
                        log_coef -= c.ln();
                        exponent -= 1.0;
                    }
                }
            }
            Kernel::Bessel => {
                for &c in self.coeffs {
                    if J1N_ENVELOPE * (c * s0).powf(-1.5) <= 1.0 {
                        log_coef += J1N_ENVELOPE.ln() - 1.5 * c.ln();
                        exponent -= 1.5;
                    }
                }
                let t = self.t.abs();
                if t > 0.0 && J0_ENVELOPE * (t * s0).powf(-0.5) <= 1.0 {
                    log_coef += J0_ENVELOPE.ln() - 0.5 * t.ln();
                    exponent -= 0.5;
                }
            }
        }
        if exponent >= -1.0 {
            return f64::INFINITY;
        }
        (log_coef + (exponent + 1.0) * s0.ln()).exp() / (-exponent - 1.0)
    }

    fn envelope_start(&self, h: f64, limit: f64, tol: f64) -> Option<f64> {
        let mut hi = h;
        while self.envelope_tail(hi) > tol {
            hi *= 2.0;
            if hi > 2.0 * limit {
                return None;
            }
        }
        let mut lo = 0.5 * hi;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.envelope_tail(mid) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-3 * h {
                break;
            }
        }
        Some(hi)
    }

    // ---- expansion tails ---------------------------------------------

    fn expansion_start(&self, h: f64) -> Option<f64> {
        let m = self.coeffs.len();
        if m == 0 || m > MAX_EXPANSION_FACTORS {
            return None;
        }
        let cmin = self.coeffs.iter().fold(f64::INFINITY, |a, &c| a.min(c));
        match self.kernel {
            Kernel::Sinc => {
                if m as i32 - self.power <= 1 {
                    return None;
                }
                let condition = |s: f64| -> f64 { self.coeffs.iter().map(|&c| (1.0 / (c * s)).max(1.0)).product() };
                let mut s = 4.0 * h;
                if condition(s) > SINC_CONDITION_LIMIT {
                    let mut lo = s;
                    let mut hi = 1.0 / cmin;
                    for _ in 0..80 {
                        let mid = (lo * hi).sqrt();
                        if condition(mid) > SINC_CONDITION_LIMIT {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    s = hi;
                }
                Some(s)
            }
            Kernel::Bessel => {
                let t = self.t.abs();
                let factors = m + usize::from(t > 0.0);
                let q0 = m as f64 - self.power as f64 + 0.5 * factors as f64;
                if q0 <= 1.0 {
                    return None;
                }
                let smallest = if t > 0.0 { cmin.min(t) } else { cmin };
                Some((HANKEL_MIN_ARG / smallest).max(h))
            }
        }
    }

    /// Exact tail for the sinc kernel: expand every `sin` and `cos` into
    /// exponentials and integrate each term against `s^{-q}` in closed form.
    fn trig_tail(&self, s0: f64) -> f64 {
        let m = self.coeffs.len();
        let q = (m as i32 - self.power) as f64;
        let inv_prod: f64 = self.coeffs.iter().map(|c| 1.0 / c).product();
        // (2i)^{-m} / 2
        let base = Complex64::new(0.0, 2.0).powi(-(m as i32)) * (0.5 * inv_prod);
        let t = self.t.abs();
        let mut total = Complex64::new(0.0, 0.0);
        // Terms with opposite signs are complex conjugates, so fix the first sign.
        for mask in 0..(1u32 << (m - 1)) {
            let mut omega = self.coeffs[0];
            let mut sign = 1.0;
            for (j, &c) in self.coeffs.iter().enumerate().skip(1) {
                if mask >> (j - 1) & 1 == 1 {
                    omega -= c;
                    sign = -sign;
                } else {
                    omega += c;
                }
            }
            for delta in [1.0, -1.0] {
                total += sign * power_oscillatory_tail(q, omega + delta * t, s0);
            }
        }
        2.0 * (base * total).re
    }

    /// Tail for the Bessel kernel from the Hankel expansion
    /// `J_ν(x) = √(2/(πx)) Re[H(x) e^{i(x - νπ/2 - π/4)}]` with
    /// `H(x) = Σ_k i^k a_k(ν) x^{-k}`.
    fn hankel_tail(&self, s0: f64) -> f64 {
        let m = self.coeffs.len();
        let t = self.t.abs();
        // (nu, frequency) for every Bessel factor
        let mut factors: Vec<(u32, f64)> = self.coeffs.iter().map(|&c| (1, c)).collect();
        if t > 0.0 {
            factors.push((0, t));
        }
        let count = factors.len();
        let mut amplitude: f64 = self.coeffs.iter().map(|c| 2.0 / c).product();
        for &(_, c) in &factors {
            amplitude *= (2.0 / (PI * c)).sqrt() * 0.5;
        }
        let q0 = m as f64 - self.power as f64 + 0.5 * count as f64;
        let hankel: Vec<[f64; HANKEL_TERMS + 1]> = factors.iter().map(|&(nu, _)| hankel_coefficients(nu)).collect();

        let mut total = Complex64::new(0.0, 0.0);
        for mask in 0..(1u32 << (count - 1)) {
            let mut omega = 0.0;
            let mut phase = 0.0;
            let mut poly = vec![Complex64::new(0.0, 0.0); HANKEL_TERMS + 1];
            poly[0] = Complex64::new(1.0, 0.0);
            for (f, &(nu, c)) in factors.iter().enumerate() {
                let sigma = if f > 0 && mask >> (f - 1) & 1 == 1 { -1.0 } else { 1.0 };
                omega += sigma * c;
                phase -= sigma * (nu as f64 * PI / 2.0 + PI / 4.0);
                let mut factor = [Complex64::new(0.0, 0.0); HANKEL_TERMS + 1];
                let step = Complex64::new(0.0, sigma) / c;
                let mut power = Complex64::new(1.0, 0.0);
                for (k, slot) in factor.iter_mut().enumerate() {
                    *slot = power * hankel[f][k];
                    power *= step;
                }
                let mut next = vec![Complex64::new(0.0, 0.0); HANKEL_TERMS + 1];
                for (i, &p) in poly.iter().enumerate() {
                    for (k, &g) in factor.iter().enumerate().take(HANKEL_TERMS + 1 - i) {
                        next[i + k] += p * g;
                    }
                }
                poly = next;
            }
            let rotation = Complex64::from_polar(1.0, phase);
            for (k, &b) in poly.iter().enumerate() {
                total += rotation * b * power_oscillatory_tail(q0 + k as f64, omega, s0);
            }
        }
        2.0 * amplitude * total.re
    }
}

/// `a_k(ν) = Π_{i=1..k} (4ν² - (2i-1)²) / (k! 8^k)`.
fn hankel_coefficients(nu: u32) -> [f64; HANKEL_TERMS + 1] {
    let mu = 4.0 * (nu * nu) as f64;
    let mut a = [0.0; HANKEL_TERMS + 1];
    a[0] = 1.0;
    for k in 1..=HANKEL_TERMS {
        let odd = (2 * k - 1) as f64;
        a[k] = a[k - 1] * (mu - odd * odd) / (8.0 * k as f64);
    }
    a
}

/// Product of plain Bessel `J1` factors, used by tests to cross-check the
/// normalized kernel.
#[cfg(test)]
pub(crate) fn bessel_product(coeffs: &[f64], t: f64, s: f64) -> f64 {
    let mut v = j0(t * s);
    for &c in coeffs {
        v *= 2.0 * crate::specfun::j1(c * s) / (c * s);
    }
    v
}
