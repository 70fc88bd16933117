//! Deterministic section volumes from their oscillatory integral
//! representations.
//!
//! For a unit normal `a` and distance parameter `t`,
//!
//! ```text
//!   real:    A(a,t) = (2/π) ∫_0^∞ Π_j sinc(a_j s) cos(t s) ds
//!   complex: A(a,t) = (1/2) ∫_0^∞ Π_j j1(a_j s) J0(t s) s ds
//! ```
//!
//! with `j1(x) = 2 J1(x) / x`.

mod expint;
pub(crate) mod gauss_kronrod;
pub(crate) mod product;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::{Field, FieldCase, SectionQuery};
use crate::error::{invalid, Error, Result};
use crate::specfun::j0;
use gauss_kronrod::{adaptive, NeumaierSum};
use product::{Budget, Kernel, ProductIntegral};

/// Accuracy and cost controls for the oscillatory quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Target absolute error of the returned volume.
    pub abs_tol: f64,
    /// Maximal number of half-period panels before giving up.
    pub max_panels: usize,
    /// Required bound on the neglected (or expanded) tail of the integral.
    pub truncation_tail_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            max_panels: 200_000,
            truncation_tail_tol: 1e-10,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 1e-12) || !self.abs_tol.is_finite() {
            return Err(invalid(format!("abs_tol must be at least 1e-12, got {}", self.abs_tol)));
        }
        if self.max_panels < 1 {
            return Err(invalid("max_panels must be at least 1"));
        }
        if !(self.truncation_tail_tol > 0.0) || !self.truncation_tail_tol.is_finite() {
            return Err(invalid("truncation_tail_tol must be positive"));
        }
        Ok(())
    }

    pub(crate) fn budget(&self, scale: f64) -> Budget {
        // `scale` is the prefactor applied to the raw integral.
        Budget {
            abs_tol: self.abs_tol / scale,
            tail_tol: self.truncation_tail_tol.min(0.5 * self.abs_tol) / scale,
            max_panels: self.max_panels,
        }
    }
}

/// Volume of the section `{x ∈ Q_n : <x, a> = alpha t}` of the unit-volume
/// cube (real field) or polydisc (complex field).
pub fn section_volume(query: &SectionQuery, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    let a = query.direction.nonzero();
    let t = query.t;
    if a.len() == 1 {
        return if t < 1.0 {
            Ok(1.0)
        } else if t > 1.0 {
            Ok(0.0)
        } else {
            Err(Error::Discontinuity { t })
        };
    }
    // Past this distance the hyperplane misses the body.
    if t > a.iter().sum::<f64>() {
        return Ok(0.0);
    }
    let (kernel, power, prefactor) = match query.field.field {
        Field::Real => (Kernel::Sinc, 0, 2.0 / PI),
        Field::Complex => (Kernel::Bessel, 1, 0.5),
    };
    let integral = ProductIntegral {
        kernel,
        coeffs: a,
        t,
        power,
    };
    integral
        .evaluate(&cfg.budget(prefactor))
        .map(|v| prefactor * v)
        .map_err(|e| match e {
            Error::ConvergenceFailure { reason, partial } => Error::ConvergenceFailure {
                reason,
                partial: prefactor * partial,
            },
            other => other,
        })
}

/// Upper bound `√(2/(1+t²))` (real) or `2/(1+t²)` (complex), valid for every normal.
pub fn section_upper_bound(t: f64, field: FieldCase) -> f64 {
    let r = 2.0 / (1.0 + t * t);
    match field.field {
        Field::Real => r.sqrt(),
        Field::Complex => r,
    }
}

/// Limit of `A(a^n, 1)` for the diagonal normals `a^n = (1/√n, …, 1/√n)` as
/// `n → ∞`, computed by quadrature of the Gaussian-limit integrand.
pub fn diagonal_limit(field: FieldCase, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    // exp(-s²/c) < 1e-22 past this point
    let (c, prefactor) = match field.field {
        Field::Real => (6.0, 2.0 / PI),
        Field::Complex => (8.0, 0.5),
    };
    let upper = (c * 52.0f64).sqrt();
    let f = |s: f64| match field.field {
        Field::Real => (-s * s / c).exp() * s.cos(),
        Field::Complex => (-s * s / c).exp() * j0(s) * s,
    };
    let panels = (upper / PI).ceil() as usize;
    let tol = 0.1 * cfg.abs_tol / prefactor / panels as f64;
    let mut sum = NeumaierSum::default();
    for i in 0..panels {
        let a = i as f64 * PI;
        let b = (a + PI).min(upper);
        sum.add(adaptive(&f, a, b, tol, 30).value);
    }
    Ok(prefactor * sum.value())
}

/// Closed forms of [`diagonal_limit`]: `√(6/(πe³))` and `2/e²`.
pub fn diagonal_limit_closed_form(field: Field) -> f64 {
    match field {
        Field::Real => (6.0 / (PI * 3f64.exp())).sqrt(),
        Field::Complex => 2.0 / 2f64.exp(),
    }
}
