//! Shared domain types: section normals, the scalar field, and volume queries.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Entries smaller than this after normalization are treated as exact zeros.
pub const ZERO_CUTOFF: f64 = 1e-15;

/// Tolerance on `|a| = 1` accepted by [`Direction::from_normalized`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// A unit normal with nonnegative, nonincreasing coordinates.
///
/// Section volumes are invariant under coordinate permutations and sign
/// changes, so every normal is reduced to this form before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    coords: Vec<f64>,
}

impl Direction {
    /// Wraps coordinates that already satisfy the invariants.
    pub fn from_normalized(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("direction must have at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(invalid("coordinates must be finite and nonnegative"));
        }
        if coords.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid("coordinates must be nonincreasing"));
        }
        let norm2: f64 = coords.iter().map(|c| c * c).sum();
        if (norm2 - 1.0).abs() > UNIT_NORM_TOL {
            return Err(invalid(format!("coordinates must have unit norm, got |a|^2 = {norm2}")));
        }
        Ok(Self { coords })
    }

    /// The diagonal direction `(1/√n, …, 1/√n)`.
    pub fn diagonal(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("diagonal dimension must be positive"));
        }
        Ok(Self {
            coords: vec![1.0 / (n as f64).sqrt(); n],
        })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Ambient dimension, including zero coordinates.
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// The strictly positive coordinates (a prefix, since they are sorted).
    pub fn nonzero(&self) -> &[f64] {
        let m = self.coords.iter().take_while(|c| **c > 0.0).count();
        &self.coords[..m]
    }

    pub fn nonzero_count(&self) -> usize {
        self.nonzero().len()
    }

    pub fn largest(&self) -> f64 {
        self.coords[0]
    }
}

/// Reduces an arbitrary nonzero vector to its normalized decreasing rearrangement.
pub fn normalize_direction(raw: &[f64]) -> Result<Direction> {
    if raw.is_empty() {
        return Err(invalid("direction must have at least one coordinate"));
    }
    if raw.iter().any(|c| !c.is_finite()) {
        return Err(invalid("direction entries must be finite"));
    }
    let mut coords: Vec<f64> = raw.iter().map(|c| c.abs()).collect();
    coords.sort_by(|a, b| b.total_cmp(a));
    let scale = coords[0];
    if scale == 0.0 {
        return Err(invalid("direction must be nonzero"));
    }
    // Scale by the largest entry first so the squared sum cannot overflow.
    let norm = scale * coords.iter().map(|c| (c / scale).powi(2)).sum::<f64>().sqrt();
    rescale(&mut coords, norm);
    let mut dropped = false;
    for c in coords.iter_mut() {
        if *c < ZERO_CUTOFF && *c != 0.0 {
            *c = 0.0;
            dropped = true;
        }
    }
    if dropped {
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        rescale(&mut coords, norm);
    }
    Ok(Direction { coords })
}

fn rescale(coords: &mut [f64], norm: f64) {
    if (norm - 1.0).abs() > 1e-13 {
        for c in coords.iter_mut() {
            *c /= norm;
        }
    }
}

/// The scalar field of the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

/// Constants attached to a field: the sphere dimension `k` of the random
/// representation, the half-width `alpha` of the unit-volume cube (polydisc)
/// and the exponent of `|Σ a_j U_j|` in the volume integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldCase {
    pub field: Field,
    pub k: usize,
    pub alpha: f64,
    pub weight_exponent: i32,
}

pub fn field_params(field: Field) -> FieldCase {
    match field {
        Field::Real => FieldCase {
            field,
            k: 3,
            alpha: 0.5,
            weight_exponent: 1,
        },
        Field::Complex => FieldCase {
            field,
            k: 4,
            alpha: 1.0 / std::f64::consts::PI.sqrt(),
            weight_exponent: 2,
        },
    }
}

impl From<Field> for FieldCase {
    fn from(field: Field) -> Self {
        field_params(field)
    }
}

/// One volume request: the section `{x ∈ Q_n : <x, a> = alpha * t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionQuery {
    pub direction: Direction,
    pub t: f64,
    pub field: FieldCase,
}

impl SectionQuery {
    pub fn new(direction: Direction, t: f64, field: Field) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(invalid(format!("distance parameter must be finite and >= 0, got {t}")));
        }
        Ok(Self {
            direction,
            t,
            field: field_params(field),
        })
    }
}
