//! Sections of codimension `d`.
//!
//! A frame `R` (a `d×n` matrix with orthonormal rows) projects the uniform
//! point `ξ` of the unit cube `[-1/2, 1/2]^n` to `X = Rξ`. The density of `X`
//! at `u` is the `(n-d)`-volume of the section `Q_n ∩ (Rᵀu + ker R)`, and by
//! Fourier inversion
//!
//! ```text
//!   f_X(u) = π^{-d} ∫_{ℝ^d} cos(2<u, s>) Π_j sinc(<Re_j, s>) ds.
//! ```

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{normalize_direction, Field, SectionQuery};
use crate::error::{domain, invalid, Error, Result};
use crate::montecarlo::{estimate_mean, stream_rng, McConfig, McEstimate};
use crate::quadrature::gauss_kronrod::adaptive;
use crate::quadrature::product::{Kernel, ProductIntegral};
use crate::quadrature::{section_volume, QuadratureConfig};

/// Tolerance on `R Rᵀ = I`.
pub const FRAME_TOL: f64 = 1e-10;

/// A `d×n` matrix with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFrame {
    r: DMatrix<f64>,
}

impl ProjectionFrame {
    /// Wraps a matrix after checking `0 < d < n` and `R Rᵀ = I`.
    pub fn new(r: DMatrix<f64>) -> Result<Self> {
        let (d, n) = r.shape();
        if d == 0 || d >= n {
            return Err(invalid(format!("frame needs 0 < d < n, got d={d}, n={n}")));
        }
        let gram = &r * r.transpose();
        let defect = (gram - DMatrix::identity(d, d)).abs().max();
        if !(defect <= FRAME_TOL) {
            return Err(Error::DegenerateFrame(format!(
                "rows are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self { r })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != n) {
            return Err(invalid("frame rows must have equal length"));
        }
        Self::new(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn n(&self) -> usize {
        self.r.ncols()
    }

    pub fn d(&self) -> usize {
        self.r.nrows()
    }

    /// The projected basis vectors `Re_j`.
    pub fn columns(&self) -> Vec<DVector<f64>> {
        self.r.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.r.row_iter().map(|row| row.iter().copied().collect()).collect()
    }

    /// Number of columns that are not numerically zero.
    pub fn nonzero_columns(&self) -> usize {
        self.r.column_iter().filter(|c| c.norm() > 1e-12).count()
    }
}

/// Orthonormalizes `d` normals of `E` (modified Gram–Schmidt).
pub fn frame_from_normals(normals: &[Vec<f64>]) -> Result<ProjectionFrame> {
    let d = normals.len();
    if d == 0 {
        return Err(invalid("at least one normal is required"));
    }
    let n = normals[0].len();
    if normals.iter().any(|v| v.len() != n || v.iter().any(|x| !x.is_finite())) {
        return Err(invalid("normals must be finite and of equal length"));
    }
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(d);
    for v in normals {
        let mut w = DVector::from_column_slice(v);
        let scale = w.norm();
        for _ in 0..2 {
            for q in &rows {
                let c = q.dot(&w);
                w -= c * q;
            }
        }
        let len = w.norm();
        if !(len > 1e-10 * scale) {
            return Err(Error::DegenerateFrame("normals are linearly dependent".into()));
        }
        rows.push(w / len);
    }
    ProjectionFrame::new(DMatrix::from_fn(d, n, |i, j| rows[i][j]))
}

/// A frame drawn from the rotation-invariant distribution.
pub fn random_frame(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<ProjectionFrame> {
    loop {
        let normals: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        match frame_from_normals(&normals) {
            Err(Error::DegenerateFrame(_)) => continue,
            other => return other,
        }
    }
}

/// The affine section `Q_n ∩ (Rᵀu + ker R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSectionQuery {
    pub frame: ProjectionFrame,
    pub u: DVector<f64>,
}

impl AffineSectionQuery {
    pub fn new(frame: ProjectionFrame, u: &[f64]) -> Result<Self> {
        if u.len() != frame.d() {
            return Err(invalid(format!(
                "offset must have {} coordinates, got {}",
                frame.d(),
                u.len()
            )));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(invalid("offset must be finite"));
        }
        Ok(Self {
            frame,
            u: DVector::from_column_slice(u),
        })
    }

    /// True when the offset lies beyond distance 1/2, outside the regime
    /// where the lower bound on section volumes applies.
    pub fn beyond_half(&self) -> bool {
        self.u.norm() > 0.5
    }
}

/// Section volume by Fourier inversion of the characteristic function.
pub fn density_fourier(query: &AffineSectionQuery, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    let frame = &query.frame;
    match frame.d() {
        1 => {
            // f_X(u) = A(a, 2|u|) with a the single row of the frame.
            let row: Vec<f64> = frame.r.row(0).iter().copied().collect();
            let q = SectionQuery::new(normalize_direction(&row)?, 2.0 * query.u[0].abs(), Field::Real)?;
            section_volume(&q, cfg)
        }
        2 => {
            if frame.nonzero_columns() < 4 {
                return Err(Error::ConvergenceFailure {
                    reason: "Fourier inversion in d = 2 needs at least four nonzero columns".into(),
                    partial: f64::NAN,
                });
            }
            density_polar(frame, &query.u, cfg)
        }
        d => Err(domain(format!("Fourier inversion is limited to d <= 2, got d = {d}"))),
    }
}

/// `(2/π²) ∫_0^π ∫_0^∞ ρ cos(2ρ<u, e_θ>) Π_j sinc(ρ <Re_j, e_θ>) dρ dθ`.
fn density_polar(frame: &ProjectionFrame, u: &DVector<f64>, cfg: &QuadratureConfig) -> Result<f64> {
    let prefactor = 2.0 / (PI * PI);
    let cols = frame.columns();
    let inner_budget = cfg.budget(2.0 * prefactor * PI);

    // The inner integrand changes its decay where a coefficient vanishes.
    let mut breaks = vec![0.0, PI];
    for w in &cols {
        if w.norm() > 1e-12 {
            breaks.push((w[1].atan2(w[0]) + PI / 2.0).rem_euclid(PI));
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let inner = |theta: f64| -> f64 {
        let (c, s) = (theta.cos(), theta.sin());
        let coeffs: Vec<f64> = cols
            .iter()
            .map(|w| (w[0] * c + w[1] * s).abs())
            .filter(|x| *x > 1e-12)
            .collect();
        let t = 2.0 * (u[0] * c + u[1] * s);
        let integral = ProductIntegral {
            kernel: Kernel::Sinc,
            coeffs: &coeffs,
            t,
            power: 1,
        };
        match integral.evaluate(&inner_budget) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };

    let outer_tol = 0.5 * cfg.abs_tol / prefactor;
    let mut total = 0.0;
    let mut converged = true;
    for w in breaks.windows(2) {
        let r = adaptive(&inner, w[0], w[1], outer_tol * (w[1] - w[0]) / PI, 20);
        converged &= r.converged;
        total += r.value;
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let value = prefactor * total;
    if !converged {
        return Err(Error::ConvergenceFailure {
            reason: "angular integration did not reach the tolerance".into(),
            partial: value,
        });
    }
    Ok(value)
}

/// A Monte Carlo density estimate from hits in a small ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub estimate: McEstimate,
    pub radius: f64,
    /// The ball reaches beyond distance 1/2, where the density may vary faster.
    pub near_boundary: bool,
    /// No sample landed in the ball; the relative error is unbounded.
    pub no_hits: bool,
}

pub fn default_radius(d: usize) -> f64 {
    0.05 * (d as f64).sqrt()
}

fn ball_volume(d: usize, r: f64) -> f64 {
    let half = d as f64 / 2.0;
    PI.powf(half) / libm::tgamma(half + 1.0) * r.powi(d as i32)
}

/// Fraction of projected cube samples within `radius` of `u`, per unit volume.
pub fn density_mc(query: &AffineSectionQuery, radius: f64, cfg: &McConfig) -> Result<DensityEstimate> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    let frame = &query.frame;
    let (d, n) = (frame.d(), frame.n());
    let inv_volume = 1.0 / ball_volume(d, radius);
    let r2 = radius * radius;
    let estimate = estimate_mean(cfg, || {
        let mut x = vec![0.0; d];
        move |rng: &mut ChaCha8Rng| {
            x.iter_mut().zip(query.u.iter()).for_each(|(xi, ui)| *xi = -ui);
            for j in 0..n {
                let xi: f64 = rng.random::<f64>() - 0.5;
                for (i, xv) in x.iter_mut().enumerate() {
                    *xv += frame.r[(i, j)] * xi;
                }
            }
            if x.iter().map(|v| v * v).sum::<f64>() <= r2 {
                inv_volume
            } else {
                0.0
            }
        }
    })?;
    Ok(DensityEstimate {
        estimate,
        radius,
        near_boundary: query.u.norm() + radius > 0.5,
        no_hits: estimate.value == 0.0,
    })
}

/// Interval that a ball-averaged central density must lie in.
///
/// The central section volume lies in `[1, 2^{d/2}]`. Since `f^{1/(n-d)}` is
/// concave and the support contains the ball of radius 1/2, averaging over a
/// ball of radius `r` around the origin can lower the value by at most the
/// factor `(1 - 2r)^{n-d}`; it cannot raise it because `f` peaks at the origin.
pub fn central_bracket(n: usize, d: usize, radius: f64) -> (f64, f64) {
    let shrink = (1.0 - 2.0 * radius).max(0.0).powi((n - d) as i32);
    (shrink, 2f64.powf(d as f64 / 2.0))
}

/// The two central systems whose volumes combine into a non-central one.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaDecomposition {
    /// Columns `θ_j`; rows are orthonormal.
    pub theta: ProjectionFrame,
    /// Columns `η_j`; rows are orthonormal.
    pub eta: ProjectionFrame,
    pub coeff_plus: f64,
    pub coeff_minus: f64,
    pub det_plus: f64,
    pub det_minus: f64,
}

/// `Λ± = ((1/|Re_1| ± 1)² Re_1 Re_1ᵀ + Σ_{j≥2} Re_j Re_jᵀ)^{-1/2}` and the
/// systems `θ`, `η` built from them.
pub fn lambda_decomposition(frame: &ProjectionFrame) -> Result<LambdaDecomposition> {
    let cols = frame.columns();
    let w1 = &cols[0];
    let r = w1.norm();
    if !(r > 0.0 && r < 1.0 - 1e-12) {
        return Err(domain(format!("|Re_1| must lie in (0, 1), got {r}")));
    }
    let d = frame.d();
    let build = |sign: f64| -> Result<(ProjectionFrame, f64, f64)> {
        let scale = 1.0 / r + sign;
        let mut m = &cols[0] * cols[0].transpose() * (scale * scale);
        for w in &cols[1..] {
            m += w * w.transpose();
        }
        let eig = SymmetricEigen::new(m);
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::DegenerateFrame("Gram matrix is not positive definite".into()));
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let lambda = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
        let det = eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).product::<f64>();
        let mut system = &lambda * frame.matrix();
        system.column_mut(0).scale_mut(scale);
        debug_assert_eq!(system.nrows(), d);
        Ok((ProjectionFrame::new(system)?, scale * det, det))
    };
    let (theta, coeff_plus, det_plus) = build(1.0)?;
    let (eta, coeff_minus, det_minus) = build(-1.0)?;
    Ok(LambdaDecomposition {
        theta,
        eta,
        coeff_plus,
        coeff_minus,
        det_plus,
        det_minus,
    })
}

/// Both sides of `2 f_X(v/2) = c₊ vol(θ) − c₋ vol(η)` with `v = Re_1/|Re_1|`.
pub fn decomposition_sides(frame: &ProjectionFrame, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    let dec = lambda_decomposition(frame)?;
    let w1 = frame.columns().swap_remove(0);
    let u: Vec<f64> = (&w1 * (0.5 / w1.norm())).iter().copied().collect();
    let lhs = 2.0 * density_fourier(&AffineSectionQuery::new(frame.clone(), &u)?, cfg)?;
    let zero = vec![0.0; frame.d()];
    let theta = density_fourier(&AffineSectionQuery::new(dec.theta.clone(), &zero)?, cfg)?;
    let eta = density_fourier(&AffineSectionQuery::new(dec.eta.clone(), &zero)?, cfg)?;
    Ok((lhs, dec.coeff_plus * theta - dec.coeff_minus * eta))
}

/// Outcome of sampling random sections at distance 1/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMinimum {
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    /// "fourier" when volumes come from inversion, "mc" when sampled.
    pub method: String,
    pub min_volume: f64,
    /// Sampling error of the minimum (zero for inversion).
    pub min_std_error: f64,
    pub argmin_frame: Vec<Vec<f64>>,
    pub argmin_offset: Vec<f64>,
    /// Smallest central volume over the same frames.
    pub min_central: f64,
    /// Lower end of the central bracket after bandwidth bias (1 for inversion).
    pub central_floor: f64,
}

impl EmpiricalMinimum {
    /// The minimum stays positive beyond four standard errors.
    pub fn positive(&self) -> bool {
        self.min_volume - 4.0 * self.min_std_error > 0.0
    }
}

/// Samples random frames and offsets with `|u| = 1/2`, recording the smallest
/// section volume.
pub fn empirical_minimum(n: usize, d: usize, trials: usize, cfg: &McConfig) -> Result<EmpiricalMinimum> {
    if !(d >= 1 && d < n && n <= 12 && d <= 3) {
        return Err(invalid(format!("need 1 <= d < n <= 12 and d <= 3, got n={n}, d={d}")));
    }
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let quad = QuadratureConfig::default();
    let use_fourier = d == 1 || (d == 2 && n >= 4);
    let radius = default_radius(d);
    let mut rng = stream_rng(cfg.seed, u64::MAX);
    let mut best: Option<(f64, f64, ProjectionFrame, Vec<f64>)> = None;
    let mut min_central = f64::INFINITY;
    for trial in 0..trials {
        let frame = random_frame(n, d, &mut rng)?;
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = dir.iter().map(|x| 0.5 * x / len).collect();
        let offset = AffineSectionQuery::new(frame.clone(), &u)?;
        let central = AffineSectionQuery::new(frame.clone(), &vec![0.0; d])?;
        let (value, err, central_value) = if use_fourier {
            (density_fourier(&offset, &quad)?, 0.0, density_fourier(&central, &quad)?)
        } else {
            let sub = McConfig {
                seed: cfg.seed.wrapping_add(trial as u64),
                ..*cfg
            };
            let e = density_mc(&offset, radius, &sub)?.estimate;
            let c = density_mc(&central, radius, &sub)?.estimate;
            (e.value, e.std_error, c.value)
        };
        min_central = min_central.min(central_value);
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, err, frame, u));
        }
    }
    let (min_volume, min_std_error, frame, offset) = best.expect("at least one trial");
    Ok(EmpiricalMinimum {
        n,
        d,
        trials,
        method: if use_fourier { "fourier" } else { "mc" }.into(),
        min_volume,
        min_std_error,
        argmin_frame: frame.rows(),
        argmin_offset: offset,
        min_central,
        central_floor: if use_fourier {
            1.0
        } else {
            central_bracket(n, d, radius).0
        },
    })
}
