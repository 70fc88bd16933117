//! Lower bounds on `P(S ≥ 0)`, the tail bound for `|Σ a_j U_j|`, and the
//! assembly of both into certified lower bounds for `A(a, 1)`.

use serde::{Deserialize, Serialize};

use crate::domain::{field_params, Direction, Field, FieldCase};
use crate::error::{domain, Error, Result};
use crate::montecarlo::{moment_s2_exact, moment_s4_exact};
use crate::specfun::mgf_closed_form;

const VERAAR_CONSTANT: f64 = 0.464_101_615_137_754_4; // 2√3 - 3

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Veraar,
    OrliczDual,
}

/// A lower bound on `P(S ≥ 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBound {
    /// The bound, capped at 1.
    pub value: f64,
    /// The bound before capping.
    pub raw_value: f64,
    pub method: BoundMethod,
    pub lambda_star: Option<f64>,
    pub q_used: Option<f64>,
    pub orlicz_scale_used: Option<f64>,
}

/// Sphere dimension for the probability bound; `Large` uses the `k → ∞`
/// limits of the Laplace bound and of `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereDim {
    Finite(usize),
    Large,
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(domain(format!("sphere dimension k must be at least 2, got {k}")));
    }
    Ok(())
}

/// `(2√3 - 3) (E S²)² / E S⁴` from the exact moments.
pub fn veraar_bound(a: &Direction, k: usize) -> Result<ProbabilityBound> {
    check_k(k)?;
    if a.nonzero_count() < 2 {
        return Err(domain("the Veraar bound needs at least two nonzero coordinates"));
    }
    let s2 = moment_s2_exact(a, k);
    let s4 = moment_s4_exact(a, k);
    let raw = VERAAR_CONSTANT * s2 * s2 / s4;
    Ok(ProbabilityBound {
        value: raw.min(1.0),
        raw_value: raw,
        method: BoundMethod::Veraar,
        lambda_star: None,
        q_used: None,
        orlicz_scale_used: None,
    })
}

/// `(2√3 - 3) / (3 + 4/k)`.
pub fn gamma_k(k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(VERAAR_CONSTANT / (3.0 + 4.0 / k as f64))
}

/// `(1 - 2λ²/k)^{-k/2}`, a bound on `E exp(λ S / (E S²)^{1/2})`.
pub fn laplace_mgf_bound(lambda: f64, k: usize) -> Result<f64> {
    check_k(k)?;
    mgf_closed_form(lambda * lambda, k).map_err(|_| {
        domain(format!(
            "|lambda| must be below sqrt(k/2) = {}, got {lambda}",
            (k as f64 / 2.0).sqrt()
        ))
    })
}

/// `(5/4) (1 - 2λ²/k)^{-k/2}`, a bound on `E exp(λ Y₊)` for `Y = S / (E S²)^{1/2}`.
pub fn plus_mgf_bound(lambda: f64, k: usize) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(1.25 * laplace_mgf_bound(lambda, k)?)
}

/// `(1/2) √(k / (3k + 4))`, a lower bound on `E Y₊`.
pub fn q_lower(k: usize) -> Result<f64> {
    check_k(k)?;
    let k = k as f64;
    Ok(0.5 * (k / (3.0 * k + 4.0)).sqrt())
}

/// `[(s + 1/(λq)) log(1 + 1/(λqs)) - 1/(λq)]^{-1}` for Orlicz scale `s`.
///
/// The value is not capped; it exceeds 1 for strong parameters.
pub fn orlicz_probability_bound(lambda: f64, q: f64, orlicz_scale: f64) -> Result<f64> {
    if !(lambda > 0.0 && q > 0.0 && orlicz_scale > 0.0) {
        return Err(domain("lambda, q and the Orlicz scale must be positive"));
    }
    let inv = 1.0 / (lambda * q);
    let denom = (orlicz_scale + inv) * (inv / orlicz_scale).ln_1p() - inv;
    if !(denom > 0.0) {
        return Err(Error::Infeasible(format!(
            "Orlicz bound denominator {denom} is not positive"
        )));
    }
    Ok(1.0 / denom)
}

struct Candidate {
    raw: f64,
    q: f64,
    scale: f64,
}

/// The Orlicz bound at `lambda` with the largest admissible scale, if any.
fn candidate(lambda: f64, dim: SphereDim) -> Option<Candidate> {
    let (q, plus) = match dim {
        SphereDim::Finite(k) => (q_lower(k).ok()?, plus_mgf_bound(lambda, k).ok()?),
        SphereDim::Large => (0.5 / 3f64.sqrt(), 1.25 * (lambda * lambda).exp()),
    };
    let denom = plus - lambda * q - 1.0;
    if !(denom > 0.0) {
        return None;
    }
    let scale = 1.0 / denom;
    let raw = orlicz_probability_bound(lambda, q, scale).ok()?;
    Some(Candidate { raw, q, scale })
}

fn lambda_range(dim: SphereDim) -> f64 {
    match dim {
        SphereDim::Finite(k) => (k as f64 / 2.0).sqrt() * (1.0 - 1e-6),
        // Without a Laplace restriction only the Orlicz condition λ < 1 remains.
        SphereDim::Large => 1.0 - 1e-6,
    }
}

/// Maximizes the Orlicz duality bound over `λ`.
pub fn optimize_probability_bound(dim: SphereDim) -> Result<ProbabilityBound> {
    if let SphereDim::Finite(k) = dim {
        check_k(k)?;
    }
    const GRID: usize = 200;
    let top = lambda_range(dim);
    let objective = |lambda: f64| candidate(lambda, dim).map_or(f64::NEG_INFINITY, |c| c.raw);
    let step = top / (GRID + 1) as f64;
    let best = (1..=GRID)
        .map(|i| (i, objective(i as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    if best.1 == f64::NEG_INFINITY {
        return Err(Error::Infeasible("no feasible lambda on the grid".into()));
    }
    let lambda = golden_section_max(
        objective,
        (best.0 - 1) as f64 * step,
        ((best.0 + 1) as f64 * step).min(top),
        1e-8,
    );
    let c = candidate(lambda, dim).ok_or_else(|| Error::Infeasible("refined lambda is infeasible".into()))?;
    Ok(ProbabilityBound {
        value: c.raw.min(1.0),
        raw_value: c.raw,
        method: BoundMethod::OrliczDual,
        lambda_star: Some(lambda),
        q_used: Some(c.q),
        orlicz_scale_used: Some(c.scale),
    })
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// `t^k exp(k/2 - k t²/2)`, a bound on `P(|Σ a_j U_j| ≥ t)` for `t > 1`.
pub fn tail_bound(t: f64, k: usize) -> Result<f64> {
    check_k(k)?;
    if !(t > 1.0) || !t.is_finite() {
        return Err(domain(format!("tail bound needs finite t > 1, got {t}")));
    }
    let k = k as f64;
    Ok((k * t.ln() + 0.5 * k * (1.0 - t * t)).exp())
}

/// `g_k(c) = f_k(c) e^{-c t²}`, the Chernoff bound before optimizing in `c`.
pub fn tail_chernoff(c: f64, t: f64, k: usize) -> Result<f64> {
    Ok(mgf_closed_form(c, k)? * (-c * t * t).exp())
}

/// The minimizer `(k/2)(1 - 1/t²)` of [`tail_chernoff`].
pub fn tail_optimal_c(t: f64, k: usize) -> f64 {
    0.5 * k as f64 * (1.0 - 1.0 / (t * t))
}

const THRESHOLD_LO: f64 = 1.0 + 1e-9;
const THRESHOLD_HI: f64 = 10.0;

/// The `t > 1` with `tail_bound(t, k) = p`.
pub fn solve_threshold(k: usize, p: f64) -> Result<f64> {
    check_k(k)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("probability must lie in (0, 1), got {p}")));
    }
    let f = |t: f64| tail_bound(t, k).map(|v| v - p);
    let (mut lo, mut hi) = (THRESHOLD_LO, THRESHOLD_HI);
    if f(lo)? < 0.0 || f(hi)? > 0.0 {
        return Err(Error::Infeasible(format!("no threshold in [{lo}, {hi}] for p = {p}")));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The lower bound on `A(a, 1)` obtained from `P(S ≥ 0) ≥ p` and the threshold `t`.
pub fn final_bound(field: Field, p: f64, t: f64) -> f64 {
    match field {
        Field::Real => p / t * (1.0 - 1.0 / (3.0 * t.powi(3))),
        Field::Complex => p / (t * t) * (1.0 - 1.0 / (2.0 * t * t)),
    }
}

/// Published targets for the final bounds.
pub fn final_target(field: Field) -> f64 {
    match field {
        Field::Real => 0.06011,
        Field::Complex => 0.03789,
    }
}

/// One quantity in a certificate together with the open interval it must lie in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub inequality: String,
    pub satisfied: bool,
}

impl ChainLink {
    fn new(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let inequality = match (lower, upper) {
            (Some(l), Some(u)) => format!("{l} < {name} < {u}"),
            (Some(l), None) => format!("{name} > {l}"),
            (None, Some(u)) => format!("{name} < {u}"),
            (None, None) => format!("{name} recorded"),
        };
        let mut link = Self {
            name: name.to_owned(),
            value,
            lower,
            upper,
            inequality,
            satisfied: false,
        };
        link.satisfied = link.check();
        link
    }

    pub fn check(&self) -> bool {
        self.value.is_finite() && self.lower.is_none_or(|l| self.value > l) && self.upper.is_none_or(|u| self.value < u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub field: FieldCase,
    pub p_lower: ProbabilityBound,
    pub threshold: f64,
    pub final_bound: f64,
    pub chain: Vec<ChainLink>,
}

impl BoundCertificate {
    /// Re-evaluates every link and recomputes the derived quantities.
    pub fn validate(&self) -> Result<()> {
        for link in &self.chain {
            if !link.check() {
                return Err(Error::Certificate {
                    link: link.name.clone(),
                    detail: format!("{} fails with value {}", link.inequality, link.value),
                });
            }
        }
        let k = self.field.k;
        let fail = |link: &str, detail: String| Error::Certificate {
            link: link.into(),
            detail,
        };
        let tail = tail_bound(self.threshold, k)?;
        if (tail - self.p_lower.value).abs() > 1e-8 {
            return Err(fail(
                "threshold",
                format!("tail bound {tail} differs from p = {}", self.p_lower.value),
            ));
        }
        let recomputed = final_bound(self.field.field, self.p_lower.value, self.threshold);
        if (recomputed - self.final_bound).abs() > 1e-14 {
            return Err(fail(
                "final_bound",
                format!("recomputed {recomputed} vs stored {}", self.final_bound),
            ));
        }
        Ok(())
    }

    pub fn all_satisfied(&self) -> bool {
        self.chain.iter().all(|l| l.satisfied)
    }
}

/// Certified lower bound on `A(a, 1)` valid for every unit normal `a`.
pub fn lower_bound_certificate(field: FieldCase) -> Result<BoundCertificate> {
    let k = field.k;
    let link_err = |name: &str, e: Error| Error::Certificate {
        link: name.into(),
        detail: e.to_string(),
    };
    let p = optimize_probability_bound(SphereDim::Finite(k)).map_err(|e| link_err("p_lower", e))?;
    let lambda = p.lambda_star.expect("Orlicz bound carries lambda");
    let q = p.q_used.expect("Orlicz bound carries q");
    let scale = p.orlicz_scale_used.expect("Orlicz bound carries the scale");
    let laplace = laplace_mgf_bound(lambda, k).map_err(|e| link_err("laplace_mgf", e))?;
    let veraar_floor = gamma_k(k)?;
    let threshold = solve_threshold(k, p.value).map_err(|e| link_err("threshold", e))?;
    let tail = tail_bound(threshold, k)?;
    let correction = match field.field {
        Field::Real => 1.0 - 1.0 / (3.0 * threshold.powi(3)),
        Field::Complex => 1.0 - 1.0 / (2.0 * threshold * threshold),
    };
    let bound = final_bound(field.field, p.value, threshold);
    let target = final_target(field.field);
    let reciprocal = match field.field {
        Field::Real => 1.0 / 17.0,
        Field::Complex => 1.0 / 27.0,
    };
    let chain = vec![
        ChainLink::new("q", q, Some(0.0), None),
        ChainLink::new("lambda_star", lambda, Some(0.0), Some(1.0)),
        ChainLink::new(
            "lambda_star_laplace_range",
            lambda,
            Some(0.0),
            Some((k as f64 / 2.0).sqrt()),
        ),
        ChainLink::new("laplace_mgf", laplace, Some(1.0), None),
        ChainLink::new("plus_mgf", 1.25 * laplace, Some(1.0), None),
        ChainLink::new("orlicz_scale", scale, Some(0.0), None),
        ChainLink::new("p_raw", p.raw_value, Some(0.0), None),
        ChainLink::new("p_lower", p.value, Some(veraar_floor), Some(1.0)),
        ChainLink::new("threshold", threshold, Some(1.0), Some(THRESHOLD_HI)),
        ChainLink::new("tail_at_threshold", tail, Some(0.0), Some(1.0)),
        ChainLink::new("correction", correction, Some(0.0), Some(1.0)),
        ChainLink::new("final_bound", bound, Some(target), None),
        ChainLink::new("target", target, Some(reciprocal), None),
    ];
    let cert = BoundCertificate {
        field,
        p_lower: p,
        threshold,
        final_bound: bound,
        chain,
    };
    cert.validate()?;
    Ok(cert)
}

/// Convenience wrapper selecting the field case by name.
pub fn certificate_for(field: Field) -> Result<BoundCertificate> {
    lower_bound_certificate(field_params(field))
}
