//! Spherical Monte Carlo.
//!
//! Section volumes are expectations over independent uniform points `U_j` on
//! the sphere `S^{k-1}`: `A(a,t) = E[1{|Σ a_j U_j| ≥ t} |Σ a_j U_j|^{-e}]` with
//! `(k, e) = (3, 1)` for the cube and `(4, 2)` for the polydisc. The same
//! sampler drives the tail probabilities and the quadratic statistic
//! `S = Σ_{i<j} a_i a_j <U_i, U_j>`.
//!
//! Sampling is split into fixed chunks. Chunk `i` draws from ChaCha stream `i`
//! of the configured seed and keeps its own Welford accumulator; accumulators
//! are merged in chunk order, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Direction, SectionQuery};
use crate::error::{domain, invalid, Result};

pub const DEFAULT_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Samples per substream.
    pub chunk: u64,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            chunk: DEFAULT_CHUNK,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("samples must be at least 1"));
        }
        if self.chunk == 0 {
            return Err(invalid("chunk must be at least 1"));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    /// A value known without sampling error.
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            samples: 0,
        }
    }

    /// Whether `target` lies within `z` standard errors (plus `slack`) of the estimate.
    pub fn agrees_with(&self, target: f64, z: f64, slack: f64) -> bool {
        (self.value - target).abs() <= z * self.std_error + slack
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Self {
            n,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * w,
        }
    }

    fn estimate(&self) -> McEstimate {
        let variance = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        McEstimate {
            value: self.mean,
            std_error: (variance.max(0.0) / self.n as f64).sqrt(),
            samples: self.n,
        }
    }
}

/// The random stream used for chunk `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Estimates the means of `width` statistics produced jointly per draw.
///
/// `make_sampler` is called once per chunk and returns a closure that writes
/// one draw of all statistics into its output slice.
pub fn estimate_means<M, S>(cfg: &McConfig, width: usize, make_sampler: M) -> Result<Vec<McEstimate>>
where
    M: Fn() -> S + Sync,
    S: FnMut(&mut ChaCha8Rng, &mut [f64]),
{
    cfg.validate()?;
    let chunks = cfg.samples.div_ceil(cfg.chunk);
    let parts: Vec<Vec<Welford>> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i);
            let len = cfg.chunk.min(cfg.samples - i * cfg.chunk);
            let mut sampler = make_sampler();
            let mut out = vec![0.0; width];
            let mut acc = vec![Welford::default(); width];
            for _ in 0..len {
                sampler(&mut rng, &mut out);
                for (w, &x) in acc.iter_mut().zip(&out) {
                    w.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Welford::default(); width];
    for part in parts {
        for (t, p) in total.iter_mut().zip(part) {
            *t = t.merge(p);
        }
    }
    Ok(total.iter().map(Welford::estimate).collect())
}

/// Estimates the mean of a scalar statistic.
pub fn estimate_mean<M, S>(cfg: &McConfig, make_sampler: M) -> Result<McEstimate>
where
    M: Fn() -> S + Sync,
    S: FnMut(&mut ChaCha8Rng) -> f64,
{
    let estimates = estimate_means(cfg, 1, || {
        let mut f = make_sampler();
        move |rng: &mut ChaCha8Rng, out: &mut [f64]| out[0] = f(rng)
    })?;
    Ok(estimates[0])
}

/// A uniform point on `S^{k-1}`.
pub fn sample_sphere<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(invalid(format!("sphere dimension k must be at least 2, got {k}")));
    }
    let mut u = vec![0.0; k];
    fill_sphere(rng, &mut u);
    Ok(u)
}

pub(crate) fn fill_sphere<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
            norm2 += *x * *x;
        }
        if norm2 > 0.0 {
            let inv = 1.0 / norm2.sqrt();
            out.iter_mut().for_each(|x| *x *= inv);
            return;
        }
    }
}

/// Writes `Σ a_j U_j` into `acc`, using `scratch` (length `k`) for the draws.
fn weighted_sphere_sum<R: Rng + ?Sized>(a: &[f64], rng: &mut R, scratch: &mut [f64], acc: &mut [f64]) {
    acc.iter_mut().for_each(|x| *x = 0.0);
    for &aj in a {
        fill_sphere(rng, scratch);
        for (s, u) in acc.iter_mut().zip(scratch.iter()) {
            *s += aj * u;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Monte Carlo section volume with the same conventions as the quadrature.
pub fn estimate_section_volume(query: &SectionQuery, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    let a = query.direction.nonzero();
    let t = query.t;
    if a.len() == 1 {
        // |Σ a_j U_j| = 1 identically
        return Ok(McEstimate::exact(if t <= 1.0 { 1.0 } else { 0.0 }));
    }
    let k = query.field.k;
    let e = query.field.weight_exponent;
    estimate_mean(cfg, || {
        let mut scratch = vec![0.0; k];
        let mut acc = vec![0.0; k];
        move |rng: &mut ChaCha8Rng| {
            weighted_sphere_sum(a, rng, &mut scratch, &mut acc);
            let r = norm(&acc);
            if r >= t {
                r.powi(-e)
            } else {
                0.0
            }
        }
    })
}

/// Empirical `P(|Σ a_j U_j| ≥ t)` with `U_j` uniform on `S^{k-1}`.
pub fn estimate_exceed_prob(a: &Direction, t: f64, k: usize, cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    if !t.is_finite() || t < 0.0 {
        return Err(invalid(format!("threshold must be finite and >= 0, got {t}")));
    }
    if k < 2 {
        return Err(invalid("sphere dimension k must be at least 2"));
    }
    if t == 0.0 {
        return Ok(McEstimate::exact(1.0));
    }
    let a = a.nonzero();
    estimate_mean(cfg, || {
        let mut scratch = vec![0.0; k];
        let mut acc = vec![0.0; k];
        move |rng: &mut ChaCha8Rng| {
            weighted_sphere_sum(a, rng, &mut scratch, &mut acc);
            if norm(&acc) >= t {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// `S = (|Σ a_j U_j|² - 1) / 2` for unit vectors `U_j`.
pub fn s_statistic(a: &Direction, draws: &[Vec<f64>]) -> Result<f64> {
    if draws.len() != a.n() {
        return Err(invalid(format!("expected {} draws, got {}", a.n(), draws.len())));
    }
    let k = draws[0].len();
    if draws.iter().any(|u| u.len() != k) {
        return Err(invalid("all draws must have the same dimension"));
    }
    let mut acc = vec![0.0; k];
    for (&aj, u) in a.coords().iter().zip(draws) {
        for (s, x) in acc.iter_mut().zip(u) {
            *s += aj * x;
        }
    }
    let r2: f64 = acc.iter().map(|x| x * x).sum();
    Ok(0.5 * (r2 - 1.0))
}

/// Power sums `Σ a_j^{2i}` for `i = 1..=4`.
fn power_sums(a: &Direction) -> [f64; 4] {
    let mut p = [0.0; 4];
    for &c in a.coords() {
        let x = c * c;
        let mut xp = x;
        for slot in p.iter_mut() {
            *slot += xp;
            xp *= x;
        }
    }
    p
}

/// `E S² = (1/k) Σ_{i<j} a_i² a_j²`.
pub fn moment_s2_exact(a: &Direction, k: usize) -> f64 {
    let [p1, p2, _, _] = power_sums(a);
    0.5 * (p1 * p1 - p2) / k as f64
}

/// `E S⁴` in closed form.
///
/// Writing `x_j = a_j²`, `T = Σ_{i<j} x_i x_j`, `P = Σ_{i<j} x_i² x_j²` and
/// `e4` for the fourth elementary symmetric polynomial of the `x_j`,
///
/// ```text
///   E S⁴ = 3 (T² - P) / k² + 3 P / (k (k+2)) + 72 e4 / k³.
/// ```
///
/// The three terms come from products of two distinct doubled pairs, from a
/// single pair taken four times, and from 4-cycles (three per set of four
/// indices, each realized by 4! orderings).
pub fn moment_s4_exact(a: &Direction, k: usize) -> f64 {
    let [p1, p2, p3, p4] = power_sums(a);
    let t = 0.5 * (p1 * p1 - p2);
    let p = 0.5 * (p2 * p2 - p4);
    let e1 = p1;
    let e2 = 0.5 * (e1 * p1 - p2);
    let e3 = (e2 * p1 - e1 * p2 + p3) / 3.0;
    let e4 = (e3 * p1 - e2 * p2 + e1 * p3 - p4) / 4.0;
    let k = k as f64;
    3.0 * (t * t - p) / (k * k) + 3.0 * p / (k * (k + 2.0)) + 72.0 * e4 / (k * k * k)
}

/// Exact spherical moment `E <U, e_1>^{2p}` compared with the Gaussian
/// moment `k^{-p} (2p-1)!!`, plus a sampled estimate of the former.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgaussCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub empirical: McEstimate,
}

impl SubgaussCheck {
    /// `lhs ≤ rhs`, allowing for rounding in the log-gamma evaluation (the
    /// two sides are equal at `p = 1`).
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12)
    }
}

pub fn subgauss_moment_check(k: usize, p: u32, cfg: &McConfig) -> Result<SubgaussCheck> {
    if p < 1 {
        return Err(domain("moment order p must be at least 1"));
    }
    if k < 2 {
        return Err(invalid("sphere dimension k must be at least 2"));
    }
    let half_k = k as f64 / 2.0;
    let pf = p as f64;
    let lhs =
        (libm::lgamma(half_k) + libm::lgamma(pf + 0.5) - 0.5 * std::f64::consts::PI.ln() - libm::lgamma(half_k + pf))
            .exp();
    let double_factorial: f64 = (1..=p).map(|i| (2 * i - 1) as f64).product();
    let rhs = double_factorial / (k as f64).powi(p as i32);
    let empirical = estimate_mean(cfg, || {
        let mut u = vec![0.0; k];
        move |rng: &mut ChaCha8Rng| {
            fill_sphere(rng, &mut u);
            u[0].powi(2 * p as i32)
        }
    })?;
    Ok(SubgaussCheck { lhs, rhs, empirical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{normalize_direction, Field};
    use crate::quadrature::{section_volume, QuadratureConfig};
    use proptest::prelude::*;
    use rand::Rng;

    /// `E Π_{edges} <U_i, U_j>` for four edges on independent uniform sphere
    /// points. Odd vertex degree forces zero by the symmetry `U_i -> -U_i`.
    fn edge_product_expectation(edges: [(usize, usize); 4], k: f64) -> f64 {
        let mut degree = std::collections::HashMap::new();
        for (i, j) in edges {
            *degree.entry(i).or_insert(0) += 1;
            *degree.entry(j).or_insert(0) += 1;
        }
        if degree.values().any(|d| d % 2 == 1) {
            return 0.0;
        }
        let mut distinct = edges.to_vec();
        distinct.sort();
        distinct.dedup();
        match distinct.len() {
            1 => 3.0 / (k * (k + 2.0)),
            2 => 1.0 / (k * k),
            4 => 1.0 / (k * k * k),
            _ => unreachable!("no even multigraph with three distinct edges out of four"),
        }
    }

    fn brute_force_moments(a: &[f64], k: usize) -> (f64, f64) {
        let n = a.len();
        let kf = k as f64;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let w = |(i, j): (usize, usize)| a[i] * a[j];
        let s2: f64 = pairs.iter().map(|&p| w(p) * w(p) / kf).sum();
        let mut s4 = 0.0;
        for &p1 in &pairs {
            for &p2 in &pairs {
                for &p3 in &pairs {
                    for &p4 in &pairs {
                        let e = edge_product_expectation([p1, p2, p3, p4], kf);
                        if e != 0.0 {
                            s4 += w(p1) * w(p2) * w(p3) * w(p4) * e;
                        }
                    }
                }
            }
        }
        (s2, s4)
    }

    fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Direction {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        normalize_direction(&raw).unwrap()
    }

    #[test]
    fn sphere_points_are_unit_and_centered() {
        let mut rng = stream_rng(7, 0);
        for k in 2..6 {
            let u = sample_sphere(k, &mut rng).unwrap();
            assert!((norm(&u) - 1.0).abs() < 1e-12);
        }
        assert!(sample_sphere(1, &mut rng).is_err());

        let cfg = McConfig::new(1_000_000, 11);
        let est = estimate_means(&cfg, 5, || {
            let mut u = [0.0; 3];
            move |rng: &mut ChaCha8Rng, out: &mut [f64]| {
                fill_sphere(rng, &mut u);
                out[0] = u[0] * u[0];
                out[1] = u[0].powi(4);
                out[2] = u[0];
                out[3] = u[1];
                out[4] = u[2];
            }
        })
        .unwrap();
        assert!(est[0].agrees_with(1.0 / 3.0, 4.0, 0.0), "{:?}", est[0]);
        assert!(est[1].agrees_with(0.2, 4.0, 0.0), "{:?}", est[1]);
        for e in &est[2..] {
            assert!(e.agrees_with(0.0, 4.0, 0.0), "{e:?}");
        }
    }

    #[test]
    fn estimates_are_reproducible_across_thread_counts() {
        let q = SectionQuery::new(normalize_direction(&[3.0, 2.0, 1.0]).unwrap(), 0.4, Field::Real).unwrap();
        let cfg = McConfig {
            samples: 50_000,
            seed: 3,
            chunk: 4096,
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_section_volume(&q, &cfg).unwrap());
        let b = four.install(|| estimate_section_volume(&q, &cfg).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        assert_eq!(a.samples, 50_000);
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Welford::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut left = Welford::default();
        let mut right = Welford::default();
        xs[..313].iter().for_each(|&x| left.push(x));
        xs[313..].iter().for_each(|&x| right.push(x));
        let merged = left.merge(right);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.m2 - whole.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn section_volume_examples() {
        let s2 = 0.5f64.sqrt();
        let q = SectionQuery::new(normalize_direction(&[s2, s2]).unwrap(), 1.0, Field::Real).unwrap();
        let e = estimate_section_volume(&q, &McConfig::new(2_000_000, 1)).unwrap();
        assert!(e.agrees_with(2f64.sqrt() - 1.0, 4.0, 0.0), "{e:?}");

        let q = SectionQuery::new(normalize_direction(&[1.0, 0.0]).unwrap(), 0.7, Field::Real).unwrap();
        assert_eq!(estimate_section_volume(&q, &McConfig::new(10, 1)).unwrap().value, 1.0);

        let q = SectionQuery::new(normalize_direction(&[1.0, 1.0]).unwrap(), 0.0, Field::Complex).unwrap();
        let e = estimate_section_volume(&q, &McConfig::new(1_000_000, 2)).unwrap();
        assert!(
            e.value + 4.0 * e.std_error >= 1.0 && e.value - 4.0 * e.std_error <= 2.0,
            "{e:?}"
        );
    }

    #[test]
    fn agrees_with_quadrature() {
        let mut rng = stream_rng(99, 0);
        let cfg = QuadratureConfig::default();
        for i in 0..6 {
            let n = 2 + i % 4;
            let a = random_direction(&mut rng, n);
            let t = rng.random_range(0.05..1.2);
            for field in [Field::Real, Field::Complex] {
                let q = SectionQuery::new(a.clone(), t, field).unwrap();
                let exact = section_volume(&q, &cfg).unwrap();
                let est = estimate_section_volume(&q, &McConfig::new(400_000, i as u64)).unwrap();
                assert!(
                    est.agrees_with(exact, 4.0, 1e-6),
                    "{field:?} {a:?} t={t}: {est:?} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn exceed_probability_examples() {
        let a = Direction::diagonal(5).unwrap();
        assert_eq!(
            estimate_exceed_prob(&a, 0.0, 3, &McConfig::new(10, 0)).unwrap().value,
            1.0
        );
        let a = normalize_direction(&[1.0, 0.0]).unwrap();
        assert_eq!(
            estimate_exceed_prob(&a, 0.5, 3, &McConfig::new(100, 0)).unwrap().value,
            1.0
        );
        assert!(estimate_exceed_prob(&a, -0.5, 3, &McConfig::new(100, 0)).is_err());
    }

    #[test]
    fn s_statistic_examples() {
        let a = Direction::diagonal(2).unwrap();
        let u = vec![1.0, 0.0, 0.0];
        let v = vec![-1.0, 0.0, 0.0];
        assert!((s_statistic(&a, &[u.clone(), u.clone()]).unwrap() - 0.5).abs() < 1e-15);
        assert!((s_statistic(&a, &[u.clone(), v]).unwrap() + 0.5).abs() < 1e-15);
        assert!(s_statistic(&a, &[u]).is_err());
    }

    #[test]
    fn s_statistic_equals_pair_sum() {
        let mut rng = stream_rng(5, 0);
        for n in 2..10 {
            let a = random_direction(&mut rng, n);
            let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_sphere(3, &mut rng).unwrap()).collect();
            let c = a.coords();
            let mut pair = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    let dot: f64 = draws[i].iter().zip(&draws[j]).map(|(x, y)| x * y).sum();
                    pair += c[i] * c[j] * dot;
                }
            }
            assert!((s_statistic(&a, &draws).unwrap() - pair).abs() < 1e-10);
        }
    }

    #[test]
    fn moment_examples() {
        let a = Direction::diagonal(2).unwrap();
        assert!((moment_s2_exact(&a, 3) - 1.0 / 12.0).abs() < 1e-16);
        assert!((moment_s4_exact(&a, 3) - 1.0 / 80.0).abs() < 1e-16);
        let e1 = normalize_direction(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(moment_s2_exact(&e1, 3), 0.0);
        assert_eq!(moment_s4_exact(&e1, 4), 0.0);
    }

    #[test]
    fn moments_match_brute_force() {
        let mut rng = stream_rng(17, 0);
        for _ in 0..10 {
            let n = rng.random_range(2..=7);
            let k = rng.random_range(3..=4);
            let a = random_direction(&mut rng, n);
            let (s2, s4) = brute_force_moments(a.coords(), k);
            assert!((moment_s2_exact(&a, k) - s2).abs() < 1e-14);
            assert!((moment_s4_exact(&a, k) - s4).abs() < 1e-14);
        }
    }

    #[test]
    fn moments_match_sampling() {
        let a = Direction::diagonal(8).unwrap();
        let k = 3;
        let cfg = McConfig::new(1_000_000, 23);
        let est = estimate_means(&cfg, 2, || {
            let mut draws = vec![vec![0.0; k]; 8];
            let a = &a;
            move |rng: &mut ChaCha8Rng, out: &mut [f64]| {
                for d in draws.iter_mut() {
                    fill_sphere(rng, d);
                }
                let s = s_statistic(a, &draws).unwrap();
                out[0] = s * s;
                out[1] = s.powi(4);
            }
        })
        .unwrap();
        assert!(est[0].agrees_with(moment_s2_exact(&a, k), 4.0, 0.0), "{:?}", est[0]);
        assert!(est[1].agrees_with(moment_s4_exact(&a, k), 4.0, 0.0), "{:?}", est[1]);
    }

    #[test]
    fn subgauss_examples() {
        let cfg = McConfig::new(200_000, 1);
        for (k, p, lhs, rhs) in [
            (3, 1, 1.0 / 3.0, 1.0 / 3.0),
            (3, 2, 0.2, 1.0 / 3.0),
            (4, 2, 0.125, 3.0 / 16.0),
        ] {
            let c = subgauss_moment_check(k, p, &cfg).unwrap();
            assert!((c.lhs - lhs).abs() < 1e-14 && (c.rhs - rhs).abs() < 1e-15, "{c:?}");
            assert!(c.holds());
            assert!(c.empirical.agrees_with(c.lhs, 4.0, 0.0));
        }
        assert!(subgauss_moment_check(3, 0, &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn spherical_moments_are_below_gaussian(k in 2usize..40, p in 1u32..12) {
            let c = subgauss_moment_check(k, p, &McConfig::new(1, 0)).unwrap();
            prop_assert!(c.holds());
        }
    }
}
