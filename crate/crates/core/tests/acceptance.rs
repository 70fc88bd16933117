//! Acceptance criteria, run in sequence with one PASS/FAIL line each.
//!
//! Every criterion draws its random instances from a fixed seed so that a run
//! is reproducible. Runtime limits are part of each criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use cube_sections::bounds::{optimize_probability_bound, tail_bound, SphereDim};
use cube_sections::cli::{execute, Cli};
use cube_sections::domain::{normalize_direction, Direction, Field, SectionQuery};
use cube_sections::montecarlo::{
    estimate_exceed_prob, estimate_means, estimate_section_volume, moment_s2_exact, moment_s4_exact, sample_sphere,
    McConfig,
};
use cube_sections::multidim::{
    central_bracket, decomposition_sides, default_radius, density_mc, empirical_minimum, lambda_decomposition,
    random_frame, AffineSectionQuery,
};
use cube_sections::quadrature::{diagonal_limit_closed_form, section_volume, QuadratureConfig};
use cube_sections::specfun::khintchine_b;
use cube_sections::{bounds, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

/// Collects sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn finish(self) -> Outcome {
        let mut detail = self.notes.join("; ");
        if !self.failures.is_empty() {
            let shown: Vec<&str> = self.failures.iter().take(5).map(String::as_str).collect();
            detail = format!("{} failure(s): {} | {detail}", self.failures.len(), shown.join("; "));
        }
        Outcome::new(self.failures.is_empty(), detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_direction(rng: &mut ChaCha8Rng, n_lo: usize, n_hi: usize) -> Direction {
    let n = rng.random_range(n_lo..=n_hi);
    let raw: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    normalize_direction(&raw).expect("gaussian vector is nonzero")
}

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn criterion_1() -> Outcome {
    let mut c = Checks::default();
    let cli = Cli::try_parse_from(["cube-sections", "certify", "--field", "both"]).expect("arguments parse");
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("certify failed: {e}")),
    };
    c.require(report.passed(), "certificate chain has a failing link");
    let get = |label: &str| {
        report
            .outputs
            .iter()
            .find(|o| o.label == label)
            .map(|o| o.value)
            .unwrap_or(f64::NAN)
    };
    let cases = [
        ("real", 0.06011, 0.1268, 0.7111, 1.9182),
        ("complex", 0.03789, 0.1407, 0.7508, 1.7657),
    ];
    for (name, target, p_min, lambda, threshold) in cases {
        let fb = get(&format!("{name}.final_bound"));
        let p = get(&format!("{name}.p_lower"));
        let l = get(&format!("{name}.lambda_star"));
        let t = get(&format!("{name}.threshold"));
        c.require(fb > target, format!("{name} final bound {fb} <= {target}"));
        c.require(p >= p_min, format!("{name} p {p} < {p_min}"));
        c.require((l - lambda).abs() <= 0.01, format!("{name} lambda* {l}"));
        c.require((t - threshold).abs() <= 1e-3, format!("{name} threshold {t}"));
        c.note(format!("{name}: bound {fb:.6}, p {p:.6}, lambda* {l:.5}, t {t:.5}"));
    }
    c.finish()
}

fn criterion_2() -> Outcome {
    let mut c = Checks::default();
    let cases = [(2, 2f64.sqrt() - 1.0), (3, (6.0 * 3f64.sqrt() - 9.0) / 4.0)];
    for (n, exact) in cases {
        let start = Instant::now();
        let q = SectionQuery::new(Direction::diagonal(n).unwrap(), 1.0, Field::Real).unwrap();
        match section_volume(&q, &quad()) {
            Ok(v) => {
                let elapsed = start.elapsed();
                c.require((v - exact).abs() <= 1e-6, format!("diag-{n}: {v} vs {exact}"));
                c.require(elapsed < Duration::from_secs(1), format!("diag-{n} took {elapsed:?}"));
                c.note(format!("diag-{n}: {v:.12} (error {:.1e})", (v - exact).abs()));
            }
            Err(e) => c.require(false, format!("diag-{n}: {e}")),
        }
    }
    c.finish()
}

fn criterion_3() -> Outcome {
    let mut c = Checks::default();
    let diag = |n: usize, field: Field| {
        let q = SectionQuery::new(Direction::diagonal(n).unwrap(), 1.0, field).unwrap();
        section_volume(&q, &quad())
    };
    let mut values = Vec::new();
    for n in 2..=50 {
        match diag(n, Field::Real) {
            Ok(v) => values.push(v),
            Err(e) => {
                c.require(false, format!("real diag-{n}: {e}"));
                return c.finish();
            }
        }
    }
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    c.require(decreasing, "real diagonal sweep is not strictly decreasing");
    c.note(format!(
        "real n=2..50 strictly decreasing: {decreasing}, n=50 {:.6}",
        values[values.len() - 1]
    ));
    for field in [Field::Real, Field::Complex] {
        let limit = diagonal_limit_closed_form(field);
        match diag(200, field) {
            Ok(v) => {
                c.require((v - limit).abs() <= 0.01, format!("{field:?} n=200: {v} vs {limit}"));
                c.note(format!("{field:?} n=200: {v:.6} vs limit {limit:.6}"));
            }
            Err(e) => c.require(false, format!("{field:?} n=200: {e}")),
        }
    }
    c.finish()
}

fn criterion_4() -> Outcome {
    let mut c = Checks::default();
    let mut r = rng(4);
    let mut worst_z = 0.0f64;
    let mut count = 0;
    for i in 0..100 {
        let field = if i % 2 == 0 { Field::Real } else { Field::Complex };
        let a = random_direction(&mut r, 1, 6);
        let t = r.random_range(0.0..=1.2);
        let q = SectionQuery::new(a.clone(), t, field).unwrap();
        let exact = match section_volume(&q, &quad()) {
            Ok(v) => v,
            Err(Error::Discontinuity { .. }) => {
                c.note(format!("instance {i} sits on a discontinuity; skipped"));
                continue;
            }
            Err(e) => {
                c.require(false, format!("instance {i} quadrature: {e}"));
                continue;
            }
        };
        let mc = estimate_section_volume(&q, &McConfig::new(10_000_000, 4_000 + i)).unwrap();
        let gap = (exact - mc.value).abs();
        let allowed = 3.0 * mc.std_error + 1e-6;
        if mc.std_error > 0.0 {
            worst_z = worst_z.max(gap / mc.std_error);
        }
        count += 1;
        c.require(
            gap <= allowed,
            format!(
                "instance {i} ({field:?}, n={}, t={t:.4}): quad {exact} mc {} ± {}",
                a.n(),
                mc.value,
                mc.std_error
            ),
        );
    }
    c.note(format!("{count} instances, largest |quad - mc|/sigma = {worst_z:.2}"));
    c.finish()
}

/// `E S²` and `E S⁴` by summing over ordered tuples of index pairs.
fn moments_by_enumeration(a: &[f64], k: usize) -> (f64, f64) {
    let n = a.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let kf = k as f64;
    let weight = |p: (usize, usize)| a[p.0] * a[p.1];
    let mut s2 = 0.0;
    for &p in &pairs {
        s2 += weight(p) * weight(p) / kf;
    }
    let mut s4 = 0.0;
    for &e1 in &pairs {
        for &e2 in &pairs {
            for &e3 in &pairs {
                for &e4 in &pairs {
                    let edges = [e1, e2, e3, e4];
                    let expectation = four_edge_expectation(&edges, kf);
                    if expectation != 0.0 {
                        s4 += expectation * edges.iter().map(|&e| weight(e)).product::<f64>();
                    }
                }
            }
        }
    }
    (s2, s4)
}

/// `E Π <U_i, U_j>` over the four edges of a multigraph with independent
/// uniform vertices.
fn four_edge_expectation(edges: &[(usize, usize); 4], k: f64) -> f64 {
    let mut distinct: Vec<((usize, usize), usize)> = Vec::new();
    for &e in edges {
        match distinct.iter_mut().find(|(d, _)| *d == e) {
            Some((_, m)) => *m += 1,
            None => distinct.push((e, 1)),
        }
    }
    let mut mult: Vec<usize> = distinct.iter().map(|(_, m)| *m).collect();
    mult.sort_unstable();
    match mult.as_slice() {
        [4] => 3.0 / (k * (k + 2.0)),
        [2, 2] => 1.0 / (k * k),
        [1, 1, 1, 1] => {
            let mut degree = std::collections::HashMap::new();
            for &(i, j) in edges {
                *degree.entry(i).or_insert(0) += 1;
                *degree.entry(j).or_insert(0) += 1;
            }
            if degree.len() == 4 && degree.values().all(|&d| d == 2) {
                1.0 / (k * k * k)
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

fn criterion_5() -> Outcome {
    let mut c = Checks::default();
    let mut r = rng(5);
    let mut claim_failures = 0;
    let mut worst_ratio = 0.0f64;
    let mut worst_z = 0.0f64;
    for i in 0..50 {
        let a = random_direction(&mut r, 2, 8);
        for k in [3usize, 4] {
            let s2 = moment_s2_exact(&a, k);
            let s4 = moment_s4_exact(&a, k);
            let (b2, b4) = moments_by_enumeration(a.coords(), k);
            c.require(
                (s2 - b2).abs() <= 1e-13,
                format!("E S^2 instance {i} k={k}: {s2} vs {b2}"),
            );
            c.require(
                (s4 - b4).abs() <= 1e-13,
                format!("E S^4 instance {i} k={k}: {s4} vs {b4}"),
            );

            let cfg = McConfig::new(200_000, 5_000 + 10 * i + k as u64);
            let coords = a.coords().to_vec();
            let est = estimate_means(&cfg, 2, || {
                let coords = coords.clone();
                move |rng: &mut ChaCha8Rng, out: &mut [f64]| {
                    let mut sum = vec![0.0; k];
                    for &aj in &coords {
                        let u = sample_sphere(k, rng).unwrap();
                        sum.iter_mut().zip(&u).for_each(|(s, x)| *s += aj * x);
                    }
                    let s = 0.5 * (sum.iter().map(|x| x * x).sum::<f64>() - 1.0);
                    out[0] = s * s;
                    out[1] = s * s * s * s;
                }
            })
            .unwrap();
            for (e, exact, name) in [(est[0], s2, "E S^2"), (est[1], s4, "E S^4")] {
                worst_z = worst_z.max((e.value - exact).abs() / e.std_error);
                c.require(e.agrees_with(exact, 4.0, 0.0), format!("{name} MC instance {i} k={k}"));
            }

            let claim = (3.0 + 4.0 / k as f64) * s2 * s2;
            worst_ratio = worst_ratio.max(s4 / claim);
            if s4 > claim {
                claim_failures += 1;
                c.require(
                    false,
                    format!(
                        "claim fails: instance {i} n={} k={k}: E S^4 {s4:.6} > {claim:.6}",
                        a.n()
                    ),
                );
            }
        }
    }
    c.note(format!(
        "largest MC deviation {worst_z:.2} sigma; (3+4/k)(E S^2)^2 >= E S^4 failed on {claim_failures}/100, max ratio {worst_ratio:.4}"
    ));
    c.finish()
}

fn criterion_6() -> Outcome {
    let mut c = Checks::default();
    let mut r = rng(6);
    let certified = |k: usize| optimize_probability_bound(SphereDim::Finite(k)).unwrap().value;
    let (p3, p4) = (certified(3), certified(4));
    let mut min_margin = f64::INFINITY;
    for i in 0..50u64 {
        let k = if i % 2 == 0 { 3 } else { 4 };
        let p = if k == 3 { p3 } else { p4 };
        let a = random_direction(&mut r, 2, 16);
        let cfg = McConfig::new(1_000_000, 6_000 + i);
        let e = estimate_exceed_prob(&a, 1.0, k, &cfg).unwrap();
        min_margin = min_margin.min((e.value - p) / e.std_error);
        c.require(
            e.value >= p - 4.0 * e.std_error,
            format!("P(S>=0) instance {i} k={k}: {} < {p}", e.value),
        );
        for t in [1.2, 1.5, 2.0] {
            let e = estimate_exceed_prob(&a, t, k, &cfg).unwrap();
            let bound = tail_bound(t, k).unwrap();
            c.require(
                e.value <= bound + 4.0 * e.std_error,
                format!("tail instance {i} k={k} t={t}: {} > {bound}", e.value),
            );
        }
    }
    for k in [3usize, 4] {
        let b = khintchine_b(2.0, k).unwrap();
        c.require(b == 1.0, format!("Khintchine p=2, k={k} gives {b}"));
    }
    let large = optimize_probability_bound(SphereDim::Large).unwrap().value;
    c.require(large > 0.205475, format!("large-k bound {large}"));
    c.note(format!(
        "certified p: k=3 {p3:.6}, k=4 {p4:.6}; smallest (empirical - certified)/sigma = {min_margin:.1}; large-k {large:.7}"
    ));
    c.finish()
}

fn criterion_7() -> Outcome {
    let mut c = Checks::default();
    let mut r = rng(7);
    let mut worst_det = 0.0f64;
    let mut frames = 0;
    while frames < 100 {
        let n = r.random_range(2..=8usize);
        let d = r.random_range(1..=(n - 1).min(3));
        let frame = random_frame(n, d, &mut r).unwrap();
        let rad = frame.columns()[0].norm();
        let dec = lambda_decomposition(&frame).unwrap();
        worst_det = worst_det
            .max((dec.det_plus - (2.0 + 2.0 * rad).powf(-0.5)).abs())
            .max((dec.det_minus - (2.0 - 2.0 * rad).powf(-0.5)).abs());
        frames += 1;
    }
    c.require(worst_det <= 1e-10, format!("det identity error {worst_det:e}"));
    c.note(format!("det identities: max error {worst_det:.1e} over 100 frames"));

    let tol = 10.0 * quad().abs_tol;
    let mut worst_identity = 0.0f64;
    for _ in 0..20 {
        let frame = random_frame(3, 1, &mut r).unwrap();
        match decomposition_sides(&frame, &quad()) {
            Ok((lhs, rhs)) => worst_identity = worst_identity.max((lhs - rhs).abs()),
            Err(e) => c.require(false, format!("decomposition: {e}")),
        }
    }
    c.require(
        worst_identity <= tol,
        format!("decomposition residual {worst_identity:e}"),
    );
    c.note(format!(
        "decomposition residual {worst_identity:.1e} (n=3, d=1, 20 frames)"
    ));

    for (n, d) in [(4usize, 1usize), (4, 2), (6, 2)] {
        let radius = default_radius(d);
        let (lo, hi) = central_bracket(n, d, radius);
        let mut seen = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..10u64 {
            let frame = random_frame(n, d, &mut r).unwrap();
            let q = AffineSectionQuery::new(frame, &vec![0.0; d]).unwrap();
            let e = density_mc(&q, radius, &McConfig::new(1_000_000, 7_000 + i))
                .unwrap()
                .estimate;
            seen = (seen.0.min(e.value), seen.1.max(e.value));
            c.require(
                e.value + 4.0 * e.std_error >= lo && e.value - 4.0 * e.std_error <= hi,
                format!("bracket ({n},{d}): {} ± {} outside [{lo}, {hi}]", e.value, e.std_error),
            );
        }
        c.note(format!(
            "central ({n},{d}) in [{:.4}, {:.4}] within [{lo:.4}, {hi:.4}]",
            seen.0, seen.1
        ));
    }

    for (n, d, trials) in [(4usize, 1usize, 200usize), (5, 2, 60)] {
        match empirical_minimum(n, d, trials, &McConfig::new(1_000_000, 77)) {
            Ok(rep) => {
                c.require(
                    rep.positive(),
                    format!("({n},{d}) minimum {} not positive", rep.min_volume),
                );
                c.note(format!(
                    "min at |u|=1/2 for ({n},{d}): {:.5} ({})",
                    rep.min_volume, rep.method
                ));
            }
            Err(e) => c.require(false, format!("empirical_minimum({n},{d}): {e}")),
        }
    }
    c.finish()
}

fn criterion_8() -> Outcome {
    let mut c = Checks::default();
    let mut r = rng(8);
    let certified = |field: Field| bounds::certificate_for(field).unwrap().final_bound;
    let floors = [
        (Field::Real, certified(Field::Real)),
        (Field::Complex, certified(Field::Complex)),
    ];
    let mut lowest = [f64::INFINITY; 2];
    let mut evaluated = 0;
    for (slot, (field, floor)) in floors.iter().enumerate() {
        // Quadrature over random and near-extremal directions.
        for i in 0..150 {
            let a = if i % 3 == 0 {
                let n = r.random_range(2..=60usize);
                let raw: Vec<f64> = (0..n)
                    .map(|_| 1.0 + 0.05 * r.sample::<f64, _>(StandardNormal))
                    .collect();
                normalize_direction(&raw).unwrap()
            } else {
                random_direction(&mut r, 2, 24)
            };
            let t = if i % 2 == 0 { 1.0 } else { r.random_range(0.0..=1.0) };
            let q = SectionQuery::new(a, t, *field).unwrap();
            match section_volume(&q, &quad()) {
                Ok(v) => {
                    lowest[slot] = lowest[slot].min(v);
                    evaluated += 1;
                    c.require(v >= *floor - 1e-9, format!("{field:?} quadrature volume {v} < {floor}"));
                }
                Err(e) => c.require(false, format!("{field:?} quadrature: {e}")),
            }
        }
        // Sampling, including dimensions beyond the quadrature sweep.
        for i in 0..10u64 {
            let a = match i {
                0 => Direction::diagonal(400).unwrap(),
                _ => random_direction(&mut r, 2, 100),
            };
            let q = SectionQuery::new(a, 1.0, *field).unwrap();
            let e = estimate_section_volume(&q, &McConfig::new(1_000_000, 8_000 + i)).unwrap();
            lowest[slot] = lowest[slot].min(e.value);
            evaluated += 1;
            c.require(
                e.value >= *floor - 4.0 * e.std_error,
                format!("{field:?} sampled volume {} ± {} < {floor}", e.value, e.std_error),
            );
        }
    }
    // Codimension two at distance 1/2: no certified constant, positivity only.
    match empirical_minimum(6, 2, 40, &McConfig::new(1_000_000, 88)) {
        Ok(rep) => {
            c.require(
                rep.positive(),
                format!("codimension-2 minimum {} not positive", rep.min_volume),
            );
            c.note(format!("codim-2 (6,2) min {:.4}", rep.min_volume));
        }
        Err(e) => c.require(false, format!("codimension-2 sampling: {e}")),
    }
    c.note(format!(
        "{evaluated} sections; lowest real {:.5} vs {:.5}, complex {:.5} vs {:.5}",
        lowest[0], floors[0].1, lowest[1], floors[1].1
    ));
    c.finish()
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 certified constants", criterion_1, Duration::from_secs(1)),
        ("2 closed-form sections", criterion_2, Duration::from_secs(2)),
        ("3 diagonal asymptotics", criterion_3, Duration::from_secs(60)),
        ("4 quadrature vs sampling", criterion_4, Duration::from_secs(600)),
        ("5 moment formulas", criterion_5, Duration::from_secs(120)),
        ("6 bound soundness", criterion_6, Duration::from_secs(300)),
        ("7 codimension identities", criterion_7, Duration::from_secs(600)),
        ("8 falsification", criterion_8, Duration::from_secs(600)),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, limit) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let passed = outcome.passed && in_time;
        failed += usize::from(!passed);
        let timing = if in_time {
            format!("{:.2}s", elapsed.as_secs_f64())
        } else {
            format!("{:.2}s exceeds {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64())
        };
        println!(
            "criterion {name}: {} [{timing}] {}",
            if passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
