//! Generalized exponential integral `E_q(z)` for complex `z` off the negative
//! real axis, and the oscillatory power tail built on it.

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_RADIUS: f64 = 2.0;
const EPS: f64 = 1e-16;

/// `∫_S^∞ s^{-q} e^{iωs} ds` for `S > 0` and either `q > 1`, or `q > 0` with `ω ≠ 0`.
pub(crate) fn power_oscillatory_tail(q: f64, omega: f64, s0: f64) -> Complex64 {
    let scale = s0.powf(1.0 - q);
    if omega == 0.0 {
        return Complex64::new(scale / (q - 1.0), 0.0);
    }
    scale * expint_e(q, Complex64::new(0.0, -omega * s0))
}

/// `E_q(z) = ∫_1^∞ e^{-zu} u^{-q} du`, continued analytically in `z`.
pub(crate) fn expint_e(q: f64, z: Complex64) -> Complex64 {
    if z.norm() >= SERIES_RADIUS {
        continued_fraction(q, z)
    } else if (q - q.round()).abs() < 1e-12 {
        series_integer(q.round() as i64, z)
    } else {
        series_fractional(q, z)
    }
}

fn continued_fraction(q: f64, z: Complex64) -> Complex64 {
    let tiny = Complex64::new(1e-300, 0.0);
    let mut b = z + q;
    let mut c = Complex64::new(1e300, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 1..100_000 {
        let fi = i as f64;
        let an = -fi * (q - 1.0 + fi);
        b += 2.0;
        d = an * d + b;
        if d.norm() < 1e-300 {
            d = tiny;
        }
        d = d.inv();
        c = b + an / c;
        if c.norm() < 1e-300 {
            c = tiny;
        }
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < EPS {
            break;
        }
    }
    h * (-z).exp()
}

fn series_fractional(q: f64, z: Complex64) -> Complex64 {
    let lead = z.powf(q - 1.0) * libm::tgamma(1.0 - q);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term / (1.0 - q);
    for k in 1..200 {
        let fk = k as f64;
        term *= -z / fk;
        let add = term / (1.0 - q + fk);
        sum += add;
        if add.norm() < EPS * sum.norm().max(1e-300) {
            break;
        }
    }
    lead - sum
}

fn series_integer(n: i64, z: Complex64) -> Complex64 {
    let nm1 = (n - 1) as i32;
    let mut psi = -EULER_GAMMA;
    let mut fact = 1.0;
    for k in 1..n {
        psi += 1.0 / k as f64;
        fact *= k as f64;
    }
    let minus_z = -z;
    let lead = minus_z.powi(nm1) / fact * (psi - z.ln());
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..(200 + n) {
        if k > 0 {
            term *= minus_z / k as f64;
        }
        if k == n - 1 {
            continue;
        }
        let add = term / (k - n + 1) as f64;
        sum += add;
        if k > n && add.norm() < EPS * sum.norm().max(1e-300) {
            break;
        }
    }
    lead - sum
}
