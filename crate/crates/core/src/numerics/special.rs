use crate::error::{domain, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const SERIES_EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

/// `ln(1 + x)`, accurate for small `|x|`.
pub fn log1p_stable(x: f64) -> Result<f64> {
    if x.is_nan() || x <= -1.0 {
        return Err(domain("log1p argument", x));
    }
    Ok(x.ln_1p())
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(domain("ln_gamma argument", x));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum away from its pole.
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + sum.ln()
}

/// `ln B(a, b) = ln Γ(a) + ln Γ(b) - ln Γ(a + b)`.
///
/// The two shape arguments are sorted before evaluation so the result is
/// bitwise symmetric.
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || a <= 0.0 {
        return Err(domain("ln_beta first shape", a));
    }
    if b.is_nan() || b <= 0.0 {
        return Err(domain("ln_beta second shape", b));
    }
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Ok(ln_gamma_pos(lo) + ln_gamma_pos(hi) - ln_gamma_pos(lo + hi))
}

/// Regularized lower incomplete gamma `P(a, x)`.
///
/// Series expansion below `x < a + 1`, Lentz continued fraction for the
/// upper tail otherwise.
pub fn regularized_gamma_p(a: f64, x: f64) -> Result<f64> {
    if a.is_nan() || a <= 0.0 {
        return Err(domain("incomplete gamma shape", a));
    }
    if x.is_nan() || x < 0.0 {
        return Err(domain("incomplete gamma argument", x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma_pos(a);
    if x < a + 1.0 {
        Ok(lower_series(a, x, log_prefactor))
    } else {
        Ok(1.0 - upper_continued_fraction(a, x, log_prefactor))
    }
}

fn lower_series(a: f64, x: f64, log_prefactor: f64) -> f64 {
    let mut denom = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * SERIES_EPS {
            break;
        }
    }
    (sum.ln() + log_prefactor).exp().min(1.0)
}

fn upper_continued_fraction(a: f64, x: f64, log_prefactor: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
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
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < SERIES_EPS {
            break;
        }
    }
    (log_prefactor + h.ln()).exp().clamp(0.0, 1.0)
}

/// `P(χ²_k ≤ x)`.
pub fn chisq_cdf(x: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(domain("chi-square degrees of freedom", 0.0));
    }
    if x.is_nan() || x < 0.0 {
        return Err(domain("chi-square argument", x));
    }
    regularized_gamma_p(f64::from(k) / 2.0, x / 2.0)
}

/// Inverse of [`chisq_cdf`] by bisection on `[0, k + 40√k + 100]`.
pub fn chisq_quantile(p: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(domain("chi-square degrees of freedom", 0.0));
    }
    if p.is_nan() || p <= 0.0 || p >= 1.0 {
        return Err(domain("chi-square probability", p));
    }
    let kf = f64::from(k);
    let mut lo = 0.0_f64;
    let mut hi = kf + 40.0 * kf.sqrt() + 100.0;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chisq_cdf(mid, k)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
