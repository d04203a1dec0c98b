use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureScheme {
    /// Composite Simpson on a closed grid; endpoints are evaluated.
    Simpson,
    /// Gauss–Legendre; open grid.
    GaussLegendre,
    /// Double-exponential (tanh-sinh) rule on the unit interval; open grid
    /// that tolerates integrable endpoint singularities.
    TanhSinh,
}

/// Grid size and rule for one integration axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    points: usize,
    scheme: QuadratureScheme,
}

impl QuadratureSpec {
    pub fn new(points: usize, scheme: QuadratureScheme) -> Result<Self> {
        if points < 17 {
            return Err(Error::InvalidConfig(format!("need at least 17 grid points, got {points}")));
        }
        if scheme == QuadratureScheme::Simpson && points % 2 == 0 {
            return Err(Error::InvalidConfig(format!("Simpson needs an odd grid, got {points}")));
        }
        Ok(Self { points, scheme })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn scheme(&self) -> QuadratureScheme {
        self.scheme
    }

    /// Same rule with about twice as many points (kept odd for Simpson).
    pub fn refined(&self) -> Self {
        let points = match self.scheme {
            QuadratureScheme::Simpson => 2 * self.points - 1,
            _ => 2 * self.points,
        };
        Self { points, scheme: self.scheme }
    }
}

/// A node on `(0, 1)` with its complement stored separately so that points
/// close to 1 keep full precision in `1 − x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct UnitNode {
    pub x: f64,
    pub xc: f64,
    pub w: f64,
}

/// Nodes and weights on `[a, b]`.
pub(crate) fn interval_rule(spec: &QuadratureSpec, a: f64, b: f64) -> Vec<(f64, f64)> {
    unit_rule(spec)
        .into_iter()
        .map(|n| (a * n.xc + b * n.x, (b - a) * n.w))
        .collect()
}

pub(crate) fn unit_rule(spec: &QuadratureSpec) -> Vec<UnitNode> {
    match spec.scheme {
        QuadratureScheme::Simpson => simpson_unit(spec.points),
        QuadratureScheme::GaussLegendre => gauss_legendre_unit(spec.points),
        QuadratureScheme::TanhSinh => tanh_sinh_unit(spec.points),
    }
}

fn simpson_unit(points: usize) -> Vec<UnitNode> {
    let intervals = points - 1;
    let h = 1.0 / intervals as f64;
    (0..points)
        .map(|i| {
            let coef = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let x = i as f64 * h;
            let xc = (intervals - i) as f64 * h;
            UnitNode { x, xc, w: coef * h / 3.0 }
        })
        .collect()
}

/// Legendre roots by Newton iteration from the Tricomi initial guess.
fn gauss_legendre_unit(points: usize) -> Vec<UnitNode> {
    let n = points;
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] → [0, 1]; z runs from +1 down to −1
        nodes.push(UnitNode { x: 0.5 * (1.0 + z), xc: 0.5 * (1.0 - z), w: 0.5 * w });
    }
    nodes.reverse();
    nodes
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

const TANH_SINH_RANGE: f64 = 5.0;

/// `x = 1/(1 + e^{−2z})`, `z = (π/2) sinh t`, `t ∈ [−5, 5]` on an even grid.
fn tanh_sinh_unit(points: usize) -> Vec<UnitNode> {
    let h = 2.0 * TANH_SINH_RANGE / (points - 1) as f64;
    (0..points)
        .filter_map(|i| {
            let t = -TANH_SINH_RANGE + i as f64 * h;
            let z = FRAC_PI_2 * t.sinh();
            let x = 1.0 / (1.0 + (-2.0 * z).exp());
            let xc = 1.0 / (1.0 + (2.0 * z).exp());
            let w = h * PI * t.cosh() * x * xc;
            (x > 0.0 && xc > 0.0 && w > 0.0).then_some(UnitNode { x, xc, w })
        })
        .collect()
}

/// `ln Σ exp(v_i)` over a slice, `-∞` when empty.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(spec: &QuadratureSpec, f: impl Fn(f64, f64) -> f64) -> f64 {
        unit_rule(spec).iter().map(|n| n.w * f(n.x, n.xc)).sum()
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(15, QuadratureScheme::GaussLegendre).is_err());
        assert!(QuadratureSpec::new(18, QuadratureScheme::Simpson).is_err());
        let s = QuadratureSpec::new(17, QuadratureScheme::Simpson).unwrap();
        assert_eq!(s.refined().points(), 33);
    }

    #[test]
    fn weights_sum_to_one() {
        for scheme in [QuadratureScheme::Simpson, QuadratureScheme::GaussLegendre, QuadratureScheme::TanhSinh] {
            let spec = QuadratureSpec::new(101, scheme).unwrap();
            let rule = unit_rule(&spec);
            let total: f64 = rule.iter().map(|n| n.w).sum();
            if scheme != QuadratureScheme::Simpson {
                assert!(rule.iter().all(|n| n.x > 0.0 && n.xc > 0.0), "{scheme:?}");
            }
            assert!((total - 1.0).abs() < 1e-12, "{scheme:?}: {total}");
        }
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let spec = QuadratureSpec::new(20, QuadratureScheme::GaussLegendre).unwrap();
        // ∫₀¹ x^39 dx = 1/40
        let v = integrate(&spec, |x, _| x.powi(39));
        assert!((v - 1.0 / 40.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let spec = QuadratureSpec::new(17, QuadratureScheme::Simpson).unwrap();
        let v = integrate(&spec, |x, _| 4.0 * x.powi(3) - x + 2.0);
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        let spec = QuadratureSpec::new(201, QuadratureScheme::TanhSinh).unwrap();
        // ∫₀¹ x^{-0.8} (1-x)^{-0.5} dx = B(0.2, 0.5)
        let v = integrate(&spec, |x, xc| x.powf(-0.8) * xc.powf(-0.5));
        let want = 6.268_653_124_086_036; // B(0.2, 0.5)
        assert!(((v - want) / want).abs() < 1e-10, "{v}");
    }

    #[test]
    fn interval_rule_maps_endpoints() {
        let spec = QuadratureSpec::new(31, QuadratureScheme::GaussLegendre).unwrap();
        let v: f64 = interval_rule(&spec, -2.0, 3.0).iter().map(|(x, w)| w * x * x).sum();
        assert!((v - 35.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
