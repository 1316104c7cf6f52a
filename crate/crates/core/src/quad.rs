//! Quadrature rules shared across the crate: Gauss-Legendre for smooth and
//! oscillatory integrands, uniform trapezoid grids (the FFT-friendly rule),
//! doubling-panel tail integrals, and a log-domain trapezoid for integrands
//! whose values overflow `f64`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Node layout used when estimating coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadRule {
    /// Spectrally accurate on smooth integrands; used for validation and
    /// one-off kernel evaluations.
    GaussLegendre,
    /// Uniform grid on the frequency interval; the coefficient transform over
    /// the whole index range then collapses to a single FFT.
    UniformTrapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub rule: QuadRule,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: 4096,
            rule: QuadRule::UniformTrapezoid,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 64 {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least 64 nodes, got {}",
                self.nodes
            )));
        }
        if self.rule == QuadRule::UniformTrapezoid && !self.nodes.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "uniform rule needs a power-of-two node count, got {}",
                self.nodes
            )));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn gl_cache() -> &'static Mutex<HashMap<usize, Arc<GlRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Nodes/weights for the `n`-point rule, cached per order.
pub fn gauss_legendre(n: usize) -> Arc<GlRule> {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    if let Some(rule) = gl_cache().lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(compute_gl(n));
    gl_cache().lock().unwrap().insert(n, rule.clone());
    rule
}

fn compute_gl(n: usize) -> GlRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for k in 0..n.div_ceil(2) {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            let step = p / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        // Exact midpoint avoids a residual from the Newton stop criterion.
        let mid = n / 2;
        nodes[mid] = 0.0;
        let (_, d) = legendre_and_derivative(n, 0.0);
        weights[mid] = 2.0 / (d * d);
    }
    GlRule { nodes, weights }
}

/// Evaluates (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// ∫_a^b f(x) dx with the `n`-point Gauss-Legendre rule.
pub fn integrate_gl<F: Fn(f64) -> f64>(n: usize, a: f64, b: f64, f: F) -> f64 {
    let rule = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

pub fn integrate_gl_complex<F: Fn(f64) -> Complex64>(n: usize, a: f64, b: f64, f: F) -> Complex64 {
    let rule = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc += f(mid + half * x) * w;
    }
    acc * half
}

/// ∫_from^∞ f, summed over geometrically growing panels until the running
/// total stabilizes to `rel_tol`. Errors out when the panel contributions do
/// not decay.
pub fn tail_integral<F: Fn(f64) -> f64>(f: F, from: f64, rel_tol: f64) -> Result<f64> {
    let mut lo = from;
    let mut width = from.abs().max(1.0);
    let mut acc = 0.0;
    let mut prev = f64::INFINITY;
    let mut grew = 0;
    for _ in 0..200 {
        let panel = integrate_gl(64, lo, lo + width, &f);
        acc += panel;
        let small = panel.abs() <= rel_tol * acc.abs().max(f64::MIN_POSITIVE);
        if small && panel.abs() <= prev {
            return Ok(acc);
        }
        if panel.abs() > prev.max(1e-300) {
            grew += 1;
            if grew >= 4 {
                return Err(Error::DivergentTail);
            }
        } else {
            grew = 0;
        }
        prev = panel.abs();
        lo += width;
        width *= 2.0;
    }
    Err(Error::DivergentTail)
}

/// ln ∫_a^b exp(log_f(x)) dx by composite Simpson in the log domain.
/// Safe when exp(log_f) overflows f64 (log-sum-exp accumulation); fourth
/// order, which matters where the inequality being checked is nearly tight.
pub fn log_integral_uniform<F: Fn(f64) -> f64>(log_f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && b > a);
    let n = n + n % 2; // Simpson needs an even panel count
    let h = (b - a) / n as f64;
    let mut terms = Vec::with_capacity(n + 1);
    let mut max = f64::NEG_INFINITY;
    for k in 0..=n {
        let x = a + h * k as f64;
        let w: f64 = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let t = log_f(x) + w.ln();
        if t > max {
            max = t;
        }
        terms.push(t);
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln() + (h / 3.0).ln()
}
