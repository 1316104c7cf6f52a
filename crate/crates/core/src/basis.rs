//! The sinc projection basis.
//!
//! `phi_{m,j}(x) = sqrt(D_m) sinc(D_m x - j)` with `sinc(t) = sin(pi t)/(pi t)`
//! is an orthonormal basis of the space of square-integrable functions whose
//! Fourier transform lives in `[-pi D_m, pi D_m]`. Model `m` has dimension
//! parameter `D_m = m * dim_step`; the spaces are nested in `m`.
//!
//! Fourier convention throughout the crate: `u*(x) = ∫ e^{ixt} u(t) dt`.

use crate::error::{Error, Result};
use crate::exec;
use crate::quad::{integrate_gl_complex, tail_integral};
use num_complex::Complex64;
use std::f64::consts::PI;

/// One projection space in the nested collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelIndex {
    pub m: usize,
    /// Dimension parameter `D_m = m * dim_step`.
    pub dim: f64,
}

impl ModelIndex {
    pub fn new(m: usize, dim_step: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("model index m must be >= 1".into()));
        }
        if !(dim_step > 0.0) || !dim_step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dim_step must be positive and finite, got {dim_step}"
            )));
        }
        Ok(Self {
            m,
            dim: m as f64 * dim_step,
        })
    }

    /// Upper edge of the Fourier support, `pi * D_m`.
    pub fn band_limit(&self) -> f64 {
        PI * self.dim
    }
}

/// sin(pi t)/(pi t) with a series branch near the removable singularity.
pub fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        let s = PI * t;
        let s2 = s * s;
        1.0 - s2 / 6.0 + s2 * s2 / 120.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Second derivative of [`sinc`].
pub fn sinc_second_derivative(t: f64) -> f64 {
    if t.abs() < 1e-3 {
        let p2 = PI * PI;
        let t2 = t * t;
        -p2 / 3.0 + p2 * p2 * t2 / 10.0 - p2 * p2 * p2 * t2 * t2 / 168.0
    } else {
        let s = (PI * t).sin();
        let c = (PI * t).cos();
        -PI * s / t - 2.0 * c / (t * t) + 2.0 * s / (PI * t * t * t)
    }
}

/// Basis element `phi_{m,j}(x)`.
pub fn phi(model: &ModelIndex, j: i64, x: f64) -> f64 {
    model.dim.sqrt() * sinc(model.dim * x - j as f64)
}

/// Fills `out[j + k_n] = phi_{m,j}(x)` for `|j| <= k_n`.
///
/// Shares one `sin` evaluation across the whole row via
/// `sin(pi(u - j)) = (-1)^j sin(pi u)`, which is what makes the direct
/// projection path and reconstruction affordable at large `k_n`.
pub fn phi_row(model: &ModelIndex, x: f64, k_n: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), 2 * k_n + 1);
    let u = model.dim * x;
    let root_d = model.dim.sqrt();
    let s = (PI * u).sin();
    let k = k_n as i64;
    // sign of (-1)^j at j = -k_n
    let mut sign = if k_n.is_multiple_of(2) { 1.0 } else { -1.0 };
    for (slot, j) in out.iter_mut().zip(-k..=k) {
        let t = u - j as f64;
        *slot = if t.abs() < 1e-4 {
            root_d * sinc(t)
        } else {
            root_d * sign * s / (PI * t)
        };
        sign = -sign;
    }
}

/// Coefficients of one model, indexed by `j` in `-k_n ..= k_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    pub model: ModelIndex,
    pub k_n: usize,
    coeffs: Vec<f64>,
}

impl CoeffVector {
    pub fn new(model: ModelIndex, k_n: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 2 * k_n + 1 {
            return Err(Error::InvalidParameter(format!(
                "coefficient vector needs 2*k_n+1 = {} entries, got {}",
                2 * k_n + 1,
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                what: "coefficients",
                index: bad,
            });
        }
        Ok(Self { model, k_n, coeffs })
    }

    pub fn zeros(model: ModelIndex, k_n: usize) -> Self {
        Self {
            model,
            k_n,
            coeffs: vec![0.0; 2 * k_n + 1],
        }
    }

    pub fn get(&self, j: i64) -> f64 {
        self.coeffs[(j + self.k_n as i64) as usize]
    }

    pub fn set(&mut self, j: i64, value: f64) {
        self.coeffs[(j + self.k_n as i64) as usize] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    /// Squared L2 norm of the represented function (orthonormal basis).
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn js(&self) -> impl Iterator<Item = i64> {
        -(self.k_n as i64)..=(self.k_n as i64)
    }
}

/// Evaluates `sum_j c_j phi_{m,j}(x)` on the grid.
pub fn reconstruct(c: &CoeffVector, grid: &[f64]) -> Vec<f64> {
    let k = c.k_n as i64;
    exec::map_indexed(grid.len(), |gi| {
        let x = grid[gi];
        let u = c.model.dim * x;
        let root_d = c.model.dim.sqrt();
        let s = (PI * u).sin();
        let mut sign = if c.k_n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut acc = 0.0;
        for (cj, j) in c.as_slice().iter().zip(-k..=k) {
            let t = u - j as f64;
            acc += if t.abs() < 1e-4 {
                cj * sinc(t)
            } else {
                cj * sign * s / (PI * t)
            };
            sign = -sign;
        }
        root_d * acc
    })
}

/// Exact projection coefficients of a function with known Fourier transform:
/// `a_{m,j} = (2 pi)^{-1} D^{-1/2} ∫_{-pi D}^{pi D} e^{-i j x / D} psi*(x) dx`.
///
/// This is the oracle route used to validate estimated coefficients; it works
/// in the Fourier domain because the spatial sinc tails decay too slowly for
/// direct quadrature.
pub fn project_oracle<F>(psi_star: F, model: &ModelIndex, k_n: usize) -> Result<CoeffVector>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let b = model.band_limit();
    let root_d = model.dim.sqrt();
    let vals = exec::map_indexed(2 * k_n + 1, |idx| {
        let j = idx as i64 - k_n as i64;
        // e^{-ijx/D} completes |j| cycles over the interval; scale the order
        // with j so the rule stays spectrally accurate. Quantized to multiples
        // of 64 to keep the node cache small.
        let order = (64 + 4 * j.unsigned_abs() as usize).next_multiple_of(64);
        let integral = integrate_gl_complex(order, -b, b, |x| {
            let phase = Complex64::from_polar(1.0, -(j as f64) * x / model.dim);
            phase * psi_star(x)
        });
        integral / (2.0 * PI * root_d)
    });
    let mut coeffs = Vec::with_capacity(vals.len());
    for v in &vals {
        if v.im.abs() > 1e-8 * v.re.abs().max(1.0) {
            return Err(Error::Quadrature {
                what: "project_oracle",
                residual: v.im.abs(),
            });
        }
        coeffs.push(v.re);
    }
    CoeffVector::new(*model, k_n, coeffs)
}

/// Squared distance between a function with transform `psi_star` and its
/// projection on model `m`: `(2 pi)^{-1} ∫_{|x| >= pi D} |psi*(x)|^2 dx`.
pub fn projection_bias<F>(psi_star: F, model: &ModelIndex) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    let b = model.band_limit();
    let upper = tail_integral(|x| psi_star(x).norm_sqr(), b, 1e-7)?;
    let lower = tail_integral(|x| psi_star(-x).norm_sqr(), b, 1e-7)?;
    Ok((upper + lower) / (2.0 * PI))
}
