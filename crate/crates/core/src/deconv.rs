//! Deconvolution kernels and empirical coefficient estimation.
//!
//! The estimated coefficient of basis element `phi_{m,j}` is
//!
//! ```text
//! a_hat[j] = n^{-1} sum_i w_i * K_j(z_i),
//! K_j(z)   = (sqrt(D)/2pi) ∫_{-pi}^{pi} e^{iv(j - D z)} / cf(sigma D v) dv,
//! ```
//!
//! with `w_i = 1` for the density target and `w_i = y_i` for the
//! regression-numerator target, and `cf` the characteristic function of the
//! unscaled error. Exchanging the sums factorizes this through the weighted
//! empirical characteristic function `S(v) = n^{-1} sum_i w_i e^{-i D z_i v}`,
//! so one pass over the data serves every `j`; on the uniform grid the
//! `j`-transform is a single FFT. When the noise level is zero the kernel is
//! `phi_{m,j}` itself and the direct projection path is used.

use crate::basis::{phi, phi_row, CoeffVector, ModelIndex};
use crate::error::{Error, Result};
use crate::exec;
use crate::noise::NoiseModel;
use crate::quad::{gauss_legendre, QuadRule, QuadratureSpec};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Observations `(y_i, z_i)`; `y` is absent for density-only use.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Option<Vec<f64>>,
    z: Vec<f64>,
}

impl Dataset {
    pub fn new(y: Option<Vec<f64>>, z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::EmptyInput("dataset needs at least one z".into()));
        }
        if let Some(bad) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "z",
                index: bad,
            });
        }
        if let Some(y) = &y {
            if y.len() != z.len() {
                return Err(Error::InvalidParameter(format!(
                    "y and z lengths differ: {} vs {}",
                    y.len(),
                    z.len()
                )));
            }
            if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "y",
                    index: bad,
                });
            }
        }
        Ok(Self { y, z })
    }

    pub fn density_only(z: Vec<f64>) -> Result<Self> {
        Self::new(None, z)
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }
}

/// Duplicate a dataset `times` over (used by selection-shift diagnostics).
pub fn repeat_dataset(data: &Dataset, times: usize) -> Result<Dataset> {
    let z = data.z.repeat(times);
    let y = data.y.as_ref().map(|y| y.repeat(times));
    Dataset::new(y, z)
}

const CF_UNDERFLOW: f64 = 1e-300;

/// Deconvolution kernel `K_j(z)` for one `(m, j, z)`.
///
/// Real by Hermitian symmetry; the imaginary residual of the quadrature is
/// checked against 1e-8 (relative) and discarded. For noiseless models this
/// is exactly `phi_{m,j}(z)`.
pub fn deconv_kernel(
    noise: &NoiseModel,
    model: &ModelIndex,
    j: i64,
    z: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if noise.is_noiseless() {
        return Ok(phi(model, j, z));
    }
    quad.validate()?;
    let d = model.dim;
    let c = j as f64 - d * z;
    let scale = d.sqrt() / (2.0 * PI);
    let integral = match quad.rule {
        QuadRule::GaussLegendre => {
            let rule = gauss_legendre(quad.nodes);
            let mut acc = Complex64::new(0.0, 0.0);
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let v = PI * x;
                let cf = noise.noise_char_fn(d * v);
                if cf.norm() < CF_UNDERFLOW {
                    return Err(Error::CharFnUnderflow { m: model.m });
                }
                acc += Complex64::from_polar(1.0, v * c) / cf * w;
            }
            acc * PI
        }
        QuadRule::UniformTrapezoid => {
            let q = quad.nodes;
            let h = 2.0 * PI / q as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=q {
                let v = -PI + h * k as f64;
                let cf = noise.noise_char_fn(d * v);
                if cf.norm() < CF_UNDERFLOW {
                    return Err(Error::CharFnUnderflow { m: model.m });
                }
                let w = if k == 0 || k == q { 0.5 } else { 1.0 };
                acc += Complex64::from_polar(1.0, v * c) / cf * w;
            }
            acc * h
        }
    };
    let value = integral * scale;
    if value.im.abs() > 1e-8 * value.re.abs().max(1.0) {
        return Err(Error::Quadrature {
            what: "deconv_kernel",
            residual: value.im.abs(),
        });
    }
    Ok(value.re)
}

/// Weighted empirical characteristic sums
/// `S(v_k) = n^{-1} sum_i e^{-i D z_i v_k}` (plain) and the `y`-weighted
/// variant, on the uniform closed grid `v_k = -pi + k 2pi/q`, `k = 0..=q`.
///
/// This is the hot loop of the whole crate. Nodes are processed in fixed
/// blocks with a rotating phasor per observation inside each block, so the
/// result is identical whether blocks run in parallel or not.
pub fn ecf_uniform(
    z: &[f64],
    y: Option<&[f64]>,
    dm: f64,
    q: usize,
) -> (Vec<Complex64>, Option<Vec<Complex64>>) {
    ecf_uniform_impl(z, y, dm, q, false)
}

/// Sequential twin of [`ecf_uniform`] for the fallback path and benchmarks.
pub fn ecf_uniform_seq(
    z: &[f64],
    y: Option<&[f64]>,
    dm: f64,
    q: usize,
) -> (Vec<Complex64>, Option<Vec<Complex64>>) {
    ecf_uniform_impl(z, y, dm, q, true)
}

const ECF_BLOCK: usize = 512;

fn ecf_uniform_impl(
    z: &[f64],
    y: Option<&[f64]>,
    dm: f64,
    q: usize,
    sequential: bool,
) -> (Vec<Complex64>, Option<Vec<Complex64>>) {
    let n = z.len();
    let h = 2.0 * PI / q as f64;
    let total = q + 1;
    let n_blocks = total.div_ceil(ECF_BLOCK);
    let inv_n = 1.0 / n as f64;

    let worker = |b: usize| {
        let k0 = b * ECF_BLOCK;
        let len = ECF_BLOCK.min(total - k0);
        let mut plain = vec![Complex64::new(0.0, 0.0); len];
        let mut weighted = y.map(|_| vec![Complex64::new(0.0, 0.0); len]);
        let v0 = -PI + h * k0 as f64;
        for (i, &zi) in z.iter().enumerate() {
            let theta0 = -dm * zi * v0;
            let step = Complex64::from_polar(1.0, -dm * zi * h);
            let mut p = Complex64::from_polar(1.0, theta0);
            match (&mut weighted, y) {
                (Some(wacc), Some(yv)) => {
                    let yi = yv[i];
                    for k in 0..len {
                        plain[k] += p;
                        wacc[k] += p * yi;
                        p *= step;
                    }
                }
                _ => {
                    for slot in plain.iter_mut() {
                        *slot += p;
                        p *= step;
                    }
                }
            }
        }
        for v in plain.iter_mut() {
            *v *= inv_n;
        }
        if let Some(w) = &mut weighted {
            for v in w.iter_mut() {
                *v *= inv_n;
            }
        }
        (plain, weighted)
    };

    let blocks = if sequential {
        exec::map_indexed_seq(n_blocks, worker)
    } else {
        exec::map_indexed(n_blocks, worker)
    };

    let mut plain = Vec::with_capacity(total);
    let mut weighted = y.map(|_| Vec::with_capacity(total));
    for (p, w) in blocks {
        plain.extend(p);
        if let (Some(acc), Some(w)) = (&mut weighted, w) {
            acc.extend(w);
        }
    }
    (plain, weighted)
}

/// ECF at arbitrary nodes (used by the Gauss-Legendre validation path).
fn ecf_general(
    z: &[f64],
    y: Option<&[f64]>,
    dm: f64,
    nodes: &[f64],
) -> (Vec<Complex64>, Option<Vec<Complex64>>) {
    let n = z.len();
    let inv_n = 1.0 / n as f64;
    let vals = exec::map_indexed(nodes.len(), |k| {
        let v = nodes[k];
        let mut plain = Complex64::new(0.0, 0.0);
        let mut weighted = Complex64::new(0.0, 0.0);
        match y {
            Some(yv) => {
                for (&zi, &yi) in z.iter().zip(yv) {
                    let p = Complex64::from_polar(1.0, -dm * zi * v);
                    plain += p;
                    weighted += p * yi;
                }
            }
            None => {
                for &zi in z {
                    plain += Complex64::from_polar(1.0, -dm * zi * v);
                }
            }
        }
        (plain * inv_n, weighted * inv_n)
    });
    let plain = vals.iter().map(|v| v.0).collect();
    let weighted = y.map(|_| vals.iter().map(|v| v.1).collect());
    (plain, weighted)
}

type FftCache = Mutex<HashMap<usize, Arc<dyn Fft<f64>>>>;

fn fft_cache() -> &'static FftCache {
    static CACHE: OnceLock<FftCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn inverse_fft(len: usize) -> Arc<dyn Fft<f64>> {
    let mut cache = fft_cache().lock().unwrap();
    cache
        .entry(len)
        .or_insert_with(|| FftPlanner::new().plan_fft_inverse(len))
        .clone()
}

/// Grid size actually used by the uniform rule: at least the requested node
/// count, and large enough that every coefficient index `|j| <= k_n` is
/// alias-free in the FFT readout.
pub fn effective_uniform_nodes(requested: usize, k_n: usize) -> usize {
    let need = 2 * (k_n + 1);
    requested.max(need.next_power_of_two())
}

struct CoeffPair {
    g: Option<CoeffVector>,
    ell: Option<CoeffVector>,
}

fn coeffs_impl(
    data: &Dataset,
    noise: &NoiseModel,
    model: &ModelIndex,
    k_n: usize,
    quad: &QuadratureSpec,
    want_g: bool,
    want_ell: bool,
) -> Result<CoeffPair> {
    debug_assert!(want_g || want_ell);
    if want_ell && data.y().is_none() {
        return Err(Error::MissingResponses);
    }
    let n = data.n();
    let d = model.dim;

    if noise.is_noiseless() {
        // Direct projection: a_hat[j] = n^{-1} sum_i w_i phi_{m,j}(z_i).
        let len = 2 * k_n + 1;
        let chunk = 1024;
        let n_chunks = n.div_ceil(chunk);
        let partials = exec::map_indexed(n_chunks, |ci| {
            let lo = ci * chunk;
            let hi = (lo + chunk).min(n);
            let mut row = vec![0.0; len];
            let mut acc_g = vec![0.0; len];
            let mut acc_ell = vec![0.0; if want_ell { len } else { 0 }];
            for i in lo..hi {
                phi_row(model, data.z()[i], k_n, &mut row);
                if want_g {
                    for (a, r) in acc_g.iter_mut().zip(&row) {
                        *a += r;
                    }
                }
                if want_ell {
                    let yi = data.y().unwrap()[i];
                    for (a, r) in acc_ell.iter_mut().zip(&row) {
                        *a += yi * r;
                    }
                }
            }
            (acc_g, acc_ell)
        });
        let inv_n = 1.0 / n as f64;
        let mut g = vec![0.0; if want_g { len } else { 0 }];
        let mut ell = vec![0.0; if want_ell { len } else { 0 }];
        for (pg, pe) in partials {
            for (a, p) in g.iter_mut().zip(&pg) {
                *a += p * inv_n;
            }
            for (a, p) in ell.iter_mut().zip(&pe) {
                *a += p * inv_n;
            }
        }
        return Ok(CoeffPair {
            g: want_g.then(|| CoeffVector::new(*model, k_n, g)).transpose()?,
            ell: want_ell
                .then(|| CoeffVector::new(*model, k_n, ell))
                .transpose()?,
        });
    }

    quad.validate()?;
    match quad.rule {
        QuadRule::UniformTrapezoid => {
            let q = effective_uniform_nodes(quad.nodes, k_n);
            let h = 2.0 * PI / q as f64;
            // reciprocal characteristic function on the grid, shared by both targets
            let mut recip = Vec::with_capacity(q + 1);
            for k in 0..=q {
                let v = -PI + h * k as f64;
                let cf = noise.noise_char_fn(d * v);
                if cf.norm() < CF_UNDERFLOW {
                    return Err(Error::CharFnUnderflow { m: model.m });
                }
                recip.push(cf.finv());
            }
            let (s_plain, s_weighted) = ecf_uniform(
                data.z(),
                if want_ell { data.y() } else { None },
                d,
                q,
            );
            let fft = inverse_fft(q);
            let transform = |s: &[Complex64]| -> Result<Vec<f64>> {
                let mut buf: Vec<Complex64> =
                    (0..q).map(|k| s[k] * recip[k]).collect();
                // closed trapezoid: merge the duplicated endpoint v = +-pi
                buf[0] = (s[0] * recip[0] + s[q] * recip[q]) * 0.5;
                fft.process(&mut buf);
                let root_d_over_q = d.sqrt() / q as f64;
                let mut out = Vec::with_capacity(2 * k_n + 1);
                let mut worst_im = 0.0f64;
                for j in -(k_n as i64)..=(k_n as i64) {
                    let idx = j.rem_euclid(q as i64) as usize;
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let val = buf[idx] * (sign * root_d_over_q);
                    worst_im = worst_im.max(val.im.abs() / val.re.abs().max(1.0));
                    out.push(val.re);
                }
                if worst_im > 1e-8 {
                    return Err(Error::Quadrature {
                        what: "coefficient transform",
                        residual: worst_im,
                    });
                }
                Ok(out)
            };
            let g = if want_g {
                Some(CoeffVector::new(*model, k_n, transform(&s_plain)?)?)
            } else {
                None
            };
            let ell = if want_ell {
                Some(CoeffVector::new(
                    *model,
                    k_n,
                    transform(s_weighted.as_ref().unwrap())?,
                )?)
            } else {
                None
            };
            Ok(CoeffPair { g, ell })
        }
        QuadRule::GaussLegendre => {
            let rule = gauss_legendre(quad.nodes);
            let nodes: Vec<f64> = rule.nodes.iter().map(|&x| PI * x).collect();
            let mut recip = Vec::with_capacity(nodes.len());
            for &v in &nodes {
                let cf = noise.noise_char_fn(d * v);
                if cf.norm() < CF_UNDERFLOW {
                    return Err(Error::CharFnUnderflow { m: model.m });
                }
                recip.push(cf.finv());
            }
            let (s_plain, s_weighted) = ecf_general(
                data.z(),
                if want_ell { data.y() } else { None },
                d,
                &nodes,
            );
            let scale = d.sqrt() / 2.0; // (sqrt(D)/2pi) * pi from the [-1,1] map
            let transform = |s: &[Complex64]| -> Result<Vec<f64>> {
                let h: Vec<Complex64> = s
                    .iter()
                    .zip(&recip)
                    .zip(&rule.weights)
                    .map(|((sv, rv), &w)| sv * rv * w)
                    .collect();
                let vals = exec::map_indexed(2 * k_n + 1, |idx| {
                    let j = idx as i64 - k_n as i64;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (hk, &v) in h.iter().zip(&nodes) {
                        acc += hk * Complex64::from_polar(1.0, j as f64 * v);
                    }
                    acc * scale
                });
                let mut out = Vec::with_capacity(vals.len());
                for v in &vals {
                    if v.im.abs() > 1e-8 * v.re.abs().max(1.0) {
                        return Err(Error::Quadrature {
                            what: "coefficient transform",
                            residual: v.im.abs(),
                        });
                    }
                    out.push(v.re);
                }
                Ok(out)
            };
            let g = if want_g {
                Some(CoeffVector::new(*model, k_n, transform(&s_plain)?)?)
            } else {
                None
            };
            let ell = if want_ell {
                Some(CoeffVector::new(
                    *model,
                    k_n,
                    transform(s_weighted.as_ref().unwrap())?,
                )?)
            } else {
                None
            };
            Ok(CoeffPair { g, ell })
        }
    }
}

/// Pair estimation with per-side opt-in; used by the selection pipeline so
/// one data pass serves whichever targets need this model.
pub(crate) fn coeffs_pair_for(
    data: &Dataset,
    noise: &NoiseModel,
    model: &ModelIndex,
    k_n: usize,
    quad: &QuadratureSpec,
    want_g: bool,
    want_ell: bool,
) -> Result<(Option<CoeffVector>, Option<CoeffVector>)> {
    let pair = coeffs_impl(data, noise, model, k_n, quad, want_g, want_ell)?;
    Ok((pair.g, pair.ell))
}

/// Estimated density coefficients `a_hat[j] = n^{-1} sum_i K_j(z_i)`.
pub fn estimate_coeffs_g(
    data: &Dataset,
    noise: &NoiseModel,
    model: &ModelIndex,
    k_n: usize,
    quad: &QuadratureSpec,
) -> Result<CoeffVector> {
    Ok(coeffs_impl(data, noise, model, k_n, quad, true, false)?
        .g
        .unwrap())
}

/// Estimated numerator coefficients `a_hat[j] = n^{-1} sum_i y_i K_j(z_i)`.
pub fn estimate_coeffs_ell(
    data: &Dataset,
    noise: &NoiseModel,
    model: &ModelIndex,
    k_n: usize,
    quad: &QuadratureSpec,
) -> Result<CoeffVector> {
    Ok(coeffs_impl(data, noise, model, k_n, quad, false, true)?
        .ell
        .unwrap())
}

/// Both coefficient vectors from a single pass over the data.
pub fn estimate_coeffs_pair(
    data: &Dataset,
    noise: &NoiseModel,
    model: &ModelIndex,
    k_n: usize,
    quad: &QuadratureSpec,
) -> Result<(CoeffVector, CoeffVector)> {
    let pair = coeffs_impl(data, noise, model, k_n, quad, true, true)?;
    Ok((pair.g.unwrap(), pair.ell.unwrap()))
}

/// Minimized contrast of the fitted coefficients: `-sum_j a_hat[j]^2`.
///
/// Equals `||est||^2 - 2 n^{-1} sum_i w_i K_est(z_i)` by orthonormality and
/// the linearity of the kernel in its index function; always `<= 0`.
pub fn contrast_value(c: &CoeffVector) -> f64 {
    -c.norm_sq()
}
