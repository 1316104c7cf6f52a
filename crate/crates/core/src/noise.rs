//! The known error law of the contaminated design.
//!
//! A [`NoiseModel`] bundles the error kind, the noise level `sigma`, and the
//! decay parameters `(alpha, beta, rho, kappa0, kappa0')` of its
//! characteristic function envelope
//!
//! ```text
//! kappa0 (x^2+1)^{-alpha/2} e^{-beta|x|^rho}  <=  |cf(x)|  <=  kappa0' (...)
//! ```
//!
//! which drive every penalty constant downstream. `rho = 0` is the
//! polynomial-decay ("ordinary smooth") regime, `rho > 0` the
//! exponential-decay ("super smooth") one. Built-in kinds: point mass
//! (`None`), standard Gaussian, standard Laplace (density `e^{-|x|}/2`,
//! cf `1/(1+x^2)`), and standard Cauchy (cf `e^{-|x|}`); `sigma` is the only
//! scale knob. Conventions: `beta = 0` iff `rho = 0`, and `sigma = 0` zeroes
//! `alpha`, `beta`, `rho`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt;
use std::sync::Arc;

/// User-supplied error law: a characteristic function plus its declared
/// envelope parameters. The library trusts the declaration; debug builds
/// grid-check it at construction.
pub struct CustomNoise {
    pub label: String,
    pub char_fn: Box<dyn Fn(f64) -> Complex64 + Send + Sync>,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub kappa0: f64,
    pub kappa0_prime: f64,
    /// L2 norm of the error density, needed by the penalty constants when
    /// 1/3 <= rho <= 1.
    pub l2_density_norm: Option<f64>,
}

impl fmt::Debug for CustomNoise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomNoise")
            .field("label", &self.label)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("rho", &self.rho)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum NoiseKind {
    /// No measurement error: the design is observed directly.
    None,
    Gaussian,
    Laplace,
    Cauchy,
    Custom(Arc<CustomNoise>),
}

impl NoiseKind {
    pub fn name(&self) -> &str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Laplace => "laplace",
            NoiseKind::Cauchy => "cauchy",
            NoiseKind::Custom(c) => &c.label,
        }
    }
}

/// Envelope parameters of a built-in kind at noise level `sigma`.
///
/// Returns `(alpha, beta, rho, kappa0, kappa0_prime)`. Gaussian is super
/// smooth of order `(alpha=0, rho=2)` with `beta = 1/2`, Cauchy of order
/// `(alpha=0, rho=1)` with `beta = 1`, Laplace ordinary smooth of order
/// `alpha = 2`; all three attain the envelope with `kappa0 = kappa0' = 1`.
/// At `sigma = 0` every kind degenerates to `(0, 0, 0, 1, 1)`.
pub fn smoothness_params(kind: &NoiseKind, sigma: f64) -> Result<(f64, f64, f64, f64, f64)> {
    if sigma == 0.0 {
        return Ok((0.0, 0.0, 0.0, 1.0, 1.0));
    }
    match kind {
        NoiseKind::None => Ok((0.0, 0.0, 0.0, 1.0, 1.0)),
        NoiseKind::Gaussian => Ok((0.0, 0.5, 2.0, 1.0, 1.0)),
        NoiseKind::Laplace => Ok((2.0, 0.0, 0.0, 1.0, 1.0)),
        NoiseKind::Cauchy => Ok((0.0, 1.0, 1.0, 1.0, 1.0)),
        NoiseKind::Custom(c) => Ok((c.alpha, c.beta, c.rho, c.kappa0, c.kappa0_prime)),
    }
}

#[derive(Debug, Clone)]
pub struct NoiseModel {
    kind: NoiseKind,
    sigma: f64,
    alpha: f64,
    beta: f64,
    rho: f64,
    kappa0: f64,
    kappa0_prime: f64,
}

impl NoiseModel {
    fn build(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        let (alpha, beta, rho, kappa0, kappa0_prime) = smoothness_params(&kind, sigma)?;
        if kappa0 <= 0.0 || kappa0_prime < kappa0 {
            return Err(Error::InvalidParameter(format!(
                "need 0 < kappa0 <= kappa0', got {kappa0} and {kappa0_prime}"
            )));
        }
        if (rho == 0.0) != (beta == 0.0) {
            return Err(Error::InvalidParameter(
                "beta must be zero exactly when rho is zero".into(),
            ));
        }
        if rho == 0.0 && sigma > 0.0 && alpha <= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "polynomial decay requires alpha > 1/2, got {alpha}"
            )));
        }
        Ok(Self {
            kind,
            sigma,
            alpha,
            beta,
            rho,
            kappa0,
            kappa0_prime,
        })
    }

    /// Point mass at zero: the design is observed without error.
    pub fn none() -> Self {
        Self::build(NoiseKind::None, 0.0).expect("point mass is always valid")
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::build(NoiseKind::Gaussian, sigma)
    }

    pub fn laplace(sigma: f64) -> Result<Self> {
        Self::build(NoiseKind::Laplace, sigma)
    }

    pub fn cauchy(sigma: f64) -> Result<Self> {
        Self::build(NoiseKind::Cauchy, sigma)
    }

    /// Wraps a user-supplied characteristic function with declared envelope
    /// parameters. Debug builds verify the envelope on a coarse grid.
    pub fn custom(sigma: f64, spec: CustomNoise) -> Result<Self> {
        let model = Self::build(NoiseKind::Custom(Arc::new(spec)), sigma)?;
        #[cfg(debug_assertions)]
        {
            let grid: Vec<f64> = (0..=60).map(|i| 10f64.powf(-1.0 + i as f64 * 0.08)).collect();
            if !model.envelope_holds_on(&grid) {
                return Err(Error::InvalidParameter(format!(
                    "declared envelope does not hold for custom noise '{}'",
                    model.kind.name()
                )));
            }
        }
        Ok(model)
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn kappa0_prime(&self) -> f64 {
        self.kappa0_prime
    }

    /// True when the design is effectively observed without error, in which
    /// case every deconvolution operation reduces to a direct projection.
    pub fn is_noiseless(&self) -> bool {
        self.sigma == 0.0 || matches!(self.kind, NoiseKind::None)
    }

    /// Characteristic function of the unscaled error. Hermitian, and nonzero
    /// everywhere for the built-in kinds.
    pub fn char_fn(&self, x: f64) -> Complex64 {
        match &self.kind {
            NoiseKind::None => Complex64::new(1.0, 0.0),
            NoiseKind::Gaussian => Complex64::new((-0.5 * x * x).exp(), 0.0),
            NoiseKind::Laplace => Complex64::new(1.0 / (1.0 + x * x), 0.0),
            NoiseKind::Cauchy => Complex64::new((-x.abs()).exp(), 0.0),
            NoiseKind::Custom(c) => (c.char_fn)(x),
        }
    }

    /// Characteristic function of the scaled noise, `char_fn(sigma * x)`;
    /// identically 1 when `sigma = 0`.
    pub fn noise_char_fn(&self, x: f64) -> Complex64 {
        if self.sigma == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            self.char_fn(self.sigma * x)
        }
    }

    /// ln |noise_char_fn(x)|, in closed form for the built-ins so it stays
    /// finite where the linear-domain value underflows.
    pub fn log_abs_noise_char_fn(&self, x: f64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let u = self.sigma * x;
        match &self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Gaussian => -0.5 * u * u,
            NoiseKind::Laplace => -(1.0 + u * u).ln(),
            NoiseKind::Cauchy => -u.abs(),
            NoiseKind::Custom(c) => (c.char_fn)(u).norm().ln(),
        }
    }

    /// `n` draws of the scaled noise `sigma * eps`; identical seeds give
    /// identical vectors.
    pub fn sample_noise(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::EmptyInput("sample_noise needs n >= 1".into()));
        }
        if self.is_noiseless() {
            return Ok(vec![0.0; n]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = self.sigma;
        match &self.kind {
            NoiseKind::Gaussian => {
                let dist = Normal::new(0.0, 1.0).expect("unit normal");
                Ok((0..n).map(|_| s * dist.sample(&mut rng)).collect())
            }
            NoiseKind::Laplace => Ok((0..n).map(|_| s * sample_std_laplace(&mut rng)).collect()),
            NoiseKind::Cauchy => {
                let dist = rand_distr::Cauchy::new(0.0, 1.0).expect("unit cauchy");
                Ok((0..n).map(|_| s * dist.sample(&mut rng)).collect())
            }
            NoiseKind::Custom(c) => Err(Error::UnsupportedNoise(format!(
                "no sampler registered for custom noise '{}'",
                c.label
            ))),
            NoiseKind::None => unreachable!("handled by is_noiseless"),
        }
    }

    /// L2 norm of the unscaled error density, by closed form for the
    /// built-ins. The point mass has no density.
    pub fn l2_norm_density(&self) -> Result<f64> {
        match &self.kind {
            NoiseKind::None => Err(Error::NoDensity),
            // integral of (e^{-|x|}/2)^2 is 1/4
            NoiseKind::Laplace => Ok(0.5),
            // integral of phi^2 is 1/(2 sqrt(pi))
            NoiseKind::Gaussian => Ok((2.0 * std::f64::consts::PI.sqrt()).powf(-0.5)),
            // integral of (pi (1+x^2))^{-2} is 1/(2 pi)
            NoiseKind::Cauchy => Ok((2.0 * std::f64::consts::PI).powf(-0.5)),
            NoiseKind::Custom(c) => c.l2_density_norm.ok_or_else(|| {
                Error::UnsupportedNoise(format!(
                    "custom noise '{}' declared no density norm",
                    c.label
                ))
            }),
        }
    }

    /// Checks the declared envelope of `char_fn` on the given grid.
    pub fn envelope_holds_on(&self, xs: &[f64]) -> bool {
        // Small multiplicative slack for floating-point boundary cases: the
        // built-ins attain the envelope with equality.
        const SLACK: f64 = 1.0 + 1e-12;
        xs.iter().all(|&x| {
            let cf = self.char_fn(x).norm();
            let shape = (x * x + 1.0).powf(-self.alpha / 2.0)
                * (-self.beta * x.abs().powf(self.rho)).exp();
            self.kappa0 * shape <= cf * SLACK && cf <= self.kappa0_prime * shape * SLACK
        })
    }
}

/// Standard Laplace draw by inverse CDF.
fn sample_std_laplace<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen::<f64>() - 0.5;
    // 1 - 2|u| lands in (0, 1]; the max() guards the closed endpoint.
    -u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}
