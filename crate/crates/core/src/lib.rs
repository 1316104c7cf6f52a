//! Adaptive nonparametric regression when the design is observed through
//! additive noise with a known law: `y = f(x) + xi`, `z = x + sigma * eps`.
//!
//! The regression function is estimated as a trimmed ratio of two penalized
//! projection estimators on the band-limited sinc basis — one for the
//! numerator `ell = f * g` and one for the design density `g` — with the
//! projection dimension selected per target by penalized contrast
//! minimization, so no smoothness knowledge of `f` or `g` is required.
//! Deconvolution of the design noise happens in the Fourier domain, where
//! dividing by the noise characteristic function is exact on each model.
//!
//! Modules:
//! - [`noise`]: the known error laws and their envelope parameters
//! - [`basis`]: sinc basis, reconstruction, exact projection oracles
//! - [`deconv`]: deconvolution kernels and coefficient estimation
//! - [`penalty`]: penalty constants and admissible model collections
//! - [`select`]: adaptive selection and the full regression pipeline
//! - [`sim`]: synthetic scenarios with closed-form transforms
//! - [`risk`]: ISE/MISE benchmarking and rate-slope fits
//! - [`csvio`]: exact-round-trip CSV plumbing
//!
//! ```
//! use eivreg::noise::NoiseModel;
//! use eivreg::deconv::Dataset;
//! use eivreg::select::{fit_regression, EstimatorConfig, KnRule};
//! use eivreg::sim::{generate, FSpec, GSpec, NoiseSpec, Scenario, XiLaw};
//!
//! let scenario = Scenario {
//!     f: FSpec::Sine,
//!     g: GSpec::StdNormal,
//!     xi_sd: 0.3,
//!     xi_law: XiLaw::Normal,
//!     noise: NoiseSpec { kind: "laplace".into(), sigma: 0.5 },
//!     n: 500,
//!     smoothness: None,
//! };
//! let sim = generate(&scenario, 7).unwrap();
//! let data = Dataset::new(Some(sim.y.clone()), sim.z.clone()).unwrap();
//! let noise = NoiseModel::laplace(0.5).unwrap();
//! let cfg = EstimatorConfig {
//!     dim_step: 0.5,
//!     kn: KnRule::Capped(1024),
//!     ..EstimatorConfig::default()
//! };
//! let fit = fit_regression(&data, &noise, &cfg).unwrap();
//! assert_eq!(fit.grid.len(), fit.f_tilde.len());
//! ```

// `!(x > 0.0)` style guards are deliberate: they reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod csvio;
pub mod deconv;
pub mod error;
pub mod exec;
pub mod noise;
pub mod penalty;
pub mod quad;
pub mod risk;
pub mod select;
pub mod sim;

pub use error::{Error, Result};
