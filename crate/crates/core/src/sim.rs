//! Synthetic ground truth for the benchmark harness: scenario definitions,
//! data generation, exact curves and their Fourier transforms, and the
//! predicted convergence-rate shape for each scenario.
//!
//! Every built-in regression/design pair has a closed-form transform of
//! `ell = f * g`, so coefficient-level checks can run against exact values
//! rather than simulation alone.

use crate::deconv::Dataset;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Regression function catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FSpec {
    Constant { c: f64 },
    Linear,
    /// sin(pi x)
    Sine,
    /// exp(-x^2)
    Bump,
}

impl FSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FSpec::Constant { c } => c,
            FSpec::Linear => x,
            FSpec::Sine => (PI * x).sin(),
            FSpec::Bump => (-x * x).exp(),
        }
    }
}

/// Mixture components used by [`GSpec::NormalMixture`]: equal-weight normals
/// at +-MIX_MEAN with standard deviation MIX_SD.
pub const MIX_MEAN: f64 = 1.5;
pub const MIX_SD: f64 = 0.75;

/// Design density catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GSpec {
    StdNormal,
    NormalMixture,
    /// density e^{-|x|}/2
    Laplace,
}

impl GSpec {
    pub fn density(&self, x: f64) -> f64 {
        match self {
            GSpec::StdNormal => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            GSpec::NormalMixture => {
                let comp = |mu: f64| {
                    let t = (x - mu) / MIX_SD;
                    (-0.5 * t * t).exp() / (MIX_SD * (2.0 * PI).sqrt())
                };
                0.5 * comp(-MIX_MEAN) + 0.5 * comp(MIX_MEAN)
            }
            GSpec::Laplace => 0.5 * (-x.abs()).exp(),
        }
    }

    /// Fourier transform of the density (convention `g*(t) = ∫ e^{itx} g(x) dx`).
    pub fn transform(&self, t: f64) -> Complex64 {
        match self {
            GSpec::StdNormal => Complex64::new((-0.5 * t * t).exp(), 0.0),
            GSpec::NormalMixture => Complex64::new(
                (MIX_MEAN * t).cos() * (-0.5 * MIX_SD * MIX_SD * t * t).exp(),
                0.0,
            ),
            GSpec::Laplace => Complex64::new(1.0 / (1.0 + t * t), 0.0),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            GSpec::StdNormal => Normal::new(0.0, 1.0).unwrap().sample(rng),
            GSpec::NormalMixture => {
                let mu = if rng.gen::<bool>() { MIX_MEAN } else { -MIX_MEAN };
                Normal::new(mu, MIX_SD).unwrap().sample(rng)
            }
            GSpec::Laplace => {
                let u: f64 = rng.gen::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
            }
        }
    }
}

/// Law of the regression error xi (always centered, scaled by `xi_sd`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiLaw {
    #[default]
    Normal,
    /// Student t with df >= 9, probing the eighth-moment requirement.
    StudentT { df: f64 },
}

/// Noise entry of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: String,
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn build(&self) -> Result<NoiseModel> {
        match self.kind.as_str() {
            "none" => {
                if self.sigma != 0.0 {
                    return Err(Error::InvalidParameter(
                        "noise kind \"none\" requires sigma = 0".into(),
                    ));
                }
                Ok(NoiseModel::none())
            }
            "gaussian" => NoiseModel::gaussian(self.sigma),
            "laplace" => NoiseModel::laplace(self.sigma),
            "cauchy" => NoiseModel::cauchy(self.sigma),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise kind {other:?} (expected gaussian|laplace|cauchy|none)"
            ))),
        }
    }
}

/// Decay metadata `(a, r, B)` of the targets' Fourier transforms, per target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    pub a_ell: f64,
    pub r_ell: f64,
    #[serde(rename = "B_ell")]
    pub b_ell: f64,
    pub a_g: f64,
    pub r_g: f64,
    #[serde(rename = "B_g")]
    pub b_g: f64,
}

/// A fully specified synthetic ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub f: FSpec,
    pub g: GSpec,
    pub xi_sd: f64,
    #[serde(default)]
    pub xi_law: XiLaw,
    pub noise: NoiseSpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<Smoothness>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("scenario needs n >= 1".into()));
        }
        if !(self.xi_sd >= 0.0) || !self.xi_sd.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "xi_sd must be finite and >= 0, got {}",
                self.xi_sd
            )));
        }
        if let XiLaw::StudentT { df } = self.xi_law {
            if !(df >= 9.0) {
                return Err(Error::InvalidParameter(format!(
                    "student-t regression errors need df >= 9 for the moment bounds, got {df}"
                )));
            }
        }
        self.noise.build()?;
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        self.noise.build()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Simulated observations; the hidden design stays here for diagnostics and
/// is never handed to the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub x_hidden: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub seed: u64,
}

impl SimDataset {
    /// The observable part only.
    pub fn to_dataset(&self) -> Dataset {
        Dataset::new(Some(self.y.clone()), self.z.clone()).expect("simulated data is finite")
    }
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix-style mixing so the x / xi / eps streams are unrelated
    let mut s = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_mul(0xBF58_476D_1CE4_E5B9)
        .wrapping_add(stream);
    s ^= s >> 30;
    s = s.wrapping_mul(0x94D0_49BB_1331_11EB);
    s ^ (s >> 31)
}

/// Draws one dataset: `y = f(x) + xi`, `z = x + sigma eps`, with the three
/// sources independent. Deterministic per seed.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<SimDataset> {
    scenario.validate()?;
    let n = scenario.n;
    let noise = scenario.noise_model()?;

    let mut rng_x = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let x_hidden: Vec<f64> = (0..n).map(|_| scenario.g.sample(&mut rng_x)).collect();

    let mut rng_xi = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let xi: Vec<f64> = match scenario.xi_law {
        XiLaw::Normal => {
            let dist = Normal::new(0.0, 1.0).unwrap();
            (0..n)
                .map(|_| scenario.xi_sd * dist.sample(&mut rng_xi))
                .collect()
        }
        XiLaw::StudentT { df } => {
            let dist = StudentT::new(df).expect("validated df");
            // scaled to unit variance so xi_sd is the actual sd
            let scale = scenario.xi_sd / (df / (df - 2.0)).sqrt();
            (0..n).map(|_| scale * dist.sample(&mut rng_xi)).collect()
        }
    };

    let eps = noise.sample_noise(n, derive_seed(seed, 3))?;

    let y: Vec<f64> = x_hidden
        .iter()
        .zip(&xi)
        .map(|(&x, &e)| scenario.f.eval(x) + e)
        .collect();
    let z: Vec<f64> = x_hidden.iter().zip(&eps).map(|(&x, &e)| x + e).collect();
    Ok(SimDataset {
        x_hidden,
        y,
        z,
        seed,
    })
}

/// Exact `f`, `g`, and `ell = f g` on a grid.
pub fn true_curves(scenario: &Scenario, grid: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let f: Vec<f64> = grid.iter().map(|&x| scenario.f.eval(x)).collect();
    let g: Vec<f64> = grid.iter().map(|&x| scenario.g.density(x)).collect();
    let ell: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a * b).collect();
    (f, g, ell)
}

/// Closed-form Fourier transforms of the design density and of `ell = f g`.
pub struct FourierOracle {
    pub g_star: Box<dyn Fn(f64) -> Complex64 + Send + Sync>,
    pub ell_star: Box<dyn Fn(f64) -> Complex64 + Send + Sync>,
}

/// Builds the transform pair for a scenario, or reports the combination as
/// unsupported (only `Bump` against the Laplace design lacks a closed form).
pub fn fourier_oracle(scenario: &Scenario) -> Result<FourierOracle> {
    let g = scenario.g;
    let g_star: Box<dyn Fn(f64) -> Complex64 + Send + Sync> =
        Box::new(move |t| g.transform(t));

    let ell_star: Box<dyn Fn(f64) -> Complex64 + Send + Sync> = match (scenario.f, g) {
        (FSpec::Constant { c }, _) => Box::new(move |t| g.transform(t) * c),
        // (x g)* = -i d/dt g*
        (FSpec::Linear, GSpec::StdNormal) => {
            Box::new(|t| Complex64::new(0.0, t * (-0.5 * t * t).exp()))
        }
        (FSpec::Linear, GSpec::NormalMixture) => Box::new(|t| {
            let s2 = MIX_SD * MIX_SD;
            let env = (-0.5 * s2 * t * t).exp();
            let re_deriv = (-MIX_MEAN * (MIX_MEAN * t).sin() - s2 * t * (MIX_MEAN * t).cos()) * env;
            Complex64::new(0.0, -re_deriv)
        }),
        (FSpec::Linear, GSpec::Laplace) => Box::new(|t| {
            let d = 1.0 + t * t;
            Complex64::new(0.0, 2.0 * t / (d * d))
        }),
        // (sin(pi x) g)* = [g*(t + pi) - g*(t - pi)] / (2i)
        (FSpec::Sine, _) => Box::new(move |t| {
            (g.transform(t + PI) - g.transform(t - PI)) / Complex64::new(0.0, 2.0)
        }),
        (FSpec::Bump, GSpec::StdNormal) => {
            Box::new(|t| Complex64::new((-t * t / 6.0).exp() / 3f64.sqrt(), 0.0))
        }
        (FSpec::Bump, GSpec::NormalMixture) => Box::new(|t| {
            // product of each component with e^{-x^2}, completed square
            let s2 = MIX_SD * MIX_SD;
            let a = 1.0 / (2.0 * s2) + 1.0;
            let b = MIX_MEAN / (2.0 * s2) / a;
            let c = (-MIX_MEAN * MIX_MEAN / (2.0 * s2) + a * b * b).exp();
            let scale = c / (MIX_SD * (2.0 * PI).sqrt()) * (PI / a).sqrt();
            Complex64::new(scale * (b * t).cos() * (-t * t / (4.0 * a)).exp(), 0.0)
        }),
        (FSpec::Bump, GSpec::Laplace) => {
            return Err(Error::UnsupportedScenario(
                "bump regression against the Laplace design has no closed-form transform".into(),
            ))
        }
    };
    Ok(FourierOracle { g_star, ell_star })
}

/// Which estimate a risk or rate statement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Density,
    Ell,
    Regression,
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Density => "density",
            Target::Ell => "ell",
            Target::Regression => "regression",
        }
    }
}

/// Predicted MISE shape as a function of n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RatePrediction {
    /// `n^exponent`
    Polynomial { exponent: f64 },
    /// `(ln n)^{log_exponent} / n`
    LogOverN { log_exponent: f64 },
    /// `(ln n)^exponent`, no polynomial improvement
    LogPower { exponent: f64 },
    /// The optimal dimension only solves an implicit equation; no explicit
    /// rate exists for this cell.
    Implicit,
}

impl RatePrediction {
    pub fn eval(&self, n: f64) -> Option<f64> {
        match *self {
            RatePrediction::Polynomial { exponent } => Some(n.powf(exponent)),
            RatePrediction::LogOverN { log_exponent } => Some(n.ln().powf(log_exponent) / n),
            RatePrediction::LogPower { exponent } => Some(n.ln().powf(exponent)),
            RatePrediction::Implicit => None,
        }
    }

    /// Power of `n` in the leading factor, the anchor a fitted log-log slope
    /// is compared against.
    pub fn n_exponent(&self) -> Option<f64> {
        match *self {
            RatePrediction::Polynomial { exponent } => Some(exponent),
            RatePrediction::LogOverN { .. } => Some(-1.0),
            RatePrediction::LogPower { .. } => Some(0.0),
            RatePrediction::Implicit => None,
        }
    }

    /// Exact log-log slope of the predicted curve between two sample sizes.
    pub fn effective_slope(&self, n0: f64, n1: f64) -> Option<f64> {
        let a = self.eval(n0)?;
        let b = self.eval(n1)?;
        Some((b / a).ln() / (n1 / n0).ln())
    }
}

/// Rate shape for a scenario and target, from the noise decay `(alpha, rho)`
/// and the target's smoothness metadata `(a, r)`; the regression target is
/// driven by the worse of its two ingredients.
pub fn predicted_rate(scenario: &Scenario, target: Target) -> Result<RatePrediction> {
    let sm = scenario.smoothness.ok_or_else(|| {
        Error::InvalidParameter("scenario has no smoothness metadata for rate prediction".into())
    })?;
    let noise = scenario.noise_model()?;
    let (alpha, rho) = (noise.alpha(), noise.rho());
    let (a, r) = match target {
        Target::Ell => (sm.a_ell, sm.r_ell),
        Target::Density => (sm.a_g, sm.r_g),
        Target::Regression => (sm.a_ell.min(sm.a_g), sm.r_ell.min(sm.r_g)),
    };
    Ok(if rho == 0.0 && r == 0.0 {
        RatePrediction::Polynomial {
            exponent: -2.0 * a / (2.0 * alpha + 2.0 * a + 1.0),
        }
    } else if rho == 0.0 {
        RatePrediction::LogOverN {
            log_exponent: (2.0 * alpha + 1.0) / r,
        }
    } else if r == 0.0 {
        RatePrediction::LogPower {
            exponent: -2.0 * a / rho,
        }
    } else {
        RatePrediction::Implicit
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_gl;

    fn base_scenario() -> Scenario {
        Scenario {
            f: FSpec::Sine,
            g: GSpec::StdNormal,
            xi_sd: 0.3,
            xi_law: XiLaw::Normal,
            noise: NoiseSpec {
                kind: "laplace".into(),
                sigma: 0.5,
            },
            n: 2000,
            smoothness: Some(Smoothness {
                a_ell: 0.0,
                r_ell: 2.0,
                b_ell: 0.25,
                a_g: 0.0,
                r_g: 2.0,
                b_g: 0.25,
            }),
        }
    }

    #[test]
    fn generation_is_deterministic_and_structural() {
        let s = base_scenario();
        let a = generate(&s, 7).unwrap();
        let b = generate(&s, 7).unwrap();
        assert_eq!(a, b);
        let c = generate(&s, 8).unwrap();
        assert_ne!(a.z, c.z);

        // identity regression with no errors: y = x and z = x exactly
        let mut ident = base_scenario();
        ident.f = FSpec::Linear;
        ident.xi_sd = 0.0;
        ident.noise = NoiseSpec {
            kind: "none".into(),
            sigma: 0.0,
        };
        let d = generate(&ident, 3).unwrap();
        assert_eq!(d.y, d.x_hidden);
        assert_eq!(d.z, d.x_hidden);
    }

    #[test]
    fn generated_moments_match() {
        let mut s = base_scenario();
        s.n = 100_000;
        let ds = generate(&s, 42).unwrap();
        let mean_z = ds.z.iter().sum::<f64>() / ds.z.len() as f64;
        assert!(mean_z.abs() < 0.02, "mean {mean_z}");
        let var_z = ds.z.iter().map(|v| (v - mean_z).powi(2)).sum::<f64>() / ds.z.len() as f64;
        // Var X + sigma^2 Var(laplace) = 1 + 0.25 * 2 = 1.5
        assert!((var_z - 1.5).abs() < 0.03, "var {var_z}");
    }

    #[test]
    fn independence_diagnostics() {
        let mut s = base_scenario();
        s.n = 50_000;
        let ds = generate(&s, 5).unwrap();
        let eps: Vec<f64> = ds.z.iter().zip(&ds.x_hidden).map(|(z, x)| z - x).collect();
        let xi: Vec<f64> = ds
            .y
            .iter()
            .zip(&ds.x_hidden)
            .map(|(y, x)| y - s.f.eval(*x))
            .collect();
        let corr = |a: &[f64], b: &[f64]| {
            let n = a.len() as f64;
            let ma = a.iter().sum::<f64>() / n;
            let mb = b.iter().sum::<f64>() / n;
            let cov = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / n;
            let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
            let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / n;
            cov / (va * vb).sqrt()
        };
        let bound = 3.0 / (s.n as f64).sqrt();
        assert!(corr(&xi, &eps).abs() < bound);
        assert!(corr(&ds.x_hidden, &xi).abs() < bound);
        assert!(corr(&ds.x_hidden, &eps).abs() < bound);
    }

    #[test]
    fn true_curves_identities() {
        let s = base_scenario();
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
        let (f, g, ell) = true_curves(&s, &grid);
        for i in 0..grid.len() {
            assert_eq!(ell[i], f[i] * g[i]);
            if g[i] > 0.0 {
                assert!((ell[i] / g[i] - f[i]).abs() < 1e-12);
            }
        }
        // g standard normal at 0
        let (_, g0, _) = true_curves(&s, &[0.0]);
        assert!((g0[0] - 0.398_942_280_401_432_7).abs() < 1e-15);

        // constant regression: ell = c g everywhere
        let mut sc = s;
        sc.f = FSpec::Constant { c: 2.5 };
        let (_, g, ell) = true_curves(&sc, &grid);
        for i in 0..grid.len() {
            assert_eq!(ell[i], 2.5 * g[i]);
        }
    }

    /// Numeric Fourier quadrature of the spatial ell, the cross-check oracle.
    /// Split at 0 so the Laplace design's kink does not degrade the rule.
    fn numeric_transform(s: &Scenario, t: f64) -> Complex64 {
        let halves = |f: &dyn Fn(f64) -> f64| {
            integrate_gl(4096, -40.0, 0.0, f) + integrate_gl(4096, 0.0, 40.0, f)
        };
        let re = halves(&|x| s.f.eval(x) * s.g.density(x) * (t * x).cos());
        let im = halves(&|x| s.f.eval(x) * s.g.density(x) * (t * x).sin());
        Complex64::new(re, im)
    }

    #[test]
    fn fourier_oracle_matches_numeric_quadrature() {
        let mut combos = Vec::new();
        for f in [
            FSpec::Constant { c: 1.7 },
            FSpec::Linear,
            FSpec::Sine,
            FSpec::Bump,
        ] {
            for g in [GSpec::StdNormal, GSpec::NormalMixture, GSpec::Laplace] {
                combos.push((f, g));
            }
        }
        for (f, g) in combos {
            let mut s = base_scenario();
            s.f = f;
            s.g = g;
            let oracle = match fourier_oracle(&s) {
                Ok(o) => o,
                Err(Error::UnsupportedScenario(_)) => {
                    assert_eq!((f, g), (FSpec::Bump, GSpec::Laplace));
                    continue;
                }
                Err(e) => panic!("{e}"),
            };
            for t in [-8.0, -3.3, -0.5, 0.0, 0.9, 2.2, 7.7, 20.0] {
                let a = (oracle.ell_star)(t);
                let b = numeric_transform(&s, t);
                assert!(
                    (a - b).norm() < 1e-8,
                    "{f:?} x {g:?} at t={t}: {a} vs {b}"
                );
                let ga = (oracle.g_star)(t);
                let halves = |f: &dyn Fn(f64) -> f64| {
                    integrate_gl(4096, -40.0, 0.0, f) + integrate_gl(4096, 0.0, 40.0, f)
                };
                let gb = Complex64::new(
                    halves(&|x| s.g.density(x) * (t * x).cos()),
                    halves(&|x| s.g.density(x) * (t * x).sin()),
                );
                assert!((ga - gb).norm() < 1e-8, "g {g:?} at t={t}");
            }
        }
    }

    #[test]
    fn smoothness_metadata_is_honest() {
        // the decay-class integral of the scenario's claimed (a, r, B) is
        // finite: integrate |psi*|^2 (x^2+1)^a e^{2B|x|^r} up to where the
        // integrand is negligible
        let s = base_scenario();
        let sm = s.smoothness.unwrap();
        let oracle = fourier_oracle(&s).unwrap();
        let weighted = |x: f64| {
            (oracle.ell_star)(x).norm_sqr()
                * (x * x + 1.0).powf(sm.a_ell)
                * (2.0 * sm.b_ell * x.abs().powf(sm.r_ell)).exp()
        };
        // integrand decays like e^{-(x-pi)^2 + x^2/2}; by x = 28 it is below
        // 1e-90, and wider cutoffs underflow the |ell*|^2 factor entirely
        let total = integrate_gl(8192, -28.0, 28.0, weighted);
        assert!(weighted(28.0) < 1e-15);
        assert!(total.is_finite() && total > 0.0);
    }

    #[test]
    fn rate_prediction_cases() {
        // Laplace noise (rho=0, alpha=2), Sobolev target a=1: n^{-2/7}
        let mut s = base_scenario();
        s.noise = NoiseSpec {
            kind: "laplace".into(),
            sigma: 1.0,
        };
        s.smoothness = Some(Smoothness {
            a_ell: 1.0,
            r_ell: 0.0,
            b_ell: 0.0,
            a_g: 2.0,
            r_g: 0.0,
            b_g: 0.0,
        });
        let r = predicted_rate(&s, Target::Ell).unwrap();
        assert_eq!(
            r,
            RatePrediction::Polynomial {
                exponent: -2.0 / 7.0
            }
        );
        // regression uses the worse smoothness: a* = min(1, 2) = 1
        let rr = predicted_rate(&s, Target::Regression).unwrap();
        assert_eq!(r, rr);

        // analytic-type target under polynomial-decay noise: (ln n)^{5/2}/n
        let s2 = base_scenario();
        let r2 = predicted_rate(&s2, Target::Density).unwrap();
        assert_eq!(r2, RatePrediction::LogOverN { log_exponent: 2.5 });
        assert!((r2.n_exponent().unwrap() + 1.0).abs() < 1e-15);

        // super smooth noise, Sobolev target: (ln n)^{-2a/rho}
        let mut s3 = base_scenario();
        s3.noise = NoiseSpec {
            kind: "gaussian".into(),
            sigma: 0.3,
        };
        s3.smoothness = Some(Smoothness {
            a_ell: 1.5,
            r_ell: 0.0,
            b_ell: 0.0,
            a_g: 1.5,
            r_g: 0.0,
            b_g: 0.0,
        });
        assert_eq!(
            predicted_rate(&s3, Target::Ell).unwrap(),
            RatePrediction::LogPower { exponent: -1.5 }
        );

        // both exponential: implicit cell
        let mut s4 = base_scenario();
        s4.noise = NoiseSpec {
            kind: "gaussian".into(),
            sigma: 0.3,
        };
        assert_eq!(
            predicted_rate(&s4, Target::Ell).unwrap(),
            RatePrediction::Implicit
        );
        assert_eq!(s4.smoothness.unwrap().r_ell, 2.0);

        // missing metadata errors
        let mut s5 = base_scenario();
        s5.smoothness = None;
        assert!(predicted_rate(&s5, Target::Ell).is_err());
    }

    #[test]
    fn rate_eval_and_slopes() {
        let p = RatePrediction::Polynomial { exponent: -0.5 };
        assert!((p.effective_slope(500.0, 8000.0).unwrap() + 0.5).abs() < 1e-12);
        let l = RatePrediction::LogOverN { log_exponent: 2.5 };
        let s = l.effective_slope(500.0, 8000.0).unwrap();
        assert!(s < -0.5 && s > -1.0, "{s}");
        assert_eq!(RatePrediction::Implicit.eval(100.0), None);
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = base_scenario();
        let text = s.to_json();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(s, back);

        // external format spot check
        let raw = r#"{
            "f": {"kind": "sine"},
            "g": {"kind": "std_normal"},
            "xi_sd": 0.3,
            "noise": {"kind": "laplace", "sigma": 0.5},
            "n": 2000
        }"#;
        let parsed = Scenario::from_json(raw).unwrap();
        assert_eq!(parsed.f, FSpec::Sine);
        assert_eq!(parsed.xi_law, XiLaw::Normal);
        assert!(parsed.smoothness.is_none());
    }

    #[test]
    fn scenario_validation() {
        let mut s = base_scenario();
        s.noise.kind = "triangle".into();
        assert!(s.validate().is_err());
        let mut s = base_scenario();
        s.xi_law = XiLaw::StudentT { df: 5.0 };
        assert!(s.validate().is_err());
        s.xi_law = XiLaw::StudentT { df: 9.0 };
        assert!(s.validate().is_ok());
        let mut s = base_scenario();
        s.noise = NoiseSpec {
            kind: "none".into(),
            sigma: 0.5,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn student_t_xi_has_requested_sd() {
        let mut s = base_scenario();
        s.xi_law = XiLaw::StudentT { df: 12.0 };
        s.xi_sd = 0.5;
        s.n = 200_000;
        let ds = generate(&s, 11).unwrap();
        let xi: Vec<f64> = ds
            .y
            .iter()
            .zip(&ds.x_hidden)
            .map(|(y, x)| y - s.f.eval(*x))
            .collect();
        let var = xi.iter().map(|v| v * v).sum::<f64>() / xi.len() as f64;
        assert!((var - 0.25).abs() < 0.01, "var {var}");
    }
}
