//! Empirical L2 risks: integrated squared error of one fit, Monte Carlo
//! mean ISE across replications, fixed-model risk curves with the adaptive
//! estimator alongside, and log-log rate slopes.
//!
//! Density and numerator fits are scored on a truth-adaptive wide grid (the
//! estimates live on the whole line but their error mass is concentrated);
//! the regression estimate is scored on the configured compact region only.

use crate::basis::reconstruct;
use crate::csvio::format_f64;
use crate::error::{Error, Result};
use crate::exec;
use crate::penalty::Purpose;
use crate::select::{
    density_table, ell_table, fit_density, fit_ell, fit_regression, select_model, EstimatorConfig,
};
use crate::sim::{generate, true_curves, Scenario, Target};

/// Trapezoid integral of the squared difference over an aligned grid.
pub fn ise(estimate: &[f64], truth: &[f64], grid: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() || estimate.len() != grid.len() {
        return Err(Error::MisalignedGrids);
    }
    if grid.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: grid.len(),
        });
    }
    let mut acc = 0.0;
    for i in 1..grid.len() {
        let h = grid[i] - grid[i - 1];
        if !(h > 0.0) {
            return Err(Error::MisalignedGrids);
        }
        let a = estimate[i - 1] - truth[i - 1];
        let b = estimate[i] - truth[i];
        acc += 0.5 * h * (a * a + b * b);
    }
    Ok(acc)
}

/// Wide scoring grid for whole-line risks: extends symmetrically until both
/// true curves fall below 1e-6, plus margin for the basis tails.
pub fn risk_grid(scenario: &Scenario) -> Vec<f64> {
    let mut edge = 2.0f64;
    loop {
        let below = [edge, -edge].iter().all(|&x| {
            let g = scenario.g.density(x).abs();
            let l = (scenario.f.eval(x) * scenario.g.density(x)).abs();
            g < 1e-6 && l < 1e-6
        });
        if below || edge > 200.0 {
            break;
        }
        edge += 0.5;
    }
    let x_max = edge + 2.0;
    let h = 0.02;
    let steps = (x_max / h).ceil() as i64;
    (-steps..=steps).map(|i| i as f64 * h).collect()
}

/// One scored replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationScore {
    pub rep: usize,
    pub ise: f64,
    /// Whole-line ISE of the numerator fit (regression target only).
    pub ise_ell: Option<f64>,
    /// Whole-line ISE of the density fit (regression target only).
    pub ise_g: Option<f64>,
    /// sup of |f~| over the evaluation grid (regression target only).
    pub sup_abs_f: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RiskReport {
    pub target: Target,
    pub n: usize,
    pub reps_requested: usize,
    pub scores: Vec<ReplicationScore>,
    pub failures: Vec<(usize, String)>,
    pub mise: f64,
    pub se: f64,
}

impl RiskReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,rep,ise,ise_ell,ise_g,sup_abs_f,se\n");
        let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
        for s in &self.scores {
            out.push_str(&format!(
                "rep,{},{},{},{},{},\n",
                s.rep,
                format_f64(s.ise),
                opt(s.ise_ell),
                opt(s.ise_g),
                opt(s.sup_abs_f),
            ));
        }
        out.push_str(&format!(
            "summary,,{},,,,{}\n",
            format_f64(self.mise),
            format_f64(self.se)
        ));
        out
    }
}

fn summarize(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

type Gathered<T> = (Vec<(usize, T)>, Vec<(usize, String)>);

fn gather<T>(
    results: Vec<std::result::Result<T, String>>,
    reps: usize,
) -> Result<Gathered<T>> {
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push((rep, v)),
            Err(e) => failures.push((rep, e)),
        }
    }
    // a failure rate above 5% poisons the mean; refuse to report one
    if failures.len() * 20 > reps {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: reps,
            first: failures[0].1.clone(),
        });
    }
    if ok.is_empty() {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: reps,
            first: failures
                .first()
                .map(|f| f.1.clone())
                .unwrap_or_else(|| "no replications".into()),
        });
    }
    Ok((ok, failures))
}

fn mise_impl(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    target: Target,
    reps: usize,
    seed: u64,
    sequential: bool,
) -> Result<RiskReport> {
    if reps < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: reps,
        });
    }
    scenario.validate()?;
    cfg.validate()?;
    let noise = scenario.noise_model()?;
    let wide = risk_grid(scenario);
    let (f_true_wide, g_true_wide, ell_true_wide) = true_curves(scenario, &wide);
    let _ = &f_true_wide;
    let eval_grid = cfg.eval_region.grid();
    let (f_true_a, _, _) = true_curves(scenario, &eval_grid);

    let worker = |rep: usize| -> std::result::Result<ReplicationScore, String> {
        let run = || -> Result<ReplicationScore> {
            let ds = generate(scenario, seed.wrapping_add(rep as u64))?;
            let data = ds.to_dataset();
            match target {
                Target::Density => {
                    let fit = fit_density(&data, &noise, cfg, Purpose::DensityOnly)?;
                    let est = reconstruct(&fit.coeffs, &wide);
                    Ok(ReplicationScore {
                        rep,
                        ise: ise(&est, &g_true_wide, &wide)?,
                        ise_ell: None,
                        ise_g: None,
                        sup_abs_f: None,
                    })
                }
                Target::Ell => {
                    let fit = fit_ell(&data, &noise, cfg)?;
                    let est = reconstruct(&fit.coeffs, &wide);
                    Ok(ReplicationScore {
                        rep,
                        ise: ise(&est, &ell_true_wide, &wide)?,
                        ise_ell: None,
                        ise_g: None,
                        sup_abs_f: None,
                    })
                }
                Target::Regression => {
                    let fit = fit_regression(&data, &noise, cfg)?;
                    let ise_f = ise(&fit.f_tilde, &f_true_a, &fit.grid)?;
                    let g_est = reconstruct(&fit.g_coeffs, &wide);
                    let l_est = reconstruct(&fit.ell_coeffs, &wide);
                    let sup = fit.f_tilde.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                    Ok(ReplicationScore {
                        rep,
                        ise: ise_f,
                        ise_ell: Some(ise(&l_est, &ell_true_wide, &wide)?),
                        ise_g: Some(ise(&g_est, &g_true_wide, &wide)?),
                        sup_abs_f: Some(sup),
                    })
                }
            }
        };
        run().map_err(|e| e.to_string())
    };

    let results = if sequential {
        exec::map_indexed_seq(reps, worker)
    } else {
        exec::map_indexed(reps, worker)
    };
    let (ok, failures) = gather(results, reps)?;
    let scores: Vec<ReplicationScore> = ok.into_iter().map(|(_, s)| s).collect();
    let ises: Vec<f64> = scores.iter().map(|s| s.ise).collect();
    let (mise, se) = summarize(&ises);
    Ok(RiskReport {
        target,
        n: scenario.n,
        reps_requested: reps,
        scores,
        failures,
        mise,
        se,
    })
}

/// Monte Carlo mean ISE over `reps` independent replications (fresh data per
/// replication, scenario fixed). Deterministic given `seed`.
pub fn mise(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    target: Target,
    reps: usize,
    seed: u64,
) -> Result<RiskReport> {
    mise_impl(scenario, cfg, target, reps, seed, false)
}

/// Sequential twin of [`mise`] for the fallback path and benchmarks.
pub fn mise_seq(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    target: Target,
    reps: usize,
    seed: u64,
) -> Result<RiskReport> {
    mise_impl(scenario, cfg, target, reps, seed, true)
}

/// Mean ISE of the fixed-model estimators at every admissible dimension,
/// with the adaptive estimator scored from the same replications.
#[derive(Debug, Clone)]
pub struct OracleCurve {
    pub target: Target,
    pub n: usize,
    /// `(m, dim, mean ISE, se)` per fixed model.
    pub per_model: Vec<(usize, f64, f64, f64)>,
    pub adaptive_mise: f64,
    pub adaptive_se: f64,
    pub failures: Vec<(usize, String)>,
}

impl OracleCurve {
    /// Smallest fixed-model mean ISE (the empirical oracle).
    pub fn oracle_min(&self) -> (usize, f64) {
        self.per_model
            .iter()
            .map(|&(m, _, mise, _)| (m, mise))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty model collection")
    }
}

pub fn oracle_curve(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    target: Target,
    reps: usize,
    seed: u64,
) -> Result<OracleCurve> {
    if reps < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: reps,
        });
    }
    if target == Target::Regression {
        return Err(Error::InvalidParameter(
            "fixed-model risk curves are defined for the density and numerator targets".into(),
        ));
    }
    scenario.validate()?;
    cfg.validate()?;
    let noise = scenario.noise_model()?;
    let wide = risk_grid(scenario);
    let (_, g_true, ell_true) = true_curves(scenario, &wide);
    let truth = match target {
        Target::Density => g_true,
        _ => ell_true,
    };

    // per replication: ISE at each model plus the adaptively selected one
    let results = exec::map_indexed(reps, |rep| {
        let run = || -> Result<(Vec<(usize, f64)>, f64)> {
            let ds = generate(scenario, seed.wrapping_add(rep as u64))?;
            let data = ds.to_dataset();
            let table = match target {
                Target::Density => density_table(&data, &noise, cfg, Purpose::DensityOnly)?,
                _ => ell_table(&data, &noise, cfg)?,
            };
            let mut per_m = Vec::with_capacity(table.entries.len());
            for (idx, coeffs, _, _) in &table.entries {
                let est = reconstruct(coeffs, &wide);
                per_m.push((idx.m, ise(&est, &truth, &wide)?));
            }
            let contrasts: Vec<f64> = table.entries.iter().map(|e| e.2).collect();
            let pens: Vec<f64> = table.entries.iter().map(|e| e.3).collect();
            let (chosen, _) = select_model(&contrasts, &pens, &table.models)?;
            let adaptive = per_m
                .iter()
                .find(|(m, _)| *m == chosen.m)
                .expect("chosen model scored")
                .1;
            Ok((per_m, adaptive))
        };
        run().map_err(|e| e.to_string())
    });
    let (ok, failures) = gather(results, reps)?;

    // aggregate over the intersection of model sets (dropped models may vary
    // by replication under overflow-prone noise)
    let mut by_model: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut adaptive = Vec::new();
    for (_, (per_m, ad)) in &ok {
        adaptive.push(*ad);
        for (m, v) in per_m {
            match by_model.iter_mut().find(|(mm, _)| mm == m) {
                Some((_, vs)) => vs.push(*v),
                None => by_model.push((*m, vec![*v])),
            }
        }
    }
    by_model.sort_by_key(|(m, _)| *m);
    let keep = ok.len();
    let per_model: Vec<(usize, f64, f64, f64)> = by_model
        .into_iter()
        .filter(|(_, vs)| vs.len() == keep)
        .map(|(m, vs)| {
            let (mean, se) = summarize(&vs);
            (m, m as f64 * cfg.dim_step, mean, se)
        })
        .collect();
    if per_model.is_empty() {
        return Err(Error::AllModelsFailed(
            "no model survived every replication".into(),
        ));
    }
    let (a_mean, a_se) = summarize(&adaptive);
    Ok(OracleCurve {
        target,
        n: scenario.n,
        per_model,
        adaptive_mise: a_mean,
        adaptive_se: a_se,
        failures,
    })
}

/// Least-squares fit of `log(mise)` on `log(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_ss: f64,
}

pub fn rate_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: distinct.len(),
        });
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, m)| {
            if n <= 0.0 || m <= 0.0 {
                Err(Error::InvalidParameter(
                    "rate fit needs positive n and mise".into(),
                ))
            } else {
                Ok((n.ln(), m.ln()))
            }
        })
        .collect::<Result<_>>()?;
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_ss = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual_ss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::KnRule;
    use crate::sim::{FSpec, GSpec, NoiseSpec, XiLaw};

    #[test]
    fn ise_spot_values() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let a: Vec<f64> = grid.iter().map(|x| x.sin()).collect();
        assert_eq!(ise(&a, &a, &grid).unwrap(), 0.0);

        // constant offset integrates to the interval length
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let v = ise(&b, &a, &grid).unwrap();
        assert!((v - 1.0).abs() < 1e-4, "{v}");

        assert!(ise(&a, &a[..50], &grid).is_err());
        let two = [0.0, 1.0];
        assert!(ise(&two, &two, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn ise_grid_refinement_converges() {
        let coarse: Vec<f64> = (0..=200).map(|i| -2.0 + i as f64 * 0.02).collect();
        let fine: Vec<f64> = (0..=400).map(|i| -2.0 + i as f64 * 0.01).collect();
        let est = |x: f64| (x * 1.3).cos();
        let tru = |x: f64| (-0.5 * x * x).exp();
        let on = |g: &[f64]| {
            let e: Vec<f64> = g.iter().map(|&x| est(x)).collect();
            let t: Vec<f64> = g.iter().map(|&x| tru(x)).collect();
            ise(&e, &t, g).unwrap()
        };
        let a = on(&coarse);
        let b = on(&fine);
        assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
    }

    fn quick_scenario(n: usize) -> Scenario {
        Scenario {
            f: FSpec::Constant { c: 1.0 },
            g: GSpec::StdNormal,
            xi_sd: 0.0,
            xi_law: XiLaw::Normal,
            noise: NoiseSpec {
                kind: "none".into(),
                sigma: 0.0,
            },
            n,
            smoothness: None,
        }
    }

    fn quick_cfg() -> EstimatorConfig {
        EstimatorConfig {
            kn: KnRule::Capped(256),
            dim_step: 40.0,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn mise_is_deterministic_and_noiseless_sanity() {
        let s = quick_scenario(5000);
        let cfg = quick_cfg();
        let a = mise(&s, &cfg, Target::Regression, 4, 17).unwrap();
        let b = mise(&s, &cfg, Target::Regression, 4, 17).unwrap();
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.mise, b.mise);
        // constant regression with neither error source: tiny risk on A
        assert!(a.mise < 1e-3, "mise {}", a.mise);
        assert!(a.failures.is_empty());
        for s in &a.scores {
            assert!(s.sup_abs_f.unwrap() <= 5000.0);
        }
        let seq = mise_seq(&s, &cfg, Target::Regression, 4, 17).unwrap();
        assert_eq!(a.scores, seq.scores);
    }

    #[test]
    fn mise_se_shrinks_with_reps() {
        let s = quick_scenario(400);
        let cfg = quick_cfg();
        let small = mise(&s, &cfg, Target::Density, 8, 3).unwrap();
        let large = mise(&s, &cfg, Target::Density, 32, 3).unwrap();
        // quadrupling R roughly halves the standard error
        let ratio = small.se / large.se;
        assert!(
            (1.2..=3.4).contains(&ratio),
            "se ratio {ratio} ({} vs {})",
            small.se,
            large.se
        );
    }

    #[test]
    fn oracle_curve_structure() {
        let mut s = quick_scenario(1200);
        s.f = FSpec::Sine;
        s.xi_sd = 0.2;
        s.noise = NoiseSpec {
            kind: "laplace".into(),
            sigma: 0.5,
        };
        let cfg = EstimatorConfig {
            kn: KnRule::Capped(256),
            dim_step: 0.5,
            ..EstimatorConfig::default()
        };
        let curve = oracle_curve(&s, &cfg, Target::Density, 6, 5).unwrap();
        assert!(!curve.per_model.is_empty());
        let (_, oracle_mise) = curve.oracle_min();
        assert!(curve.adaptive_mise >= oracle_mise - 1e-12);
        assert!(oracle_curve(&s, &cfg, Target::Regression, 6, 5).is_err());
    }

    #[test]
    fn noiseless_risk_decomposes_into_bias_plus_variance() {
        // without design noise, E ISE(m) = bias(m) + (D_m - ||g_m||^2)/n up to
        // the k_n tail: the variance of the direct projection estimator sums
        // the per-coefficient variances n^{-1}(E phi_j^2 - a_j^2) and the
        // frame identity sum_j phi_j(x)^2 = D_m collapses the first term.
        let s = Scenario {
            f: FSpec::Constant { c: 1.0 },
            g: GSpec::StdNormal,
            xi_sd: 0.0,
            xi_law: crate::sim::XiLaw::Normal,
            noise: NoiseSpec {
                kind: "none".into(),
                sigma: 0.0,
            },
            n: 500,
            smoothness: None,
        };
        let cfg = EstimatorConfig {
            kn: KnRule::Fixed(128),
            dim_step: 1.0,
            ..EstimatorConfig::default()
        };
        let reps = 30;
        let curve = oracle_curve(&s, &cfg, Target::Density, reps, 7).unwrap();
        let g_norm_sq = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
        for &(m, dim, mean_ise, se) in curve.per_model.iter().take(4) {
            let model = crate::basis::ModelIndex::new(m, 1.0).unwrap();
            let bias = crate::basis::projection_bias(
                |x| num_complex::Complex64::new((-0.5 * x * x).exp(), 0.0),
                &model,
            )
            .unwrap();
            let variance = (dim - (g_norm_sq - bias)) / s.n as f64;
            let predicted = bias + variance;
            assert!(
                (mean_ise - predicted).abs() <= 2.0 * se.max(1e-12),
                "m={m}: mean ISE {mean_ise} vs bias+variance {predicted} (se {se})"
            );
        }
    }

    #[test]
    fn rate_slope_exact_power_laws() {
        let pts: Vec<(f64, f64)> = [500.0, 2000.0, 8000.0]
            .iter()
            .map(|&n| (n, 3.0 / n))
            .collect();
        let fit = rate_slope(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-10);
        assert!(fit.residual_ss < 1e-20);

        let pts: Vec<(f64, f64)> = [500.0f64, 1000.0, 2000.0, 4000.0]
            .iter()
            .map(|&n| (n, 0.7 * n.powf(-2.0 / 7.0)))
            .collect();
        let fit = rate_slope(&pts).unwrap();
        assert!((fit.slope + 2.0 / 7.0).abs() < 1e-10);

        assert!(rate_slope(&[(500.0, 1.0), (500.0, 1.1)]).is_err());
    }

    #[test]
    fn risk_grid_covers_truth() {
        let s = quick_scenario(100);
        let grid = risk_grid(&s);
        let edge = grid.last().unwrap();
        assert!(s.g.density(*edge) < 1e-6);
        assert!(*edge >= 5.0 && *edge <= 12.0, "edge {edge}");
        // symmetric
        assert_eq!(-grid[0], *edge);
    }

    #[test]
    fn report_csv_has_summary_row() {
        let s = quick_scenario(300);
        let cfg = quick_cfg();
        let r = mise(&s, &cfg, Target::Density, 3, 1).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "kind,rep,ise,ise_ell,ise_g,sup_abs_f,se");
        assert_eq!(lines.len(), 1 + 3 + 1);
        assert!(lines.last().unwrap().starts_with("summary,"));
    }
}
