use crate::manifest::{version, ResolvedConfig, RunManifest};
use crate::{BenchmarkArgs, CalibrateArgs, CliError, EstimateArgs, EstimatorFlags, SimulateArgs};
use eivreg::csvio::{column_csv_string, format_f64, read_yz_csv, write_atomic, yz_csv_string};
use eivreg::noise::NoiseModel;
use eivreg::risk::{mise, oracle_curve, rate_slope, SlopeFit};
use eivreg::select::{fit_regression, EstimatorConfig, EvalRegion, KnRule};
use eivreg::sim::{generate, predicted_rate, Scenario, Target};
use serde_json::json;
use std::path::Path;

type CliResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl EstimatorFlags {
    fn to_config(&self) -> Result<EstimatorConfig, CliError> {
        let mut cfg = EstimatorConfig::default();
        if let Some(k) = self.kappa {
            cfg.kappa = k;
        }
        if let Some(k) = self.kappa_prime {
            cfg.kappa_prime = k;
        }
        if let Some(k) = self.kn {
            cfg.kn = KnRule::Fixed(k);
        } else if let Some(c) = self.kn_cap {
            cfg.kn = KnRule::Capped(c);
        }
        if let Some(t) = self.trim_exponent {
            cfg.trim_exponent = t;
        }
        if let Some(d) = self.dim_step {
            cfg.dim_step = d;
        }
        if let Some(q) = self.quad_nodes {
            cfg.quad.nodes = q;
        }
        if let Some(spec) = &self.grid {
            cfg.eval_region = parse_grid(spec)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_grid(spec: &str) -> Result<EvalRegion, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("--grid expects lo:hi:points, got {spec:?}")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| usage(format!("bad grid lower bound {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| usage(format!("bad grid upper bound {:?}", parts[1])))?;
    let points: usize = parts[2]
        .parse()
        .map_err(|_| usage(format!("bad grid point count {:?}", parts[2])))?;
    Ok(EvalRegion::new(lo, hi, points)?)
}

fn build_noise(kind: &str, sigma: f64) -> Result<NoiseModel, CliError> {
    match kind {
        "none" => {
            if sigma != 0.0 {
                return Err(usage("noise kind \"none\" requires sigma = 0"));
            }
            Ok(NoiseModel::none())
        }
        "gaussian" => Ok(NoiseModel::gaussian(sigma)?),
        "laplace" => Ok(NoiseModel::laplace(sigma)?),
        "cauchy" => Ok(NoiseModel::cauchy(sigma)?),
        other => Err(usage(format!(
            "unknown noise kind {other:?} (expected gaussian|laplace|cauchy|none)"
        ))),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read scenario {}: {e}", path.display())))?;
    Ok(Scenario::from_json(&text)?)
}

/// Canonical argv with every estimator default materialized.
fn config_args(cfg: &EstimatorConfig) -> Vec<String> {
    let mut args = vec![
        "--kappa".into(),
        format_f64(cfg.kappa),
        "--kappa-prime".into(),
        format_f64(cfg.kappa_prime),
        "--trim-exponent".into(),
        format_f64(cfg.trim_exponent),
        "--dim-step".into(),
        format_f64(cfg.dim_step),
        "--quad-nodes".into(),
        cfg.quad.nodes.to_string(),
        "--grid".into(),
        format!(
            "{}:{}:{}",
            format_f64(cfg.eval_region.lo),
            format_f64(cfg.eval_region.hi),
            cfg.eval_region.points
        ),
    ];
    match cfg.kn {
        KnRule::TheoryExact => {}
        KnRule::Capped(c) => {
            args.push("--kn-cap".into());
            args.push(c.to_string());
        }
        KnRule::Fixed(k) => {
            args.push("--kn".into());
            args.push(k.to_string());
        }
    }
    args
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn warn_dropped(target: &str, dropped: &[(usize, String)]) {
    for (m, why) in dropped {
        eprintln!("warning: {target}: dropped model m={m}: {why}");
    }
}

pub fn estimate(args: &EstimateArgs) -> CliResult {
    let cfg = args.flags.to_config()?;
    let noise = build_noise(&args.noise, args.sigma)?;
    let data = read_yz_csv(&args.input)?;
    let fit = fit_regression(&data, &noise, &cfg).map_err(CliError::from)?;
    warn_dropped("density", &fit.diag_g.dropped);
    warn_dropped("numerator", &fit.diag_ell.dropped);

    let out = &args.out;
    let diag_g = out.join("diagnostics_g.csv");
    let diag_ell = out.join("diagnostics_ell.csv");
    let estimates = out.join("estimates.csv");
    let manifest_path = out.join("manifest.json");
    write_atomic(&diag_g, &fit.diag_g.to_csv())?;
    write_atomic(&diag_ell, &fit.diag_ell.to_csv())?;
    write_atomic(&estimates, &fit.estimates_csv())?;

    let mut resolved_args = vec![
        "estimate".to_string(),
        "--input".into(),
        path_str(&args.input),
        "--noise".into(),
        args.noise.clone(),
        "--sigma".into(),
        format_f64(args.sigma),
        "--out".into(),
        path_str(out),
    ];
    resolved_args.extend(config_args(&cfg));
    RunManifest {
        subcommand: "estimate".into(),
        library_version: version(),
        seed: None,
        inputs: vec![path_str(&args.input)],
        outputs: vec![path_str(&diag_g), path_str(&diag_ell), path_str(&estimates)],
        config: json!({
            "noise": {"kind": args.noise, "sigma": args.sigma},
            "estimator": ResolvedConfig::from_config(&cfg),
            "n": data.n(),
            "selected_m_g": fit.m_hat_g.m,
            "selected_m_ell": fit.m_hat_ell.m,
            "a_n": fit.a_n,
            "k_n": fit.k_n,
            "dropped_g": fit.diag_g.dropped,
            "dropped_ell": fit.diag_ell.dropped,
        }),
        resolved_args,
    }
    .write(&manifest_path)?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> CliResult {
    let scenario = load_scenario(&args.scenario)?;
    let sim = generate(&scenario, args.seed).map_err(CliError::from)?;

    let out = &args.out;
    let data_path = out.join("data.csv");
    let sidecar_path = out.join("x_hidden.csv");
    let manifest_path = out.join("manifest.json");
    write_atomic(&data_path, &yz_csv_string(&sim.y, &sim.z))?;
    write_atomic(&sidecar_path, &column_csv_string("x", &sim.x_hidden))?;

    RunManifest {
        subcommand: "simulate".into(),
        library_version: version(),
        seed: Some(args.seed),
        inputs: vec![path_str(&args.scenario)],
        outputs: vec![path_str(&data_path), path_str(&sidecar_path)],
        config: json!({ "scenario": scenario, "n": scenario.n }),
        resolved_args: vec![
            "simulate".into(),
            "--scenario".into(),
            path_str(&args.scenario),
            "--seed".into(),
            args.seed.to_string(),
            "--out".into(),
            path_str(out),
        ],
    }
    .write(&manifest_path)?;
    Ok(())
}

fn parse_n_list(spec: &str) -> Result<Vec<usize>, CliError> {
    let ns: Result<Vec<usize>, _> = spec.split(',').map(|s| s.trim().parse()).collect();
    let ns = ns.map_err(|_| usage(format!("bad --n-list {spec:?}")))?;
    if ns.is_empty() {
        return Err(usage("--n-list must not be empty"));
    }
    Ok(ns)
}

pub fn benchmark(args: &BenchmarkArgs) -> CliResult {
    let cfg = args.flags.to_config()?;
    let scenario = load_scenario(&args.scenario)?;
    let ns = parse_n_list(&args.n_list)?;
    let name = args
        .scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());

    let mut csv = String::from("scenario,target,n,m_or_adaptive,mise,se\n");
    let mut summary_targets = serde_json::Map::new();
    let mut gate_failures: Vec<String> = Vec::new();

    for target in [Target::Density, Target::Ell, Target::Regression] {
        let mut adaptive_points: Vec<(f64, f64)> = Vec::new();
        let mut per_n = Vec::new();
        for &n in &ns {
            let mut sc = scenario.clone();
            sc.n = n;
            let (adaptive_mise, adaptive_se) = match target {
                Target::Regression => {
                    let report =
                        mise(&sc, &cfg, target, args.reps, args.seed).map_err(CliError::from)?;
                    (report.mise, report.se)
                }
                _ => {
                    let curve = oracle_curve(&sc, &cfg, target, args.reps, args.seed)
                        .map_err(CliError::from)?;
                    for &(m, _, m_mise, m_se) in &curve.per_model {
                        csv.push_str(&format!(
                            "{name},{},{n},{m},{},{}\n",
                            target.name(),
                            format_f64(m_mise),
                            format_f64(m_se)
                        ));
                    }
                    (curve.adaptive_mise, curve.adaptive_se)
                }
            };
            csv.push_str(&format!(
                "{name},{},{n},adaptive,{},{}\n",
                target.name(),
                format_f64(adaptive_mise),
                format_f64(adaptive_se)
            ));
            adaptive_points.push((n as f64, adaptive_mise));
            per_n.push(json!({"n": n, "adaptive_mise": adaptive_mise, "adaptive_se": adaptive_se}));
        }

        let slope: Option<SlopeFit> = if ns.len() >= 3 {
            Some(rate_slope(&adaptive_points).map_err(CliError::from)?)
        } else {
            None
        };
        let predicted = predicted_rate(&scenario, target).ok();

        if args.gate {
            for w in adaptive_points.windows(2) {
                if !(w[1].1 < w[0].1) {
                    gate_failures.push(format!(
                        "{}: adaptive MISE not decreasing from n={} to n={}",
                        target.name(),
                        w[0].0,
                        w[1].0
                    ));
                }
            }
            if let Some(s) = &slope {
                if s.slope >= 0.0 {
                    gate_failures.push(format!(
                        "{}: fitted slope {} is nonnegative",
                        target.name(),
                        s.slope
                    ));
                }
            }
        }

        summary_targets.insert(
            target.name().into(),
            json!({
                "per_n": per_n,
                "predicted_rate": predicted,
                "fitted_slope": slope.map(|s| json!({
                    "slope": s.slope,
                    "intercept": s.intercept,
                    "residual_ss": s.residual_ss,
                })),
                "slope_note": if ns.len() >= 3 { serde_json::Value::Null } else { json!("insufficient n points") },
            }),
        );
    }

    let out = &args.out;
    let csv_path = out.join("benchmark.csv");
    let summary_path = out.join("summary.json");
    let manifest_path = out.join("manifest.json");
    write_atomic(&csv_path, &csv)?;
    let mut summary = serde_json::to_string_pretty(&json!({
        "scenario": name,
        "n_list": ns,
        "reps": args.reps,
        "seed": args.seed,
        "targets": summary_targets,
        "gate": args.gate,
        "gate_failures": gate_failures,
    }))
    .expect("summary serializes");
    summary.push('\n');
    write_atomic(&summary_path, &summary)?;

    let mut resolved_args = vec![
        "benchmark".to_string(),
        "--scenario".into(),
        path_str(&args.scenario),
        "--n-list".into(),
        ns.iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(","),
        "--reps".into(),
        args.reps.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--out".into(),
        path_str(out),
    ];
    if args.gate {
        resolved_args.push("--gate".into());
    }
    resolved_args.extend(config_args(&cfg));
    RunManifest {
        subcommand: "benchmark".into(),
        library_version: version(),
        seed: Some(args.seed),
        inputs: vec![path_str(&args.scenario)],
        outputs: vec![path_str(&csv_path), path_str(&summary_path)],
        config: json!({
            "scenario": scenario,
            "estimator": ResolvedConfig::from_config(&cfg),
            "n_list": ns,
            "reps": args.reps,
        }),
        resolved_args,
    }
    .write(&manifest_path)?;

    if !gate_failures.is_empty() {
        return Err(CliError::Gate(gate_failures.join("; ")));
    }
    Ok(())
}

pub fn calibrate(args: &CalibrateArgs) -> CliResult {
    let base_cfg = args.flags.to_config()?;
    let scenario = load_scenario(&args.scenario)?;
    let grid: Result<Vec<f64>, _> = args
        .kappa_grid
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect();
    let grid = grid.map_err(|_| usage(format!("bad --kappa-grid {:?}", args.kappa_grid)))?;
    if grid.is_empty() {
        return Err(usage("--kappa-grid must not be empty"));
    }
    if let Some(bad) = grid.iter().find(|k| !(**k > 0.0)) {
        return Err(usage(format!("penalty constant must be positive, got {bad}")));
    }

    let mut rows = Vec::new();
    let mut csv = String::from("kappa,mise_g,se_g,mise_ell,se_ell\n");
    for &k in &grid {
        let mut cfg_g = base_cfg.clone();
        cfg_g.kappa = k;
        let rg = mise(&scenario, &cfg_g, Target::Density, args.reps, args.seed)
            .map_err(CliError::from)?;
        let mut cfg_l = base_cfg.clone();
        cfg_l.kappa_prime = k;
        let rl =
            mise(&scenario, &cfg_l, Target::Ell, args.reps, args.seed).map_err(CliError::from)?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            format_f64(k),
            format_f64(rg.mise),
            format_f64(rg.se),
            format_f64(rl.mise),
            format_f64(rl.se)
        ));
        rows.push((k, rg.mise, rg.se, rl.mise, rl.se));
    }

    type Row = (f64, f64, f64, f64, f64);
    let argmin = |pick: &dyn Fn(&Row) -> f64| {
        rows.iter()
            .min_by(|a, b| pick(a).total_cmp(&pick(b)))
            .map(|r| r.0)
            .expect("nonempty grid")
    };
    let flat = |pick: &dyn Fn(&Row) -> f64| {
        let lo = rows.iter().map(pick).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(pick).fold(f64::NEG_INFINITY, f64::max);
        lo > 0.0 && (hi - lo) / lo < 0.10
    };
    let rec_kappa = argmin(&|r| r.1);
    let rec_kappa_prime = argmin(&|r| r.3);
    let flat_g = flat(&|r| r.1);
    let flat_ell = flat(&|r| r.3);
    if flat_g {
        eprintln!("warning: density MISE varies < 10% across the kappa grid; recommendation is weakly identified");
    }
    if flat_ell {
        eprintln!("warning: numerator MISE varies < 10% across the kappa grid; recommendation is weakly identified");
    }

    let out = &args.out;
    let csv_path = out.join("calibration.csv");
    let summary_path = out.join("summary.json");
    let manifest_path = out.join("manifest.json");
    write_atomic(&csv_path, &csv)?;
    let mut summary = serde_json::to_string_pretty(&json!({
        "kappa_grid": grid,
        "recommended_kappa": rec_kappa,
        "recommended_kappa_prime": rec_kappa_prime,
        "flat_kappa": flat_g,
        "flat_kappa_prime": flat_ell,
        "reps": args.reps,
        "seed": args.seed,
    }))
    .expect("summary serializes");
    summary.push('\n');
    write_atomic(&summary_path, &summary)?;

    let mut resolved_args = vec![
        "calibrate".to_string(),
        "--scenario".into(),
        path_str(&args.scenario),
        "--kappa-grid".into(),
        grid.iter().map(|k| format_f64(*k)).collect::<Vec<_>>().join(","),
        "--reps".into(),
        args.reps.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--out".into(),
        path_str(out),
    ];
    resolved_args.extend(config_args(&base_cfg));
    RunManifest {
        subcommand: "calibrate".into(),
        library_version: version(),
        seed: Some(args.seed),
        inputs: vec![path_str(&args.scenario)],
        outputs: vec![path_str(&csv_path), path_str(&summary_path)],
        config: json!({
            "scenario": scenario,
            "estimator": ResolvedConfig::from_config(&base_cfg),
            "kappa_grid": grid,
            "reps": args.reps,
        }),
        resolved_args,
    }
    .write(&manifest_path)?;
    Ok(())
}
