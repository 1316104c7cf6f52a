//! Run manifests: every subcommand writes one next to its outputs with all
//! defaults materialized, so a run can be reproduced from the manifest alone.

use eivreg::csvio::write_atomic;
use eivreg::quad::QuadRule;
use eivreg::select::{EstimatorConfig, KnRule};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
pub struct ResolvedConfig {
    pub kn_rule: String,
    pub quad_nodes: usize,
    pub quad_rule: String,
    pub kappa: f64,
    pub kappa_prime: f64,
    pub trim_exponent: f64,
    pub dim_step: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
}

impl ResolvedConfig {
    pub fn from_config(cfg: &EstimatorConfig) -> Self {
        Self {
            kn_rule: match cfg.kn {
                KnRule::TheoryExact => "theory-exact".to_string(),
                KnRule::Capped(c) => format!("capped:{c}"),
                KnRule::Fixed(k) => format!("fixed:{k}"),
            },
            quad_nodes: cfg.quad.nodes,
            quad_rule: match cfg.quad.rule {
                QuadRule::GaussLegendre => "gauss-legendre".into(),
                QuadRule::UniformTrapezoid => "uniform-trapezoid".into(),
            },
            kappa: cfg.kappa,
            kappa_prime: cfg.kappa_prime,
            trim_exponent: cfg.trim_exponent,
            dim_step: cfg.dim_step,
            grid_lo: cfg.eval_region.lo,
            grid_hi: cfg.eval_region.hi,
            grid_points: cfg.eval_region.points,
        }
    }
}

#[derive(Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub library_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
    /// Full argument vector that reproduces this run.
    pub resolved_args: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> eivreg::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, &text)
    }
}

pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}
