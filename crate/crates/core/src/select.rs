//! Adaptive model selection and the full regression pipeline.
//!
//! For each admissible model the fitted contrast is `-sum_j a_hat[j]^2`; the
//! selected model minimizes `contrast + penalty`, ties going to the smallest
//! dimension. The regression estimate is the pointwise ratio of the selected
//! numerator and density fits, clamped to `[-a_n, a_n]` with `a_n = n^k`.

use crate::basis::{reconstruct, CoeffVector, ModelIndex};
use crate::deconv::{coeffs_pair_for, contrast_value, Dataset};
use crate::error::{Error, Result};
use crate::exec;
use crate::noise::NoiseModel;
use crate::penalty::{
    m2y, model_set, pen_ell, pen_g, ModelCollection, PenaltyParams, Purpose, DEFAULT_KAPPA,
    DEFAULT_KAPPA_PRIME,
};
use crate::quad::QuadratureSpec;

/// Rule resolving the coefficient truncation index `k_n` from the sample
/// size: `n` for density and numerator fits, `ceil(n^{3/2})` for the
/// regression pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnRule {
    /// The full truncation the risk bounds assume. Default.
    TheoryExact,
    /// `min(theory, cap)`: the documented practical switch. Coefficients with
    /// `|j|` far beyond `D_m * max|z|` are numerically negligible (sinc
    /// decay), so a generous cap changes nothing measurable while keeping the
    /// FFT sizes sane.
    Capped(usize),
    /// Explicit truncation, bypassing the rule entirely.
    Fixed(usize),
}

impl KnRule {
    pub fn resolve(&self, n: usize, regression: bool) -> usize {
        let theory = if regression {
            (n as f64).powf(1.5).ceil() as usize
        } else {
            n
        };
        match *self {
            KnRule::TheoryExact => theory,
            KnRule::Capped(cap) => theory.min(cap),
            KnRule::Fixed(k) => k,
        }
    }
}

/// Where the regression estimate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRegion {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl EvalRegion {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "evaluation region needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        if points < 2 {
            return Err(Error::InvalidParameter(
                "evaluation region needs at least 2 points".into(),
            ));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + h * i as f64).collect()
    }
}

impl Default for EvalRegion {
    fn default() -> Self {
        Self {
            lo: -2.0,
            hi: 2.0,
            points: 201,
        }
    }
}

/// Everything the estimators leave open.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub kn: KnRule,
    pub quad: QuadratureSpec,
    pub kappa: f64,
    pub kappa_prime: f64,
    /// Trim exponent `k`; the ratio is clamped at `a_n = n^k`.
    pub trim_exponent: f64,
    /// Spacing of the model dimensions, `D_m = m * dim_step`.
    pub dim_step: f64,
    pub eval_region: EvalRegion,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kn: KnRule::TheoryExact,
            quad: QuadratureSpec::default(),
            kappa: DEFAULT_KAPPA,
            kappa_prime: DEFAULT_KAPPA_PRIME,
            trim_exponent: 1.0,
            dim_step: 1.0,
            eval_region: EvalRegion::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        if !(self.kappa > 0.0) || !(self.kappa_prime > 0.0) {
            return Err(Error::InvalidParameter(
                "penalty constants must be positive".into(),
            ));
        }
        if !(self.trim_exponent > 0.0) {
            return Err(Error::InvalidParameter(
                "trim exponent must be positive".into(),
            ));
        }
        if !(self.dim_step > 0.0) || !self.dim_step.is_finite() {
            return Err(Error::InvalidParameter(
                "dim_step must be positive and finite".into(),
            ));
        }
        EvalRegion::new(self.eval_region.lo, self.eval_region.hi, self.eval_region.points)?;
        Ok(())
    }

    pub fn penalty_params(&self, noise: &NoiseModel) -> Result<PenaltyParams> {
        PenaltyParams::new(noise.clone(), self.kappa, self.kappa_prime)
    }
}

/// One row of the selection table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub m: usize,
    pub dim: f64,
    pub contrast: f64,
    pub penalty: f64,
    pub total: f64,
    pub selected: bool,
}

/// Per-model bookkeeping of a fit, plus any models dropped for numeric
/// reasons (they sit beyond the usable range for the noise at hand).
#[derive(Debug, Clone, Default)]
pub struct FitDiagnostics {
    pub rows: Vec<DiagnosticsRow>,
    pub dropped: Vec<(usize, String)>,
}

impl FitDiagnostics {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,D_m,contrast,penalty,total,selected\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.m,
                crate::csvio::format_f64(r.dim),
                crate::csvio::format_f64(r.contrast),
                crate::csvio::format_f64(r.penalty),
                crate::csvio::format_f64(r.total),
                u8::from(r.selected)
            ));
        }
        out
    }
}

/// Penalized argmin over aligned contrast/penalty tables; ties break to the
/// smallest model.
pub fn select_model(
    contrasts: &[f64],
    pens: &[f64],
    models: &ModelCollection,
) -> Result<(ModelIndex, FitDiagnostics)> {
    if models.models.is_empty() {
        return Err(Error::EmptyModelCollection);
    }
    if contrasts.len() != models.models.len() || pens.len() != models.models.len() {
        return Err(Error::MisalignedGrids);
    }
    for (i, v) in contrasts.iter().chain(pens.iter()).enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "selection table",
                index: i,
            });
        }
    }
    let mut best = 0usize;
    let mut best_total = f64::INFINITY;
    let mut rows = Vec::with_capacity(models.models.len());
    for (i, idx) in models.models.iter().enumerate() {
        let total = contrasts[i] + pens[i];
        rows.push(DiagnosticsRow {
            m: idx.m,
            dim: idx.dim,
            contrast: contrasts[i],
            penalty: pens[i],
            total,
            selected: false,
        });
        if total < best_total {
            best_total = total;
            best = i;
        }
    }
    rows[best].selected = true;
    Ok((
        models.models[best],
        FitDiagnostics {
            rows,
            dropped: Vec::new(),
        },
    ))
}

/// A selected fit: the coefficients at the chosen model plus the table it
/// was chosen from.
#[derive(Debug, Clone)]
pub struct SelectedFit {
    pub coeffs: CoeffVector,
    pub diagnostics: FitDiagnostics,
}

impl SelectedFit {
    pub fn model(&self) -> ModelIndex {
        self.coeffs.model
    }
}

/// Which coefficient target a table entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    G,
    Ell,
}

/// Full per-model fit table for one target: coefficients, contrast, penalty.
/// Shared by the adaptive fits and by the fixed-model risk curves.
pub struct ModelTable {
    pub models: ModelCollection,
    pub entries: Vec<(ModelIndex, CoeffVector, f64, f64)>,
    pub dropped: Vec<(usize, String)>,
}

fn build_table(
    data: &Dataset,
    noise: &NoiseModel,
    cfg: &EstimatorConfig,
    purpose: Purpose,
    k_n: usize,
    side: Side,
) -> Result<ModelTable> {
    let params = cfg.penalty_params(noise)?;
    let n = data.n();
    let m2 = match side {
        Side::G => 0.0,
        Side::Ell => m2y(data.y().ok_or(Error::MissingResponses)?)?,
    };
    let collection = model_set(n, noise, purpose, cfg.dim_step)?;
    let results = exec::map_indexed(collection.models.len(), |i| {
        let idx = collection.models[i];
        let pen = match side {
            Side::G => pen_g(&idx, n, &params),
            Side::Ell => pen_ell(&idx, n, &params, m2),
        }?;
        let pair = coeffs_pair_for(
            data,
            noise,
            &idx,
            k_n,
            &cfg.quad,
            side == Side::G,
            side == Side::Ell,
        )?;
        let coeffs = match side {
            Side::G => pair.0.unwrap(),
            Side::Ell => pair.1.unwrap(),
        };
        let contrast = contrast_value(&coeffs);
        Ok::<_, Error>((idx, coeffs, contrast, pen))
    });

    let mut entries = Vec::new();
    let mut dropped = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => entries.push(e),
            Err(err) => dropped.push((collection.models[i].m, err.to_string())),
        }
    }
    if entries.is_empty() {
        return Err(Error::AllModelsFailed(
            dropped
                .first()
                .map(|(_, e)| e.clone())
                .unwrap_or_else(|| "no models".into()),
        ));
    }
    let surviving = ModelCollection {
        models: entries.iter().map(|e| e.0).collect(),
        purpose,
    };
    Ok(ModelTable {
        models: surviving,
        entries,
        dropped,
    })
}

fn select_from_table(mut table: ModelTable) -> Result<SelectedFit> {
    let contrasts: Vec<f64> = table.entries.iter().map(|e| e.2).collect();
    let pens: Vec<f64> = table.entries.iter().map(|e| e.3).collect();
    let (chosen, mut diagnostics) = select_model(&contrasts, &pens, &table.models)?;
    diagnostics.dropped = std::mem::take(&mut table.dropped);
    let pos = table
        .entries
        .iter()
        .position(|e| e.0.m == chosen.m)
        .expect("selected model is in the table");
    let coeffs = table.entries.swap_remove(pos).1;
    Ok(SelectedFit {
        coeffs,
        diagnostics,
    })
}

/// Per-model table for the density target (used by the risk curves).
pub fn density_table(
    data: &Dataset,
    noise: &NoiseModel,
    cfg: &EstimatorConfig,
    purpose: Purpose,
) -> Result<ModelTable> {
    cfg.validate()?;
    let regression = purpose == Purpose::DensityForRegression;
    let k_n = cfg.kn.resolve(data.n(), regression);
    build_table(data, noise, cfg, purpose, k_n, Side::G)
}

/// Per-model table for the numerator target.
pub fn ell_table(data: &Dataset, noise: &NoiseModel, cfg: &EstimatorConfig) -> Result<ModelTable> {
    cfg.validate()?;
    let k_n = cfg.kn.resolve(data.n(), false);
    build_table(data, noise, cfg, Purpose::EllOnly, k_n, Side::Ell)
}

/// Adaptive density fit.
pub fn fit_density(
    data: &Dataset,
    noise: &NoiseModel,
    cfg: &EstimatorConfig,
    purpose: Purpose,
) -> Result<SelectedFit> {
    select_from_table(density_table(data, noise, cfg, purpose)?)
}

/// Adaptive numerator fit (responses required).
pub fn fit_ell(data: &Dataset, noise: &NoiseModel, cfg: &EstimatorConfig) -> Result<SelectedFit> {
    select_from_table(ell_table(data, noise, cfg)?)
}

/// Clamp `r` to `[-d, d]` preserving sign; zero stays unsigned.
pub fn trim(r: f64, d: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r.signum() * r.abs().min(d)
    }
}

/// Pointwise trimmed ratio of the two fits on `grid`.
///
/// A zero denominator yields `sign(numerator) * a_n`, and 0 when the
/// numerator is zero too (the limit of the trim rule).
pub fn regression_estimate(
    ell_coeffs: &CoeffVector,
    g_coeffs: &CoeffVector,
    grid: &[f64],
    a_n: f64,
) -> Vec<f64> {
    let num = reconstruct(ell_coeffs, grid);
    let den = reconstruct(g_coeffs, grid);
    num.iter()
        .zip(&den)
        .map(|(&l, &g)| {
            if g == 0.0 {
                if l == 0.0 {
                    0.0
                } else {
                    l.signum() * a_n
                }
            } else {
                trim(l / g, a_n)
            }
        })
        .collect()
}

/// Output of the full pipeline.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub m_hat_g: ModelIndex,
    pub m_hat_ell: ModelIndex,
    pub diag_g: FitDiagnostics,
    pub diag_ell: FitDiagnostics,
    pub g_coeffs: CoeffVector,
    pub ell_coeffs: CoeffVector,
    pub grid: Vec<f64>,
    pub g_tilde: Vec<f64>,
    pub ell_tilde: Vec<f64>,
    pub f_tilde: Vec<f64>,
    pub a_n: f64,
    pub k_n: usize,
}

impl FitResult {
    pub fn estimates_csv(&self) -> String {
        let mut out = String::from("x,g_tilde,ell_tilde,f_tilde\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::csvio::format_f64(self.grid[i]),
                crate::csvio::format_f64(self.g_tilde[i]),
                crate::csvio::format_f64(self.ell_tilde[i]),
                crate::csvio::format_f64(self.f_tilde[i]),
            ));
        }
        out
    }
}

/// Adaptive regression fit: density fit under the regression dimension cap,
/// numerator fit, then the trimmed ratio on the evaluation grid.
///
/// Both fits share one data pass per model where their collections overlap.
pub fn fit_regression(
    data: &Dataset,
    noise: &NoiseModel,
    cfg: &EstimatorConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let y = data.y().ok_or(Error::MissingResponses)?;
    let n = data.n();
    let params = cfg.penalty_params(noise)?;
    let m2 = m2y(y)?;
    let a_n = (n as f64).powf(cfg.trim_exponent);
    let k_n = cfg.kn.resolve(n, true);

    let g_set = model_set(n, noise, Purpose::DensityForRegression, cfg.dim_step)?;
    let l_set = model_set(n, noise, Purpose::EllOnly, cfg.dim_step)?;
    let mut union: Vec<ModelIndex> = g_set.models.clone();
    for idx in &l_set.models {
        if !union.iter().any(|u| u.m == idx.m) {
            union.push(*idx);
        }
    }
    union.sort_by_key(|idx| idx.m);

    struct PerModel {
        idx: ModelIndex,
        g: Option<std::result::Result<(CoeffVector, f64, f64), String>>,
        ell: Option<std::result::Result<(CoeffVector, f64, f64), String>>,
    }

    let in_g = |m: usize| g_set.models.iter().any(|i| i.m == m);
    let in_l = |m: usize| l_set.models.iter().any(|i| i.m == m);

    let computed = exec::map_indexed(union.len(), |ui| {
        let idx = union[ui];
        let want_g = in_g(idx.m);
        let want_l = in_l(idx.m);
        // penalties first: a model beyond the overflow edge is dropped before
        // any coefficient work
        let pen_g_res = want_g.then(|| pen_g(&idx, n, &params));
        let pen_l_res = want_l.then(|| pen_ell(&idx, n, &params, m2));
        let need_g = matches!(pen_g_res, Some(Ok(_)));
        let need_l = matches!(pen_l_res, Some(Ok(_)));
        let coeffs = if need_g || need_l {
            Some(coeffs_pair_for(data, noise, &idx, k_n, &cfg.quad, need_g, need_l))
        } else {
            None
        };
        let make = |pen: Option<Result<f64>>,
                    pick: &dyn Fn() -> Option<CoeffVector>|
         -> Option<std::result::Result<(CoeffVector, f64, f64), String>> {
            match pen? {
                Err(e) => Some(Err(e.to_string())),
                Ok(p) => match &coeffs {
                    Some(Ok(_)) => {
                        let c = pick().expect("requested side present");
                        let contrast = contrast_value(&c);
                        Some(Ok((c, contrast, p)))
                    }
                    Some(Err(e)) => Some(Err(e.to_string())),
                    None => None,
                },
            }
        };
        let g = make(pen_g_res, &|| {
            coeffs.as_ref().and_then(|c| c.as_ref().ok()).and_then(|c| c.0.clone())
        });
        let ell = make(pen_l_res, &|| {
            coeffs.as_ref().and_then(|c| c.as_ref().ok()).and_then(|c| c.1.clone())
        });
        PerModel { idx, g, ell }
    });

    let mut g_entries = Vec::new();
    let mut g_dropped = Vec::new();
    let mut l_entries = Vec::new();
    let mut l_dropped = Vec::new();
    for pm in computed {
        match pm.g {
            Some(Ok(e)) => g_entries.push((pm.idx, e)),
            Some(Err(msg)) => g_dropped.push((pm.idx.m, msg)),
            None => {}
        }
        match pm.ell {
            Some(Ok(e)) => l_entries.push((pm.idx, e)),
            Some(Err(msg)) => l_dropped.push((pm.idx.m, msg)),
            None => {}
        }
    }
    if g_entries.is_empty() {
        return Err(Error::AllModelsFailed(
            g_dropped.first().map(|d| d.1.clone()).unwrap_or_default(),
        ));
    }
    if l_entries.is_empty() {
        return Err(Error::AllModelsFailed(
            l_dropped.first().map(|d| d.1.clone()).unwrap_or_default(),
        ));
    }

    let finish = |entries: Vec<(ModelIndex, (CoeffVector, f64, f64))>,
                  dropped: Vec<(usize, String)>,
                  purpose: Purpose|
     -> Result<SelectedFit> {
        let collection = ModelCollection {
            models: entries.iter().map(|e| e.0).collect(),
            purpose,
        };
        let contrasts: Vec<f64> = entries.iter().map(|e| e.1 .1).collect();
        let pens: Vec<f64> = entries.iter().map(|e| e.1 .2).collect();
        let (chosen, mut diag) = select_model(&contrasts, &pens, &collection)?;
        diag.dropped = dropped;
        let coeffs = entries
            .into_iter()
            .find(|e| e.0.m == chosen.m)
            .expect("selected model in table")
            .1
             .0;
        Ok(SelectedFit {
            coeffs,
            diagnostics: diag,
        })
    };

    let g_fit = finish(g_entries, g_dropped, Purpose::DensityForRegression)?;
    let l_fit = finish(l_entries, l_dropped, Purpose::EllOnly)?;

    let grid = cfg.eval_region.grid();
    let g_tilde = reconstruct(&g_fit.coeffs, &grid);
    let ell_tilde = reconstruct(&l_fit.coeffs, &grid);
    let f_tilde: Vec<f64> = ell_tilde
        .iter()
        .zip(&g_tilde)
        .map(|(&l, &g)| {
            if g == 0.0 {
                if l == 0.0 {
                    0.0
                } else {
                    l.signum() * a_n
                }
            } else {
                trim(l / g, a_n)
            }
        })
        .collect();

    Ok(FitResult {
        m_hat_g: g_fit.model(),
        m_hat_ell: l_fit.model(),
        diag_g: g_fit.diagnostics,
        diag_ell: l_fit.diagnostics,
        g_coeffs: g_fit.coeffs,
        ell_coeffs: l_fit.coeffs,
        grid,
        g_tilde,
        ell_tilde,
        f_tilde,
        a_n,
        k_n,
    })
}
