//! Scalar bounds consumed by the stability criteria.
//!
//! Every field is either an analytic override from the equation file or
//! an extremum over a uniform sampling grid. The provenance of each field is
//! kept so verdicts can say whether they rest on exact bounds.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::eqspec::{EquationSpec, EvalError};
use crate::grid::{sample_grid, simpson};

/// Default sampling density for grid estimates.
pub const DEFAULT_GRID_POINTS: usize = 100_000;
/// Default Simpson panels per integral.
pub const DEFAULT_PANELS: usize = 2048;
/// Default number of `t` samples for the integral bounds.
pub const DEFAULT_INTEGRAL_GRID: usize = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SummaryError {
    #[error("inf b estimate {0} is not positive")]
    NonPositiveInfB(f64),
    #[error("no sample t has {what}(t) >= t0; the integral bound is undefined")]
    NoQuadratureSamples { what: &'static str },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    NormA,
    InfA,
    NormAPlus,
    NormAMinus,
    NormB,
    InfB,
    Sigma,
    SigmaLower,
    Tau,
    Delta,
    LimitTau,
    TildeDelta,
    TildeTau,
    TildeSigma,
    LimsupIntB,
}

impl Field {
    pub fn key(self) -> &'static str {
        match self {
            Field::NormA => "norm_a",
            Field::InfA => "inf_a",
            Field::NormAPlus => "norm_a_plus",
            Field::NormAMinus => "norm_a_minus",
            Field::NormB => "norm_b",
            Field::InfB => "inf_b",
            Field::Sigma => "sigma",
            Field::SigmaLower => "sigma_lower",
            Field::Tau => "tau",
            Field::Delta => "delta",
            Field::LimitTau => "limit_tau",
            Field::TildeDelta => "tilde_delta",
            Field::TildeTau => "tilde_tau",
            Field::TildeSigma => "tilde_sigma",
            Field::LimsupIntB => "limsup_int_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    AnalyticOverride,
    GridEstimate,
}

/// A value with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub provenance: Provenance,
}

impl Bound {
    pub fn analytic(value: f64) -> Self {
        Bound {
            value,
            provenance: Provenance::AnalyticOverride,
        }
    }

    pub fn estimated(value: f64) -> Self {
        Bound {
            value,
            provenance: Provenance::GridEstimate,
        }
    }
}

/// `u+ = max(u, 0)`.
pub fn positive_part(u: f64) -> f64 {
    u.max(0.0)
}

/// `u- = max(-u, 0)`, so that `u = u+ - u-`.
pub fn negative_part(u: f64) -> f64 {
    (-u).max(0.0)
}

/// Norms, infima and delay bounds over `[t0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    /// sup |a|
    pub norm_a: f64,
    /// inf a (may be <= 0)
    pub inf_a: f64,
    pub norm_a_plus: f64,
    pub norm_a_minus: f64,
    /// sup b
    pub norm_b: f64,
    /// inf b
    pub inf_b: f64,
    /// sup (t - g(t))
    pub sigma: f64,
    /// inf (t - g(t))
    pub sigma_lower: f64,
    /// sup (t - h(t))
    pub tau: f64,
    /// inf (t - h(t))
    pub delta: f64,
    /// lim (t - h(t)); only ever an analytic override.
    pub limit_tau: Option<f64>,
    pub provenance: BTreeMap<Field, Provenance>,
}

impl ParameterSummary {
    /// A summary for an equation with `a(t) >= inf_a > 0`, all fields
    /// treated as exact.
    pub fn with_positive_a(
        norm_a: f64,
        inf_a: f64,
        norm_b: f64,
        sigma: f64,
        tau: f64,
        delta: f64,
    ) -> Self {
        let mut s = ParameterSummary {
            norm_a,
            inf_a,
            norm_a_plus: norm_a,
            norm_a_minus: 0.0,
            norm_b,
            inf_b: norm_b,
            sigma,
            sigma_lower: 0.0,
            tau,
            delta,
            limit_tau: None,
            provenance: BTreeMap::new(),
        };
        s.mark_all(Provenance::AnalyticOverride);
        s
    }

    pub fn with_limit_tau(mut self, limit: f64) -> Self {
        self.limit_tau = Some(limit);
        self.provenance.insert(Field::LimitTau, Provenance::AnalyticOverride);
        self
    }

    fn mark_all(&mut self, p: Provenance) {
        for f in [
            Field::NormA,
            Field::InfA,
            Field::NormAPlus,
            Field::NormAMinus,
            Field::NormB,
            Field::InfB,
            Field::Sigma,
            Field::SigmaLower,
            Field::Tau,
            Field::Delta,
        ] {
            self.provenance.insert(f, p);
        }
    }

    /// True if every listed field came from an analytic override.
    pub fn all_analytic(&self, fields: &[Field]) -> bool {
        fields
            .iter()
            .all(|f| self.provenance.get(f) == Some(&Provenance::AnalyticOverride))
    }

    /// Both delays constant (`t - g(t)` and `t - h(t)` do not vary).
    pub fn constant_delays(&self) -> bool {
        let same = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs());
        same(self.sigma, self.sigma_lower) && same(self.tau, self.delta)
    }
}

struct Extrema {
    norm_a: f64,
    inf_a: f64,
    plus: f64,
    minus: f64,
    norm_b: f64,
    inf_b: f64,
    sigma: f64,
    sigma_lower: f64,
    tau: f64,
    delta: f64,
}

fn grid_extrema(spec: &EquationSpec, grid_points: usize) -> Result<Extrema, EvalError> {
    let mut x = Extrema {
        norm_a: 0.0,
        inf_a: f64::INFINITY,
        plus: 0.0,
        minus: 0.0,
        norm_b: f64::NEG_INFINITY,
        inf_b: f64::INFINITY,
        sigma: f64::NEG_INFINITY,
        sigma_lower: f64::INFINITY,
        tau: f64::NEG_INFINITY,
        delta: f64::INFINITY,
    };
    for t in sample_grid(spec.t0, spec.horizon, grid_points) {
        let a = spec.a_at(t)?;
        let b = spec.b_at(t)?;
        let lag_g = t - spec.g_at(t)?;
        let lag_h = t - spec.h_at(t)?;
        x.norm_a = x.norm_a.max(a.abs());
        x.inf_a = x.inf_a.min(a);
        x.plus = x.plus.max(positive_part(a));
        x.minus = x.minus.max(negative_part(a));
        x.norm_b = x.norm_b.max(b);
        x.inf_b = x.inf_b.min(b);
        x.sigma = x.sigma.max(lag_g);
        x.sigma_lower = x.sigma_lower.min(lag_g);
        x.tau = x.tau.max(lag_h);
        x.delta = x.delta.min(lag_h);
    }
    Ok(x)
}

/// Extracts the bounds of `a`, `b` and the delays.
///
/// Overrides win over grid estimates; `limit_tau` is never estimated.
pub fn summarize(spec: &EquationSpec, grid_points: usize) -> Result<ParameterSummary, SummaryError> {
    let grid_fields = [
        Field::NormA,
        Field::InfA,
        Field::NormAPlus,
        Field::NormAMinus,
        Field::NormB,
        Field::InfB,
        Field::Sigma,
        Field::SigmaLower,
        Field::Tau,
        Field::Delta,
    ];
    let mut overrides = BTreeMap::new();
    for f in grid_fields.iter().copied().chain([Field::LimitTau]) {
        if let Some(v) = spec.override_value(f.key())? {
            overrides.insert(f, v);
        }
    }
    let need_grid = grid_fields.iter().any(|f| !overrides.contains_key(f));
    let ext = if need_grid {
        Some(grid_extrema(spec, grid_points)?)
    } else {
        None
    };

    let mut provenance = BTreeMap::new();
    let mut pick = |f: Field, est: fn(&Extrema) -> f64| -> f64 {
        match overrides.get(&f) {
            Some(v) => {
                provenance.insert(f, Provenance::AnalyticOverride);
                *v
            }
            None => {
                provenance.insert(f, Provenance::GridEstimate);
                est(ext.as_ref().expect("grid computed when a field lacks an override"))
            }
        }
    };
    let norm_a = pick(Field::NormA, |x| x.norm_a);
    let inf_a = pick(Field::InfA, |x| x.inf_a);
    let norm_a_plus = pick(Field::NormAPlus, |x| x.plus);
    let norm_a_minus = pick(Field::NormAMinus, |x| x.minus);
    let norm_b = pick(Field::NormB, |x| x.norm_b);
    let inf_b = pick(Field::InfB, |x| x.inf_b);
    let sigma = pick(Field::Sigma, |x| x.sigma);
    let sigma_lower = pick(Field::SigmaLower, |x| x.sigma_lower);
    let tau = pick(Field::Tau, |x| x.tau);
    let delta = pick(Field::Delta, |x| x.delta);
    let limit_tau = overrides.get(&Field::LimitTau).copied();
    if limit_tau.is_some() {
        provenance.insert(Field::LimitTau, Provenance::AnalyticOverride);
    }

    if inf_b <= 0.0 || inf_b.is_nan() {
        return Err(SummaryError::NonPositiveInfB(inf_b));
    }
    Ok(ParameterSummary {
        norm_a,
        inf_a,
        norm_a_plus,
        norm_a_minus,
        norm_b,
        inf_b,
        sigma,
        sigma_lower,
        tau,
        delta,
        limit_tau,
        provenance,
    })
}

/// Bounds of `int_{h(t)}^t b` and `int_{g(t)}^t b`, used when the delays
/// are unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralSummary {
    pub tilde_delta: f64,
    pub tilde_tau: f64,
    pub tilde_sigma: f64,
    /// `(1 - norm_a) / e`
    pub tilde_tau0: f64,
    pub norm_a: f64,
    pub inf_a: f64,
    pub provenance: BTreeMap<Field, Provenance>,
    pub notes: Vec<String>,
}

impl IntegralSummary {
    /// Integral bounds known exactly, e.g. for constant `b`.
    pub fn exact(tilde_delta: f64, tilde_tau: f64, tilde_sigma: f64, norm_a: f64, inf_a: f64) -> Self {
        let provenance = [
            Field::TildeDelta,
            Field::TildeTau,
            Field::TildeSigma,
            Field::NormA,
            Field::InfA,
        ]
        .into_iter()
        .map(|f| (f, Provenance::AnalyticOverride))
        .collect();
        IntegralSummary {
            tilde_delta,
            tilde_tau,
            tilde_sigma,
            tilde_tau0: (1.0 - norm_a) / E,
            norm_a,
            inf_a,
            provenance,
            notes: Vec::new(),
        }
    }

    pub fn all_analytic(&self, fields: &[Field]) -> bool {
        fields
            .iter()
            .all(|f| self.provenance.get(f) == Some(&Provenance::AnalyticOverride))
    }
}

/// Computes `int_{h(t)}^t b` and `int_{g(t)}^t b` by composite Simpson on
/// `grid_points` samples of `t` and keeps their extrema.
///
/// Samples whose lower limit falls below `t0` have no `b` there; they are
/// skipped and counted in `notes`.
pub fn integral_summary(
    spec: &EquationSpec,
    summary: &ParameterSummary,
    grid_points: usize,
    panels: usize,
) -> Result<IntegralSummary, SummaryError> {
    let ov = |f: Field| spec.override_value(f.key());
    let (ov_delta, ov_tau, ov_sigma) = (ov(Field::TildeDelta)?, ov(Field::TildeTau)?, ov(Field::TildeSigma)?);
    let mut notes = Vec::new();
    let mut provenance = BTreeMap::new();
    for f in [Field::NormA, Field::InfA] {
        if let Some(p) = summary.provenance.get(&f) {
            provenance.insert(f, *p);
        }
    }

    let integral = |lo: f64, hi: f64| simpson(|s| spec.b_at(s), lo, hi, panels);
    let need_h = ov_delta.is_none() || ov_tau.is_none();
    let need_g = ov_sigma.is_none();
    let (mut h_min, mut h_max, mut g_max) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut h_skipped, mut g_skipped) = (0usize, 0usize);
    if need_h || need_g {
        for t in sample_grid(spec.t0, spec.horizon, grid_points) {
            if need_h {
                let h = spec.h_at(t)?;
                if h < spec.t0 {
                    h_skipped += 1;
                } else {
                    let v = integral(h, t)?;
                    h_min = h_min.min(v);
                    h_max = h_max.max(v);
                }
            }
            if need_g {
                let g = spec.g_at(t)?;
                if g < spec.t0 {
                    g_skipped += 1;
                } else {
                    g_max = g_max.max(integral(g, t)?);
                }
            }
        }
    }
    if need_h && h_max == f64::NEG_INFINITY {
        return Err(SummaryError::NoQuadratureSamples { what: "h" });
    }
    if need_g && g_max == f64::NEG_INFINITY {
        return Err(SummaryError::NoQuadratureSamples { what: "g" });
    }
    if h_skipped > 0 {
        notes.push(format!("{h_skipped} samples skipped: h(t) < t0"));
    }
    if g_skipped > 0 {
        notes.push(format!("{g_skipped} samples skipped: g(t) < t0"));
    }

    let mut pick = |f: Field, ov: Option<f64>, est: f64| match ov {
        Some(v) => {
            provenance.insert(f, Provenance::AnalyticOverride);
            v
        }
        None => {
            provenance.insert(f, Provenance::GridEstimate);
            est
        }
    };
    let tilde_delta = pick(Field::TildeDelta, ov_delta, h_min);
    let tilde_tau = pick(Field::TildeTau, ov_tau, h_max);
    let tilde_sigma = pick(Field::TildeSigma, ov_sigma, g_max.max(0.0));
    Ok(IntegralSummary {
        tilde_delta,
        tilde_tau,
        tilde_sigma,
        tilde_tau0: (1.0 - summary.norm_a) / E,
        norm_a: summary.norm_a,
        inf_a: summary.inf_a,
        provenance,
        notes,
    })
}

/// `limsup int_{t-lag}^t b`, estimated as the sup over the last half of
/// the window unless the `limsup_int_b` override is present.
pub fn limsup_window_integral(
    spec: &EquationSpec,
    lag: f64,
    grid_points: usize,
    panels: usize,
) -> Result<Bound, SummaryError> {
    if let Some(v) = spec.override_value(Field::LimsupIntB.key())? {
        return Ok(Bound::analytic(v));
    }
    let start = (0.5 * (spec.t0 + spec.horizon)).max(spec.t0 + lag);
    if start >= spec.horizon {
        return Err(SummaryError::NoQuadratureSamples { what: "t - lag" });
    }
    let mut sup = f64::NEG_INFINITY;
    for t in sample_grid(start, spec.horizon, grid_points) {
        sup = sup.max(simpson(|s| spec.b_at(s), t - lag, t, panels)?);
    }
    Ok(Bound::estimated(sup))
}
