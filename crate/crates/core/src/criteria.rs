//! Explicit stability tests for `(x(t) - a(t) x(g(t)))' = -b(t) x(h(t))`.
//!
//! Each check returns a [`CriterionVerdict`] with the two sides of its
//! decisive strict inequality. `margin = rhs - lhs`; an applicable test is
//! satisfied exactly when the margin is positive. Tests parameterized by
//! `alpha` in `[0, 1]` carry the `alpha` they were evaluated at.
//!
//! Lag scales:
//!
//! * `tau0 = (1 - |a|) / (e |b|)` gates the positive-coefficient tests,
//! * `tau_bar = (1 - |a+|) / (e |b|)` gates the sign-changing test,
//! * `tilde_tau0 = (1 - |a|) / e` gates the integral (unbounded delay) test.

use std::f64::consts::E;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::tol_le;
use crate::params::{Bound, Field, IntegralSummary, ParameterSummary, Provenance};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CriterionError {
    #[error("lim (t - h(t)) is not supplied; it can only come from an analytic override")]
    MissingLimit,
    #[error("a is not constant: sup |a| = {norm_a}, inf a = {inf_a}")]
    NotConstant { norm_a: f64, inf_a: f64 },
    #[error("the retarded term is delayed: tau = {0} > 0")]
    NotNonDelayed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionId {
    Theorem1,
    CorollaryMainA,
    CorollaryMainB,
    Corollary3,
    Corollary1,
    Corollary2,
    Theorem2,
    Corollary5A,
    Corollary5B,
    Theorem2Remark,
    Theorem3,
    PropositionYu,
    PropositionTangZou,
}

impl CriterionId {
    pub fn name(self) -> &'static str {
        match self {
            CriterionId::Theorem1 => "theorem-1",
            CriterionId::CorollaryMainA => "corollary-main-a",
            CriterionId::CorollaryMainB => "corollary-main-b",
            CriterionId::Corollary3 => "corollary-3",
            CriterionId::Corollary1 => "corollary-1",
            CriterionId::Corollary2 => "corollary-2",
            CriterionId::Theorem2 => "theorem-2",
            CriterionId::Corollary5A => "corollary-5-a",
            CriterionId::Corollary5B => "corollary-5-b",
            CriterionId::Theorem2Remark => "theorem-2-remark",
            CriterionId::Theorem3 => "theorem-3",
            CriterionId::PropositionYu => "proposition-yu",
            CriterionId::PropositionTangZou => "proposition-tang-zou",
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityKind {
    UniformExponential,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    /// Every bound the test used is an analytic override.
    Certified,
    /// At least one bound is a grid estimate.
    NumericallySupported,
}

impl Certification {
    fn from_flag(all_analytic: bool) -> Self {
        if all_analytic {
            Certification::Certified
        } else {
            Certification::NumericallySupported
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub criterion: CriterionId,
    pub applicable: bool,
    pub satisfied: bool,
    pub margin: f64,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(rename = "alpha")]
    pub witness_alpha: Option<f64>,
    #[serde(rename = "kind")]
    pub stability_kind: StabilityKind,
    pub certification: Certification,
    /// Why a test is not applicable comes first, then any other remarks.
    pub notes: Vec<String>,
}

impl CriterionVerdict {
    fn new(
        criterion: CriterionId,
        gate: Result<(), String>,
        lhs: f64,
        rhs: f64,
        alpha: Option<f64>,
        stability_kind: StabilityKind,
        certification: Certification,
    ) -> Self {
        let margin = rhs - lhs;
        let applicable = gate.is_ok();
        CriterionVerdict {
            criterion,
            applicable,
            satisfied: applicable && margin > 0.0,
            margin,
            lhs,
            rhs,
            witness_alpha: alpha,
            stability_kind,
            certification,
            notes: gate.err().into_iter().collect(),
        }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

/// A subinterval of `[0, 1]` with open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
    pub empty: bool,
}

impl AlphaInterval {
    pub const EMPTY: AlphaInterval = AlphaInterval {
        lower: 0.0,
        upper: 0.0,
        lower_open: true,
        upper_open: true,
        empty: true,
    };

    /// Intersects `{lo_raw < or <= alpha < or <= hi_raw}` with `[0, 1]`.
    fn clipped(lo_raw: f64, lo_open: bool, hi_raw: f64, hi_open: bool) -> Self {
        let (lower, lower_open) = if lo_raw < 0.0 { (0.0, false) } else { (lo_raw, lo_open) };
        let (upper, upper_open) = if hi_raw > 1.0 { (1.0, false) } else { (hi_raw, hi_open) };
        let empty = !(lower < upper || (lower == upper && !lower_open && !upper_open));
        if empty {
            return AlphaInterval::EMPTY;
        }
        AlphaInterval {
            lower,
            upper,
            lower_open,
            upper_open,
            empty,
        }
    }

    pub fn contains(&self, alpha: f64) -> bool {
        if self.empty {
            return false;
        }
        let above = if self.lower_open { alpha > self.lower } else { alpha >= self.lower };
        let below = if self.upper_open { alpha < self.upper } else { alpha <= self.upper };
        above && below
    }

    pub fn midpoint(&self) -> Option<f64> {
        (!self.empty).then_some(0.5 * (self.lower + self.upper))
    }
}

impl fmt::Display for AlphaInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return f.write_str("empty");
        }
        write!(
            f,
            "{}{:.6}, {:.6}{}",
            if self.lower_open { '(' } else { '[' },
            self.lower,
            self.upper,
            if self.upper_open { ')' } else { ']' }
        )
    }
}

const THEOREM1_FIELDS: &[Field] = &[
    Field::NormA,
    Field::InfA,
    Field::NormB,
    Field::Sigma,
    Field::Tau,
    Field::Delta,
];
const THEOREM2_FIELDS: &[Field] = &[
    Field::NormA,
    Field::NormAPlus,
    Field::NormAMinus,
    Field::NormB,
    Field::Sigma,
    Field::Tau,
    Field::Delta,
];
const COROLLARY3_FIELDS: &[Field] = &[
    Field::NormA,
    Field::InfA,
    Field::NormB,
    Field::Sigma,
    Field::LimitTau,
];
const THEOREM3_FIELDS: &[Field] = &[
    Field::NormA,
    Field::InfA,
    Field::TildeDelta,
    Field::TildeTau,
    Field::TildeSigma,
];
const PROPOSITION_FIELDS: &[Field] = &[
    Field::NormA,
    Field::Sigma,
    Field::SigmaLower,
    Field::Tau,
    Field::Delta,
];

fn alpha_gate(alpha: f64) -> Result<(), String> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(format!("alpha = {alpha} is outside [0, 1]"))
    }
}

fn positive_a_gate(s: &ParameterSummary) -> Result<(), String> {
    if s.inf_a > 0.0 {
        Ok(())
    } else {
        Err(format!("a(t) >= a0 > 0 fails (inf a = {})", s.inf_a))
    }
}

/// `(1 - |a|) / (e |b|)`.
pub fn tau0(s: &ParameterSummary) -> f64 {
    (1.0 - s.norm_a) / (E * s.norm_b)
}

/// `(1 - |a+|) / (e |b|)`.
pub fn tau_bar(s: &ParameterSummary) -> f64 {
    (1.0 - s.norm_a_plus) / (E * s.norm_b)
}

/// Neutral contribution `sigma |a| |b| (1 - a0) / (1 - |a|)^2`.
fn neutral_term(s: &ParameterSummary) -> f64 {
    s.sigma * s.norm_a * s.norm_b * (1.0 - s.inf_a) / (1.0 - s.norm_a).powi(2)
}

/// Left side of the positive-coefficient test:
/// `tau |b| + sigma |a| |b| (1 - a0) / (1 - |a|)^2`.
pub fn theorem1_lhs(s: &ParameterSummary) -> f64 {
    s.tau * s.norm_b + neutral_term(s)
}

/// `(1 - |a|)(1 + alpha / e)`.
pub fn theorem1_rhs(s: &ParameterSummary, alpha: f64) -> f64 {
    (1.0 - s.norm_a) * (1.0 + alpha / E)
}

/// Positive neutral coefficient, bounded delays, gate `alpha tau0 <= delta`.
pub fn check_theorem1(s: &ParameterSummary, alpha: f64) -> CriterionVerdict {
    let gate = alpha_gate(alpha).and_then(|_| positive_a_gate(s)).and_then(|_| {
        if alpha * tau0(s) <= s.delta {
            Ok(())
        } else {
            Err(format!(
                "alpha tau0 <= delta fails ({} > {})",
                alpha * tau0(s),
                s.delta
            ))
        }
    });
    CriterionVerdict::new(
        CriterionId::Theorem1,
        gate,
        theorem1_lhs(s),
        theorem1_rhs(s, alpha),
        Some(alpha),
        StabilityKind::UniformExponential,
        Certification::from_flag(s.all_analytic(THEOREM1_FIELDS)),
    )
}

/// All `alpha` in `[0, 1]` for which [`check_theorem1`] is satisfied.
///
/// The strict main inequality gives an open lower end
/// `e (lhs / (1 - |a|) - 1)`; the gate gives a closed upper end
/// `delta / tau0`.
pub fn alpha_interval_theorem1(s: &ParameterSummary) -> AlphaInterval {
    if s.inf_a <= 0.0 {
        return AlphaInterval::EMPTY;
    }
    let lo = E * (theorem1_lhs(s) / (1.0 - s.norm_a) - 1.0);
    let hi = s.delta / tau0(s);
    AlphaInterval::clipped(lo, true, hi, false)
}

/// Theorem 1 at `alpha = 1` (gate `tau0 <= delta`) and at `alpha = 0`.
pub fn check_corollary_main(s: &ParameterSummary) -> (CriterionVerdict, CriterionVerdict) {
    let relabel = |mut v: CriterionVerdict, id| {
        v.criterion = id;
        v.witness_alpha = None;
        if let Some(n) = v.notes.first_mut() {
            *n = n.replace("alpha tau0 <= delta", "tau0 <= delta");
        }
        v
    };
    (
        relabel(check_theorem1(s, 1.0), CriterionId::CorollaryMainA),
        relabel(check_theorem1(s, 0.0), CriterionId::CorollaryMainB),
    )
}

/// Raw bounds of the two-sided limit-delay condition, before clipping to
/// `[0, 1]`: `alpha > lo` from the right inequality, `alpha < hi` from the
/// left one.
fn corollary3_raw(s: &ParameterSummary, tau: f64) -> (f64, f64) {
    let c = 1.0 - s.norm_a;
    let lo = E * ((tau * s.norm_b + neutral_term(s)) / c - 1.0);
    let hi = E * tau * s.norm_b / c;
    (lo, hi)
}

pub fn alpha_interval_corollary3(s: &ParameterSummary) -> Result<AlphaInterval, CriterionError> {
    let tau = s.limit_tau.ok_or(CriterionError::MissingLimit)?;
    if s.inf_a <= 0.0 {
        return Ok(AlphaInterval::EMPTY);
    }
    let (lo, hi) = corollary3_raw(s, tau);
    Ok(AlphaInterval::clipped(lo, true, hi, true))
}

/// `alpha` that maximizes the smaller slack of the two-sided condition.
pub fn corollary3_best_alpha(s: &ParameterSummary) -> Result<f64, CriterionError> {
    let tau = s.limit_tau.ok_or(CriterionError::MissingLimit)?;
    let (lo, hi) = corollary3_raw(s, tau);
    Ok((0.5 * (lo + hi)).clamp(0.0, 1.0))
}

/// Limit-delay variant:
/// `alpha (1 - |a|)/e < tau |b| < (1 - |a|)(1 + alpha/e) - neutral term`
/// with `tau = lim (t - h(t))`.
///
/// `lhs`/`rhs` hold the right inequality; `margin` is the smaller of the
/// two slacks.
pub fn check_corollary3(s: &ParameterSummary, alpha: f64) -> Result<CriterionVerdict, CriterionError> {
    let tau = s.limit_tau.ok_or(CriterionError::MissingLimit)?;
    let gate = alpha_gate(alpha).and_then(|_| positive_a_gate(s));
    let c = 1.0 - s.norm_a;
    let middle = tau * s.norm_b;
    let lower = alpha * c / E;
    let upper = c * (1.0 + alpha / E) - neutral_term(s);
    let mut v = CriterionVerdict::new(
        CriterionId::Corollary3,
        gate,
        middle,
        upper,
        Some(alpha),
        StabilityKind::UniformExponential,
        Certification::from_flag(s.all_analytic(COROLLARY3_FIELDS)),
    );
    let left_slack = middle - lower;
    if left_slack < v.margin {
        v.margin = left_slack;
        v.satisfied = v.applicable && v.margin > 0.0;
    }
    if left_slack <= 0.0 {
        v.notes.push(format!(
            "lower bound alpha (1 - |a|)/e = {lower} < tau |b| = {middle} fails"
        ));
    }
    Ok(v)
}

/// Constant positive neutral coefficient `a`:
/// gate `alpha <= delta e |b| / (1 - a)`,
/// `tau |b| + sigma a |b| / (1 - a) < (1 - a)(1 + alpha/e)`.
pub fn check_corollary1(s: &ParameterSummary, alpha: f64) -> Result<CriterionVerdict, CriterionError> {
    if (s.norm_a - s.inf_a).abs() > 1e-12 {
        return Err(CriterionError::NotConstant {
            norm_a: s.norm_a,
            inf_a: s.inf_a,
        });
    }
    let a = s.inf_a;
    let cap = s.delta * E * s.norm_b / (1.0 - a);
    let gate = alpha_gate(alpha)
        .and_then(|_| {
            if a > 0.0 {
                Ok(())
            } else {
                Err(format!("a = {a} is not a positive constant"))
            }
        })
        .and_then(|_| {
            if tol_le(alpha, cap) {
                Ok(())
            } else {
                Err(format!("alpha <= delta e |b| / (1 - a) fails ({alpha} > {cap})"))
            }
        });
    let lhs = s.tau * s.norm_b + s.sigma * a * s.norm_b / (1.0 - a);
    let rhs = (1.0 - a) * (1.0 + alpha / E);
    Ok(CriterionVerdict::new(
        CriterionId::Corollary1,
        gate,
        lhs,
        rhs,
        Some(alpha),
        StabilityKind::UniformExponential,
        Certification::from_flag(s.all_analytic(THEOREM1_FIELDS)),
    ))
}

/// Non-delayed retarded term (`h(t) = t`):
/// `sigma |a| |b| (1 - a0) / (1 - |a|)^3 < 1`.
pub fn check_corollary2(s: &ParameterSummary) -> Result<CriterionVerdict, CriterionError> {
    if s.tau > 0.0 {
        return Err(CriterionError::NotNonDelayed(s.tau));
    }
    // a == 0 is the plain ODE x' = -b x, where the bound holds trivially.
    let gate = if s.norm_a == 0.0 { Ok(()) } else { positive_a_gate(s) };
    let lhs = s.sigma * s.norm_a * s.norm_b * (1.0 - s.inf_a) / (1.0 - s.norm_a).powi(3);
    Ok(CriterionVerdict::new(
        CriterionId::Corollary2,
        gate,
        lhs,
        1.0,
        None,
        StabilityKind::UniformExponential,
        Certification::from_flag(s.all_analytic(&[
            Field::NormA,
            Field::InfA,
            Field::NormB,
            Field::Sigma,
            Field::Tau,
        ])),
    ))
}

/// `tau |b| + sigma |a+| |b| / (1 - |a+|)^2 + |a-| |b| / (1 - |a+|)`.
pub fn theorem2_lhs(s: &ParameterSummary) -> f64 {
    let cp = 1.0 - s.norm_a_plus;
    s.tau * s.norm_b + s.sigma * s.norm_a_plus * s.norm_b / (cp * cp) + s.norm_a_minus * s.norm_b / cp
}

/// `1 - |a| + alpha (1 - |a+|) / e`.
pub fn theorem2_rhs(s: &ParameterSummary, alpha: f64) -> f64 {
    1.0 - s.norm_a + alpha * (1.0 - s.norm_a_plus) / E
}

/// Sign-changing neutral coefficient, gate `alpha tau_bar <= delta`.
pub fn check_theorem2(s: &ParameterSummary, alpha: f64) -> CriterionVerdict {
    let gate = alpha_gate(alpha).and_then(|_| {
        let lag = alpha * tau_bar(s);
        if lag <= s.delta {
            Ok(())
        } else {
            Err(format!("alpha tau_bar <= delta fails ({lag} > {})", s.delta))
        }
    });
    CriterionVerdict::new(
        CriterionId::Theorem2,
        gate,
        theorem2_lhs(s),
        theorem2_rhs(s, alpha),
        Some(alpha),
        StabilityKind::UniformExponential,
        Certification::from_flag(s.all_analytic(THEOREM2_FIELDS)),
    )
}

/// `alpha` for which [`check_theorem2`] is satisfied, clipped to `[0, 1]`.
pub fn alpha_interval_theorem2(s: &ParameterSummary) -> AlphaInterval {
    let lo = E * (theorem2_lhs(s) - (1.0 - s.norm_a)) / (1.0 - s.norm_a_plus);
    let hi = s.delta / tau_bar(s);
    AlphaInterval::clipped(lo, true, hi, false)
}

/// Theorem 2 at `alpha = 1` with the strict gate `tau_bar < delta`, and at
/// `alpha = 0`.
pub fn check_corollary5(s: &ParameterSummary) -> (CriterionVerdict, CriterionVerdict) {
    let mut a = check_theorem2(s, 1.0);
    a.criterion = CriterionId::Corollary5A;
    a.witness_alpha = None;
    let tb = tau_bar(s);
    a.notes.clear();
    if tb < s.delta {
        a.applicable = true;
    } else {
        a.applicable = false;
        a.notes.push(format!("tau_bar < delta fails ({tb} >= {})", s.delta));
    }
    a.satisfied = a.applicable && a.margin > 0.0;
    let mut b = check_theorem2(s, 0.0);
    b.criterion = CriterionId::Corollary5B;
    b.witness_alpha = None;
    (a, b)
}

/// Theorem 2 when `|a| = |a+|`, with the right side written
/// `(1 - |a|)(1 + alpha/e)`.
pub fn check_theorem2_remark(s: &ParameterSummary, alpha: f64) -> CriterionVerdict {
    let c = 1.0 - s.norm_a;
    let lhs = s.tau * s.norm_b + s.sigma * s.norm_a * s.norm_b / (c * c) + s.norm_a_minus * s.norm_b / c;
    let gate = alpha_gate(alpha)
        .and_then(|_| {
            if (s.norm_a - s.norm_a_plus).abs() <= 1e-12 {
                Ok(())
            } else {
                Err(format!(
                    "|a| = |a+| fails ({} != {})",
                    s.norm_a, s.norm_a_plus
                ))
            }
        })
        .and_then(|_| {
            let lag = alpha * tau_bar(s);
            if lag <= s.delta {
                Ok(())
            } else {
                Err(format!("alpha tau_bar <= delta fails ({lag} > {})", s.delta))
            }
        });
    CriterionVerdict::new(
        CriterionId::Theorem2Remark,
        gate,
        lhs,
        c * (1.0 + alpha / E),
        Some(alpha),
        StabilityKind::UniformExponential,
        Certification::from_flag(s.all_analytic(THEOREM2_FIELDS)),
    )
}

/// `tilde_tau + tilde_sigma |a| (1 - a0) / (1 - |a|)^2`.
pub fn theorem3_lhs(i: &IntegralSummary) -> f64 {
    i.tilde_tau + i.tilde_sigma * i.norm_a * (1.0 - i.inf_a) / (1.0 - i.norm_a).powi(2)
}

/// Integral (time-changed) form for unbounded delays; concludes only
/// asymptotic stability. Gate `alpha tilde_tau0 <= tilde_delta`.
pub fn check_theorem3(i: &IntegralSummary, alpha: f64) -> CriterionVerdict {
    let gate = if !(alpha > 0.0 && alpha <= 1.0) {
        Err(format!("alpha = {alpha} is outside (0, 1]"))
    } else if i.inf_a <= 0.0 {
        Err(format!("a(t) >= a0 > 0 fails (inf a = {})", i.inf_a))
    } else if alpha * i.tilde_tau0 > i.tilde_delta {
        Err(format!(
            "alpha tilde_tau0 <= tilde_delta fails ({} > {})",
            alpha * i.tilde_tau0,
            i.tilde_delta
        ))
    } else {
        Ok(())
    };
    CriterionVerdict::new(
        CriterionId::Theorem3,
        gate,
        theorem3_lhs(i),
        (1.0 - i.norm_a) * (1.0 + alpha / E),
        Some(alpha),
        StabilityKind::Asymptotic,
        Certification::from_flag(i.all_analytic(THEOREM3_FIELDS)),
    )
    .note("assumed, not verified: int b = infinity and b != 0 almost everywhere")
}

/// `3/2 - 2 A0 (2 - A0)`.
pub fn yu_threshold(a0: f64) -> f64 {
    1.5 - 2.0 * a0 * (2.0 - a0)
}

/// `3/2 - 2 A0` for `A0 < 1/4`, `sqrt(2 (1 - 2 A0))` for `1/4 <= A0 < 1/2`.
pub fn tang_zou_threshold(a0: f64) -> Option<f64> {
    if !(0.0..0.5).contains(&a0) {
        None
    } else if a0 < 0.25 {
        Some(1.5 - 2.0 * a0)
    } else {
        Some((2.0 * (1.0 - 2.0 * a0)).sqrt())
    }
}

fn constant_delay_gate(s: &ParameterSummary) -> Result<(), String> {
    if s.constant_delays() {
        Ok(())
    } else {
        Err("requires constant delays".into())
    }
}

fn proposition_cert(s: &ParameterSummary, limsup: Bound) -> Certification {
    Certification::from_flag(
        s.all_analytic(PROPOSITION_FIELDS) && limsup.provenance == Provenance::AnalyticOverride,
    )
}

/// Baseline: `limsup int_{t-tau}^t b < 3/2 - 2 A0 (2 - A0)`.
pub fn check_prop_yu(s: &ParameterSummary, limsup_int_b: Bound) -> CriterionVerdict {
    let threshold = yu_threshold(s.norm_a);
    let gate = constant_delay_gate(s).and_then(|_| {
        if threshold > 0.0 {
            Ok(())
        } else {
            Err(format!("threshold 3/2 - 2 A0 (2 - A0) = {threshold} is not positive"))
        }
    });
    CriterionVerdict::new(
        CriterionId::PropositionYu,
        gate,
        limsup_int_b.value,
        threshold,
        None,
        StabilityKind::Asymptotic,
        proposition_cert(s, limsup_int_b),
    )
}

/// Baseline with the two cases in `A0 < 1/2`.
pub fn check_prop_tang_zou(s: &ParameterSummary, limsup_int_b: Bound) -> CriterionVerdict {
    let threshold = tang_zou_threshold(s.norm_a);
    let gate = constant_delay_gate(s).and_then(|_| match threshold {
        Some(_) => Ok(()),
        None => Err(format!("requires A0 < 1/2 (A0 = {})", s.norm_a)),
    });
    let v = CriterionVerdict::new(
        CriterionId::PropositionTangZou,
        gate,
        limsup_int_b.value,
        threshold.unwrap_or(f64::NAN),
        None,
        StabilityKind::Asymptotic,
        proposition_cert(s, limsup_int_b),
    );
    if threshold.is_none() {
        // keep JSON finite
        CriterionVerdict {
            rhs: 0.0,
            margin: -limsup_int_b.value,
            ..v
        }
    } else {
        let case = if s.norm_a < 0.25 { "case a) A0 < 1/4" } else { "case b) 1/4 <= A0 < 1/2" };
        v.note(case)
    }
}

/// How α-parameterized tests pick their `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaChoice {
    /// The `alpha` with the largest margin allowed by the gate.
    Auto,
    Fixed(f64),
}

fn gate_optimum(delta: f64, lag: f64) -> f64 {
    if lag > 0.0 {
        (delta / lag).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Runs every test that can be evaluated on the given summaries, sorted
/// satisfied-first and then by decreasing margin.
///
/// Tests whose hypotheses cannot even be stated (no limit delay, non-constant
/// `a`, delayed retarded term, no integral summary) are reported as not
/// applicable with the reason.
pub fn best_verdict(
    s: &ParameterSummary,
    integral: Option<&IntegralSummary>,
    limsup_int_b: Option<Bound>,
    alpha: AlphaChoice,
) -> Vec<CriterionVerdict> {
    let pick = |auto: f64| match alpha {
        AlphaChoice::Auto => auto,
        AlphaChoice::Fixed(a) => a,
    };
    let missing = |id: CriterionId, kind: StabilityKind, why: String| CriterionVerdict {
        criterion: id,
        applicable: false,
        satisfied: false,
        margin: 0.0,
        lhs: 0.0,
        rhs: 0.0,
        witness_alpha: None,
        stability_kind: kind,
        certification: Certification::NumericallySupported,
        notes: vec![why],
    };
    let ue = StabilityKind::UniformExponential;

    let mut out = Vec::new();
    out.push(check_theorem1(s, pick(gate_optimum(s.delta, tau0(s)))));
    let (ma, mb) = check_corollary_main(s);
    out.push(ma);
    out.push(mb);
    out.push(
        corollary3_best_alpha(s)
            .and_then(|a| check_corollary3(s, pick(a)))
            .unwrap_or_else(|e| missing(CriterionId::Corollary3, ue, e.to_string())),
    );
    out.push(
        check_corollary1(s, pick(gate_optimum(s.delta, tau0(s))))
            .unwrap_or_else(|e| missing(CriterionId::Corollary1, ue, e.to_string())),
    );
    out.push(check_corollary2(s).unwrap_or_else(|e| missing(CriterionId::Corollary2, ue, e.to_string())));
    let alpha2 = pick(gate_optimum(s.delta, tau_bar(s)));
    out.push(check_theorem2(s, alpha2));
    let (ca, cb) = check_corollary5(s);
    out.push(ca);
    out.push(cb);
    out.push(check_theorem2_remark(s, alpha2));
    out.push(match integral {
        Some(i) => {
            let auto = if i.tilde_tau0 > 0.0 { (i.tilde_delta / i.tilde_tau0).min(1.0) } else { 1.0 };
            check_theorem3(i, pick(if auto > 0.0 { auto } else { 1.0 }))
        }
        None => missing(
            CriterionId::Theorem3,
            StabilityKind::Asymptotic,
            "no integral summary available".into(),
        ),
    });
    match limsup_int_b {
        Some(l) => {
            out.push(check_prop_yu(s, l));
            out.push(check_prop_tang_zou(s, l));
        }
        None => {
            let why = match constant_delay_gate(s) {
                Err(e) => e,
                Ok(()) => "limsup int b unavailable".into(),
            };
            for id in [CriterionId::PropositionYu, CriterionId::PropositionTangZou] {
                out.push(missing(id, StabilityKind::Asymptotic, why.clone()));
            }
        }
    }
    // Satisfied first, then the stronger conclusion, then the larger margin.
    let strength = |v: &CriterionVerdict| {
        (
            v.satisfied,
            v.stability_kind == StabilityKind::UniformExponential,
            v.certification == Certification::Certified,
        )
    };
    out.sort_by(|x, y| {
        strength(y)
            .cmp(&strength(x))
            .then(y.margin.partial_cmp(&x.margin).unwrap_or(std::cmp::Ordering::Equal))
    });
    out
}
