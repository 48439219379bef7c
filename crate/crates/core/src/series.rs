//! Iterated delays, the shift operator `S` and the coefficient series.
//!
//! `(S y)(t) = a(t) y(g(t))` when `g(t) >= t0` and `0` otherwise. With
//! `|a| <= A < 1` the inverse of `E - S` is the geometric series
//! `sum S^j`, truncated here with the crude tail bound `|y| A^J / (1 - A)`.
//!
//! ```text
//! B(t) = b(t) sum_j prod_{k<j} a(h(g^[k](t)))
//! ```
//!
//! uses the same truncation scaled by `|b|`. Before `t0` the factor is the
//! lower bound `a0` for [`BVariant::Full`] and `0` for
//! [`BVariant::PositivePart`], which sums `a+` instead of `a`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::eqspec::{EquationSpec, EvalError};
use crate::grid::{fmt_sig, tol_le};
use crate::params::{positive_part, ParameterSummary};

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("g^[{k}]({t}) leaves the window of the equation: {source}")]
    Domain {
        t: f64,
        k: usize,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{what} = {value} violates the bound [{lo}, {hi}]")]
    BoundViolation {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("the shift operator is not a contraction: sup |a| = {0}")]
    NotContractive(f64),
    #[error("the series needs a(t) >= a0 > 0, got inf a = {0}")]
    NonPositiveA(f64),
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Truncation certificate of a geometric operator series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationCert {
    /// Number of terms kept (`j = 0 .. terms - 1`).
    pub terms: usize,
    pub tail_bound: f64,
    pub tol: f64,
}

/// Smallest `J >= 1` with `scale * ratio^J / (1 - ratio) <= tol`.
pub fn terms_needed(scale: f64, ratio: f64, tol: f64) -> TruncationCert {
    let tail = |j: usize| {
        if ratio == 0.0 {
            0.0
        } else {
            scale * ratio.powi(j as i32) / (1.0 - ratio)
        }
    };
    let mut j = 1usize;
    if scale > 0.0 && ratio > 0.0 {
        let guess = ((tol * (1.0 - ratio) / scale).ln() / ratio.ln()).ceil();
        if guess.is_finite() && guess > 1.0 {
            j = guess as usize;
        }
        while j > 1 && tail(j - 1) <= tol {
            j -= 1;
        }
        while tail(j) > tol {
            j += 1;
        }
    }
    TruncationCert {
        terms: j,
        tail_bound: tail(j),
        tol,
    }
}

/// `g^[k](t)`; `g^[0](t) = t`.
pub fn iterated_delay(spec: &EquationSpec, t: f64, k: usize) -> Result<f64, SeriesError> {
    let mut s = t;
    for i in 0..k {
        s = spec
            .g_at(s)
            .map_err(|source| SeriesError::Domain { t, k: i + 1, source })?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainBound {
    /// `t - h(g^[n](t))`.
    pub value: f64,
    /// `delta`.
    pub lower: f64,
    /// `n sigma + tau`.
    pub upper: f64,
}

/// `t - h(g^[n](t))` with its bounds `delta <= . <= n sigma + tau`.
pub fn delay_chain_bounds(
    spec: &EquationSpec,
    summary: &ParameterSummary,
    t: f64,
    n: usize,
) -> Result<ChainBound, SeriesError> {
    let s = iterated_delay(spec, t, n)?;
    let value = t - spec.h_at(s).map_err(|source| SeriesError::Domain { t, k: n, source })?;
    let lower = summary.delta;
    let upper = n as f64 * summary.sigma + summary.tau;
    if !(tol_le(lower, value) && tol_le(value, upper)) {
        return Err(SeriesError::BoundViolation {
            what: "t - h(g^[n](t))",
            value,
            lo: lower,
            hi: upper,
        });
    }
    Ok(ChainBound { value, lower, upper })
}

/// Samples on a uniform grid with linear interpolation; zero before the
/// first node.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Self {
        assert!(step > 0.0 && !values.is_empty());
        SampledFunction { start, step, values }
    }

    pub fn from_fn(start: f64, step: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(start + step * i as f64)).collect();
        SampledFunction::new(start, step, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    /// Linear interpolation; `0` below `start`, the last value past `end`.
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.start {
            return 0.0;
        }
        let n = self.values.len();
        if n == 1 {
            return self.values[0];
        }
        let u = (t - self.start) / self.step;
        let i = (u.floor() as usize).min(n - 2);
        let w = (u - i as f64).min(1.0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SampledFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `S` restricted to a sampling grid: `a` and `g` evaluated once per node.
#[derive(Debug, Clone)]
pub struct ShiftOperator {
    t0: f64,
    start: f64,
    step: f64,
    a: Vec<f64>,
    g: Vec<f64>,
}

impl ShiftOperator {
    pub fn on_grid(spec: &EquationSpec, t0: f64, start: f64, step: f64, n: usize) -> Result<Self, SeriesError> {
        let mut a = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            let t = start + step * i as f64;
            a.push(spec.a_at(t)?);
            g.push(spec.g_at(t)?);
        }
        Ok(ShiftOperator { t0, start, step, a, g })
    }

    fn check_grid(&self, y: &SampledFunction) -> Result<(), SeriesError> {
        if y.len() != self.a.len() || y.start != self.start || y.step != self.step {
            return Err(SeriesError::Grid(format!(
                "operator has {} nodes from {} step {}, function has {} from {} step {}",
                self.a.len(),
                self.start,
                self.step,
                y.len(),
                y.start,
                y.step
            )));
        }
        Ok(())
    }

    /// `max |a(t_i)|` over nodes with `g(t_i) >= t0`.
    pub fn contraction(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.g)
            .filter(|(_, g)| **g >= self.t0)
            .fold(0.0, |m, (a, _)| m.max(a.abs()))
    }

    pub fn apply(&self, y: &SampledFunction) -> SampledFunction {
        let values = self
            .a
            .iter()
            .zip(&self.g)
            .map(|(a, g)| if *g >= self.t0 { a * y.eval(*g) } else { 0.0 })
            .collect();
        SampledFunction::new(self.start, self.step, values)
    }

    /// `(E - S)^{-1} y` by the truncated Neumann series.
    pub fn neumann_inverse(
        &self,
        y: &SampledFunction,
        tol: f64,
    ) -> Result<(SampledFunction, TruncationCert), SeriesError> {
        self.check_grid(y)?;
        let ratio = self.contraction();
        if ratio >= 1.0 {
            return Err(SeriesError::NotContractive(ratio));
        }
        let y_norm = y.sup_norm();
        let cert = terms_needed(y_norm, ratio, tol);
        let mut term = y.clone();
        let mut acc = y.values.clone();
        for _ in 1..cert.terms {
            term = self.apply(&term);
            for (s, v) in acc.iter_mut().zip(&term.values) {
                *s += v;
            }
        }
        let x = SampledFunction::new(y.start, y.step, acc);
        let bound = y_norm / (1.0 - ratio) + tol;
        let norm = x.sup_norm();
        if !tol_le(norm, bound) {
            return Err(SeriesError::BoundViolation {
                what: "|(E - S)^-1 y|",
                value: norm,
                lo: 0.0,
                hi: bound,
            });
        }
        Ok((x, cert))
    }
}

pub fn apply_s(spec: &EquationSpec, y: &SampledFunction, t0: f64) -> Result<SampledFunction, SeriesError> {
    Ok(ShiftOperator::on_grid(spec, t0, y.start, y.step, y.len())?.apply(y))
}

pub fn neumann_inverse(
    spec: &EquationSpec,
    y: &SampledFunction,
    tol: f64,
) -> Result<(SampledFunction, TruncationCert), SeriesError> {
    ShiftOperator::on_grid(spec, spec.t0, y.start, y.step, y.len())?.neumann_inverse(y, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BVariant {
    /// Sums `a`; factor `a0` before `t0`.
    Full,
    /// Sums `a+`; factor `0` before `t0`.
    PositivePart,
}

/// Partial sum `b(t) sum_{j < terms} prod_{k<j} a(h(g^[k](t)))`.
pub fn big_b_partial(
    spec: &EquationSpec,
    summary: &ParameterSummary,
    t: f64,
    terms: usize,
    variant: BVariant,
) -> Result<f64, SeriesError> {
    let before = match variant {
        BVariant::Full => summary.inf_a,
        BVariant::PositivePart => 0.0,
    };
    let factor = |s: f64| -> Result<f64, SeriesError> {
        let a = spec.a_at(s)?;
        Ok(match variant {
            BVariant::Full => a,
            BVariant::PositivePart => positive_part(a),
        })
    };
    let mut chain = Some(t);
    let mut product = 1.0;
    let mut sum = 0.0;
    for j in 0..terms {
        sum += product;
        if j + 1 == terms {
            break;
        }
        // factor k = j: a(h(g^[j](t)))
        let f = match chain {
            Some(c) => {
                let p = spec.h_at(c)?;
                let f = if p >= spec.t0 { factor(p)? } else { before };
                let next = spec.g_at(c)?;
                chain = (next >= spec.t0).then_some(next);
                f
            }
            None => before,
        };
        product *= f;
        if product == 0.0 {
            break;
        }
    }
    Ok(spec.b_at(t)? * sum)
}

/// Truncated `B(t)` (or `B_bar(t)`) with the bounds from the summary checked.
pub fn big_b(
    spec: &EquationSpec,
    summary: &ParameterSummary,
    t: f64,
    tol: f64,
    variant: BVariant,
) -> Result<(f64, TruncationCert), SeriesError> {
    let (ratio, lo, hi) = match variant {
        BVariant::Full => {
            if summary.inf_a <= 0.0 {
                return Err(SeriesError::NonPositiveA(summary.inf_a));
            }
            (
                summary.norm_a,
                summary.inf_b / (1.0 - summary.inf_a),
                summary.norm_b / (1.0 - summary.norm_a),
            )
        }
        BVariant::PositivePart => (
            summary.norm_a_plus,
            summary.inf_b,
            summary.norm_b / (1.0 - summary.norm_a_plus),
        ),
    };
    if ratio >= 1.0 {
        return Err(SeriesError::NotContractive(ratio));
    }
    let cert = terms_needed(summary.norm_b, ratio, tol);
    let value = big_b_partial(spec, summary, t, cert.terms, variant)?;
    if !(tol_le(lo, value + cert.tail_bound) && tol_le(value, hi)) {
        return Err(SeriesError::BoundViolation {
            what: "B(t)",
            value,
            lo,
            hi,
        });
    }
    Ok((value, cert))
}

/// Writes `t,B,J` rows for every `t` in `times`.
pub fn write_big_b_csv<W: Write>(
    out: W,
    spec: &EquationSpec,
    summary: &ParameterSummary,
    times: &[f64],
    tol: f64,
    variant: BVariant,
) -> Result<(), SeriesError> {
    let rows: Vec<(f64, f64, usize)> = times
        .par_iter()
        .map(|&t| big_b(spec, summary, t, tol, variant).map(|(b, c)| (t, b, c.terms)))
        .collect::<Result<_, _>>()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "B", "J"])?;
    for (t, b, j) in rows {
        w.write_record([fmt_sig(t), fmt_sig(b), j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::eqspec::Expr;
    use crate::params::summarize;

    fn constant_neutral(a: f64, g: Expr) -> EquationSpec {
        EquationSpec::new(Expr::constant(a), Expr::constant(1.0), g, Expr::lag(1.0), 0.0, 100.0)
    }

    #[test]
    fn iterated_delays() {
        let spec = corpus::ex5();
        assert_eq!(iterated_delay(&spec, 9.0, 2).unwrap(), 1.0);
        assert_eq!(iterated_delay(&spec, 9.0, 0).unwrap(), 9.0);
        assert!((iterated_delay(&spec, 9.0, 3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(iterated_delay(&spec, 9.0, 4), Err(SeriesError::Domain { k: 4, .. })));
        let spec = constant_neutral(0.5, Expr::lag(0.3));
        let v = iterated_delay(&spec, 10.0, 7).unwrap();
        assert!((10.0 - v - 7.0 * 0.3).abs() < 1e-12);
    }

    #[test]
    fn chain_bounds_example1() {
        let spec = corpus::example1();
        let s = summarize(&spec, 1000).unwrap();
        let c = delay_chain_bounds(&spec, &s, 10.0, 3).unwrap();
        assert_eq!((c.lower, c.upper), (0.14, 3.0 * 0.2 + 0.14));
        assert!(c.value >= 0.14 && c.value <= 0.74);
        let c = delay_chain_bounds(&spec, &s, 10.0, 0).unwrap();
        assert!((c.value - 0.14).abs() < 1e-12);
    }

    #[test]
    fn chain_bounds_constant_delays_are_tight() {
        let spec = EquationSpec::new(Expr::constant(0.5), Expr::constant(1.0), Expr::lag(0.3), Expr::lag(0.7), 0.0, 100.0);
        let s = ParameterSummary::with_positive_a(0.5, 0.5, 1.0, 0.3, 0.7, 0.7);
        let c = delay_chain_bounds(&spec, &s, 20.0, 4).unwrap();
        assert!((c.value - c.upper).abs() < 1e-12);
    }

    #[test]
    fn shift_of_constant() {
        let spec = constant_neutral(0.5, Expr::t());
        let y = SampledFunction::from_fn(0.0, 0.1, 11, |_| 1.0);
        let sy = apply_s(&spec, &y, 0.0).unwrap();
        assert!(sy.values.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn shift_vanishes_before_t0() {
        let spec = constant_neutral(0.5, Expr::lag(0.35));
        let y = SampledFunction::from_fn(0.0, 0.1, 21, |t| t);
        let sy = apply_s(&spec, &y, 0.0).unwrap();
        for i in 0..21 {
            let t = y.time(i);
            let want = if t - 0.35 >= 0.0 { 0.5 * (t - 0.35) } else { 0.0 };
            assert!((sy.values[i] - want).abs() < 1e-12, "t = {t}");
        }
        assert!(sy.values[..4].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn neumann_geometric() {
        let spec = constant_neutral(0.5, Expr::t());
        let y = SampledFunction::from_fn(0.0, 0.1, 11, |_| 1.0);
        let (x, cert) = neumann_inverse(&spec, &y, 1e-12).unwrap();
        assert!(x.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(0.5f64.powi(cert.terms as i32) * 2.0 <= 1e-12);
        assert!(0.5f64.powi(cert.terms as i32 - 1) * 2.0 > 1e-12);
    }

    #[test]
    fn neumann_term_count_for_point_six() {
        let oracle = |tol: f64, a: f64| ((tol * (1.0 - a)).ln() / a.ln()).ceil() as usize;
        assert_eq!(oracle(1e-12, 0.6), 56);
        assert_eq!(terms_needed(1.0, 0.6, 1e-12).terms, 56);
        let spec = constant_neutral(0.6, Expr::lag(0.2));
        let y = SampledFunction::from_fn(0.0, 0.05, 101, |t| (t * 0.7).cos());
        let (_, cert) = neumann_inverse(&spec, &y, 1e-12).unwrap();
        assert_eq!(cert.terms, 56);
    }

    #[test]
    fn neumann_is_inverse() {
        let spec = corpus::example1();
        let y = SampledFunction::from_fn(0.0, 0.01, 2001, |t| (3.0 * t).sin() + 0.2);
        let op = ShiftOperator::on_grid(&spec, 0.0, 0.0, 0.01, 2001).unwrap();
        let (x, _) = op.neumann_inverse(&y, 1e-12).unwrap();
        let sx = op.apply(&x);
        for i in 0..y.len() {
            assert!((x.values[i] - sx.values[i] - y.values[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn b_geometric() {
        let spec = constant_neutral(0.5, Expr::lag(0.3));
        let s = ParameterSummary::with_positive_a(0.5, 0.5, 1.0, 0.3, 1.0, 1.0);
        for t in [0.0, 0.5, 7.0] {
            let (b, cert) = big_b(&spec, &s, t, 1e-12, BVariant::Full).unwrap();
            assert!((b - 2.0).abs() < 1e-11, "t = {t}: {b}");
            assert!(cert.tail_bound <= 1e-12);
        }
    }

    #[test]
    fn b_band_ex2new() {
        let spec = corpus::ex2new().with_param("r", 0.1);
        let s = summarize(&spec, 1000).unwrap();
        assert!((s.inf_b - 0.08).abs() < 1e-15 && (s.norm_b - 0.1).abs() < 1e-15);
        let (b, _) = big_b(&spec, &s, 20.0, 1e-10, BVariant::Full).unwrap();
        assert!((0.08 / 0.6..=0.25).contains(&b), "{b}");
        // brute force with many more terms
        let brute = big_b_partial(&spec, &s, 20.0, 400, BVariant::Full).unwrap();
        assert!((b - brute).abs() <= 1e-10);
    }

    #[test]
    fn b_bar_without_positive_part() {
        let spec = EquationSpec::new(
            Expr::scale(-0.5, Expr::abs(Expr::sin(Expr::t()))),
            Expr::sum(vec![Expr::constant(1.0), Expr::scale(0.5, Expr::sin(Expr::t()))]),
            Expr::lag(0.3),
            Expr::lag(0.5),
            0.0,
            100.0,
        );
        let mut s = ParameterSummary::with_positive_a(0.5, -0.5, 1.5, 0.3, 0.5, 0.5);
        s.norm_a_plus = 0.0;
        s.norm_a_minus = 0.5;
        s.inf_b = 0.5;
        for t in [0.1, 3.0, 11.0] {
            let (b, cert) = big_b(&spec, &s, t, 1e-12, BVariant::PositivePart).unwrap();
            assert_eq!(b, spec.b_at(t).unwrap());
            assert_eq!(cert.terms, 1);
        }
        assert!(matches!(big_b(&spec, &s, 1.0, 1e-12, BVariant::Full), Err(SeriesError::NonPositiveA(_))));
    }

    #[test]
    fn b_csv_dump() {
        let spec = corpus::example1();
        let s = summarize(&spec, 1000).unwrap();
        let mut out = Vec::new();
        write_big_b_csv(&mut out, &spec, &s, &[1.0, 2.0], 1e-10, BVariant::Full).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,B,J");
        assert_eq!(lines.len(), 3);
        let row: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[0], 1.0);
        assert!((row[1] - 2.5).abs() <= 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn neumann_star_bound(a0 in -0.9f64..0.9, a1 in -0.09f64..0.09, w in 0.1f64..3.0,
                                  lag in 0.0f64..1.5, y0 in -2.0f64..2.0, y1 in -2.0f64..2.0) {
                let a = Expr::sum(vec![Expr::constant(a0), Expr::scale(a1, Expr::cos(Expr::scale(w, Expr::t())))]);
                let g = Expr::sum(vec![Expr::t(), Expr::constant(-lag), Expr::scale(-0.1, Expr::abs(Expr::sin(Expr::t())))]);
                let spec = EquationSpec::new(a, Expr::constant(1.0), g, Expr::t(), 0.0, 100.0);
                let y = SampledFunction::from_fn(0.0, 0.02, 301, |t| y0 + y1 * (w * t).sin());
                let op = ShiftOperator::on_grid(&spec, 0.0, 0.0, 0.02, 301).unwrap();
                let tol = 1e-10;
                let (x, _) = op.neumann_inverse(&y, tol).unwrap();
                let norm_a = a0.abs() + a1.abs();
                prop_assert!(x.sup_norm() <= y.sup_norm() / (1.0 - norm_a) + tol);
            }

            #[test]
            fn tail_certificate_is_sound(t in 0.0f64..200.0, r in 0.05f64..0.3) {
                let spec = corpus::ex2new().with_param("r", r);
                let mut s = ParameterSummary::with_positive_a(0.6, 0.4, r, 1.0, 1.0, 1.0);
                s.inf_b = 0.8 * r;
                let (b, cert) = big_b(&spec, &s, t, 1e-8, BVariant::Full).unwrap();
                let more = big_b_partial(&spec, &s, t, cert.terms + 10, BVariant::Full).unwrap();
                prop_assert!((more - b).abs() < cert.tail_bound);
            }
        }
    }
}
