//! Symbolic equation model.
//!
//! Coefficients and delay arguments of
//!
//! ```text
//! (x(t) - a(t) x(g(t)))' = -b(t) x(h(t)) + f(t)
//! ```
//!
//! are written in a small closed expression grammar ([`Expr`]). Delay
//! arguments are stored as `g(t)` and `h(t)` themselves, not as lags.
//!
//! # JSON form
//!
//! Expressions are nested arrays whose first element names the node:
//!
//! | node | form |
//! |------|------|
//! | constant | `["const", 0.5]` (a bare number is also accepted) |
//! | time variable | `["t"]` |
//! | named parameter | `["param", "r"]` |
//! | sum | `["+", e1, e2, ...]` |
//! | product | `["*", e1, e2, ...]` |
//! | quotient | `["/", num, den]` |
//! | sine / cosine / absolute value | `["sin", e]`, `["cos", e]`, `["abs", e]` |
//! | scalar multiple | `["scale", c, e]` |
//! | difference / negation (input only) | `["-", e1, e2]`, `["-", e]` |
//!
//! Difference and negation are rewritten to sums and scalar multiples on
//! input, so `Expr -> JSON -> Expr` is lossless.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::grid::{sample_grid, tol_le};

/// Parameter bindings, e.g. `r = 0.15`.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero at t = {t}")]
    DivisionByZero { t: f64 },
    #[error("t = {t} is outside the validity window [{lo}, {hi}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },
    #[error("unbound parameter `{0}`")]
    UnboundParam(String),
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad expression: {0}")]
    BadExpr(String),
    #[error("bad override `{0}`: {1}")]
    BadOverride(String, String),
    #[error("invalid window: t0 = {t0}, horizon = {horizon}")]
    InvalidWindow { t0: f64, horizon: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Expression tree for coefficients and delay arguments.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Time,
    Param(String),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Quotient(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Abs(Box<Expr>),
    Scale(f64, Box<Expr>),
}

static NO_PARAMS: Params = Params::new();

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn t() -> Self {
        Expr::Time
    }

    pub fn param(name: &str) -> Self {
        Expr::Param(name.to_owned())
    }

    pub fn sin(e: Expr) -> Self {
        Expr::Sin(Box::new(e))
    }

    pub fn cos(e: Expr) -> Self {
        Expr::Cos(Box::new(e))
    }

    pub fn abs(e: Expr) -> Self {
        Expr::Abs(Box::new(e))
    }

    pub fn scale(c: f64, e: Expr) -> Self {
        Expr::Scale(c, Box::new(e))
    }

    pub fn quotient(num: Expr, den: Expr) -> Self {
        Expr::Quotient(Box::new(num), Box::new(den))
    }

    pub fn sum(terms: Vec<Expr>) -> Self {
        Expr::Sum(terms)
    }

    pub fn product(factors: Vec<Expr>) -> Self {
        Expr::Product(factors)
    }

    /// `t - c`
    pub fn lag(c: f64) -> Self {
        Expr::sum(vec![Expr::Time, Expr::Const(-c)])
    }

    /// Evaluates without parameter bindings.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.eval_with(t, &NO_PARAMS)
    }

    pub fn eval_with(&self, t: f64, params: &Params) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Time => t,
            Expr::Param(name) => *params
                .get(name)
                .ok_or_else(|| EvalError::UnboundParam(name.clone()))?,
            Expr::Sum(terms) => {
                let mut acc = 0.0;
                for e in terms {
                    acc += e.eval_with(t, params)?;
                }
                acc
            }
            Expr::Product(factors) => {
                let mut acc = 1.0;
                for e in factors {
                    acc *= e.eval_with(t, params)?;
                }
                acc
            }
            Expr::Quotient(num, den) => {
                let d = den.eval_with(t, params)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero { t });
                }
                num.eval_with(t, params)? / d
            }
            Expr::Sin(e) => e.eval_with(t, params)?.sin(),
            Expr::Cos(e) => e.eval_with(t, params)?.cos(),
            Expr::Abs(e) => e.eval_with(t, params)?.abs(),
            Expr::Scale(c, e) => c * e.eval_with(t, params)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { t })
        }
    }

    /// True if the tree contains the time variable.
    pub fn depends_on_time(&self) -> bool {
        match self {
            Expr::Time => true,
            Expr::Const(_) | Expr::Param(_) => false,
            Expr::Sum(v) | Expr::Product(v) => v.iter().any(Expr::depends_on_time),
            Expr::Quotient(n, d) => n.depends_on_time() || d.depends_on_time(),
            Expr::Sin(e) | Expr::Cos(e) | Expr::Abs(e) | Expr::Scale(_, e) => e.depends_on_time(),
        }
    }

    pub fn params_used(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Expr::Const(_) | Expr::Time => {}
            Expr::Sum(v) | Expr::Product(v) => v.iter().for_each(|e| e.params_used(out)),
            Expr::Quotient(n, d) => {
                n.params_used(out);
                d.params_used(out);
            }
            Expr::Sin(e) | Expr::Cos(e) | Expr::Abs(e) | Expr::Scale(_, e) => e.params_used(out),
        }
    }

    /// Denominators of every quotient node, outermost first.
    pub fn denominators(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.collect_denominators(&mut out);
        out
    }

    fn collect_denominators<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Const(_) | Expr::Time | Expr::Param(_) => {}
            Expr::Sum(v) | Expr::Product(v) => v.iter().for_each(|e| e.collect_denominators(out)),
            Expr::Quotient(n, d) => {
                out.push(d);
                n.collect_denominators(out);
                d.collect_denominators(out);
            }
            Expr::Sin(e) | Expr::Cos(e) | Expr::Abs(e) | Expr::Scale(_, e) => {
                e.collect_denominators(out)
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Expr::Const(c) => json!(["const", c]),
            Expr::Time => json!(["t"]),
            Expr::Param(p) => json!(["param", p]),
            Expr::Sum(v) => nary("+", v),
            Expr::Product(v) => nary("*", v),
            Expr::Quotient(n, d) => json!(["/", n.to_json(), d.to_json()]),
            Expr::Sin(e) => json!(["sin", e.to_json()]),
            Expr::Cos(e) => json!(["cos", e.to_json()]),
            Expr::Abs(e) => json!(["abs", e.to_json()]),
            Expr::Scale(c, e) => json!(["scale", c, e.to_json()]),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self, SpecError> {
        if let Some(c) = v.as_f64() {
            return Ok(Expr::Const(c));
        }
        let arr = v
            .as_array()
            .ok_or_else(|| SpecError::BadExpr(format!("expected array or number, got {v}")))?;
        let head = arr
            .first()
            .and_then(Value::as_str)
            .ok_or_else(|| SpecError::BadExpr(format!("missing operator in {v}")))?;
        let args = &arr[1..];
        let arity = |n: usize| -> Result<(), SpecError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(SpecError::BadExpr(format!(
                    "`{head}` takes {n} argument(s), got {}",
                    args.len()
                )))
            }
        };
        let number = |x: &Value| -> Result<f64, SpecError> {
            x.as_f64()
                .ok_or_else(|| SpecError::BadExpr(format!("`{head}` expects a number, got {x}")))
        };
        let sub = |i: usize| Expr::from_json(&args[i]).map(Box::new);
        Ok(match head {
            "const" => {
                arity(1)?;
                Expr::Const(number(&args[0])?)
            }
            "t" => {
                arity(0)?;
                Expr::Time
            }
            "param" => {
                arity(1)?;
                let name = args[0]
                    .as_str()
                    .ok_or_else(|| SpecError::BadExpr("`param` expects a name".into()))?;
                Expr::Param(name.to_owned())
            }
            "+" | "*" => {
                if args.is_empty() {
                    return Err(SpecError::BadExpr(format!("`{head}` needs operands")));
                }
                let items = args.iter().map(Expr::from_json).collect::<Result<_, _>>()?;
                if head == "+" {
                    Expr::Sum(items)
                } else {
                    Expr::Product(items)
                }
            }
            "-" => match args.len() {
                1 => Expr::Scale(-1.0, sub(0)?),
                2 => Expr::Sum(vec![*sub(0)?, Expr::Scale(-1.0, sub(1)?)]),
                n => {
                    return Err(SpecError::BadExpr(format!(
                        "`-` takes 1 or 2 arguments, got {n}"
                    )))
                }
            },
            "/" => {
                arity(2)?;
                Expr::Quotient(sub(0)?, sub(1)?)
            }
            "sin" => {
                arity(1)?;
                Expr::Sin(sub(0)?)
            }
            "cos" => {
                arity(1)?;
                Expr::Cos(sub(0)?)
            }
            "abs" => {
                arity(1)?;
                Expr::Abs(sub(0)?)
            }
            "scale" => {
                arity(2)?;
                Expr::Scale(number(&args[0])?, sub(1)?)
            }
            other => return Err(SpecError::BadExpr(format!("unknown operator `{other}`"))),
        })
    }
}

fn nary(op: &str, items: &[Expr]) -> Value {
    let mut v = vec![Value::from(op)];
    v.extend(items.iter().map(Expr::to_json));
    Value::Array(v)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Time => f.write_str("t"),
            Expr::Param(p) => f.write_str(p),
            Expr::Sum(v) => {
                f.write_str("(")?;
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
            Expr::Product(v) => {
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            Expr::Quotient(n, d) => write!(f, "{n}/({d})"),
            Expr::Sin(e) => write!(f, "sin({e})"),
            Expr::Cos(e) => write!(f, "cos({e})"),
            Expr::Abs(e) => write!(f, "|{e}|"),
            Expr::Scale(c, e) => write!(f, "{c}*{e}"),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Expr::from_json(&v).map_err(serde::de::Error::custom)
    }
}

/// Names accepted in the `overrides` object of an equation file.
pub const OVERRIDE_KEYS: &[&str] = &[
    "norm_a",
    "inf_a",
    "norm_a_plus",
    "norm_a_minus",
    "norm_b",
    "inf_b",
    "sigma",
    "sigma_lower",
    "tau",
    "delta",
    "limit_tau",
    "tilde_delta",
    "tilde_tau",
    "tilde_sigma",
    "limsup_int_b",
];

/// Which coefficient of the equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coef {
    A,
    B,
    G,
    H,
    F,
}

/// The equation `(x(t) - a(t) x(g(t)))' = -b(t) x(h(t)) + f(t)` on the
/// validity window `[t0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub a: Expr,
    pub b: Expr,
    pub g: Expr,
    pub h: Expr,
    pub t0: f64,
    pub horizon: f64,
    #[serde(default, rename = "f", skip_serializing_if = "Option::is_none")]
    pub forcing: Option<Expr>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: Params,
    /// Analytic values for summary fields; each must be constant in `t`
    /// but may depend on parameters.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, Expr>,
}

impl EquationSpec {
    pub fn new(a: Expr, b: Expr, g: Expr, h: Expr, t0: f64, horizon: f64) -> Self {
        EquationSpec {
            name: None,
            a,
            b,
            g,
            h,
            t0,
            horizon,
            forcing: None,
            params: Params::new(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, key: &str, value: f64) -> Self {
        self.overrides.insert(key.to_owned(), Expr::Const(value));
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_owned(), value);
        self
    }

    pub fn with_forcing(mut self, f: Expr) -> Self {
        self.forcing = Some(f);
        self
    }

    pub fn without_overrides(mut self) -> Self {
        self.overrides.clear();
        self
    }

    pub fn from_json_str(s: &str) -> Result<Self, SpecError> {
        let spec: EquationSpec = serde_json::from_str(s)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization cannot fail")
    }

    /// Structural checks that do not need sampling.
    pub fn check(&self) -> Result<(), SpecError> {
        if !(self.t0.is_finite() && self.horizon.is_finite() && self.t0 >= 0.0 && self.horizon > self.t0)
        {
            return Err(SpecError::InvalidWindow {
                t0: self.t0,
                horizon: self.horizon,
            });
        }
        for (key, e) in &self.overrides {
            if !OVERRIDE_KEYS.contains(&key.as_str()) {
                return Err(SpecError::BadOverride(key.clone(), "unknown field".into()));
            }
            if e.depends_on_time() {
                return Err(SpecError::BadOverride(
                    key.clone(),
                    "must not depend on t".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn expr(&self, which: Coef) -> Option<&Expr> {
        match which {
            Coef::A => Some(&self.a),
            Coef::B => Some(&self.b),
            Coef::G => Some(&self.g),
            Coef::H => Some(&self.h),
            Coef::F => self.forcing.as_ref(),
        }
    }

    /// Evaluates a coefficient inside the validity window.
    pub fn eval(&self, which: Coef, t: f64) -> Result<f64, EvalError> {
        let slack = 1e-9 * (1.0 + self.horizon.abs());
        if t < self.t0 - slack || t > self.horizon + slack {
            return Err(EvalError::OutsideWindow {
                t,
                lo: self.t0,
                hi: self.horizon,
            });
        }
        match self.expr(which) {
            Some(e) => e.eval_with(t, &self.params),
            None => Ok(0.0),
        }
    }

    pub fn a_at(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(Coef::A, t)
    }
    pub fn b_at(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(Coef::B, t)
    }
    pub fn g_at(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(Coef::G, t)
    }
    pub fn h_at(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(Coef::H, t)
    }
    pub fn f_at(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(Coef::F, t)
    }

    /// Value of an analytic override, if present.
    pub fn override_value(&self, key: &str) -> Result<Option<f64>, EvalError> {
        match self.overrides.get(key) {
            Some(e) => e.eval_with(self.t0, &self.params).map(Some),
            None => Ok(None),
        }
    }
}

/// Assumption identifiers checked by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// Every expression evaluates on the window.
    #[serde(rename = "domain")]
    Domain,
    /// `|a(t)| <= A0 < 1`.
    #[serde(rename = "a1-neutral")]
    NeutralBound,
    /// `0 < b0 <= b(t) <= B0`.
    #[serde(rename = "a1-coefficient")]
    CoefficientBound,
    /// `g(t) <= t`, `h(t) <= t` and both arguments reach past `t0`.
    #[serde(rename = "a3-delays")]
    DelayArguments,
    /// Sampled lags and coefficients lie inside the analytic overrides.
    #[serde(rename = "a4-overrides")]
    OverrideBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    /// Sample points where the check failed (at most a handful).
    pub witnesses: Vec<f64>,
    pub detail: String,
}

/// Grid estimates from a validation pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEstimates {
    pub a_sup: f64,
    pub b_inf: f64,
    pub b_sup: f64,
    pub sigma: f64,
    pub tau: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub grid_points: usize,
    pub checks: Vec<AssumptionCheck>,
    pub estimates: GridEstimates,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, which: Assumption) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.assumption == which)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const MAX_WITNESSES: usize = 5;

struct Tally {
    assumption: Assumption,
    witnesses: Vec<f64>,
    failed: bool,
    detail: String,
}

impl Tally {
    fn new(assumption: Assumption) -> Self {
        Tally {
            assumption,
            witnesses: Vec::new(),
            failed: false,
            detail: String::new(),
        }
    }

    fn fail(&mut self, t: f64, why: impl FnOnce() -> String) {
        if !self.failed {
            self.detail = why();
        }
        self.failed = true;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(t);
        }
    }

    fn finish(self, ok_detail: String) -> AssumptionCheck {
        AssumptionCheck {
            assumption: self.assumption,
            passed: !self.failed,
            witnesses: self.witnesses,
            detail: if self.failed { self.detail } else { ok_detail },
        }
    }
}

/// Checks the structural assumptions on a uniform grid of `grid_points`
/// samples over `[t0, horizon]`.
///
/// Failures are report entries; this never errors. `limsup g = limsup h =
/// infinity` cannot be sampled, so only `g(horizon) > t0` and
/// `h(horizon) > t0` are checked in its place.
pub fn validate(spec: &EquationSpec, grid_points: usize) -> ValidationReport {
    let n = grid_points.max(2);
    let mut domain = Tally::new(Assumption::Domain);
    let mut neutral = Tally::new(Assumption::NeutralBound);
    let mut coefficient = Tally::new(Assumption::CoefficientBound);
    let mut delays = Tally::new(Assumption::DelayArguments);
    let mut bounds = Tally::new(Assumption::OverrideBounds);

    let ov = |k: &str| spec.override_value(k).ok().flatten();
    let (ov_norm_a, ov_inf_a) = (ov("norm_a"), ov("inf_a"));
    let (ov_norm_b, ov_inf_b) = (ov("norm_b"), ov("inf_b"));
    let (ov_sigma, ov_sigma_lower) = (ov("sigma"), ov("sigma_lower"));
    let (ov_tau, ov_delta) = (ov("tau"), ov("delta"));
    for key in spec.overrides.keys() {
        if let Err(e) = spec.override_value(key) {
            bounds.fail(spec.t0, || format!("override `{key}` does not evaluate: {e}"));
        }
    }

    let mut est = GridEstimates {
        a_sup: 0.0,
        b_inf: f64::INFINITY,
        b_sup: f64::NEG_INFINITY,
        sigma: f64::NEG_INFINITY,
        tau: f64::NEG_INFINITY,
        delta: f64::INFINITY,
    };

    for t in sample_grid(spec.t0, spec.horizon, n) {
        let vals = (spec.a_at(t), spec.b_at(t), spec.g_at(t), spec.h_at(t));
        let (a, b, g, h) = match vals {
            (Ok(a), Ok(b), Ok(g), Ok(h)) => (a, b, g, h),
            (a, b, g, h) => {
                let err = [a, b, g, h].into_iter().find_map(Result::err);
                domain.fail(t, || format!("evaluation failed: {}", err.expect("one failed")));
                continue;
            }
        };
        if let Err(e) = spec.f_at(t) {
            domain.fail(t, || format!("forcing evaluation failed: {e}"));
        }

        est.a_sup = est.a_sup.max(a.abs());
        est.b_inf = est.b_inf.min(b);
        est.b_sup = est.b_sup.max(b);
        est.sigma = est.sigma.max(t - g);
        est.tau = est.tau.max(t - h);
        est.delta = est.delta.min(t - h);

        if a.abs() >= 1.0 {
            neutral.fail(t, || format!("|a(t)| = {} >= 1", a.abs()));
        }
        if b <= 0.0 {
            coefficient.fail(t, || format!("b(t) = {b} <= 0"));
        }
        if !tol_le(g, t) {
            delays.fail(t, || format!("g(t) = {g} > t"));
        }
        if !tol_le(h, t) {
            delays.fail(t, || format!("h(t) = {h} > t"));
        }

        let checks = [
            (ov_norm_a.is_some_and(|v| !tol_le(a.abs(), v)), "|a(t)| exceeds norm_a"),
            (ov_inf_a.is_some_and(|v| !tol_le(v, a)), "a(t) below inf_a"),
            (ov_norm_b.is_some_and(|v| !tol_le(b, v)), "b(t) exceeds norm_b"),
            (ov_inf_b.is_some_and(|v| !tol_le(v, b)), "b(t) below inf_b"),
            (ov_sigma.is_some_and(|v| !tol_le(t - g, v)), "t - g(t) exceeds sigma"),
            (ov_sigma_lower.is_some_and(|v| !tol_le(v, t - g)), "t - g(t) below sigma_lower"),
            (ov_tau.is_some_and(|v| !tol_le(t - h, v)), "t - h(t) exceeds tau"),
            (ov_delta.is_some_and(|v| !tol_le(v, t - h)), "t - h(t) below delta"),
        ];
        for (violated, what) in checks {
            if violated {
                bounds.fail(t, || what.to_owned());
            }
        }
    }

    // Quotient denominators must stay away from zero on the window.
    for which in [Coef::A, Coef::B, Coef::G, Coef::H, Coef::F] {
        let Some(e) = spec.expr(which) else { continue };
        for den in e.denominators() {
            for t in sample_grid(spec.t0, spec.horizon, n) {
                if let Ok(d) = den.eval_with(t, &spec.params) {
                    if d.abs() < 1e-12 {
                        domain.fail(t, || format!("denominator {den} vanishes"));
                    }
                }
            }
        }
    }

    for (arg, name) in [(spec.g_at(spec.horizon), "g"), (spec.h_at(spec.horizon), "h")] {
        if let Ok(v) = arg {
            if v <= spec.t0 {
                delays.fail(spec.horizon, || {
                    format!("{name}(horizon) = {v} does not pass t0 = {}", spec.t0)
                });
            }
        }
    }

    if est.b_inf > est.b_sup {
        est.b_inf = f64::NAN;
        est.b_sup = f64::NAN;
    }

    let checks = vec![
        domain.finish("all expressions evaluate".into()),
        neutral.finish(format!("sup |a| = {}", est.a_sup)),
        coefficient.finish(format!("b in [{}, {}]", est.b_inf, est.b_sup)),
        delays.finish("g(t) <= t and h(t) <= t; both pass t0 by the horizon".into()),
        bounds.finish("samples lie within the supplied overrides".into()),
    ];
    ValidationReport {
        grid_points: n,
        checks,
        estimates: est,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn eval_constant() {
        assert_eq!(Expr::constant(0.6).eval(17.3).unwrap(), 0.6);
    }

    #[test]
    fn eval_neutral_coefficient_of_example3_at_zero() {
        let e = Expr::sum(vec![
            Expr::constant(0.498),
            Expr::product(vec![Expr::constant(0.001), Expr::cos(Expr::t())]),
        ]);
        assert!((e.eval(0.0).unwrap() - 0.499).abs() < 1e-15);
    }

    #[test]
    fn eval_reciprocal() {
        let e = Expr::quotient(Expr::constant(1.0), Expr::scale(4.0, Expr::t()));
        assert_eq!(e.eval(2.0).unwrap(), 0.125);
        assert_eq!(e.eval(0.0), Err(EvalError::DivisionByZero { t: 0.0 }));
    }

    #[test]
    fn eval_outside_window() {
        let spec = corpus::example1();
        assert!(matches!(
            spec.a_at(spec.horizon + 1.0),
            Err(EvalError::OutsideWindow { .. })
        ));
        assert!(matches!(spec.a_at(-1.0), Err(EvalError::OutsideWindow { .. })));
    }

    #[test]
    fn unbound_param() {
        let e = Expr::param("r");
        assert_eq!(e.eval(1.0), Err(EvalError::UnboundParam("r".into())));
        let p: Params = [("r".to_owned(), 0.25)].into();
        assert_eq!(e.eval_with(1.0, &p).unwrap(), 0.25);
    }

    #[test]
    fn json_sugar_and_round_trip() {
        let v: Value = serde_json::from_str(r#"["-", ["t"], ["scale", 0.2, ["abs", ["sin", ["t"]]]]]"#)
            .unwrap();
        let e = Expr::from_json(&v).unwrap();
        let t = 1.3;
        assert!((e.eval(t).unwrap() - (t - 0.2 * t.sin().abs())).abs() < 1e-15);
        assert_eq!(Expr::from_json(&e.to_json()).unwrap(), e);
        assert_eq!(Expr::from_json(&json!(0.5)).unwrap(), Expr::Const(0.5));
    }

    #[test]
    fn json_errors() {
        for bad in [r#"["sin"]"#, r#"["foo", 1]"#, r#"[]"#, r#""t""#, r#"["/", 1]"#] {
            let v: Value = serde_json::from_str(bad).unwrap();
            assert!(Expr::from_json(&v).is_err(), "{bad} should not parse");
        }
    }

    #[test]
    fn spec_file_rejects_unknown_override_and_time_dependent_override() {
        let base = corpus::example1();
        let mut s = base.clone();
        s.overrides.insert("nonsense".into(), Expr::Const(1.0));
        assert!(matches!(s.check(), Err(SpecError::BadOverride(..))));
        let mut s = base;
        s.overrides.insert("tau".into(), Expr::t());
        assert!(matches!(s.check(), Err(SpecError::BadOverride(..))));
    }

    #[test]
    fn spec_rejects_bad_window() {
        let mut s = corpus::example1();
        s.horizon = s.t0;
        assert!(matches!(s.check(), Err(SpecError::InvalidWindow { .. })));
    }

    #[test]
    fn validate_example1() {
        let spec = corpus::example1();
        let rep = validate(&spec, 10_000);
        assert!(rep.passed(), "{:?}", rep.failures().collect::<Vec<_>>());
        assert!((rep.estimates.a_sup - 0.6).abs() < 1e-15);
        assert!((rep.estimates.tau - 0.14).abs() < 1e-12);
        assert!((rep.estimates.delta - 0.14).abs() < 1e-12);
        assert!(rep.estimates.sigma <= 0.2 && rep.estimates.sigma > 0.2 - 1e-4);
    }

    #[test]
    fn validate_flags_unit_neutral_coefficient_at_t0() {
        let mut spec = corpus::example1().without_overrides();
        spec.a = Expr::constant(1.0);
        let rep = validate(&spec, 100);
        let c = rep.check(Assumption::NeutralBound).unwrap();
        assert!(!c.passed);
        assert_eq!(c.witnesses[0], spec.t0);
    }

    #[test]
    fn validate_pantograph() {
        let spec = corpus::ex5();
        let rep = validate(&spec, 10_000);
        assert!(rep.passed(), "{:?}", rep.failures().collect::<Vec<_>>());
        assert!(rep.check(Assumption::DelayArguments).unwrap().passed);
    }

    #[test]
    fn validate_flags_advanced_argument_and_vanishing_denominator() {
        let mut spec = corpus::example1().without_overrides();
        spec.h = Expr::sum(vec![Expr::t(), Expr::constant(0.1)]);
        let rep = validate(&spec, 50);
        assert!(!rep.check(Assumption::DelayArguments).unwrap().passed);

        let mut spec = corpus::example1().without_overrides();
        spec.b = Expr::quotient(Expr::constant(1.0), Expr::sin(Expr::t()));
        spec.horizon = 2.0 * std::f64::consts::PI;
        spec.t0 = 1.0;
        let rep = validate(&spec, 1001);
        assert!(!rep.check(Assumption::Domain).unwrap().passed);
    }

    #[test]
    fn validate_checks_overrides_against_samples() {
        let spec = corpus::example1().with_override("tau", 0.1);
        let rep = validate(&spec, 100);
        let c = rep.check(Assumption::OverrideBounds).unwrap();
        assert!(!c.passed);
        assert!(!c.witnesses.is_empty());
    }
}
