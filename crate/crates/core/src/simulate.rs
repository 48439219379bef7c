//! Method-of-steps integration of
//!
//! ```text
//! (x(t) - a(t) x(g(t)))' = -b(t) x(h(t)) + f(t),   x(t) = phi(t) for t <= t0.
//! ```
//!
//! The integrated state is `y = x - a x(g)`, advanced with classical RK4.
//! After every step (and at every RK stage whose retarded argument falls
//! inside the current step) `x` is recovered from `y` by the contraction
//! `X <- Y + a(t) x(g(t))`. Past values are linear interpolants of the
//! stored nodes; there is no breakpoint tracking, so derivative jumps that
//! the neutral term propagates from `t0` limit the accuracy to first order.

use std::io::Write;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::eqspec::{EquationSpec, EvalError, Expr};
use crate::grid::{fmt_sig, sample_grid, simpson};
use crate::series::SampledFunction;

pub const DEFAULT_STEP: f64 = 1e-3;
pub const MAX_FIXED_POINT_ITERATIONS: u32 = 100;
/// Knot spacing of [`History::seeded`].
pub const SEEDED_KNOT_SPACING: f64 = 0.25;
/// How far before `t0` seeded knots are drawn; the history is constant
/// before that.
pub const SEEDED_SPAN: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("fixed-point recovery of x diverged at t = {t} (residual {residual} after {iterations} iterations)")]
    FixedPointDivergence { t: f64, residual: f64, iterations: u32 },
    #[error("step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("integration interval [{t0}, {t_end}] is empty")]
    InvalidInterval { t0: f64, t_end: f64 },
    #[error("t_end = {t_end} is past the horizon {horizon} of the equation")]
    BeyondHorizon { t_end: f64, horizon: f64 },
    #[error("fundamental function X({t}, {s}) = {value} is not positive")]
    PositivityViolation { t: f64, s: f64, value: f64 },
    #[error("integral of b over one lag exceeds 1/e (margin {margin})")]
    Lemma5Gate { margin: f64 },
    #[error("trajectory spans {span}, need at least {needed}")]
    TooShort { span: f64, needed: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Initial function `phi` on `t <= t0`.
#[derive(Debug, Clone, PartialEq)]
pub enum History {
    Constant(f64),
    /// `sin t`
    Sine,
    Expr(Expr),
    /// Knots at `end - k * spacing`, linear in between, constant before
    /// the last knot.
    PiecewiseLinear { end: f64, spacing: f64, values: Vec<f64> },
    /// `1` at `t0`, `0` before; gives the fundamental function.
    UnitJump,
}

impl History {
    /// Pseudo-random piecewise-linear history with knot values in
    /// `[-1, 1]`, reproducible from `seed`.
    pub fn seeded(seed: u64, t0: f64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = (SEEDED_SPAN / SEEDED_KNOT_SPACING).round() as usize + 1;
        let values = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        History::PiecewiseLinear {
            end: t0,
            spacing: SEEDED_KNOT_SPACING,
            values,
        }
    }

    pub fn value(&self, t: f64, spec: &EquationSpec) -> Result<f64, EvalError> {
        Ok(match self {
            History::Constant(c) => *c,
            History::Sine => t.sin(),
            History::Expr(e) => e.eval_with(t, &spec.params)?,
            History::PiecewiseLinear { end, spacing, values } => {
                let u = ((end - t) / spacing).max(0.0);
                let k = u.floor() as usize;
                if k + 1 >= values.len() {
                    values[values.len() - 1]
                } else {
                    let w = u - k as f64;
                    values[k] * (1.0 - w) + values[k + 1] * w
                }
            }
            History::UnitJump => {
                if t >= spec.t0 {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}

/// Right-hand side `f`.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    None,
    Expr(Expr),
    /// `level(t)` for `t >= onset`, `0` before.
    Step { onset: f64, level: Expr },
}

impl Forcing {
    pub fn from_spec(spec: &EquationSpec) -> Self {
        match &spec.forcing {
            Some(f) => Forcing::Expr(f.clone()),
            None => Forcing::None,
        }
    }

    pub fn unit_step(onset: f64) -> Self {
        Forcing::Step {
            onset,
            level: Expr::constant(1.0),
        }
    }

    fn value(&self, t: f64, spec: &EquationSpec) -> Result<f64, EvalError> {
        match self {
            Forcing::None => Ok(0.0),
            Forcing::Expr(e) => e.eval_with(t, &spec.params),
            Forcing::Step { onset, level } => {
                if t >= *onset {
                    level.eval_with(t, &spec.params)
                } else {
                    Ok(0.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub fixed_point_solves: u64,
    pub fixed_point_iterations: u64,
    pub max_iterations: u32,
    pub max_residual: f64,
}

/// Uniform-grid solution; immutable once returned.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub step: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.step * i as f64
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Linear interpolant of `x` on `[t0, t_end]`.
    pub fn x_at(&self, t: f64) -> Option<f64> {
        if t < self.t0 || t > self.t_end() + 1e-9 * self.step {
            return None;
        }
        Some(interpolate(&self.x, self.t0, self.step, t))
    }

    pub fn x_sampled(&self) -> SampledFunction {
        SampledFunction::new(self.t0, self.step, self.x.clone())
    }

    pub fn y_sampled(&self) -> SampledFunction {
        SampledFunction::new(self.t0, self.step, self.y.clone())
    }

    pub fn sup_abs(&self) -> f64 {
        self.x.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with columns `t,x,y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "y"])?;
        for i in 0..self.len() {
            w.write_record([fmt_sig(self.time(i)), fmt_sig(self.x[i]), fmt_sig(self.y[i])])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn interpolate(values: &[f64], t0: f64, step: f64, s: f64) -> f64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let u = ((s - t0) / step).max(0.0);
    let i = (u.floor() as usize).min(n - 2);
    let w = (u - i as f64).min(1.0);
    values[i] * (1.0 - w) + values[i + 1] * w
}

#[derive(Clone, Copy)]
struct Coeffs {
    t: f64,
    a: f64,
    b: f64,
    g: f64,
    h: f64,
    f: f64,
}

struct Engine<'a> {
    spec: &'a EquationSpec,
    history: &'a History,
    forcing: &'a Forcing,
    t0: f64,
    dt: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    stats: IntegratorStats,
}

impl Engine<'_> {
    fn coeffs(&self, t: f64) -> Result<Coeffs, SimError> {
        Ok(Coeffs {
            t,
            a: self.spec.a_at(t)?,
            b: self.spec.b_at(t)?,
            g: self.spec.g_at(t)?,
            h: self.spec.h_at(t)?,
            f: self.forcing.value(t, self.spec)?,
        })
    }

    /// `x(s)` for `s` up to the last stored node.
    fn stored(&self, s: f64) -> Result<f64, SimError> {
        if s < self.t0 {
            return Ok(self.history.value(s, self.spec)?);
        }
        Ok(interpolate(&self.x, self.t0, self.dt, s))
    }

    /// `x(s)` when the current step ends at `(ts, xs)`.
    fn lookup(&self, s: f64, tn: f64, xn: f64, ts: f64, xs: f64) -> Result<f64, SimError> {
        if s <= tn {
            self.stored(s)
        } else {
            Ok(xn + (xs - xn) * (s - tn) / (ts - tn))
        }
    }

    /// Solves `X = Y + a(t) x(g(t))` at `c.t > tn`.
    fn recover(&mut self, c: &Coeffs, y: f64, tn: f64, xn: f64) -> Result<f64, SimError> {
        self.stats.fixed_point_solves += 1;
        if (c.t - c.g).abs() < 1e-14 {
            self.stats.fixed_point_iterations += 1;
            self.stats.max_iterations = self.stats.max_iterations.max(1);
            return Ok(y / (1.0 - c.a));
        }
        if c.g <= tn {
            self.stats.fixed_point_iterations += 1;
            self.stats.max_iterations = self.stats.max_iterations.max(1);
            return Ok(y + c.a * self.stored(c.g)?);
        }
        let mut x = xn;
        let mut residual = f64::INFINITY;
        for it in 1..=MAX_FIXED_POINT_ITERATIONS {
            let next = y + c.a * self.lookup(c.g, tn, xn, c.t, x)?;
            residual = (next - x).abs();
            x = next;
            if residual < 1e-12 * x.abs().max(1.0) {
                self.stats.fixed_point_iterations += u64::from(it);
                self.stats.max_iterations = self.stats.max_iterations.max(it);
                self.stats.max_residual = self.stats.max_residual.max(residual);
                return Ok(x);
            }
        }
        Err(SimError::FixedPointDivergence {
            t: c.t,
            residual,
            iterations: MAX_FIXED_POINT_ITERATIONS,
        })
    }

    /// `y'(t) = -b(t) x(h(t)) + f(t)` at a stage with value `ys`.
    fn rhs(&mut self, c: &Coeffs, ys: f64, tn: f64, xn: f64) -> Result<f64, SimError> {
        let xh = if c.h <= tn {
            self.stored(c.h)?
        } else {
            let xs = self.recover(c, ys, tn, xn)?;
            self.lookup(c.h, tn, xn, c.t, xs)?
        };
        Ok(-c.b * xh + c.f)
    }
}

/// Integrates with the forcing stored in the equation, if any.
pub fn integrate(spec: &EquationSpec, history: &History, t_end: f64, step: f64) -> Result<Trajectory, SimError> {
    integrate_forced(spec, history, &Forcing::from_spec(spec), t_end, step)
}

/// Integrates on `[t0, t_end]`; the step is shrunk so that it divides the
/// interval.
pub fn integrate_forced(
    spec: &EquationSpec,
    history: &History,
    forcing: &Forcing,
    t_end: f64,
    step: f64,
) -> Result<Trajectory, SimError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(SimError::InvalidStep(step));
    }
    let t0 = spec.t0;
    if !(t_end > t0) {
        return Err(SimError::InvalidInterval { t0, t_end });
    }
    if t_end > spec.horizon {
        return Err(SimError::BeyondHorizon {
            t_end,
            horizon: spec.horizon,
        });
    }
    let n = (((t_end - t0) / step) - 1e-9).ceil().max(1.0) as usize;
    let dt = (t_end - t0) / n as f64;

    let mut e = Engine {
        spec,
        history,
        forcing,
        t0,
        dt,
        x: Vec::with_capacity(n + 1),
        y: Vec::with_capacity(n + 1),
        stats: IntegratorStats::default(),
    };
    let x0 = history.value(t0, spec)?;
    e.x.push(x0);
    let c0 = e.coeffs(t0)?;
    let y0 = x0 - c0.a * e.stored(c0.g)?;
    e.y.push(y0);

    let mut cn = c0;
    for i in 0..n {
        let tn = t0 + dt * i as f64;
        let t1 = if i + 1 == n { t_end } else { t0 + dt * (i + 1) as f64 };
        let h = t1 - tn;
        let (xn, yn) = (e.x[i], e.y[i]);
        let cm = e.coeffs(tn + 0.5 * h)?;
        let c1 = e.coeffs(t1)?;
        let k1 = e.rhs(&cn, yn, tn, xn)?;
        let k2 = e.rhs(&cm, yn + 0.5 * h * k1, tn, xn)?;
        let k3 = e.rhs(&cm, yn + 0.5 * h * k2, tn, xn)?;
        let k4 = e.rhs(&c1, yn + h * k3, tn, xn)?;
        let y1 = yn + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let x1 = e.recover(&c1, y1, tn, xn)?;
        e.x.push(x1);
        e.y.push(y1);
        cn = c1;
    }
    Ok(Trajectory {
        t0,
        step: dt,
        x: e.x,
        y: e.y,
        stats: e.stats,
    })
}

/// `max_n |y_n - x_n + a(t_n) x(g(t_n))|` with `x` interpolated as in the
/// integrator.
pub fn neutral_residual(spec: &EquationSpec, history: &History, traj: &Trajectory) -> Result<f64, SimError> {
    let mut worst: f64 = 0.0;
    for i in 0..traj.len() {
        let t = traj.time(i);
        let g = spec.g_at(t)?;
        let xg = if g < traj.t0 {
            history.value(g, spec)?
        } else {
            interpolate(&traj.x, traj.t0, traj.step, g)
        };
        worst = worst.max((traj.y[i] - traj.x[i] + spec.a_at(t)? * xg).abs());
    }
    Ok(worst)
}

/// The non-neutral equation `x' = -b(t) x(h(t))` built from `spec`.
fn comparison_equation(spec: &EquationSpec, s: f64) -> EquationSpec {
    let mut eq = EquationSpec::new(Expr::constant(0.0), spec.b.clone(), Expr::t(), spec.h.clone(), s, spec.horizon);
    eq.params = spec.params.clone();
    eq
}

/// Fundamental function `X(., s)` of `x' = -b(t) x(h(t))` on `[s, t_end]`
/// (the neutral coefficient of `spec` is ignored).
pub fn fundamental(spec: &EquationSpec, s: f64, t_end: f64, step: f64) -> Result<Trajectory, SimError> {
    if s < spec.t0 {
        return Err(SimError::InvalidInterval { t0: spec.t0, t_end: s });
    }
    integrate_forced(&comparison_equation(spec, s), &History::UnitJump, &Forcing::None, t_end, step)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma5Check {
    pub holds: bool,
    /// `1/e - sup_t int_{h(t)}^t b`.
    pub margin: f64,
    pub sup_integral: f64,
    pub at: f64,
}

/// `int_{h(t)}^t b(s) ds <= 1/e` on a grid of `t` in `[t0, t_end]`, with
/// `b = 0` before `t0`. The boundary case is accepted up to `1e-12`.
pub fn lemma5_condition(
    spec: &EquationSpec,
    t_end: f64,
    grid_points: usize,
    panels: usize,
) -> Result<Lemma5Check, SimError> {
    let mut sup = f64::NEG_INFINITY;
    let mut at = spec.t0;
    for t in sample_grid(spec.t0, t_end, grid_points) {
        let lo = spec.h_at(t)?.max(spec.t0);
        let v = simpson(|s| spec.b_at(s), lo, t, panels)?;
        if v > sup {
            sup = v;
            at = t;
        }
    }
    let margin = (-1.0f64).exp() - sup;
    Ok(Lemma5Check {
        holds: margin >= -1e-12,
        margin,
        sup_integral: sup,
        at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma4Check {
    /// `max_t int_{t0 + lag}^t X(t, s) b(s) ds` over the sampled `t`.
    pub max_integral: f64,
    pub at: f64,
    pub min_fundamental: f64,
    pub lag: f64,
    pub runs: usize,
}

/// Quadrature of `int_{t0 + lag}^t X(t, s) b(s) ds` for the comparison
/// equation `x' = -b(t) x(h(t))`, where `lag = sup (t - h(t))`.
///
/// One fundamental run per node `s_k` of an `s`-grid with spacing close to
/// `s_spacing` (a multiple of `step`); the trapezoid rule in `s` is
/// evaluated at every `t = s_k`. Requires the `1/e` condition, which
/// guarantees `X > 0`.
pub fn lemma4_check(spec: &EquationSpec, t_end: f64, step: f64, s_spacing: f64) -> Result<Lemma4Check, SimError> {
    let gate = lemma5_condition(spec, t_end, 2001, 64)?;
    if !gate.holds {
        return Err(SimError::Lemma5Gate { margin: gate.margin });
    }
    let mut lag: f64 = 0.0;
    for t in sample_grid(spec.t0, t_end, 10_001) {
        lag = lag.max(t - spec.h_at(t)?);
    }
    let m = (s_spacing / step).round().max(1.0) as usize;
    let ds = m as f64 * step;
    let s0 = spec.t0 + lag;
    if s0 >= t_end {
        return Err(SimError::InvalidInterval { t0: s0, t_end });
    }
    let k_max = ((t_end - s0) / ds + 1e-9).floor() as usize;

    struct Run {
        at_nodes: Vec<f64>,
        min: (f64, f64),
    }
    let runs: Vec<Run> = (0..=k_max)
        .into_par_iter()
        .map(|k| -> Result<Run, SimError> {
            let s = s0 + ds * k as f64;
            if k == k_max {
                return Ok(Run {
                    at_nodes: vec![1.0],
                    min: (1.0, s),
                });
            }
            let traj = fundamental(spec, s, s + ds * (k_max - k) as f64, step)?;
            let mut min = (f64::INFINITY, s);
            for (i, v) in traj.x.iter().enumerate() {
                if *v < min.0 {
                    min = (*v, traj.time(i));
                }
            }
            Ok(Run {
                at_nodes: traj.x.iter().step_by(m).copied().collect(),
                min,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut min_fundamental = f64::INFINITY;
    for (k, r) in runs.iter().enumerate() {
        if r.min.0 <= 0.0 {
            return Err(SimError::PositivityViolation {
                t: r.min.1,
                s: s0 + ds * k as f64,
                value: r.min.0,
            });
        }
        min_fundamental = min_fundamental.min(r.min.0);
    }
    let b: Vec<f64> = (0..=k_max)
        .map(|k| spec.b_at(s0 + ds * k as f64))
        .collect::<Result<_, _>>()?;
    let mut best = (0.0, s0);
    for i in 1..=k_max {
        let f = |k: usize| runs[k].at_nodes[i - k] * b[k];
        let mut sum = 0.5 * (f(0) + f(i));
        for k in 1..i {
            sum += f(k);
        }
        let v = sum * ds;
        if v > best.0 {
            best = (v, s0 + ds * i as f64);
        }
    }
    Ok(Lemma4Check {
        max_integral: best.0,
        at: best.1,
        min_fundamental,
        lag,
        runs: runs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayVerdict {
    Decaying,
    NonDecaying,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayEstimate {
    pub window: f64,
    pub window_sups: Vec<f64>,
    pub midpoints: Vec<f64>,
    /// `-` least-squares slope of `ln M_k` against window midpoints.
    pub rate: f64,
    /// `M_last / M_first`.
    pub ratio: f64,
    pub verdict: DecayVerdict,
}

pub const DECAY_RATIO: f64 = 0.5;
pub const GROWTH_RATIO: f64 = 2.0;

/// Window sups of `|x|` on `[t0 + warmup, t_end]` and their log-linear
/// decay rate.
pub fn decay_rate(traj: &Trajectory, warmup: f64, window: f64) -> Result<DecayEstimate, SimError> {
    let span = traj.t_end() - traj.t0;
    let needed = warmup + 5.0 * window;
    if !(window > 0.0) || span < needed - 1e-9 {
        return Err(SimError::TooShort { span, needed });
    }
    let start = traj.t0 + warmup;
    let count = ((span - warmup) / window + 1e-9).floor() as usize;
    let mut sups = vec![0.0f64; count];
    for i in 0..traj.len() {
        let t = traj.time(i);
        if t < start {
            continue;
        }
        let k = (((t - start) / window) as usize).min(count - 1);
        sups[k] = sups[k].max(traj.x[i].abs());
    }
    let mids: Vec<f64> = (0..count).map(|k| start + window * (k as f64 + 0.5)).collect();
    let logs: Vec<f64> = sups.iter().map(|m| m.max(f64::MIN_POSITIVE).ln()).collect();
    let n = count as f64;
    let mx = mids.iter().sum::<f64>() / n;
    let my = logs.iter().sum::<f64>() / n;
    let sxy: f64 = mids.iter().zip(&logs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = mids.iter().map(|x| (x - mx) * (x - mx)).sum();
    let rate = -sxy / sxx;
    let ratio = sups[count - 1] / sups[0];
    let verdict = if ratio < DECAY_RATIO && rate > 0.0 {
        DecayVerdict::Decaying
    } else if ratio > GROWTH_RATIO {
        DecayVerdict::NonDecaying
    } else {
        DecayVerdict::Inconclusive
    };
    Ok(DecayEstimate {
        window,
        window_sups: sups,
        midpoints: mids,
        rate,
        ratio,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForcedBound {
    pub sup: f64,
    pub sup_first_half: f64,
    pub sup_second_half: f64,
    /// The second half more than doubles the first; a smoke signal only.
    pub growing: bool,
}

/// `sup |x|` of the zero-history solution driven by `forcing`.
pub fn forced_bound_check(
    spec: &EquationSpec,
    forcing: &Forcing,
    t_end: f64,
    step: f64,
) -> Result<ForcedBound, SimError> {
    let traj = integrate_forced(spec, &History::Constant(0.0), forcing, t_end, step)?;
    let mid = 0.5 * (traj.t0 + traj.t_end());
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for i in 0..traj.len() {
        let v = traj.x[i].abs();
        if traj.time(i) <= mid {
            first = first.max(v);
        } else {
            second = second.max(v);
        }
    }
    Ok(ForcedBound {
        sup: first.max(second),
        sup_first_half: first,
        sup_second_half: second,
        growing: second > 2.0 * first,
    })
}
