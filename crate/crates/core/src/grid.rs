//! Sampling grids, tolerant comparisons and quadrature helpers.

/// `n` uniformly spaced points on `[lo, hi]`, endpoints included.
///
/// The `i`-th point is `lo + (hi - lo) * (i / (n - 1))`, so the grid with
/// `2n - 1` points contains this one bit-for-bit.
pub fn sample_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    let n = n.max(2);
    let span = hi - lo;
    let last = (n - 1) as f64;
    (0..n).map(move |i| {
        if i == n - 1 {
            hi
        } else {
            lo + span * (i as f64 / last)
        }
    })
}

/// Grid density that halves the spacing of an `n`-point grid.
pub fn refined(n: usize) -> usize {
    2 * n.max(2) - 1
}

/// `a <= b` up to a relative slack of `1e-12`.
pub fn tol_le(a: f64, b: f64) -> bool {
    a <= b + 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Pairwise (cascade) summation; the result does not depend on how a
/// caller might split the work.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Composite Simpson rule with `panels` subintervals (rounded up to even).
pub fn simpson<E>(
    f: impl Fn(f64) -> Result<f64, E>,
    lo: f64,
    hi: f64,
    panels: usize,
) -> Result<f64, E> {
    let n = (panels.max(2) + 1) & !1;
    let h = (hi - lo) / n as f64;
    if h == 0.0 {
        return Ok(0.0);
    }
    let mut terms = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = if i == n { hi } else { lo + h * i as f64 };
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        terms.push(w * f(x)?);
    }
    Ok(pairwise_sum(&terms) * h / 3.0)
}

/// Formats `x` with 12 significant digits, `.` as decimal separator.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{:.*e}", (DIGITS - 1) as usize, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_nesting() {
        let g: Vec<f64> = sample_grid(0.3, 7.1, 11).collect();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.3);
        assert_eq!(g[10], 7.1);
        let fine: Vec<f64> = sample_grid(0.3, 7.1, refined(11)).collect();
        for (i, t) in g.iter().enumerate() {
            assert_eq!(fine[2 * i], *t);
        }
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| Ok::<_, ()>(x * x * x - 2.0 * x), 0.0, 2.0, 4).unwrap();
        assert!((v - 0.0).abs() < 1e-14);
        let v = simpson(|x| Ok::<_, ()>(1.0 / x), 1.0, 2.0, 2048).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(0.168354392759562), "0.168354392760");
        assert_eq!(fmt_sig(1.0), "1.00000000000");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.5e-9), "1.50000000000e-9");
    }
}
