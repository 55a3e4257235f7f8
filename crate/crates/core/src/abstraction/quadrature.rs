//! Deterministic numerical integration over boxes.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
const MAX_DEPTH: u32 = 48;

/// How cell integrals are evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Quadrature {
    /// Adaptive Simpson with the given absolute tolerance, after splitting
    /// each axis at the model's breakpoints.
    Adaptive { tol: f64 },
    /// Fixed 5-point Gauss–Legendre on `pieces` equal sub-intervals of each
    /// breakpoint-free piece.
    GaussLegendre { pieces: usize },
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Adaptive { tol: DEFAULT_TOL }
    }
}

impl Quadrature {
    /// Nominal absolute error per integral.
    pub fn tolerance(&self) -> f64 {
        match *self {
            Quadrature::Adaptive { tol } => tol,
            Quadrature::GaussLegendre { .. } => DEFAULT_TOL,
        }
    }
}

const GL5_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
    0.236_926_885_056_189_08,
];

fn finite(v: f64, x: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Quadrature(format!("integrand is {v} at {x}")))
    }
}

fn simpson_rec(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    (a, fa): (f64, f64),
    (m, fm): (f64, f64),
    (b, fb): (f64, f64),
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = finite(f(lm)?, lm)?;
    let frm = finite(f(rm)?, rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_rec(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth + 1)?
        + simpson_rec(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth + 1)?)
}

fn adaptive_simpson(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let fa = finite(f(a)?, a)?;
    let fm = finite(f(m)?, m)?;
    let fb = finite(f(b)?, b)?;
    // one forced split so that a coincidental match of the coarse rule does
    // not end the recursion
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = finite(f(lm)?, lm)?;
    let frm = finite(f(rm)?, rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    Ok(simpson_rec(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, 1)?
        + simpson_rec(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, 1)?)
}

fn gauss_legendre(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64, pieces: usize) -> Result<f64> {
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for p in 0..pieces {
        let lo = a + p as f64 * h;
        let half = 0.5 * h;
        let mid = lo + half;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            let at = mid + half * x;
            total += w * half * finite(f(at)?, at)?;
        }
    }
    Ok(total)
}

/// `∫_a^b f`, splitting at every breakpoint strictly inside `(a, b)`.
pub fn integrate_1d(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    scheme: Quadrature,
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut knots = vec![a];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    knots.extend(inner);
    knots.push(b);
    let pieces = knots.len() - 1;
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += match scheme {
            Quadrature::Adaptive { tol } => adaptive_simpson(f, w[0], w[1], tol / pieces as f64)?,
            Quadrature::GaussLegendre { pieces } => gauss_legendre(f, w[0], w[1], pieces.max(1))?,
        };
    }
    Ok(total)
}

/// Integral of `f` over the box `[lower, upper)`, nesting one-dimensional
/// rules axis by axis (axis 0 outermost). A zero-dimensional box evaluates
/// `f` at the empty point.
pub fn integrate_box(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    lower: &[f64],
    upper: &[f64],
    breakpoints: &[Vec<f64>],
    scheme: Quadrature,
) -> Result<f64> {
    let mut point = vec![0.0; lower.len()];
    nest(f, lower, upper, breakpoints, scheme, 0, &mut point)
}

fn nest(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    lower: &[f64],
    upper: &[f64],
    breakpoints: &[Vec<f64>],
    scheme: Quadrature,
    axis: usize,
    point: &mut Vec<f64>,
) -> Result<f64> {
    if axis == lower.len() {
        return f(point);
    }
    let empty = Vec::new();
    let bps = breakpoints.get(axis).unwrap_or(&empty);
    let inner_scheme = match scheme {
        Quadrature::Adaptive { tol } => Quadrature::Adaptive {
            tol: tol / (upper[axis] - lower[axis]).max(1.0),
        },
        other => other,
    };
    let mut g = |x: f64| {
        point[axis] = x;
        nest(f, lower, upper, breakpoints, inner_scheme, axis + 1, point)
    };
    integrate_1d(&mut g, lower[axis], upper[axis], bps, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_steps() {
        let mut cubic = |x: f64| Ok(x * x * x - x);
        let v = integrate_1d(&mut cubic, 0.0, 2.0, &[], Quadrature::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let mut step = |x: f64| Ok(if x < 0.3 { 2.0 } else { 0.5 });
        let v = integrate_1d(&mut step, 0.0, 1.0, &[0.3], Quadrature::default()).unwrap();
        assert!((v - (0.6 + 0.35)).abs() < 1e-14);
        // without the breakpoint the adaptive rule still converges
        let v = integrate_1d(&mut step, 0.0, 1.0, &[], Quadrature::default()).unwrap();
        assert!((v - 0.95).abs() < 1e-8, "{v}");
        let v = integrate_1d(&mut step, 0.0, 1.0, &[0.3], Quadrature::GaussLegendre { pieces: 1 })
            .unwrap();
        assert!((v - 0.95).abs() < 1e-14);
    }

    #[test]
    fn smooth_function() {
        let mut f = |x: f64| Ok(x.exp());
        let v = integrate_1d(&mut f, 0.0, 1.0, &[], Quadrature::default()).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn boxes() {
        let mut f = |p: &[f64]| Ok(p[0] * p[1]);
        let v = integrate_box(&mut f, &[0.0, 0.0], &[1.0, 2.0], &[], Quadrature::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let mut g = |_: &[f64]| Ok(0.25);
        assert_eq!(integrate_box(&mut g, &[], &[], &[], Quadrature::default()).unwrap(), 0.25);
    }

    #[test]
    fn non_finite_integrand_fails() {
        let mut f = |x: f64| Ok(1.0 / (x - 0.5));
        assert!(matches!(
            integrate_1d(&mut f, 0.0, 1.0, &[], Quadrature::default()),
            Err(Error::Quadrature(_))
        ));
    }
}
