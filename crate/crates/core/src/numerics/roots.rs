//! Bracketed root finding for functions with a single negative-to-positive
//! sign change.

use crate::error::{Error, Result};

/// Bracket width at which Brent iterations stop.
pub const ROOT_XTOL: f64 = 1e-12;
const MAX_DOUBLINGS: u32 = 60;
const MAX_BRENT_ITERATIONS: usize = 300;

/// Finds the root of an increasing-through-zero `g`, expanding a bracket
/// geometrically from `bracket_seed`.
pub fn solve_monotone_root<G>(mut g: G, bracket_seed: f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let g_seed = eval(&mut g, bracket_seed)?;
    if g_seed == 0.0 {
        return Ok(bracket_seed);
    }
    let (lo, hi, g_lo, g_hi) = expand(&mut g, bracket_seed, g_seed)?;
    brent(&mut g, lo, hi, g_lo, g_hi)
}

/// Like [`solve_monotone_root`] but starts from a candidate bracket
/// `[lo, hi]`, falling back to expansion around its midpoint when the
/// candidate does not straddle the root.
pub fn solve_monotone_root_in<G>(mut g: G, lo: f64, hi: f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let g_lo = eval(&mut g, lo)?;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    let g_hi = eval(&mut g, hi)?;
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo < 0.0 && g_hi > 0.0 {
        return brent(&mut g, lo, hi, g_lo, g_hi);
    }
    let (seed, g_seed) = if g_lo > 0.0 { (lo, g_lo) } else { (hi, g_hi) };
    let (a, b, g_a, g_b) = expand(&mut g, seed, g_seed)?;
    brent(&mut g, a, b, g_a, g_b)
}

fn eval<G: FnMut(f64) -> Result<f64>>(g: &mut G, x: f64) -> Result<f64> {
    let value = g(x)?;
    if value.is_nan() {
        return Err(Error::Bracketing(format!("function is NaN at {x}")));
    }
    Ok(value)
}

/// Returns `(lo, hi, g(lo), g(hi))` with `g(lo) < 0 < g(hi)`.
fn expand<G>(g: &mut G, seed: f64, g_seed: f64) -> Result<(f64, f64, f64, f64)>
where
    G: FnMut(f64) -> Result<f64>,
{
    let direction = if g_seed < 0.0 { 1.0 } else { -1.0 };
    let (mut inner, mut g_inner) = (seed, g_seed);
    let mut step = 1.0;
    for _ in 0..=MAX_DOUBLINGS {
        let outer = seed + direction * step;
        let g_outer = eval(g, outer)?;
        if g_outer.signum() != g_inner.signum() || g_outer == 0.0 {
            return Ok(if direction > 0.0 {
                (inner, outer, g_inner, g_outer)
            } else {
                (outer, inner, g_outer, g_inner)
            });
        }
        inner = outer;
        g_inner = g_outer;
        step *= 2.0;
    }
    Err(Error::Bracketing(format!(
        "no sign change within {MAX_DOUBLINGS} doublings of seed {seed}"
    )))
}

/// Brent's method (inverse quadratic interpolation with bisection fallback).
fn brent<G>(g: &mut G, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    if fb == 0.0 {
        return Ok(b);
    }
    let mut c = b;
    let mut fc = fb;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_BRENT_ITERATIONS {
        if (fb > 0.0 && fc > 0.0) || (fb < 0.0 && fc < 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * ROOT_XTOL;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(xm) };
        fb = eval(g, b)?;
    }
    Err(Error::Bracketing(format!(
        "Brent iteration did not converge near {b}"
    )))
}
