//! Scalar bracketing root finders and a small bounded minimizer.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Absolute tolerance on the bracket width.
    pub x_tol: f64,
    /// Stop as soon as `|f| <= f_tol`.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            x_tol: 1e-13,
            f_tol: 0.0,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Brent's method on a bracket with `f(a)·f(b) <= 0`.
///
/// `f` may fail; the error is propagated unchanged.
pub fn brent<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=tol.max_iter {
        if fb.signum() == fc.signum() {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.x_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol.f_tol {
            return Ok(Root { x: b, fx: fb, iterations: iter });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
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
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Ok(Root { x: b, fx: fb, iterations: tol.max_iter })
}

/// Plain bisection given the sign of `f` just right of `lo` (which may
/// itself be a root) and a point `hi` where the sign differs.
pub fn bisect_with_sign<F>(mut f: F, lo: f64, sign_lo: f64, hi: f64, tol: Tolerance) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut best = Root { x: hi, fx: f(hi)?, iterations: 0 };
    for iter in 1..=tol.max_iter {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        best = Root { x: mid, fx: fm, iterations: iter };
        if fm == 0.0 || fm.abs() <= tol.f_tol || (b - a).abs() <= tol.x_tol {
            break;
        }
        if fm.signum() == sign_lo {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(best)
}

/// Locations of strict sign changes of `f` on a uniform grid over `[a, b]`,
/// refined by bisection. Exact zeros at grid points are reported when the
/// sign differs on either side.
pub fn sign_changes<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let h = (b - a) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| a + h * i as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    let mut last_sign = 0.0;
    let mut last_idx = 0usize;
    for i in 0..=n {
        let s = if fs[i] > 0.0 {
            1.0
        } else if fs[i] < 0.0 {
            -1.0
        } else {
            0.0
        };
        if s == 0.0 {
            continue;
        }
        if last_sign != 0.0 && s != last_sign {
            if i - last_idx > 1 {
                // zero(s) at intermediate grid points
                out.push(xs[(last_idx + i) / 2]);
            } else {
                let r = brent(|x| Ok(f(x)), xs[last_idx], xs[i], Tolerance::default())
                    .map(|r| r.x)
                    .unwrap_or(0.5 * (xs[last_idx] + xs[i]));
                out.push(r);
            }
        }
        last_sign = s;
        last_idx = i;
    }
    out
}

/// Golden-section minimization on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, x_tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > x_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_cubic() {
        // real root of x^3 + x - 1
        let r = brent(|x| Ok(x * x * x + x - 1.0), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((r.x - 0.682_327_803_828_019_3).abs() < 1e-13);
    }

    #[test]
    fn brent_reports_no_sign_change() {
        let e = brent(|x| Ok(x * x + 1.0), -1.0, 1.0, Tolerance::default()).unwrap_err();
        assert!(matches!(e, Error::NoSignChange { .. }));
    }

    #[test]
    fn sign_changes_finds_all() {
        let r = sign_changes(|x| x * (x * x - 1.0) * (x * x - 4.0), -3.0, 3.0, 600);
        assert_eq!(r.len(), 5);
        for (got, want) in r.iter().zip([-2.0, -1.0, 0.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn golden() {
        let (x, _) = golden_min(|x| (x - 0.3).powi(2), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn bisect_from_root() {
        // root at 0 with positive slope; look for the other root at 0.5
        let f = |x: f64| Ok(x * (0.5 - x));
        let r = bisect_with_sign(f, 0.0, 1.0, 1.0, Tolerance { x_tol: 1e-14, ..Default::default() })
            .unwrap();
        assert!((r.x - 0.5).abs() < 1e-12);
    }
}
