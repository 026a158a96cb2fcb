//! Mode map `x*(m)`, zeros of `V'` and the aggregation strength above which
//! the effective potential becomes convex.

use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};
use crate::roots::{self, golden_min, Tolerance};

const AUDIT_POINTS: usize = 4000;

/// Location of the density maximum for a given mean-field value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    pub x: f64,
    /// Both maximizers when two modes have equal height.
    pub tie: Option<(f64, f64)>,
    /// True when `x^{*-1}` is strictly increasing and `x` solves
    /// `V'(x) + θ(P'(x) - m) = 0` directly.
    pub monotone: bool,
}

/// Symmetric audit half-width: beyond it `V' + θP'` has the sign of `x`.
pub(crate) fn audit_radius(model: &Model) -> f64 {
    let r = model.confinement_radius(0.0).unwrap_or(10.0);
    (1.5 * r).max(2.0)
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let h = (hi - lo) / n as f64;
    (0..=n).map(move |i| lo + h * i as f64)
}

/// Minimum of `f` over `[lo, hi]`: dense grid, then golden-section polish
/// around the best grid point.
pub(crate) fn grid_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let h = (hi - lo) / n as f64;
    let (mut bx, mut bv) = (lo, f(lo));
    for x in grid(lo, hi, n) {
        let v = f(x);
        if v < bv {
            bx = x;
            bv = v;
        }
    }
    let (x, v) = golden_min(&f, (bx - h).max(lo), (bx + h).min(hi), 1e-12 * (1.0 + bx.abs()));
    if v < bv {
        (x, v)
    } else {
        (bx, bv)
    }
}

/// Minimum over the audit window of `d/dx x^{*-1}` (times θ).
pub(crate) fn min_mode_slope(model: &Model) -> (f64, f64) {
    let r = audit_radius(model);
    let th = model.theta();
    grid_min(|x| model.v_second(x) + th * model.p_second(x), -r, r, AUDIT_POINTS)
}

/// `x*(m)`: the unique solution of `V' + θ(P' - m) = 0` when `x^{*-1}` is
/// increasing, otherwise the global maximizer of the Gibbs factor
/// `exp(-2V̄(·,m)/σ²)` (the global minimizer of `V̄(·, m)`).
pub fn mode_x_star(model: &Model, m: f64) -> Result<ModeEstimate> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite m = {m}")));
    }
    let radius = model
        .confinement_radius(m)
        .ok_or_else(|| Error::NotNormalizable("drift does not confine".into()))?;
    let th = model.theta();
    let (_, slope) = min_mode_slope(model);
    if slope > 0.0 {
        let f = |x: f64| Ok(model.v_prime(x) + th * (model.p_prime(x) - m));
        let (lo, hi) = (-radius, radius);
        let root = roots::brent(f, lo, hi, Tolerance { x_tol: 1e-15, ..Default::default() })
            .map_err(|_| Error::BracketFailure { lo, hi })?;
        return Ok(ModeEstimate {
            x: root.x,
            tie: None,
            monotone: true,
        });
    }

    // Multimodal: enumerate local minima of V̄(·, m) on a grid.
    let n = AUDIT_POINTS;
    let xs: Vec<f64> = grid(-radius, radius, n).collect();
    let prof = model.antiderivative_profile(&xs);
    let vals: Vec<f64> = prof.iter().map(|p| p.vbar0 - th * m * p.a).collect();
    let h = 2.0 * radius / n as f64;
    let mut minima: Vec<(f64, f64)> = Vec::new();
    for i in 0..=n {
        let left = if i > 0 { vals[i - 1] } else { f64::INFINITY };
        let right = if i < n { vals[i + 1] } else { f64::INFINITY };
        if vals[i] <= left && vals[i] < right {
            let vb = |x: f64| model.effective_potential(x, m).unwrap_or(f64::INFINITY);
            let (x, v) = golden_min(vb, xs[i] - h, xs[i] + h, 1e-13 * (1.0 + xs[i].abs()));
            minima.push((x, v));
        }
    }
    let best = minima
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::BracketFailure { lo: -radius, hi: radius })?;
    let tol = 1e-9 * (1.0 + best.1.abs());
    let mut tied: Vec<(f64, f64)> = minima
        .iter()
        .copied()
        .filter(|&(x, v)| v - best.1 <= tol && (x - best.0).abs() > 10.0 * h)
        .collect();
    if tied.is_empty() {
        return Ok(ModeEstimate {
            x: best.0,
            tie: None,
            monotone: false,
        });
    }
    tied.push(best);
    // Larger |x| wins; the positive mode when the magnitudes agree to
    // golden-section accuracy.
    let same = |a: f64, b: f64| (a.abs() - b.abs()).abs() <= 1e-6 * (1.0 + a.abs());
    let mut wi = 0;
    for (i, &(x, _)) in tied.iter().enumerate().skip(1) {
        let w = tied[wi].0;
        if (same(x, w) && x > w) || (!same(x, w) && x.abs() > w.abs()) {
            wi = i;
        }
    }
    let winner = tied.swap_remove(wi);
    let other = tied
        .iter()
        .copied()
        .max_by(|a, b| (a.0 - winner.0).abs().total_cmp(&(b.0 - winner.0).abs()))
        .unwrap_or(winner);
    Ok(ModeEstimate {
        x: winner.0,
        tie: Some((other.0.min(winner.0), other.0.max(winner.0))),
        monotone: false,
    })
}

/// A zero of `V'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub x: f64,
    pub simple: bool,
}

fn is_simple(model: &Model, x: f64) -> bool {
    let deg = model.drift().base().degree().unwrap_or(0).max(2);
    model.v_second(x).abs() > 1e-8 * (1.0 + x.abs().powi(deg as i32 - 2))
}

/// All zeros of `V'` in `[lo, hi]`: sign changes on a dense grid refined by
/// Brent, plus touch points where `|V'|` has a numerically vanishing local
/// minimum without a sign change.
pub fn zeros_of_v_prime(model: &Model, lo: f64, hi: f64) -> Result<Vec<Zero>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!("bad interval [{lo}, {hi}]")));
    }
    let n = AUDIT_POINTS;
    let v = |x: f64| model.v_prime(x);
    let mut found: Vec<f64> = roots::sign_changes(v, lo, hi, n);

    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = grid(lo, hi, n).collect();
    let abs_vals: Vec<f64> = xs.iter().map(|&x| v(x).abs()).collect();
    let scale = abs_vals.iter().fold(0.0f64, |m, &a| m.max(a)).max(1.0);
    for i in 1..n {
        if abs_vals[i] <= abs_vals[i - 1] && abs_vals[i] <= abs_vals[i + 1] {
            let (x, a) = golden_min(|x| v(x).abs(), xs[i] - h, xs[i] + h, 1e-14);
            let changes_sign = v(x - h) * v(x + h) < 0.0;
            if a <= 1e-12 * scale && !changes_sign && !found.iter().any(|r| (r - x).abs() < 2.0 * h) {
                found.push(x);
            }
        }
    }
    found.sort_by(f64::total_cmp);
    found.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    Ok(found
        .into_iter()
        .map(|x| Zero {
            x,
            simple: is_simple(model, x),
        })
        .collect())
}

/// Result of the convexity threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaStar {
    pub theta: f64,
    /// False when even the top of the search range does not make
    /// `V' + θP'` strictly increasing; `theta` is then the range top.
    pub found: bool,
}

/// Smallest `θ` in `[lo, hi]` (to 1e-6) for which `V' + θP'` has a strictly
/// positive derivative on the audit grid.
pub fn find_theta_star(model: &Model, lo: f64, hi: f64) -> Result<ThetaStar> {
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(Error::InvalidArgument(format!("bad search range [{lo}, {hi}]")));
    }
    let r = {
        let vpp = model.drift().base();
        let second: Vec<f64> = vpp
            .poly
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, c)| c * (i * (i - 1)) as f64)
            .collect();
        let second = crate::function::FunctionSpec::polynomial(second);
        second.zero_free_radius().unwrap_or(1.0).max(audit_radius(model)) + 1.0
    };
    let (_, p_min) = grid_min(|x| model.p_second(x), -r, r, AUDIT_POINTS);
    if p_min <= 0.0 {
        return Err(Error::NotApplicable(format!(
            "P'' has no positive lower bound on [-{r}, {r}] (min {p_min})"
        )));
    }
    let ok = |theta: f64| {
        let (_, v) = grid_min(|x| model.v_second(x) + theta * model.p_second(x), -r, r, AUDIT_POINTS);
        v > 0.0
    };
    if ok(lo) {
        return Ok(ThetaStar { theta: lo, found: true });
    }
    if !ok(hi) {
        return Ok(ThetaStar { theta: hi, found: false });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-7 {
        let mid = 0.5 * (a + b);
        if ok(mid) {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(ThetaStar { theta: b, found: true })
}
