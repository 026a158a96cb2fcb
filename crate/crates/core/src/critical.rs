//! Critical noise levels and the multi-well toolkit.
//!
//! `D(σ) = ∂F/∂m` at `m = 0` changes sign exactly once for audited bistable
//! models; its root is the critical noise `σ_c`. Multi-well models are
//! handled through the threshold `σ_r`, a dominating bistable drift, and
//! direct scans of the root count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{DominatingDrift, Drift, FunctionSpec, ScaledDrift};
use crate::gauss;
use crate::model::{Model, ModelSpec};
use crate::quadrature::{build_context, farthest_root};
use crate::roots::{brent, sign_changes, Tolerance};
use crate::selfconsistency::{dfdm, find_roots, find_roots_with, series_coefficients, RootOptions, RootReport};

/// `D(σ) = ∂F/∂m |_{m=0}`.
pub fn d_sigma(model: &Model, sigma: f64) -> Result<f64> {
    dfdm(model, sigma, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalResult {
    pub sigma_c: Option<f64>,
    /// Final bracket `[lo, hi]` with `D(lo) > 0 > D(hi)`, or the expanded
    /// search range when no sign change was found.
    pub bracket: (f64, f64),
    pub d_lo: f64,
    pub d_hi: f64,
    pub iterations: usize,
    /// `D(σ_c)`
    pub d_at_root: f64,
    /// Central finite difference of `D` at `σ_c`.
    pub d_at_root_slope: f64,
}

const SIGMA_FLOOR: f64 = 1e-3;
const SIGMA_CEIL: f64 = 1e6;

/// Locate the unique sign change of `D`, expanding `hint` geometrically.
/// Returns `sigma_c: None` when `D` has no sign change on the expanded range.
pub fn sigma_c(model: &Model, hint: (f64, f64)) -> Result<CriticalResult> {
    let (mut lo, mut hi) = (hint.0.min(hint.1), hint.0.max(hint.1));
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad bracket hint {hint:?}")));
    }
    let d = |s: f64| d_sigma(model, s);
    let mut d_lo = d(lo)?;
    let mut d_hi = if hi == lo { d_lo } else { d(hi)? };
    let mut iterations = 2;
    let mut doublings = 0;
    while d_lo <= 0.0 && doublings < 60 && lo > SIGMA_FLOOR {
        if d_lo < 0.0 {
            hi = lo;
            d_hi = d_lo;
        }
        lo = (lo * 0.5).max(SIGMA_FLOOR);
        d_lo = d(lo)?;
        iterations += 1;
        doublings += 1;
    }
    while d_hi >= 0.0 && doublings < 60 && hi < SIGMA_CEIL {
        if d_hi > 0.0 {
            lo = hi;
            d_lo = d_hi;
        }
        hi *= 2.0;
        d_hi = d(hi)?;
        iterations += 1;
        doublings += 1;
    }
    if !(d_lo > 0.0 && d_hi < 0.0) {
        return Ok(CriticalResult {
            sigma_c: None,
            bracket: (lo, hi),
            d_lo,
            d_hi,
            iterations,
            d_at_root: f64::NAN,
            d_at_root_slope: f64::NAN,
        });
    }
    let root = brent(
        d,
        lo,
        hi,
        Tolerance {
            x_tol: 1e-12,
            f_tol: 1e-11,
            max_iter: 200,
        },
    )?;
    iterations += root.iterations;
    let s = root.x;
    let h = 1e-4 * s;
    let slope = (d(s + h)? - d(s - h)?) / (2.0 * h);
    Ok(CriticalResult {
        sigma_c: Some(s),
        bracket: (lo, hi),
        d_lo,
        d_hi,
        iterations: iterations + 2,
        d_at_root: root.fx,
        d_at_root_slope: slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurve {
    pub thetas: Vec<f64>,
    /// `σ*(θ)`: `σ_c` when it exists, `0` otherwise (and on failure).
    pub sigma_stars: Vec<f64>,
    /// Non-decreasing within the solver tolerance `1e-6`.
    pub monotone: bool,
    /// Every increment exceeds `1e-6`.
    pub strictly_increasing: bool,
    pub failures: Vec<Option<String>>,
}

impl CriticalCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,sigma_star\n");
        for (t, s) in self.thetas.iter().zip(&self.sigma_stars) {
            out.push_str(&format!("{t},{s}\n"));
        }
        out
    }
}

/// `σ*(θ)` along `thetas` (strictly increasing), warm-starting each bracket
/// at ±50% of the previous value.
pub fn sigma_star_curve(template: &Model, thetas: &[f64]) -> Result<CriticalCurve> {
    if thetas.windows(2).any(|w| w[1] <= w[0]) || thetas.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("thetas must be positive and strictly increasing".into()));
    }
    let mut sigma_stars = Vec::with_capacity(thetas.len());
    let mut failures = Vec::with_capacity(thetas.len());
    let mut hint = (0.25, 1.0);
    for &theta in thetas {
        let outcome = template.with_theta(theta).and_then(|m| sigma_c(&m, hint));
        match outcome {
            Ok(r) => {
                let s = r.sigma_c.unwrap_or(0.0);
                if s > 0.0 {
                    hint = (0.5 * s, 1.5 * s);
                }
                sigma_stars.push(s);
                failures.push(None);
            }
            Err(e) => {
                sigma_stars.push(0.0);
                failures.push(Some(e.to_string()));
            }
        }
    }
    let inc = |w: &[f64]| w[1] - w[0];
    Ok(CriticalCurve {
        thetas: thetas.to_vec(),
        monotone: sigma_stars.windows(2).all(|w| inc(w) > -1e-6),
        strictly_increasing: sigma_stars.windows(2).all(|w| inc(w) > 1e-6),
        sigma_stars,
        failures,
    })
}

/// `H(σ) = ∫_0^∞ (ã³ - ã) (-V')_- ρ̂(·, 0)` with `ã = a / a(x*)`.
pub fn h_sigma(model: &Model, sigma: f64) -> Result<f64> {
    let x_star = farthest_root(model)?;
    let a_star = model.a_of_x(x_star)?;
    let ctx = build_context(model, sigma, 0.0)?;
    Ok(ctx.interval_expectation(
        |s| {
            let t = s.a / a_star;
            (t * t * t - t) * s.v_prime.max(0.0)
        },
        0.0,
        f64::INFINITY,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaR {
    /// `0` when `H > 0` down to the smallest noise tried.
    pub sigma_r: f64,
    pub sign_change: bool,
    pub bracket: (f64, f64),
    pub h_lo: f64,
    pub h_hi: f64,
    pub iterations: usize,
}

/// The unique noise level where `H` changes sign from negative to positive.
pub fn sigma_r(model: &Model, hint: (f64, f64)) -> Result<SigmaR> {
    let (mut lo, mut hi) = (hint.0.min(hint.1), hint.0.max(hint.1));
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad bracket hint {hint:?}")));
    }
    let h = |s: f64| h_sigma(model, s);
    let mut h_lo = h(lo)?;
    let mut h_hi = if hi == lo { h_lo } else { h(hi)? };
    let mut iterations = 2;
    let mut doublings = 0;
    while h_lo >= 0.0 && doublings < 60 && lo > SIGMA_FLOOR * 10.0 {
        if h_lo > 0.0 {
            hi = lo;
            h_hi = h_lo;
        }
        lo = (lo * 0.5).max(SIGMA_FLOOR * 10.0);
        h_lo = h(lo)?;
        iterations += 1;
        doublings += 1;
    }
    // An exact zero means both signed parts underflowed: no negative value seen.
    if h_lo >= 0.0 {
        return Ok(SigmaR {
            sigma_r: 0.0,
            sign_change: false,
            bracket: (lo, hi),
            h_lo,
            h_hi,
            iterations,
        });
    }
    while h_hi <= 0.0 && doublings < 60 && hi < SIGMA_CEIL {
        if h_hi < 0.0 {
            lo = hi;
            h_lo = h_hi;
        }
        hi *= 2.0;
        h_hi = h(hi)?;
        iterations += 1;
        doublings += 1;
    }
    if !(h_lo < 0.0 && h_hi > 0.0) {
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo: h_lo,
            f_hi: h_hi,
        });
    }
    let root = brent(
        h,
        lo,
        hi,
        Tolerance {
            x_tol: 1e-9,
            ..Default::default()
        },
    )?;
    Ok(SigmaR {
        sigma_r: root.x,
        sign_change: true,
        bracket: (lo, hi),
        h_lo,
        h_hi,
        iterations: iterations + root.iterations,
    })
}

/// Replace `-V'` by `-V'_D = 1_{[0,x*]}(-V')_+ - 1_{[x*,∞)}(-V')_-`,
/// extended oddly, with `x*` the farthest positive zero of `V'`.
pub fn dominating_bistable(model: &Model) -> Result<Model> {
    let x_star = farthest_root(model)?;
    let spec = ModelSpec {
        v_prime: Drift::Dominating(DominatingDrift {
            base: Box::new(model.drift().clone()),
            x_star,
        }),
        ..model.spec().clone()
    };
    Model::new(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperEstimate {
    /// `max(σ_c^D, σ_r)`
    pub bound: f64,
    pub sigma_c_dominating: Option<f64>,
    pub sigma_r: f64,
    /// Largest noise with a positive root of `F`, refined to `1e-4`.
    pub scan_estimate: f64,
}

fn has_positive_root(model: &Model, sigma: f64) -> Result<bool> {
    Ok(find_roots(model, sigma)?.roots.iter().any(|r| r.m > 1e-9))
}

/// Largest `σ` in `[floor, ceil]` at which `F` has a positive root, from a
/// top-down scan of a log grid refined by bisection to `tol`.
pub fn scan_upper_threshold(model: &Model, floor: f64, ceil: f64, points: usize, tol: f64) -> Result<f64> {
    let points = points.max(2);
    let grid: Vec<f64> = (0..points)
        .map(|i| floor * (ceil / floor).powf(i as f64 / (points - 1) as f64))
        .collect();
    let flags = crate::par_map(&grid, |&s| has_positive_root(model, s));
    let flags: Vec<bool> = flags.into_iter().collect::<Result<_>>()?;
    let Some(top) = flags.iter().rposition(|&f| f) else {
        return Ok(0.0);
    };
    if top + 1 == points {
        return Ok(ceil);
    }
    let (mut a, mut b) = (grid[top], grid[top + 1]);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if has_positive_root(model, mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

pub fn sigma_c_upper_estimate(model: &Model) -> Result<UpperEstimate> {
    let dominating = dominating_bistable(model)?;
    let cd = sigma_c(&dominating, (0.25, 1.0))?;
    let sr = sigma_r(model, (0.25, 1.0))?;
    let bound = cd.sigma_c.unwrap_or(0.0).max(sr.sigma_r);
    let ceil = (2.0 * bound).max(1.0);
    let scan = scan_upper_threshold(model, 0.05, ceil, 24, 1e-4)?;
    Ok(UpperEstimate {
        bound,
        sigma_c_dominating: cd.sigma_c,
        sigma_r: sr.sigma_r,
        scan_estimate: scan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VainillaRow {
    pub sigma: f64,
    /// `∫_0^∞ ã (-V') (1 - Ṽ) ρ̂`
    pub ii1: f64,
    /// `∫_0^∞ ã (-V') (1 - P̃) ρ̂`
    pub ii2: f64,
    pub ii1_holds: bool,
    pub ii2_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VainillaReport {
    pub theta: f64,
    pub sigma_r: f64,
    /// Noise at which `Ĩ(1)` was evaluated: `σ_r`, or `0.05` when `σ_r = 0`.
    pub ii5_sigma: f64,
    /// `Ĩ(1)` at `ii5_sigma`.
    pub ii5: f64,
    pub ii5_holds: bool,
    pub rows: Vec<VainillaRow>,
    pub all_hold: bool,
}

impl VainillaReport {
    /// Smallest margin over all inequalities and grid points.
    pub fn min_margin(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.ii1, r.ii2])
            .fold(self.ii5, f64::min)
    }
}

/// The three inequalities that make `σ_c^u` increasing in `θ`, on a σ-grid.
pub fn check_vainilla(model: &Model, sigma_grid: &[f64], theta: f64) -> Result<VainillaReport> {
    let model = model.with_theta(theta)?;
    let x_star = farthest_root(&model)?;
    let at_star = model.antiderivatives(x_star);
    if !(at_star.vbar0 > 0.0 && at_star.p_int > 0.0) {
        return Err(Error::NotApplicable(format!(
            "V̄(x*,0) = {} and ∫P'/k² = {} must be positive",
            at_star.vbar0, at_star.p_int
        )));
    }
    let sr = sigma_r(&model, (0.25, 1.0))?;
    let ii5_sigma = if sr.sigma_r > 0.0 { sr.sigma_r } else { 0.05 };
    let ii5 = series_coefficients(&model, ii5_sigma, 1)?.terms[0].scaled;
    let rows = crate::par_map(sigma_grid, |&sigma| -> Result<VainillaRow> {
        let ctx = build_context(&model, sigma, 0.0)?;
        let a_star = at_star.a;
        let ii1 = ctx.interval_expectation(
            |s| s.a / a_star * (-s.v_prime) * (1.0 - s.vbar0 / at_star.vbar0),
            0.0,
            f64::INFINITY,
        );
        let ii2 = ctx.interval_expectation(
            |s| s.a / a_star * (-s.v_prime) * (1.0 - s.p_int / at_star.p_int),
            0.0,
            f64::INFINITY,
        );
        Ok(VainillaRow {
            sigma,
            ii1,
            ii2,
            ii1_holds: ii1 > 0.0,
            ii2_holds: ii2 > 0.0,
        })
    });
    let rows: Vec<VainillaRow> = rows.into_iter().collect::<Result<_>>()?;
    let all_hold = ii5 > 0.0 && rows.iter().all(|r| r.ii1_holds && r.ii2_holds);
    Ok(VainillaReport {
        theta,
        sigma_r: sr.sigma_r,
        ii5_sigma,
        ii5,
        ii5_holds: ii5 > 0.0,
        rows,
        all_hold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningCheck {
    /// Upper end of the `t` range (`1` or `√2` in rescaled coordinates).
    pub t_max: f64,
    /// `min_t I(t) / t³`; scale-free near `t = 0` where `I` vanishes.
    pub min_margin: f64,
    pub argmin_t: f64,
    pub first_violation: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C2fgReport {
    pub x_star: f64,
    /// `∫_0^t s(1-s)(f)_+ - s(f)_- > 0` for `t < 1`
    pub first: RunningCheck,
    /// `∫_0^t s((f)_+ - 2(f)_-) > 0` for `t < √2`
    pub second: RunningCheck,
}

impl C2fgReport {
    pub fn holds(&self) -> bool {
        self.first.holds && self.second.holds
    }
}

/// Running integrals `I(t) = ∫_0^t g` on `t_i = i t_max / n`, with panels
/// split at the sign changes of `f`.
fn running_integral<G: Fn(f64) -> f64>(g: G, f: &dyn Fn(f64) -> f64, t_max: f64, n: usize) -> RunningCheck {
    let kinks = sign_changes(f, 0.0, t_max, 20 * n.max(50));
    let mut total = 0.0;
    let mut prev = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut argmin = 0.0;
    let mut first_violation = None;
    for i in 1..=n {
        let t = t_max * i as f64 / n as f64;
        let mut cuts = vec![prev];
        cuts.extend(kinks.iter().copied().filter(|&k| k > prev && k < t));
        cuts.push(t);
        for w in cuts.windows(2) {
            total += gauss::integrate(&g, w[0], w[1], 1);
        }
        prev = t;
        let margin = total / (t * t * t);
        if margin < min_margin {
            min_margin = margin;
            argmin = t;
        }
        // The open range excludes t_max itself.
        if total <= 0.0 && first_violation.is_none() && i < n {
            first_violation = Some(t);
        }
    }
    RunningCheck {
        t_max,
        min_margin,
        argmin_t: argmin,
        holds: first_violation.is_none(),
        first_violation,
    }
}

fn quadratic_unit_interaction(model: &Model) -> bool {
    let spec = model.spec();
    let p = &spec.p_prime;
    let k2 = &spec.diffusion.k_squared;
    p.trig.is_empty()
        && p.eval(0.0) == 0.0
        && p.degree() == Some(1)
        && p.leading_coefficient() == 1.0
        && k2.constant_value() == Some(1.0)
}

/// Check the two running-integral inequalities in coordinates rescaled so
/// that `x* = 1`; requires `P' = x` and `k = 1`.
pub fn check_c2fg(model: &Model, t_resolution: usize) -> Result<C2fgReport> {
    if !quadratic_unit_interaction(model) {
        return Err(Error::NotApplicable("requires P' = x and k = 1".into()));
    }
    if t_resolution < 2 {
        return Err(Error::InvalidArgument("t_resolution must be at least 2".into()));
    }
    let x_star = farthest_root(model)?;
    let f = |t: f64| -model.v_prime(x_star * t);
    let pos = |t: f64| f(t).max(0.0);
    let neg = |t: f64| (-f(t)).max(0.0);
    let first = running_integral(|s| s * (1.0 - s) * pos(s) - s * neg(s), &f, 1.0, t_resolution);
    let second = running_integral(|s| s * (pos(s) - 2.0 * neg(s)), &f, 2f64.sqrt(), t_resolution);
    Ok(C2fgReport { x_star, first, second })
}

/// Parameters of [`construct_multiwell`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionOptions {
    /// Noise levels whose densities (at `m = 0`) weight the dominations, in
    /// addition to the unweighted versions.
    pub sigma_grid: Vec<f64>,
    /// Required ratio of dominating to dominated integral.
    pub margin: f64,
    /// Width of the C¹ blending bands.
    pub band: f64,
    /// Largest admissible scale factor.
    pub max_alpha: f64,
}

impl Default for ConstructionOptions {
    fn default() -> Self {
        Self {
            sigma_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            margin: 1.1,
            band: 0.01,
            max_alpha: 2f64.powi(40),
        }
    }
}

/// Integral of `g(x) w(x)` over `[a, b]` (original coordinates) with
/// `w = ρ̂` from `ctx` or `w ≡ 1`.
fn weighted(ctx: Option<&crate::quadrature::DensityContext>, g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    match ctx {
        Some(c) => c.interval_expectation(|s| g(s.x), a, b),
        None => gauss::integrate(g, a, b, 64),
    }
}

/// Scale `-V'` by `α₁` on `[0, x1]` and `α₂` on `[x2, x*]`, doubling each
/// factor until the dominations behind both running-integral inequalities
/// hold with the requested margin, with and without density weights.
pub fn construct_multiwell(base: &Model, x1: f64, x2: f64, opts: &ConstructionOptions) -> Result<Model> {
    let drift = base
        .drift()
        .as_function()
        .ok_or_else(|| Error::NotApplicable("base drift must be a plain function".into()))?
        .clone();
    if !drift.is_odd(1e-12) {
        return Err(Error::NotApplicable("base V' must be odd".into()));
    }
    let x_star = farthest_root(base)?;
    if !(0.0 < x1 && x1 < x2 && x2 < x_star) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < x1 < x2 < x* = {x_star}, got x1 = {x1}, x2 = {x2}"
        )));
    }
    let positive_on = |a: f64, b: f64| (1..200).all(|i| -drift.eval(a + (b - a) * i as f64 / 200.0) > 0.0);
    if !positive_on(0.0, x1) || !positive_on(x2, x_star) {
        return Err(Error::NotApplicable(
            "-V' must be positive on (0, x1) and (x2, x*)".into(),
        ));
    }
    let build = |alpha1: f64, alpha2: f64| -> Result<Model> {
        Model::new(ModelSpec {
            v_prime: Drift::Scaled(ScaledDrift {
                base: drift.clone(),
                x1,
                x2,
                x_star,
                alpha1,
                alpha2,
                band: opts.band,
            }),
            ..base.spec().clone()
        })
    };
    // In rescaled coordinates s = x / x*, (1 - s) becomes (1 - x / x*).
    let minus_v = |x: f64| -drift.eval(x);
    let neg = |x: f64| (-minus_v(x)).max(0.0);
    let (mut alpha1, mut alpha2) = (1.0, 1.0);
    loop {
        let candidate = build(alpha1, alpha2)?;
        let contexts: Vec<Option<crate::quadrature::DensityContext>> = std::iter::once(Ok(None))
            .chain(opts.sigma_grid.iter().map(|&s| build_context(&candidate, s, 0.0).map(Some)))
            .collect::<Result<_>>()?;
        let mut need1 = false;
        let mut need2 = false;
        for ctx in &contexts {
            let c = ctx.as_ref();
            let lhs1 = weighted(c, &|x| x * (1.0 - x / x_star) * minus_v(x), 0.0, x1);
            let lhs1b = weighted(c, &|x| x * minus_v(x), 0.0, x1);
            let rhs1 = weighted(c, &|x| x * neg(x), x1, x2);
            let lhs2 = weighted(c, &|x| x * minus_v(x), x2, x_star);
            let rhs2 = weighted(c, &|x| x * neg(x), x_star, 2f64.sqrt() * x_star);
            if alpha1 * lhs1 < opts.margin * rhs1 || alpha1 * lhs1b < opts.margin * 2.0 * rhs1 {
                need1 = true;
            }
            if alpha2 * lhs2 < opts.margin * 2.0 * rhs2 {
                need2 = true;
            }
        }
        if !need1 && !need2 {
            return Ok(candidate);
        }
        if need1 {
            alpha1 *= 2.0;
        }
        if need2 {
            alpha2 *= 2.0;
        }
        if alpha1 > opts.max_alpha || alpha2 > opts.max_alpha {
            return Err(Error::ConstructionFailure(format!(
                "no scale factors up to {} satisfy the dominations",
                opts.max_alpha
            )));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub sigmas: Vec<f64>,
    pub roots_per_sigma: Vec<Option<RootReport>>,
    pub errors: Vec<Option<String>>,
    /// `σ` values where the root count changes, refined by bisection.
    pub transition_estimates: Vec<f64>,
}

impl PhaseDiagram {
    pub fn counts(&self) -> Vec<Option<usize>> {
        self.roots_per_sigma
            .iter()
            .map(|r| r.as_ref().map(|r| r.roots.len()))
            .collect()
    }

    /// Columns `sigma, n_roots, m_1..m_k`, padded with empty cells.
    pub fn to_csv(&self) -> String {
        let k = self
            .roots_per_sigma
            .iter()
            .flatten()
            .map(|r| r.roots.len())
            .max()
            .unwrap_or(0);
        let mut out = String::from("sigma,n_roots");
        for j in 1..=k {
            out.push_str(&format!(",m_{j}"));
        }
        out.push('\n');
        for (s, r) in self.sigmas.iter().zip(&self.roots_per_sigma) {
            out.push_str(&format!("{s},"));
            match r {
                Some(r) => {
                    out.push_str(&r.roots.len().to_string());
                    for j in 0..k {
                        out.push(',');
                        if let Some(root) = r.roots.get(j) {
                            out.push_str(&root.m.to_string());
                        }
                    }
                }
                None => out.push_str(&",".repeat(k)),
            }
            out.push('\n');
        }
        out
    }
}

/// Root reports over a strictly increasing σ-grid, with each change in the
/// root count located by bisection to `1e-4`.
pub fn phase_diagram(model: &Model, sigma_grid: &[f64]) -> Result<PhaseDiagram> {
    phase_diagram_with(model, sigma_grid, RootOptions::default())
}

/// [`phase_diagram`] with explicit root-scan options.
pub fn phase_diagram_with(model: &Model, sigma_grid: &[f64], opts: RootOptions) -> Result<PhaseDiagram> {
    if sigma_grid.windows(2).any(|w| w[1] <= w[0]) || sigma_grid.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument(
            "sigma_grid must be positive and strictly increasing".into(),
        ));
    }
    let results = crate::par_map(sigma_grid, |&s| find_roots_with(model, s, opts));
    let mut roots_per_sigma = Vec::with_capacity(results.len());
    let mut errors = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(rep) => {
                roots_per_sigma.push(Some(rep));
                errors.push(None);
            }
            Err(e) => {
                roots_per_sigma.push(None);
                errors.push(Some(e.to_string()));
            }
        }
    }
    let count = |s: f64| find_roots_with(model, s, opts).map(|r| r.roots.len());
    let mut transition_estimates = Vec::new();
    for i in 0..sigma_grid.len().saturating_sub(1) {
        let (Some(a), Some(b)) = (&roots_per_sigma[i], &roots_per_sigma[i + 1]) else {
            continue;
        };
        let (ca, cb) = (a.roots.len(), b.roots.len());
        if ca == cb {
            continue;
        }
        let (mut lo, mut hi) = (sigma_grid[i], sigma_grid[i + 1]);
        while hi - lo > 1e-4 {
            let mid = 0.5 * (lo + hi);
            match count(mid) {
                Ok(c) if c == ca => lo = mid,
                Ok(_) => hi = mid,
                Err(_) => break,
            }
        }
        transition_estimates.push(0.5 * (lo + hi));
    }
    Ok(PhaseDiagram {
        sigmas: sigma_grid.to_vec(),
        roots_per_sigma,
        errors,
        transition_estimates,
    })
}

/// Seven-zero odd polynomial `x(x²-x1²)(x²-x2²)(x²-x*²)`: the smallest
/// confining odd polynomial with `-V' > 0` just right of the origin and two
/// interior wells.
pub fn multiwell_base(x1: f64, x2: f64, x_star: f64) -> FunctionSpec {
    FunctionSpec::from_roots(&[-x_star, -x2, -x1, 0.0, x1, x2, x_star], 1.0)
        .described(format!("x(x²-{x1}²)(x²-{x2}²)(x²-{x_star}²)"))
}
