//! The first-moment function `F`, the self-consistency function `G`, the
//! covariance form of `∂F/∂m`, root location, the small-noise limit and the
//! series coefficients of the symmetric case.
//!
//! All expectations use the normalized density `ρ̂` at `(σ, m)`:
//!
//! * `F(m) = E[-V'] / θ`
//! * `G(m) = E[P'] - m`
//! * `∂F/∂m = (2/σ²) Cov(a, -V')`
//!
//! `F` and `G` coincide after an integration by parts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mode_x_star, zeros_of_v_prime, Model};
use crate::quadrature::{build_context, build_context_with, farthest_root, BuildOptions, DensityContext};
use crate::roots::{bisect_with_sign, brent, Tolerance};

/// `F`, `G` and `∂F/∂m` from one density context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub m: f64,
    pub f: f64,
    pub g: f64,
    pub dfdm: f64,
}

/// Evaluate `F`, `G` and `∂F/∂m` on an existing context.
pub fn evaluate_on(ctx: &DensityContext) -> Evaluation {
    let theta = ctx.model().theta();
    let [mv, p, a, a_mv] = ctx.expectations(|s| [-s.v_prime, s.p_prime, s.a, -s.a * s.v_prime]);
    let beta = 2.0 / (ctx.sigma() * ctx.sigma());
    // Centre a before forming the covariance to limit cancellation.
    let cov = {
        let [c] = ctx.expectations(|s| [(s.a - a) * (-s.v_prime - mv)]);
        if c.is_finite() {
            c
        } else {
            a_mv - a * mv
        }
    };
    Evaluation {
        m: ctx.m(),
        f: mv / theta,
        g: p - ctx.m(),
        dfdm: beta * cov,
    }
}

pub fn evaluate(model: &Model, sigma: f64, m: f64) -> Result<Evaluation> {
    Ok(evaluate_on(&build_context(model, sigma, m)?))
}

/// `F_σ(m) = E_ρ̂[-V'] / θ`.
pub fn f_value(model: &Model, sigma: f64, m: f64) -> Result<f64> {
    let ctx = build_context(model, sigma, m)?;
    let [mv] = ctx.expectations(|s| [-s.v_prime]);
    Ok(mv / model.theta())
}

/// `G_σ(m) = E_ρ̂[P'] - m`.
pub fn g_value(model: &Model, sigma: f64, m: f64) -> Result<f64> {
    let ctx = build_context(model, sigma, m)?;
    let [p] = ctx.expectations(|s| [s.p_prime]);
    Ok(p - m)
}

/// `∂F/∂m = (2/σ²) Cov_ρ̂(a, -V')`.
pub fn dfdm(model: &Model, sigma: f64, m: f64) -> Result<f64> {
    Ok(evaluate(model, sigma, m)?.dfdm)
}

/// How `F` crosses zero at a root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Crossing {
    /// `F` goes from negative to positive (unstable branch).
    Increasing,
    /// `F` goes from positive to negative (stable branch).
    Decreasing,
    /// Vanishing slope; multiplicity above one.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub m: f64,
    /// `F(m)` at the reported location.
    pub residual: f64,
    /// `∂F/∂m` from the covariance form.
    pub slope: f64,
    pub crossing: Crossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub sigma: f64,
    pub roots: Vec<Root>,
    /// Half-width of the symmetric scan window.
    pub window: f64,
    pub grid_points: usize,
    /// Number of density contexts built.
    pub evaluations: usize,
}

impl RootReport {
    pub fn positive_roots(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| r.m > 0.0)
    }

    pub fn locations(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.m).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootOptions {
    /// Uniform grid size over `[-M, M]`; forced odd so that `0` is a node.
    pub grid_points: usize,
    /// Roots are refined until `|F| <` this.
    pub f_tol: f64,
    /// Roots closer than this fraction of the window width are merged.
    pub dedup: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            grid_points: 401,
            f_tol: 1e-10,
            dedup: 1e-6,
        }
    }
}

/// Initial window half-width: the range of `x^{*-1}` over a neighbourhood
/// of the zeros of `V'`, padded by 20%. Callers double it until `F` has the
/// sign of `-m` at both ends.
fn initial_window(model: &Model) -> Result<f64> {
    let r = model
        .confinement_radius(0.0)
        .ok_or_else(|| Error::NotNormalizable("drift does not confine".into()))?;
    let reach = zeros_of_v_prime(model, -1.5 * r - 1.0, 1.5 * r + 1.0)?
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.x.abs()))
        * 1.2;
    let th = model.theta();
    let inv = |x: f64| ((model.v_prime(x) + th * model.p_prime(x)) / th).abs();
    let widest = (0..=200)
        .map(|i| inv(-reach + 2.0 * reach * i as f64 / 200.0))
        .fold(0.0, f64::max);
    Ok((1.2 * widest).max(1.0))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// All zeros of `F_σ` on a window outside which `F` has the sign of `-m`.
pub fn find_roots(model: &Model, sigma: f64) -> Result<RootReport> {
    find_roots_with(model, sigma, RootOptions::default())
}

pub fn find_roots_with(model: &Model, sigma: f64, opts: RootOptions) -> Result<RootReport> {
    let mut evaluations = 0usize;
    let mut half = initial_window(model)?;
    let mut doublings = 0;
    loop {
        let right = f_value(model, sigma, half)?;
        let left = f_value(model, sigma, -half)?;
        evaluations += 2;
        // The signs must persist one doubling further out.
        if right < 0.0 && left > 0.0 {
            let outer_right = f_value(model, sigma, 2.0 * half)?;
            let outer_left = f_value(model, sigma, -2.0 * half)?;
            evaluations += 2;
            if outer_right < 0.0 && outer_left > 0.0 {
                break;
            }
        }
        doublings += 1;
        if doublings > 20 {
            return Err(Error::WindowTooSmall { half_width: half });
        }
        half *= 2.0;
    }

    let n = (opts.grid_points.max(3) / 2) * 2 + 1;
    let ms: Vec<f64> = (0..n)
        .map(|i| {
            let c = i as isize - (n / 2) as isize;
            half * c as f64 / (n / 2) as f64
        })
        .collect();
    let evals: Vec<Result<Evaluation>> = crate::par_map(&ms, |&m| evaluate(model, sigma, m));
    let evals: Vec<Evaluation> = evals.into_iter().collect::<Result<_>>()?;
    evaluations += n;

    let f = |m: f64| f_value(model, sigma, m);
    let tol = Tolerance {
        x_tol: 1e-14 * half,
        f_tol: opts.f_tol,
        max_iter: 200,
    };
    let mut found: Vec<f64> = Vec::new();
    let is_zero = |e: &Evaluation| e.f.abs() < opts.f_tol;
    // Sign of F immediately to the right/left of grid point i.
    let right_sign = |e: &Evaluation| if is_zero(e) { sign(e.dfdm) } else { sign(e.f) };
    let left_sign = |e: &Evaluation| if is_zero(e) { -sign(e.dfdm) } else { sign(e.f) };
    for i in 0..n {
        if is_zero(&evals[i]) {
            found.push(ms[i]);
        }
        if i + 1 == n {
            break;
        }
        let (a, b) = (&evals[i], &evals[i + 1]);
        let sa = right_sign(a);
        let sb = left_sign(b);
        if sa == 0.0 || sb == 0.0 || sa == sb {
            continue;
        }
        let root = match (is_zero(a), is_zero(b)) {
            (false, false) => brent(f, ms[i], ms[i + 1], tol)?,
            (true, _) => bisect_with_sign(f, ms[i], sa, ms[i + 1], tol)?,
            (false, true) => bisect_with_sign(f, ms[i + 1], -sb, ms[i], tol)?,
        };
        evaluations += root.iterations;
        found.push(root.x);
    }
    found.sort_by(f64::total_cmp);
    let radius = opts.dedup * 2.0 * half;
    found.dedup_by(|a, b| (*a - *b).abs() < radius);

    let roots = found
        .into_iter()
        .map(|m| {
            let e = evaluate(model, sigma, m)?;
            evaluations += 1;
            let crossing = if e.dfdm.abs() < 1e-9 {
                Crossing::Degenerate
            } else if e.dfdm > 0.0 {
                Crossing::Increasing
            } else {
                Crossing::Decreasing
            };
            Ok(Root {
                m,
                residual: e.f,
                slope: e.dfdm,
                crossing,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RootReport {
        sigma,
        roots,
        window: half,
        grid_points: n,
        evaluations,
    })
}

/// Small-noise limit of `F` at `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceLimit {
    /// `-V'(x*(m)) / θ`
    pub value: f64,
    pub x_star: f64,
    /// Average of the limits at both modes when they tie.
    pub tie_average: Option<f64>,
}

/// `lim_{σ→0} F_σ(m) = -V'(x*(m)) / θ`.
pub fn laplace_limit(model: &Model, m: f64) -> Result<LaplaceLimit> {
    let mode = mode_x_star(model, m)?;
    let th = model.theta();
    let at = |x: f64| -model.v_prime(x) / th;
    Ok(LaplaceLimit {
        value: at(mode.x),
        x_star: mode.x,
        tie_average: mode.tie.map(|(l, r)| 0.5 * (at(l) + at(r))),
    })
}

/// One term of the series in odd powers of `a` at `m = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub n: u32,
    /// `sign(I(2n-1))`
    pub sign: f64,
    /// `log |I(2n-1)|`; kept in log form since `a(x*)^{2n-1}` may overflow.
    pub log_abs: f64,
    /// `Ĩ(2n-1) = I(2n-1) / a(x*)^{2n-1} = 2(a_n - b_n - c_n)`
    pub scaled: f64,
    /// `∫_0^{x*} (-V')_+ ã^{2n-1} ρ̂`
    pub a_n: f64,
    /// `∫_0^{x*} (-V')_- ã^{2n-1} ρ̂`
    pub b_n: f64,
    /// `∫_{x*}^∞ (-V')_- ã^{2n-1} ρ̂`
    pub c_n: f64,
}

impl SeriesTerm {
    /// `I(2n-1)`, possibly infinite.
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub sigma: f64,
    pub x_star: f64,
    /// `a(x*)`
    pub a_star: f64,
    pub terms: Vec<SeriesTerm>,
}

impl SeriesCoefficients {
    pub fn scaled(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.scaled).collect()
    }

    /// Whether `Ĩ(2n-1)` is strictly decreasing over all terms.
    pub fn scaled_decreasing(&self) -> bool {
        self.terms.windows(2).all(|w| w[1].scaled < w[0].scaled)
    }

    /// Largest `n` such that `I(2k-1) >= 0` for all `k <= n`, if the sign
    /// pattern is "nonnegative then negative".
    pub fn sign_threshold(&self) -> Option<u32> {
        let k = self.terms.iter().take_while(|t| t.sign >= 0.0).count();
        if self.terms[k..].iter().all(|t| t.sign < 0.0) {
            Some(k as u32)
        } else {
            None
        }
    }
}

/// `I(2n-1) = 2 ∫_0^∞ (-V') a^{2n-1} ρ̂` for `n = 1..=n_max` at `m = 0`,
/// together with the scaled values and their three-part decomposition.
pub fn series_coefficients(model: &Model, sigma: f64, n_max: u32) -> Result<SeriesCoefficients> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let x_star = farthest_root(model)?;
    let a_star = model.a_of_x(x_star)?;
    let degree = model.drift().base().degree().unwrap_or(1) as u32 + 2 * n_max;
    let ctx = build_context_with(
        model,
        sigma,
        0.0,
        BuildOptions {
            moment_degree: Some(degree),
            ..Default::default()
        },
    )?;
    let mut terms = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let p = 2 * n as i32 - 1;
        let inner = |part: fn(f64) -> f64| {
            ctx.interval_expectation(move |s| part(-s.v_prime) * (s.a / a_star).powi(p), 0.0, x_star)
        };
        let a_n = inner(|v| v.max(0.0));
        let b_n = inner(|v| (-v).max(0.0));
        let c_n = ctx.interval_expectation(
            |s| (s.v_prime).max(0.0) * (s.a / a_star).powi(p),
            x_star,
            f64::INFINITY,
        );
        let c_pos = ctx.interval_expectation(
            |s| (-s.v_prime).max(0.0) * (s.a / a_star).powi(p),
            x_star,
            f64::INFINITY,
        );
        // Beyond x* the positive part vanishes under the farthest-root
        // condition; any residue is folded in so Ĩ stays exact.
        let scaled = 2.0 * (a_n - b_n - c_n + c_pos);
        terms.push(SeriesTerm {
            n,
            sign: sign(scaled),
            log_abs: scaled.abs().ln() + p as f64 * a_star.ln(),
            scaled,
            a_n,
            b_n,
            c_n,
        });
    }
    Ok(SeriesCoefficients {
        sigma,
        x_star,
        a_star,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn gaussian(theta: f64) -> Model {
        Model::new(ModelSpec::polynomial(&[0.0, 1.0], &[0.0, 1.0], theta)).unwrap()
    }

    fn bistable(theta: f64) -> Model {
        Model::new(ModelSpec::polynomial(&[0.0, -1.0, 0.0, 1.0], &[0.0, 1.0], theta)).unwrap()
    }

    #[test]
    fn gaussian_closed_forms() {
        let m = gaussian(1.0);
        let e = evaluate(&m, 0.7, 0.6).unwrap();
        assert!((e.f + 0.3).abs() < 1e-12);
        assert!((e.g + 0.3).abs() < 1e-12);
        assert!((e.dfdm + 0.5).abs() < 1e-11);
    }

    #[test]
    fn symmetric_model_vanishes_at_zero() {
        let e = evaluate(&bistable(2.0), 0.8, 0.0).unwrap();
        assert!(e.f.abs() < 1e-11 && e.g.abs() < 1e-11);
    }

    #[test]
    fn large_noise_pulls_back() {
        assert!(f_value(&bistable(2.0), 10.0, 2.0).unwrap() < 0.0);
    }

    #[test]
    fn covariance_matches_finite_difference() {
        let m = bistable(2.0);
        for &(s, mm) in &[(0.5, 0.2), (1.0, -0.4), (0.3, 0.9)] {
            let h = 1e-4;
            let fd = (f_value(&m, s, mm + h).unwrap() - f_value(&m, s, mm - h).unwrap()) / (2.0 * h);
            let d = dfdm(&m, s, mm).unwrap();
            assert!((d - fd).abs() < 1e-6, "σ={s} m={mm}: {d} vs {fd}");
        }
    }

    #[test]
    fn small_noise_slope_positive() {
        assert!(dfdm(&bistable(2.0), 0.05, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn roots_bistable_and_gaussian() {
        let r = find_roots(&bistable(2.0), 0.3).unwrap();
        assert_eq!(r.roots.len(), 3, "{r:?}");
        assert!((r.roots[0].m + r.roots[2].m).abs() < 1e-8);
        assert!(r.roots[1].m.abs() < 1e-12);
        assert_eq!(r.roots[0].crossing, Crossing::Decreasing);
        assert_eq!(r.roots[1].crossing, Crossing::Increasing);
        let r = find_roots(&bistable(2.0), 5.0).unwrap();
        assert_eq!(r.locations().len(), 1);
        let r = find_roots(&gaussian(0.5), 1.0).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert!(r.roots[0].m.abs() < 1e-10);
    }

    #[test]
    fn laplace_examples() {
        let m = bistable(2.0);
        assert!(laplace_limit(&m, 1.0).unwrap().value.abs() < 1e-13);
        assert!(laplace_limit(&m, 0.0).unwrap().value.abs() < 1e-13);
        // x* is the real root of x³ + x - 1
        let r = crate::roots::brent(|x| Ok(x * x * x + x - 1.0), 0.0, 1.0, Tolerance::default()).unwrap();
        let want = -(r.x.powi(3) - r.x) / 2.0;
        let got = laplace_limit(&m, 0.5).unwrap();
        assert!((got.x_star - 0.68233).abs() < 1e-5);
        assert!((got.value - want).abs() < 1e-12 && (want - 0.182328).abs() < 1e-5);
    }

    #[test]
    fn series_bistable() {
        let s = series_coefficients(&bistable(2.0), 0.5, 8).unwrap();
        assert!(s.terms.iter().all(|t| t.b_n == 0.0));
        assert!(s.scaled_decreasing(), "{:?}", s.scaled());
        assert!(s.sign_threshold().is_some());
        // D = (2/σ²) E[a(-V')] = (2/σ²) a(x*) Ĩ(1) at m = 0
        let d = dfdm(&bistable(2.0), 0.5, 0.0).unwrap();
        let from_series = 8.0 * s.a_star * s.terms[0].scaled;
        assert!((d - from_series).abs() < 1e-9 * (1.0 + d.abs()), "{d} vs {from_series}");
    }
}
