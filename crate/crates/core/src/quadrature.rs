//! Expectations under the stationary density
//! `ρ̂(x) ∝ k⁻²(x) exp(-(2/σ²) V̄(x, m))`.
//!
//! A [`DensityContext`] fixes `(σ, m)`, finds the global minimum of `V̄(·, m)`
//! and stores Gauss–Legendre panels covering the window on which the shifted
//! Gibbs factor exceeds `ε² · 1e-300`. Panels are refined adaptively until the
//! mass (weighted by a polynomial moment) agrees with that of the two halves,
//! and the discarded tails are bounded against the total mass. Every
//! expectation afterwards is a plain weighted sum over the cached nodes.

use crate::error::{Error, Result};
use crate::gauss;
use crate::model::{zeros_of_v_prime, Antiderivatives, Model, PanelValues};
use crate::roots::golden_min;

/// Grid used to locate the global minimum of the effective potential.
const SCAN_POINTS: usize = 2000;
/// Maximum panel bisection depth.
const MAX_DEPTH: u32 = 40;
/// Cap on the number of accepted panels.
const MAX_PANELS: usize = 200_000;

/// Tunable knobs of [`build_context_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Relative tolerance of the adaptive panel refinement on the total mass.
    pub rel_tol: f64,
    /// Certified bound on discarded tail mass relative to the total.
    pub tail_tol: f64,
    /// Multiplies the distance of each window edge from the density mode.
    pub window_scale: f64,
    /// Degree `q` of the moment `(1 + |x|^q) ρ` driving refinement. Defaults
    /// to one more than the degree of `V'`, covering the integrands of `F`
    /// and its covariance derivative.
    pub moment_degree: Option<u32>,
    /// Initial number of panels across the window.
    pub initial_panels: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            tail_tol: 1e-14,
            window_scale: 1.0,
            moment_degree: None,
            initial_panels: 48,
        }
    }
}

/// Values available to integrands at every quadrature node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub v_prime: f64,
    pub p_prime: f64,
    pub inv_k2: f64,
    /// `a(x) = ∫_0^x k⁻²`
    pub a: f64,
    /// `V̄(x, 0)`
    pub vbar0: f64,
    /// `∫_0^x P'/k²`
    pub p_int: f64,
}

#[derive(Debug, Clone, Copy)]
struct PanelRecord {
    lo: f64,
    hi: f64,
    at_lo: Antiderivatives,
    /// Index of the first node of this panel in the sample arrays.
    first: usize,
}

/// Integration region for [`half_line_expectation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Side {
    /// `[0, ∞)`
    Positive,
    /// `(-∞, 0]`
    Negative,
    /// `[x*, ∞)` with `x*` the farthest positive zero of `V'`.
    BeyondRoot,
    /// `[0, x*]`
    InsideRoot,
    /// An explicit interval; infinite ends are allowed.
    Interval(f64, f64),
}

/// Cached stationary density for one `(σ, m)`.
#[derive(Debug, Clone)]
pub struct DensityContext {
    model: Model,
    sigma: f64,
    m: f64,
    /// `min (2/σ²) V̄(·, m)`, subtracted inside the exponent.
    shift: f64,
    /// `log Z` with `Z = ∫ k⁻² exp(-(2/σ²)V̄ + shift)`.
    log_norm: f64,
    truncation: (f64, f64),
    mode: f64,
    panels: Vec<PanelRecord>,
    samples: Vec<Sample>,
    /// Unnormalized node weights `w_i k⁻² exp(-(2/σ²)V̄ + shift)`.
    weights: Vec<f64>,
    mass: f64,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")))
    }
}

/// Build the density context with default options.
pub fn build_context(model: &Model, sigma: f64, m: f64) -> Result<DensityContext> {
    build_context_with(model, sigma, m, BuildOptions::default())
}

struct Builder<'a> {
    model: &'a Model,
    beta: f64,
    theta_m: f64,
    shift: f64,
    q: i32,
}

impl Builder<'_> {
    #[inline]
    fn exponent(&self, ad: &Antiderivatives) -> f64 {
        self.beta * (ad.vbar0 - self.theta_m * ad.a)
    }

    fn density(&self, ad: &Antiderivatives, inv_k2: f64) -> f64 {
        inv_k2 * (self.shift - self.exponent(ad)).exp()
    }

    /// `(mass, moment, noise)` of a panel, where `noise` estimates the
    /// rounding error of the moment carried in from the exponent.
    fn measure(&self, pv: &PanelValues) -> (f64, f64, f64) {
        let mut mass = 0.0;
        let mut moment = 0.0;
        let mut noise = 0.0;
        for k in 0..gauss::ORDER {
            let ad = &pv.anti[k];
            let d = pv.w[k].abs() * self.density(ad, pv.inv_k2[k]);
            let mo = d * (1.0 + pv.x[k].abs().powi(self.q));
            mass += d;
            moment += mo;
            let scale = 1.0 + self.beta * (ad.vbar0.abs() + (self.theta_m * ad.a).abs()) + self.shift.abs();
            noise += mo * scale;
        }
        (mass, moment, 64.0 * f64::EPSILON * noise)
    }

    /// Recursively bisect `[lo, hi]` until the panel moment agrees with the
    /// sum over its halves. Appends accepted panels in order.
    fn refine(
        &self,
        lo: f64,
        hi: f64,
        whole: PanelValues,
        at_lo: Antiderivatives,
        abs_tol: f64,
        depth: u32,
        out: &mut Vec<(f64, f64, Antiderivatives, PanelValues)>,
    ) -> Result<()> {
        let mid = 0.5 * (lo + hi);
        let left = self.model.panel(lo, mid, at_lo);
        let right = self.model.panel(mid, hi, left.at_hi);
        let (_, mw, _) = self.measure(&whole);
        let (_, ml, nl) = self.measure(&left);
        let (_, mr, nr) = self.measure(&right);
        // Differences below the rounding noise of the halves cannot be resolved.
        let noise = nl + nr;
        if (mw - ml - mr).abs() <= abs_tol.max(noise) || (hi - lo).abs() < 1e-12 * (1.0 + lo.abs()) {
            out.push((lo, mid, at_lo, left.clone()));
            out.push((mid, hi, left.at_hi, right));
            return Ok(());
        }
        if depth >= MAX_DEPTH || out.len() >= MAX_PANELS {
            return Err(Error::QuadratureFailure(format!(
                "panel [{lo}, {hi}] not resolved within {MAX_DEPTH} bisections and {MAX_PANELS} panels"
            )));
        }
        let at_mid = left.at_hi;
        self.refine(lo, mid, left, at_lo, 0.5 * abs_tol, depth + 1, out)?;
        self.refine(mid, hi, right, at_mid, 0.5 * abs_tol, depth + 1, out)
    }
}

/// Build the density context: locate the mode, choose a certified window,
/// and integrate on adaptively refined panels.
pub fn build_context_with(model: &Model, sigma: f64, m: f64, opts: BuildOptions) -> Result<DensityContext> {
    check_sigma(sigma)?;
    if !m.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite m = {m}")));
    }
    let radius = model.confinement_radius(m).ok_or_else(|| {
        Error::NotNormalizable("V' + θ(P' - m) does not grow to ±∞ with the sign of x".into())
    })?;
    let beta = 2.0 / (sigma * sigma);
    let theta_m = model.theta() * m;
    let vbar = |ad: &Antiderivatives| ad.vbar0 - theta_m * ad.a;

    // Global minimum of V̄(·, m) on [-R, R]; outside, V̄ is monotone.
    let h = 2.0 * radius / SCAN_POINTS as f64;
    let xs: Vec<f64> = (0..=SCAN_POINTS).map(|i| -radius + h * i as f64).collect();
    let profile = model.antiderivative_profile(&xs);
    let vals: Vec<f64> = profile.iter().map(vbar).collect();
    let imin = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    let pointwise = |x: f64| vbar(&model.antiderivatives(x));
    let (mut x_min, mut v_min) = golden_min(
        pointwise,
        (xs[imin] - h).max(-radius),
        (xs[imin] + h).min(radius),
        1e-10 * (1.0 + radius),
    );
    if vals[imin] < v_min {
        x_min = xs[imin];
        v_min = vals[imin];
    }
    let shift = beta * v_min;
    let eps = model.spec().diffusion.epsilon;
    // Shifted exponent beyond which the integrand is below 1e-300.
    let cutoff = 300.0 * std::f64::consts::LN_10 - 2.0 * eps.ln();
    let excess = |x: f64| beta * pointwise(x) - shift;

    let edge = |dir: f64| -> Result<f64> {
        let boundary = dir * radius;
        let e_boundary = excess(boundary);
        if e_boundary < cutoff {
            // Walk outward where V̄ is increasing.
            let mut step = radius.max(1.0);
            let mut inner = boundary;
            let mut outer = boundary + dir * step;
            let mut guard = 0;
            while excess(outer) < cutoff {
                inner = outer;
                step *= 2.0;
                outer += dir * step;
                guard += 1;
                if guard > 60 {
                    return Err(Error::NotNormalizable("window does not close".into()));
                }
            }
            Ok(bisect_level(&excess, inner, outer, cutoff))
        } else {
            // Outermost scan point (from the boundary inward) still below the
            // cutoff; the minimizer closes the search when the density is
            // narrower than the scan spacing.
            let idx: Vec<usize> = if dir > 0.0 {
                (0..xs.len()).rev().filter(|&i| xs[i] > x_min).collect()
            } else {
                (0..xs.len()).filter(|&i| xs[i] < x_min).collect()
            };
            let mut prev = boundary;
            for i in idx {
                if beta * vals[i] - shift < cutoff {
                    return Ok(bisect_level(&excess, xs[i], prev, cutoff));
                }
                prev = xs[i];
            }
            Ok(bisect_level(&excess, x_min, prev, cutoff))
        }
    };
    let mut hi = edge(1.0)?;
    let mut lo = edge(-1.0)?;
    if opts.window_scale != 1.0 {
        hi = x_min + opts.window_scale * (hi - x_min);
        lo = x_min + opts.window_scale * (lo - x_min);
    }
    if hi <= lo {
        return Err(Error::QuadratureFailure(format!("degenerate window [{lo}, {hi}]")));
    }

    // Panel cut points: window ends, origin, drift breakpoints, the mode and
    // interior local minima of V̄ (secondary modes).
    let mut cuts = vec![lo, hi, x_min];
    if lo < 0.0 && hi > 0.0 {
        cuts.push(0.0);
    }
    cuts.extend(model.breakpoints().iter().copied().filter(|&b| b > lo && b < hi));
    for i in 1..SCAN_POINTS {
        if vals[i] < vals[i - 1] && vals[i] <= vals[i + 1] && xs[i] > lo && xs[i] < hi {
            cuts.push(xs[i]);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
    let h0 = (hi - lo) / opts.initial_panels.max(1) as f64;
    let mut grid = vec![cuts[0]];
    for w in cuts.windows(2) {
        let n = ((w[1] - w[0]) / h0).ceil().max(1.0) as usize;
        for j in 1..=n {
            grid.push(if j == n { w[1] } else { w[0] + (w[1] - w[0]) * j as f64 / n as f64 });
        }
    }

    // Integrate outward from the grid point nearest the origin.
    let anchor = (0..grid.len())
        .min_by(|&a, &b| grid[a].abs().total_cmp(&grid[b].abs()))
        .unwrap_or(0);
    let at_anchor = model.antiderivatives(grid[anchor]);
    let degree = opts
        .moment_degree
        .unwrap_or(model.drift().base().degree().unwrap_or(1) as u32 + 1) as i32;
    let builder = Builder {
        model,
        beta,
        theta_m,
        shift,
        q: degree,
    };
    let mut coarse = Vec::with_capacity(grid.len());
    let mut at = at_anchor;
    for i in anchor..grid.len() - 1 {
        let pv = model.panel(grid[i], grid[i + 1], at);
        coarse.push((grid[i], grid[i + 1], at, pv.clone()));
        at = pv.at_hi;
    }
    let mut at = at_anchor;
    for i in (1..=anchor).rev() {
        let pv = model.panel(grid[i], grid[i - 1], at);
        coarse.push((grid[i], grid[i - 1], at, pv.clone()));
        at = pv.at_hi;
    }
    let (coarse_mass, coarse_moment) = coarse.iter().fold((0.0, 0.0), |acc, (_, _, _, pv)| {
        let (ms, mo, _) = builder.measure(pv);
        (acc.0 + ms, acc.1 + mo)
    });
    if !(coarse_mass.is_finite() && coarse_mass > 0.0) {
        return Err(Error::QuadratureFailure(format!("coarse mass {coarse_mass}")));
    }
    let abs_tol = opts.rel_tol * coarse_moment;
    let mut refined = Vec::new();
    for (a, b, at_lo, pv) in coarse {
        builder.refine(a, b, pv, at_lo, abs_tol, 0, &mut refined)?;
    }

    // Assemble samples and weights, panels sorted by position.
    let mut pieces: Vec<(f64, f64, Antiderivatives, PanelValues)> = refined;
    pieces.sort_by(|p, q| p.0.min(p.1).total_cmp(&q.0.min(q.1)));
    let mut panels = Vec::with_capacity(pieces.len());
    let mut samples = Vec::with_capacity(pieces.len() * gauss::ORDER);
    let mut weights = Vec::with_capacity(pieces.len() * gauss::ORDER);
    for (a, b, at_lo, pv) in pieces {
        panels.push(PanelRecord {
            lo: a,
            hi: b,
            at_lo,
            first: samples.len(),
        });
        for k in 0..gauss::ORDER {
            let ad = pv.anti[k];
            samples.push(Sample {
                x: pv.x[k],
                v_prime: pv.v_prime[k],
                p_prime: pv.p_prime[k],
                inv_k2: pv.inv_k2[k],
                a: ad.a,
                vbar0: ad.vbar0,
                p_int: ad.p_int,
            });
            weights.push(pv.w[k].abs() * builder.density(&ad, pv.inv_k2[k]));
        }
    }
    let mass = pairwise_sum(&weights);
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::QuadratureFailure(format!("total mass {mass}")));
    }

    // Tail certificate on each side.
    for (end, dir) in [(hi, 1.0), (lo, -1.0)] {
        let bound = tail_bound(model, &excess, end, dir, m, radius, beta, eps, &xs, &vals, shift);
        if !(bound <= opts.tail_tol * mass) {
            return Err(Error::QuadratureFailure(format!(
                "tail mass bound {bound:e} beyond {end} exceeds {:e}",
                opts.tail_tol * mass
            )));
        }
    }

    Ok(DensityContext {
        model: model.clone(),
        sigma,
        m,
        shift,
        log_norm: mass.ln(),
        truncation: (lo, hi),
        mode: x_min,
        panels,
        samples,
        weights,
        mass,
    })
}

/// Bisection for `f(x) = level` between `inside` (below) and `outside` (above).
fn bisect_level<F: Fn(f64) -> f64>(f: &F, inside: f64, outside: f64, level: f64) -> f64 {
    let (mut a, mut b) = (inside, outside);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        if f(mid) < level {
            a = mid;
        } else {
            b = mid;
        }
    }
    b
}

/// Bound on the mass of `k⁻² exp(-(2/σ²)V̄ + shift)` beyond `end` in
/// direction `dir`. Past the confinement radius `V̄` is increasing and is
/// bounded below by its tangent at the radius or at `end`, whichever is
/// farther out.
#[allow(clippy::too_many_arguments)]
fn tail_bound<F: Fn(f64) -> f64>(
    model: &Model,
    excess: &F,
    end: f64,
    dir: f64,
    m: f64,
    radius: f64,
    beta: f64,
    eps: f64,
    xs: &[f64],
    vals: &[f64],
    shift: f64,
) -> f64 {
    let inv_eps2 = 1.0 / (eps * eps);
    let mut bound = 0.0;
    let mut from = end;
    if dir * end < radius {
        let boundary = dir * radius;
        let worst = xs
            .iter()
            .zip(vals)
            .filter(|(&x, _)| dir * x >= dir * end)
            .map(|(_, &v)| beta * v - shift)
            .fold(excess(end), f64::min);
        bound += (boundary - end).abs() * inv_eps2 * (-worst).exp();
        from = boundary;
    }
    let slope = dir * model.vbar_slope(from, m);
    if slope <= 0.0 {
        return f64::INFINITY;
    }
    bound + inv_eps2 * (-excess(from)).exp() / (beta * slope)
}

/// Fixed-order pairwise summation.
pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

impl DensityContext {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn truncation(&self) -> (f64, f64) {
        self.truncation
    }

    /// Global minimizer of `V̄(·, m)` found while building the context.
    pub fn mode(&self) -> f64 {
        self.mode
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Normalized density `ρ̂` at an arbitrary point.
    pub fn density_at(&self, x: f64) -> f64 {
        let ad = self.model.antiderivatives(x);
        let beta = 2.0 / (self.sigma * self.sigma);
        let e = beta * (ad.vbar0 - self.model.theta() * self.m * ad.a);
        (self.shift - e - self.log_norm).exp() / self.model.k_squared(x)
    }

    /// Same context with `delta` added to the exponent shift; `log_norm`
    /// absorbs it, so normalized expectations are unchanged.
    pub fn with_extra_shift(&self, delta: f64) -> Self {
        let beta = 2.0 / (self.sigma * self.sigma);
        let shift = self.shift + delta;
        let theta_m = self.model.theta() * self.m;
        let mut out = self.clone();
        out.shift = shift;
        // Recover the node quadrature weights from stored panels.
        let r = gauss::rule();
        for p in &self.panels {
            let half = 0.5 * (p.hi - p.lo);
            for k in 0..gauss::ORDER {
                let s = &self.samples[p.first + k];
                let w = (half * r.weights[k]).abs();
                out.weights[p.first + k] =
                    w * s.inv_k2 * (shift - beta * (s.vbar0 - theta_m * s.a)).exp();
            }
        }
        out.mass = pairwise_sum(&out.weights);
        out.log_norm = out.mass.ln();
        out
    }

    /// `∫ g ρ̂` over the window.
    pub fn expectation<G: Fn(&Sample) -> f64>(&self, g: G) -> f64 {
        let terms: Vec<f64> = self.samples.iter().zip(&self.weights).map(|(s, w)| w * g(s)).collect();
        pairwise_sum(&terms) / self.mass
    }

    /// Several expectations in one pass over the nodes.
    pub fn expectations<const N: usize, G: Fn(&Sample) -> [f64; N]>(&self, g: G) -> [f64; N] {
        let mut acc = [0.0; N];
        let mut comp = [0.0; N];
        for (s, w) in self.samples.iter().zip(&self.weights) {
            let v = g(s);
            for j in 0..N {
                // Neumaier-compensated accumulation.
                let term = w * v[j];
                let t = acc[j] + term;
                if acc[j].abs() >= term.abs() {
                    comp[j] += (acc[j] - t) + term;
                } else {
                    comp[j] += (term - t) + acc[j];
                }
                acc[j] = t;
            }
        }
        let mut out = [0.0; N];
        for j in 0..N {
            out[j] = (acc[j] + comp[j]) / self.mass;
        }
        out
    }

    /// `∫_lo^hi g ρ̂`, re-integrating panels that straddle an end.
    pub fn interval_expectation<G: Fn(&Sample) -> f64>(&self, g: G, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.max(self.truncation.0), hi.min(self.truncation.1));
        if lo >= hi {
            return 0.0;
        }
        let beta = 2.0 / (self.sigma * self.sigma);
        let theta_m = self.model.theta() * self.m;
        let mut terms = Vec::new();
        for p in &self.panels {
            let (a, b) = (p.lo.min(p.hi), p.lo.max(p.hi));
            if b <= lo || a >= hi {
                continue;
            }
            if a >= lo && b <= hi {
                for k in p.first..p.first + gauss::ORDER {
                    terms.push(self.weights[k] * g(&self.samples[k]));
                }
                continue;
            }
            // Sub-panel from the panel's own start toward the clipped piece.
            let (ca, cb) = (a.max(lo), b.min(hi));
            let (start, end) = if p.lo <= p.hi { (ca, cb) } else { (cb, ca) };
            let at_start = if start == p.lo {
                p.at_lo
            } else {
                self.model.panel(p.lo, start, p.at_lo).at_hi
            };
            let pv = self.model.panel(start, end, at_start);
            for k in 0..gauss::ORDER {
                let ad = pv.anti[k];
                let s = Sample {
                    x: pv.x[k],
                    v_prime: pv.v_prime[k],
                    p_prime: pv.p_prime[k],
                    inv_k2: pv.inv_k2[k],
                    a: ad.a,
                    vbar0: ad.vbar0,
                    p_int: ad.p_int,
                };
                let w = pv.w[k].abs() * s.inv_k2 * (self.shift - beta * (s.vbar0 - theta_m * s.a)).exp();
                terms.push(w * g(&s));
            }
        }
        pairwise_sum(&terms) / self.mass
    }
}

/// `∫ g ρ̂` over the full line.
pub fn expectation<G: Fn(&Sample) -> f64>(ctx: &DensityContext, g: G) -> f64 {
    ctx.expectation(g)
}

/// Farthest positive zero of `V'` within the context window.
pub fn farthest_root(model: &Model) -> Result<f64> {
    let r = model.confinement_radius(0.0).unwrap_or(10.0) * 1.5 + 1.0;
    zeros_of_v_prime(model, 0.0, r)?
        .iter()
        .map(|z| z.x)
        .rfind(|&x| x > 1e-9)
        .ok_or_else(|| Error::NotApplicable("V' has no positive zero".into()))
}

/// `∫ g ρ̂` restricted to `side`, normalized by the full-line mass.
pub fn half_line_expectation<G: Fn(&Sample) -> f64>(ctx: &DensityContext, g: G, side: Side) -> Result<f64> {
    let inf = f64::INFINITY;
    let (lo, hi) = match side {
        Side::Positive => (0.0, inf),
        Side::Negative => (-inf, 0.0),
        Side::BeyondRoot => (farthest_root(ctx.model())?, inf),
        Side::InsideRoot => (0.0, farthest_root(ctx.model())?),
        Side::Interval(a, b) => {
            if a.is_nan() || b.is_nan() || a > b {
                return Err(Error::InvalidArgument(format!("bad interval [{a}, {b}]")));
            }
            (a, b)
        }
    };
    Ok(ctx.interval_expectation(g, lo, hi))
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
    fn gaussian_normalizer_and_moments() {
        let (theta, sigma, m) = (1.5, 0.6, 0.4);
        let ctx = build_context(&gaussian(theta), sigma, m).unwrap();
        let var = sigma * sigma / (2.0 * (1.0 + theta));
        let mean = theta * m / (1.0 + theta);
        assert!((ctx.log_norm() - 0.5 * (2.0 * std::f64::consts::PI * var).ln()).abs() < 1e-12);
        assert!((ctx.expectation(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((ctx.expectation(|s| s.x) - mean).abs() < 1e-13);
        assert!((ctx.expectation(|s| (s.x - mean).powi(2)) - var).abs() < 1e-13);
        assert!((ctx.mode() - mean).abs() < 1e-7);
    }

    #[test]
    fn density_integrates_to_one_pointwise() {
        let ctx = build_context(&bistable(2.0), 0.4, 0.3).unwrap();
        let (lo, hi) = ctx.truncation();
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let trap: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * ctx.density_at(lo + i as f64 * h)
            })
            .sum::<f64>()
            * h;
        assert!((trap - 1.0).abs() < 1e-6, "{trap}");
    }

    #[test]
    fn symmetric_model_gives_odd_moments_zero() {
        let ctx = build_context(&bistable(2.0), 0.5, 0.0).unwrap();
        let [m1, m3] = ctx.expectations(|s| [s.x, s.x.powi(3)]);
        assert!(m1.abs() < 1e-13 && m3.abs() < 1e-13);
        let pos = half_line_expectation(&ctx, |_| 1.0, Side::Positive).unwrap();
        let neg = half_line_expectation(&ctx, |_| 1.0, Side::Negative).unwrap();
        assert!((pos - 0.5).abs() < 1e-12 && (neg - 0.5).abs() < 1e-12);
    }

    #[test]
    fn extra_shift_leaves_expectations_unchanged() {
        let ctx = build_context(&bistable(2.0), 0.3, 0.2).unwrap();
        let moved = ctx.with_extra_shift(-7.5);
        let a = ctx.expectation(|s| -s.v_prime);
        let b = moved.expectation(|s| -s.v_prime);
        assert!((a - b).abs() < 1e-14 * (1.0 + a.abs()));
        assert!((moved.log_norm() - ctx.log_norm() + 7.5).abs() < 1e-9);
    }

    #[test]
    fn wider_window_agrees() {
        let model = bistable(2.0);
        let base = build_context(&model, 0.25, 0.1).unwrap();
        let wide = build_context_with(&model, 0.25, 0.1, BuildOptions { window_scale: 1.2, ..Default::default() }).unwrap();
        let f = |c: &DensityContext| c.expectation(|s| -s.v_prime);
        assert!((f(&base) - f(&wide)).abs() < 1e-12);
    }

    #[test]
    fn half_lines_add_up() {
        let ctx = build_context(&bistable(2.0), 0.35, 0.25).unwrap();
        let g = |s: &Sample| s.x * s.x - s.x;
        let total = ctx.expectation(g);
        let pos = half_line_expectation(&ctx, g, Side::Positive).unwrap();
        let neg = half_line_expectation(&ctx, g, Side::Negative).unwrap();
        assert!((pos + neg - total).abs() < 1e-12);
        let inside = half_line_expectation(&ctx, g, Side::InsideRoot).unwrap();
        let beyond = half_line_expectation(&ctx, g, Side::BeyondRoot).unwrap();
        assert!((inside + beyond - pos).abs() < 1e-12);
        let split = half_line_expectation(&ctx, g, Side::Interval(-0.3, 0.7)).unwrap()
            + half_line_expectation(&ctx, g, Side::Interval(0.7, f64::INFINITY)).unwrap()
            + half_line_expectation(&ctx, g, Side::Interval(f64::NEG_INFINITY, -0.3)).unwrap();
        assert!((split - total).abs() < 1e-12);
        assert!(half_line_expectation(&ctx, g, Side::Interval(1.0, 0.0)).is_err());
    }

    #[test]
    fn mode_sits_at_origin_for_strong_coupling_at_small_noise() {
        let ctx = build_context(&bistable(2.0), 0.1, 0.0).unwrap();
        // V̄(x,0) = x⁴/4 + x²/2 has its only minimum at 0
        assert!(ctx.mode().abs() < 1e-6);
    }

    #[test]
    fn farthest_root_of_bistable() {
        assert!((farthest_root(&bistable(2.0)).unwrap() - 1.0).abs() < 1e-10);
        assert!(farthest_root(&gaussian(1.0)).is_err());
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(build_context(&gaussian(1.0), 0.0, 0.0).is_err());
        assert!(build_context(&gaussian(1.0), f64::NAN, 0.0).is_err());
    }
}
