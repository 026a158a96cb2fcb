//! McKean–Vlasov model instances: drift `V'`, interaction `P'`, diffusion
//! `k²`, aggregation strength `θ`, and the effective potential built from
//! them.

mod audit;
mod modes;

pub use audit::{audit_assumptions, AssumptionEntry, AssumptionReport, Regime, Verdict};
pub use modes::{find_theta_star, mode_x_star, zeros_of_v_prime, ModeEstimate, ThetaStar, Zero};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{Drift, FunctionSpec};
use crate::gauss;

/// Diffusion coefficient `k²` together with a certified lower bound `ε` on `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub k_squared: FunctionSpec,
    pub epsilon: f64,
}

impl DiffusionSpec {
    pub fn unit() -> Self {
        Self {
            k_squared: FunctionSpec::constant(1.0),
            epsilon: 1.0,
        }
    }
}

/// One MV-SDE instance `dX = (-V'(X) - θ(P'(X) - E[P'])) dt + σ k(X) dB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelFile", into = "ModelFile")]
pub struct ModelSpec {
    pub v_prime: Drift,
    pub p_prime: FunctionSpec,
    pub diffusion: DiffusionSpec,
    pub theta: f64,
}

/// On-disk layout of a model definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    v_prime: Drift,
    p_prime: FunctionSpec,
    #[serde(default = "unit_k_squared")]
    k_squared: FunctionSpec,
    #[serde(default = "unit_epsilon")]
    epsilon: f64,
    theta: f64,
}

fn unit_k_squared() -> FunctionSpec {
    FunctionSpec::constant(1.0)
}

fn unit_epsilon() -> f64 {
    1.0
}

impl From<ModelFile> for ModelSpec {
    fn from(f: ModelFile) -> Self {
        Self {
            v_prime: f.v_prime,
            p_prime: f.p_prime,
            diffusion: DiffusionSpec {
                k_squared: f.k_squared,
                epsilon: f.epsilon,
            },
            theta: f.theta,
        }
    }
}

impl From<ModelSpec> for ModelFile {
    fn from(m: ModelSpec) -> Self {
        Self {
            v_prime: m.v_prime,
            p_prime: m.p_prime,
            k_squared: m.diffusion.k_squared,
            epsilon: m.diffusion.epsilon,
            theta: m.theta,
        }
    }
}

impl ModelSpec {
    /// Unit diffusion model with polynomial `V'` and `P'`.
    pub fn polynomial(v_prime: &[f64], p_prime: &[f64], theta: f64) -> Self {
        Self {
            v_prime: Drift::Function(FunctionSpec::polynomial(v_prime.to_vec())),
            p_prime: FunctionSpec::polynomial(p_prime.to_vec()),
            diffusion: DiffusionSpec::unit(),
            theta,
        }
    }

    pub fn with_diffusion(mut self, k_squared: FunctionSpec, epsilon: f64) -> Self {
        self.diffusion = DiffusionSpec { k_squared, epsilon };
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }
}

/// Largest step used when integrating `V̄`, `a` pointwise from the origin.
const MAX_PANEL: f64 = 0.25;

/// A validated model with the bookkeeping needed by the quadrature engine.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    /// Constant `k²` when antiderivatives have closed forms.
    exact_k2: Option<f64>,
    breakpoints: Vec<f64>,
}

/// Antiderivatives from the origin at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Antiderivatives {
    /// `V̄(x, 0) = ∫_0^x (V' + θP') / k²`
    pub vbar0: f64,
    /// `a(x) = ∫_0^x 1 / k²`
    pub a: f64,
    /// `∫_0^x P' / k²`
    pub p_int: f64,
}

impl Antiderivatives {
    pub const ZERO: Self = Self {
        vbar0: 0.0,
        a: 0.0,
        p_int: 0.0,
    };
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        if !(spec.theta.is_finite() && spec.theta > 0.0) {
            return Err(Error::InvalidModel(format!(
                "theta must be positive, got {}",
                spec.theta
            )));
        }
        let eps = spec.diffusion.epsilon;
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidModel(format!(
                "epsilon must be positive, got {eps}"
            )));
        }
        let k2 = &spec.diffusion.k_squared;
        let all_coeffs = spec
            .v_prime
            .base()
            .poly
            .iter()
            .chain(&spec.p_prime.poly)
            .chain(&k2.poly);
        if all_coeffs.clone().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        // k² >= ε² on a grid, and no negative tail.
        if let Some(x) = (-4000..=4000)
            .map(|i| i as f64 * 0.01)
            .find(|&x| k2.eval(x) < eps * eps * (1.0 - 1e-12))
        {
            return Err(Error::InvalidModel(format!(
                "k² = {} < ε² = {} at x = {x}",
                k2.eval(x),
                eps * eps
            )));
        }
        if let Some(d) = k2.degree() {
            if d > 0 && (d % 2 == 1 || k2.leading_coefficient() < 0.0) {
                return Err(Error::InvalidModel(
                    "k² must have even degree with positive leading coefficient".into(),
                ));
            }
        }
        let exact_k2 = match spec.v_prime {
            Drift::Function(_) => k2.constant_value(),
            _ => None,
        };
        let breakpoints = spec.v_prime.breakpoints();
        Ok(Self {
            spec,
            exact_k2,
            breakpoints,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn theta(&self) -> f64 {
        self.spec.theta
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.spec.clone().with_theta(theta))
    }

    pub fn drift(&self) -> &Drift {
        &self.spec.v_prime
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn has_closed_form(&self) -> bool {
        self.exact_k2.is_some()
    }

    #[inline]
    pub fn v_prime(&self, x: f64) -> f64 {
        self.spec.v_prime.eval(x)
    }

    #[inline]
    pub fn v_second(&self, x: f64) -> f64 {
        self.spec.v_prime.derivative(x)
    }

    #[inline]
    pub fn p_prime(&self, x: f64) -> f64 {
        self.spec.p_prime.eval(x)
    }

    #[inline]
    pub fn p_second(&self, x: f64) -> f64 {
        self.spec.p_prime.derivative(x)
    }

    #[inline]
    pub fn k_squared(&self, x: f64) -> f64 {
        self.spec.diffusion.k_squared.eval(x)
    }

    /// `∂_x V̄(x, m)`.
    #[inline]
    pub fn vbar_slope(&self, x: f64, m: f64) -> f64 {
        (self.v_prime(x) + self.theta() * (self.p_prime(x) - m)) / self.k_squared(x)
    }

    /// Integrands of `V̄(·,0)`, `a` and `∫P'/k²` at `x`.
    #[inline]
    fn integrands(&self, x: f64) -> [f64; 3] {
        let inv = 1.0 / self.k_squared(x);
        let p = self.p_prime(x);
        [(self.v_prime(x) + self.theta() * p) * inv, inv, p * inv]
    }

    fn closed_form(&self, k2: f64, x: f64) -> Antiderivatives {
        let v = match &self.spec.v_prime {
            Drift::Function(f) => f.integral(x),
            _ => unreachable!("closed form only for plain drifts"),
        };
        let p = self.spec.p_prime.integral(x);
        Antiderivatives {
            vbar0: (v + self.theta() * p) / k2,
            a: x / k2,
            p_int: p / k2,
        }
    }

    /// Integral of the three integrands over `[lo, hi]` with panels split at
    /// breakpoints and no wider than `MAX_PANEL`.
    fn integrate_segment(&self, lo: f64, hi: f64) -> [f64; 3] {
        let mut acc = [0.0; 3];
        if lo == hi {
            return acc;
        }
        let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints.iter().copied().filter(|&p| p > a && p < b));
        cuts.push(b);
        let r = gauss::rule();
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            let n = (len / MAX_PANEL).ceil().max(1.0) as usize;
            let h = len / n as f64;
            for p in 0..n {
                let mid = w[0] + h * (p as f64 + 0.5);
                let half = 0.5 * h;
                for k in 0..gauss::ORDER {
                    let vals = self.integrands(mid + half * r.nodes[k]);
                    for (slot, v) in acc.iter_mut().zip(vals) {
                        *slot += half * r.weights[k] * v;
                    }
                }
            }
        }
        acc.map(|v| sign * v)
    }

    /// `V̄(x,0)`, `a(x)` and `∫_0^x P'/k²`.
    pub fn antiderivatives(&self, x: f64) -> Antiderivatives {
        if let Some(k2) = self.exact_k2 {
            return self.closed_form(k2, x);
        }
        let [vbar0, a, p_int] = self.integrate_segment(0.0, x);
        Antiderivatives { vbar0, a, p_int }
    }

    /// Antiderivatives along an ascending grid, accumulated outward from the
    /// grid point nearest the origin.
    pub fn antiderivative_profile(&self, xs: &[f64]) -> Vec<Antiderivatives> {
        if let Some(k2) = self.exact_k2 {
            return xs.iter().map(|&x| self.closed_form(k2, x)).collect();
        }
        let mut out = vec![Antiderivatives::ZERO; xs.len()];
        if xs.is_empty() {
            return out;
        }
        let start = xs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        out[start] = self.antiderivatives(xs[start]);
        let step = |from: Antiderivatives, lo: f64, hi: f64| {
            let [v, a, p] = self.integrate_segment(lo, hi);
            Antiderivatives {
                vbar0: from.vbar0 + v,
                a: from.a + a,
                p_int: from.p_int + p,
            }
        };
        for i in start + 1..xs.len() {
            out[i] = step(out[i - 1], xs[i - 1], xs[i]);
        }
        for i in (0..start).rev() {
            out[i] = step(out[i + 1], xs[i + 1], xs[i]);
        }
        out
    }

    /// `a(x) = ∫_0^x k⁻²`.
    pub fn a_of_x(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.antiderivatives(x).a)
    }

    /// Effective potential `V̄_θ(x, m)`, anchored so that `V̄_θ(0, m) = 0`.
    pub fn effective_potential(&self, x: f64, m: f64) -> Result<f64> {
        check_finite(x)?;
        check_finite(m)?;
        let ad = self.antiderivatives(x);
        Ok(ad.vbar0 - self.theta() * m * ad.a)
    }

    /// Fill node values of one Gauss panel `[lo, hi]`, given antiderivatives
    /// at `lo`. Returns the antiderivatives at `hi` as well.
    pub(crate) fn panel(&self, lo: f64, hi: f64, at_lo: Antiderivatives) -> PanelValues {
        let r = gauss::rule();
        let half = 0.5 * (hi - lo);
        let mid = lo + half;
        let mut pv = PanelValues::default();
        let mut samples = [[0.0; 3]; gauss::ORDER];
        for k in 0..gauss::ORDER {
            let x = mid + half * r.nodes[k];
            pv.x[k] = x;
            pv.w[k] = half * r.weights[k];
            pv.v_prime[k] = self.v_prime(x);
            let p = self.p_prime(x);
            pv.p_prime[k] = p;
            let inv = 1.0 / self.k_squared(x);
            pv.inv_k2[k] = inv;
            samples[k] = [(pv.v_prime[k] + self.theta() * p) * inv, inv, p * inv];
        }
        if let Some(k2) = self.exact_k2 {
            for k in 0..gauss::ORDER {
                pv.anti[k] = self.closed_form(k2, pv.x[k]);
            }
            pv.at_hi = self.closed_form(k2, hi);
            return pv;
        }
        let mut total = [0.0; 3];
        for k in 0..gauss::ORDER {
            for c in 0..3 {
                total[c] += pv.w[k] * samples[k][c];
            }
        }
        for i in 0..gauss::ORDER {
            let mut acc = [0.0; 3];
            for j in 0..gauss::ORDER {
                let wij = half * r.cumulative[i][j];
                for c in 0..3 {
                    acc[c] += wij * samples[j][c];
                }
            }
            pv.anti[i] = Antiderivatives {
                vbar0: at_lo.vbar0 + acc[0],
                a: at_lo.a + acc[1],
                p_int: at_lo.p_int + acc[2],
            };
        }
        pv.at_hi = Antiderivatives {
            vbar0: at_lo.vbar0 + total[0],
            a: at_lo.a + total[1],
            p_int: at_lo.p_int + total[2],
        };
        pv
    }

    /// Radius beyond which `∂_x V̄(x, m)` has the sign of `x`, or `None` when
    /// the drift does not confine.
    pub fn confinement_radius(&self, m: f64) -> Option<f64> {
        let base = self.spec.v_prime.base();
        let mut combined = base.add_scaled(&self.spec.p_prime, self.theta());
        if combined.poly.is_empty() {
            combined.poly.push(0.0);
        }
        combined.poly[0] -= self.theta() * m;
        let d = combined.degree()?;
        if d % 2 == 0 || combined.leading_coefficient() <= 0.0 {
            return None;
        }
        let r = combined.zero_free_radius()?;
        Some(r.max(self.spec.v_prime.wrapper_radius()))
    }
}

/// Node data of one Gauss panel.
#[derive(Debug, Clone, Default)]
pub(crate) struct PanelValues {
    pub x: [f64; gauss::ORDER],
    pub w: [f64; gauss::ORDER],
    pub v_prime: [f64; gauss::ORDER],
    pub p_prime: [f64; gauss::ORDER],
    pub inv_k2: [f64; gauss::ORDER],
    pub anti: [Antiderivatives; gauss::ORDER],
    pub at_hi: Antiderivatives,
}

impl Default for Antiderivatives {
    fn default() -> Self {
        Self::ZERO
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("non-finite input {x}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bistable(theta: f64) -> Model {
        Model::new(ModelSpec::polynomial(&[0.0, -1.0, 0.0, 1.0], &[0.0, 1.0], theta)).unwrap()
    }

    fn rational(theta: f64) -> Model {
        Model::new(
            ModelSpec::polynomial(&[0.0, -1.0, 0.0, 1.0], &[0.0, 1.0], theta)
                .with_diffusion(FunctionSpec::polynomial(vec![1.0, 0.0, 1.0]), 1.0),
        )
        .unwrap()
    }

    #[test]
    fn a_of_x_examples() {
        assert_eq!(bistable(2.0).a_of_x(2.5).unwrap(), 2.5);
        assert_eq!(bistable(2.0).a_of_x(0.0).unwrap(), 0.0);
        assert_eq!(rational(2.0).a_of_x(0.0).unwrap(), 0.0);
        let a = rational(2.0).a_of_x(1.0).unwrap();
        assert!((a - 1f64.atan()).abs() < 1e-14, "{a}");
        let a = rational(2.0).a_of_x(-7.3).unwrap();
        assert!((a - (-7.3f64).atan()).abs() < 1e-13, "{a}");
    }

    #[test]
    fn effective_potential_examples() {
        let lin = Model::new(ModelSpec::polynomial(&[0.0, 1.0], &[0.0, 1.0], 1.0)).unwrap();
        assert!((lin.effective_potential(1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lin.effective_potential(0.0, 0.7).unwrap(), 0.0);
        assert!((bistable(2.0).effective_potential(1.0, 0.0).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rational_effective_potential_closed_form() {
        // ∫ x(x² + θ - 1)/(1 + x²) = x²/2 + (θ - 2)/2 · ln(1 + x²)
        let m = rational(2.5);
        for &x in &[-3.0f64, -0.4, 0.9, 5.0] {
            let exact = x * x / 2.0 + 0.25 * (1.0 + x * x).ln();
            let got = m.effective_potential(x, 0.0).unwrap();
            assert!((got - exact).abs() < 1e-12, "{x}: {got} vs {exact}");
        }
    }

    #[test]
    fn profile_matches_pointwise() {
        let m = rational(2.0);
        let xs: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let prof = m.antiderivative_profile(&xs);
        for (x, p) in xs.iter().zip(prof) {
            let q = m.antiderivatives(*x);
            assert!((p.vbar0 - q.vbar0).abs() < 1e-12);
            assert!((p.a - q.a).abs() < 1e-13);
        }
    }

    #[test]
    fn panel_spectral_values_match_pointwise() {
        let m = rational(3.0);
        let lo = 0.3;
        let start = m.antiderivatives(lo);
        let pv = m.panel(lo, 1.1, start);
        for k in 0..gauss::ORDER {
            let q = m.antiderivatives(pv.x[k]);
            assert!((pv.anti[k].vbar0 - q.vbar0).abs() < 1e-13);
            assert!((pv.anti[k].a - q.a).abs() < 1e-13);
        }
        let q = m.antiderivatives(1.1);
        assert!((pv.at_hi.vbar0 - q.vbar0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(Model::new(ModelSpec::polynomial(&[0.0, 1.0], &[0.0, 1.0], 0.0)).is_err());
        let bad_k = ModelSpec::polynomial(&[0.0, 1.0], &[0.0, 1.0], 1.0)
            .with_diffusion(FunctionSpec::polynomial(vec![1.0, 0.0, -0.01]), 0.5);
        assert!(Model::new(bad_k).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let json = r#"{"v_prime": {"poly": [0, -1, 0, 1]}, "p_prime": {"poly": [0, 1]},
                       "k_squared": {"poly": [1, 0, 1]}, "epsilon": 1.0, "theta": 2.0}"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.diffusion.k_squared.poly, vec![1.0, 0.0, 1.0]);
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let unknown = r#"{"v_prime": {"poly": [0, 1]}, "p_prime": {"poly": [0, 1]}, "theta": 1, "beta": 2}"#;
        assert!(serde_json::from_str::<ModelSpec>(unknown).is_err());
    }
}
