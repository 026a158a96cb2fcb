//! Scalar function representations used for the drift, interaction and
//! diffusion terms.

use serde::{Deserialize, Serialize};

/// A polynomial (ascending coefficients) plus `Σ amplitude·cos(frequency·x)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    #[serde(default)]
    pub poly: Vec<f64>,
    /// `(amplitude, frequency)` pairs.
    #[serde(default)]
    pub trig: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl FunctionSpec {
    pub fn polynomial(coeffs: impl Into<Vec<f64>>) -> Self {
        Self {
            poly: coeffs.into(),
            ..Self::default()
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![c])
    }

    /// Polynomial with the given real roots times `scale`.
    pub fn from_roots(roots: &[f64], scale: f64) -> Self {
        let mut coeffs = vec![scale];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= r * c;
            }
            coeffs = next;
        }
        Self::polynomial(coeffs)
    }

    pub fn with_trig(mut self, amplitude: f64, frequency: f64) -> Self {
        self.trig.push((amplitude, frequency));
        self
    }

    pub fn described(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = horner(&self.poly, x);
        for &(amp, freq) in &self.trig {
            v += amp * (freq * x).cos();
        }
        v
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (i, &c) in self.poly.iter().enumerate().skip(1).rev() {
            v = v * x + c * i as f64;
        }
        for &(amp, freq) in &self.trig {
            v -= amp * freq * (freq * x).sin();
        }
        v
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (i, &c) in self.poly.iter().enumerate().skip(2).rev() {
            v = v * x + c * (i * (i - 1)) as f64;
        }
        for &(amp, freq) in &self.trig {
            v -= amp * freq * freq * (freq * x).cos();
        }
        v
    }

    /// `∫_0^x` of the function.
    pub fn integral(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (i, &c) in self.poly.iter().enumerate().rev() {
            v = v * x + c / (i + 1) as f64;
        }
        v *= x;
        for &(amp, freq) in &self.trig {
            v += if freq == 0.0 {
                amp * x
            } else {
                amp * (freq * x).sin() / freq
            };
        }
        v
    }

    /// Degree of the polynomial part ignoring trailing zeros; `None` for the
    /// zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.poly.iter().rposition(|&c| c != 0.0)
    }

    pub fn leading_coefficient(&self) -> f64 {
        self.degree().map_or(0.0, |d| self.poly[d])
    }

    pub fn trig_amplitude(&self) -> f64 {
        self.trig.iter().map(|&(a, _)| a.abs()).sum()
    }

    pub fn is_polynomial(&self) -> bool {
        self.trig.iter().all(|&(a, _)| a == 0.0)
    }

    /// Constant value when the function is constant.
    pub fn constant_value(&self) -> Option<f64> {
        let poly_const = self.poly.iter().skip(1).all(|&c| c == 0.0);
        let trig_const = self.trig.iter().all(|&(a, f)| a == 0.0 || f == 0.0);
        if poly_const && trig_const {
            Some(self.eval(0.0))
        } else {
            None
        }
    }

    /// Odd: even-index coefficients vanish and there is no cosine term.
    pub fn is_odd(&self, tol: f64) -> bool {
        self.poly.iter().step_by(2).all(|c| c.abs() <= tol)
            && self.trig.iter().all(|&(a, _)| a.abs() <= tol)
    }

    pub fn is_even(&self, tol: f64) -> bool {
        self.poly.iter().skip(1).step_by(2).all(|c| c.abs() <= tol)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            poly: self.poly.iter().map(|c| c * factor).collect(),
            trig: self.trig.iter().map(|&(a, f)| (a * factor, f)).collect(),
            description: self.description.clone(),
        }
    }

    /// `self + factor·other`.
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Self {
        let n = self.poly.len().max(other.poly.len());
        let mut poly = vec![0.0; n];
        for (i, c) in self.poly.iter().enumerate() {
            poly[i] += c;
        }
        for (i, c) in other.poly.iter().enumerate() {
            poly[i] += factor * c;
        }
        let mut trig = self.trig.clone();
        trig.extend(other.trig.iter().map(|&(a, f)| (a * factor, f)));
        Self {
            poly,
            trig,
            description: String::new(),
        }
    }

    /// The function of `u` given by `f(scale·u)`.
    pub fn rescaled_argument(&self, scale: f64) -> Self {
        let mut s = 1.0;
        let poly = self
            .poly
            .iter()
            .map(|c| {
                let v = c * s;
                s *= scale;
                v
            })
            .collect();
        Self {
            poly,
            trig: self.trig.iter().map(|&(a, f)| (a, f * scale)).collect(),
            description: self.description.clone(),
        }
    }

    /// Radius beyond which the function has no zeros and takes the sign of
    /// its leading term. Returns `None` for a constant polynomial part.
    pub fn zero_free_radius(&self) -> Option<f64> {
        let d = self.degree()?;
        if d == 0 {
            return None;
        }
        let lead = self.poly[d].abs();
        let max_lower = self.poly[..d].iter().fold(0.0f64, |m, c| m.max(c.abs()));
        Some(1.0 + (max_lower + self.trig_amplitude()) / lead)
    }
}

/// Drift `V'` of a model. Besides plain function specs it can wrap a base
/// polynomial with the sign clamping of a dominating bistable drift or the
/// piecewise rescaling of a constructed multi-well drift. All variants are
/// odd-extended wrappers of an odd base except [`Drift::Function`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Drift {
    Function(FunctionSpec),
    Dominating(DominatingDrift),
    Scaled(ScaledDrift),
}

/// `-V'_D = 1_{[0,x*]}(-V')_+ - 1_{[x*,∞)}(-V')_-`, extended oddly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominatingDrift {
    pub base: Box<Drift>,
    pub x_star: f64,
}

/// `-V'` multiplied by `alpha1` on `[0, x1]`, `alpha2` on `[x2, x*]` and 1
/// elsewhere (odd extension), with C¹ smoothstep blending of the scale over
/// bands of width `band` centred on `x1`, `x2` and `x*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledDrift {
    pub base: FunctionSpec,
    pub x1: f64,
    pub x2: f64,
    pub x_star: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub band: f64,
}

/// C¹ cubic smoothstep on [0, 1] and its derivative.
fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
    }
}

impl ScaledDrift {
    /// Scale factor and its derivative at `u >= 0`.
    fn scale(&self, u: f64) -> (f64, f64) {
        let h = 0.5 * self.band;
        let blend = |centre: f64, from: f64, to: f64| -> Option<(f64, f64)> {
            if self.band > 0.0 && (u - centre).abs() < h {
                let (s, ds) = smoothstep((u - centre + h) / self.band);
                Some((from + (to - from) * s, (to - from) * ds / self.band))
            } else {
                None
            }
        };
        if let Some(v) = blend(self.x1, self.alpha1, 1.0) {
            return v;
        }
        if let Some(v) = blend(self.x2, 1.0, self.alpha2) {
            return v;
        }
        if let Some(v) = blend(self.x_star, self.alpha2, 1.0) {
            return v;
        }
        let s = if u < self.x1 {
            self.alpha1
        } else if u < self.x2 {
            1.0
        } else if u < self.x_star {
            self.alpha2
        } else {
            1.0
        };
        (s, 0.0)
    }
}

impl Drift {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Drift::Function(f) => f.eval(x),
            Drift::Dominating(d) => {
                let u = x.abs();
                let minus_v = -d.base.eval(u);
                let clamped = if u <= d.x_star {
                    minus_v.max(0.0)
                } else {
                    minus_v.min(0.0)
                };
                -clamped * x.signum()
            }
            Drift::Scaled(s) => {
                let u = x.abs();
                let (scale, _) = s.scale(u);
                scale * s.base.eval(u) * x.signum()
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Drift::Function(f) => f.derivative(x),
            Drift::Dominating(d) => {
                let u = x.abs();
                let minus_v = -d.base.eval(u);
                let active = if u <= d.x_star {
                    minus_v > 0.0
                } else {
                    minus_v < 0.0
                };
                if active {
                    d.base.derivative(u)
                } else {
                    0.0
                }
            }
            Drift::Scaled(s) => {
                let u = x.abs();
                let (scale, dscale) = s.scale(u);
                dscale * s.base.eval(u) + scale * s.base.derivative(u)
            }
        }
    }

    pub fn as_function(&self) -> Option<&FunctionSpec> {
        match self {
            Drift::Function(f) => Some(f),
            _ => None,
        }
    }

    /// Underlying polynomial-plus-trig function (the base of wrappers).
    pub fn base(&self) -> &FunctionSpec {
        match self {
            Drift::Function(f) => f,
            Drift::Dominating(d) => d.base.base(),
            Drift::Scaled(s) => &s.base,
        }
    }

    /// Points where the drift may fail to be smooth; quadrature panels are
    /// split there.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = match self {
            Drift::Function(_) => Vec::new(),
            Drift::Dominating(d) => {
                let mut v = crate::roots::sign_changes(|x| d.base.eval(x), 0.0, d.x_star, 2000)
                    .into_iter()
                    .filter(|&r| r > 0.0 && r < d.x_star)
                    .collect::<Vec<_>>();
                v.push(d.x_star);
                v.extend(d.base.breakpoints().into_iter().filter(|&p| p > 0.0));
                v
            }
            Drift::Scaled(s) => {
                let h = 0.5 * s.band;
                vec![
                    s.x1 - h,
                    s.x1 + h,
                    s.x2 - h,
                    s.x2 + h,
                    s.x_star - h,
                    s.x_star + h,
                ]
            }
        };
        let neg: Vec<f64> = pts.iter().map(|p| -p).collect();
        pts.extend(neg);
        pts.retain(|p| *p != 0.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Radius beyond which the wrapper coincides with its base.
    pub fn wrapper_radius(&self) -> f64 {
        match self {
            Drift::Function(_) => 0.0,
            Drift::Dominating(d) => d.x_star.max(d.base.wrapper_radius()),
            Drift::Scaled(s) => s.x_star + s.band,
        }
    }
}

impl From<FunctionSpec> for Drift {
    fn from(f: FunctionSpec) -> Self {
        Drift::Function(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> FunctionSpec {
        FunctionSpec::polynomial(vec![0.0, -1.0, 0.0, 1.0])
    }

    #[test]
    fn eval_examples() {
        assert_eq!(cubic().eval(1.0), 0.0);
        assert_eq!(cubic().eval(2.0), 6.0);
        let f = FunctionSpec::polynomial(vec![0.0, 1.0]).with_trig(0.1, 10.0);
        assert!((f.eval(0.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(cubic().derivative(1.0), 2.0);
        assert_eq!(cubic().derivative(0.0), -1.0);
        let c = FunctionSpec::default().with_trig(1.0, 1.0);
        assert_eq!(c.derivative(0.0), 0.0);
        assert_eq!(cubic().second_derivative(2.0), 12.0);
    }

    #[test]
    fn integral_matches_antiderivative() {
        let f = cubic().with_trig(0.3, 2.0);
        let x: f64 = 1.7;
        let exact = x.powi(4) / 4.0 - x * x / 2.0 + 0.3 * (2.0 * x).sin() / 2.0;
        assert!((f.integral(x) - exact).abs() < 1e-14);
    }

    #[test]
    fn roots_constructor() {
        let f = FunctionSpec::from_roots(&[-1.0, 0.0, 1.0], 1.0);
        assert_eq!(f.poly, vec![0.0, -1.0, 0.0, 1.0]);
        let g = FunctionSpec::from_roots(&[0.0, -1.0, 1.0, -2.0, 2.0], 1.0);
        assert_eq!(g.poly, vec![0.0, 4.0, 0.0, -5.0, 0.0, 1.0]);
    }

    #[test]
    fn rescaled_argument() {
        let f = cubic().with_trig(0.5, 3.0);
        let g = f.rescaled_argument(2.0);
        for &u in &[-1.3, 0.2, 0.9] {
            assert!((g.eval(u) - f.eval(2.0 * u)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_free_radius_bounds_roots() {
        let f = FunctionSpec::from_roots(&[0.0, -1.0, 1.0, -2.0, 2.0], 1.0);
        let r = f.zero_free_radius().unwrap();
        assert!(r > 2.0);
        assert!(f.eval(r) > 0.0 && f.eval(-r) < 0.0);
    }

    #[test]
    fn dominating_clamps() {
        let base = FunctionSpec::from_roots(&[0.0, -0.3, 0.3, -0.6, 0.6, -1.0, 1.0], 1.0);
        let d = Drift::Dominating(DominatingDrift {
            base: Box::new(base.clone().into()),
            x_star: 1.0,
        });
        for i in 0..200 {
            let x = i as f64 * 0.01;
            let minus_vd = -d.eval(x);
            assert!(minus_vd >= -base.eval(x) - 1e-15);
            if x <= 1.0 {
                assert!(minus_vd >= 0.0);
            } else {
                assert!(minus_vd <= 0.0);
            }
            assert_eq!(d.eval(-x), -d.eval(x));
        }
    }

    #[test]
    fn scaled_is_c1_and_odd() {
        let base = FunctionSpec::from_roots(&[0.0, -0.3, 0.3, -0.6, 0.6, -1.0, 1.0], 1.0);
        let s = Drift::Scaled(ScaledDrift {
            base,
            x1: 0.3,
            x2: 0.6,
            x_star: 1.0,
            alpha1: 4.0,
            alpha2: 8.0,
            band: 0.01,
        });
        let h = 1e-6;
        for i in 1..300 {
            let x = i as f64 * 0.005 + 0.0001;
            let fd = (s.eval(x + h) - s.eval(x - h)) / (2.0 * h);
            assert!((fd - s.derivative(x)).abs() < 1e-4 * (1.0 + fd.abs()), "x={x}");
            assert_eq!(s.eval(-x), -s.eval(x));
        }
    }
}
