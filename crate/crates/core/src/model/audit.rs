//! Numerical audit of the standing assumptions for each analysis regime.
//!
//! Interior conditions are checked on a dense grid over a window outside of
//! which the combined drift has the sign of `x`; tail conditions use the
//! degrees and leading coefficients of the polynomial parts.

use serde::{Deserialize, Serialize};

use super::modes::{audit_radius, grid_min, mode_x_star, zeros_of_v_prime};
use super::Model;
use crate::function::Drift;

const GRID: usize = 4000;
const PARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Generic,
    SymmetricBistable,
    SymmetricMultiwell,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::Generic => "generic",
            Regime::SymmetricBistable => "symmetric-bistable",
            Regime::SymmetricMultiwell => "symmetric-multiwell",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub id: String,
    pub section: String,
    pub verdict: Verdict,
    /// Location of a violation when one was found.
    pub witness: Option<f64>,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub regime: Regime,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn get(&self, id: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.verdict == Verdict::Holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionEntry> {
        self.entries.iter().filter(|e| e.verdict != Verdict::Holds)
    }
}

struct Check {
    verdict: Verdict,
    witness: Option<f64>,
    notes: String,
}

fn holds(notes: impl Into<String>) -> Check {
    Check {
        verdict: Verdict::Holds,
        witness: None,
        notes: notes.into(),
    }
}

fn fails(witness: Option<f64>, notes: impl Into<String>) -> Check {
    Check {
        verdict: Verdict::Fails,
        witness,
        notes: notes.into(),
    }
}

fn verdict_of(ok: bool, witness: Option<f64>, notes: String) -> Check {
    if ok {
        holds(notes)
    } else {
        fails(witness, notes)
    }
}

/// Tail behaviour of `V̄'(x, 0) = (V' + θP') / k²` from degree arithmetic.
struct Tail {
    combined_degree: Option<usize>,
    combined_lead: f64,
    k2_degree: usize,
}

impl Tail {
    fn of(model: &Model) -> Self {
        let spec = model.spec();
        let combined = spec.v_prime.base().add_scaled(&spec.p_prime, model.theta());
        Self {
            combined_degree: combined.degree(),
            combined_lead: combined.leading_coefficient(),
            k2_degree: spec.diffusion.k_squared.degree().unwrap_or(0),
        }
    }

    /// `V̄'(x,0) → ±∞` as `x → ±∞`.
    fn slope_diverges(&self) -> bool {
        match self.combined_degree {
            Some(d) => d % 2 == 1 && self.combined_lead > 0.0 && d > self.k2_degree,
            None => false,
        }
    }
}

fn smoothness(model: &Model) -> Check {
    match model.drift() {
        Drift::Function(_) => holds("polynomial/trigonometric terms are smooth"),
        Drift::Dominating(_) => fails(
            Some(model.drift().breakpoints().into_iter().find(|p| *p > 0.0).unwrap_or(0.0)),
            "clamped drift is only continuous; kinks at its sign changes",
        ),
        Drift::Scaled(s) => fails(
            Some(s.x1),
            "blended drift is C¹; its second derivative jumps at the band edges",
        ),
    }
}

fn bounded_inverse_k2(model: &Model) -> Check {
    let eps = model.spec().diffusion.epsilon;
    holds(format!("1/k² ≤ 1/ε² = {}", 1.0 / (eps * eps)))
}

fn quadratic_growth(tail: &Tail) -> Check {
    let ok = tail.slope_diverges();
    verdict_of(
        ok,
        None,
        format!(
            "deg(V'+θP') = {:?}, deg(k²) = {}, leading coefficient {}",
            tail.combined_degree, tail.k2_degree, tail.combined_lead
        ),
    )
}

fn slope_limits(model: &Model, tail: &Tail) -> Check {
    let base = model.drift().base();
    let v_ok = matches!(base.degree(), Some(d) if d % 2 == 1) && base.leading_coefficient() > 0.0;
    verdict_of(
        v_ok && tail.slope_diverges(),
        None,
        format!(
            "deg(V') = {:?} with leading coefficient {}",
            base.degree(),
            base.leading_coefficient()
        ),
    )
}

fn polynomial_bound(model: &Model) -> Check {
    let d = model.drift().base().degree().unwrap_or(0);
    holds(format!("|V'| ≤ K(1 + x^{})", 2 * d.div_ceil(2)))
}

fn mode_map_increasing(model: &Model) -> Check {
    let (x, v) = super::modes::min_mode_slope(model);
    let tail_ok = Tail::of(model).slope_diverges();
    verdict_of(
        v > 0.0 && tail_ok,
        (v <= 0.0).then_some(x),
        format!("min of (V''+θP'')/θ on the audit window is {} at x = {x}", v / model.theta()),
    )
}

/// `V̄''(x,0) ≥ 0` with isolated zeros that remain global modes, and
/// `V'' ≠ 0` at those zeros.
fn homeomorphism_conditions(model: &Model) -> (Check, Check) {
    let r = audit_radius(model);
    let h = 2.0 * r / GRID as f64;
    let th = model.theta();
    let curvature = |x: f64| {
        let k2 = model.k_squared(x);
        let dk2 = model.spec().diffusion.k_squared.derivative(x);
        let num = model.v_prime(x) + th * model.p_prime(x);
        ((model.v_second(x) + th * model.p_second(x)) * k2 - num * dk2) / (k2 * k2)
    };
    let (xmin, vmin) = grid_min(curvature, -r, r, GRID);
    let scale = 1e-9 * (1.0 + vmin.abs());
    if vmin < -scale {
        return (
            fails(Some(xmin), format!("V̄''(·,0) = {vmin} < 0")),
            holds("vacuous: condition 7 already fails"),
        );
    }
    // Isolated near-zeros of V̄'': local minima of the curvature below tolerance.
    let xs: Vec<f64> = (0..=GRID).map(|i| -r + h * i as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| curvature(x)).collect();
    let mut touches = Vec::new();
    for i in 1..GRID {
        if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
            let (x, v) = crate::roots::golden_min(curvature, xs[i] - h, xs[i] + h, 1e-13);
            if v.abs() <= 1e-8 {
                touches.push(x);
            }
        }
    }
    if touches.len() > GRID / 10 {
        return (
            fails(Some(touches[0]), "V̄'' vanishes on an interval"),
            holds("vacuous: condition 7 already fails"),
        );
    }
    for &xt in &touches {
        let m = (model.v_prime(xt) + th * model.p_prime(xt)) / th;
        match mode_x_star(model, m) {
            Ok(mode) if (mode.x - xt).abs() < 1e-4 * (1.0 + xt.abs()) || mode.tie.is_some() => {}
            _ => {
                return (
                    fails(Some(xt), "zero of V̄'' is not the global mode at its own m"),
                    holds("vacuous: condition 7 already fails"),
                )
            }
        }
    }
    let seven = holds(format!("{} isolated zero(s) of V̄''(·,0)", touches.len()));
    let bad = touches
        .iter()
        .copied()
        .find(|&x| model.v_second(x).abs() <= 1e-8 * (1.0 + x.abs()));
    let eight = verdict_of(
        bad.is_none(),
        bad,
        "V'' checked at the zeros of V̄''".into(),
    );
    (seven, eight)
}

fn antisymmetry(model: &Model) -> Check {
    let spec = model.spec();
    let v_odd = spec.v_prime.base().is_odd(PARITY_TOL);
    let p_odd = spec.p_prime.is_odd(PARITY_TOL);
    let k_even = spec.diffusion.k_squared.is_even(PARITY_TOL);
    let mut bad = Vec::new();
    if !v_odd {
        bad.push("V'");
    }
    if !p_odd {
        bad.push("P'");
    }
    if !k_even {
        bad.push("k²");
    }
    if bad.is_empty() {
        holds("V', P' odd and k² even within 1e-12")
    } else {
        fails(None, format!("parity violated by {}", bad.join(", ")))
    }
}

/// Positive zeros of `V'` together with whether `-V' < 0` beyond the last.
fn positive_zeros(model: &Model) -> (Vec<f64>, bool, Option<f64>) {
    let r = audit_radius(model);
    let zeros = zeros_of_v_prime(model, -r, r).unwrap_or_default();
    let pos: Vec<f64> = zeros.iter().map(|z| z.x).filter(|&x| x > 1e-9).collect();
    let last = pos.last().copied().unwrap_or(0.0);
    let h = (r - last) / GRID as f64;
    let witness = (1..=GRID)
        .map(|i| last + h * i as f64)
        .find(|&x| -model.v_prime(x) >= 0.0);
    let base = model.drift().base();
    let tail_ok = base.leading_coefficient() > 0.0;
    (pos, witness.is_none() && tail_ok, witness)
}

fn bistable_roots(model: &Model) -> (Check, Option<f64>) {
    let (pos, beyond_ok, witness) = positive_zeros(model);
    if pos.len() != 1 {
        return (
            fails(pos.get(1).copied(), format!("{} positive zeros of V'", pos.len())),
            pos.last().copied(),
        );
    }
    let x_star = pos[0];
    let n = GRID;
    let inside_bad = (1..n)
        .map(|i| x_star * i as f64 / n as f64)
        .find(|&x| -model.v_prime(x) <= 0.0);
    if let Some(w) = inside_bad {
        return (fails(Some(w), "-V' not positive on (0, x*)"), Some(x_star));
    }
    (
        verdict_of(beyond_ok, witness, format!("x* = {x_star}")),
        Some(x_star),
    )
}

fn farthest_root(model: &Model) -> (Check, Option<f64>) {
    let (pos, beyond_ok, witness) = positive_zeros(model);
    match pos.last() {
        Some(&x_star) => (
            verdict_of(beyond_ok, witness, format!("x* = {x_star} ({} positive zeros)", pos.len())),
            Some(x_star),
        ),
        None => (fails(None, "V' has no positive zero"), None),
    }
}

/// `sup_{[0,x*]} f = f(x*) > 0` and `inf_{[x*,∞)} f = f(x*)` on a grid.
fn sup_inf(f: &dyn Fn(&[f64]) -> Vec<f64>, x_star: f64, outer: f64, label: &str) -> (Check, Check) {
    let inner: Vec<f64> = (0..=GRID).map(|i| x_star * i as f64 / GRID as f64).collect();
    let fi = f(&inner);
    let at = fi[GRID];
    let tol = 1e-10 * (1.0 + at.abs());
    let (arg, max) = inner
        .iter()
        .zip(&fi)
        .fold((0.0, f64::NEG_INFINITY), |acc, (&x, &v)| if v > acc.1 { (x, v) } else { acc });
    let sup = if at <= 0.0 {
        fails(Some(x_star), format!("{label}(x*) = {at} is not positive"))
    } else {
        verdict_of(
            max <= at + tol,
            Some(arg),
            format!("sup on [0,x*] = {max}, value at x* = {at}"),
        )
    };
    let beyond: Vec<f64> = (0..=GRID)
        .map(|i| x_star + (outer - x_star) * i as f64 / GRID as f64)
        .collect();
    let fb = f(&beyond);
    let (arg, min) = beyond
        .iter()
        .zip(&fb)
        .fold((0.0, f64::INFINITY), |acc, (&x, &v)| if v < acc.1 { (x, v) } else { acc });
    let inf = verdict_of(
        min >= at - tol,
        Some(arg),
        format!("inf on [x*,∞) = {min}, value at x* = {at}"),
    );
    let inf = if inf.verdict == Verdict::Holds {
        Check { witness: None, ..inf }
    } else {
        inf
    };
    let sup = if sup.verdict == Verdict::Holds {
        Check { witness: None, ..sup }
    } else {
        sup
    };
    (sup, inf)
}

fn vbar_profile(model: &Model) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |xs| model.antiderivative_profile(xs).iter().map(|a| a.vbar0).collect()
}

fn p_profile(model: &Model) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |xs| model.antiderivative_profile(xs).iter().map(|a| a.p_int).collect()
}

/// Audit the assumptions relevant to `regime`. Always produces a report.
pub fn audit_assumptions(model: &Model, regime: Regime) -> AssumptionReport {
    let tail = Tail::of(model);
    let mut checks: Vec<(&str, Check)> = Vec::new();
    let outer = audit_radius(model);
    match regime {
        Regime::Generic => {
            checks.push(("1", smoothness(model)));
            checks.push(("2", bounded_inverse_k2(model)));
            checks.push(("3", quadratic_growth(&tail)));
            checks.push(("4", slope_limits(model, &tail)));
            checks.push(("5", polynomial_bound(model)));
            checks.push(("6", mode_map_increasing(model)));
            let (seven, eight) = homeomorphism_conditions(model);
            checks.push(("7", seven));
            checks.push(("8", eight));
        }
        Regime::SymmetricBistable | Regime::SymmetricMultiwell => {
            let multi = regime == Regime::SymmetricMultiwell;
            checks.push(("1", antisymmetry(model)));
            let (roots, x_star) = if multi {
                farthest_root(model)
            } else {
                bistable_roots(model)
            };
            checks.push((if multi { "2*" } else { "2" }, roots));
            checks.push(("3", quadratic_growth(&tail)));
            checks.push(("4", polynomial_bound(model)));
            match x_star {
                Some(xs) => {
                    let outer = outer.max(2.0 * xs);
                    let (five, six) = if multi {
                        match crate::critical::dominating_bistable(model) {
                            Ok(d) => sup_inf(&vbar_profile(&d), xs, outer, "V̄_D"),
                            Err(e) => (
                                fails(None, format!("dominating drift: {e}")),
                                fails(None, format!("dominating drift: {e}")),
                            ),
                        }
                    } else {
                        sup_inf(&vbar_profile(model), xs, outer, "V̄")
                    };
                    checks.push((if multi { "5*" } else { "5" }, five));
                    checks.push((if multi { "6*" } else { "6" }, six));
                    let (seven, eight) = sup_inf(&p_profile(model), xs, outer, "∫P'/k²");
                    let p_tail = model.spec().p_prime.leading_coefficient() > 0.0;
                    let eight = if p_tail || eight.verdict != Verdict::Holds {
                        eight
                    } else {
                        fails(None, "P' eventually negative")
                    };
                    checks.push(("7", seven));
                    checks.push(("8", eight));
                }
                None => {
                    for id in if multi { ["5*", "6*", "7", "8"] } else { ["5", "6", "7", "8"] } {
                        checks.push((
                            id,
                            Check {
                                verdict: Verdict::Undetermined,
                                witness: None,
                                notes: "x* could not be determined".into(),
                            },
                        ));
                    }
                }
            }
        }
    }
    AssumptionReport {
        regime,
        entries: checks
            .into_iter()
            .map(|(id, c)| AssumptionEntry {
                id: id.to_string(),
                section: regime.tag().to_string(),
                verdict: c.verdict,
                witness: c.witness,
                notes: c.notes,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::FunctionSpec;
    use crate::model::ModelSpec;

    fn model(v: &[f64], theta: f64) -> Model {
        Model::new(ModelSpec::polynomial(v, &[0.0, 1.0], theta)).unwrap()
    }

    const CUBIC: [f64; 4] = [0.0, -1.0, 0.0, 1.0];

    #[test]
    fn generic_all_hold_above_theta_star() {
        let r = audit_assumptions(&model(&CUBIC, 2.0), Regime::Generic);
        assert!(r.all_hold(), "{r:#?}");
        assert_eq!(r.entries.len(), 8);
    }

    #[test]
    fn generic_mode_map_fails_below_theta_star() {
        let r = audit_assumptions(&model(&CUBIC, 0.5), Regime::Generic);
        let six = r.get("6").unwrap();
        assert_eq!(six.verdict, Verdict::Fails);
        assert!(six.witness.unwrap().abs() < 1e-3);
    }

    #[test]
    fn bistable_all_hold() {
        let r = audit_assumptions(&model(&CUBIC, 1.0), Regime::SymmetricBistable);
        assert!(r.all_hold(), "{r:#?}");
        let ids: Vec<&str> = r.entries.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["1", "2", "3", "4", "5", "6", "7", "8"]);
    }

    #[test]
    fn bistable_root_pattern_rejects_five_zeros() {
        let r = audit_assumptions(&model(&[0.0, 4.0, 0.0, -5.0, 0.0, 1.0], 8.25), Regime::SymmetricBistable);
        assert_eq!(r.get("2").unwrap().verdict, Verdict::Fails);
    }

    #[test]
    fn multiwell_ids() {
        let v = FunctionSpec::from_roots(&[-1.0, -0.65, -0.35, 0.0, 0.35, 0.65, 1.0], 1.0);
        let m = Model::new(ModelSpec {
            v_prime: v.into(),
            ..ModelSpec::polynomial(&[], &[0.0, 1.0], 1.0)
        })
        .unwrap();
        let r = audit_assumptions(&m, Regime::SymmetricMultiwell);
        let ids: Vec<&str> = r.entries.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["1", "2*", "3", "4", "5*", "6*", "7", "8"]);
        let two = r.get("2*").unwrap();
        assert_eq!(two.verdict, Verdict::Holds);
        assert!(two.notes.contains("x* = 1"));
    }

    #[test]
    fn parity_violation_reported() {
        let r = audit_assumptions(&model(&[0.1, -1.0, 0.0, 1.0], 1.0), Regime::SymmetricBistable);
        assert_eq!(r.get("1").unwrap().verdict, Verdict::Fails);
    }

    #[test]
    fn even_drift_fails_growth() {
        let r = audit_assumptions(&model(&[0.0, 0.0, 1.0], 1.0), Regime::Generic);
        assert_eq!(r.get("4").unwrap().verdict, Verdict::Fails);
    }
}
