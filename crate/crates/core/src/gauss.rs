//! Gauss–Legendre rule on [-1, 1] and the matching spectral integration matrix.
//!
//! The integration matrix maps samples of `f` at the Gauss nodes to the
//! integrals `∫_{-1}^{t_i} p(t) dt`, where `p` is the degree `N - 1`
//! interpolant of those samples. Panels use it to obtain antiderivatives at
//! their own nodes without any extra function evaluations.

use std::sync::OnceLock;

/// Number of nodes per panel.
pub const ORDER: usize = 20;

pub struct Rule {
    pub nodes: [f64; ORDER],
    pub weights: [f64; ORDER],
    /// `cumulative[i][j]`: weight of sample `j` in `∫_{-1}^{nodes[i]}`.
    pub cumulative: [[f64; ORDER]; ORDER],
}

/// Legendre polynomials `P_0..=P_n` at `t`.
fn legendre_all(n: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = t;
    }
    for k in 1..n {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
    }
    p
}

fn build() -> Rule {
    let n = ORDER;
    let mut nodes = [0.0; ORDER];
    let mut weights = [0.0; ORDER];
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = legendre_all(n, t);
            let dp = n as f64 * (t * p[n] - p[n - 1]) / (t * t - 1.0);
            let dt = p[n] / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let p = legendre_all(n, t);
        let dp = n as f64 * (t * p[n] - p[n - 1]) / (t * t - 1.0);
        // Ascending order.
        nodes[n - 1 - i] = t;
        weights[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }

    let mut cumulative = [[0.0; ORDER]; ORDER];
    let at_nodes: Vec<Vec<f64>> = nodes.iter().map(|&t| legendre_all(n, t)).collect();
    for i in 0..n {
        let pi = &at_nodes[i];
        // ∫_{-1}^{t} P_0 = t + 1 ; ∫_{-1}^{t} P_k = (P_{k+1} - P_{k-1}) / (2k + 1)
        let mut int_k = vec![0.0; n];
        int_k[0] = nodes[i] + 1.0;
        for (k, slot) in int_k.iter_mut().enumerate().skip(1) {
            *slot = (pi[k + 1] - pi[k - 1]) / (2.0 * k as f64 + 1.0);
        }
        for j in 0..n {
            let pj = &at_nodes[j];
            let mut s = 0.0;
            for k in 0..n {
                s += (2.0 * k as f64 + 1.0) / 2.0 * pj[k] * int_k[k];
            }
            cumulative[i][j] = weights[j] * s;
        }
    }
    Rule {
        nodes,
        weights,
        cumulative,
    }
}

pub fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(build)
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]` split into `panels`
/// equal pieces.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let r = rule();
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for k in 0..ORDER {
            s += r.weights[k] * f(mid + half * r.nodes[k]);
        }
        total += half * s;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let r = rule();
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        // degree 2N-1 = 39 is integrated exactly
        let r = rule();
        let s: f64 = (0..ORDER).map(|k| r.weights[k] * r.nodes[k].powi(38)).sum();
        assert!((s - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matrix_integrates_interpolant() {
        let r = rule();
        for i in 0..ORDER {
            let t = r.nodes[i];
            let approx: f64 = (0..ORDER)
                .map(|j| r.cumulative[i][j] * r.nodes[j].powi(5))
                .sum();
            let exact = (t.powi(6) - 1.0) / 6.0;
            assert!((approx - exact).abs() < 1e-14, "{i}: {approx} vs {exact}");
            let e: f64 = (0..ORDER)
                .map(|j| r.cumulative[i][j] * r.nodes[j].exp())
                .sum();
            assert!((e - (t.exp() - (-1.0f64).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn composite_rule() {
        let v = integrate(|x| 1.0 / (1.0 + x * x), 0.0, 1.0, 4);
        assert!((v - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }
}
