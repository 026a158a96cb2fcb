//! Interacting particle system with the empirical mean in place of the law:
//!
//! `X_i ← X_i + (-V'(X_i) - θ(P'(X_i) - mean_j P'(X_j))) dt + σ k(X_i) √dt ξ_i`
//!
//! Noise is drawn from ChaCha8 keyed by the seed, with the step number as
//! stream and fixed 1024-particle chunks at disjoint word offsets, so the
//! sequence seen by each particle does not depend on how chunks are
//! scheduled across threads. The empirical mean uses a fixed pairwise tree.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::quadrature::pairwise_sum;

const CHUNK: usize = 1024;
const DIVERGENCE: f64 = 1e6;
/// Stream reserved for initial positions.
const INIT_STREAM: u64 = u64::MAX;

/// Law of the initial positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialLaw {
    PointMass { x0: f64 },
    Uniform { lo: f64, hi: f64 },
    Gaussian { mu: f64, sd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    /// Empirical mean of `P'`.
    pub mean: f64,
    /// Cross-particle standard error of that mean.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub seed: u64,
    pub dt: f64,
    pub time: f64,
    pub steps: u64,
    /// Negate every normal draw (the mirrored noise path).
    pub antithetic: bool,
    pub mean_trace: Vec<TracePoint>,
}

fn rng_for(seed: u64, stream: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos((chunk as u128) << 32);
    rng
}

fn p_prime_stats(model: &Model, xs: &[f64]) -> (f64, f64) {
    let p: Vec<f64> = xs.iter().map(|&x| model.p_prime(x)).collect();
    let n = p.len() as f64;
    let mean = pairwise_sum(&p) / n;
    let dev: Vec<f64> = p.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Draw `n` initial positions from `law`.
pub fn init_ensemble(n: usize, law: InitialLaw, seed: u64, dt: f64) -> Result<ParticleEnsemble> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 particles, got {n}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut positions = vec![0.0; n];
    for (c, chunk) in positions.chunks_mut(CHUNK).enumerate() {
        let mut rng = rng_for(seed, INIT_STREAM, c);
        for x in chunk {
            *x = match law {
                InitialLaw::PointMass { x0 } => x0,
                InitialLaw::Uniform { lo, hi } => {
                    let u: f64 = rand_distr::Uniform::new(0.0, 1.0)
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?
                        .sample(&mut rng);
                    lo + (hi - lo) * u
                }
                InitialLaw::Gaussian { mu, sd } => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mu + sd * z
                }
            };
        }
    }
    Ok(ParticleEnsemble {
        positions,
        seed,
        dt,
        time: 0.0,
        steps: 0,
        antithetic: false,
        mean_trace: Vec::new(),
    })
}

impl ParticleEnsemble {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    /// Advance one Euler–Maruyama step in place.
    pub fn advance(&mut self, model: &Model, sigma: f64) -> Result<()> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
        }
        if self.mean_trace.is_empty() {
            let (mean, stderr) = p_prime_stats(model, &self.positions);
            self.mean_trace.push(TracePoint { t: self.time, mean, stderr });
        }
        // The last trace point holds the empirical mean of the current positions.
        let mean_p = self.mean_trace[self.mean_trace.len() - 1].mean;
        let theta = model.theta();
        let dt = self.dt;
        let noise = sigma * dt.sqrt() * if self.antithetic { -1.0 } else { 1.0 };
        let const_k = model.spec().diffusion.k_squared.constant_value().map(f64::sqrt);
        let seed = self.seed;
        let stream = self.steps;
        let update = |c: usize, chunk: &mut [f64]| -> Option<(usize, f64)> {
            let mut rng = rng_for(seed, stream, c);
            for (j, x) in chunk.iter_mut().enumerate() {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let drift = -model.v_prime(*x) - theta * (model.p_prime(*x) - mean_p);
                let k = const_k.unwrap_or_else(|| model.k_squared(*x).sqrt());
                *x += drift * dt + noise * k * xi;
                if !(x.abs() <= DIVERGENCE) {
                    return Some((c * CHUNK + j, *x));
                }
            }
            None
        };
        #[cfg(feature = "parallel")]
        let bad = {
            use rayon::prelude::*;
            self.positions
                .par_chunks_mut(CHUNK)
                .enumerate()
                .filter_map(|(c, chunk)| update(c, chunk))
                .min_by_key(|b| b.0)
        };
        #[cfg(not(feature = "parallel"))]
        let bad = self
            .positions
            .chunks_mut(CHUNK)
            .enumerate()
            .filter_map(|(c, chunk)| update(c, chunk))
            .min_by_key(|b| b.0);
        self.steps += 1;
        if let Some((particle, position)) = bad {
            return Err(Error::Divergence {
                step: self.steps,
                particle,
                position,
            });
        }
        self.time = self.steps as f64 * dt;
        let (mean, stderr) = p_prime_stats(model, &self.positions);
        self.mean_trace.push(TracePoint {
            t: self.time,
            mean,
            stderr,
        });
        Ok(())
    }

    /// Trace as CSV with columns `t, mean, stderr`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,mean,stderr\n");
        for p in &self.mean_trace {
            out.push_str(&format!("{},{},{}\n", p.t, p.mean, p.stderr));
        }
        out
    }
}

/// One step, returning the advanced ensemble.
pub fn step(e: &ParticleEnsemble, model: &Model, sigma: f64) -> Result<ParticleEnsemble> {
    let mut next = e.clone();
    next.advance(model, sigma)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryEstimate {
    pub mean: f64,
    /// Batch-means standard error with 20 batches.
    pub stderr: f64,
    pub batch_means: Vec<f64>,
    pub ensemble: ParticleEnsemble,
}

pub const BATCHES: usize = 20;

/// Parameters of [`stationary_mean_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationParams {
    pub n: usize,
    pub dt: f64,
    pub t_burn: f64,
    pub t_sample: f64,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
}

/// Time average of the empirical mean of `P'` over the sampling window.
pub fn stationary_mean_estimate(
    model: &Model,
    sigma: f64,
    init: InitialLaw,
    params: SimulationParams,
) -> Result<StationaryEstimate> {
    if !(params.t_burn > 0.0 && params.t_sample > 0.0) {
        return Err(Error::InvalidArgument("t_burn and t_sample must be positive".into()));
    }
    let mut e = init_ensemble(params.n, init, params.seed, params.dt)?.with_antithetic(params.antithetic);
    let burn = (params.t_burn / params.dt).round() as u64;
    let sample = ((params.t_sample / params.dt).round() as u64).max(BATCHES as u64);
    for _ in 0..burn {
        e.advance(model, sigma)?;
    }
    let mut values = Vec::with_capacity(sample as usize);
    for _ in 0..sample {
        e.advance(model, sigma)?;
        values.push(e.mean_trace.last().map(|p| p.mean).unwrap_or(0.0));
    }
    let per = values.len() / BATCHES;
    let batch_means: Vec<f64> = (0..BATCHES)
        .map(|b| pairwise_sum(&values[b * per..(b + 1) * per]) / per as f64)
        .collect();
    let mean = pairwise_sum(&values[..per * BATCHES]) / (per * BATCHES) as f64;
    let var = batch_means.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(StationaryEstimate {
        mean,
        stderr: (var / BATCHES as f64).sqrt(),
        batch_means,
        ensemble: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn gaussian() -> Model {
        Model::new(ModelSpec::polynomial(&[0.0, 1.0], &[0.0, 1.0], 1.0)).unwrap()
    }

    fn bistable() -> Model {
        Model::new(ModelSpec::polynomial(&[0.0, -1.0, 0.0, 1.0], &[0.0, 1.0], 2.0)).unwrap()
    }

    #[test]
    fn point_mass_init() {
        let e = init_ensemble(4, InitialLaw::PointMass { x0: 1.0 }, 7, 0.01).unwrap();
        assert_eq!(e.positions, vec![1.0; 4]);
    }

    #[test]
    fn init_is_deterministic() {
        let law = InitialLaw::Uniform { lo: -1.0, hi: 2.0 };
        let a = init_ensemble(3000, law, 11, 0.01).unwrap();
        let b = init_ensemble(3000, law, 11, 0.01).unwrap();
        assert_eq!(a.positions, b.positions);
        assert!(a.positions.iter().all(|&x| (-1.0..2.0).contains(&x)));
        let c = init_ensemble(3000, law, 12, 0.01).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn gaussian_init_mean() {
        let n = 100_000;
        let e = init_ensemble(n, InitialLaw::Gaussian { mu: 0.0, sd: 1.0 }, 3, 0.01).unwrap();
        let mean = e.positions.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(init_ensemble(1, InitialLaw::PointMass { x0: 0.0 }, 0, 0.1).is_err());
        assert!(init_ensemble(10, InitialLaw::PointMass { x0: 0.0 }, 0, 0.0).is_err());
    }

    #[test]
    fn noiseless_point_mass_step() {
        let m = bistable();
        let e = init_ensemble(8, InitialLaw::PointMass { x0: 1.7 }, 0, 0.01).unwrap();
        let next = step(&e, &m, 0.0).unwrap();
        let want = 1.7 - m.v_prime(1.7) * 0.01;
        assert!(next.positions.iter().all(|&x| x == want));
        assert_eq!(next.mean_trace.len(), 2);
    }

    #[test]
    fn noiseless_contraction() {
        let m = gaussian();
        let mut e = init_ensemble(64, InitialLaw::Uniform { lo: -2.0, hi: 2.0 }, 5, 0.01).unwrap();
        let spread0 = e.positions.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for _ in 0..500 {
            e.advance(&m, 0.0).unwrap();
        }
        let spread = e.positions.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(spread < 0.1 * spread0);
    }

    #[test]
    fn symmetric_positions_stay_symmetric_without_noise() {
        let m = bistable();
        let mut e = init_ensemble(6, InitialLaw::PointMass { x0: 0.0 }, 0, 0.01).unwrap();
        // mirror pairs are adjacent so every partial sum of P' cancels exactly
        e.positions = vec![-1.3, 1.3, -0.4, 0.4, -0.1, 0.1];
        for _ in 0..100 {
            e.advance(&m, 0.0).unwrap();
        }
        let p = &e.positions;
        for i in 0..3 {
            assert_eq!(p[2 * i], -p[2 * i + 1]);
        }
    }

    #[test]
    fn divergence_detected() {
        let m = bistable();
        let e = init_ensemble(4, InitialLaw::PointMass { x0: 50.0 }, 0, 1.0).unwrap();
        let mut e = e;
        let err = (0..10).find_map(|_| e.advance(&m, 0.0).err()).unwrap();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn antithetic_run_mirrors_trace() {
        let m = bistable();
        let law = |x0| InitialLaw::PointMass { x0 };
        let mut a = init_ensemble(3000, law(0.8), 9, 0.01).unwrap();
        let mut b = init_ensemble(3000, law(-0.8), 9, 0.01).unwrap().with_antithetic(true);
        for _ in 0..50 {
            a.advance(&m, 0.6).unwrap();
            b.advance(&m, 0.6).unwrap();
        }
        for (p, q) in a.mean_trace.iter().zip(&b.mean_trace) {
            assert_eq!(p.mean, -q.mean);
        }
    }

    #[test]
    fn trace_csv_header() {
        let m = gaussian();
        let e = init_ensemble(4, InitialLaw::PointMass { x0: 1.0 }, 0, 0.1).unwrap();
        let e = step(&e, &m, 0.5).unwrap();
        let csv = e.trace_csv();
        assert!(csv.starts_with("t,mean,stderr\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
