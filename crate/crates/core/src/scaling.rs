//! Wall-time scaling runs on synthetic instances.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::AlphaSign;
use crate::solvers::{solve, Algorithm, SolverConfig};
use crate::synth::synth_instance;

#[derive(Clone, Debug)]
pub struct ScalingConfig {
    pub algorithms: Vec<Algorithm>,
    pub d: usize,
    pub n_clusters: usize,
    pub noise_sigma: f64,
    pub alpha: f32,
    pub alpha_sign: AlphaSign,
    pub repeats: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            algorithms: vec![Algorithm::DenseGaecInc, Algorithm::DenseLaec, Algorithm::DenseAppLaec],
            d: 64,
            n_clusters: 100,
            noise_sigma: 0.1,
            alpha: 0.4,
            alpha_sign: AlphaSign::Minus,
            repeats: 3,
            seed: 0,
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingPoint {
    pub algorithm: Algorithm,
    pub n: usize,
    /// Median over the repeats.
    pub wall_time_ms: f64,
    pub initial_graph_ms: f64,
    pub objective: f64,
    pub n_clusters: usize,
    pub exhaustive_searches: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
}

impl ScalingReport {
    pub fn series(&self, algorithm: Algorithm) -> Vec<&ScalingPoint> {
        self.points.iter().filter(|p| p.algorithm == algorithm).collect()
    }

    /// Least-squares slope of log(time) against log(n).
    pub fn slope(&self, algorithm: Algorithm) -> Option<f64> {
        let s = self.series(algorithm);
        log_log_slope(&s.iter().map(|p| (p.n as f64, p.wall_time_ms)).collect::<Vec<_>>())
    }

    pub fn initial_graph_slope(&self, algorithm: Algorithm) -> Option<f64> {
        let s = self.series(algorithm);
        log_log_slope(&s.iter().map(|p| (p.n as f64, p.initial_graph_ms)).collect::<Vec<_>>())
    }
}

pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Runs every configured algorithm at every size, one solve at a time.
pub fn scaling_benchmark(sizes: &[usize], config: &ScalingConfig) -> Result<ScalingReport> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::argument("sizes must be strictly ascending"));
    }
    if config.repeats == 0 {
        return Err(Error::argument("repeats must be at least 1"));
    }
    let mut points = Vec::new();
    for &n in sizes {
        let (fm, _) = synth_instance(n, config.d, config.n_clusters.min(n), config.noise_sigma, config.seed)?;
        let fm = fm.with_uniform_alpha(config.alpha, config.alpha_sign)?;
        for &algorithm in &config.algorithms {
            let cfg = SolverConfig::new(algorithm)
                .with_threads(config.threads)
                .with_seed(config.seed);
            let mut times = Vec::with_capacity(config.repeats);
            let mut init = Vec::with_capacity(config.repeats);
            let mut last = None;
            for _ in 0..config.repeats {
                let t = Instant::now();
                let sol = solve(&fm, &cfg)?;
                times.push(t.elapsed().as_secs_f64() * 1e3);
                init.push(sol.stats.initial_graph_ms);
                last = Some(sol);
            }
            let sol = last.expect("at least one repeat");
            points.push(ScalingPoint {
                algorithm,
                n,
                wall_time_ms: median(times),
                initial_graph_ms: median(init),
                objective: sol.partition.objective(),
                n_clusters: sol.partition.n_clusters(),
                exhaustive_searches: sol.stats.exhaustive_searches(),
            });
        }
    }
    Ok(ScalingReport { points })
}
