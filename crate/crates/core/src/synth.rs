//! Seeded synthetic instances.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Clustered unit-norm features with ground truth.
///
/// Cluster centres are uniform on the unit sphere. Every cluster receives
/// at least one point (sizes differ by at most one), points are
/// `centre + N(0, sigma^2 I)` and finally scaled to unit norm. Alpha is
/// switched off.
pub fn synth_instance(
    n: usize,
    d: usize,
    n_clusters: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(FeatureMatrix, Vec<usize>)> {
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::argument(format!(
            "need 1 <= n_clusters <= n, got {n_clusters} clusters for {n} points"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::argument(format!("invalid noise sigma {noise_sigma}")));
    }
    if d == 0 {
        return Err(Error::argument("dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..n_clusters).map(|_| unit_vector(d, &mut rng)).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % n_clusters).collect();
    labels.shuffle(&mut rng);
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::argument(e.to_string()))?;
    let mut data = Vec::with_capacity(n * d);
    let mut point = vec![0.0f64; d];
    for &c in &labels {
        for (p, &x) in point.iter_mut().zip(&centres[c]) {
            *p = x + noise.sample(&mut rng);
        }
        let norm = point.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = if norm > 0.0 { norm } else { 1.0 };
        data.extend(point.iter().map(|v| (v / norm) as f32));
    }
    Ok((FeatureMatrix::new(n, d, data)?, labels))
}

fn unit_vector(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Standard normal features without any cluster structure.
pub fn gaussian_features(n: usize, d: usize, seed: u64) -> Result<FeatureMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x as f32
        })
        .collect();
    FeatureMatrix::new(n, d, data)
}
