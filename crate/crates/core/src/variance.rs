//! Process-noise selection for the EKF from clustered irradiance-variation
//! features.
//!
//! Historical values of the differentiated irradiance series dS are grouped
//! by k-means on two windowed features: the window mean of dS and the
//! root-mean-square of its successive differences (the variability). Each
//! cluster keeps the variance of its member dS values; at run time the
//! cluster nearest to the current feature vector supplies Q.
//!
//! Window convention: the feature at index i uses the n most recent dS
//! values dS[i-n+1..=i]; the variability additionally consumes dS[i-n] for
//! the first difference, so both the mean and the RMS divide by exactly n
//! terms. The clustered dS value paired with a feature vector is the next
//! one (one-step-ahead), since the cluster pdf stands for the distribution
//! of the upcoming variation.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MAX_ITERATIONS: usize = 300;
const INERTIA_REL_TOL: f64 = 1e-6;
const RESTART_BUDGET: usize = 8;

/// Windowed (mean, variability) features of the differentiated series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    /// Window mean of dS [W/m2].
    pub m: f64,
    /// RMS of successive differences of dS over the window [W/m2].
    pub v: f64,
}

impl FeatureVector {
    fn distance_sq(&self, other: &FeatureVector) -> f64 {
        let dm = self.m - other.m;
        let dv = self.v - other.v;
        dm * dm + dv * dv
    }
}

/// Fitted k-means model: centroids plus per-cluster dS variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<FeatureVector>,
    /// Variance of the dS values assigned to each cluster [(W/m2)^2].
    pub variances: Vec<f64>,
    /// Feature window length n.
    pub window_length: usize,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centroids.len() != self.variances.len() || self.centroids.is_empty() {
            return Err(Error::invalid("cluster model", "size mismatch or empty"));
        }
        if !self.variances.iter().any(|&v| v > 0.0) {
            return Err(Error::invalid(
                "cluster model",
                "all cluster variances are zero",
            ));
        }
        if self.variances.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("cluster model", "negative variance"));
        }
        Ok(())
    }
}

/// Features over a slice holding exactly n+1 dS values: the window plus one
/// preceding value for the first difference. Returns None on length mismatch.
pub fn window_features(window_plus_one: &[f64], n: usize) -> Option<FeatureVector> {
    if n < 2 || window_plus_one.len() != n + 1 {
        return None;
    }
    let window = &window_plus_one[1..];
    let m = window.iter().sum::<f64>() / n as f64;
    let sq_sum: f64 = window_plus_one
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum();
    Some(FeatureVector {
        m,
        v: (sq_sum / n as f64).sqrt(),
    })
}

/// Feature vectors over the whole differentiated series. The first feature
/// lands at index n (0-based) of `delta_s`; output length is
/// `delta_s.len() - n`.
pub fn compute_features(delta_s: &[f64], n: usize) -> Result<Vec<FeatureVector>> {
    if n < 2 {
        return Err(Error::invalid("feature window", "n must be >= 2"));
    }
    if delta_s.len() <= n {
        return Err(Error::InsufficientHistory {
            needed: n + 1,
            got: delta_s.len(),
        });
    }
    Ok((n..delta_s.len())
        .map(|i| window_features(&delta_s[i - n..=i], n).expect("window sized by construction"))
        .collect())
}

/// Pair each feature vector with the one-step-ahead dS value. Drops the last
/// feature (no successor). Convenience for building `fit_clusters` input
/// from a raw dS series.
pub fn features_with_next_delta(delta_s: &[f64], n: usize) -> Result<(Vec<FeatureVector>, Vec<f64>)> {
    let features = compute_features(delta_s, n)?;
    if features.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: n + 2,
            got: delta_s.len(),
        });
    }
    let paired: Vec<f64> = (n + 1..delta_s.len()).map(|i| delta_s[i]).collect();
    let features = features[..paired.len()].to_vec();
    Ok((features, paired))
}

/// Lloyd's algorithm with k-means++ seeding. Each cluster's variance is the
/// population variance of the paired dS values of its members. Empty
/// clusters trigger a re-seeded restart, bounded by a retry budget.
pub fn fit_clusters(
    features: &[FeatureVector],
    paired_delta_s: &[f64],
    k: usize,
    window_length: usize,
    seed: u64,
) -> Result<ClusterModel> {
    if k == 0 {
        return Err(Error::invalid("k-means", "k must be >= 1"));
    }
    if features.len() != paired_delta_s.len() {
        return Err(Error::invalid(
            "k-means",
            format!(
                "feature/value length mismatch: {} vs {}",
                features.len(),
                paired_delta_s.len()
            ),
        ));
    }
    if features.len() < k {
        return Err(Error::InsufficientHistory {
            needed: k,
            got: features.len(),
        });
    }

    for attempt in 0..RESTART_BUDGET {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let centroids = kmeans_pp_init(features, k, &mut rng);
        if let Some((centroids, assignment)) = lloyd(features, centroids) {
            let mut variances = vec![0.0f64; k];
            let mut counts = vec![0usize; k];
            let mut means = vec![0.0f64; k];
            for (x, &c) in paired_delta_s.iter().zip(assignment.iter()) {
                means[c] += x;
                counts[c] += 1;
            }
            if counts.iter().any(|&c| c == 0) {
                continue; // empty cluster: restart with a new seed
            }
            for c in 0..k {
                means[c] /= counts[c] as f64;
            }
            for (x, &c) in paired_delta_s.iter().zip(assignment.iter()) {
                let d = x - means[c];
                variances[c] += d * d;
            }
            for c in 0..k {
                variances[c] /= counts[c] as f64;
            }
            let model = ClusterModel {
                centroids,
                variances,
                window_length,
            };
            model.validate()?;
            return Ok(model);
        }
    }
    Err(Error::EmptyCluster {
        retries: RESTART_BUDGET,
    })
}

fn kmeans_pp_init(
    features: &[FeatureVector],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<FeatureVector> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(features[rng.random_range(0..features.len())]);
    let mut dist = vec![0.0f64; features.len()];
    while centroids.len() < k {
        let mut total = 0.0;
        for (j, f) in features.iter().enumerate() {
            let d = centroids
                .iter()
                .map(|c| f.distance_sq(c))
                .fold(f64::INFINITY, f64::min);
            dist[j] = d;
            total += d;
        }
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = features.len() - 1;
            for (j, &d) in dist.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = j;
                    break;
                }
            }
            features[chosen]
        } else {
            // All points coincide with existing centroids.
            features[rng.random_range(0..features.len())]
        };
        centroids.push(next);
    }
    centroids
}

/// Lloyd iterations; returns None when a cluster empties out.
fn lloyd(
    features: &[FeatureVector],
    mut centroids: Vec<FeatureVector>,
) -> Option<(Vec<FeatureVector>, Vec<usize>)> {
    let k = centroids.len();
    let mut assignment = vec![0usize; features.len()];
    let mut prev_inertia = f64::INFINITY;

    for _ in 0..MAX_ITERATIONS {
        let mut inertia = 0.0;
        for (j, f) in features.iter().enumerate() {
            let mut best = (0usize, f.distance_sq(&centroids[0]));
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = f.distance_sq(centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            assignment[j] = best.0;
            inertia += best.1;
        }

        let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
        for (f, &c) in features.iter().zip(assignment.iter()) {
            sums[c].0 += f.m;
            sums[c].1 += f.v;
            sums[c].2 += 1;
        }
        if sums.iter().any(|&(_, _, count)| count == 0) {
            return None;
        }
        for (c, &(sm, sv, count)) in sums.iter().enumerate() {
            centroids[c] = FeatureVector {
                m: sm / count as f64,
                v: sv / count as f64,
            };
        }

        if (prev_inertia - inertia).abs() <= INERTIA_REL_TOL * prev_inertia.max(1e-12) {
            break;
        }
        prev_inertia = inertia;
    }
    Some((centroids, assignment))
}

/// Variance of the cluster whose centroid is nearest (squared Euclidean
/// distance) to the current features; ties resolve to the lowest index.
pub fn select_q(model: &ClusterModel, current: &FeatureVector) -> f64 {
    let mut best = (0usize, current.distance_sq(&model.centroids[0]));
    for (c, centroid) in model.centroids.iter().enumerate().skip(1) {
        let d = current.distance_sq(centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    model.variances[best.0]
}

/// Mean within-cluster dS variance for each k in the range; the empirical
/// criterion for choosing k.
pub fn k_sweep(
    features: &[FeatureVector],
    paired_delta_s: &[f64],
    k_range: std::ops::RangeInclusive<usize>,
    window_length: usize,
    seed: u64,
) -> Vec<(usize, Option<f64>)> {
    k_range
        .map(|k| {
            let mean_var = fit_clusters(features, paired_delta_s, k, window_length, seed)
                .ok()
                .map(|m| m.variances.iter().sum::<f64>() / m.variances.len() as f64);
            (k, mean_var)
        })
        .collect()
}
