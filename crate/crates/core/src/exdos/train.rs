use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    nearest, objective, objective_gradients, weighted_sq_distance, ExDosHyper, ExDosModel, ExdosError, LabeledSet,
    Polarity, MIN_WEIGHT, MODEL_SCHEMA,
};

const KMEANS_ITERS: usize = 100;
const AUTO_K_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Fixed(usize),
    /// Pick K in 2..=10 by mean silhouette.
    Auto,
}

fn sq_euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ followed by Lloyd iterations, all on unweighted distance.
fn kmeans(samples: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = samples.len();
    let mut centroids = vec![samples[rng.gen_range(0..n)].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = samples
            .iter()
            .map(|x| centroids.iter().map(|c| sq_euclid(x, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if r < *d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(samples[pick].clone());
    }
    let ones = vec![vec![1.0; samples[0].len()]; k];
    let mut assignment = vec![0; n];
    for _ in 0..KMEANS_ITERS {
        let next: Vec<usize> = samples.iter().map(|x| nearest(&ones, &centroids, x)).collect();
        let changed = next != assignment;
        assignment = next;
        fix_empty(samples, &ones, &mut centroids, &mut assignment);
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = samples.iter().zip(&assignment).filter(|(_, &a)| a == c).map(|(x, _)| x).collect();
            if members.is_empty() {
                continue;
            }
            for (j, v) in centroid.iter_mut().enumerate() {
                *v = members.iter().map(|x| x[j]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    (centroids, assignment)
}

/// Moves each empty cluster's centroid onto the sample farthest from its own centroid.
fn fix_empty(samples: &[Vec<f64>], weights: &[Vec<f64>], centroids: &mut [Vec<f64>], assignment: &mut [usize]) -> usize {
    let k = centroids.len();
    let mut reseeded = 0;
    for c in 0..k {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        if counts[c] > 0 {
            continue;
        }
        let far = (0..samples.len())
            .filter(|&i| counts[assignment[i]] > 1)
            .map(|i| {
                let a = assignment[i];
                (i, weighted_sq_distance(&samples[i], &centroids[a], &weights[a]))
            })
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
        if let Some((i, _)) = far {
            log::debug!("cluster {c} emptied; reseeding from sample {i}");
            centroids[c] = samples[i].clone();
            assignment[i] = c;
            reseeded += 1;
        }
    }
    reseeded
}

/// Mean silhouette coefficient under Euclidean distance.
pub fn silhouette(samples: &[Vec<f64>], assignment: &[usize], k: usize) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            sums[assignment[j]] += sq_euclid(&samples[i], &samples[j]).sqrt();
            counts[assignment[j]] += 1;
        }
        let own = assignment[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if !b.is_finite() {
            continue;
        }
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

fn choose_k(data: &LabeledSet, seed: u64) -> usize {
    let upper = AUTO_K_MAX.min(data.len() / 2).max(2);
    let mut best = (2, f64::NEG_INFINITY);
    for k in 2..=upper {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, assignment) = kmeans(&data.samples, k, &mut rng);
        let s = silhouette(&data.samples, &assignment, k);
        if s > best.1 {
            best = (k, s);
        }
    }
    log::debug!("silhouette picked K={} (score {:.4})", best.0, best.1);
    best.0
}

/// Rescales a weight column to `sum w_j^2 = d`, the norm of the all-ones
/// start. Without it the clustering term is minimised by shrinking every
/// weight, and a cluster whose weights reach the floor sits at distance
/// zero from every point and absorbs the whole data set on reassignment.
fn normalize_column(w: &mut [f64]) {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        let scale = (w.len() as f64).sqrt() / norm;
        w.iter_mut().for_each(|x| *x = (*x * scale).max(MIN_WEIGHT));
    }
}

/// Fits per-cluster weights and centroids by alternating gradient steps on
/// `J = J1 + J2` and nearest-centroid reassignment.
pub fn train(data: &LabeledSet, k: KChoice, hyper: &ExDosHyper, seed: u64) -> Result<ExDosModel, ExdosError> {
    hyper.validate()?;
    if !data.labels.contains(&0) || !data.labels.contains(&1) {
        return Err(ExdosError::SingleLabel);
    }
    let k = match k {
        KChoice::Fixed(k) if k < 2 => return Err(ExdosError::InvalidK(k)),
        KChoice::Fixed(k) => k,
        KChoice::Auto => choose_k(data, seed),
    };
    if data.len() < 2 * k {
        return Err(ExdosError::TooFewSamples {
            needed: 2 * k,
            found: data.len(),
            k,
        });
    }
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut centroids, mut assignment) = kmeans(&data.samples, k, &mut rng);
    let mut weights = vec![vec![1.0; d]; k];
    let beta = hyper.beta_sigmoid;

    let j0 = objective(&data.samples, &data.labels, &weights, &centroids, &assignment, beta);
    if !j0.total.is_finite() {
        return Err(ExdosError::NonFiniteObjective {
            iteration: 0,
            last: f64::NAN,
        });
    }
    let mut trace = vec![j0.total];
    for iteration in 1..=hyper.max_iter {
        let (_, gw, _) = objective_gradients(&data.samples, &data.labels, &weights, &centroids, &assignment, beta);
        for (w, g) in weights.iter_mut().zip(&gw) {
            for (wj, gj) in w.iter_mut().zip(g) {
                *wj = (*wj - hyper.alpha_lr * gj).max(MIN_WEIGHT);
            }
            normalize_column(w);
        }
        let (_, _, gc) = objective_gradients(&data.samples, &data.labels, &weights, &centroids, &assignment, beta);
        for (c, g) in centroids.iter_mut().zip(&gc) {
            for (cj, gj) in c.iter_mut().zip(g) {
                *cj -= hyper.gamma_lr * gj;
            }
        }
        assignment = data.samples.iter().map(|x| nearest(&weights, &centroids, x)).collect();
        fix_empty(&data.samples, &weights, &mut centroids, &mut assignment);

        let j = objective(&data.samples, &data.labels, &weights, &centroids, &assignment, beta);
        let last = *trace.last().expect("trace starts non-empty");
        if !j.total.is_finite() || weights.iter().flatten().chain(centroids.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(ExdosError::NonFiniteObjective { iteration, last });
        }
        trace.push(j.total);
        if (last - j.total).abs() / last.abs().max(1e-12) < hyper.tol {
            break;
        }
    }

    let polarity = (0..k)
        .map(|c| {
            let (pos, neg) = assignment
                .iter()
                .zip(&data.labels)
                .filter(|(a, _)| **a == c)
                .fold((0, 0), |(p, n), (_, &l)| if l == 1 { (p + 1, n) } else { (p, n + 1) });
            if pos >= neg {
                Polarity::Positive
            } else {
                Polarity::Negative
            }
        })
        .collect();

    Ok(ExDosModel {
        schema: MODEL_SCHEMA.to_string(),
        weights,
        centroids,
        polarity,
        hyper: *hyper,
        feature_names: (0..d).map(|j| format!("f{j}")).collect(),
        assignment,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64) -> (LabeledSet, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        let mut blob = Vec::new();
        for i in 0..40 {
            let b = i % 2;
            let center = if b == 0 { 0.2 } else { 0.8 };
            samples.push((0..3).map(|_| center + rng.gen_range(-0.05..0.05)).collect());
            labels.push(u8::from(rng.gen_bool(0.5)));
            blob.push(b);
        }
        labels[0] = 0;
        labels[1] = 1;
        let ids = (0..samples.len()).collect();
        (LabeledSet::new(samples, labels, ids).unwrap(), blob)
    }

    #[test]
    fn recovers_blob_membership() {
        let (data, blob) = blobs(3);
        let m = train(&data, KChoice::Fixed(2), &ExDosHyper::default(), 1).unwrap();
        let first = m.assignment[0];
        for (a, b) in m.assignment.iter().zip(&blob) {
            assert_eq!(*a == first, *b == blob[0]);
        }
    }

    #[test]
    fn zero_rates_leave_parameters() {
        let (data, _) = blobs(4);
        let hyper = ExDosHyper {
            alpha_lr: 0.0,
            gamma_lr: 0.0,
            max_iter: 5,
            ..ExDosHyper::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (c0, _) = kmeans(&data.samples, 2, &mut rng);
        let m = train(&data, KChoice::Fixed(2), &hyper, 9).unwrap();
        assert!(m.weights.iter().flatten().all(|&w| w == 1.0));
        assert_eq!(m.centroids, c0);
    }

    #[test]
    fn auto_k_prefers_true_cluster_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let centers = [0.1, 0.5, 0.9];
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let c = centers[i % 3];
            samples.push(vec![c + rng.gen_range(-0.02..0.02), c + rng.gen_range(-0.02..0.02)]);
            labels.push((i % 2) as u8);
        }
        let data = LabeledSet::new(samples, labels, (0..60).collect()).unwrap();
        let m = train(&data, KChoice::Auto, &ExDosHyper::default(), 2).unwrap();
        assert_eq!(m.k(), 3);
    }

    #[test]
    fn objective_does_not_increase_overall() {
        let (data, _) = blobs(8);
        let m = train(&data, KChoice::Fixed(2), &ExDosHyper::default(), 8).unwrap();
        let trace = &m.objective_trace;
        assert!(trace.last().unwrap() <= &trace[0]);
        let ups = trace.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(ups * 20 <= trace.len() - 1, "{ups} increases in {}", trace.len() - 1);
    }

    #[test]
    fn invalid_inputs() {
        let (data, _) = blobs(1);
        assert!(matches!(
            train(&data, KChoice::Fixed(1), &ExDosHyper::default(), 0),
            Err(ExdosError::InvalidK(1))
        ));
        assert!(matches!(
            train(&data, KChoice::Fixed(30), &ExDosHyper::default(), 0),
            Err(ExdosError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn exploding_rate_is_reported() {
        let (data, _) = blobs(2);
        let hyper = ExDosHyper {
            gamma_lr: 1e200,
            ..ExDosHyper::default()
        };
        assert!(matches!(
            train(&data, KChoice::Fixed(2), &hyper, 0),
            Err(ExdosError::NonFiniteObjective { .. })
        ));
    }

    #[test]
    fn polarity_follows_majority() {
        let samples = vec![vec![0.0], vec![0.1], vec![0.05], vec![1.0], vec![0.9], vec![0.95]];
        let labels = vec![1, 1, 0, 0, 0, 1];
        let data = LabeledSet::new(samples, labels, (0..6).collect()).unwrap();
        let m = train(&data, KChoice::Fixed(2), &ExDosHyper::default(), 0).unwrap();
        let low = m.assignment[0];
        assert_eq!(m.polarity[low], Polarity::Positive);
        assert_eq!(m.polarity[1 - low], Polarity::Negative);
    }
}
