use serde::{Deserialize, Serialize};

use super::{sigmoid_beta, sigmoid_beta_prime, weighted_sq_distance, ExdosError, LabeledSet};

/// `J = J1 + J2`: weighted within-cluster scatter plus the nearest-neighbour error surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub total: f64,
    pub clustering: f64,
    pub classification: f64,
    /// Samples without a same-label or different-label neighbour in their cluster.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateReport {
    pub value: f64,
    pub skipped: usize,
}

struct Neighbours {
    same: usize,
    diff: usize,
    d_same: f64,
    d_diff: f64,
}

fn members(assignment: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        m[c].push(i);
    }
    m
}

fn neighbours(samples: &[Vec<f64>], labels: &[u8], cluster: &[usize], w: &[f64], i: usize) -> Option<Neighbours> {
    let mut same = None::<(usize, f64)>;
    let mut diff = None::<(usize, f64)>;
    for &j in cluster {
        if j == i {
            continue;
        }
        let d = weighted_sq_distance(&samples[i], &samples[j], w);
        let slot = if labels[j] == labels[i] { &mut same } else { &mut diff };
        if slot.is_none_or(|(_, best)| d < best) {
            *slot = Some((j, d));
        }
    }
    let (same, ds) = same?;
    let (diff, dd) = diff?;
    if dd <= 0.0 {
        return None;
    }
    Some(Neighbours {
        same,
        diff,
        d_same: ds.sqrt(),
        d_diff: dd.sqrt(),
    })
}

/// Mean over all samples of `S_beta(d_w(s, s_=) / d_w(s, s_!=))`, neighbours
/// searched within the sample's cluster under that cluster's weights.
pub fn nn_error_surrogate(
    data: &LabeledSet,
    weights: &[Vec<f64>],
    assignment: &[usize],
    beta: f64,
) -> Result<SurrogateReport, ExdosError> {
    let groups = members(assignment, weights.len());
    let n = data.samples.len();
    let mut total = 0.0;
    let mut skipped = 0;
    for i in 0..n {
        let k = assignment[i];
        match neighbours(&data.samples, &data.labels, &groups[k], &weights[k], i) {
            Some(nb) => total += sigmoid_beta(nb.d_same / nb.d_diff, beta),
            None => skipped += 1,
        }
    }
    if skipped == n {
        return Err(ExdosError::LonelyLabel);
    }
    if skipped > 0 {
        log::debug!("nn surrogate skipped {skipped} of {n} samples without both labels nearby");
    }
    Ok(SurrogateReport {
        value: total / n as f64,
        skipped,
    })
}

pub fn objective(
    samples: &[Vec<f64>],
    labels: &[u8],
    weights: &[Vec<f64>],
    centroids: &[Vec<f64>],
    assignment: &[usize],
    beta: f64,
) -> Objective {
    evaluate(samples, labels, weights, centroids, assignment, beta, false).0
}

/// Objective with its analytic gradients `(dJ/dW, dJ/dC)`, both indexed `[k][j]`.
pub fn objective_gradients(
    samples: &[Vec<f64>],
    labels: &[u8],
    weights: &[Vec<f64>],
    centroids: &[Vec<f64>],
    assignment: &[usize],
    beta: f64,
) -> (Objective, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    evaluate(samples, labels, weights, centroids, assignment, beta, true)
}

fn evaluate(
    samples: &[Vec<f64>],
    labels: &[u8],
    weights: &[Vec<f64>],
    centroids: &[Vec<f64>],
    assignment: &[usize],
    beta: f64,
    with_grad: bool,
) -> (Objective, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = centroids.len();
    let d = centroids.first().map_or(0, Vec::len);
    let n = samples.len() as f64;
    let groups = members(assignment, k);
    let mut gw = vec![vec![0.0; d]; if with_grad { k } else { 0 }];
    let mut gc = vec![vec![0.0; d]; if with_grad { k } else { 0 }];
    let mut clustering = 0.0;
    let mut classification = 0.0;
    let mut skipped = 0;

    for (i, x) in samples.iter().enumerate() {
        let c = assignment[i];
        let w = &weights[c];
        let center = &centroids[c];
        clustering += weighted_sq_distance(x, center, w);
        if with_grad {
            for j in 0..d {
                let delta = x[j] - center[j];
                gw[c][j] += 2.0 * w[j] * delta * delta;
                gc[c][j] += -2.0 * w[j] * w[j] * delta;
            }
        }
        let Some(nb) = neighbours(samples, labels, &groups[c], w, i) else {
            skipped += 1;
            continue;
        };
        let r = nb.d_same / nb.d_diff;
        classification += sigmoid_beta(r, beta);
        if with_grad {
            let scale = sigmoid_beta_prime(r, beta) / n;
            let same = &samples[nb.same];
            let diff = &samples[nb.diff];
            let dd3 = nb.d_diff * nb.d_diff * nb.d_diff;
            for j in 0..d {
                let a = x[j] - same[j];
                let b = x[j] - diff[j];
                let first = if nb.d_same > 0.0 {
                    w[j] * a * a / (nb.d_same * nb.d_diff)
                } else {
                    0.0
                };
                let dr = first - nb.d_same * w[j] * b * b / dd3;
                gw[c][j] += scale * dr;
            }
        }
    }
    let classification = classification / n;
    (
        Objective {
            total: clustering + classification,
            clustering,
            classification,
            skipped,
        },
        gw,
        gc,
    )
}
