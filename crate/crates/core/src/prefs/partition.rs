//! Correlation clustering of concepts from pairwise coreference probabilities.
//!
//! Clusters are equivalence classes, so transitivity holds by construction.
//! Partitions are canonical: members ascending, clusters ordered by their
//! smallest member.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Inputs at or below this size are solved by enumerating all set partitions.
pub const EXACT_PARTITION_LIMIT: usize = 8;
pub const PARTITION_RESTARTS: usize = 5;

pub type Partition = Vec<Vec<usize>>;

/// `sum_{i<j} p_ij x_ij + (1 - p_ij)(1 - x_ij)` where `x_ij` is co-membership.
pub fn partition_objective(prob: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += if labels[i] == labels[j] { prob[i][j] } else { 1.0 - prob[i][j] };
        }
    }
    total
}

fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

pub fn labels_to_partition(labels: &[usize]) -> Partition {
    let canon = canonical(labels);
    let k = canon.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); k];
    for (i, &l) in canon.iter().enumerate() {
        out[l].push(i);
    }
    out
}

fn better(v: f64, labels: &[usize], best_v: f64, best: &[usize]) -> bool {
    v > best_v || (v == best_v && labels < best)
}

/// Calls `f` on every restricted growth string of length `n`.
fn for_each_partition(n: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(labels: &mut Vec<usize>, max: usize, n: usize, f: &mut impl FnMut(&[usize])) {
        if labels.len() == n {
            f(labels);
            return;
        }
        for l in 0..=max + usize::from(!labels.is_empty()) {
            labels.push(l);
            let m = if labels.len() == 1 { 0 } else { max.max(l) };
            rec(labels, m, n, f);
            labels.pop();
        }
    }
    if n == 0 {
        f(&[]);
        return;
    }
    rec(&mut Vec::with_capacity(n), 0, n, f);
}

fn exact(prob: &[Vec<f64>]) -> Vec<usize> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_partition(prob.len(), &mut |labels| {
        let v = partition_objective(prob, labels);
        if best.as_ref().is_none_or(|(b, bv)| better(v, labels, *bv, b)) {
            best = Some((labels.to_vec(), v));
        }
    });
    best.map(|b| b.0).unwrap_or_default()
}

/// Change in objective from moving item `i` into cluster `target`.
fn move_gain(prob: &[Vec<f64>], labels: &[usize], i: usize, target: usize) -> f64 {
    let mut gain = 0.0;
    for j in 0..labels.len() {
        if j == i {
            continue;
        }
        let was = labels[j] == labels[i];
        let now = labels[j] == target;
        if was != now {
            let agree = 2.0 * prob[i][j] - 1.0;
            gain += if now { agree } else { -agree };
        }
    }
    gain
}

fn local_search(prob: &[Vec<f64>], mut labels: Vec<usize>) -> Vec<usize> {
    let n = labels.len();
    loop {
        let mut improved = false;
        // single-item moves, including into a fresh cluster
        for i in 0..n {
            let fresh = labels.iter().copied().max().unwrap_or(0) + 1;
            let mut best = (0.0, labels[i]);
            let mut targets: Vec<usize> = labels.clone();
            targets.sort_unstable();
            targets.dedup();
            targets.push(fresh);
            for t in targets {
                if t == labels[i] {
                    continue;
                }
                let g = move_gain(prob, &labels, i, t);
                if g > best.0 + 1e-12 {
                    best = (g, t);
                }
            }
            if best.1 != labels[i] {
                labels[i] = best.1;
                improved = true;
            }
        }
        // pairwise cluster merges
        let mut ids: Vec<usize> = labels.clone();
        ids.sort_unstable();
        ids.dedup();
        'merge: for (x, &a) in ids.iter().enumerate() {
            for &b in &ids[x + 1..] {
                let mut gain = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if labels[i] == a && labels[j] == b {
                            gain += 2.0 * prob[i][j] - 1.0;
                        }
                    }
                }
                if gain > 1e-12 {
                    for l in labels.iter_mut() {
                        if *l == b {
                            *l = a;
                        }
                    }
                    improved = true;
                    break 'merge;
                }
            }
        }
        if !improved {
            return canonical(&labels);
        }
    }
}

/// Partition maximising agreement with the pairwise probabilities.
///
/// Up to [`EXACT_PARTITION_LIMIT`] items are solved exactly. Larger inputs run
/// [`PARTITION_RESTARTS`] local searches (restart 0 from singletons, the rest
/// from seeded random labelings) and keep the best.
pub fn partition_concepts(prob: &[Vec<f64>], seed: u64) -> Partition {
    let n = prob.len();
    if n <= EXACT_PARTITION_LIMIT {
        return labels_to_partition(&exact(prob));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..PARTITION_RESTARTS {
        let start: Vec<usize> = if r == 0 {
            (0..n).collect()
        } else {
            let k = rng.gen_range(1..=n);
            (0..n).map(|_| rng.gen_range(0..k)).collect()
        };
        let labels = local_search(prob, start);
        let v = partition_objective(prob, &labels);
        if best.as_ref().is_none_or(|(b, bv)| better(v, &labels, *bv, b)) {
            best = Some((labels, v));
        }
    }
    labels_to_partition(&best.expect("restarts ran").0)
}

/// Cluster index of every item.
pub fn cluster_of(partition: &Partition, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for (k, members) in partition.iter().enumerate() {
        for &i in members {
            out[i] = k;
        }
    }
    out
}
