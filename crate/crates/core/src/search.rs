//! Budgeted subset search shared by the sentence selectors.
//!
//! Selections are kept as ascending id lists. Between two selections with the
//! same value, the lexicographically smaller id list wins.

use rand::seq::SliceRandom;
use rand::Rng;

/// Candidate counts at or below this are solved by full enumeration.
pub const EXACT_SEARCH_LIMIT: usize = 15;

pub(crate) trait SubsetValue {
    fn value(&self, ids: &[usize]) -> f64;
}

impl<F: Fn(&[usize]) -> f64> SubsetValue for F {
    fn value(&self, ids: &[usize]) -> f64 {
        self(ids)
    }
}

pub(crate) fn better(a: f64, a_ids: &[usize], b: f64, b_ids: &[usize]) -> bool {
    a > b || (a == b && a_ids < b_ids)
}

/// Every non-empty feasible subset of `candidates` (ascending ids).
pub(crate) fn feasible_subsets(candidates: &[usize], lengths: &[usize], budget: usize) -> Vec<Vec<usize>> {
    let n = candidates.len();
    assert!(n < usize::BITS as usize, "enumeration over {n} candidates");
    let mut out = Vec::new();
    for mask in 1usize..(1 << n) {
        let ids: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| candidates[b]).collect();
        if ids.iter().map(|&i| lengths[i]).sum::<usize>() <= budget {
            out.push(ids);
        }
    }
    out
}

pub(crate) fn exact<V: SubsetValue>(f: &V, candidates: &[usize], lengths: &[usize], budget: usize) -> Option<(Vec<usize>, f64)> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for ids in feasible_subsets(candidates, lengths, budget) {
        let v = f.value(&ids);
        if best.as_ref().is_none_or(|(b, bv)| better(v, &ids, *bv, b)) {
            best = Some((ids, v));
        }
    }
    best
}

fn insert_sorted(ids: &[usize], x: usize) -> Vec<usize> {
    let mut out = ids.to_vec();
    let at = out.partition_point(|&i| i < x);
    out.insert(at, x);
    out
}

/// Steepest-ascent hill climbing over add, remove and swap moves.
pub(crate) fn local_search<V: SubsetValue>(
    f: &V,
    start: Vec<usize>,
    candidates: &[usize],
    lengths: &[usize],
    budget: usize,
) -> (Vec<usize>, f64) {
    let mut cur = start;
    cur.sort_unstable();
    let mut cur_v = f.value(&cur);
    loop {
        let used: usize = cur.iter().map(|&i| lengths[i]).sum();
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut consider = |ids: Vec<usize>| {
            if ids.is_empty() {
                return;
            }
            let v = f.value(&ids);
            if better(v, &ids, cur_v, &cur) && best.as_ref().is_none_or(|(b, bv)| better(v, &ids, *bv, b)) {
                best = Some((ids, v));
            }
        };
        for &c in candidates {
            if cur.binary_search(&c).is_ok() {
                continue;
            }
            if used + lengths[c] <= budget {
                consider(insert_sorted(&cur, c));
            }
            for (pos, &out) in cur.iter().enumerate() {
                if used - lengths[out] + lengths[c] <= budget {
                    let mut rest = cur.clone();
                    rest.remove(pos);
                    consider(insert_sorted(&rest, c));
                }
            }
        }
        for pos in 0..cur.len() {
            let mut rest = cur.clone();
            rest.remove(pos);
            consider(rest);
        }
        match best {
            Some((ids, v)) if v > cur_v => {
                cur = ids;
                cur_v = v;
            }
            _ => return (cur, cur_v),
        }
    }
}

/// Greedy fill in the given priority order, skipping what does not fit.
pub(crate) fn greedy_fill(order: &[usize], lengths: &[usize], budget: usize) -> Vec<usize> {
    let mut used = 0;
    let mut out = Vec::new();
    for &i in order {
        if used + lengths[i] <= budget {
            used += lengths[i];
            out.push(i);
        }
    }
    out.sort_unstable();
    out
}

/// A random feasible set: candidates shuffled, then filled greedily.
pub(crate) fn random_fill<R: Rng>(candidates: &[usize], lengths: &[usize], budget: usize, rng: &mut R) -> Vec<usize> {
    let mut order = candidates.to_vec();
    order.shuffle(rng);
    greedy_fill(&order, lengths, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn exact_prefers_lower_ids_on_ties() {
        let lengths = vec![1, 1, 1];
        let f = |ids: &[usize]| ids.len().min(1) as f64;
        let (ids, v) = exact(&f, &[0, 1, 2], &lengths, 3).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(ids, vec![0]);
    }

    #[test]
    fn local_search_reaches_optimum_of_additive_value() {
        let lengths = vec![3, 2, 2, 4, 1];
        let gains = [5.0, 3.0, 3.5, 6.0, 0.5];
        let f = |ids: &[usize]| ids.iter().map(|&i| gains[i]).sum::<f64>();
        let cands: Vec<usize> = (0..5).collect();
        let (opt, ov) = exact(&f, &cands, &lengths, 6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let start = random_fill(&cands, &lengths, 6, &mut rng);
        let (_, lv) = local_search(&f, start, &cands, &lengths, 6);
        assert!(lv <= ov);
        assert!(lengths.iter().zip(0..).filter(|(_, i)| opt.contains(i)).map(|(l, _)| l).sum::<usize>() <= 6);
    }

    #[test]
    fn greedy_respects_budget() {
        let lengths = vec![5, 4, 3];
        assert_eq!(greedy_fill(&[0, 1, 2], &lengths, 8), vec![0, 2]);
    }
}
