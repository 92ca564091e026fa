#![allow(dead_code)]

use std::collections::BTreeSet;

use turbo_aggregate::ff::{prg, FieldElem, FieldVec, Seed, MODULUS};

pub fn random_models(n: usize, dim: usize, seed: u64) -> Vec<FieldVec> {
    (0..n).map(|i| prg(Seed(seed).derive(i as u64), dim)).collect()
}

/// Coordinate-wise sum done in u128 and reduced once, independent of the
/// field implementation.
pub fn oracle_sum<'a>(dim: usize, vectors: impl IntoIterator<Item = &'a FieldVec>) -> FieldVec {
    let mut acc = vec![0u128; dim];
    for v in vectors {
        for (a, e) in acc.iter_mut().zip(v.iter()) {
            *a += e.value() as u128;
        }
    }
    acc.into_iter()
        .map(|a| FieldElem::new((a % MODULUS as u128) as u64))
        .collect()
}

pub fn survivors_sum(models: &[FieldVec], dropped: &BTreeSet<usize>) -> FieldVec {
    let dim = models[0].len();
    oracle_sum(dim, (0..models.len()).filter(|u| !dropped.contains(u)).map(|u| &models[u]))
}

/// All `k`-subsets of `items`.
pub fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out = subsets(&items[1..], k);
    for mut rest in subsets(&items[1..], k - 1) {
        rest.insert(0, items[0]);
        out.push(rest);
    }
    out
}
