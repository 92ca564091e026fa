//! Random partitioning of users into groups and the group-size rule.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ff::{Prg, Seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupingError {
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("{n} users cannot form at least two groups of {group_size}")]
    TooFewUsers { n: usize, group_size: usize },
}

/// `D(a || b)` between Bernoulli distributions, in nats.
pub fn kl_bernoulli(a: f64, b: f64) -> Result<f64, GroupingError> {
    if !(b > 0.0 && b < 1.0) {
        return Err(GroupingError::DomainError(format!("b = {b} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(GroupingError::DomainError(format!("a = {a} must lie in [0, 1]")));
    }
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    Ok(term(a, b) + term(1.0 - a, 1.0 - b))
}

/// `D(0.5 || b)`, with `b = 0` mapped to infinity.
fn half_divergence(b: f64) -> f64 {
    if b == 0.0 {
        f64::INFINITY
    } else {
        kl_bernoulli(0.5, b).expect("b checked by caller")
    }
}

/// Group size `max(2, ceil(ln N / c))` with `c = min(D(0.5||p), D(0.5||T/N))`.
/// With `p = 0` and `T = 0` this falls back to `ceil(ln N)`.
pub fn group_size(n: usize, p: f64, t_frac: f64) -> Result<usize, GroupingError> {
    group_size_with_log(n, p, t_frac, f64::ln)
}

/// [`group_size`] with a caller-chosen logarithm for `log N`.
pub fn group_size_with_log(
    n: usize,
    p: f64,
    t_frac: f64,
    log: impl Fn(f64) -> f64,
) -> Result<usize, GroupingError> {
    if n < 4 {
        return Err(GroupingError::DomainError(format!("need N >= 4, got {n}")));
    }
    for (name, v) in [("p", p), ("T/N", t_frac)] {
        if !(0.0..0.5).contains(&v) {
            return Err(GroupingError::DomainError(format!("{name} = {v} must lie in [0, 0.5)")));
        }
    }
    let log_n = log(n as f64);
    let size = if p == 0.0 && t_frac == 0.0 {
        log_n.ceil()
    } else {
        let c = half_divergence(p).min(half_divergence(t_frac));
        (log_n / c).ceil()
    };
    Ok((size as usize).max(2))
}

/// Users split into groups, plus the per-group dropped sets. User ids are
/// `0..N`; members keep their position inside a group (`0..N_l`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssignment {
    groups: Vec<Vec<usize>>,
    dropped: Vec<BTreeSet<usize>>,
    // user id -> (group, member)
    location: Vec<(usize, usize)>,
}

impl GroupAssignment {
    /// Builds an assignment from explicit groups, which must partition `0..N`.
    pub fn from_groups(groups: Vec<Vec<usize>>) -> Self {
        let n = groups.iter().map(Vec::len).sum();
        let mut location = vec![(usize::MAX, usize::MAX); n];
        for (g, members) in groups.iter().enumerate() {
            for (m, &user) in members.iter().enumerate() {
                assert!(user < n, "user id {user} out of range");
                assert_eq!(location[user].0, usize::MAX, "user {user} assigned twice");
                location[user] = (g, m);
            }
        }
        let dropped = vec![BTreeSet::new(); groups.len()];
        GroupAssignment { groups, dropped, location }
    }

    pub fn num_users(&self) -> usize {
        self.location.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, l: usize) -> &[usize] {
        &self.groups[l]
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// `(group, member)` of a user.
    pub fn locate(&self, user: usize) -> (usize, usize) {
        self.location[user]
    }

    /// Marks the given users as dropped; ids outside `0..N` are ignored.
    pub fn apply_dropouts<'a, I: IntoIterator<Item = &'a usize>>(&mut self, users: I) {
        for &u in users {
            if let Some(&(g, _)) = self.location.get(u) {
                self.dropped[g].insert(u);
            }
        }
    }

    pub fn dropped(&self, l: usize) -> &BTreeSet<usize> {
        &self.dropped[l]
    }

    pub fn is_dropped(&self, user: usize) -> bool {
        let (g, _) = self.location[user];
        self.dropped[g].contains(&user)
    }

    pub fn surviving(&self, l: usize) -> Vec<usize> {
        self.groups[l]
            .iter()
            .copied()
            .filter(|u| !self.dropped[l].contains(u))
            .collect()
    }

    pub fn all_dropped(&self) -> BTreeSet<usize> {
        self.dropped.iter().flatten().copied().collect()
    }
}

/// Sizes for `n` users in `floor(n / group_size)` groups, differing by at most one,
/// larger groups first.
pub fn balanced_sizes(n: usize, group_size: usize) -> Vec<usize> {
    let groups = n / group_size;
    let (base, extra) = (n / groups, n % groups);
    (0..groups).map(|g| base + usize::from(g < extra)).collect()
}

/// Uniform random permutation (Fisher-Yates over the seeded stream) cut into
/// `floor(N / N_g)` groups; leftover users go one each to the leading groups.
pub fn partition(n: usize, group_size: usize, seed: Seed) -> Result<GroupAssignment, GroupingError> {
    if group_size == 0 || n < 2 * group_size {
        return Err(GroupingError::TooFewUsers { n, group_size });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut prg = Prg::new(seed);
    for i in (1..n).rev() {
        let j = prg.below(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    let mut rest = perm.as_slice();
    let groups = balanced_sizes(n, group_size)
        .into_iter()
        .map(|size| {
            let (head, tail) = rest.split_at(size);
            rest = tail;
            head.to_vec()
        })
        .collect();
    Ok(GroupAssignment::from_groups(groups))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_values() {
        assert_eq!(kl_bernoulli(0.5, 0.5).unwrap(), 0.0);
        let expected = 0.5 * 5f64.ln() + 0.5 * (5.0f64 / 9.0).ln();
        let got = kl_bernoulli(0.5, 0.1).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.5108).abs() < 1e-3);
        assert_eq!(kl_bernoulli(0.0, 0.3).unwrap(), (1.0f64 / 0.7).ln());
        assert!(kl_bernoulli(0.5, 0.0).is_err());
        assert!(kl_bernoulli(0.5, 1.0).is_err());
    }

    #[test]
    fn kl_nonnegative() {
        let mut g = Prg::new(Seed(4));
        for _ in 0..1000 {
            let a = g.unit_f64();
            let b = g.unit_f64().clamp(1e-9, 1.0 - 1e-9);
            assert!(kl_bernoulli(a, b).unwrap() >= -1e-15);
        }
    }

    #[test]
    fn group_size_examples() {
        assert_eq!(group_size(200, 0.0, 0.0).unwrap(), 6);
        assert_eq!(group_size(100, 0.1, 0.1).unwrap(), 10);
        assert_eq!(group_size(4, 0.0, 0.0).unwrap(), 2);
        assert!(group_size(100, 0.5, 0.1).is_err());
        assert!(group_size(100, 0.1, 0.5).is_err());
        assert!(group_size(3, 0.1, 0.1).is_err());
        assert_eq!(group_size_with_log(1024, 0.0, 0.0, f64::log2).unwrap(), 10);
    }

    #[test]
    fn group_size_monotone_in_p() {
        // p = 0 uses the ceil(ln N) fallback, so the sweep starts above it
        for n in [16, 100, 1000, 100_000] {
            let mut prev = 0;
            for i in 1..50 {
                let p = i as f64 * 0.0099;
                let s = group_size(n, p, 0.0).unwrap();
                assert!(s >= prev, "N={n} p={p}");
                prev = s;
            }
        }
    }

    #[test]
    fn nine_users_three_groups() {
        let a = partition(9, 3, Seed(1)).unwrap();
        assert_eq!(a.group_sizes(), vec![3, 3, 3]);
        assert_eq!(a, partition(9, 3, Seed(1)).unwrap());
        let mut all: Vec<usize> = a.groups().iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn remainder_rule() {
        assert_eq!(partition(10, 3, Seed(0)).unwrap().group_sizes(), vec![4, 3, 3]);
        assert_eq!(balanced_sizes(14, 5), vec![7, 7]);
        assert!(matches!(partition(5, 3, Seed(0)), Err(GroupingError::TooFewUsers { .. })));
    }

    #[test]
    fn dropouts_split_groups() {
        let mut a = partition(12, 3, Seed(2)).unwrap();
        let victim = a.group(1)[2];
        a.apply_dropouts(&[victim]);
        assert!(a.is_dropped(victim));
        assert_eq!(a.surviving(1).len(), 2);
        assert_eq!(a.dropped(1).len(), 1);
        assert!(a.dropped(0).is_empty());
        assert_eq!(a.locate(victim), (1, 2));
    }

    #[test]
    fn membership_is_uniform() {
        let trials = 10_000;
        let mut counts = vec![[0u32; 4]; 12];
        for s in 0..trials {
            let a = partition(12, 3, Seed(s)).unwrap();
            for u in 0..12 {
                counts[u][a.locate(u).0] += 1;
            }
        }
        for row in counts {
            for c in row {
                let f = c as f64 / trials as f64;
                assert!((f - 0.25).abs() < 0.02, "frequency {f}");
            }
        }
    }
}
