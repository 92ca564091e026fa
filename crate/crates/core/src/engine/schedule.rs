use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Destination {
    Group(usize),
    Final,
}

/// Transfers grouped by round; transfers in one round are disjoint and may run
/// concurrently. Group indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    rounds: Vec<Vec<(usize, Destination)>>,
}

impl Schedule {
    /// `1 -> 2 -> ... -> L -> final`.
    pub fn sequential(groups: usize) -> Self {
        let mut rounds: Vec<Vec<(usize, Destination)>> =
            (1..groups).map(|g| vec![(g - 1, Destination::Group(g))]).collect();
        rounds.push(vec![(groups - 1, Destination::Final)]);
        Schedule { rounds }
    }

    /// Recursive-doubling merges into the last group, then the final stage.
    pub fn tree(groups: usize) -> Self {
        let mut rounds: Vec<Vec<(usize, Destination)>> = build_tree_schedule(groups)
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|(src, dst)| (src - 1, Destination::Group(dst - 1)))
                    .collect()
            })
            .collect();
        rounds.push(vec![(groups - 1, Destination::Final)]);
        Schedule { rounds }
    }

    pub fn rounds(&self) -> &[Vec<(usize, Destination)>] {
        &self.rounds
    }

    /// Rounds excluding the final stage.
    pub fn inter_group_rounds(&self) -> usize {
        self.rounds.len() - 1
    }
}

/// Tree merge schedule over groups `1..=L`.
///
/// In round `s` every group `g < L` with `g = 2^(s-1) (mod 2^s)` sends to
/// `min(g + 2^(s-1), L)`. Each group below `L` sends exactly once, only after
/// all of its own inputs have arrived, and every path ends at `L`.
pub fn build_tree_schedule(groups: usize) -> Vec<Vec<(usize, usize)>> {
    if groups < 2 {
        return Vec::new();
    }
    let depth = usize::BITS - (groups - 1).leading_zeros();
    (1..=depth)
        .map(|s| {
            let half = 1usize << (s - 1);
            (half..groups)
                .step_by(2 * half)
                .map(|g| (g, (g + half).min(groups)))
                .collect()
        })
        .collect()
}
