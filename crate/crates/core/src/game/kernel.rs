use serde::{Deserialize, Serialize};

/// Row-sparse transition kernel.
///
/// Row `r` holds the next-state distribution of one (state, decision) pair,
/// `r = state * decisions + decision`. Only non-zero entries are stored, so
/// deterministic kernels over large joint-action spaces stay small.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    state_count: usize,
    decisions: usize,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl Kernel {
    /// Builds a kernel by asking `row` for the entries of every
    /// (state, decision) pair in order. Zero probabilities are dropped.
    pub fn from_fn<F, I>(state_count: usize, decisions: usize, mut row: F) -> Self
    where
        F: FnMut(usize, usize) -> I,
        I: IntoIterator<Item = (usize, f64)>,
    {
        let rows = state_count * decisions;
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut entries = Vec::with_capacity(rows);
        offsets.push(0);
        for s in 0..state_count {
            for d in 0..decisions {
                let start = entries.len();
                for (next, p) in row(s, d) {
                    if p != 0.0 {
                        entries.push((next, p));
                    }
                }
                entries[start..].sort_by_key(|&(next, _)| next);
                coalesce(&mut entries, start);
                offsets.push(entries.len());
            }
        }
        Kernel {
            state_count,
            decisions,
            offsets,
            entries,
        }
    }

    /// Builds from dense rows `dense[state][decision][next]`.
    pub fn from_dense(dense: &[Vec<Vec<f64>>]) -> Self {
        let decisions = dense.first().map_or(0, |d| d.len());
        Kernel::from_fn(dense.len(), decisions, |s, d| {
            dense[s][d]
                .iter()
                .copied()
                .enumerate()
                .collect::<Vec<_>>()
        })
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn decisions(&self) -> usize {
        self.decisions
    }

    /// Non-zero `(next_state, probability)` pairs for `(state, decision)`,
    /// ordered by next state.
    #[inline]
    pub fn row(&self, state: usize, decision: usize) -> &[(usize, f64)] {
        let r = state * self.decisions + decision;
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }

    pub fn probability(&self, state: usize, decision: usize, next: usize) -> f64 {
        let row = self.row(state, decision);
        row.binary_search_by_key(&next, |&(n, _)| n)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.state_count)
            .map(|s| {
                (0..self.decisions)
                    .map(|d| {
                        let mut dense = vec![0.0; self.state_count];
                        for &(next, p) in self.row(s, d) {
                            if next < self.state_count {
                                dense[next] = p;
                            }
                        }
                        dense
                    })
                    .collect()
            })
            .collect()
    }
}

fn coalesce(entries: &mut Vec<(usize, f64)>, start: usize) {
    let mut write = start;
    for read in start..entries.len() {
        if write > start && entries[write - 1].0 == entries[read].0 {
            entries[write - 1].1 += entries[read].1;
        } else {
            entries[write] = entries[read];
            write += 1;
        }
    }
    entries.truncate(write);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_drops_zeros() {
        let dense = vec![
            vec![vec![0.25, 0.75], vec![1.0, 0.0]],
            vec![vec![0.0, 1.0], vec![0.5, 0.5]],
        ];
        let kernel = Kernel::from_dense(&dense);
        assert_eq!(kernel.row(0, 1), &[(0, 1.0)]);
        assert_eq!(kernel.probability(1, 0, 0), 0.0);
        assert_eq!(kernel.to_dense(), dense);
    }

    #[test]
    fn duplicate_targets_are_merged() {
        let kernel = Kernel::from_fn(2, 1, |_, _| vec![(1, 0.5), (0, 0.25), (1, 0.25)]);
        assert_eq!(kernel.row(0, 0), &[(0, 0.25), (1, 0.75)]);
    }
}
