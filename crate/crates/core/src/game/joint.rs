use serde::{Deserialize, Serialize};

/// Mixed-radix index law for joint actions.
///
/// A joint action `(a_0, .., a_{n-1})` is stored at flat index
/// `a_0 + c_0 * (a_1 + c_1 * (a_2 + ..))` where `c_i` is agent `i`'s action
/// count, so agent 0 varies fastest. The condition checkers, the solvers and
/// the on-disk formats all share this law.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointActionSpace {
    counts: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl JointActionSpace {
    pub fn new(counts: Vec<usize>) -> Self {
        let mut strides = Vec::with_capacity(counts.len());
        let mut size = 1usize;
        for &c in &counts {
            strides.push(size);
            size = size.saturating_mul(c);
        }
        JointActionSpace {
            counts,
            strides,
            size,
        }
    }

    pub fn agent_count(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn action_count(&self, agent: usize) -> usize {
        self.counts[agent]
    }

    pub fn stride(&self, agent: usize) -> usize {
        self.strides[agent]
    }

    /// Number of joint actions, `prod_i c_i`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.counts.len());
        actions
            .iter()
            .zip(&self.strides)
            .map(|(&a, &stride)| a * stride)
            .sum()
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        let mut rest = joint;
        self.counts
            .iter()
            .map(|&c| {
                let a = rest % c;
                rest /= c;
                a
            })
            .collect()
    }

    /// Action of `agent` inside flat joint index `joint`.
    #[inline]
    pub fn own_action(&self, joint: usize, agent: usize) -> usize {
        (joint / self.strides[agent]) % self.counts[agent]
    }

    /// `joint` with `agent`'s action replaced by `action`.
    #[inline]
    pub fn with_action(&self, joint: usize, agent: usize, action: usize) -> usize {
        let current = self.own_action(joint, agent);
        joint - current * self.strides[agent] + action * self.strides[agent]
    }
}
