use std::fmt;

use serde::{Deserialize, Serialize};

use super::TabularStochasticGame;
use crate::tolerance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    NoAgents,
    NoStates,
    EmptyActionSet { agent: usize },
    PayoffShape { expected: usize, found: usize },
    PayoffNotFinite { agent: usize, state: usize, joint: usize, value: f64 },
    KernelShape { expected_states: usize, expected_joints: usize, found_states: usize, found_joints: usize },
    TransitionTarget { state: usize, joint: usize, next: usize },
    TransitionEntry { state: usize, joint: usize, next: usize, value: f64 },
    TransitionRowSum { state: usize, joint: usize, sum: f64 },
    Discount { value: f64 },
    StateLabels { expected: usize, found: usize },
    StateLabelNotFinite { state: usize },
}

/// One invariant violation, with the JSON path of the offending entry in
/// the game document layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ViolationKind::*;
        write!(f, "{}: ", self.path)?;
        match &self.kind {
            NoAgents => write!(f, "game has no agents"),
            NoStates => write!(f, "game has no states"),
            EmptyActionSet { agent } => write!(f, "agent {agent} has no actions"),
            PayoffShape { expected, found } => {
                write!(f, "expected {expected} payoff entries, found {found}")
            }
            PayoffNotFinite { value, .. } => write!(f, "payoff {value} is not finite"),
            KernelShape {
                expected_states,
                expected_joints,
                found_states,
                found_joints,
            } => write!(
                f,
                "kernel is {found_states}x{found_joints}, expected {expected_states}x{expected_joints}"
            ),
            TransitionTarget { next, .. } => write!(f, "next state {next} out of range"),
            TransitionEntry { value, .. } => {
                write!(f, "transition probability {value} outside [0, 1]")
            }
            TransitionRowSum { sum, .. } => write!(f, "transition row sums to {sum}, not 1"),
            Discount { value } => write!(f, "discount {value} not in (0, 1)"),
            StateLabels { expected, found } => {
                write!(f, "expected {expected} state labels, found {found}")
            }
            StateLabelNotFinite { .. } => write!(f, "state label is not finite"),
        }
    }
}

/// Every violation found in a game; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: String, kind: ViolationKind) {
        self.violations.push(Violation { path, kind });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of the game and reports all
/// violations. Never fails: violations are data.
pub fn validate_game(game: &TabularStochasticGame) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = game.agent_count();
    let states = game.state_count();
    let joints = game.joint_count();

    if n == 0 {
        report.push("action_counts".into(), ViolationKind::NoAgents);
    }
    if states == 0 {
        report.push("state_count".into(), ViolationKind::NoStates);
    }
    for (agent, &c) in game.action_counts().iter().enumerate() {
        if c == 0 {
            report.push(
                format!("action_counts[{agent}]"),
                ViolationKind::EmptyActionSet { agent },
            );
        }
    }
    if !(game.discount() > 0.0 && game.discount() < 1.0) {
        report.push(
            "discount".into(),
            ViolationKind::Discount {
                value: game.discount(),
            },
        );
    }

    let expected = n * states * joints;
    if game.raw_payoffs().len() != expected {
        report.push(
            "payoffs".into(),
            ViolationKind::PayoffShape {
                expected,
                found: game.raw_payoffs().len(),
            },
        );
    } else {
        for agent in 0..n {
            for s in 0..states {
                for (j, &value) in game.payoff_row(agent, s).iter().enumerate() {
                    if !value.is_finite() {
                        report.push(
                            format!("payoffs[{agent}][{s}][{j}]"),
                            ViolationKind::PayoffNotFinite {
                                agent,
                                state: s,
                                joint: j,
                                value,
                            },
                        );
                    }
                }
            }
        }
    }

    let kernel = game.kernel();
    if kernel.state_count() != states || kernel.decisions() != joints {
        report.push(
            "transitions".into(),
            ViolationKind::KernelShape {
                expected_states: states,
                expected_joints: joints,
                found_states: kernel.state_count(),
                found_joints: kernel.decisions(),
            },
        );
    } else {
        for s in 0..states {
            for j in 0..joints {
                let mut sum = 0.0;
                for &(next, p) in kernel.row(s, j) {
                    if next >= states {
                        report.push(
                            format!("transitions[{s}][{j}][{next}]"),
                            ViolationKind::TransitionTarget {
                                state: s,
                                joint: j,
                                next,
                            },
                        );
                    }
                    if !(0.0..=1.0).contains(&p) {
                        report.push(
                            format!("transitions[{s}][{j}][{next}]"),
                            ViolationKind::TransitionEntry {
                                state: s,
                                joint: j,
                                next,
                                value: p,
                            },
                        );
                    }
                    sum += p;
                }
                if !((sum - 1.0).abs() <= tolerance::STRUCTURAL) {
                    report.push(
                        format!("transitions[{s}][{j}]"),
                        ViolationKind::TransitionRowSum {
                            state: s,
                            joint: j,
                            sum,
                        },
                    );
                }
            }
        }
    }

    if let Some(labels) = game.state_labels() {
        if labels.len() != states {
            report.push(
                "state_labels".into(),
                ViolationKind::StateLabels {
                    expected: states,
                    found: labels.len(),
                },
            );
        }
        for (s, l) in labels.iter().enumerate() {
            if !l.is_finite() {
                report.push(
                    format!("state_labels[{s}]"),
                    ViolationKind::StateLabelNotFinite { state: s },
                );
            }
        }
    }
    report
}
