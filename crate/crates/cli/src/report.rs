//! Versioned report documents and their serialisation.
//!
//! Every float is written in scientific notation with 17 significant digits,
//! enough to round-trip any `f64` exactly. Reports carry no timestamp, so
//! reruns with the same inputs produce identical bytes.

use std::io;

use mpg_core::counterexample::{CounterexampleReport, Verdicts};
use mpg_core::equilibrium::NashReport;
use mpg_core::potential::ConditionReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::commands::{AnalysisResult, DualResult, LearnResult};

pub const FORMAT_VERSION: u64 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub checker: f64,
    pub solver: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument<T> {
    pub format_version: u64,
    pub command: String,
    pub toolkit_version: String,
    pub inputs: Vec<InputDigest>,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub tolerances: Tolerances,
    /// Outcome that `--assert` turns into the exit code.
    pub passed: bool,
    pub result: T,
}

impl<T> ReportDocument<T> {
    pub fn new(command: &str, tolerances: Tolerances, parameters: Value, passed: bool, result: T) -> Self {
        ReportDocument {
            format_version: FORMAT_VERSION,
            command: command.to_string(),
            toolkit_version: TOOLKIT_VERSION.to_string(),
            inputs: Vec::new(),
            parameters,
            seed: None,
            tolerances,
            passed,
            result,
        }
    }
}

struct PreciseFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for PreciseFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with full-precision floats and a trailing newline.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("serialising to memory cannot fail");
    out.push(b'\n');
    out
}

fn condition_consistent(c: &ConditionReport) -> bool {
    if c.vacuous {
        return c.passed;
    }
    let structural = c.max_residual <= c.tolerance;
    let subs_ok = c.sub_checks.iter().all(|s| {
        let expected = if s.name == "stochastic_spot_check" {
            !structural || s.max_residual <= c.tolerance
        } else {
            s.max_residual <= c.tolerance
        };
        s.passed == expected
    });
    subs_ok && c.passed == (structural && c.sub_checks.iter().all(|s| s.passed))
}

fn nash_consistent(n: &NashReport) -> bool {
    let max = n.per_agent_gap.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let per_state = n.per_agent_state_gaps.iter().zip(&n.per_agent_gap).all(|(gaps, &g)| {
        gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max) == g
    });
    max == n.max_gap && per_state && n.passed == (n.max_gap <= n.epsilon + n.solver_tolerance)
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T, String> {
    serde_json::from_value(v.clone()).map_err(|e| e.to_string())
}

/// Recomputes every verdict in a parsed report from the numbers it carries
/// and says whether they agree with the recorded ones.
pub fn audit(doc: &ReportDocument<Value>) -> Result<bool, String> {
    match doc.command.as_str() {
        "verify-nash" => {
            let n: NashReport = parse(&doc.result)?;
            Ok(nash_consistent(&n) && doc.passed == n.passed)
        }
        "solve-dual" => {
            let r: DualResult = parse(&doc.result)?;
            Ok(nash_consistent(&r.nash) && doc.passed == r.nash.passed)
        }
        "analyze" => {
            let r: AnalysisResult = parse(&doc.result)?;
            let conditions_ok = r.conditions.iter().all(condition_consistent);
            let found_ok = r.potential_found == (r.potential_residual <= doc.tolerances.checker);
            Ok(conditions_ok && found_ok && doc.passed == r.sufficient_condition_holds())
        }
        "learn" => {
            let r: LearnResult = parse(&doc.result)?;
            let last = r.gaps.last().map(|g| g.1);
            Ok(doc.passed == last.is_some_and(|g| g <= r.epsilon))
        }
        "counterexample" => {
            let r: CounterexampleReport = parse(&doc.result)?;
            let conditions = [
                &r.agent_independent_transitions,
                &r.dummy_terms,
                &r.state_transitivity,
                &r.complete_state_transitivity,
            ];
            let verdicts = Verdicts {
                one_shot_potential: r.potential_residual <= r.settings.checker_tolerance,
                agent_independent_transitions: r.agent_independent_transitions.passed,
                dummy_terms: r.dummy_terms.passed,
                state_transitivity: r.state_transitivity.passed,
                complete_state_transitivity: r.complete_state_transitivity.passed,
                dual_optimum_is_nash: r.dual_nash.passed,
                known_policy_is_nash: r.known_nash.passed,
            };
            Ok(conditions.into_iter().all(condition_consistent)
                && nash_consistent(&r.dual_nash)
                && nash_consistent(&r.known_nash)
                && verdicts == r.verdicts
                && r.matches_expected == (verdicts == Verdicts::EXPECTED)
                && doc.passed == r.matches_expected)
        }
        other => Err(format!("unknown command `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        let values = [0.1, 1.0 / 3.0, -2.0, 9.000000000000007, 1e-300, f64::MIN_POSITIVE];
        let bytes = to_json_bytes(&values);
        let back: Vec<f64> = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, values);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("1.0000000000000001e-1"));
    }
}
