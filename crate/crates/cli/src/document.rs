//! Game and policy documents.
//!
//! A game document is a JSON object:
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "agent_count": 2,
//!   "state_count": 2,
//!   "action_counts": [2, 2],
//!   "discount": 0.9,
//!   "payoffs": [[[...joint...] per state] per agent],
//!   "transitions": [[row per joint] per state],
//!   "state_labels": [...],            optional
//!   "potential": [[...joint...] per state]   optional
//! }
//! ```
//!
//! Joint action `j` encodes `(a_0, ..., a_{n-1})` as `a_0 + c_0 * (a_1 + c_1 * ...)`,
//! so agent 0 varies fastest. A transition row is either a dense array of
//! `state_count` probabilities or `{"sparse": [[next_state, probability], ...]}`.

use std::path::Path;

use mpg_core::equilibrium::DeterministicJointPolicy;
use mpg_core::game::{JointPolicy, Kernel, TabularStochasticGame};
use mpg_core::potential::OneShotPotential;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const FORMAT_VERSION: u64 = 1;

/// Games with more states than this are written with sparse rows.
const DENSE_ROW_LIMIT: usize = 64;

type Result<T> = std::result::Result<T, CliError>;

/// Bytes of a file together with their SHA-256 digest.
#[derive(Debug, Clone)]
pub struct InputFile {
    pub path: String,
    pub text: String,
    pub sha256: String,
}

pub fn read_input(path: &Path) -> Result<InputFile> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|e| CliError::Json(e.to_string()))?;
    Ok(InputFile {
        path: path.display().to_string(),
        text,
        sha256,
    })
}

#[derive(Debug, Clone)]
pub struct LoadedGame {
    pub game: TabularStochasticGame,
    pub potential: Option<OneShotPotential>,
}

pub fn parse_game_file(path: &Path) -> Result<LoadedGame> {
    parse_game_str(&read_input(path)?.text)
}

pub fn parse_game_str(text: &str) -> Result<LoadedGame> {
    let root: Value = serde_json::from_str(text).map_err(|e| CliError::Json(e.to_string()))?;
    parse_game_value(&root)
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| CliError::schema(path, "expected an object"))
}

fn key<'a>(m: &'a Map<String, Value>, name: &str, path: &str) -> Result<&'a Value> {
    m.get(name)
        .ok_or_else(|| CliError::schema(path, format!("missing key `{name}`")))
}

fn child(path: &str, name: &str) -> String {
    if path == "$" {
        name.to_string()
    } else {
        format!("{path}.{name}")
    }
}

fn uint(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| CliError::schema(path, "expected a non-negative integer"))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| CliError::schema(path, "expected a number"))
}

fn array<'a>(v: &'a Value, path: &str, len: Option<usize>) -> Result<&'a [Value]> {
    let items = v
        .as_array()
        .ok_or_else(|| CliError::schema(path, "expected an array"))?;
    if let Some(n) = len {
        if items.len() != n {
            return Err(CliError::schema(
                path,
                format!("expected {n} entries, found {}", items.len()),
            ));
        }
    }
    Ok(items)
}

fn numbers(v: &Value, path: &str, len: usize) -> Result<Vec<f64>> {
    array(v, path, Some(len))?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn format_version(m: &Map<String, Value>) -> Result<()> {
    let v = uint(key(m, "format_version", "$")?, "format_version")?;
    if v as u64 != FORMAT_VERSION {
        return Err(CliError::schema(
            "format_version",
            format!("unsupported version {v}, expected {FORMAT_VERSION}"),
        ));
    }
    Ok(())
}

fn transition_row(v: &Value, path: &str, states: usize) -> Result<Vec<(usize, f64)>> {
    if let Some(m) = v.as_object() {
        let entries = array(key(m, "sparse", path)?, &child(path, "sparse"), None)?;
        return entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let p = format!("{}[{i}]", child(path, "sparse"));
                let pair = array(e, &p, Some(2))?;
                Ok((uint(&pair[0], &format!("{p}[0]"))?, number(&pair[1], &format!("{p}[1]"))?))
            })
            .collect();
    }
    let dense = numbers(v, path, states)?;
    Ok(dense.into_iter().enumerate().filter(|&(_, p)| p != 0.0).collect())
}

pub fn parse_game_value(root: &Value) -> Result<LoadedGame> {
    let m = object(root, "$")?;
    format_version(m)?;
    let agent_count = uint(key(m, "agent_count", "$")?, "agent_count")?;
    let state_count = uint(key(m, "state_count", "$")?, "state_count")?;
    let counts_v = array(key(m, "action_counts", "$")?, "action_counts", Some(agent_count))?;
    let action_counts = counts_v
        .iter()
        .enumerate()
        .map(|(i, c)| uint(c, &format!("action_counts[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let discount = number(key(m, "discount", "$")?, "discount")?;
    let joint_count: usize = action_counts.iter().product();

    let payoffs_v = array(key(m, "payoffs", "$")?, "payoffs", Some(agent_count))?;
    let mut payoffs = Vec::with_capacity(agent_count * state_count * joint_count);
    for (a, per_agent) in payoffs_v.iter().enumerate() {
        let path = format!("payoffs[{a}]");
        for (s, row) in array(per_agent, &path, Some(state_count))?.iter().enumerate() {
            payoffs.extend(numbers(row, &format!("{path}[{s}]"), joint_count)?);
        }
    }

    let trans_v = array(key(m, "transitions", "$")?, "transitions", Some(state_count))?;
    let mut rows = Vec::with_capacity(state_count * joint_count);
    for (s, per_state) in trans_v.iter().enumerate() {
        let path = format!("transitions[{s}]");
        for (j, row) in array(per_state, &path, Some(joint_count))?.iter().enumerate() {
            rows.push(transition_row(row, &format!("{path}[{j}]"), state_count)?);
        }
    }
    let kernel = Kernel::from_fn(state_count, joint_count, |s, j| std::mem::take(&mut rows[s * joint_count + j]));

    let state_labels = match m.get("state_labels") {
        None | Some(Value::Null) => None,
        Some(v) => Some(numbers(v, "state_labels", state_count)?),
    };
    let game = TabularStochasticGame::new(action_counts, state_count, payoffs, kernel, discount, state_labels)?;

    let potential = match m.get("potential") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let mut table = Vec::with_capacity(state_count * joint_count);
            for (s, row) in array(v, "potential", Some(state_count))?.iter().enumerate() {
                table.extend(numbers(row, &format!("potential[{s}]"), joint_count)?);
            }
            Some(OneShotPotential::from_table(&game, table)?)
        }
    };
    Ok(LoadedGame { game, potential })
}

/// Game document for `game`, with `potential` when given.
pub fn game_document(game: &TabularStochasticGame, potential: Option<&OneShotPotential>) -> Value {
    let agents = game.agent_count();
    let states = game.state_count();
    let payoffs: Vec<Vec<Vec<f64>>> = (0..agents)
        .map(|a| (0..states).map(|s| game.payoff_row(a, s).to_vec()).collect())
        .collect();
    let dense = states <= DENSE_ROW_LIMIT;
    let transitions: Vec<Vec<Value>> = (0..states)
        .map(|s| {
            (0..game.joint_count())
                .map(|j| {
                    let row = game.kernel().row(s, j);
                    if dense {
                        let mut full = vec![0.0; states];
                        for &(n, p) in row {
                            full[n] = p;
                        }
                        json!(full)
                    } else {
                        let pairs: Vec<Value> = row.iter().map(|&(n, p)| json!([n, p])).collect();
                        json!({ "sparse": pairs })
                    }
                })
                .collect()
        })
        .collect();
    let mut doc = json!({
        "format_version": FORMAT_VERSION,
        "agent_count": agents,
        "state_count": states,
        "action_counts": game.action_counts(),
        "discount": game.discount(),
        "payoffs": payoffs,
        "transitions": transitions,
    });
    if let Some(labels) = game.state_labels() {
        doc["state_labels"] = json!(labels);
    }
    if let Some(phi) = potential {
        let rows: Vec<Vec<f64>> = (0..states).map(|s| phi.row(s).to_vec()).collect();
        doc["potential"] = json!(rows);
    }
    doc
}

/// Reads a policy document: either
/// `{"format_version": 1, "kind": "deterministic", "choices": [[action per state] per agent]}`
/// or `{"format_version": 1, "kind": "stochastic", "tables": [[[prob per action] per state] per agent]}`.
pub fn parse_policy_str(text: &str, game: &TabularStochasticGame) -> Result<JointPolicy> {
    let root: Value = serde_json::from_str(text).map_err(|e| CliError::Json(e.to_string()))?;
    let m = object(&root, "$")?;
    format_version(m)?;
    let kind = key(m, "kind", "$")?
        .as_str()
        .ok_or_else(|| CliError::schema("kind", "expected a string"))?;
    let agents = game.agent_count();
    let states = game.state_count();
    match kind {
        "deterministic" => {
            let choices_v = array(key(m, "choices", "$")?, "choices", Some(agents))?;
            let mut choices = Vec::with_capacity(agents);
            for (a, table) in choices_v.iter().enumerate() {
                let path = format!("choices[{a}]");
                let row = array(table, &path, Some(states))?
                    .iter()
                    .enumerate()
                    .map(|(s, x)| uint(x, &format!("{path}[{s}]")))
                    .collect::<Result<Vec<_>>>()?;
                choices.push(row);
            }
            Ok(DeterministicJointPolicy::new(game, choices)?.to_joint_policy(game))
        }
        "stochastic" => {
            let tables_v = array(key(m, "tables", "$")?, "tables", Some(agents))?;
            let mut tables = Vec::with_capacity(agents);
            for (a, table) in tables_v.iter().enumerate() {
                let path = format!("tables[{a}]");
                let rows = array(table, &path, Some(states))?
                    .iter()
                    .enumerate()
                    .map(|(s, r)| numbers(r, &format!("{path}[{s}]"), game.action_counts()[a]))
                    .collect::<Result<Vec<_>>>()?;
                tables.push(rows);
            }
            let policy = JointPolicy::new(tables);
            policy.check(game)?;
            Ok(policy)
        }
        other => Err(CliError::schema(
            "kind",
            format!("unknown policy kind `{other}`, expected `deterministic` or `stochastic`"),
        )),
    }
}

pub fn deterministic_policy_document(policy: &DeterministicJointPolicy) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "kind": "deterministic",
        "choices": policy.choices,
    })
}

pub fn stochastic_policy_document(policy: &JointPolicy) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "kind": "stochastic",
        "tables": policy.tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!(
            r#"{{"format_version": 1, "agent_count": 1, "state_count": 1, "action_counts": [1],
                "payoffs": [[[1.0]]], "transitions": [[[1.0]]]{extra}}}"#
        )
    }

    #[test]
    fn minimal_document_parses() {
        let loaded = parse_game_str(&minimal(r#", "discount": 0.5"#)).unwrap();
        assert_eq!(loaded.game.state_count(), 1);
        assert!(loaded.potential.is_none());
    }

    #[test]
    fn missing_discount_is_named() {
        match parse_game_str(&minimal("")) {
            Err(CliError::Schema { message, .. }) => assert!(message.contains("`discount`")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_arity_names_the_path() {
        let text = r#"{"format_version": 1, "agent_count": 1, "state_count": 1, "action_counts": [2],
            "discount": 0.5, "payoffs": [[[1.0]]], "transitions": [[[1.0], [1.0]]]}"#;
        match parse_game_str(text) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "payoffs[0][0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sparse_rows_parse() {
        let text = r#"{"format_version": 1, "agent_count": 1, "state_count": 2, "action_counts": [1],
            "discount": 0.5, "payoffs": [[[0.0], [1.0]]],
            "transitions": [[{"sparse": [[1, 1.0]]}], [[0.5, 0.5]]]}"#;
        let game = parse_game_str(text).unwrap().game;
        assert_eq!(game.kernel().row(0, 0), &[(1, 1.0)]);
        assert_eq!(game.kernel().row(1, 0), &[(0, 0.5), (1, 0.5)]);
    }
}
