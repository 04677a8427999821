use std::io::Write;

use mpg_core::learning::LearningTrace;

use crate::CliError;

/// One row per iteration and agent: `iteration, agent, batch_return,
/// mean_action, nash_gap`. The gap column is empty on iterations where the
/// gap was not computed.
pub fn write_trace_csv<W: Write>(trace: &LearningTrace, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Input(format!("cannot write trace: {e}"));
    w.write_record(["iteration", "agent", "batch_return", "mean_action", "nash_gap"])
        .map_err(io)?;
    for r in &trace.records {
        for agent in 0..r.batch_returns.len() {
            let gap = r.nash_gap.map(|g| g.to_string()).unwrap_or_default();
            w.write_record([
                r.iteration.to_string(),
                agent.to_string(),
                r.batch_returns[agent].to_string(),
                r.mean_actions[agent].to_string(),
                gap,
            ])
            .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| CliError::Input(format!("cannot write trace: {e}")))
}
