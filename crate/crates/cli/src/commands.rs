use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mpg_core::counterexample::{
    discretize, known_policies, reproduce_report_with, CounterexampleReport, DiscretizationConfig,
    ReportSettings,
};
use mpg_core::equilibrium::{
    build_dual_mdp, extract_joint_policy, value_iteration, verify_nash, DeterministicJointPolicy,
    NashReport, DEFAULT_MAX_ITERATIONS,
};
use mpg_core::game::{JointPolicy, TabularStochasticGame};
use mpg_core::learning::{run_psga, LearnerConfig, LearningTrace};
use mpg_core::potential::{
    calibrate_state_offsets, check_agent_independent_transitions, check_complete_state_transitivity,
    check_dummy_terms, check_state_transitivity, find_one_shot_potential, ConditionReport, CstSpotCheck,
    DeviationCycle, DummyTermProbe, OneShotPotential,
};
use mpg_core::tolerance;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::document::{
    deterministic_policy_document, game_document, parse_game_str, parse_policy_str, read_input, LoadedGame,
};
use crate::report::{to_json_bytes, InputDigest, ReportDocument, Tolerances};
use crate::trace::write_trace_csv;
use crate::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ASSERTION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mpg", version, about = "Potential-game analysis for tabular stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Solver tolerance for policy evaluation and value iteration.
    #[arg(long, default_value_t = tolerance::SOLVER)]
    tolerance: f64,
    /// Tolerance for the potential and condition checkers.
    #[arg(long, default_value_t = tolerance::CHECKER)]
    checker_tolerance: f64,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 when the command's check fails.
    #[arg(long)]
    assert: bool,
    /// Seed for every random draw the command makes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find or verify a one-shot potential and run the four condition checks.
    Analyze {
        /// Game document (JSON).
        game: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Solve the dual MDP and check its greedy policy for a Nash equilibrium.
    SolveDual {
        /// Game document with a potential, or one whose potential can be recovered.
        game: PathBuf,
        /// Nash tolerance for the greedy dual policy.
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Check a joint policy for an epsilon-Nash equilibrium.
    VerifyNash {
        /// Game document (JSON).
        game: PathBuf,
        /// Deterministic or stochastic policy document (JSON).
        policy: PathBuf,
        /// Largest best-response improvement tolerated at any state.
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run independent projected stochastic gradient ascent and write a CSV trace.
    Learn {
        /// Game document (JSON).
        game: PathBuf,
        /// Step size.
        #[arg(long)]
        eta: f64,
        /// Trajectory length T per update.
        #[arg(long, default_value_t = 8)]
        batch: usize,
        /// Number of updates.
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        /// Log the Nash gap after every this many updates; 0 disables it.
        #[arg(long, default_value_t = 100)]
        gap_every: usize,
        /// `--assert` passes when the last logged gap is at most this.
        #[arg(long, default_value_t = 1e-2)]
        epsilon: f64,
        /// Also write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild the two-agent grid counterexample and report every verdict.
    Counterexample {
        /// Number of grid points on [0, 1].
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Discount factor.
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        /// Run the learner on the grid game and write its CSV trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Learner updates when `--trace-out` is given.
        #[arg(long, default_value_t = 2000)]
        learn_iters: usize,
        /// Learner step size.
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        /// Learner trajectory length.
        #[arg(long, default_value_t = 8)]
        batch: usize,
        /// Learner gap logging stride.
        #[arg(long, default_value_t = 100)]
        gap_every: usize,
        /// Write game.json, dual_policy.json and nash_policy.json here.
        #[arg(long)]
        export_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub potential_found: bool,
    /// `document` when the game file supplied the potential, else `constructed`.
    pub potential_source: String,
    pub potential_residual: f64,
    pub cycle: Option<DeviationCycle>,
    /// Per-state shifts that calibration added to the potential.
    pub calibration_offsets: Vec<f64>,
    pub potential: Option<Vec<Vec<f64>>>,
    pub conditions: Vec<ConditionReport>,
}

impl AnalysisResult {
    /// A potential exists and one of the conditions known to make the dual
    /// optimum an equilibrium (agent-independent transitions, dummy terms,
    /// complete state transitivity) holds.
    pub fn sufficient_condition_holds(&self) -> bool {
        use mpg_core::potential::ConditionId::*;
        self.potential_found
            && self.conditions.iter().any(|c| {
                c.passed
                    && matches!(
                        c.condition,
                        AgentIndependent | DummyTerms | CompleteStateTransitivity
                    )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualResult {
    pub potential_source: String,
    pub values: Vec<f64>,
    pub decisions: Vec<usize>,
    pub policy: DeterministicJointPolicy,
    pub iterations: usize,
    pub tied_states: Vec<usize>,
    pub nash: NashReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub config: LearnerConfig,
    pub epsilon: f64,
    /// `(iteration, nash_gap)` for every logged update.
    pub gaps: Vec<(usize, f64)>,
    pub final_policy: JointPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub expected: bool,
    /// Status this check alone would give under `--assert`.
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningSummary {
    pub iterations: usize,
    pub learning_rate: f64,
    pub batch_length: usize,
    pub seed: u64,
    pub logged_gaps: usize,
    pub min_gap: Option<f64>,
    pub final_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleResult {
    #[serde(flatten)]
    pub report: CounterexampleReport,
    pub checks: Vec<CheckOutcome>,
    pub learning: Option<LearningSummary>,
}

struct Ctx<'a> {
    stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
        match path {
            Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Write {
                path: p.to_path_buf(),
                source,
            }),
            None => self.stdout.write_all(bytes).map_err(|source| CliError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            }),
        }
    }
}

fn tolerances(common: &Common) -> Result<Tolerances, CliError> {
    for (name, v) in [("--tolerance", common.tolerance), ("--checker-tolerance", common.checker_tolerance)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Usage(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(Tolerances {
        checker: common.checker_tolerance,
        solver: common.tolerance,
    })
}

fn load_game(path: &Path) -> Result<(LoadedGame, InputDigest), CliError> {
    let input = read_input(path)?;
    let loaded = parse_game_str(&input.text)?;
    Ok((
        loaded,
        InputDigest {
            role: "game".into(),
            path: input.path,
            sha256: input.sha256,
        },
    ))
}

/// The supplied potential if it verifies, otherwise a constructed one.
fn resolve_potential(
    loaded: &LoadedGame,
    tol: f64,
) -> (Option<OneShotPotential>, &'static str, f64, Option<DeviationCycle>) {
    if let Some(p) = &loaded.potential {
        let r = p.verification_residual();
        return (
            (r <= tol).then(|| p.clone()),
            "document",
            r,
            None,
        );
    }
    match find_one_shot_potential(&loaded.game, tol) {
        Ok(p) => {
            let r = p.verification_residual();
            (Some(p), "constructed", r, None)
        }
        Err(e) => (None, "constructed", e.residual, e.cycle),
    }
}

fn finish(assert: bool, passed: bool) -> i32 {
    if assert && !passed {
        EXIT_ASSERTION
    } else {
        EXIT_OK
    }
}

fn analyze(ctx: &mut Ctx, game_path: &Path, common: &Common) -> Result<i32, CliError> {
    let tol = tolerances(common)?;
    let (loaded, digest) = load_game(game_path)?;
    let game = &loaded.game;
    let (potential, source, residual, cycle) = resolve_potential(&loaded, tol.checker);
    let mut result = AnalysisResult {
        potential_found: potential.is_some(),
        potential_source: source.into(),
        potential_residual: residual,
        cycle,
        calibration_offsets: Vec::new(),
        potential: None,
        conditions: Vec::new(),
    };
    if let Some(p) = potential {
        let calibrated = calibrate_state_offsets(game, &p)?;
        result.calibration_offsets = (0..game.state_count())
            .map(|s| calibrated.value(s, 0) - p.value(s, 0))
            .collect();
        let probe = DummyTermProbe {
            seed: common.seed,
            ..DummyTermProbe::default()
        };
        let spot = CstSpotCheck {
            seed: common.seed,
            ..CstSpotCheck::default()
        };
        result.conditions = vec![
            check_agent_independent_transitions(game, tol.checker),
            check_dummy_terms(game, &calibrated, &probe, tol.checker)?,
            check_state_transitivity(game, &calibrated, tol.checker)?,
            check_complete_state_transitivity(game, &calibrated, &spot, tol.checker)?,
        ];
        result.potential = Some((0..game.state_count()).map(|s| calibrated.row(s).to_vec()).collect());
    }
    let passed = result.sufficient_condition_holds();
    let mut doc = ReportDocument::new("analyze", tol, json!({}), passed, result);
    doc.inputs.push(digest);
    doc.seed = Some(common.seed);
    ctx.emit(common.out.as_deref(), &to_json_bytes(&doc))?;
    Ok(finish(common.assert, passed))
}

fn solve_dual(ctx: &mut Ctx, game_path: &Path, epsilon: f64, common: &Common) -> Result<i32, CliError> {
    let tol = tolerances(common)?;
    let (loaded, digest) = load_game(game_path)?;
    let game = &loaded.game;
    let (potential, source, residual, _) = resolve_potential(&loaded, tol.checker);
    let potential = potential.ok_or_else(|| {
        CliError::Input(format!(
            "game has no one-shot potential (residual {residual:e}), so there is no dual MDP"
        ))
    })?;
    let potential = calibrate_state_offsets(game, &potential)?;
    let mdp = build_dual_mdp(game, &potential)?;
    let solution = value_iteration(&mdp, tol.solver, DEFAULT_MAX_ITERATIONS)?;
    let policy = extract_joint_policy(&solution.decisions, game)?;
    let nash = verify_nash(game, &policy.to_joint_policy(game), epsilon, tol.solver)?;
    let passed = nash.passed;
    let result = DualResult {
        potential_source: source.into(),
        values: solution.value.values,
        decisions: solution.decisions,
        policy,
        iterations: solution.iterations,
        tied_states: solution.tied_states,
        nash,
    };
    let mut doc = ReportDocument::new("solve-dual", tol, json!({ "epsilon": epsilon }), passed, result);
    doc.inputs.push(digest);
    ctx.emit(common.out.as_deref(), &to_json_bytes(&doc))?;
    Ok(finish(common.assert, passed))
}

fn verify(ctx: &mut Ctx, game_path: &Path, policy_path: &Path, epsilon: f64, common: &Common) -> Result<i32, CliError> {
    let tol = tolerances(common)?;
    if !(epsilon >= 0.0) {
        return Err(CliError::Usage(format!("--epsilon must be non-negative, got {epsilon}")));
    }
    let (loaded, digest) = load_game(game_path)?;
    let policy_input = read_input(policy_path)?;
    let policy = parse_policy_str(&policy_input.text, &loaded.game)?;
    let report = verify_nash(&loaded.game, &policy, epsilon, tol.solver)?;
    let passed = report.passed;
    let mut doc = ReportDocument::new("verify-nash", tol, json!({ "epsilon": epsilon }), passed, report);
    doc.inputs.push(digest);
    doc.inputs.push(InputDigest {
        role: "policy".into(),
        path: policy_input.path,
        sha256: policy_input.sha256,
    });
    ctx.emit(common.out.as_deref(), &to_json_bytes(&doc))?;
    Ok(finish(common.assert, passed))
}

fn learner_config(eta: f64, batch: usize, iters: usize, gap_every: usize, seed: u64, solver: f64) -> Result<LearnerConfig, CliError> {
    if !(eta >= 0.0 && eta.is_finite()) || batch == 0 || iters == 0 {
        return Err(CliError::Usage(
            "--eta must be non-negative and --batch, --iters at least 1".into(),
        ));
    }
    Ok(LearnerConfig {
        learning_rate: eta,
        batch_length: batch,
        iterations: iters,
        seed,
        gap_check_every: gap_every,
        solver_tolerance: solver,
        ..LearnerConfig::default()
    })
}

fn trace_bytes(trace: &LearningTrace) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf)?;
    Ok(buf)
}

#[allow(clippy::too_many_arguments)]
fn learn(
    ctx: &mut Ctx,
    game_path: &Path,
    eta: f64,
    batch: usize,
    iters: usize,
    gap_every: usize,
    epsilon: f64,
    report: Option<&Path>,
    common: &Common,
) -> Result<i32, CliError> {
    let tol = tolerances(common)?;
    let (loaded, digest) = load_game(game_path)?;
    let config = learner_config(eta, batch, iters, gap_every, common.seed, tol.solver)?;
    let trace = run_psga(&loaded.game, &config)?;
    ctx.emit(common.out.as_deref(), &trace_bytes(&trace)?)?;
    let gaps: Vec<(usize, f64)> = trace.gaps().collect();
    let passed = gaps.last().is_some_and(|g| g.1 <= epsilon);
    if let Some(path) = report {
        let result = LearnResult {
            config,
            epsilon,
            gaps,
            final_policy: trace.final_policy,
        };
        let mut doc = ReportDocument::new("learn", tol, json!({ "epsilon": epsilon }), passed, result);
        doc.inputs.push(digest);
        doc.seed = Some(common.seed);
        ctx.emit(Some(path), &to_json_bytes(&doc))?;
    }
    Ok(finish(common.assert, passed))
}

fn check(name: &str, passed: bool, expected: bool) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        passed,
        expected,
        exit_code: if passed { EXIT_OK } else { EXIT_ASSERTION },
    }
}

#[allow(clippy::too_many_arguments)]
fn counterexample(
    ctx: &mut Ctx,
    grid: usize,
    gamma: f64,
    trace_out: Option<&Path>,
    learn_iters: usize,
    eta: f64,
    batch: usize,
    gap_every: usize,
    export_dir: Option<&Path>,
    common: &Common,
) -> Result<i32, CliError> {
    let tol = tolerances(common)?;
    let config = DiscretizationConfig {
        grid_size: grid,
        discount: gamma,
    };
    config.check().map_err(|e| CliError::Usage(e.to_string()))?;
    let settings = ReportSettings {
        checker_tolerance: tol.checker,
        solver_tolerance: tol.solver,
        ..ReportSettings::default()
    };
    let report = reproduce_report_with(&config, &settings)?;
    let v = &report.verdicts;
    let e = mpg_core::counterexample::Verdicts::EXPECTED;
    let checks = vec![
        check("one_shot_potential", v.one_shot_potential, e.one_shot_potential),
        check("agent_independent_transitions", v.agent_independent_transitions, e.agent_independent_transitions),
        check("dummy_terms", v.dummy_terms, e.dummy_terms),
        check("state_transitivity", v.state_transitivity, e.state_transitivity),
        check("complete_state_transitivity", v.complete_state_transitivity, e.complete_state_transitivity),
        check("dual_optimum_nash", v.dual_optimum_is_nash, e.dual_optimum_is_nash),
        check("known_policy_nash", v.known_policy_is_nash, e.known_policy_is_nash),
    ];

    let (game, closed) = if trace_out.is_some() || export_dir.is_some() {
        let (g, p) = discretize(&config)?;
        (Some(g), Some(p))
    } else {
        (None, None)
    };
    let mut learning = None;
    if let (Some(path), Some(game)) = (trace_out, &game) {
        let lc = learner_config(eta, batch, learn_iters, gap_every, common.seed, tol.solver)?;
        let trace = run_psga(game, &lc)?;
        ctx.emit(Some(path), &trace_bytes(&trace)?)?;
        let gaps: Vec<f64> = trace.gaps().map(|g| g.1).collect();
        learning = Some(LearningSummary {
            iterations: learn_iters,
            learning_rate: eta,
            batch_length: batch,
            seed: common.seed,
            logged_gaps: gaps.len(),
            min_gap: gaps.iter().copied().reduce(f64::min),
            final_gap: gaps.last().copied(),
        });
    }
    if let (Some(dir), Some(game), Some(closed)) = (export_dir, &game, &closed) {
        write_exports(ctx, dir, game, closed, &config)?;
    }

    let passed = report.matches_expected;
    let result = CounterexampleResult {
        report,
        checks,
        learning,
    };
    let params = json!({
        "grid": grid,
        "gamma": gamma,
        "learn_iters": learn_iters,
        "eta": eta,
        "batch": batch,
        "gap_every": gap_every,
        "trace": trace_out.is_some(),
    });
    let mut doc = ReportDocument::new("counterexample", tol, params, passed, result);
    doc.seed = Some(common.seed);
    ctx.emit(common.out.as_deref(), &to_json_bytes(&doc))?;
    Ok(finish(common.assert, passed))
}

fn write_exports(
    ctx: &mut Ctx,
    dir: &Path,
    game: &TabularStochasticGame,
    potential: &OneShotPotential,
    config: &DiscretizationConfig,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let (dual, nash) = known_policies(config)?;
    ctx.emit(Some(&dir.join("game.json")), &to_json_bytes(&game_document(game, Some(potential))))?;
    ctx.emit(Some(&dir.join("dual_policy.json")), &to_json_bytes(&deterministic_policy_document(&dual)))?;
    ctx.emit(Some(&dir.join("nash_policy.json")), &to_json_bytes(&deterministic_policy_document(&nash)))?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit status: 0 success, 1 usage error, 2 input or validation
/// error, 3 failed assertion, 4 solver non-convergence.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut ctx = Ctx { stdout };
    let outcome = match &cli.command {
        Command::Analyze { game, common } => analyze(&mut ctx, game, common),
        Command::SolveDual { game, epsilon, common } => solve_dual(&mut ctx, game, *epsilon, common),
        Command::VerifyNash {
            game,
            policy,
            epsilon,
            common,
        } => verify(&mut ctx, game, policy, *epsilon, common),
        Command::Learn {
            game,
            eta,
            batch,
            iters,
            gap_every,
            epsilon,
            report,
            common,
        } => learn(&mut ctx, game, *eta, *batch, *iters, *gap_every, *epsilon, report.as_deref(), common),
        Command::Counterexample {
            grid,
            gamma,
            trace_out,
            learn_iters,
            eta,
            batch,
            gap_every,
            export_dir,
            common,
        } => counterexample(
            &mut ctx,
            *grid,
            *gamma,
            trace_out.as_deref(),
            *learn_iters,
            *eta,
            *batch,
            *gap_every,
            export_dir.as_deref(),
            common,
        ),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if let CliError::Validation(report) = &e {
                for v in &report.violations {
                    let _ = writeln!(stderr, "  {v}");
                }
            }
            e.exit_code()
        }
    }
}
