use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde_json::json;

use facs::corpus::{self, SystemParams};
use facs::cycleanalysis::{compose_cycle, infinitely_iterable, translation_vectors};
use facs::exactmat::{monoid_of, MonoidVerdict, DEFAULT_MONOID_CAP};
use facs::format::{parse_configuration, parse_system, system_to_json, ConfigurationDoc, Num};
use facs::logic::{self, LogicError, McOptions, McOutcome, Universal};
use facs::oracle::{bfs_reach, replay_witness, BfsVerdict, Budgets, OracleError, ReplayOutcome};
use facs::qbfgen::{self, build_reduction, parse_qbf};
use facs::solver::{self, ReachOutcome, RunWitness, SolverError, SolverOptions};
use facs::system::{
    canonical_rotation, Configuration, CounterSystem, Flatness, MonoidReport, RuleId, StateId,
    SystemError,
};

// A closed pipe (`facs ... | head`) must not turn a verdict into a panic.
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

const HOLDS: u8 = 0;
const FAILS: u8 = 1;
const INPUT: u8 = 2;
const INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "facs",
    version,
    about = "Reachability and model checking for flat affine counter systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check flatness and the finite monoid property, per cycle.
    Validate { system: PathBuf },
    /// Dump the power monoid of one cycle.
    Monoid {
        system: PathBuf,
        /// A state on the cycle, or a comma-separated list of its rules.
        #[arg(long)]
        cycle: String,
    },
    /// Decide whether a control state is reachable.
    Reach {
        system: PathBuf,
        #[arg(long)]
        init: String,
        #[arg(long)]
        target: String,
    },
    /// Model check a PLTL or FO formula.
    Mc(McArgs),
    /// Build the reachability instance of an ∃*∀* QBF given in QDIMACS-like text.
    GenQbf {
        /// Input file, or - for stdin.
        input: PathBuf,
        /// Also decide the instance and compare with brute-force validity.
        #[arg(long)]
        solve: bool,
    },
    /// Brute-force reference checks.
    Oracle {
        #[command(subcommand)]
        command: OracleCmd,
    },
    /// Random solver-versus-oracle agreement run.
    Bench {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("formula").required(true))]
struct McArgs {
    system: PathBuf,
    #[arg(long)]
    init: String,
    #[arg(long, group = "formula")]
    pltl: Option<String>,
    #[arg(long, group = "formula")]
    fo: Option<String>,
    /// Check that every run satisfies the formula instead of some run.
    #[arg(long)]
    all: bool,
    /// Add a sink state reachable from everywhere before checking.
    #[arg(long)]
    complete: bool,
    /// Largest stuttering threshold to attempt.
    #[arg(long, default_value_t = 256)]
    max_threshold: u64,
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Bounded breadth-first search; inconclusive when exhausted.
    Bfs {
        system: PathBuf,
        #[arg(long)]
        init: String,
        #[arg(long)]
        target: String,
        /// Defaults to FACS_BUDGET_STEPS, then 64.
        #[arg(long)]
        steps: Option<usize>,
        /// Defaults to FACS_BUDGET_VALUES, then 64.
        #[arg(long)]
        values: Option<u64>,
    },
    /// Replay a witness step by step with every guard checked.
    Replay {
        system: PathBuf,
        #[arg(long)]
        init: String,
        witness: PathBuf,
        /// Terminal cycle iterations to simulate.
        #[arg(long, default_value_t = 3)]
        iterations: usize,
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: usize,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn input(msg: impl std::fmt::Display) -> Self {
        Failure {
            code: INPUT,
            msg: msg.to_string(),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let code = match e {
            SolverError::Inconclusive(_) | SolverError::Budget(_) => INCONCLUSIVE,
            _ => INPUT,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<LogicError> for Failure {
    fn from(e: LogicError) -> Self {
        match e {
            LogicError::Solver(e) => e.into(),
            LogicError::Budget(_) => Failure {
                code: INCONCLUSIVE,
                msg: e.to_string(),
            },
            e => Failure::input(e),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(Failure::input)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<CounterSystem, Failure> {
    parse_system(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn config(s: &CounterSystem, text: &str) -> Result<Configuration, Failure> {
    parse_configuration(s, text).map_err(Failure::input)
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn names(s: &CounterSystem, rules: &[RuleId]) -> String {
    s.rule_names(rules).join(" ")
}

fn validate(path: &Path) -> Outcome {
    let s = load(path)?;
    out!(
        "states: {}, rules: {}, counters: {}",
        s.states().len(),
        s.rules().len(),
        s.dimension()
    );
    if let Flatness::NotFlat(w) = s.check_flat() {
        out!("NOT_FLAT: {w}");
        return Ok(INPUT);
    }
    out!("flat: yes");
    out!(
        "completed: {}",
        if s.is_deadlock_free_completed() {
            "yes"
        } else {
            "no"
        }
    );
    match s
        .check_finite_monoid(DEFAULT_MONOID_CAP)
        .map_err(Failure::input)?
    {
        MonoidReport::Finite(cycles) => {
            for c in &cycles {
                out!(
                    "cycle [{}]: alpha {} beta {}",
                    names(&s, &c.cycle),
                    c.info.index,
                    c.info.period
                );
            }
            out!("finite monoid: yes");
            Ok(HOLDS)
        }
        MonoidReport::NotFinite { cycle, verdict } => match verdict {
            MonoidVerdict::Capped { iterations } => {
                out!(
                    "cycle [{}]: undecided after {iterations} powers",
                    names(&s, &cycle)
                );
                Ok(INCONCLUSIVE)
            }
            MonoidVerdict::Infinite { power, reason } => {
                out!(
                    "cycle [{}]: power {power} breaks the bounds ({reason:?})",
                    names(&s, &cycle)
                );
                out!("finite monoid: no");
                Ok(FAILS)
            }
            MonoidVerdict::Finite(_) => unreachable!("reported as not finite"),
        },
    }
}

fn pick_cycle(s: &CounterSystem, spec: &str) -> Result<Vec<RuleId>, Failure> {
    if let Ok(q) = s.state_by_name(spec) {
        let table = s.cycle_table().map_err(Failure::input)?;
        return table
            .at(q)
            .map(canonical_rotation)
            .ok_or_else(|| Failure::input(format!("state {spec} is on no cycle")));
    }
    let rules = spec
        .split(',')
        .map(|r| s.rule_by_name(r.trim()))
        .collect::<Result<Vec<_>, SystemError>>()
        .map_err(Failure::input)?;
    for (i, &r) in rules.iter().enumerate() {
        let next = rules[(i + 1) % rules.len()];
        if s.rule(r).target != s.rule(next).source {
            return Err(Failure::input(format!(
                "rules [{spec}] do not form a cycle"
            )));
        }
    }
    Ok(rules)
}

fn monoid(path: &Path, spec: &str) -> Outcome {
    let s = load(path)?;
    let cycle = pick_cycle(&s, spec)?;
    let cu = compose_cycle(&s, &cycle).map_err(Failure::input)?;
    let verdict = monoid_of(&cu.matrix, DEFAULT_MONOID_CAP).map_err(Failure::input)?;
    let info = match verdict {
        MonoidVerdict::Finite(info) => info,
        MonoidVerdict::Infinite { power, reason } => {
            out!(
                "{}",
                pretty(
                    &json!({"cycle": s.rule_names(&cycle), "finite": false, "power": power, "reason": format!("{reason:?}")})
                )
            );
            return Ok(FAILS);
        }
        MonoidVerdict::Capped { iterations } => {
            out!(
                "{}",
                pretty(
                    &json!({"cycle": s.rule_names(&cycle), "finite": null, "iterations": iterations})
                )
            );
            return Ok(INCONCLUSIVE);
        }
    };
    let tv = translation_vectors(&cu, &info);
    let strs = |v: &[num_bigint::BigInt]| v.iter().map(|x| Num(x.clone())).collect::<Vec<_>>();
    let report = json!({
        "cycle": s.rule_names(&cycle),
        "finite": true,
        "alpha": info.index,
        "beta": info.period,
        "size": info.len(),
        "matrix": cu.matrix.to_rows().iter().map(|r| strs(r)).collect::<Vec<_>>(),
        "offset": strs(&cu.offset),
        "powers": info.powers.iter().map(|m| m.to_rows().iter().map(|r| strs(r)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "translation": tv.w.iter().map(|w| strs(w)).collect::<Vec<_>>(),
        "infinitely_iterable_guards": infinitely_iterable(&cu, &tv),
    });
    out!("{}", pretty(&report));
    Ok(HOLDS)
}

fn completed(s: CounterSystem) -> CounterSystem {
    if s.is_deadlock_free_completed() {
        return s;
    }
    let done = s.complete_deadlock_free();
    let sink = &done.states()[done.states().len() - 1].name;
    eprintln!("note: added sink state {sink} to make the system deadlock-free");
    done
}

fn witness_json(s: &CounterSystem, w: &RunWitness) -> serde_json::Value {
    let mut v = w.to_json(s);
    if let Some(c) = &w.certificate {
        v["certificate"] = json!(c.to_string());
    }
    v
}

fn reach(path: &Path, init: &str, target: &str) -> Outcome {
    let s = completed(load(path)?);
    let init = config(&s, init)?;
    let t = s.state_by_name(target).map_err(Failure::input)?;
    match solver::reach(&s, &init, t, SolverOptions::default())? {
        ReachOutcome::Reachable(w) => {
            out!("REACHABLE {target}");
            out!("{}", pretty(&witness_json(&s, &w)));
            Ok(HOLDS)
        }
        ReachOutcome::Unreachable => {
            out!("UNREACHABLE {target}");
            Ok(FAILS)
        }
    }
}

fn mc(a: &McArgs) -> Outcome {
    let mut s = load(&a.system)?;
    if a.complete {
        s = s.complete_deadlock_free();
    }
    let init = config(&s, &a.init)?;
    let opts = McOptions {
        max_threshold: a.max_threshold,
        ..McOptions::default()
    };
    enum Res {
        Exists(McOutcome),
        All(Universal),
    }
    let res = match (&a.pltl, &a.fo) {
        (Some(f), _) => {
            let phi = logic::parse_pltl(f)?;
            if a.all {
                Res::All(logic::mc_all_pltl(&s, &init, &phi, opts)?)
            } else {
                Res::Exists(logic::mc_pltl(&s, &init, &phi, opts)?)
            }
        }
        (None, Some(f)) => {
            let phi = logic::parse_fo(f)?;
            if a.all {
                Res::All(logic::mc_all_fo(&s, &init, &phi, opts)?)
            } else {
                Res::Exists(logic::mc_fo(&s, &init, &phi, opts)?)
            }
        }
        (None, None) => return Err(Failure::input("one of --pltl or --fo is required")),
    };
    match res {
        Res::Exists(McOutcome::Sat(w)) => {
            out!("SAT");
            out!("{}", pretty(&witness_json(&s, &w)));
            Ok(HOLDS)
        }
        Res::Exists(McOutcome::Unsat) => {
            out!("UNSAT");
            Ok(FAILS)
        }
        Res::All(Universal::Holds) => {
            out!("HOLDS on all runs");
            Ok(HOLDS)
        }
        Res::All(Universal::Counterexample(w)) => {
            out!("FAILS; counterexample run:");
            out!("{}", pretty(&witness_json(&s, &w)));
            Ok(FAILS)
        }
    }
}

fn gen_qbf(input: &Path, solve: bool) -> Outcome {
    let phi = parse_qbf(&read(input)?).map_err(Failure::input)?;
    let r = build_reduction(&phi);
    out!("{}", system_to_json(&r.system));
    let init =
        serde_json::to_string(&ConfigurationDoc::new(&r.system, &r.init)).expect("serializable");
    eprintln!("init: {init}");
    eprintln!("target: {}", r.system.state(r.target).name);
    if !solve {
        return Ok(HOLDS);
    }
    let valid = qbfgen::qbf_valid(&phi).map_err(Failure::input)?;
    let s = r.system.complete_deadlock_free();
    let reachable = matches!(
        solver::reach(&s, &r.init, r.target, SolverOptions::default())?,
        ReachOutcome::Reachable(_)
    );
    eprintln!("qbf valid: {valid}, target reachable: {reachable}");
    if valid != reachable {
        return Err(Failure {
            code: FAILS,
            msg: "reduction disagrees with brute-force validity".into(),
        });
    }
    Ok(if valid { HOLDS } else { FAILS })
}

fn env_budget<T: std::str::FromStr>(name: &str, default: T) -> Result<T, Failure> {
    match std::env::var(name) {
        Ok(v) => v
            .parse()
            .map_err(|_| Failure::input(format!("{name}={v} is not a valid budget"))),
        Err(_) => Ok(default),
    }
}

fn oracle(cmd: &OracleCmd) -> Outcome {
    match cmd {
        OracleCmd::Bfs {
            system,
            init,
            target,
            steps,
            values,
        } => {
            let s = load(system)?;
            let init = config(&s, init)?;
            let t = s.state_by_name(target).map_err(Failure::input)?;
            let d = Budgets::default();
            let steps = steps.map_or_else(|| env_budget("FACS_BUDGET_STEPS", d.steps), Ok)?;
            let values = values.map_or_else(|| env_budget("FACS_BUDGET_VALUES", d.values), Ok)?;
            if steps == 0 || values == 0 {
                return Err(Failure::input("budgets must be at least 1"));
            }
            match bfs_reach(&s, &init, t, steps, values) {
                BfsVerdict::Reachable(path) => {
                    out!(
                        "REACHABLE {target} in {} steps: {}",
                        path.len(),
                        names(&s, &path)
                    );
                    Ok(HOLDS)
                }
                BfsVerdict::Exhausted => {
                    out!("EXHAUSTED within {steps} steps and values up to {values}");
                    Ok(INCONCLUSIVE)
                }
            }
        }
        OracleCmd::Replay {
            system,
            init,
            witness,
            iterations,
            max_steps,
        } => {
            let s = load(system)?;
            let init = config(&s, init)?;
            // accept `reach` output as is, status line included
            let text = read(witness)?;
            let doc: serde_json::Value = serde_json::from_str(&text[text.find('{').unwrap_or(0)..])
                .map_err(Failure::input)?;
            let w = RunWitness::from_json(&s, &doc)?;
            match replay_witness(&s, &init, &w, *iterations, *max_steps) {
                Ok(ReplayOutcome::Ok(trace)) => {
                    out!("OK after {} steps", trace.len() - 1);
                    for c in &trace {
                        out!(
                            "{}",
                            serde_json::to_string(&ConfigurationDoc::new(&s, c))
                                .expect("serializable")
                        );
                    }
                    Ok(HOLDS)
                }
                Ok(ReplayOutcome::GuardFail { step, rule }) => {
                    out!("GUARD_FAIL at step {step} on rule {}", s.rule(rule).name);
                    Ok(FAILS)
                }
                Err(OracleError::TooLong(n)) => Err(Failure {
                    code: INCONCLUSIVE,
                    msg: format!("witness longer than {n} steps"),
                }),
                Err(e) => Err(Failure::input(e)),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    both: usize,
    solver_only: usize,
    unreachable: usize,
    unsound: usize,
    bad_replay: usize,
    inconclusive: usize,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.both += o.both;
        self.solver_only += o.solver_only;
        self.unreachable += o.unreachable;
        self.unsound += o.unsound;
        self.bad_replay += o.bad_replay;
        self.inconclusive += o.inconclusive;
    }
}

fn bench_instance(seed: u64, i: usize) -> Tally {
    let mut rng = corpus::rng(seed.wrapping_add(i as u64));
    let s = corpus::random_flat_system(&mut rng, &SystemParams::default()).complete_deadlock_free();
    let init = corpus::random_init(&mut rng, &s, 3);
    let target = StateId(rng.gen_range(1..s.states().len() - 1));
    let b = Budgets::default();
    let bfs = bfs_reach(&s, &init, target, b.steps, b.values);
    let mut t = Tally::default();
    match solver::reach(&s, &init, target, SolverOptions::default()) {
        Err(_) => t.inconclusive = 1,
        Ok(ReachOutcome::Unreachable) if matches!(bfs, BfsVerdict::Reachable(_)) => t.unsound = 1,
        Ok(ReachOutcome::Unreachable) => t.unreachable = 1,
        Ok(ReachOutcome::Reachable(w)) => {
            let replays = matches!(
                replay_witness(&s, &init, &w, 3, 1_000_000),
                Ok(ReplayOutcome::Ok(trace)) if trace.iter().any(|c| c.state == target)
            );
            if !replays {
                t.bad_replay = 1;
            } else if matches!(bfs, BfsVerdict::Reachable(_)) {
                t.both = 1;
            } else {
                t.solver_only = 1;
            }
        }
    }
    t
}

fn bench(seed: u64, count: usize, jobs: usize) -> Outcome {
    out!("seed {seed}, {count} instances, {} jobs", jobs.max(1));
    let jobs = jobs.clamp(1, count.max(1));
    let mut total = Tally::default();
    if jobs == 1 {
        for i in 0..count {
            total.add(&bench_instance(seed, i));
        }
    } else {
        let parts: Vec<Tally> = std::thread::scope(|sc| {
            let handles: Vec<_> = (0..jobs)
                .map(|j| {
                    sc.spawn(move || {
                        let mut t = Tally::default();
                        for i in (j..count).step_by(jobs) {
                            t.add(&bench_instance(seed, i));
                        }
                        t
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bench worker"))
                .collect()
        });
        for p in &parts {
            total.add(p);
        }
    }
    out!("{:<34}{:>8}", "outcome", "count");
    for (label, n) in [
        ("reachable (solver and BFS)", total.both),
        ("reachable (solver only)", total.solver_only),
        ("unreachable", total.unreachable),
        ("BFS reachable, solver unreachable", total.unsound),
        ("witness replay failed", total.bad_replay),
        ("solver inconclusive", total.inconclusive),
    ] {
        out!("{label:<34}{n:>8}");
    }
    Ok(if total.unsound + total.bad_replay > 0 {
        FAILS
    } else if total.inconclusive > 0 {
        INCONCLUSIVE
    } else {
        HOLDS
    })
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Cmd::Validate { system } => validate(system),
        Cmd::Monoid { system, cycle } => monoid(system, cycle),
        Cmd::Reach {
            system,
            init,
            target,
        } => reach(system, init, target),
        Cmd::Mc(a) => mc(a),
        Cmd::GenQbf { input, solve } => gen_qbf(input, *solve),
        Cmd::Oracle { command } => oracle(command),
        Cmd::Bench { seed, count, jobs } => bench(*seed, *count, *jobs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INPUT } else { HOLDS });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
