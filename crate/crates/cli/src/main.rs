//! Command-line front end: equivalence checks, tableaux, games, the
//! counter-machine reduction and its harnesses.
//!
//! Exit codes: 0 equivalent (or a successful harness), 1 inequivalent (or
//! a violated harness), 2 unknown, 64 bad input or flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pdbisim::equivalence::{check_finite_exact, render_verdict, semidecide_inequivalence, Verdict};
use pdbisim::game::{parse_script, render_trace, render_trace_dot, run_play, solve_bounded, PlayWinner, ScriptMove, Strategy, Winner};
use pdbisim::ncm::{bounded_reduction_check, compile_reduction, prop2_suite, reduction_options, uncovered_rows, CounterMachine};
use pdbisim::tableau::{search_tableau, verify_tableau, Goal, SearchBudget, SearchOutcome};
use pdbisim::{parse_system, parse_term, print_system, reachable_lts, Config, Explore, GameOptions, PdaSystem, Printer, Process, StutterCap};

const EQUIVALENT: u8 = 0;
const INEQUIVALENT: u8 = 1;
const UNKNOWN: u8 = 2;
const USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "pdbisim", version, about = "Branching bisimilarity of extended pushdown processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Dot,
}

#[derive(Args, Debug)]
struct Common {
    /// Iterative-deepening depths, strictly increasing.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    depth_schedule: Vec<u32>,
    /// Largest finite fragment to explore, in states; also the tableau node cap.
    #[arg(long, default_value_t = 10_000)]
    node_cap: usize,
    /// Largest entry depth of an introduced recursive constant.
    #[arg(long, default_value_t = 4)]
    rec_size_cap: u32,
    /// Silent steps allowed in one Defender response (derived when omitted).
    #[arg(long)]
    stutter_cap: Option<usize>,
    /// Game search work limit.
    #[arg(long, default_value_t = 5_000_000)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide `left ≃ right`: exactly when the fragment closes, otherwise by
    /// iterative deepening (which can only refute).
    Check {
        system: PathBuf,
        left: String,
        right: String,
        #[command(flatten)]
        common: Common,
    },
    /// Search for a tableau of `left = right`.
    Tableau {
        system: PathBuf,
        left: String,
        right: String,
        #[command(flatten)]
        common: Common,
    },
    /// Play the bisimulation game, scripted or solved.
    Game {
        system: PathBuf,
        left: String,
        right: String,
        /// Script of `A …`/`D …` lines; the solver plays any side the script leaves out.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        max_rounds: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Compile a counter machine into a system file.
    CompileNcm {
        machine: PathBuf,
        /// The input is already a lifted three-counter machine.
        #[arg(long)]
        lifted: bool,
        /// Write the system here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Write the root pair, the lifted machine and per-row rule counts here.
        #[arg(long)]
        inventory: Option<PathBuf>,
    },
    /// Print the reachable fragment of some terms.
    Lts {
        system: PathBuf,
        #[arg(required = true)]
        terms: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Check the counter-test equivalences of a compiled machine.
    Prop2 {
        machine: PathBuf,
        #[arg(long)]
        lifted: bool,
        /// Largest counter value.
        #[arg(long, default_value_t = 3)]
        max: u32,
        #[arg(long, default_value_t = 200_000)]
        node_cap: usize,
    },
    /// Play the root pair of a compiled source machine by iterative deepening.
    ReductionCheck {
        machine: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        depth_schedule: Vec<u32>,
        #[arg(long, default_value_t = 6)]
        stutter_cap: usize,
        #[arg(long, default_value_t = 20_000_000)]
        budget: u64,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_system(path: &Path) -> Result<PdaSystem> {
    parse_system(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn term(sys: &PdaSystem, src: &str) -> Result<Process> {
    parse_term(sys, src).with_context(|| format!("parsing term `{src}`"))
}

fn check_schedule(s: &[u32]) -> Result<()> {
    if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
        bail!("--depth-schedule must be positive and strictly increasing");
    }
    Ok(())
}

impl Common {
    fn validate(&self) -> Result<()> {
        check_schedule(&self.depth_schedule)?;
        if self.node_cap == 0 || self.rec_size_cap == 0 || self.budget == 0 || self.stutter_cap == Some(0) {
            bail!("budgets must be positive");
        }
        Ok(())
    }

    /// Game options; systems with silent head cycles need a fixed cap, and
    /// get 16 when none is given.
    fn game_options(&self, sys: &PdaSystem) -> GameOptions {
        let cap = match self.stutter_cap {
            Some(c) => StutterCap::Fixed(c),
            None if sys.silent_head_cycles().is_empty() => StutterCap::Auto,
            None => StutterCap::Fixed(16),
        };
        GameOptions {
            cap,
            budget: self.budget,
            ..GameOptions::default()
        }
    }
}

fn source_machine(path: &Path, lifted: bool) -> Result<CounterMachine> {
    let m = CounterMachine::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if lifted {
        return Ok(m);
    }
    if m.instrs().iter().any(|i| matches!(i, pdbisim::ncm::Instr::Inc { counter: 3, .. } | pdbisim::ncm::Instr::ZeroDec { counter: 3, .. })) {
        bail!("a source machine uses counters c1 and c2 only");
    }
    Ok(m.lift()?)
}

fn cmd_check(system: &Path, left: &str, right: &str, c: &Common) -> Result<u8> {
    c.validate()?;
    let sys = load_system(system)?;
    let (l, r) = (term(&sys, left)?, term(&sys, right)?);
    let mut pr = pdbisim::Pruner::new(&sys);
    if pr.prune(&l) == pr.prune(&r) {
        println!("method: identity\nverdict: equivalent");
        return Ok(EQUIVALENT);
    }
    let mut verdict = check_finite_exact(&sys, &l, &r, c.node_cap)?;
    let mut method = "finite-exact";
    if let Verdict::Unknown { .. } = verdict {
        if sys.flavor().finitely_branching() {
            method = "iterative-deepening";
            verdict = semidecide_inequivalence(&sys, &l, &r, &c.depth_schedule, c.game_options(&sys))?;
        } else {
            method = "finite-exact (fragment exceeded; deepening needs an eps-popping or normed eps-pushing system)";
        }
    }
    match (c.format, &verdict) {
        (Format::Dot, Verdict::Equivalent(w)) => print!("{}", w.lts.render_dot(&sys)),
        (Format::Dot, Verdict::Inequivalent { line, .. }) => print!("{}", render_trace_dot(&sys, &Config::new(l, r), line)),
        _ => {
            println!("method: {method}");
            print!("{}", render_verdict(&sys, &verdict));
        }
    }
    Ok(match verdict {
        Verdict::Equivalent(_) => EQUIVALENT,
        Verdict::Inequivalent { .. } => INEQUIVALENT,
        Verdict::Unknown { .. } => UNKNOWN,
    })
}

fn cmd_tableau(system: &Path, left: &str, right: &str, c: &Common) -> Result<u8> {
    c.validate()?;
    let sys = load_system(system)?;
    let goal = Goal::new(term(&sys, left)?, term(&sys, right)?);
    let mut budget = SearchBudget {
        node_cap: c.node_cap,
        rec_size_cap: c.rec_size_cap,
        ..SearchBudget::default()
    };
    if let Some(s) = c.stutter_cap {
        budget.stutter_cap = s;
    }
    let outcome = search_tableau(&sys, &goal, &budget)?;
    let (t, code, status) = match &outcome {
        SearchOutcome::Found(t) => (t, EQUIVALENT, "successful".to_string()),
        SearchOutcome::Refuted(t) => (t, INEQUIVALENT, "unsuccessful".to_string()),
        SearchOutcome::Unknown { nodes, reason, partial } => (partial, UNKNOWN, format!("unknown after {nodes} nodes: {reason}")),
    };
    match c.format {
        Format::Dot => print!("{}", t.render_dot()),
        Format::Text => {
            println!("tableau: {status}");
            if code == EQUIVALENT {
                let audit = verify_tableau(t, budget.stutter_cap);
                println!(
                    "audit: {} ({} leaves, {} matches)",
                    if audit.ok() { "ok" } else { "failed" },
                    audit.leaves,
                    audit.matches
                );
                for i in &audit.issues {
                    println!("  {i:?}");
                }
            }
            print!("{}", t.render());
        }
    }
    Ok(code)
}

fn cmd_game(system: &Path, left: &str, right: &str, script: Option<&Path>, max_rounds: usize, c: &Common) -> Result<u8> {
    c.validate()?;
    let sys = load_system(system)?;
    let start = Config::new(term(&sys, left)?, term(&sys, right)?);
    let opts = c.game_options(&sys);
    let depth = *c.depth_schedule.last().expect("validated");
    let Some(path) = script else {
        let solved = solve_bounded(&sys, &start, depth, opts)?;
        if c.format == Format::Dot {
            print!("{}", render_trace_dot(&sys, &start, &solved.line));
        } else {
            print!("{}", render_trace(&sys, &solved.line));
        }
        return Ok(match solved.winner {
            Winner::AttackerWins(d) => {
                eprintln!("attacker wins within {d} rounds");
                INEQUIVALENT
            }
            Winner::DefenderSurvives(d) => {
                eprintln!("defender survives {d} rounds");
                UNKNOWN
            }
        });
    };
    let moves = parse_script(&sys, &read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let has = |f: fn(&ScriptMove) -> bool| moves.iter().any(f);
    let attacker = if has(|m| matches!(m, ScriptMove::Attack { .. })) {
        Strategy::Scripted(moves.clone())
    } else {
        Strategy::Solver(depth)
    };
    let defender = if has(|m| matches!(m, ScriptMove::Defend { .. } | ScriptMove::DefendNothing)) {
        Strategy::Scripted(moves.clone())
    } else {
        Strategy::Solver(depth)
    };
    let outcome = run_play(&sys, &start, &attacker, &defender, max_rounds, opts)?;
    if c.format == Format::Dot {
        print!("{}", render_trace_dot(&sys, &start, &outcome.trace));
    } else {
        print!("{}", render_trace(&sys, &outcome.trace));
        let mut pr = Printer::modulo_pruning(&sys);
        println!("# final: {} | {}", pr.term(&outcome.last.left), pr.term(&outcome.last.right));
    }
    if let Some(e) = &outcome.script_error {
        bail!("script: {e}");
    }
    Ok(match outcome.winner {
        PlayWinner::Attacker => INEQUIVALENT,
        PlayWinner::Defender | PlayWinner::Undetermined => UNKNOWN,
    })
}

fn cmd_compile(machine: &Path, lifted: bool, out: Option<&Path>, inventory: Option<&Path>) -> Result<u8> {
    let m = source_machine(machine, lifted)?;
    let r = compile_reduction(&m)?;
    let text = print_system(&r.system);
    match out {
        Some(p) => fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    let mut inv = String::new();
    let mut pr = Printer::new(&r.system);
    inv.push_str(&format!("# root\n# left  {}\n# right {}\n", pr.term(&r.root.left), pr.term(&r.root.right)));
    inv.push_str("# lifted machine\n");
    for line in m.to_string().lines() {
        inv.push_str(&format!("#   {line}\n"));
    }
    inv.push_str(&format!(
        "# {} states, {} rules\n",
        r.system.num_states(),
        r.system.rules().len()
    ));
    for (row, n) in &r.template_counts {
        inv.push_str(&format!("{row} {n}\n"));
    }
    let uncovered = uncovered_rows(&r);
    match inventory {
        Some(p) => fs::write(p, &inv).with_context(|| format!("writing {}", p.display()))?,
        None => eprint!("{inv}"),
    }
    if !uncovered.is_empty() {
        eprintln!("rows without rules (the machine has no instruction of that kind): {}", uncovered.join(" "));
    }
    Ok(EQUIVALENT)
}

fn cmd_lts(system: &Path, terms: &[String], c: &Common) -> Result<u8> {
    c.validate()?;
    let sys = load_system(system)?;
    let roots = terms.iter().map(|t| term(&sys, t)).collect::<Result<Vec<_>>>()?;
    match reachable_lts(&sys, &roots, Explore { budget: c.node_cap, prune: true })? {
        Ok(lts) => {
            match c.format {
                Format::Dot => print!("{}", lts.render_dot(&sys)),
                Format::Text => print!("{}", lts.render(&sys)),
            }
            Ok(EQUIVALENT)
        }
        Err(e) => {
            println!("exceeded: {} states explored, {} on the frontier", e.explored, e.frontier);
            Ok(UNKNOWN)
        }
    }
}

fn cmd_prop2(machine: &Path, lifted: bool, max: u32, node_cap: usize) -> Result<u8> {
    let r = compile_reduction(&source_machine(machine, lifted)?)?;
    let report = prop2_suite(&r, max, node_cap)?;
    print!("{}", report.render(&r.system));
    println!("fragment: {} states", report.fragment);
    Ok(if report.violations().next().is_some() {
        INEQUIVALENT
    } else if report.unknown() > 0 {
        UNKNOWN
    } else {
        EQUIVALENT
    })
}

fn cmd_reduction(machine: &Path, schedule: &[u32], cap: usize, budget: u64) -> Result<u8> {
    check_schedule(schedule)?;
    if cap == 0 || budget == 0 {
        bail!("budgets must be positive");
    }
    let m = CounterMachine::parse(&read(machine)?).with_context(|| format!("parsing {}", machine.display()))?;
    let report = bounded_reduction_check(&m, schedule, reduction_options(cap, budget))?;
    print!("{}", report.render());
    Ok(if report.attacker_wins.is_some() { INEQUIVALENT } else { UNKNOWN })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Check { system, left, right, common } => cmd_check(&system, &left, &right, &common),
        Command::Tableau { system, left, right, common } => cmd_tableau(&system, &left, &right, &common),
        Command::Game {
            system,
            left,
            right,
            script,
            max_rounds,
            common,
        } => cmd_game(&system, &left, &right, script.as_deref(), max_rounds, &common),
        Command::CompileNcm {
            machine,
            lifted,
            out,
            inventory,
        } => cmd_compile(&machine, lifted, out.as_deref(), inventory.as_deref()),
        Command::Lts { system, terms, common } => cmd_lts(&system, &terms, &common),
        Command::Prop2 {
            machine,
            lifted,
            max,
            node_cap,
        } => cmd_prop2(&machine, lifted, max, node_cap),
        Command::ReductionCheck {
            machine,
            depth_schedule,
            stutter_cap,
            budget,
        } => cmd_reduction(&machine, &depth_schedule, stutter_cap, budget),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE)
        }
    }
}
