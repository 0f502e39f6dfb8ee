use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const POPPING: &str = "\
states p q s
symbols X Z
actions a b c
rule p X a -> p X X
rule p X b -> p
rule p Z a -> p X Z
rule p Z c -> p
rule q X eps -> p X
rule q Z eps -> p Z
rule s X a -> s
";

const FINITE: &str = "\
states p q
symbols X Z
actions a b
rule p X a -> p
rule p Z b -> p
rule q X eps -> p X
rule q Z eps -> p Z
";

const GROWING: &str = "states p q\nsymbols X\nactions a b\nrule p X a -> p X X\nrule p X b -> p\nrule q X a -> q X X\nrule q X b -> p\n";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdbisim")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn compile(dir: &TempDir, name: &str, machine: &str) -> String {
    let m = write(dir, &format!("{name}.ncm"), machine);
    let out = dir.path().join(format!("{name}.pda"));
    let o = run(&["compile-ncm", &m, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.to_str().unwrap().to_string()
}

#[test]
fn identical_terms_are_equivalent() {
    let d = TempDir::new().unwrap();
    let sys = write(&d, "p.pda", POPPING);
    let o = run(&["check", &sys, "p [X Z]", "p [X Z]"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("verdict: equivalent"));
}

#[test]
fn silent_switch_is_equivalent_and_distinct_counts_are_not() {
    let d = TempDir::new().unwrap();
    let sys = write(&d, "f.pda", FINITE);
    let o = run(&["check", &sys, "p [X Z]", "q [X Z]"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("method: finite-exact\nverdict: equivalent"));
    let sys = write(&d, "p.pda", POPPING);
    let o = run(&["check", &sys, "p [X Z]", "p [X X Z]"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("verdict: inequivalent"));
}

#[test]
fn different_counter_values_are_refuted() {
    let d = TempDir::new().unwrap();
    let sys = compile(&d, "loop", "1: goto 1 or goto 1\n2: halt\n");
    let o = run(&["check", &sys, "t [C1 Bot]", "t [C2 Bot]"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("A left c1"));
}

#[test]
fn unbounded_fragment_with_tiny_budget_is_unknown() {
    let d = TempDir::new().unwrap();
    let sys = write(&d, "g.pda", GROWING);
    let o = run(&["check", &sys, "p [X]", "q [X]", "--node-cap", "5", "--depth-schedule", "2,4"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("verdict: unknown"));
}

#[test]
fn bad_input_exits_64() {
    let d = TempDir::new().unwrap();
    let sys = write(&d, "p.pda", POPPING);
    assert_eq!(code(&run(&["check", &sys, "p [X", "p [X]"])), 64);
    assert_eq!(code(&run(&["check", &sys, "p [X]", "p [X]", "--depth-schedule", "4,2"])), 64);
    assert_eq!(code(&run(&["check", &sys, "p [X]", "p [X]", "--node-cap", "0"])), 64);
    assert_eq!(code(&run(&["check", "/nonexistent.pda", "p", "p"])), 64);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn compiled_system_round_trips() {
    let d = TempDir::new().unwrap();
    let sys = compile(&d, "loop", "1: goto 1 or goto 1\n2: halt\n");
    let text = fs::read_to_string(&sys).unwrap();
    let parsed = pdbisim::parse_system(&text).unwrap();
    assert_eq!(pdbisim::print_system(&parsed), text);
    let o = run(&["check", &sys, "p<1> [X Bot]", "p<1> [X Bot]"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn compile_is_deterministic_and_writes_an_inventory() {
    let d = TempDir::new().unwrap();
    let a = compile(&d, "a", "1: inc c1 goto 2\n2: halt\n");
    let b = compile(&d, "b", "1: inc c1 goto 2\n2: halt\n");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let m = write(&d, "m.ncm", "1: inc c1 goto 2\n2: halt\n");
    let inv = d.path().join("inv.txt");
    let o = run(&["compile-ncm", &m, "--out", &a, "--inventory", inv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let inv = fs::read_to_string(inv).unwrap();
    assert!(inv.contains("# left  p<1> [X Bot]"));
    assert!(inv.contains("#   1: star c3 goto 2"));
    assert!(inv.contains("inc 2"));
}

#[test]
fn increment_script_reaches_the_target() {
    let d = TempDir::new().unwrap();
    let sys = compile(&d, "inc", "1: inc c1 goto 2\n2: halt\n");
    let script = write(
        &d,
        "l13.script",
        "A left a -> u1<1,+,3> [X Bot]\n\
         D eps* a -> u1'<1,+,3> [X C1 Bot Bot]\n\
         A left a -> u2<1,+,3> [X Bot]\n\
         D eps* a -> u2'<1,+,3> [X C1 Bot Bot]\n\
         A right a -> u3'<1,+,3> [X C1 Bot Bot]\n\
         D eps* a -> u3<1,+,3> [X C1 Bot Bot]\n\
         A left a -> p<3> [X C1 Bot Bot]\n\
         D eps* a -> q<3> [X C1 Bot Bot]\n",
    );
    let args = [
        "game",
        &sys,
        "u<1,+,3> [X Bot]",
        "u'<1,+,3> [X Bot]",
        "--script",
        &script,
        "--max-rounds",
        "4",
    ];
    let o = run(&args);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = stdout(&o);
    assert!(trace.ends_with("# final: p<3> [X C1 Bot] | q<3> [X C1 Bot]\n"), "{trace}");
    // The trace is itself a script that replays to the same trace.
    let again = write(&d, "trace.script", &trace);
    let mut args2 = args;
    args2[5] = &again;
    assert_eq!(stdout(&run(&args2)), trace);
}

#[test]
fn lts_of_a_counter_test_closes() {
    let d = TempDir::new().unwrap();
    let sys = compile(&d, "loop", "1: goto 1 or goto 1\n2: halt\n");
    let o = run(&["lts", &sys, "t<2,+> [C1 C2 C3 Bot]"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("state 0 "));
    let o = run(&["lts", &sys, "p<1> [X Bot]", "--node-cap", "20"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).starts_with("exceeded"));
}

#[test]
fn dot_output() {
    let d = TempDir::new().unwrap();
    let sys = write(&d, "p.pda", POPPING);
    let fin = write(&d, "f.pda", FINITE);
    for args in [
        vec!["check", &sys, "p [X Z]", "p [X X Z]", "--format", "dot"],
        vec!["check", &fin, "p [X Z]", "q [X Z]", "--format", "dot"],
        vec!["lts", &fin, "p [X Z]", "--format", "dot"],
        vec!["tableau", &sys, "p [X Z]", "q [X Z]", "--format", "dot"],
    ] {
        assert!(stdout(&run(&args)).starts_with("digraph"), "{args:?}");
    }
}

#[test]
fn tableau_is_found_and_audited() {
    let d = TempDir::new().unwrap();
    let sys = write(&d, "p.pda", POPPING);
    let o = run(&["tableau", &sys, "p [X Z]", "q [X Z]"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("tableau: successful\naudit: ok"), "{out}");
}

#[test]
fn solver_game_refutes() {
    let d = TempDir::new().unwrap();
    let sys = write(&d, "p.pda", POPPING);
    let o = run(&["game", &sys, "p [X Z]", "s [X Z]", "--depth-schedule", "3"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("A "));
}

#[test]
fn harness_commands() {
    let d = TempDir::new().unwrap();
    let m = write(&d, "loop.ncm", "1: goto 1 or goto 1\n2: halt\n");
    let o = run(&["prop2", &m, "--max", "1"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("statement 7:"));
    let h = write(&d, "halt.ncm", "1: halt\n");
    let o = run(&["reduction-check", &h, "--depth-schedule", "4,8"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("attacker wins"));
    assert!(Path::new(&m).exists());
}
