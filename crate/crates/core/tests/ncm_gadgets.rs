use pdbisim::game::PlayWinner;
use pdbisim::ncm::*;

const LOOP: &str = "1: goto 1 or goto 1\n2: halt\n";
const HALT: &str = "1: halt\n";

fn compiled(src: &str) -> ReductionOutput {
    compile_reduction(&CounterMachine::parse(src).unwrap().lift().unwrap()).unwrap()
}

#[test]
fn every_template_row_is_instantiated() {
    let src = "1: inc c1 goto 2\n2: ifz c2 goto 3 else dec goto 1\n3: goto 1 or goto 4\n4: halt\n";
    let out = compiled(src);
    assert_eq!(uncovered_rows(&out), Vec::<&str>::new());
}

#[test]
fn increments_reach_their_target() {
    let out = compiled(LOOP);
    for alpha in [[0, 0, 0], [1, 2, 0], [2, 1, 2]] {
        for e in 1..=3 {
            let r = lemma13_scenario(&out, Scenario::Inc { e }, 3, alpha).unwrap();
            assert!(r.reached_target(3), "{alpha:?} +{e}: {:?}", r.reached);
            let mut beta = alpha;
            beta[e as usize - 1] += 1;
            assert_eq!(r.expected, beta);
        }
    }
}

#[test]
fn decrements_reach_their_target() {
    let out = compiled(LOOP);
    for alpha in [[1, 0, 0], [2, 2, 1], [0, 1, 2]] {
        for e in 1..=3u8 {
            let s = Scenario::Dec { e };
            if alpha[e as usize - 1] == 0 {
                assert!(matches!(lemma13_scenario(&out, s, 2, alpha), Err(NcmError::Precondition(_))));
                continue;
            }
            let r = lemma13_scenario(&out, s, 2, alpha).unwrap();
            assert!(r.reached_target(2), "{alpha:?} -{e}: {:?}", r.reached);
        }
    }
}

#[test]
fn star_sets_the_third_counter() {
    let out = compiled(LOOP);
    for n in 0..=2 {
        let r = lemma13_scenario(&out, Scenario::Star { n }, 2, [1, 1, 2]).unwrap();
        assert!(r.reached_target(2));
        assert_eq!(r.expected, [1, 1, n]);
    }
}

#[test]
fn scripted_plays_end_undecided() {
    let out = compiled(LOOP);
    let r = lemma13_scenario(&out, Scenario::Inc { e: 1 }, 1, [0, 0, 0]).unwrap();
    assert_eq!(r.play.trace.len(), 4);
    assert_ne!(r.play.winner, PlayWinner::Attacker);
}

#[test]
fn forcing_loops_are_silent_cycles() {
    let out = compiled(LOOP);
    for primed in [false, true] {
        let (n, stuck) = forcing_loop_check(&out, 2, Op::Inc, 1, primed, 300).unwrap();
        assert!(n > 50);
        assert!(stuck.is_empty(), "{} terms do not return", stuck.len());
    }
}

#[test]
fn immediately_halting_machine_is_refuted() {
    let m = CounterMachine::parse(HALT).unwrap();
    let r = bounded_reduction_check(&m, &[4, 8], reduction_options(6, 5_000_000)).unwrap();
    assert!(r.attacker_wins.is_some_and(|d| d <= 8), "{}", r.render());
}

#[test]
fn small_counter_values_encode_uniquely() {
    let out = compiled(LOOP);
    let mut seen = std::collections::HashSet::new();
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let cfg = CounterConfig { label: 2, counters: [a, b, c] };
                let enc = out.encode(cfg).unwrap();
                assert!(seen.insert(enc.left.clone()));
                assert_eq!(out.decode(&enc.left, false), Some((cfg, false)));
            }
        }
    }
}
