use heurevo_core::expr::{parse, random_tree, CompiledExpr};
use heurevo_core::rng::seeded;
use heurevo_core::{Deadline, TaskHarness};
use heurevo_tasks::capset::{enumerate, export_text, greedy_capset, verify_capset, CapsetHarness};
use proptest::prelude::*;

#[test]
fn greedy_output_verifies_for_random_priorities() {
    let mut rng = seeded(2, 0);
    for n in 1..=4 {
        let h = CapsetHarness::new(n).unwrap();
        for _ in 0..50 {
            let e = random_tree(&mut rng, h.variables(), 5);
            let f = CompiledExpr::compile(&e, h.variables()).unwrap();
            if let Ok(set) = h.construct(&f) {
                assert!(verify_capset(&set), "n={n} {e}");
            }
        }
    }
}

#[test]
fn zero_priority_n1_has_size_two() {
    let h = CapsetHarness::new(1).unwrap();
    let f = CompiledExpr::compile(&parse("0.0").unwrap(), h.variables()).unwrap();
    assert_eq!(h.score_expression(&f, &Deadline::never()).unwrap(), vec![2.0]);
    assert_eq!(export_text(&h.construct(&f).unwrap()), "0\n1\n");
}

#[test]
fn n8_seed_runs() {
    let h = CapsetHarness::new(8).unwrap();
    let f = CompiledExpr::compile(&parse("0.0").unwrap(), h.variables()).unwrap();
    let set = h.construct(&f).unwrap();
    assert!(verify_capset(&set));
    assert!(set.len() >= 2);
}

proptest! {
    #[test]
    fn positive_scaling_keeps_the_set(prio in prop::collection::vec(-100i32..100, 27), scale in 0.01f64..100.0) {
        let p: Vec<f64> = prio.iter().map(|&x| x as f64).collect();
        let q: Vec<f64> = p.iter().map(|x| x * scale).collect();
        prop_assert_eq!(greedy_capset(3, &p), greedy_capset(3, &q));
    }

    #[test]
    fn greedy_sets_verify(prio in prop::collection::vec(-5i32..5, 81)) {
        let p: Vec<f64> = prio.iter().map(|&x| x as f64).collect();
        let all = enumerate(4);
        let set: Vec<Vec<u8>> = greedy_capset(4, &p).into_iter().map(|i| all[i].clone()).collect();
        prop_assert!(verify_capset(&set));
    }
}
