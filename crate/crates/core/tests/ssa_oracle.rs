//! Structural SSA suite: single definitions, phi/predecessor agreement and
//! phi placement checked against the brute-force dominance oracle, over
//! the whole corpus.

mod common;

use cascade_core::corpus;
use cascade_core::frontend::{annotate_types, parse_bundle, parse_method};
use cascade_core::ir::lower::{lower, LowerEnv};
use cascade_core::ir::to_ssa;
use cascade_core::reachability::MethodTable;

fn corpus_table() -> MethodTable {
    let mut table = MethodTable::new();
    table.register_vm_function("printOop", 1).unwrap();
    table.register_vm_function("primitiveNew", 0).unwrap();
    for src in parse_bundle(corpus::EQUIVALENCE_BUNDLE, "Corpus").unwrap() {
        let method = annotate_types(&parse_method(&src).unwrap()).unwrap();
        table.insert_method(method).unwrap();
    }
    table
}

#[test]
fn corpus_ssa_structure_matches_the_oracle() {
    let table = corpus_table();
    let mut env = LowerEnv::default();
    let mut checked = 0;
    for (selector, method) in table.methods() {
        let tac = lower(method, &table, &mut env)
            .unwrap_or_else(|e| panic!("{selector}: {e}"));
        let ssa = to_ssa(&tac);

        // one definition per register
        assert!(
            ssa.multiple_definition_vregs().is_empty(),
            "{selector}: multiple definitions {:?}",
            ssa.multiple_definition_vregs()
        );

        // every non-entry block reachable; phi sources cover CFG preds
        assert!(ssa.unreachable_blocks().is_empty(), "{selector}");
        let preds = ssa.predecessors();
        for block in &ssa.blocks {
            for phi in &block.phis {
                let mut phi_preds: Vec<_> = phi.sources.iter().map(|(p, _)| *p).collect();
                phi_preds.sort_unstable();
                let mut cfg: Vec<_> = preds[block.id as usize].clone();
                cfg.sort_unstable();
                assert_eq!(phi_preds, cfg, "{selector} block L{}", block.id);
            }
        }

        // placement equals the iterated-dominance-frontier oracle
        let (pruned, _) = common::prune_for_oracle(&tac);
        let expected = common::expected_phi_placement(&pruned);
        let actual = common::actual_phi_placement(&ssa);
        assert_eq!(actual, expected, "{selector}: phi placement diverges from the oracle");
        checked += 1;
    }
    assert!(checked >= 30, "only {checked} corpus methods checked");
}

#[test]
fn oracle_agrees_on_handwritten_shapes() {
    for src in [
        // diamond with a join phi
        "f: x | r | x > 0 ifTrue: [ r := 1 ] ifFalse: [ r := 2 ]. ^ r",
        // loop-carried variable
        "g: n | i | i := 0. [ i < n ] whileTrue: [ i := i + 1 ]. ^ i",
        // nested loops
        "h: n | s | s := 0. 1 to: n do: [ :i | 1 to: i do: [ :j | s := s + j ] ]. ^ s",
        // early returns leaving an unreachable join
        "k: x x > 0 ifTrue: [ ^ 1 ] ifFalse: [ ^ 2 ]",
        // runtime-direction shift expands to a diamond
        "m: a by: b ^ a bitShift: b",
    ] {
        let tac = common::lower_source(src);
        let ssa = to_ssa(&tac);
        let (pruned, _) = common::prune_for_oracle(&tac);
        assert_eq!(
            common::actual_phi_placement(&ssa),
            common::expected_phi_placement(&pruned),
            "{src}"
        );
        assert!(ssa.multiple_definition_vregs().is_empty(), "{src}");
    }
}
