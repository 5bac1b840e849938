//! Shared test support: an independent dominance oracle (path-removal
//! dominators, definition-based frontiers) and small lowering helpers.
//!
//! The oracle deliberately avoids the production SSA code paths: it
//! computes dominators by deleting nodes and re-running reachability, and
//! iterates frontiers by repeated union until a fixpoint.
//!
//! Each integration-test binary uses its own subset of these helpers.
#![allow(dead_code)]

use cascade_core::frontend::{annotate_types, parse_method, SourceMethod};
use cascade_core::ir::lower::{lower, LowerEnv};
use cascade_core::ir::{BlockId, IrFunction, Vreg};
use cascade_core::reachability::MethodTable;
use std::collections::{BTreeMap, BTreeSet};

pub fn lower_source(src: &str) -> IrFunction {
    let method = annotate_types(&parse_method(&SourceMethod::new("T", "", src)).unwrap()).unwrap();
    let mut table = MethodTable::new();
    table.register_vm_function("printOop", 1).unwrap();
    table.register_vm_function("primitiveNew", 0).unwrap();
    lower(&method, &table, &mut LowerEnv::default()).unwrap()
}

pub fn lower_with_table(src: &str, extra: &[&str]) -> IrFunction {
    let mut table = MethodTable::new();
    table.register_vm_function("printOop", 1).unwrap();
    table.register_vm_function("primitiveNew", 0).unwrap();
    for other in extra {
        let m = annotate_types(&parse_method(&SourceMethod::new("T", "", other)).unwrap()).unwrap();
        table.insert_method(m).unwrap();
    }
    let method = annotate_types(&parse_method(&SourceMethod::new("T", "", src)).unwrap()).unwrap();
    lower(&method, &table, &mut LowerEnv::default()).unwrap()
}

/// Successor lists of a function's CFG.
pub fn successors(f: &IrFunction) -> Vec<Vec<BlockId>> {
    f.blocks.iter().map(|b| b.terminator.successors()).collect()
}

fn reachable_from_entry(succ: &[Vec<BlockId>], skip: Option<BlockId>) -> BTreeSet<BlockId> {
    let mut seen = BTreeSet::new();
    if skip == Some(0) {
        return seen;
    }
    let mut stack = vec![0 as BlockId];
    while let Some(b) = stack.pop() {
        if seen.insert(b) {
            for &s in &succ[b as usize] {
                if Some(s) != skip {
                    stack.push(s);
                }
            }
        }
    }
    seen
}

/// Order-preserving compaction of reachable blocks, mirroring what SSA
/// construction is specified to do before renaming.
pub fn prune_for_oracle(f: &IrFunction) -> (IrFunction, BTreeMap<BlockId, BlockId>) {
    let succ = successors(f);
    let live = reachable_from_entry(&succ, None);
    let mut mapping = BTreeMap::new();
    let mut blocks = Vec::new();
    for block in &f.blocks {
        if live.contains(&block.id) {
            mapping.insert(block.id, blocks.len() as BlockId);
            blocks.push(block.clone());
        }
    }
    for block in &mut blocks {
        block.id = mapping[&block.id];
        use cascade_core::ir::Terminator;
        block.terminator = match &block.terminator {
            Terminator::Jump(b) => Terminator::Jump(mapping[b]),
            Terminator::BranchIf { cond, then_block, else_block } => Terminator::BranchIf {
                cond: *cond,
                then_block: mapping[then_block],
                else_block: mapping[else_block],
            },
            ret @ Terminator::Ret(_) => ret.clone(),
        };
    }
    (IrFunction { blocks, ..f.clone() }, mapping)
}

/// Brute-force dominators: n dominates b iff deleting n disconnects b
/// from the entry (plus the reflexive case).
pub fn brute_dominators(f: &IrFunction) -> Vec<BTreeSet<BlockId>> {
    let succ = successors(f);
    let n = f.blocks.len();
    let mut dom = vec![BTreeSet::new(); n];
    for candidate in 0..n as BlockId {
        let still_reachable = reachable_from_entry(&succ, Some(candidate));
        for b in 0..n as BlockId {
            if b == candidate || !still_reachable.contains(&b) {
                dom[b as usize].insert(candidate);
            }
        }
    }
    dom
}

/// DF(n) straight from the definition: m is in DF(n) iff n dominates some
/// predecessor of m but does not strictly dominate m.
pub fn brute_dominance_frontiers(f: &IrFunction) -> Vec<BTreeSet<BlockId>> {
    let dom = brute_dominators(f);
    let preds = f.predecessors();
    let n = f.blocks.len();
    let mut frontiers = vec![BTreeSet::new(); n];
    for node in 0..n as BlockId {
        for m in 0..n as BlockId {
            let dominates_a_pred =
                preds[m as usize].iter().any(|p| dom[*p as usize].contains(&node));
            let strictly_dominates_m = node != m && dom[m as usize].contains(&node);
            if dominates_a_pred && !strictly_dominates_m {
                frontiers[node as usize].insert(m);
            }
        }
    }
    frontiers
}

/// Iterated dominance frontier of a set of definition blocks.
pub fn iterated_frontier(
    frontiers: &[BTreeSet<BlockId>],
    defs: &BTreeSet<BlockId>,
) -> BTreeSet<BlockId> {
    let mut result: BTreeSet<BlockId> = BTreeSet::new();
    let mut basis = defs.clone();
    loop {
        let mut next = result.clone();
        for &b in basis.iter().chain(result.iter()) {
            next.extend(frontiers[b as usize].iter().copied());
        }
        if next == result {
            return result;
        }
        result = next;
        basis = defs.clone();
    }
}

/// Definition blocks of each TAC register on the (pruned) function.
pub fn def_sites(f: &IrFunction) -> BTreeMap<Vreg, BTreeSet<BlockId>> {
    let mut defs: BTreeMap<Vreg, BTreeSet<BlockId>> = BTreeMap::new();
    for &p in &f.params {
        defs.entry(p).or_default().insert(0);
    }
    for block in &f.blocks {
        for instr in &block.instrs {
            if let Some(d) = instr.dest() {
                defs.entry(d).or_default().insert(block.id);
            }
        }
    }
    defs
}

/// Expected phi placement: for every register, a phi at each block of the
/// iterated dominance frontier of its definition sites.
pub fn expected_phi_placement(tac_pruned: &IrFunction) -> BTreeSet<(BlockId, Vreg)> {
    let frontiers = brute_dominance_frontiers(tac_pruned);
    let mut expected = BTreeSet::new();
    for (vreg, sites) in def_sites(tac_pruned) {
        for block in iterated_frontier(&frontiers, &sites) {
            expected.insert((block, vreg));
        }
    }
    expected
}

/// Actual phi placement of an SSA function, keyed by origin register.
pub fn actual_phi_placement(ssa: &IrFunction) -> BTreeSet<(BlockId, Vreg)> {
    let mut actual = BTreeSet::new();
    for block in &ssa.blocks {
        for phi in &block.phis {
            actual.insert((block.id, phi.origin));
        }
    }
    actual
}
