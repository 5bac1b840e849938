//! SSA construction over the TAC output of lowering.
//!
//! Unreachable blocks are pruned first (dominance is undefined for them),
//! then phis are placed at iterated dominance frontiers of each register's
//! definition sites and registers are renamed along the dominator tree.

use super::*;
use std::collections::BTreeMap;

pub fn to_ssa(f: &IrFunction) -> IrFunction {
    debug_assert_eq!(f.form, IrForm::Tac, "to_ssa expects TAC input");
    let mut func = prune_unreachable(f);
    let preds = func.predecessors();
    let idom = immediate_dominators(&func, &preds);
    let frontiers = dominance_frontiers(&func, &preds, &idom);
    place_phis(&mut func, &preds, &frontiers);
    rename(&mut func, &idom);
    func.form = IrForm::Ssa;
    func
}

/// Drop blocks unreachable from the entry and renumber the survivors.
fn prune_unreachable(f: &IrFunction) -> IrFunction {
    let dead = f.unreachable_blocks();
    if dead.is_empty() {
        return f.clone();
    }
    let mut mapping: BTreeMap<BlockId, BlockId> = BTreeMap::new();
    let mut blocks = Vec::new();
    for block in &f.blocks {
        if !dead.contains(&block.id) {
            mapping.insert(block.id, blocks.len() as BlockId);
            blocks.push(block.clone());
        }
    }
    for block in &mut blocks {
        block.id = mapping[&block.id];
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
    IrFunction { blocks, ..f.clone() }
}

/// Immediate dominators by the iterative set-intersection fixpoint; fine
/// for the small CFGs lowering produces.
fn immediate_dominators(f: &IrFunction, preds: &[Vec<BlockId>]) -> Vec<Option<BlockId>> {
    let n = f.blocks.len();
    let all: Vec<bool> = vec![true; n];
    let mut dom: Vec<Vec<bool>> = vec![all; n];
    dom[0] = vec![false; n];
    dom[0][0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for b in 1..n {
            let mut new_set = vec![true; n];
            let mut any_pred = false;
            for &p in &preds[b] {
                any_pred = true;
                for i in 0..n {
                    new_set[i] = new_set[i] && dom[p as usize][i];
                }
            }
            if !any_pred {
                new_set = vec![false; n];
            }
            new_set[b] = true;
            if new_set != dom[b] {
                dom[b] = new_set;
                changed = true;
            }
        }
    }
    // idom(b) = the strict dominator of b dominated by every other strict
    // dominator of b
    let mut idom = vec![None; n];
    for b in 1..n {
        let strict: Vec<usize> = (0..n).filter(|&d| d != b && dom[b][d]).collect();
        'candidates: for &c in &strict {
            for &other in &strict {
                if !dom[c][other] {
                    continue 'candidates;
                }
            }
            idom[b] = Some(c as BlockId);
            break;
        }
    }
    idom
}

/// DF(n) = blocks m where n dominates a predecessor of m but does not
/// strictly dominate m itself.
fn dominance_frontiers(
    f: &IrFunction,
    preds: &[Vec<BlockId>],
    idom: &[Option<BlockId>],
) -> Vec<Vec<BlockId>> {
    let n = f.blocks.len();
    let mut frontiers = vec![Vec::new(); n];
    for m in 0..n as BlockId {
        if preds[m as usize].len() < 2 {
            continue;
        }
        let Some(m_idom) = idom[m as usize] else { continue };
        for &p in &preds[m as usize] {
            let mut runner = p;
            while runner != m_idom {
                if !frontiers[runner as usize].contains(&m) {
                    frontiers[runner as usize].push(m);
                }
                match idom[runner as usize] {
                    Some(next) => runner = next,
                    None => break,
                }
            }
        }
    }
    for frontier in &mut frontiers {
        frontier.sort_unstable();
    }
    frontiers
}

/// Classic worklist phi placement: a phi for register v lands at every
/// block of the iterated dominance frontier of v's definition sites.
fn place_phis(f: &mut IrFunction, preds: &[Vec<BlockId>], frontiers: &[Vec<BlockId>]) {
    let n = f.blocks.len();
    let mut def_blocks: BTreeMap<Vreg, Vec<BlockId>> = BTreeMap::new();
    for &p in &f.params {
        def_blocks.entry(p).or_default().push(0);
    }
    for block in &f.blocks {
        for instr in &block.instrs {
            if let Some(d) = instr.dest() {
                let sites = def_blocks.entry(d).or_default();
                if !sites.contains(&block.id) {
                    sites.push(block.id);
                }
            }
        }
    }

    for (&vreg, sites) in &def_blocks {
        let mut placed = vec![false; n];
        let mut on_worklist = vec![false; n];
        let mut worklist: Vec<BlockId> = Vec::new();
        for &s in sites {
            if !on_worklist[s as usize] {
                on_worklist[s as usize] = true;
                worklist.push(s);
            }
        }
        while let Some(b) = worklist.pop() {
            for &m in &frontiers[b as usize] {
                if !placed[m as usize] {
                    placed[m as usize] = true;
                    let sources = preds[m as usize]
                        .iter()
                        .map(|&p| (p, vreg))
                        .collect();
                    f.blocks[m as usize].phis.push(Phi {
                        dest: vreg,
                        sources,
                        origin: vreg,
                    });
                    if !on_worklist[m as usize] {
                        on_worklist[m as usize] = true;
                        worklist.push(m);
                    }
                }
            }
        }
    }
    for block in &mut f.blocks {
        block.phis.sort_by_key(|phi| phi.origin);
    }
}

/// Stack-based renaming along the dominator tree. Reads of registers with
/// no definition on some path read the function's zero-initialized
/// "undefined" register.
fn rename(f: &mut IrFunction, idom: &[Option<BlockId>]) {
    let n = f.blocks.len();
    let mut children: Vec<Vec<BlockId>> = vec![Vec::new(); n];
    for b in 1..n {
        if let Some(d) = idom[b] {
            children[d as usize].push(b as BlockId);
        }
    }
    let undef = f.vreg_count;
    f.vreg_count += 1;

    let mut stacks: BTreeMap<Vreg, Vec<Vreg>> = BTreeMap::new();
    for &p in &f.params {
        stacks.entry(p).or_default().push(p);
    }
    let mut state = Rename {
        f,
        children: &children,
        stacks,
        undef,
    };
    state.walk(0);
}

struct Rename<'a> {
    f: &'a mut IrFunction,
    children: &'a [Vec<BlockId>],
    stacks: BTreeMap<Vreg, Vec<Vreg>>,
    undef: Vreg,
}

impl Rename<'_> {
    fn current(&self, v: Vreg) -> Vreg {
        self.stacks.get(&v).and_then(|s| s.last().copied()).unwrap_or(self.undef)
    }

    fn fresh_def(&mut self, origin: Vreg) -> Vreg {
        let new = self.f.vreg_count;
        self.f.vreg_count += 1;
        self.stacks.entry(origin).or_default().push(new);
        new
    }

    fn rewrite_operand(&self, op: &mut Operand) {
        if let Operand::Vreg(v) = op {
            *op = Operand::Vreg(self.current(*v));
        }
    }

    fn walk(&mut self, block: BlockId) {
        let mut pushed: Vec<Vreg> = Vec::new();

        // the entry block has no predecessors, hence never any phis
        let phi_count = self.f.blocks[block as usize].phis.len();
        for i in 0..phi_count {
            let origin = self.f.blocks[block as usize].phis[i].origin;
            let dest = self.fresh_def(origin);
            pushed.push(origin);
            self.f.blocks[block as usize].phis[i].dest = dest;
        }

        let instr_count = self.f.blocks[block as usize].instrs.len();
        for i in 0..instr_count {
            let mut instr = self.f.blocks[block as usize].instrs[i].clone();
            match &mut instr {
                Instr::Binary { lhs, rhs, .. } => {
                    self.rewrite_operand(lhs);
                    self.rewrite_operand(rhs);
                }
                Instr::LoadWord { base, index, .. } => {
                    if let MemBase::Operand(b) = base {
                        self.rewrite_operand(b);
                    }
                    self.rewrite_operand(index);
                }
                Instr::StoreWord { base, index, value } => {
                    if let MemBase::Operand(b) = base {
                        self.rewrite_operand(b);
                    }
                    self.rewrite_operand(index);
                    self.rewrite_operand(value);
                }
                Instr::Move { src, .. } => self.rewrite_operand(src),
                Instr::CallInternal { args, .. } | Instr::CallVm { args, .. } => {
                    for arg in args {
                        self.rewrite_operand(arg);
                    }
                }
                Instr::ArgSlotRead { .. } => {}
            }
            if let Some(origin) = instr.dest() {
                let new = self.fresh_def(origin);
                pushed.push(origin);
                match &mut instr {
                    Instr::Binary { dest, .. }
                    | Instr::LoadWord { dest, .. }
                    | Instr::Move { dest, .. }
                    | Instr::CallInternal { dest, .. }
                    | Instr::CallVm { dest, .. }
                    | Instr::ArgSlotRead { dest, .. } => *dest = new,
                    Instr::StoreWord { .. } => unreachable!(),
                }
            }
            self.f.blocks[block as usize].instrs[i] = instr;
        }

        let mut terminator = self.f.blocks[block as usize].terminator.clone();
        match &mut terminator {
            Terminator::Jump(_) => {}
            Terminator::BranchIf { cond, .. } => self.rewrite_operand(cond),
            Terminator::Ret(op) => self.rewrite_operand(op),
        }
        self.f.blocks[block as usize].terminator = terminator;

        // fill phi sources in successors with the versions live on this edge
        for succ in self.f.blocks[block as usize].terminator.successors() {
            let phi_count = self.f.blocks[succ as usize].phis.len();
            for i in 0..phi_count {
                let origin = self.f.blocks[succ as usize].phis[i].origin;
                let version = self.current(origin);
                for source in &mut self.f.blocks[succ as usize].phis[i].sources {
                    if source.0 == block {
                        source.1 = version;
                    }
                }
            }
        }

        for &child in &self.children[block as usize] {
            self.walk(child);
        }

        for origin in pushed {
            self.stacks.get_mut(&origin).map(|s| s.pop());
        }
    }
}
