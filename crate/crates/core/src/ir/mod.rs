//! Three-address-code IR with an SSA pass layered on top.
//!
//! Lowering produces TAC: virtual registers may be assigned more than once
//! (source variables keep a fixed register). `to_ssa` renames registers and
//! inserts phi nodes so every register has exactly one definition. Memory
//! (`load_word`/`store_word`) is never in SSA form.

pub mod chain;
pub mod interp;
pub mod lower;
pub mod ssa;

pub use chain::{ConverterChain, Repr, ReprKind, StageError};
pub use interp::{interpret_ir, IrEvalError, SymbolEnv, DEFAULT_STEP_BUDGET};
pub use lower::{lower, LowerEnv, LowerError};
pub use ssa::to_ssa;

use std::collections::BTreeSet;
use std::fmt;

pub type Vreg = u32;
pub type BlockId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    Vreg(Vreg),
    Imm(i64),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Vreg(v) => write!(f, "%{v}"),
            Operand::Imm(v) => write!(f, "{v}"),
        }
    }
}

/// Base address of a memory operation: a register/immediate or a runtime
/// symbol (VM global cell, pinned slot) resolved at emission time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MemBase {
    Operand(Operand),
    Symbol(String),
}

impl fmt::Display for MemBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemBase::Operand(op) => write!(f, "{op}"),
            MemBase::Symbol(name) => write!(f, "@{name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Band,
    Bor,
    Bxor,
    Shl,
    Shr,
    CmpEq,
    CmpLt,
    CmpLe,
}

impl BinOp {
    pub fn mnemonic(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Mod => "mod",
            BinOp::Band => "band",
            BinOp::Bor => "bor",
            BinOp::Bxor => "bxor",
            BinOp::Shl => "shl",
            BinOp::Shr => "shr",
            BinOp::CmpEq => "cmp_eq",
            BinOp::CmpLt => "cmp_lt",
            BinOp::CmpLe => "cmp_le",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Binary {
        op: BinOp,
        dest: Vreg,
        lhs: Operand,
        rhs: Operand,
        /// Arithmetic (sign-propagating) right shift when true; set from
        /// the shifted variable's declared type. Ignored by other opcodes.
        signed: bool,
    },
    LoadWord {
        dest: Vreg,
        base: MemBase,
        index: Operand,
    },
    StoreWord {
        base: MemBase,
        index: Operand,
        value: Operand,
    },
    Move {
        dest: Vreg,
        src: Operand,
    },
    CallInternal {
        dest: Vreg,
        target: String,
        /// Receiver first, then the declared arguments.
        args: Vec<Operand>,
    },
    CallVm {
        dest: Vreg,
        function: String,
        args: Vec<Operand>,
    },
    ArgSlotRead {
        dest: Vreg,
        index: u32,
    },
}

impl Instr {
    pub fn dest(&self) -> Option<Vreg> {
        match self {
            Instr::Binary { dest, .. }
            | Instr::LoadWord { dest, .. }
            | Instr::Move { dest, .. }
            | Instr::CallInternal { dest, .. }
            | Instr::CallVm { dest, .. }
            | Instr::ArgSlotRead { dest, .. } => Some(*dest),
            Instr::StoreWord { .. } => None,
        }
    }

    pub fn operands(&self) -> Vec<Operand> {
        match self {
            Instr::Binary { lhs, rhs, .. } => vec![*lhs, *rhs],
            Instr::LoadWord { base, index, .. } => {
                let mut ops = Vec::new();
                if let MemBase::Operand(b) = base {
                    ops.push(*b);
                }
                ops.push(*index);
                ops
            }
            Instr::StoreWord { base, index, value } => {
                let mut ops = Vec::new();
                if let MemBase::Operand(b) = base {
                    ops.push(*b);
                }
                ops.push(*index);
                ops.push(*value);
                ops
            }
            Instr::Move { src, .. } => vec![*src],
            Instr::CallInternal { args, .. } | Instr::CallVm { args, .. } => args.clone(),
            Instr::ArgSlotRead { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Jump(BlockId),
    BranchIf {
        cond: Operand,
        then_block: BlockId,
        else_block: BlockId,
    },
    Ret(Operand),
}

impl Terminator {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Terminator::Jump(b) => vec![*b],
            Terminator::BranchIf { then_block, else_block, .. } => vec![*then_block, *else_block],
            Terminator::Ret(_) => Vec::new(),
        }
    }
}

/// SSA join: `dest` receives the value of `vreg` when control arrives from
/// `pred`. `origin` is the pre-SSA register the phi reconciles; it exists
/// so structural checks can compare placement against an oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phi {
    pub dest: Vreg,
    pub sources: Vec<(BlockId, Vreg)>,
    pub origin: Vreg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: BlockId,
    pub phis: Vec<Phi>,
    pub instrs: Vec<Instr>,
    pub terminator: Terminator,
}

/// Lexical scope structure of the source variables; used for frame layout
/// and the parent-chain resolution of block-local reads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScopeTree {
    pub scopes: Vec<Scope>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scope {
    pub parent: Option<usize>,
    pub vars: Vec<(String, Vreg)>,
}

impl ScopeTree {
    /// Resolve `name` starting at `scope`, returning the register and the
    /// number of parent hops taken.
    pub fn resolve(&self, scope: usize, name: &str) -> Option<(Vreg, usize)> {
        let mut hops = 0;
        let mut idx = Some(scope);
        while let Some(i) = idx {
            if let Some((_, vreg)) = self.scopes[i].vars.iter().find(|(n, _)| n == name) {
                return Some((*vreg, hops));
            }
            idx = self.scopes[i].parent;
            hops += 1;
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrForm {
    Tac,
    Ssa,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrFunction {
    pub name: String,
    /// Register 0 is the implicit receiver, then the declared parameters.
    pub params: Vec<Vreg>,
    pub blocks: Vec<BasicBlock>,
    pub vreg_count: u32,
    /// Count of source variables; a lower bound on stack words needed.
    pub frame_hint: u32,
    pub scopes: ScopeTree,
    pub form: IrForm,
}

impl IrFunction {
    pub fn block(&self, id: BlockId) -> &BasicBlock {
        &self.blocks[id as usize]
    }

    /// Predecessors of every block, in block order.
    pub fn predecessors(&self) -> Vec<Vec<BlockId>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for block in &self.blocks {
            for succ in block.terminator.successors() {
                preds[succ as usize].push(block.id);
            }
        }
        preds
    }

    /// Registers with more than one definition (params count as one).
    /// Empty on well-formed SSA.
    pub fn multiple_definition_vregs(&self) -> Vec<Vreg> {
        let mut defs = vec![0u32; self.vreg_count as usize];
        for &p in &self.params {
            defs[p as usize] += 1;
        }
        for block in &self.blocks {
            for phi in &block.phis {
                defs[phi.dest as usize] += 1;
            }
            for instr in &block.instrs {
                if let Some(d) = instr.dest() {
                    defs[d as usize] += 1;
                }
            }
        }
        (0..self.vreg_count).filter(|&v| defs[v as usize] > 1).collect()
    }

    /// Blocks not reachable from the entry block.
    pub fn unreachable_blocks(&self) -> BTreeSet<BlockId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![0u32];
        while let Some(b) = stack.pop() {
            if seen.insert(b) {
                stack.extend(self.block(b).terminator.successors());
            }
        }
        self.blocks.iter().map(|b| b.id).filter(|id| !seen.contains(id)).collect()
    }

    /// Textual dump, one instruction per line (the `dump-ir` format).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let params: Vec<String> = self.params.iter().map(|p| format!("%{p}")).collect();
        out.push_str(&format!("func {} ({})\n", self.name, params.join(" ")));
        for block in &self.blocks {
            out.push_str(&format!("L{}:\n", block.id));
            for phi in &block.phis {
                let sources: Vec<String> =
                    phi.sources.iter().map(|(b, v)| format!("[L{b} %{v}]")).collect();
                out.push_str(&format!("  %{} = phi {}\n", phi.dest, sources.join(" ")));
            }
            for instr in &block.instrs {
                out.push_str("  ");
                out.push_str(&dump_instr(instr));
                out.push('\n');
            }
            out.push_str("  ");
            out.push_str(&match &block.terminator {
                Terminator::Jump(b) => format!("jump L{b}"),
                Terminator::BranchIf { cond, then_block, else_block } => {
                    format!("branch_if {cond} L{then_block} L{else_block}")
                }
                Terminator::Ret(op) => format!("ret {op}"),
            });
            out.push('\n');
        }
        out
    }
}

fn dump_instr(instr: &Instr) -> String {
    match instr {
        Instr::Binary { op, dest, lhs, rhs, signed } => {
            let suffix = if *signed && matches!(op, BinOp::Shr) { ".s" } else { "" };
            format!("%{dest} = {}{suffix} {lhs} {rhs}", op.mnemonic())
        }
        Instr::LoadWord { dest, base, index } => format!("%{dest} = load_word {base} {index}"),
        Instr::StoreWord { base, index, value } => format!("store_word {base} {index} {value}"),
        Instr::Move { dest, src } => format!("%{dest} = move {src}"),
        Instr::CallInternal { dest, target, args } => {
            let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            format!("%{dest} = call_internal #{target} {}", args.join(" "))
        }
        Instr::CallVm { dest, function, args } => {
            let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            format!("%{dest} = call_vm @{function} {}", args.join(" "))
        }
        Instr::ArgSlotRead { dest, index } => format!("%{dest} = arg_slot_read {index}"),
    }
}
