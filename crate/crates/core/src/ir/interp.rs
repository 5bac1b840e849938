//! IR interpreter. Runs both TAC and SSA forms and serves as the semantic
//! oracle for the native backend.

use super::*;
use thiserror::Error;

pub const DEFAULT_STEP_BUDGET: u64 = 100_000_000;

/// Call-depth ceiling; runaway recursion hits this long before the step
/// budget would unwind the host stack.
const MAX_CALL_DEPTH: u32 = 512;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum IrEvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("no implementation for VM function @{0}")]
    UnresolvedVmFunction(String),
    #[error("step budget exceeded")]
    StepBudgetExceeded,
    #[error("symbol @{0} is not resolvable")]
    UnresolvedSymbol(String),
    #[error("internal call target #{0} not supplied")]
    UnknownInternal(String),
    #[error("argument count mismatch: function takes {expected}, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("VM function @{function} failed: {message}")]
    VmFault { function: String, message: String },
}

/// Execution environment: VM-function implementations, internal call
/// targets and the addresses behind symbolic memory bases.
pub trait SymbolEnv {
    fn call_vm(&mut self, name: &str, args: &[u64]) -> Result<u64, IrEvalError>;
    fn internal(&self, name: &str) -> Option<&IrFunction>;
    fn resolve_symbol(&self, name: &str) -> Option<u64>;
}

/// Environment with nothing in it; enough for self-contained functions.
pub struct EmptyEnv;

impl SymbolEnv for EmptyEnv {
    fn call_vm(&mut self, name: &str, _args: &[u64]) -> Result<u64, IrEvalError> {
        Err(IrEvalError::UnresolvedVmFunction(name.to_string()))
    }
    fn internal(&self, _name: &str) -> Option<&IrFunction> {
        None
    }
    fn resolve_symbol(&self, _name: &str) -> Option<u64> {
        None
    }
}

pub fn interpret_ir(
    f: &IrFunction,
    args: &[u64],
    env: &mut dyn SymbolEnv,
    budget: u64,
) -> Result<u64, IrEvalError> {
    let mut steps = budget;
    eval(f, args, env, &mut steps, 0)
}

fn eval(
    f: &IrFunction,
    args: &[u64],
    env: &mut dyn SymbolEnv,
    steps: &mut u64,
    depth: u32,
) -> Result<u64, IrEvalError> {
    if args.len() != f.params.len() {
        return Err(IrEvalError::ArityMismatch {
            expected: f.params.len(),
            found: args.len(),
        });
    }
    if depth > MAX_CALL_DEPTH {
        return Err(IrEvalError::StepBudgetExceeded);
    }
    let mut regs = vec![0u64; f.vreg_count as usize];
    for (&p, &a) in f.params.iter().zip(args.iter()) {
        regs[p as usize] = a;
    }
    let mut block = 0 as BlockId;
    let mut prev: Option<BlockId> = None;
    loop {
        let bb = f.block(block);
        if let Some(from) = prev {
            // phis are a parallel assignment on block entry
            let values: Vec<(Vreg, u64)> = bb
                .phis
                .iter()
                .map(|phi| {
                    let source = phi
                        .sources
                        .iter()
                        .find(|(p, _)| *p == from)
                        .map(|(_, v)| regs[*v as usize])
                        .unwrap_or(0);
                    (phi.dest, source)
                })
                .collect();
            for (dest, value) in values {
                regs[dest as usize] = value;
            }
        }
        for instr in &bb.instrs {
            *steps = steps.checked_sub(1).ok_or(IrEvalError::StepBudgetExceeded)?;
            step(f, instr, &mut regs, env, steps, depth)?;
        }
        *steps = steps.checked_sub(1).ok_or(IrEvalError::StepBudgetExceeded)?;
        match &bb.terminator {
            Terminator::Jump(next) => {
                prev = Some(block);
                block = *next;
            }
            Terminator::BranchIf { cond, then_block, else_block } => {
                let taken = read(&regs, *cond) != 0;
                prev = Some(block);
                block = if taken { *then_block } else { *else_block };
            }
            Terminator::Ret(op) => return Ok(read(&regs, *op)),
        }
    }
}

fn read(regs: &[u64], op: Operand) -> u64 {
    match op {
        Operand::Vreg(v) => regs[v as usize],
        Operand::Imm(v) => v as u64,
    }
}

fn mem_address(
    base: &MemBase,
    index: Operand,
    regs: &[u64],
    env: &dyn SymbolEnv,
) -> Result<u64, IrEvalError> {
    let base_addr = match base {
        MemBase::Operand(op) => read(regs, *op),
        MemBase::Symbol(name) => env
            .resolve_symbol(name)
            .ok_or_else(|| IrEvalError::UnresolvedSymbol(name.clone()))?,
    };
    Ok(base_addr.wrapping_add(read(regs, index).wrapping_mul(8)))
}

fn step(
    f: &IrFunction,
    instr: &Instr,
    regs: &mut [u64],
    env: &mut dyn SymbolEnv,
    steps: &mut u64,
    depth: u32,
) -> Result<(), IrEvalError> {
    match instr {
        Instr::Binary { op, dest, lhs, rhs, signed } => {
            let a = read(regs, *lhs);
            let b = read(regs, *rhs);
            regs[*dest as usize] = binary_op(*op, a, b, *signed)?;
        }
        Instr::LoadWord { dest, base, index } => {
            let addr = mem_address(base, *index, regs, env)?;
            // same raw access the native code performs
            regs[*dest as usize] = unsafe { std::ptr::read(addr as *const u64) };
        }
        Instr::StoreWord { base, index, value } => {
            let addr = mem_address(base, *index, regs, env)?;
            let v = read(regs, *value);
            unsafe { std::ptr::write(addr as *mut u64, v) };
        }
        Instr::Move { dest, src } => {
            regs[*dest as usize] = read(regs, *src);
        }
        Instr::CallInternal { dest, target, args } => {
            let callee = env
                .internal(target)
                .ok_or_else(|| IrEvalError::UnknownInternal(target.clone()))?
                .clone();
            let arg_values: Vec<u64> = args.iter().map(|a| read(regs, *a)).collect();
            regs[*dest as usize] = eval(&callee, &arg_values, env, steps, depth + 1)?;
        }
        Instr::CallVm { dest, function, args } => {
            let arg_values: Vec<u64> = args.iter().map(|a| read(regs, *a)).collect();
            regs[*dest as usize] = env.call_vm(function, &arg_values)?;
        }
        Instr::ArgSlotRead { dest, index } => {
            let base = env
                .resolve_symbol(crate::runtime::ARG_SLOT_SYMBOL)
                .ok_or_else(|| {
                    IrEvalError::UnresolvedSymbol(crate::runtime::ARG_SLOT_SYMBOL.to_string())
                })?;
            let addr = base + crate::runtime::ArgSlotLayout::argument_offset(*index);
            regs[*dest as usize] = unsafe { std::ptr::read(addr as *const u64) };
        }
    }
    let _ = f;
    Ok(())
}

pub(crate) fn binary_op(op: BinOp, a: u64, b: u64, signed: bool) -> Result<u64, IrEvalError> {
    let sa = a as i64;
    let sb = b as i64;
    Ok(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div => {
            if b == 0 {
                return Err(IrEvalError::DivisionByZero);
            }
            sa.wrapping_div(sb) as u64
        }
        BinOp::Mod => {
            if b == 0 {
                return Err(IrEvalError::DivisionByZero);
            }
            sa.wrapping_rem(sb) as u64
        }
        BinOp::Band => a & b,
        BinOp::Bor => a | b,
        BinOp::Bxor => a ^ b,
        // shift counts take the low six bits, as the hardware does
        BinOp::Shl => a.wrapping_shl(b as u32 & 63),
        BinOp::Shr => {
            if signed {
                (sa >> (b & 63)) as u64
            } else {
                a >> (b & 63)
            }
        }
        BinOp::CmpEq => (a == b) as u64,
        BinOp::CmpLt => (sa < sb) as u64,
        BinOp::CmpLe => (sa <= sb) as u64,
    })
}
