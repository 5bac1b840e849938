//! SSA-to-x86-64 emission.
//!
//! Every virtual register lives in a frame slot; templates compute through
//! rax/rcx/rdx. Phi nodes are destructed into parallel copies on the
//! incoming edges (critical edges are split first). Two calling conventions
//! are emitted: internal calls push the receiver below the declared
//! arguments, VM calls follow the System-V C convention with a dynamically
//! realigned stack.
//!
//! The artifact layout is: activation shim at offset 0, then the entry
//! body, then every callee body. The shim reads the receiver and arguments
//! out of the pinned argument slot and forwards them through the internal
//! convention, so the whole artifact is activated as a plain
//! `extern "C" fn() -> u64`.

use super::asm::{Asm, Cond, Reg, SYSV_ARG_REGS};
use super::frame::FrameContext;
use super::{
    placeholder_word, CodegenError, NativeArtifact, PrimitiveTemplate, RelocKind, Relocation,
    TemplateOperand, PRIMITIVE_FAILURE_WORD,
};
use crate::ir::{BinOp, BlockId, Instr, IrForm, IrFunction, MemBase, Operand, Terminator, Vreg};
use crate::runtime::{ArgSlotLayout, ARG_SLOT_SYMBOL};
use crate::selectors::TemplateKind;

/// Receiver of an internal call, relative to the callee's frame pointer.
const RECEIVER_DISP: i32 = 16;
/// First declared argument; the receiver sits below it.
const FIRST_ARG_DISP: i32 = 24;

pub fn emit_native(
    f: &IrFunction,
    ctx: &FrameContext,
    resolve: &dyn Fn(&str) -> Option<u64>,
) -> Result<NativeArtifact, CodegenError> {
    let mut artifact = emit_artifact(&[(f.clone(), ctx.clone())], 0)?;
    apply_relocations(&mut artifact, resolve)?;
    Ok(artifact)
}

/// Emit one artifact holding every function of a closed call set.
/// `entry_index` selects the function the activation shim forwards to.
pub fn emit_artifact(
    functions: &[(IrFunction, FrameContext)],
    entry_index: usize,
) -> Result<NativeArtifact, CodegenError> {
    for (f, _) in functions {
        if f.form != IrForm::Ssa {
            return Err(CodegenError::NotInSsaForm);
        }
    }
    let entry = &functions[entry_index].0;
    let mut e = Emitter {
        asm: Asm::new(),
        relocations: Vec::new(),
        internal_fixups: Vec::new(),
        function_offsets: Vec::new(),
    };

    e.emit_shim(&entry.name, entry.params.len() - 1);
    let order: Vec<usize> = std::iter::once(entry_index)
        .chain((0..functions.len()).filter(|&i| i != entry_index))
        .collect();
    for i in order {
        let (f, ctx) = &functions[i];
        e.emit_function(f, ctx)?;
    }

    // intra-artifact calls become resolved pc-relative records
    let fixups = std::mem::take(&mut e.internal_fixups);
    for (at, target) in fixups {
        let offset = e
            .function_offsets
            .iter()
            .find(|(name, _)| *name == target)
            .map(|(_, off)| *off)
            .ok_or_else(|| CodegenError::UnresolvedSymbol(target.clone()))?;
        e.asm.patch_rel32(at, offset);
        e.relocations.push(Relocation {
            offset: at,
            symbol: target,
            kind: RelocKind::Relative32,
            patched: true,
        });
    }

    let (code, listing) = e.asm.into_parts();
    Ok(NativeArtifact {
        selector: entry.name.clone(),
        code,
        entry_offset: 0,
        relocations: e.relocations,
        frame_words: functions[entry_index].1.frame_words,
        functions: e.function_offsets,
        listing,
    })
}

/// Patch every absolute64 record against the resolver. Relocation is
/// placement-independent: the patched immediates are absolute addresses
/// and pc-relative records only reference the artifact itself.
pub fn apply_relocations(
    artifact: &mut NativeArtifact,
    resolve: &dyn Fn(&str) -> Option<u64>,
) -> Result<(), CodegenError> {
    for reloc in &mut artifact.relocations {
        if reloc.patched || reloc.kind != RelocKind::Absolute64 {
            continue;
        }
        let address = resolve(&reloc.symbol)
            .ok_or_else(|| CodegenError::UnresolvedSymbol(reloc.symbol.clone()))?;
        artifact.code[reloc.offset..reloc.offset + 8].copy_from_slice(&address.to_le_bytes());
        reloc.patched = true;
    }
    Ok(())
}

struct Emitter {
    asm: Asm,
    relocations: Vec<Relocation>,
    internal_fixups: Vec<(usize, String)>,
    function_offsets: Vec<(String, usize)>,
}

impl Emitter {
    fn label(&mut self, text: &str) {
        self.asm.note(&format!("{text}:"));
    }

    fn reloc_movabs(&mut self, reg: Reg, symbol: &str) {
        let at = self.asm.mov_reg_imm64(reg, placeholder_word(), &format!("@{symbol}"));
        self.relocations.push(Relocation {
            offset: at,
            symbol: symbol.to_string(),
            kind: RelocKind::Absolute64,
            patched: false,
        });
    }

    fn emit_shim(&mut self, entry: &str, arg_count: usize) {
        self.label(&format!("shim ${entry}"));
        self.asm.push_reg(Reg::Rbp);
        self.asm.mov_reg_reg(Reg::Rbp, Reg::Rsp);
        for i in (0..arg_count).rev() {
            self.reloc_movabs(Reg::Rax, ARG_SLOT_SYMBOL);
            self.asm
                .mov_reg_mem(Reg::Rax, Reg::Rax, ArgSlotLayout::argument_offset(i as u32) as i32);
            self.asm.push_reg(Reg::Rax);
        }
        self.reloc_movabs(Reg::Rax, ARG_SLOT_SYMBOL);
        self.asm.mov_reg_mem(Reg::Rax, Reg::Rax, ArgSlotLayout::RECEIVER_OFFSET as i32);
        self.asm.push_reg(Reg::Rax);
        let at = self.asm.call_rel32(&format!("${entry}"));
        self.internal_fixups.push((at, entry.to_string()));
        self.asm.add_rsp_imm32(8 * (arg_count as i32 + 1));
        self.asm.pop_reg(Reg::Rbp);
        self.asm.ret();
    }

    fn emit_function(&mut self, f: &IrFunction, ctx: &FrameContext) -> Result<(), CodegenError> {
        let flat = flatten(f);
        self.function_offsets.push((f.name.clone(), self.asm.len()));
        self.label(&format!("${}", f.name));

        self.asm.push_reg(Reg::Rbp);
        self.asm.mov_reg_reg(Reg::Rbp, Reg::Rsp);
        self.asm.sub_rsp_imm32(ctx.frame_bytes());
        // zero every slot so undefined reads match the interpreter
        for slot in 0..ctx.vreg_slots {
            self.asm.mov_mem_imm32(Reg::Rbp, ctx.slot_disp(slot), 0);
        }
        for (j, &p) in f.params.iter().enumerate() {
            let src = if j == 0 { RECEIVER_DISP } else { FIRST_ARG_DISP + 8 * (j as i32 - 1) };
            self.asm.mov_reg_mem(Reg::Rax, Reg::Rbp, src);
            self.asm.mov_mem_reg(Reg::Rbp, ctx.slot_disp(p), Reg::Rax);
        }

        let mut block_offsets: Vec<usize> = Vec::with_capacity(flat.blocks.len());
        let mut jump_fixups: Vec<(usize, BlockId)> = Vec::new();
        let mut fail_fixups: Vec<usize> = Vec::new();

        for (id, block) in flat.blocks.iter().enumerate() {
            block_offsets.push(self.asm.len());
            self.label(&format!("L{id}"));
            self.parallel_copy(&block.head_moves, ctx);
            for instr in &block.instrs {
                self.instr(instr, ctx, &mut fail_fixups)?;
            }
            self.parallel_copy(&block.tail_moves, ctx);
            match &block.terminator {
                Terminator::Jump(b) => {
                    let at = self.asm.jmp_rel32(&format!("L{b}"));
                    jump_fixups.push((at, *b));
                }
                Terminator::BranchIf { cond, then_block, else_block } => {
                    self.load_operand(Reg::Rax, *cond, ctx);
                    self.asm.test_reg_reg(Reg::Rax, Reg::Rax);
                    let at = self.asm.jcc_rel32(Cond::Ne, &format!("L{then_block}"));
                    jump_fixups.push((at, *then_block));
                    let at = self.asm.jmp_rel32(&format!("L{else_block}"));
                    jump_fixups.push((at, *else_block));
                }
                Terminator::Ret(op) => {
                    self.load_operand(Reg::Rax, *op, ctx);
                    self.epilogue();
                }
            }
        }

        // the shared primitive-failure exit
        let fail_offset = self.asm.len();
        self.label("fail");
        self.asm.mov_reg_imm64(Reg::Rax, PRIMITIVE_FAILURE_WORD, "FAILURE");
        self.epilogue();

        for (at, block) in jump_fixups {
            self.asm.patch_rel32(at, block_offsets[block as usize]);
        }
        for at in fail_fixups {
            self.asm.patch_rel32(at, fail_offset);
        }
        Ok(())
    }

    fn epilogue(&mut self) {
        self.asm.mov_reg_reg(Reg::Rsp, Reg::Rbp);
        self.asm.pop_reg(Reg::Rbp);
        self.asm.ret();
    }

    fn load_operand(&mut self, reg: Reg, op: Operand, ctx: &FrameContext) {
        match op {
            Operand::Vreg(v) => self.asm.mov_reg_mem(reg, Reg::Rbp, ctx.slot_disp(v)),
            Operand::Imm(v) => self.asm.mov_reg_imm(reg, v),
        }
    }

    fn store_rax(&mut self, dest: Vreg, ctx: &FrameContext) {
        self.asm.mov_mem_reg(Reg::Rbp, ctx.slot_disp(dest), Reg::Rax);
    }

    /// Parallel move: push all sources, pop into destinations in reverse.
    fn parallel_copy(&mut self, moves: &[(Vreg, Vreg)], ctx: &FrameContext) {
        if moves.is_empty() {
            return;
        }
        for (_, src) in moves {
            self.asm.mov_reg_mem(Reg::Rax, Reg::Rbp, ctx.slot_disp(*src));
            self.asm.push_reg(Reg::Rax);
        }
        for (dest, _) in moves.iter().rev() {
            self.asm.pop_reg(Reg::Rax);
            self.asm.mov_mem_reg(Reg::Rbp, ctx.slot_disp(*dest), Reg::Rax);
        }
    }

    fn mem_base_to_rax(&mut self, base: &MemBase, ctx: &FrameContext) {
        match base {
            MemBase::Operand(op) => self.load_operand(Reg::Rax, *op, ctx),
            MemBase::Symbol(name) => self.reloc_movabs(Reg::Rax, name),
        }
    }

    fn instr(
        &mut self,
        instr: &Instr,
        ctx: &FrameContext,
        fail_fixups: &mut Vec<usize>,
    ) -> Result<(), CodegenError> {
        match instr {
            Instr::Binary { op, dest, lhs, rhs, signed } => {
                self.load_operand(Reg::Rax, *lhs, ctx);
                self.load_operand(Reg::Rcx, *rhs, ctx);
                emit_binary_rax_rcx(&mut self.asm, *op, *signed, fail_fixups);
                self.store_rax(*dest, ctx);
            }
            Instr::LoadWord { dest, base, index } => {
                self.mem_base_to_rax(base, ctx);
                match index {
                    Operand::Imm(i) => {
                        self.asm.mov_reg_mem(Reg::Rax, Reg::Rax, (*i as i32) * 8);
                    }
                    Operand::Vreg(_) => {
                        self.load_operand(Reg::Rcx, *index, ctx);
                        self.asm.mov_reg_mem_indexed(Reg::Rax, Reg::Rax, Reg::Rcx);
                    }
                }
                self.store_rax(*dest, ctx);
            }
            Instr::StoreWord { base, index, value } => {
                self.mem_base_to_rax(base, ctx);
                self.load_operand(Reg::Rdx, *value, ctx);
                match index {
                    Operand::Imm(i) => {
                        self.asm.mov_mem_reg(Reg::Rax, (*i as i32) * 8, Reg::Rdx);
                    }
                    Operand::Vreg(_) => {
                        self.load_operand(Reg::Rcx, *index, ctx);
                        self.asm.mov_mem_indexed_reg(Reg::Rax, Reg::Rcx, Reg::Rdx);
                    }
                }
            }
            Instr::Move { dest, src } => {
                self.load_operand(Reg::Rax, *src, ctx);
                self.store_rax(*dest, ctx);
            }
            Instr::CallInternal { dest, target, args } => {
                for op in args.iter().skip(1).rev() {
                    self.load_operand(Reg::Rax, *op, ctx);
                    self.asm.push_reg(Reg::Rax);
                }
                self.load_operand(Reg::Rax, args[0], ctx);
                self.asm.push_reg(Reg::Rax);
                let at = self.asm.call_rel32(&format!("${target}"));
                self.internal_fixups.push((at, target.clone()));
                self.asm.add_rsp_imm32(8 * args.len() as i32);
                // a failing callee unwinds the whole activation
                self.asm.mov_reg_imm64(Reg::Rcx, PRIMITIVE_FAILURE_WORD, "FAILURE");
                self.asm.cmp_reg_reg(Reg::Rax, Reg::Rcx);
                fail_fixups.push(self.asm.jcc_rel32(Cond::Eq, "fail"));
                self.store_rax(*dest, ctx);
            }
            Instr::CallVm { dest, function, args } => {
                if args.len() > SYSV_ARG_REGS.len() {
                    return Err(CodegenError::UnsupportedInstr(format!(
                        "VM call @{function} with {} arguments",
                        args.len()
                    )));
                }
                for (i, op) in args.iter().enumerate() {
                    self.load_operand(SYSV_ARG_REGS[i], *op, ctx);
                }
                // realign for the C convention, saving rsp in the scratch
                self.asm.mov_reg_reg(Reg::R10, Reg::Rsp);
                self.asm.and_rsp_imm8(-16);
                self.asm.sub_rsp_imm32(16);
                self.asm.mov_mem_reg(Reg::Rsp, 0, Reg::R10);
                self.reloc_movabs(Reg::Rax, function);
                self.asm.call_reg(Reg::Rax);
                self.asm.mov_reg_mem(Reg::Rsp, Reg::Rsp, 0);
                self.store_rax(*dest, ctx);
            }
            Instr::ArgSlotRead { dest, index } => {
                self.reloc_movabs(Reg::Rax, ARG_SLOT_SYMBOL);
                self.asm
                    .mov_reg_mem(Reg::Rax, Reg::Rax, ArgSlotLayout::argument_offset(*index) as i32);
                self.store_rax(*dest, ctx);
            }
        }
        Ok(())
    }
}

/// Compute `rax <- rax OP rcx`. Division and modulo branch to the
/// function's failure exit on a zero divisor; the `INT_MIN / -1` overflow
/// case is fixed up to the wrapping result instead of faulting.
fn emit_binary_rax_rcx(asm: &mut Asm, op: BinOp, signed: bool, fail_fixups: &mut Vec<usize>) {
    match op {
        BinOp::Add => asm.add_reg_reg(Reg::Rax, Reg::Rcx),
        BinOp::Sub => asm.sub_reg_reg(Reg::Rax, Reg::Rcx),
        BinOp::Mul => asm.imul_reg_reg(Reg::Rax, Reg::Rcx),
        BinOp::Band => asm.and_reg_reg(Reg::Rax, Reg::Rcx),
        BinOp::Bor => asm.or_reg_reg(Reg::Rax, Reg::Rcx),
        BinOp::Bxor => asm.xor_reg_reg(Reg::Rax, Reg::Rcx),
        BinOp::Shl => asm.shl_cl(Reg::Rax),
        BinOp::Shr => {
            if signed {
                asm.sar_cl(Reg::Rax)
            } else {
                asm.shr_cl(Reg::Rax)
            }
        }
        BinOp::CmpEq => {
            asm.cmp_reg_reg(Reg::Rax, Reg::Rcx);
            asm.setcc_rax(Cond::Eq);
        }
        BinOp::CmpLt => {
            asm.cmp_reg_reg(Reg::Rax, Reg::Rcx);
            asm.setcc_rax(Cond::Lt);
        }
        BinOp::CmpLe => {
            asm.cmp_reg_reg(Reg::Rax, Reg::Rcx);
            asm.setcc_rax(Cond::Le);
        }
        BinOp::Div | BinOp::Mod => {
            asm.test_reg_reg(Reg::Rcx, Reg::Rcx);
            fail_fixups.push(asm.jcc_rel32(Cond::Eq, "fail"));
            asm.cmp_reg_imm8(Reg::Rcx, -1);
            let not_minus_one = asm.jcc_rel32(Cond::Ne, "divide");
            asm.mov_reg_imm64(Reg::Rdx, i64::MIN as u64, "INT_MIN");
            asm.cmp_reg_reg(Reg::Rax, Reg::Rdx);
            let no_overflow = asm.jcc_rel32(Cond::Ne, "divide");
            // wrapping result: MIN for division, 0 for modulo
            if matches!(op, BinOp::Mod) {
                asm.mov_reg_imm(Reg::Rax, 0);
            }
            let done = asm.jmp_rel32("div_done");
            let divide = asm.len();
            asm.patch_rel32(not_minus_one, divide);
            asm.patch_rel32(no_overflow, divide);
            asm.cqo();
            asm.idiv_reg(Reg::Rcx);
            if matches!(op, BinOp::Mod) {
                asm.mov_reg_reg(Reg::Rax, Reg::Rdx);
            }
            let after = asm.len();
            asm.patch_rel32(done, after);
        }
    }
}

/// Standalone expansion of one template: computes into rax from the given
/// operands. The produced sequence is self-contained, with no relocations
/// and no external calls.
pub fn inline_template(
    template: &PrimitiveTemplate,
    operands: &[TemplateOperand],
) -> Result<Vec<u8>, CodegenError> {
    if operands.len() != template.operand_count() {
        return Err(CodegenError::ArityMismatch {
            expected: template.operand_count(),
            found: operands.len(),
        });
    }
    if template.kind == TemplateKind::StackAt {
        return Err(CodegenError::UnsupportedInstr(
            "stackAt: requires the pinned-slot symbol".to_string(),
        ));
    }
    let mut asm = Asm::new();
    let load = |asm: &mut Asm, reg: Reg, op: TemplateOperand| match op {
        TemplateOperand::Slot(slot) => {
            asm.mov_reg_mem(reg, Reg::Rbp, -8 * (slot as i32 + 1));
        }
        TemplateOperand::Imm(v) => asm.mov_reg_imm(reg, v),
    };
    let mut fail_fixups = Vec::new();
    match template.kind {
        TemplateKind::WordAt => {
            load(&mut asm, Reg::Rax, operands[0]);
            load(&mut asm, Reg::Rcx, operands[1]);
            asm.mov_reg_mem_indexed(Reg::Rax, Reg::Rax, Reg::Rcx);
        }
        TemplateKind::WordAtPut => {
            load(&mut asm, Reg::Rax, operands[0]);
            load(&mut asm, Reg::Rcx, operands[1]);
            load(&mut asm, Reg::Rdx, operands[2]);
            asm.mov_mem_indexed_reg(Reg::Rax, Reg::Rcx, Reg::Rdx);
            asm.mov_reg_reg(Reg::Rax, Reg::Rdx);
        }
        kind => {
            load(&mut asm, Reg::Rax, operands[0]);
            let (op, signed, negate) = match kind {
                TemplateKind::Add => (BinOp::Add, false, false),
                TemplateKind::Sub => (BinOp::Sub, false, false),
                TemplateKind::Mul => (BinOp::Mul, false, false),
                TemplateKind::Div => (BinOp::Div, true, false),
                TemplateKind::Mod => (BinOp::Mod, true, false),
                TemplateKind::BitAnd => (BinOp::Band, false, false),
                TemplateKind::BitOr => (BinOp::Bor, false, false),
                TemplateKind::BitXor => (BinOp::Bxor, false, false),
                TemplateKind::CmpEq => (BinOp::CmpEq, true, false),
                TemplateKind::CmpLt => (BinOp::CmpLt, true, false),
                TemplateKind::CmpLe => (BinOp::CmpLe, true, false),
                TemplateKind::CmpGt | TemplateKind::CmpGe | TemplateKind::CmpNe => {
                    // swapped or negated forms of the base comparisons
                    (BinOp::CmpEq, true, true)
                }
                TemplateKind::BitShift => (BinOp::Shl, false, false),
                _ => unreachable!(),
            };
            match kind {
                TemplateKind::CmpGt => {
                    load(&mut asm, Reg::Rcx, operands[0]);
                    load(&mut asm, Reg::Rax, operands[1]);
                    emit_binary_rax_rcx(&mut asm, BinOp::CmpLt, true, &mut fail_fixups);
                }
                TemplateKind::CmpGe => {
                    load(&mut asm, Reg::Rcx, operands[0]);
                    load(&mut asm, Reg::Rax, operands[1]);
                    emit_binary_rax_rcx(&mut asm, BinOp::CmpLe, true, &mut fail_fixups);
                }
                TemplateKind::CmpNe => {
                    load(&mut asm, Reg::Rcx, operands[1]);
                    emit_binary_rax_rcx(&mut asm, BinOp::CmpEq, true, &mut fail_fixups);
                    asm.mov_reg_imm(Reg::Rcx, 1);
                    emit_binary_rax_rcx(&mut asm, BinOp::Bxor, false, &mut fail_fixups);
                }
                TemplateKind::BitShift => {
                    // negative immediate shifts become right shifts
                    match operands[1] {
                        TemplateOperand::Imm(k) if k < 0 => {
                            asm.mov_reg_imm(Reg::Rcx, -k);
                            emit_binary_rax_rcx(&mut asm, BinOp::Shr, signed, &mut fail_fixups);
                        }
                        other => {
                            load(&mut asm, Reg::Rcx, other);
                            emit_binary_rax_rcx(&mut asm, BinOp::Shl, false, &mut fail_fixups);
                        }
                    }
                }
                _ => {
                    load(&mut asm, Reg::Rcx, operands[1]);
                    emit_binary_rax_rcx(&mut asm, op, signed, &mut fail_fixups);
                }
            }
            let _ = negate;
        }
    }
    // a trailing failure stub keeps the fragment self-contained
    if !fail_fixups.is_empty() {
        let done = asm.jmp_rel32("template_end");
        let fail_at = asm.len();
        asm.mov_reg_imm64(Reg::Rax, PRIMITIVE_FAILURE_WORD, "FAILURE");
        for at in fail_fixups {
            asm.patch_rel32(at, fail_at);
        }
        let end = asm.len();
        asm.patch_rel32(done, end);
    }
    let (code, _) = asm.into_parts();
    Ok(code)
}

// ── phi destruction ─────────────────────────────────────────────────────

struct FlatBlock {
    head_moves: Vec<(Vreg, Vreg)>,
    instrs: Vec<Instr>,
    tail_moves: Vec<(Vreg, Vreg)>,
    terminator: Terminator,
}

struct FlatFunc {
    blocks: Vec<FlatBlock>,
}

/// Remove phis: split critical edges, then turn each phi-block edge into a
/// parallel copy in the predecessor (or at the head of the single-pred
/// successor).
fn flatten(f: &IrFunction) -> FlatFunc {
    let mut blocks: Vec<FlatBlock> = f
        .blocks
        .iter()
        .map(|b| FlatBlock {
            head_moves: Vec::new(),
            instrs: b.instrs.clone(),
            tail_moves: Vec::new(),
            terminator: b.terminator.clone(),
        })
        .collect();
    let preds = f.predecessors();

    for block in &f.blocks {
        if block.phis.is_empty() {
            continue;
        }
        let succ_id = block.id;
        for &pred in &preds[succ_id as usize] {
            let moves: Vec<(Vreg, Vreg)> = block
                .phis
                .iter()
                .map(|phi| {
                    let src = phi
                        .sources
                        .iter()
                        .find(|(p, _)| *p == pred)
                        .map(|(_, v)| *v)
                        .expect("phi covers every predecessor");
                    (phi.dest, src)
                })
                .collect();
            let pred_succs = f.block(pred).terminator.successors().len();
            if pred_succs == 1 {
                blocks[pred as usize].tail_moves.extend(moves);
            } else if preds[succ_id as usize].len() == 1 {
                blocks[succ_id as usize].head_moves.extend(moves);
            } else {
                // critical edge: route through a fresh block
                let edge_id = blocks.len() as BlockId;
                blocks.push(FlatBlock {
                    head_moves: Vec::new(),
                    instrs: Vec::new(),
                    tail_moves: moves,
                    terminator: Terminator::Jump(succ_id),
                });
                retarget(&mut blocks[pred as usize].terminator, succ_id, edge_id);
            }
        }
    }
    FlatFunc { blocks }
}

fn retarget(terminator: &mut Terminator, from: BlockId, to: BlockId) {
    match terminator {
        Terminator::Jump(b) => {
            if *b == from {
                *b = to;
            }
        }
        Terminator::BranchIf { then_block, else_block, .. } => {
            if *then_block == from {
                *then_block = to;
            } else if *else_block == from {
                *else_block = to;
            }
        }
        Terminator::Ret(_) => {}
    }
}
