//! AST to TAC lowering.
//!
//! Control templates (`ifTrue:ifFalse:`, `whileTrue:`, `to:do:`) expand into
//! CFG blocks with their block arguments inlined; arithmetic, bit, compare
//! and memory selectors expand into single instructions; remaining sends
//! become internal calls; the VM-call construct becomes `call_vm`.

use super::*;
use crate::frontend::{BasicType, ExprNode, Literal, MethodNode, StatementNode};
use crate::reachability::MethodTable;
use crate::selectors::{self, ControlKind, TemplateKind};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LowerError {
    #[error("send of #{selector} from #{caller} matches no method, template or VM function")]
    UnknownSelector { selector: String, caller: String },
    #[error("block used outside a control template in #{0}")]
    BlockMisuse(String),
    #[error("unknown variable '{0}' in #{1}")]
    UnknownVariable(String, String),
    #[error("VM function @{function} takes {expected} arguments, {found} supplied")]
    VmArity { function: String, expected: usize, found: usize },
    #[error("stackAt: requires a non-negative integer literal index")]
    BadStackIndex,
    #[error("#{0} is interpreter-only and cannot be nativized")]
    ReflectiveOnly(String),
    #[error("control template #{selector} requires literal block arguments")]
    NonBlockControlArg { selector: String },
}

/// Names resolvable as VM globals during lowering. The VM supplies its
/// global table; standalone tools may leave it empty.
#[derive(Debug, Clone, Default)]
pub struct LowerEnv {
    pub globals: std::collections::BTreeSet<String>,
    pub symbol_ids: BTreeMap<String, i64>,
}

impl LowerEnv {
    /// Intern a symbol literal to a stable word-sized id.
    pub fn intern(&mut self, name: &str) -> i64 {
        if let Some(&id) = self.symbol_ids.get(name) {
            return id;
        }
        let id = self.symbol_ids.len() as i64 + 1;
        self.symbol_ids.insert(name.to_string(), id);
        id
    }
}

/// Symbol naming scheme for VM global cells.
pub fn global_symbol(name: &str) -> String {
    format!("vm_global${name}")
}

pub const NIL_SYMBOL: &str = "vm_nil";

pub fn lower(
    method: &MethodNode,
    table: &MethodTable,
    env: &mut LowerEnv,
) -> Result<IrFunction, LowerError> {
    let lowerer = Lowerer {
        method,
        table,
        env,
        blocks: vec![BasicBlock {
            id: 0,
            phis: Vec::new(),
            instrs: Vec::new(),
            terminator: Terminator::Ret(Operand::Imm(0)),
        }],
        current: 0,
        terminated: false,
        next_vreg: 0,
        scopes: ScopeTree::default(),
        current_scope: 0,
    };
    lowerer.run()
}

struct Lowerer<'a> {
    method: &'a MethodNode,
    table: &'a MethodTable,
    env: &'a mut LowerEnv,
    blocks: Vec<BasicBlock>,
    current: BlockId,
    terminated: bool,
    next_vreg: Vreg,
    scopes: ScopeTree,
    current_scope: usize,
}

impl<'a> Lowerer<'a> {
    fn run(mut self) -> Result<IrFunction, LowerError> {
        // scope 0: receiver, params, temps
        let mut vars = Vec::new();
        let self_vreg = self.fresh();
        vars.push(("self".to_string(), self_vreg));
        let mut params = vec![self_vreg];
        for p in &self.method.params {
            let v = self.fresh();
            vars.push((p.clone(), v));
            params.push(v);
        }
        let mut temp_inits = Vec::new();
        for t in &self.method.temps {
            let v = self.fresh();
            vars.push((t.clone(), v));
            temp_inits.push(v);
        }
        self.scopes.scopes.push(Scope { parent: None, vars });
        for v in temp_inits {
            self.emit(Instr::Move { dest: v, src: Operand::Imm(0) });
        }

        for statement in &self.method.body {
            if self.terminated {
                break;
            }
            self.statement(statement)?;
        }
        if !self.terminated {
            // falling off the end answers the receiver
            self.terminate(Terminator::Ret(Operand::Vreg(self_vreg)));
        }
        let frame_hint = self.scopes.scopes.iter().map(|s| s.vars.len() as u32).sum();
        Ok(IrFunction {
            name: self.method.selector.clone(),
            params,
            blocks: self.blocks,
            vreg_count: self.next_vreg,
            frame_hint,
            scopes: self.scopes,
            form: IrForm::Tac,
        })
    }

    fn fresh(&mut self) -> Vreg {
        let v = self.next_vreg;
        self.next_vreg += 1;
        v
    }

    fn emit(&mut self, instr: Instr) {
        if !self.terminated {
            self.blocks[self.current as usize].instrs.push(instr);
        }
    }

    fn new_block(&mut self) -> BlockId {
        let id = self.blocks.len() as BlockId;
        self.blocks.push(BasicBlock {
            id,
            phis: Vec::new(),
            instrs: Vec::new(),
            terminator: Terminator::Ret(Operand::Imm(0)),
        });
        id
    }

    fn terminate(&mut self, terminator: Terminator) {
        if !self.terminated {
            self.blocks[self.current as usize].terminator = terminator;
            self.terminated = true;
        }
    }

    /// Switch emission to `block`; it becomes reachable via terminators
    /// already pointing at it.
    fn seal_to(&mut self, block: BlockId) {
        self.current = block;
        self.terminated = false;
    }

    fn statement(&mut self, statement: &StatementNode) -> Result<(), LowerError> {
        match statement {
            StatementNode::Assign { target, expr } => {
                let value = self.expr(expr)?;
                if let Some((vreg, _)) = self.scopes.resolve(self.current_scope, target) {
                    self.emit(Instr::Move { dest: vreg, src: value });
                    Ok(())
                } else {
                    Err(LowerError::UnknownVariable(
                        target.clone(),
                        self.method.selector.clone(),
                    ))
                }
            }
            StatementNode::Return(expr) => {
                let value = self.expr(expr)?;
                self.terminate(Terminator::Ret(value));
                Ok(())
            }
            StatementNode::Expr(expr) => {
                self.expr(expr)?;
                Ok(())
            }
        }
    }

    fn expr(&mut self, expr: &ExprNode) -> Result<Operand, LowerError> {
        match expr {
            ExprNode::Literal(lit) => Ok(self.literal(lit)),
            ExprNode::VarRef(name) => {
                if let Some((vreg, _)) = self.scopes.resolve(self.current_scope, name) {
                    Ok(Operand::Vreg(vreg))
                } else if name == "nil" {
                    Ok(self.load_symbol(NIL_SYMBOL))
                } else if self.env.globals.contains(name) {
                    Ok(self.load_symbol(&global_symbol(name)))
                } else {
                    Err(LowerError::UnknownVariable(
                        name.clone(),
                        self.method.selector.clone(),
                    ))
                }
            }
            ExprNode::Send { receiver, selector, args } => self.send(receiver, selector, args),
            ExprNode::Block { .. } => Err(LowerError::BlockMisuse(self.method.selector.clone())),
            ExprNode::VmCall { function_name, args } => {
                let expected = self.table.vm_function_arity(function_name).ok_or_else(|| {
                    LowerError::UnknownSelector {
                        selector: function_name.clone(),
                        caller: self.method.selector.clone(),
                    }
                })?;
                if args.len() != expected {
                    return Err(LowerError::VmArity {
                        function: function_name.clone(),
                        expected,
                        found: args.len(),
                    });
                }
                let mut ops = Vec::new();
                for arg in args {
                    ops.push(self.expr(arg)?);
                }
                let dest = self.fresh();
                self.emit(Instr::CallVm { dest, function: function_name.clone(), args: ops });
                Ok(Operand::Vreg(dest))
            }
        }
    }

    fn literal(&mut self, lit: &Literal) -> Operand {
        match lit {
            Literal::Integer(v) => Operand::Imm(*v),
            Literal::Character(c) => Operand::Imm(*c as i64),
            Literal::Symbol(s) => Operand::Imm(self.env.intern(s)),
            Literal::Boolean(b) => Operand::Imm(*b as i64),
            Literal::Nil => self.load_symbol(NIL_SYMBOL),
        }
    }

    fn load_symbol(&mut self, symbol: &str) -> Operand {
        let dest = self.fresh();
        self.emit(Instr::LoadWord {
            dest,
            base: MemBase::Symbol(symbol.to_string()),
            index: Operand::Imm(0),
        });
        Operand::Vreg(dest)
    }

    fn send(
        &mut self,
        receiver: &ExprNode,
        selector: &str,
        args: &[ExprNode],
    ) -> Result<Operand, LowerError> {
        if let Some(kind) = selectors::control_for(selector) {
            return self.control(kind, receiver, args);
        }
        if let Some(template) = selectors::template_for(selector) {
            return self.template(template, receiver, args);
        }
        if selectors::is_reflective_builtin(selector) {
            return Err(LowerError::ReflectiveOnly(selector.to_string()));
        }
        if self.table.method(selector).is_some() {
            let mut ops = vec![self.expr(receiver)?];
            for arg in args {
                ops.push(self.expr(arg)?);
            }
            let dest = self.fresh();
            self.emit(Instr::CallInternal { dest, target: selector.to_string(), args: ops });
            return Ok(Operand::Vreg(dest));
        }
        if self.table.has_vm_function(selector) {
            // direct-call shorthand for a selector naming a VM function
            let expected = self.table.vm_function_arity(selector).unwrap();
            if args.len() != expected {
                return Err(LowerError::VmArity {
                    function: selector.to_string(),
                    expected,
                    found: args.len(),
                });
            }
            let mut ops = Vec::new();
            for arg in args {
                ops.push(self.expr(arg)?);
            }
            let dest = self.fresh();
            self.emit(Instr::CallVm { dest, function: selector.to_string(), args: ops });
            return Ok(Operand::Vreg(dest));
        }
        Err(LowerError::UnknownSelector {
            selector: selector.to_string(),
            caller: self.method.selector.clone(),
        })
    }

    // ── value templates ─────────────────────────────────────────────────

    fn template(
        &mut self,
        template: TemplateKind,
        receiver: &ExprNode,
        args: &[ExprNode],
    ) -> Result<Operand, LowerError> {
        match template {
            TemplateKind::StackAt => {
                if !matches!(receiver, ExprNode::VarRef(n) if n == "self") {
                    return Err(LowerError::BadStackIndex);
                }
                let index = match args.first() {
                    Some(ExprNode::Literal(Literal::Integer(v))) if *v >= 0 => *v as u32,
                    _ => return Err(LowerError::BadStackIndex),
                };
                let dest = self.fresh();
                self.emit(Instr::ArgSlotRead { dest, index });
                Ok(Operand::Vreg(dest))
            }
            TemplateKind::WordAt => {
                let base = self.expr(receiver)?;
                let index = self.expr(&args[0])?;
                let dest = self.fresh();
                self.emit(Instr::LoadWord { dest, base: MemBase::Operand(base), index });
                Ok(Operand::Vreg(dest))
            }
            TemplateKind::WordAtPut => {
                let base = self.expr(receiver)?;
                let index = self.expr(&args[0])?;
                let value = self.expr(&args[1])?;
                self.emit(Instr::StoreWord { base: MemBase::Operand(base), index, value });
                Ok(value)
            }
            TemplateKind::BitShift => self.bit_shift(receiver, &args[0]),
            _ => {
                let signed = self.expr_is_signed(receiver);
                let lhs = self.expr(receiver)?;
                let rhs = self.expr(&args[0])?;
                let dest = self.fresh();
                match template {
                    TemplateKind::Add => self.binary(BinOp::Add, dest, lhs, rhs, false),
                    TemplateKind::Sub => self.binary(BinOp::Sub, dest, lhs, rhs, false),
                    TemplateKind::Mul => self.binary(BinOp::Mul, dest, lhs, rhs, false),
                    TemplateKind::Div => self.binary(BinOp::Div, dest, lhs, rhs, true),
                    TemplateKind::Mod => self.binary(BinOp::Mod, dest, lhs, rhs, true),
                    TemplateKind::BitAnd => self.binary(BinOp::Band, dest, lhs, rhs, false),
                    TemplateKind::BitOr => self.binary(BinOp::Bor, dest, lhs, rhs, false),
                    TemplateKind::BitXor => self.binary(BinOp::Bxor, dest, lhs, rhs, false),
                    TemplateKind::CmpEq => self.binary(BinOp::CmpEq, dest, lhs, rhs, true),
                    TemplateKind::CmpLt => self.binary(BinOp::CmpLt, dest, lhs, rhs, true),
                    TemplateKind::CmpLe => self.binary(BinOp::CmpLe, dest, lhs, rhs, true),
                    // swapped-operand and negated comparisons stay in the
                    // thirteen-opcode set
                    TemplateKind::CmpGt => self.binary(BinOp::CmpLt, dest, rhs, lhs, true),
                    TemplateKind::CmpGe => self.binary(BinOp::CmpLe, dest, rhs, lhs, true),
                    TemplateKind::CmpNe => {
                        let eq = self.fresh();
                        self.binary(BinOp::CmpEq, eq, lhs, rhs, true);
                        self.emit(Instr::Binary {
                            op: BinOp::Bxor,
                            dest,
                            lhs: Operand::Vreg(eq),
                            rhs: Operand::Imm(1),
                            signed: false,
                        });
                    }
                    _ => unreachable!("handled above"),
                }
                let _ = signed;
                Ok(Operand::Vreg(dest))
            }
        }
    }

    fn binary(&mut self, op: BinOp, dest: Vreg, lhs: Operand, rhs: Operand, signed: bool) {
        self.emit(Instr::Binary { op, dest, lhs, rhs, signed });
    }

    /// Shift direction follows the sign of the amount. A literal amount is
    /// resolved here; a dynamic amount expands into a two-armed branch.
    fn bit_shift(&mut self, receiver: &ExprNode, amount: &ExprNode) -> Result<Operand, LowerError> {
        let signed = self.expr_is_signed(receiver);
        let value = self.expr(receiver)?;
        if let ExprNode::Literal(Literal::Integer(k)) = amount {
            let dest = self.fresh();
            if *k >= 0 {
                self.binary(BinOp::Shl, dest, value, Operand::Imm(*k), false);
            } else {
                self.binary(BinOp::Shr, dest, value, Operand::Imm(-*k), signed);
            }
            return Ok(Operand::Vreg(dest));
        }
        let amount = self.expr(amount)?;
        let result = self.fresh();
        let nonneg = self.fresh();
        self.binary(BinOp::CmpLe, nonneg, Operand::Imm(0), amount, true);
        let left_block = self.new_block();
        let right_block = self.new_block();
        let join = self.new_block();
        self.terminate(Terminator::BranchIf {
            cond: Operand::Vreg(nonneg),
            then_block: left_block,
            else_block: right_block,
        });
        self.seal_to(left_block);
        self.binary(BinOp::Shl, result, value, amount, false);
        self.terminate(Terminator::Jump(join));
        self.seal_to(right_block);
        let negated = self.fresh();
        self.binary(BinOp::Sub, negated, Operand::Imm(0), amount, false);
        self.binary(BinOp::Shr, result, value, Operand::Vreg(negated), signed);
        self.terminate(Terminator::Jump(join));
        self.seal_to(join);
        Ok(Operand::Vreg(result))
    }

    fn expr_is_signed(&self, expr: &ExprNode) -> bool {
        match expr {
            ExprNode::VarRef(name) => self.method.var_type(name) == BasicType::SignedWord,
            ExprNode::Literal(Literal::Integer(v)) => *v < 0,
            _ => false,
        }
    }

    // ── control templates ───────────────────────────────────────────────

    fn control(
        &mut self,
        kind: ControlKind,
        receiver: &ExprNode,
        args: &[ExprNode],
    ) -> Result<Operand, LowerError> {
        match kind {
            ControlKind::IfTrue => self.lower_if(receiver, Some(&args[0]), None, false),
            ControlKind::IfFalse => self.lower_if(receiver, None, Some(&args[0]), false),
            ControlKind::IfTrueIfFalse => {
                self.lower_if(receiver, Some(&args[0]), Some(&args[1]), false)
            }
            ControlKind::IfFalseIfTrue => {
                self.lower_if(receiver, Some(&args[1]), Some(&args[0]), false)
            }
            ControlKind::WhileTrue => self.lower_while(receiver, &args[0]),
            ControlKind::ToDo => self.lower_to_do(receiver, &args[0], &args[1]),
        }
    }

    fn block_parts<'e>(
        &self,
        expr: &'e ExprNode,
        selector: &str,
    ) -> Result<(&'e [String], &'e [String], &'e [StatementNode]), LowerError> {
        match expr {
            ExprNode::Block { params, temps, body } => Ok((params, temps, body)),
            _ => Err(LowerError::NonBlockControlArg { selector: selector.to_string() }),
        }
    }

    /// Inline a block body in a child scope, producing the value of its
    /// final expression (0 for an empty block).
    fn inline_block(
        &mut self,
        params: &[String],
        param_vregs: &[Vreg],
        temps: &[String],
        body: &[StatementNode],
    ) -> Result<Operand, LowerError> {
        let scope_id = self.scopes.scopes.len();
        let mut vars = Vec::new();
        for (name, &vreg) in params.iter().zip(param_vregs) {
            vars.push((name.clone(), vreg));
        }
        let mut temp_vregs = Vec::new();
        for t in temps {
            let v = self.fresh();
            vars.push((t.clone(), v));
            temp_vregs.push(v);
        }
        self.scopes.scopes.push(Scope { parent: Some(self.current_scope), vars });
        let saved_scope = self.current_scope;
        self.current_scope = scope_id;
        for v in temp_vregs {
            self.emit(Instr::Move { dest: v, src: Operand::Imm(0) });
        }
        let mut last = Operand::Imm(0);
        for (i, statement) in body.iter().enumerate() {
            if self.terminated {
                break;
            }
            match statement {
                StatementNode::Expr(expr) if i == body.len() - 1 => {
                    last = self.expr(expr)?;
                }
                _ => {
                    self.statement(statement)?;
                }
            }
        }
        self.current_scope = saved_scope;
        Ok(last)
    }

    fn lower_if(
        &mut self,
        cond: &ExprNode,
        then_arm: Option<&ExprNode>,
        else_arm: Option<&ExprNode>,
        _value_required: bool,
    ) -> Result<Operand, LowerError> {
        let cond_op = self.expr(cond)?;
        let result = self.fresh();
        let then_block = self.new_block();
        let else_block = self.new_block();
        let join = self.new_block();
        self.terminate(Terminator::BranchIf {
            cond: cond_op,
            then_block,
            else_block,
        });

        self.seal_to(then_block);
        let value = match then_arm {
            Some(arm) => {
                let (params, temps, body) = self.block_parts(arm, "ifTrue:")?;
                if !params.is_empty() {
                    return Err(LowerError::NonBlockControlArg { selector: "ifTrue:".into() });
                }
                self.inline_block(params, &[], temps, body)?
            }
            None => Operand::Imm(0),
        };
        self.emit(Instr::Move { dest: result, src: value });
        self.terminate(Terminator::Jump(join));

        self.seal_to(else_block);
        let value = match else_arm {
            Some(arm) => {
                let (params, temps, body) = self.block_parts(arm, "ifFalse:")?;
                if !params.is_empty() {
                    return Err(LowerError::NonBlockControlArg { selector: "ifFalse:".into() });
                }
                self.inline_block(params, &[], temps, body)?
            }
            None => Operand::Imm(0),
        };
        self.emit(Instr::Move { dest: result, src: value });
        self.terminate(Terminator::Jump(join));

        self.seal_to(join);
        Ok(Operand::Vreg(result))
    }

    fn lower_while(&mut self, cond: &ExprNode, body: &ExprNode) -> Result<Operand, LowerError> {
        let (cparams, ctemps, cbody) = self.block_parts(cond, "whileTrue:")?;
        let (bparams, btemps, bbody) = self.block_parts(body, "whileTrue:")?;
        if !cparams.is_empty() || !bparams.is_empty() {
            return Err(LowerError::NonBlockControlArg { selector: "whileTrue:".into() });
        }
        let header = self.new_block();
        let body_block = self.new_block();
        let exit = self.new_block();
        self.terminate(Terminator::Jump(header));

        self.seal_to(header);
        let cond_value = self.inline_block(cparams, &[], ctemps, cbody)?;
        self.terminate(Terminator::BranchIf {
            cond: cond_value,
            then_block: body_block,
            else_block: exit,
        });

        self.seal_to(body_block);
        self.inline_block(bparams, &[], btemps, bbody)?;
        self.terminate(Terminator::Jump(header));

        self.seal_to(exit);
        Ok(Operand::Imm(0))
    }

    fn lower_to_do(
        &mut self,
        start: &ExprNode,
        end: &ExprNode,
        body: &ExprNode,
    ) -> Result<Operand, LowerError> {
        let (params, temps, statements) = self.block_parts(body, "to:do:")?;
        if params.len() != 1 {
            return Err(LowerError::NonBlockControlArg { selector: "to:do:".into() });
        }
        let start_op = self.expr(start)?;
        let end_op = self.expr(end)?;
        // the bound is evaluated once, before the loop
        let limit = self.fresh();
        self.emit(Instr::Move { dest: limit, src: end_op });
        let counter = self.fresh();
        self.emit(Instr::Move { dest: counter, src: start_op });

        let header = self.new_block();
        let body_block = self.new_block();
        let exit = self.new_block();
        self.terminate(Terminator::Jump(header));

        self.seal_to(header);
        let in_range = self.fresh();
        self.binary(
            BinOp::CmpLe,
            in_range,
            Operand::Vreg(counter),
            Operand::Vreg(limit),
            true,
        );
        self.terminate(Terminator::BranchIf {
            cond: Operand::Vreg(in_range),
            then_block: body_block,
            else_block: exit,
        });

        self.seal_to(body_block);
        self.inline_block(params, &[counter], temps, statements)?;
        self.binary(
            BinOp::Add,
            counter,
            Operand::Vreg(counter),
            Operand::Imm(1),
            false,
        );
        self.terminate(Terminator::Jump(header));

        self.seal_to(exit);
        Ok(Operand::Imm(0))
    }
}
