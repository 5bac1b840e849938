//! AST interpreter: the reference semantics for Slang methods and the
//! substrate of the "reflective" execution mode.
//!
//! Send resolution order: control templates, value templates, the
//! reflective builtins (`unmodifiedBasicNew`, `guardContains:`,
//! `stackDepth`), installed primitive slots (so instrumented primitives
//! re-enter the dispatcher, recursion trap included), then
//! statically bound table methods, then selectors naming VM functions.
//!
//! Interpreter frames live on the VM (not the host stack) so variables
//! declared `<var: #x type: #oop>` are visible to the collector and get
//! forwarded when a collection moves their referents.

use super::{InterpFrame, RuntimeError, VmCore};
use crate::frontend::{BasicType, ExprNode, Literal, MethodNode, StatementNode};
use crate::ir::interp::binary_op;
use crate::ir::{BinOp, IrEvalError};
use crate::selectors::{self, ControlKind, TemplateKind};

/// Frame ceiling; runaway reflective recursion trips this before the host
/// stack is at risk.
const MAX_FRAMES: usize = 400;

enum Ctl {
    Val(u64),
    Ret(u64),
}

macro_rules! value {
    ($e:expr) => {
        match $e? {
            Ctl::Val(v) => v,
            ret @ Ctl::Ret(_) => return Ok(ret),
        }
    };
}

pub(crate) fn ast_interpret_core(
    core: &mut VmCore,
    method: &MethodNode,
    receiver: u64,
    args: &[u64],
) -> Result<u64, IrEvalError> {
    // the budget spans one top-level interpretation, including everything
    // it re-enters through the dispatcher
    if core.interp_nesting == 0 {
        core.interp_steps = core.step_budget;
    }
    core.interp_nesting += 1;
    let result = interpret_activation(core, method, receiver, args);
    core.interp_nesting -= 1;
    result
}

fn interpret_activation(
    core: &mut VmCore,
    method: &MethodNode,
    receiver: u64,
    args: &[u64],
) -> Result<u64, IrEvalError> {
    if args.len() != method.params.len() {
        return Err(IrEvalError::ArityMismatch {
            expected: method.params.len(),
            found: args.len(),
        });
    }
    let mut names = Vec::with_capacity(1 + method.params.len() + method.temps.len());
    let mut vars = Vec::with_capacity(names.capacity());
    let mut oop_flags = Vec::with_capacity(names.capacity());
    names.push("self".to_string());
    vars.push(receiver);
    oop_flags.push(false);
    for (param, &arg) in method.params.iter().zip(args.iter()) {
        names.push(param.clone());
        vars.push(arg);
        oop_flags.push(method_var_is_oop(method, param));
    }
    for temp in &method.temps {
        names.push(temp.clone());
        vars.push(0);
        oop_flags.push(method_var_is_oop(method, temp));
    }
    if core.interp_frames.len() >= MAX_FRAMES {
        return Err(IrEvalError::StepBudgetExceeded);
    }
    core.interp_frames.push(InterpFrame {
        selector: std::rc::Rc::from(method.selector.as_str()),
        is_activation: true,
        parent: None,
        names,
        vars,
        oop_flags,
    });
    let frame = core.interp_frames.len() - 1;
    let result = eval_body(core, frame, method, &method.body);
    core.interp_frames.truncate(frame);
    match result? {
        Ctl::Ret(v) => Ok(v),
        // falling off the end answers the receiver's current value
        Ctl::Val(_) => Ok(read_var(core, frame, "self").unwrap_or(receiver)),
    }
}

fn method_var_is_oop(method: &MethodNode, name: &str) -> bool {
    method.var_type(name) == BasicType::OopRef
}

fn step(core: &mut VmCore) -> Result<(), IrEvalError> {
    core.interp_steps = core
        .interp_steps
        .checked_sub(1)
        .ok_or(IrEvalError::StepBudgetExceeded)?;
    Ok(())
}

fn lookup(core: &VmCore, frame: usize, name: &str) -> Option<(usize, usize)> {
    let mut current = Some(frame);
    while let Some(fi) = current {
        let f = &core.interp_frames[fi];
        if let Some(vi) = f.names.iter().position(|n| n == name) {
            return Some((fi, vi));
        }
        current = f.parent;
    }
    None
}

fn read_var(core: &VmCore, frame: usize, name: &str) -> Option<u64> {
    // receiver is pinned to the activation frame, not block scopes
    lookup(core, frame, name).map(|(fi, vi)| core.interp_frames[fi].vars[vi])
}

fn eval_body(
    core: &mut VmCore,
    frame: usize,
    method: &MethodNode,
    body: &[StatementNode],
) -> Result<Ctl, IrEvalError> {
    let mut last = 0u64;
    for (i, statement) in body.iter().enumerate() {
        let is_last = i == body.len() - 1;
        match statement {
            StatementNode::Return(expr) => {
                let v = value!(eval_expr(core, frame, method, expr));
                return Ok(Ctl::Ret(v));
            }
            StatementNode::Assign { target, expr } => {
                let v = value!(eval_expr(core, frame, method, expr));
                match lookup(core, frame, target) {
                    Some((fi, vi)) => core.interp_frames[fi].vars[vi] = v,
                    None => {
                        return Err(IrEvalError::VmFault {
                            function: target.clone(),
                            message: "assignment to unknown variable".to_string(),
                        })
                    }
                }
                last = v;
            }
            StatementNode::Expr(expr) => {
                last = value!(eval_expr(core, frame, method, expr));
                let _ = is_last;
            }
        }
    }
    Ok(Ctl::Val(last))
}

fn eval_expr(
    core: &mut VmCore,
    frame: usize,
    method: &MethodNode,
    expr: &ExprNode,
) -> Result<Ctl, IrEvalError> {
    step(core)?;
    match expr {
        ExprNode::Literal(lit) => Ok(Ctl::Val(eval_literal(core, lit))),
        ExprNode::VarRef(name) => match read_var(core, frame, name) {
            Some(v) => Ok(Ctl::Val(v)),
            None => match core.global_word(name) {
                Some(v) => Ok(Ctl::Val(v)),
                None => Err(IrEvalError::VmFault {
                    function: name.clone(),
                    message: "unknown variable".to_string(),
                }),
            },
        },
        ExprNode::Send { receiver, selector, args } => {
            eval_send(core, frame, method, receiver, selector, args)
        }
        ExprNode::Block { .. } => Err(IrEvalError::VmFault {
            function: "block".to_string(),
            message: "block used outside a control template".to_string(),
        }),
        ExprNode::VmCall { function_name, args } => {
            let mut words = Vec::with_capacity(args.len());
            for arg in args {
                words.push(value!(eval_expr(core, frame, method, arg)));
            }
            Ok(Ctl::Val(core.call_vm_function(function_name, &words)?))
        }
    }
}

fn eval_literal(core: &mut VmCore, lit: &Literal) -> u64 {
    match lit {
        Literal::Integer(v) => *v as u64,
        Literal::Character(c) => *c as u64,
        Literal::Symbol(s) => core.intern_symbol(s) as u64,
        Literal::Boolean(b) => *b as u64,
        Literal::Nil => core.nil().raw(),
    }
}

fn eval_send(
    core: &mut VmCore,
    frame: usize,
    method: &MethodNode,
    receiver: &ExprNode,
    selector: &str,
    args: &[ExprNode],
) -> Result<Ctl, IrEvalError> {
    if let Some(kind) = selectors::control_for(selector) {
        return eval_control(core, frame, method, kind, receiver, args);
    }
    if let Some(template) = selectors::template_for(selector) {
        return eval_template(core, frame, method, template, receiver, args);
    }
    match selector {
        "unmodifiedBasicNew" => {
            let recv = value!(eval_expr(core, frame, method, receiver));
            let oop = core
                .allocate_instance(super::Oop(recv))
                .map_err(|e| IrEvalError::VmFault {
                    function: "unmodifiedBasicNew".to_string(),
                    message: e.to_string(),
                })?;
            return Ok(Ctl::Val(oop.raw()));
        }
        "guardContains:" => {
            let name = match args.first() {
                Some(ExprNode::Literal(Literal::Symbol(s))) => s.clone(),
                _ => {
                    return Err(IrEvalError::VmFault {
                        function: "guardContains:".to_string(),
                        message: "expects a symbol literal".to_string(),
                    })
                }
            };
            return Ok(Ctl::Val(core.guard_contains(&name) as u64));
        }
        "stackDepth" => {
            let depth = core.interp_frames.iter().filter(|f| f.is_activation).count();
            return Ok(Ctl::Val(depth as u64));
        }
        "stackSelectorAt:" => {
            let index = value!(eval_expr(core, frame, method, &args[0])) as usize;
            let id = core
                .activation_selector_at(index)
                .map(|name| core.intern_symbol(&name) as u64)
                .unwrap_or(0);
            return Ok(Ctl::Val(id));
        }
        _ => {}
    }

    // installed primitives dispatch through the slot machinery, so an
    // instrumented primitive that allocates re-enters itself
    if core.has_slot(selector) {
        let recv = value!(eval_expr(core, frame, method, receiver));
        let mut words = Vec::with_capacity(args.len());
        for arg in args {
            words.push(value!(eval_expr(core, frame, method, arg)));
        }
        let oops: Vec<super::Oop> = words.iter().map(|&w| super::Oop(w)).collect();
        return match core.call_primitive(selector, super::Oop(recv), &oops) {
            Ok(oop) => Ok(Ctl::Val(oop.raw())),
            Err(RuntimeError::Eval(e)) => Err(e),
            Err(e) => Err(IrEvalError::VmFault {
                function: selector.to_string(),
                message: e.to_string(),
            }),
        };
    }

    if let Some(callee) = core.method_table.method(selector).cloned() {
        let recv = value!(eval_expr(core, frame, method, receiver));
        let mut words = Vec::with_capacity(args.len());
        for arg in args {
            words.push(value!(eval_expr(core, frame, method, arg)));
        }
        return Ok(Ctl::Val(ast_interpret_core(core, &callee, recv, &words)?));
    }

    if core.method_table.has_vm_function(selector) {
        let _recv = value!(eval_expr(core, frame, method, receiver));
        let mut words = Vec::with_capacity(args.len());
        for arg in args {
            words.push(value!(eval_expr(core, frame, method, arg)));
        }
        return Ok(Ctl::Val(core.call_vm_function(selector, &words)?));
    }

    Err(IrEvalError::UnknownInternal(selector.to_string()))
}

fn eval_template(
    core: &mut VmCore,
    frame: usize,
    method: &MethodNode,
    template: TemplateKind,
    receiver: &ExprNode,
    args: &[ExprNode],
) -> Result<Ctl, IrEvalError> {
    match template {
        TemplateKind::StackAt => {
            let index = match args.first() {
                Some(ExprNode::Literal(Literal::Integer(v))) if *v >= 0 => *v as usize,
                _ => {
                    return Err(IrEvalError::VmFault {
                        function: "stackAt:".to_string(),
                        message: "requires a non-negative literal index".to_string(),
                    })
                }
            };
            if index >= super::ARG_SLOT_CAPACITY {
                return Err(IrEvalError::VmFault {
                    function: "stackAt:".to_string(),
                    message: "index beyond slot capacity".to_string(),
                });
            }
            Ok(Ctl::Val(core.arg_slot_argument(index)))
        }
        TemplateKind::WordAt => {
            let base = value!(eval_expr(core, frame, method, receiver));
            let index = value!(eval_expr(core, frame, method, &args[0]));
            let address = base.wrapping_add(index.wrapping_mul(8));
            Ok(Ctl::Val(unsafe { std::ptr::read(address as *const u64) }))
        }
        TemplateKind::WordAtPut => {
            let base = value!(eval_expr(core, frame, method, receiver));
            let index = value!(eval_expr(core, frame, method, &args[0]));
            let val = value!(eval_expr(core, frame, method, &args[1]));
            let address = base.wrapping_add(index.wrapping_mul(8));
            unsafe { std::ptr::write(address as *mut u64, val) };
            Ok(Ctl::Val(val))
        }
        TemplateKind::BitShift => {
            let signed = expr_is_signed(method, receiver);
            let val = value!(eval_expr(core, frame, method, receiver));
            let amount = value!(eval_expr(core, frame, method, &args[0])) as i64;
            let word = if amount >= 0 {
                binary_op(BinOp::Shl, val, amount as u64, false)?
            } else {
                binary_op(BinOp::Shr, val, (-amount) as u64, signed)?
            };
            Ok(Ctl::Val(word))
        }
        kind => {
            let lhs = value!(eval_expr(core, frame, method, receiver));
            let rhs = value!(eval_expr(core, frame, method, &args[0]));
            let word = match kind {
                TemplateKind::Add => binary_op(BinOp::Add, lhs, rhs, false)?,
                TemplateKind::Sub => binary_op(BinOp::Sub, lhs, rhs, false)?,
                TemplateKind::Mul => binary_op(BinOp::Mul, lhs, rhs, false)?,
                TemplateKind::Div => binary_op(BinOp::Div, lhs, rhs, true)?,
                TemplateKind::Mod => binary_op(BinOp::Mod, lhs, rhs, true)?,
                TemplateKind::BitAnd => binary_op(BinOp::Band, lhs, rhs, false)?,
                TemplateKind::BitOr => binary_op(BinOp::Bor, lhs, rhs, false)?,
                TemplateKind::BitXor => binary_op(BinOp::Bxor, lhs, rhs, false)?,
                TemplateKind::CmpEq => binary_op(BinOp::CmpEq, lhs, rhs, true)?,
                TemplateKind::CmpLt => binary_op(BinOp::CmpLt, lhs, rhs, true)?,
                TemplateKind::CmpLe => binary_op(BinOp::CmpLe, lhs, rhs, true)?,
                TemplateKind::CmpGt => binary_op(BinOp::CmpLt, rhs, lhs, true)?,
                TemplateKind::CmpGe => binary_op(BinOp::CmpLe, rhs, lhs, true)?,
                TemplateKind::CmpNe => binary_op(BinOp::CmpEq, lhs, rhs, true)? ^ 1,
                _ => unreachable!("handled above"),
            };
            Ok(Ctl::Val(word))
        }
    }
}

fn expr_is_signed(method: &MethodNode, expr: &ExprNode) -> bool {
    match expr {
        ExprNode::VarRef(name) => method.var_type(name) == BasicType::SignedWord,
        ExprNode::Literal(Literal::Integer(v)) => *v < 0,
        _ => false,
    }
}

fn eval_control(
    core: &mut VmCore,
    frame: usize,
    method: &MethodNode,
    kind: ControlKind,
    receiver: &ExprNode,
    args: &[ExprNode],
) -> Result<Ctl, IrEvalError> {
    match kind {
        ControlKind::IfTrue | ControlKind::IfFalse => {
            let cond = value!(eval_expr(core, frame, method, receiver));
            let wanted = matches!(kind, ControlKind::IfTrue);
            if (cond != 0) == wanted {
                eval_inline_block(core, frame, method, &args[0], &[])
            } else {
                Ok(Ctl::Val(0))
            }
        }
        ControlKind::IfTrueIfFalse | ControlKind::IfFalseIfTrue => {
            let cond = value!(eval_expr(core, frame, method, receiver));
            let (on_true, on_false) = if matches!(kind, ControlKind::IfTrueIfFalse) {
                (&args[0], &args[1])
            } else {
                (&args[1], &args[0])
            };
            let arm = if cond != 0 { on_true } else { on_false };
            eval_inline_block(core, frame, method, arm, &[])
        }
        ControlKind::WhileTrue => loop {
            let cond = value!(eval_inline_block(core, frame, method, receiver, &[]));
            if cond == 0 {
                return Ok(Ctl::Val(0));
            }
            value!(eval_inline_block(core, frame, method, &args[0], &[]));
        },
        ControlKind::ToDo => {
            let start = value!(eval_expr(core, frame, method, receiver)) as i64;
            let limit = value!(eval_expr(core, frame, method, &args[0])) as i64;
            let mut counter = start;
            while counter <= limit {
                value!(eval_inline_block(core, frame, method, &args[1], &[counter as u64]));
                counter += 1;
            }
            Ok(Ctl::Val(0))
        }
    }
}

/// Evaluate a block literal inline, in a child scope of `frame`.
fn eval_inline_block(
    core: &mut VmCore,
    frame: usize,
    method: &MethodNode,
    block: &ExprNode,
    param_values: &[u64],
) -> Result<Ctl, IrEvalError> {
    let (params, temps, body) = match block {
        ExprNode::Block { params, temps, body } => (params, temps, body),
        // a bare expression in value position behaves like a zero-arg block
        other => return eval_expr(core, frame, method, other),
    };
    if params.len() != param_values.len() {
        return Err(IrEvalError::ArityMismatch {
            expected: params.len(),
            found: param_values.len(),
        });
    }
    if core.interp_frames.len() >= MAX_FRAMES {
        return Err(IrEvalError::StepBudgetExceeded);
    }
    let mut names = Vec::with_capacity(params.len() + temps.len());
    let mut vars = Vec::with_capacity(names.capacity());
    let mut oop_flags = Vec::with_capacity(names.capacity());
    for (name, &value) in params.iter().zip(param_values.iter()) {
        names.push(name.clone());
        vars.push(value);
        oop_flags.push(method_var_is_oop(method, name));
    }
    for temp in temps {
        names.push(temp.clone());
        vars.push(0);
        oop_flags.push(method_var_is_oop(method, temp));
    }
    let selector = core.interp_frames[frame].selector.clone();
    core.interp_frames.push(InterpFrame {
        selector,
        is_activation: false,
        parent: Some(frame),
        names,
        vars,
        oop_flags,
    });
    let child = core.interp_frames.len() - 1;
    let result = eval_body(core, child, method, body);
    core.interp_frames.truncate(child);
    result
}
