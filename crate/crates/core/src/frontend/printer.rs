//! Pretty-printer emitting parseable Slang source from an AST.
//!
//! Nested sends are printed fully parenthesized so the output reparses to a
//! structurally identical tree regardless of precedence.

use super::ast::*;

pub fn print_method(method: &MethodNode) -> String {
    let mut out = String::new();
    if method.params.is_empty() {
        out.push_str(&method.selector);
    } else if method.selector.contains(':') {
        let parts: Vec<&str> = method.selector.split_terminator(':').collect();
        for (i, (part, param)) in parts.iter().zip(method.params.iter()).enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(part);
            out.push_str(": ");
            out.push_str(param);
        }
    } else {
        out.push_str(&method.selector);
        out.push(' ');
        out.push_str(&method.params[0]);
    }
    out.push('\n');
    for pragma in &method.pragmas {
        match pragma {
            PragmaNode::Primitive => out.push_str("\t<primitive>\n"),
            PragmaNode::TypeAnnotation { var_name, basic_type, by_reference } => {
                out.push_str(&format!(
                    "\t<var: #{} type: #{} ref: {}>\n",
                    var_name,
                    basic_type.pragma_name(),
                    by_reference
                ));
            }
        }
    }
    if !method.temps.is_empty() {
        out.push_str(&format!("\t| {} |\n", method.temps.join(" ")));
    }
    for statement in &method.body {
        out.push('\t');
        print_statement(statement, &mut out);
        out.push_str(".\n");
    }
    out
}

fn print_statement(statement: &StatementNode, out: &mut String) {
    match statement {
        StatementNode::Assign { target, expr } => {
            out.push_str(target);
            out.push_str(" := ");
            print_expr(expr, out);
        }
        StatementNode::Return(expr) => {
            out.push_str("^ ");
            print_expr(expr, out);
        }
        StatementNode::Expr(expr) => print_expr(expr, out),
    }
}

fn print_expr(expr: &ExprNode, out: &mut String) {
    match expr {
        ExprNode::Literal(lit) => out.push_str(&lit.to_string()),
        ExprNode::VarRef(name) => out.push_str(name),
        ExprNode::Send { receiver, selector, args } => {
            print_operand(receiver, out);
            if args.is_empty() {
                out.push(' ');
                out.push_str(selector);
            } else if selector.contains(':') {
                for (part, arg) in selector.split_terminator(':').zip(args.iter()) {
                    out.push(' ');
                    out.push_str(part);
                    out.push_str(": ");
                    print_operand(arg, out);
                }
            } else {
                out.push(' ');
                out.push_str(selector);
                out.push(' ');
                print_operand(&args[0], out);
            }
        }
        ExprNode::Block { params, temps, body } => {
            out.push_str("[ ");
            for p in params {
                out.push(':');
                out.push_str(p);
                out.push(' ');
            }
            if !params.is_empty() {
                out.push_str("| ");
            }
            if !temps.is_empty() {
                out.push_str(&format!("| {} | ", temps.join(" ")));
            }
            for (i, statement) in body.iter().enumerate() {
                if i > 0 {
                    out.push_str(". ");
                }
                print_statement(statement, out);
            }
            out.push_str(" ]");
        }
        ExprNode::VmCall { function_name, args } => {
            out.push_str("self callVMFunction: #");
            out.push_str(function_name);
            out.push_str(" withArguments: {");
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(". ");
                }
                print_expr(arg, out);
            }
            out.push('}');
        }
    }
}

/// Print a receiver or argument, parenthesizing anything that is not atomic.
fn print_operand(expr: &ExprNode, out: &mut String) {
    match expr {
        ExprNode::Literal(_) | ExprNode::VarRef(_) | ExprNode::Block { .. } => {
            print_expr(expr, out)
        }
        _ => {
            out.push('(');
            print_expr(expr, out);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_method, SourceMethod};

    fn roundtrip(src: &str) {
        let parsed = parse_method(&SourceMethod::new("T", "", src)).unwrap();
        let printed = print_method(&parsed);
        let reparsed = parse_method(&SourceMethod::new("T", "", &printed))
            .unwrap_or_else(|e| panic!("reparse of {printed:?} failed: {e}"));
        assert_eq!(parsed, reparsed, "printed form: {printed}");
    }

    #[test]
    fn roundtrips() {
        roundtrip("answer ^ 42");
        roundtrip("double: x ^ x + x");
        roundtrip("f: a | t | t := a * 2 + 1. ^ t");
        roundtrip("g: x ^ x > 0 ifTrue: [ 1 ] ifFalse: [ 0 - 1 ]");
        roundtrip("h: n | s | s := 0. 1 to: n do: [ :i | s := s + i ]. ^ s");
        roundtrip("p\n\t<primitive>\n\t^ self callVMFunction: #primitiveNew withArguments: {}");
        roundtrip("q: x\n\t<var: #x type: #int ref: false>\n\tself callVMFunction: #printOop withArguments: {x}. ^ x");
        roundtrip("w: a | i | i := 0. [ i < a ] whileTrue: [ i := i + 1 ]. ^ i");
    }
}
