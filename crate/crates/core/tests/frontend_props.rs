//! Frontend invariants over the corpus: print/parse round-trips,
//! purification idempotence, pragma extraction and send arity.

use cascade_core::corpus::EQUIVALENCE_BUNDLE;
use cascade_core::frontend::{
    parse_bundle, parse_method, print_method, purify, selector_arity, ExprNode, MethodNode,
    SourceMethod, StatementNode,
};

fn corpus_methods() -> Vec<(SourceMethod, MethodNode)> {
    parse_bundle(EQUIVALENCE_BUNDLE, "Corpus")
        .unwrap()
        .into_iter()
        .map(|src| {
            let ast = parse_method(&src).unwrap();
            (src, ast)
        })
        .collect()
}

#[test]
fn pretty_print_reparses_to_identical_ast() {
    for (src, ast) in corpus_methods() {
        let printed = print_method(&ast);
        let reparsed = parse_method(&SourceMethod::new(&src.class_name, "", &printed))
            .unwrap_or_else(|e| panic!("{}: {e}\n{printed}", src.selector));
        assert_eq!(ast, reparsed, "{}:\n{printed}", src.selector);
    }
}

#[test]
fn purify_is_idempotent_on_the_corpus() {
    for (src, _) in corpus_methods() {
        let once = purify(&src.source).unwrap();
        assert_eq!(once, src.source, "corpus has no legacy idioms");
        assert_eq!(purify(&once).unwrap(), once);
    }
    let legacy = "probe: oop\n\tself cCode: 'printOop(oop)'.\n\t^ self cCode: 'primitiveNew()'\n";
    let once = purify(legacy).unwrap();
    let twice = purify(&once).unwrap();
    assert_eq!(once, twice);
    assert!(once.contains("callVMFunction: #printOop withArguments: {oop}"));
}

#[test]
fn pragma_extraction_preserves_statement_order() {
    let with_pragma = parse_method(&SourceMethod::new(
        "T",
        "",
        "m: x\n\t<primitive>\n\t<var: #x type: #int>\n\tx := x + 1.\n\tx := x * 2.\n\t^ x\n",
    ))
    .unwrap();
    let without = parse_method(&SourceMethod::new(
        "T",
        "",
        "m: x\n\tx := x + 1.\n\tx := x * 2.\n\t^ x\n",
    ))
    .unwrap();
    assert_eq!(with_pragma.pragmas.len(), 2);
    assert_eq!(with_pragma.body, without.body);
}

#[test]
fn every_send_matches_its_selector_arity() {
    fn walk_expr(expr: &ExprNode, check: &mut impl FnMut(&str, usize)) {
        match expr {
            ExprNode::Send { receiver, selector, args } => {
                check(selector, args.len());
                walk_expr(receiver, check);
                for arg in args {
                    walk_expr(arg, check);
                }
            }
            ExprNode::Block { body, .. } => {
                for statement in body {
                    walk_statement(statement, check);
                }
            }
            ExprNode::VmCall { args, .. } => {
                for arg in args {
                    walk_expr(arg, check);
                }
            }
            ExprNode::Literal(_) | ExprNode::VarRef(_) => {}
        }
    }
    fn walk_statement(statement: &StatementNode, check: &mut impl FnMut(&str, usize)) {
        match statement {
            StatementNode::Assign { expr, .. }
            | StatementNode::Return(expr)
            | StatementNode::Expr(expr) => walk_expr(expr, check),
        }
    }
    let mut sends = 0usize;
    for (src, ast) in corpus_methods() {
        for statement in &ast.body {
            walk_statement(statement, &mut |selector, count| {
                sends += 1;
                assert_eq!(
                    selector_arity(selector),
                    count,
                    "{}: send of #{selector}",
                    src.selector
                );
            });
        }
    }
    assert!(sends > 100, "walked {sends} sends");
}
