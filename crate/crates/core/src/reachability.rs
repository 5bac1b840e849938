//! Closure of methods that must be nativized before an entry method can
//! run. Resolution is by selector only; Slang binds statically and has no
//! polymorphism, only modularization.

use crate::frontend::{ExprNode, MethodNode, StatementNode};
use crate::selectors;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ReachabilityError {
    #[error("send of #{selector} from #{caller} matches no method, template or VM function")]
    UnknownSelector { selector: String, caller: String },
    #[error("selector #{0} would be in more than one of methods/templates/VM functions")]
    OverlappingName(String),
}

/// All statically known callees: user methods, the fixed template set and
/// the registered VM functions. The three name sets are disjoint.
#[derive(Debug, Clone, Default)]
pub struct MethodTable {
    methods: BTreeMap<String, MethodNode>,
    vm_functions: BTreeMap<String, usize>, // name -> arity
}

impl MethodTable {
    pub fn new() -> Self {
        MethodTable::default()
    }

    pub fn insert_method(&mut self, method: MethodNode) -> Result<(), ReachabilityError> {
        let name = method.selector.clone();
        if selectors::is_template_selector(&name) || self.vm_functions.contains_key(&name) {
            return Err(ReachabilityError::OverlappingName(name));
        }
        self.methods.insert(name, method);
        Ok(())
    }

    pub fn register_vm_function(
        &mut self,
        name: &str,
        arity: usize,
    ) -> Result<(), ReachabilityError> {
        if selectors::is_template_selector(name) || self.methods.contains_key(name) {
            return Err(ReachabilityError::OverlappingName(name.to_string()));
        }
        self.vm_functions.insert(name.to_string(), arity);
        Ok(())
    }

    pub fn method(&self, selector: &str) -> Option<&MethodNode> {
        self.methods.get(selector)
    }

    pub fn methods(&self) -> impl Iterator<Item = (&String, &MethodNode)> {
        self.methods.iter()
    }

    pub fn has_vm_function(&self, name: &str) -> bool {
        self.vm_functions.contains_key(name)
    }

    pub fn vm_function_arity(&self, name: &str) -> Option<usize> {
        self.vm_functions.get(name).copied()
    }
}

/// Result of the reachability walk: entry first, then callees in
/// depth-first discovery order, plus the leaves that terminate the walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachableSet {
    pub selectors: Vec<String>,
    pub templates_used: BTreeSet<String>,
    pub vm_functions_used: BTreeSet<String>,
}

pub fn reachable_methods(
    entry: &str,
    table: &MethodTable,
) -> Result<ReachableSet, ReachabilityError> {
    if table.method(entry).is_none() {
        return Err(ReachabilityError::UnknownSelector {
            selector: entry.to_string(),
            caller: "<entry>".to_string(),
        });
    }
    let mut set = ReachableSet {
        selectors: Vec::new(),
        templates_used: BTreeSet::new(),
        vm_functions_used: BTreeSet::new(),
    };
    let mut visited = BTreeSet::new();
    visit(entry, table, &mut visited, &mut set)?;
    Ok(set)
}

fn visit(
    selector: &str,
    table: &MethodTable,
    visited: &mut BTreeSet<String>,
    set: &mut ReachableSet,
) -> Result<(), ReachabilityError> {
    if !visited.insert(selector.to_string()) {
        return Ok(());
    }
    set.selectors.push(selector.to_string());
    let method = table.method(selector).expect("visited selectors are table methods");
    let mut callees = Vec::new();
    for statement in &method.body {
        collect_statement(statement, &mut callees);
    }
    for callee in callees {
        match callee {
            Callee::Send(name) => {
                if selectors::is_template_selector(&name) {
                    set.templates_used.insert(name);
                } else if table.method(&name).is_some() {
                    visit(&name, table, visited, set)?;
                } else if table.has_vm_function(&name) {
                    // a selector doubling as a VM function name is a direct call
                    set.vm_functions_used.insert(name);
                } else {
                    return Err(ReachabilityError::UnknownSelector {
                        selector: name,
                        caller: selector.to_string(),
                    });
                }
            }
            Callee::VmFunction(name) => {
                if table.has_vm_function(&name) {
                    set.vm_functions_used.insert(name);
                } else {
                    return Err(ReachabilityError::UnknownSelector {
                        selector: name,
                        caller: selector.to_string(),
                    });
                }
            }
        }
    }
    Ok(())
}

enum Callee {
    Send(String),
    VmFunction(String),
}

fn collect_statement(statement: &StatementNode, out: &mut Vec<Callee>) {
    match statement {
        StatementNode::Assign { expr, .. }
        | StatementNode::Return(expr)
        | StatementNode::Expr(expr) => collect_expr(expr, out),
    }
}

/// Callees in evaluation order: receiver, arguments, then the send itself.
fn collect_expr(expr: &ExprNode, out: &mut Vec<Callee>) {
    match expr {
        ExprNode::Literal(_) | ExprNode::VarRef(_) => {}
        ExprNode::Send { receiver, selector, args } => {
            collect_expr(receiver, out);
            for arg in args {
                collect_expr(arg, out);
            }
            out.push(Callee::Send(selector.clone()));
        }
        ExprNode::Block { body, .. } => {
            for statement in body {
                collect_statement(statement, out);
            }
        }
        ExprNode::VmCall { function_name, args } => {
            for arg in args {
                collect_expr(arg, out);
            }
            out.push(Callee::VmFunction(function_name.clone()));
        }
    }
}
