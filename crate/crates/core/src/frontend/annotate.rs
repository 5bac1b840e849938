//! Type annotation: walks the method's pragmas and assigns a [`BasicType`]
//! to every param and temp. Variables without an annotation default to
//! `Word`.

use super::ast::{BasicType, MethodNode, PragmaNode};
use super::FrontendError;

pub fn annotate_types(method: &MethodNode) -> Result<MethodNode, FrontendError> {
    let mut out = method.clone();
    let mut var_types: Vec<(String, BasicType, bool)> = out
        .params
        .iter()
        .chain(out.temps.iter())
        .map(|name| (name.clone(), BasicType::Word, false))
        .collect();
    let mut annotated: Vec<&str> = Vec::new();
    for pragma in &method.pragmas {
        if let PragmaNode::TypeAnnotation { var_name, basic_type, by_reference } = pragma {
            let slot = var_types
                .iter_mut()
                .find(|(name, _, _)| name == var_name)
                .ok_or_else(|| FrontendError::UnknownVariableInPragma(var_name.clone()))?;
            if annotated.iter().any(|n| n == var_name) {
                return Err(FrontendError::DuplicateAnnotation(var_name.clone()));
            }
            annotated.push(var_name);
            slot.1 = *basic_type;
            slot.2 = *by_reference;
        }
    }
    out.var_types = var_types;
    Ok(out)
}
