//! Frontend: lexing, parsing, purification and type annotation of the
//! Slang subset.

pub mod annotate;
pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod purify;

pub use annotate::annotate_types;
pub use ast::{
    selector_arity, BasicType, ExprNode, Literal, MethodNode, PragmaNode, SourceMethod,
    StatementNode,
};
pub use parser::parse_method;
pub use printer::print_method;
pub use purify::purify;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FrontendError {
    #[error("parse error at {line}:{column}: {message}")]
    Parse { line: u32, column: u32, message: String },
    #[error("pragma at {line}:{column} follows a non-pragma statement")]
    PragmaPlacement { line: u32, column: u32 },
    #[error("no substitution for inlined-C idiom '{0}'")]
    UnsupportedIdiom(String),
    #[error("type pragma names unknown variable '{0}'")]
    UnknownVariableInPragma(String),
    #[error("variable '{0}' has more than one type annotation")]
    DuplicateAnnotation(String),
}

/// Split a `.slang` bundle into its methods.
///
/// A bundle is a sequence of sections introduced by `ClassName>>pattern`
/// header lines; the method source is the pattern followed by the lines up
/// to the next header. A file without any header line is a single method
/// whose class is `default_class`.
pub fn parse_bundle(text: &str, default_class: &str) -> Result<Vec<SourceMethod>, FrontendError> {
    let mut methods = Vec::new();
    let mut current: Option<(String, String)> = None; // (class, source)
    let mut saw_header = false;
    for line in text.lines() {
        if let Some((class_name, pattern)) = split_bundle_header(line) {
            saw_header = true;
            if let Some((class, source)) = current.take() {
                methods.push(finish_bundle_method(&class, &source)?);
            }
            current = Some((class_name.to_string(), format!("{pattern}\n")));
        } else if let Some((_, source)) = current.as_mut() {
            source.push_str(line);
            source.push('\n');
        } else if !line.trim().is_empty() {
            if saw_header {
                return Err(FrontendError::Parse {
                    line: 1,
                    column: 1,
                    message: "text before first bundle header".to_string(),
                });
            }
            // no headers at all: the whole text is one method
            return Ok(vec![finish_bundle_method(default_class, text)?]);
        }
    }
    if let Some((class, source)) = current.take() {
        methods.push(finish_bundle_method(&class, &source)?);
    }
    if methods.is_empty() {
        return Err(FrontendError::Parse {
            line: 1,
            column: 1,
            message: "bundle contains no methods".to_string(),
        });
    }
    Ok(methods)
}

fn split_bundle_header(line: &str) -> Option<(&str, &str)> {
    let (class, rest) = line.split_once(">>")?;
    let class = class.trim();
    if class.is_empty() || !class.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    Some((class, rest.trim_start()))
}

fn finish_bundle_method(class: &str, source: &str) -> Result<SourceMethod, FrontendError> {
    let mut method = SourceMethod::new(class, "", source);
    let parsed = parse_method(&method)?;
    method.selector = parsed.selector;
    Ok(method)
}
