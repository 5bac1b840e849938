//! AST node types for the Slang subset.
//!
//! The node set is intentionally small: a method is a selector pattern,
//! optional leading pragmas, temporaries and a statement list. Expressions
//! are literals, variable references, message sends, inline blocks and the
//! `callVMFunction:withArguments:` construct.

use std::fmt;

/// A method as it arrives from a `.slang` file: class, selector and the
/// full source text (pattern line included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceMethod {
    pub class_name: String,
    pub selector: String,
    pub source: String,
}

impl SourceMethod {
    pub fn new(class_name: &str, selector: &str, source: &str) -> Self {
        SourceMethod {
            class_name: class_name.to_string(),
            selector: selector.to_string(),
            source: source.to_string(),
        }
    }
}

/// Basic word-level type assigned to a variable by a pragma (or defaulted).
///
/// Every variable is one machine word; the type only changes how a few
/// operations (arithmetic shift, GC root registration) treat that word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasicType {
    /// Untyped machine word. The default for every variable.
    #[default]
    Word,
    /// Word interpreted as a signed two's-complement integer.
    SignedWord,
    /// Word holding an object reference; registered with the collector
    /// while an interpreter frame is live.
    OopRef,
    /// Word holding a raw memory address, never traced.
    Address,
}

impl BasicType {
    pub fn from_pragma_name(name: &str) -> Option<BasicType> {
        match name {
            "word" => Some(BasicType::Word),
            "int" => Some(BasicType::SignedWord),
            "oop" => Some(BasicType::OopRef),
            "address" => Some(BasicType::Address),
            _ => None,
        }
    }

    pub fn pragma_name(self) -> &'static str {
        match self {
            BasicType::Word => "word",
            BasicType::SignedWord => "int",
            BasicType::OopRef => "oop",
            BasicType::Address => "address",
        }
    }
}

/// Leading method annotation. Metadata only, never executed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PragmaNode {
    /// `<primitive>` — marks the method as installable primitive code.
    Primitive,
    /// `<var: #name type: #word ref: false>` — declares the basic type of
    /// a param or temp, and whether it is passed by reference.
    TypeAnnotation {
        var_name: String,
        basic_type: BasicType,
        by_reference: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    /// Integer fitting a tagged word (i.e. 63 bits signed).
    Integer(i64),
    /// Character literal, value is the code point.
    Character(char),
    /// Symbol literal; interned to a word-sized id when lowered.
    Symbol(String),
    /// `true` / `false`, words 1 and 0.
    Boolean(bool),
    /// `nil`, the distinguished heap object.
    Nil,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprNode {
    Literal(Literal),
    VarRef(String),
    Send {
        receiver: Box<ExprNode>,
        selector: String,
        args: Vec<ExprNode>,
    },
    /// Inline block. Only legal as a direct argument of a control template
    /// (and the receiver of `whileTrue:`); blocks never escape.
    Block {
        params: Vec<String>,
        temps: Vec<String>,
        body: Vec<StatementNode>,
    },
    /// `self callVMFunction: #name withArguments: { .. }`.
    VmCall {
        function_name: String,
        args: Vec<ExprNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatementNode {
    Assign { target: String, expr: ExprNode },
    Return(ExprNode),
    Expr(ExprNode),
}

/// Parsed (and possibly type-annotated) method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodNode {
    pub selector: String,
    pub params: Vec<String>,
    pub pragmas: Vec<PragmaNode>,
    pub temps: Vec<String>,
    pub body: Vec<StatementNode>,
    /// Filled by `annotate_types`; parallel to params ++ temps.
    pub var_types: Vec<(String, BasicType, bool)>,
}

impl MethodNode {
    /// Number of declared arguments, derived from the selector form.
    pub fn arity(&self) -> usize {
        selector_arity(&self.selector)
    }

    pub fn var_type(&self, name: &str) -> BasicType {
        self.var_types
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, t, _)| *t)
            .unwrap_or_default()
    }

    pub fn is_primitive(&self) -> bool {
        self.pragmas.iter().any(|p| matches!(p, PragmaNode::Primitive))
    }
}

/// Arity implied by a selector's form: keyword selectors take one argument
/// per colon, binary selectors one, unary selectors none.
pub fn selector_arity(selector: &str) -> usize {
    if selector.contains(':') {
        selector.bytes().filter(|&b| b == b':').count()
    } else if selector.starts_with(|c: char| !c.is_alphanumeric() && c != '_') {
        1
    } else {
        0
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Integer(v) => write!(f, "{v}"),
            Literal::Character(c) => write!(f, "${c}"),
            Literal::Symbol(s) => write!(f, "#{s}"),
            Literal::Boolean(b) => write!(f, "{b}"),
            Literal::Nil => write!(f, "nil"),
        }
    }
}
