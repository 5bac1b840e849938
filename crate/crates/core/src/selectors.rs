//! Selector classification shared by reachability, lowering, the AST
//! interpreter and send classification in codegen.

/// Selectors backed by inlined native templates rather than Slang methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    BitAnd,
    BitOr,
    BitXor,
    BitShift,
    CmpEq,
    CmpNe,
    CmpLt,
    CmpLe,
    CmpGt,
    CmpGe,
    WordAt,
    WordAtPut,
    StackAt,
}

impl TemplateKind {
    pub fn operand_count(self) -> usize {
        match self {
            TemplateKind::WordAtPut => 3,
            TemplateKind::StackAt => 1,
            _ => 2,
        }
    }

    pub fn selector(self) -> &'static str {
        match self {
            TemplateKind::Add => "+",
            TemplateKind::Sub => "-",
            TemplateKind::Mul => "*",
            TemplateKind::Div => "//",
            TemplateKind::Mod => "\\\\",
            TemplateKind::BitAnd => "bitAnd:",
            TemplateKind::BitOr => "bitOr:",
            TemplateKind::BitXor => "bitXor:",
            TemplateKind::BitShift => "bitShift:",
            TemplateKind::CmpEq => "=",
            TemplateKind::CmpNe => "~=",
            TemplateKind::CmpLt => "<",
            TemplateKind::CmpLe => "<=",
            TemplateKind::CmpGt => ">",
            TemplateKind::CmpGe => ">=",
            TemplateKind::WordAt => "wordAt:",
            TemplateKind::WordAtPut => "wordAt:put:",
            TemplateKind::StackAt => "stackAt:",
        }
    }
}

pub const ALL_TEMPLATES: &[TemplateKind] = &[
    TemplateKind::Add,
    TemplateKind::Sub,
    TemplateKind::Mul,
    TemplateKind::Div,
    TemplateKind::Mod,
    TemplateKind::BitAnd,
    TemplateKind::BitOr,
    TemplateKind::BitXor,
    TemplateKind::BitShift,
    TemplateKind::CmpEq,
    TemplateKind::CmpNe,
    TemplateKind::CmpLt,
    TemplateKind::CmpLe,
    TemplateKind::CmpGt,
    TemplateKind::CmpGe,
    TemplateKind::WordAt,
    TemplateKind::WordAtPut,
    TemplateKind::StackAt,
];

pub fn template_for(selector: &str) -> Option<TemplateKind> {
    ALL_TEMPLATES.iter().copied().find(|t| t.selector() == selector)
}

/// Control-flow templates expanded into CFG blocks during lowering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    IfTrue,
    IfFalse,
    IfTrueIfFalse,
    IfFalseIfTrue,
    WhileTrue,
    ToDo,
}

pub fn control_for(selector: &str) -> Option<ControlKind> {
    match selector {
        "ifTrue:" => Some(ControlKind::IfTrue),
        "ifFalse:" => Some(ControlKind::IfFalse),
        "ifTrue:ifFalse:" => Some(ControlKind::IfTrueIfFalse),
        "ifFalse:ifTrue:" => Some(ControlKind::IfFalseIfTrue),
        "whileTrue:" => Some(ControlKind::WhileTrue),
        "to:do:" => Some(ControlKind::ToDo),
        _ => None,
    }
}

/// True for any selector resolved without a Slang method: value templates
/// or control templates.
pub fn is_template_selector(selector: &str) -> bool {
    template_for(selector).is_some() || control_for(selector).is_some()
}

/// Selectors only the AST interpreter understands; they back the reflective
/// instrumentation baseline and are rejected by the native pipeline.
pub fn is_reflective_builtin(selector: &str) -> bool {
    matches!(
        selector,
        "unmodifiedBasicNew" | "guardContains:" | "stackDepth" | "stackSelectorAt:"
    )
}
