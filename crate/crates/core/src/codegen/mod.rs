//! Native code generation: frame layout, send classification, inlined
//! primitive templates and the x86-64 emitter with relocation records.

pub mod asm;
pub mod emit;
pub mod frame;

pub use asm::{Asm, Cond, Reg};
pub use emit::{apply_relocations, emit_artifact, emit_native, inline_template};
pub use frame::{layout_frames, FrameContext};

use crate::reachability::MethodTable;
use crate::selectors::{self, ControlKind, TemplateKind};
use thiserror::Error;

/// Word returned by generated code to signal primitive failure to the
/// activation layer. Low bits 0b010 make it neither a tagged small integer
/// nor an aligned heap reference.
pub const PRIMITIVE_FAILURE_WORD: u64 = 0x8000_0000_0000_000A;

/// Byte pattern left at unpatched absolute64 sites.
pub const PLACEHOLDER_BYTE: u8 = 0x7A;

pub fn placeholder_word() -> u64 {
    u64::from_le_bytes([PLACEHOLDER_BYTE; 8])
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CodegenError {
    #[error("unresolved symbol @{0}")]
    UnresolvedSymbol(String),
    #[error("cannot emit instruction: {0}")]
    UnsupportedInstr(String),
    #[error("template takes {expected} operands, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("send of #{0} matches no method, template or VM function")]
    UnknownSelector(String),
    #[error("emission requires SSA form")]
    NotInSsaForm,
}

/// How a send site is compiled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SendKind {
    /// Expanded in place from a fixed native template.
    InlinedTemplate(TemplateId),
    /// Platform C-convention call to a VM function.
    VmFunctionCall,
    /// Slang-to-Slang call; the receiver is an implicit first stack
    /// argument below the declared ones.
    InternalCall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateId {
    Value(TemplateKind),
    Control(ControlKind),
}

pub fn classify_send(selector: &str, table: &MethodTable) -> Result<SendKind, CodegenError> {
    if let Some(t) = selectors::template_for(selector) {
        return Ok(SendKind::InlinedTemplate(TemplateId::Value(t)));
    }
    if let Some(c) = selectors::control_for(selector) {
        return Ok(SendKind::InlinedTemplate(TemplateId::Control(c)));
    }
    if table.has_vm_function(selector) {
        return Ok(SendKind::VmFunctionCall);
    }
    if table.method(selector).is_some() {
        return Ok(SendKind::InternalCall);
    }
    Err(CodegenError::UnknownSelector(selector.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelocKind {
    /// 8-byte absolute address patched into a movabs immediate.
    Absolute64,
    /// 4-byte pc-relative displacement; used by intra-artifact calls and
    /// resolved during emission.
    Relative32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relocation {
    pub offset: usize,
    pub symbol: String,
    pub kind: RelocKind,
    pub patched: bool,
}

/// A fixed native template for one primitive selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimitiveTemplate {
    pub kind: TemplateKind,
}

impl PrimitiveTemplate {
    pub fn new(kind: TemplateKind) -> Self {
        PrimitiveTemplate { kind }
    }

    pub fn selector(&self) -> &'static str {
        self.kind.selector()
    }

    pub fn operand_count(&self) -> usize {
        self.kind.operand_count()
    }
}

/// Operand of a standalone template expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateOperand {
    /// Frame slot (word index).
    Slot(u32),
    Imm(i64),
}

/// Emitted machine code for one compiled primitive: the activation shim,
/// the entry body and every internal callee, with relocation records for
/// the symbols the code references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NativeArtifact {
    pub selector: String,
    pub code: Vec<u8>,
    pub entry_offset: usize,
    pub relocations: Vec<Relocation>,
    pub frame_words: u32,
    /// Offsets of each compiled function body within `code`.
    pub functions: Vec<(String, usize)>,
    /// Mnemonic listing, one instruction per line.
    pub listing: Vec<String>,
}

impl NativeArtifact {
    pub fn unpatched_count(&self) -> usize {
        self.relocations.iter().filter(|r| !r.patched).count()
    }

    /// Offsets whose 8 placeholder bytes have not been overwritten.
    pub fn placeholder_scan(&self) -> Vec<usize> {
        let pattern = [PLACEHOLDER_BYTE; 8];
        self.relocations
            .iter()
            .filter(|r| r.kind == RelocKind::Absolute64)
            .filter(|r| self.code[r.offset..r.offset + 8] == pattern)
            .map(|r| r.offset)
            .collect()
    }

    pub fn dump_listing(&self) -> String {
        let mut out = String::new();
        for line in &self.listing {
            if line.ends_with(':') {
                out.push_str(line);
            } else {
                out.push_str("  ");
                out.push_str(line);
            }
            out.push('\n');
        }
        out
    }
}
